use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde_json::json;
use thermalign_core::calibration::{
    calibrate_extrinsics as solve_extrinsics, calibrate_intrinsics as solve_intrinsics, CameraViews,
};
use thermalign_core::dataset::{class_imbalance_files, enet_weights, scan_dataset, ClassStats};
use thermalign_core::eval::{iou_report, ConfusionMatrix};
use thermalign_core::geometry::{undistort_image, undistorted_matrix, LensModel, Resolution};
use thermalign_core::io::{
    read_extrinsics, read_intrinsics, read_json, read_png_u16, read_png_u8, to_json_string, write_json, write_png_u16,
    write_png_u8, CornerFile, ExtrinsicsFile, IntrinsicsFile, IoError,
};
use thermalign_core::raster::Interpolation;
use thermalign_core::registration::{apply_alignment, build_alignment_map, fill_holes, AlignmentStatus};

use crate::error::CliError;
use crate::{
    AlignArgs, CalibrateExtrinsicsArgs, CalibrateIntrinsicsArgs, EvalArgs, FillArgs, InterpArg, ModelArg, StatsArgs,
    WeightsArgs,
};

pub fn print_json(value: &serde_json::Value) {
    print!("{}", to_json_string(value));
}

fn read_corners(path: &Path) -> Result<CornerFile, CliError> {
    Ok(read_json(path)?)
}

fn with_path<E: Into<CliError>>(path: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| e.into().context(path.display())
}

pub fn calibrate_intrinsics(a: &CalibrateIntrinsicsArgs) -> Result<(), CliError> {
    let file = read_corners(&a.corners)?;
    let board = file.board().map_err(with_path(&a.corners))?;
    let views = file.observations().map_err(with_path(&a.corners))?;
    let resolution = match (a.width, a.height, file.resolution()) {
        (Some(w), Some(h), _) => Resolution::new(w, h),
        (None, None, Some(r)) => r,
        _ => {
            return Err(CliError::usage("image size unknown: pass --width and --height or add them to the corner file"))
        }
    };
    let model = match a.model {
        ModelArg::PlumbBob => LensModel::PlumbBob,
        ModelArg::Fisheye => LensModel::Fisheye,
    };
    info!("{}: {} views of a {}x{} board", a.corners.display(), views.len(), board.inner_rows(), board.inner_cols());
    let result = solve_intrinsics(&board, &views, model, resolution)?;
    let mut out = IntrinsicsFile::from_intrinsics(&result.intrinsics);
    out.rms_reproj_px = Some(result.rms_reproj);
    out.view_count = Some(views.len());
    write_json(&a.out, &out)?;
    info!("rms reprojection error {:.4} px, written to {}", result.rms_reproj, a.out.display());
    if a.json {
        print_json(&json!({
            "camera": file.camera,
            "model": model.as_str(),
            "out": a.out,
            "rms_reproj_px": result.rms_reproj,
            "initial_rms_px": result.initial_rms,
            "iterations": result.solver.iterations,
            "views": views.len(),
            "K": out.k,
            "D": out.d,
        }));
    }
    Ok(())
}

pub fn calibrate_extrinsics(a: &CalibrateExtrinsicsArgs) -> Result<(), CliError> {
    let rgb = read_intrinsics(&a.rgb)?;
    let thermal = read_intrinsics(&a.thermal)?;
    let rgb_file = read_corners(&a.corners_rgb)?;
    let th_file = read_corners(&a.corners_thermal)?;
    if rgb_file.board != th_file.board {
        return Err(CliError::data(format!(
            "{} and {} describe different boards",
            a.corners_rgb.display(),
            a.corners_thermal.display()
        )));
    }
    let board = rgb_file.board().map_err(with_path(&a.corners_rgb))?;
    let rgb_views = rgb_file.observations().map_err(with_path(&a.corners_rgb))?;
    let th_views = th_file.observations().map_err(with_path(&a.corners_thermal))?;
    let result = solve_extrinsics(
        &board,
        CameraViews::new(&rgb, &rgb_views),
        CameraViews::new(&thermal, &th_views),
        a.views.as_deref(),
    )?;
    let mut out = ExtrinsicsFile::from_extrinsics(&result.extrinsics);
    out.rms_reproj_px = Some(result.rms_reproj);
    out.shared_views = Some(result.view_ids.clone());
    write_json(&a.out, &out)?;
    info!("{} shared views, rms {:.4} px, written to {}", result.view_ids.len(), result.rms_reproj, a.out.display());
    if a.json {
        print_json(&json!({
            "out": a.out,
            "R": out.r,
            "t_m": out.t_m,
            "rms_reproj_px": result.rms_reproj,
            "initial_rms_px": result.initial_rms,
            "iterations": result.solver.iterations,
            "shared_views": result.view_ids,
        }));
    }
    Ok(())
}

pub fn align(a: &AlignArgs) -> Result<(), CliError> {
    if !(a.occlusion_tol_mm >= 0.0 && a.occlusion_tol_mm.is_finite()) {
        return Err(CliError::usage("--occlusion-tol-mm must be a non-negative number"));
    }
    let depth = read_png_u16(&a.depth)?;
    let thermal_raw = read_png_u16(&a.thermal)?;
    let rgb = read_intrinsics(&a.rgb_intr)?;
    let th = read_intrinsics(&a.th_intr)?;
    let ext = read_extrinsics(&a.ext)?;
    let kp_rgb = undistorted_matrix(&rgb, a.balance)?;
    let kp_th = undistorted_matrix(&th, a.balance)?;
    let thermal = if a.no_undistort {
        thermal_raw
    } else {
        undistort_image(&thermal_raw, &th, &kp_th).map_err(with_path(&a.thermal))?
    };
    let map = build_alignment_map(&depth, &kp_rgb, &kp_th, &ext, a.occlusion_tol_mm).map_err(with_path(&a.depth))?;
    let interp = match a.interp {
        InterpArg::Nearest => Interpolation::Nearest,
        InterpArg::Bilinear => Interpolation::Bilinear,
    };
    let mut aligned = apply_alignment(&map, &thermal, interp).map_err(with_path(&a.thermal))?;
    if a.fill {
        aligned = fill_holes(&aligned, a.max_radius);
    }
    write_png_u16(&a.out, &aligned)?;
    if let Some(p) = &a.status {
        write_png_u8(p, &map.status_image())?;
    }
    let counts = json!({
        "valid": map.count(AlignmentStatus::Valid),
        "no_depth": map.count(AlignmentStatus::NoDepth),
        "out_of_view": map.count(AlignmentStatus::OutOfView),
        "occluded": map.count(AlignmentStatus::Occluded),
    });
    info!("alignment {counts}");
    if a.json {
        print_json(&json!({
            "out": a.out,
            "width": map.width(),
            "height": map.height(),
            "pixels": counts,
            "holes_after_output": aligned.data().iter().filter(|&&v| v == 0).count(),
        }));
    }
    Ok(())
}

pub fn fill(a: &FillArgs) -> Result<(), CliError> {
    let img = read_png_u16(&a.input)?;
    let before = img.data().iter().filter(|&&v| v == 0).count();
    let filled = fill_holes(&img, a.max_radius);
    let after = filled.data().iter().filter(|&&v| v == 0).count();
    write_png_u16(&a.out, &filled)?;
    info!("holes {before} -> {after}");
    if a.json {
        print_json(&json!({ "out": a.out, "holes_before": before, "holes_after": after }));
    }
    Ok(())
}

fn dataset_stats(root: &Path, classes: usize) -> Result<(ClassStats, usize), CliError> {
    let index = scan_dataset(root)?;
    for s in &index.incomplete {
        let missing: Vec<_> = s.missing.iter().map(|m| m.dir_name()).collect();
        warn!("incomplete sample `{}`: missing {}", s.stem, missing.join(", "));
    }
    let stats = class_imbalance_files(&index.label_paths(), classes)?;
    Ok((stats, index.incomplete.len()))
}

pub fn stats(a: &StatsArgs) -> Result<(), CliError> {
    let (stats, incomplete) = dataset_stats(&a.root, a.classes)?;
    if a.json {
        let mut v = stats.to_json();
        v["incomplete"] = incomplete.into();
        print_json(&v);
    } else {
        print!("{}", stats.to_table());
    }
    Ok(())
}

pub fn weights(a: &WeightsArgs) -> Result<(), CliError> {
    let (stats, _) = dataset_stats(&a.root, a.classes)?;
    let w = enet_weights(&stats, a.c)?;
    if a.json {
        let per_class: serde_json::Map<_, _> =
            w.class_names.iter().cloned().zip(w.weights.iter().map(|&x| x.into())).collect();
        print_json(&json!({ "c": w.c, "weights": per_class }));
    } else {
        for (name, x) in w.class_names.iter().zip(&w.weights) {
            println!("{name:<20} {x:.4}");
        }
    }
    Ok(())
}

fn png_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|source| IoError::Io { path: dir.to_path_buf(), source })?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|source| IoError::Io { path: dir.to_path_buf(), source })?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                out.insert(name.to_string(), path);
            }
        }
    }
    Ok(out)
}

pub fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let gt = png_files(&a.gt)?;
    let pred = png_files(&a.pred)?;
    if gt.is_empty() {
        return Err(CliError::data(format!("{}: no label images", a.gt.display())));
    }
    let pairs: Vec<(&PathBuf, PathBuf)> = gt
        .iter()
        .map(|(name, g)| {
            pred.get(name)
                .map(|p| (g, p.clone()))
                .ok_or_else(|| CliError::data(format!("{}: no prediction for this image", g.display())))
        })
        .collect::<Result<_, _>>()?;
    for name in pred.keys().filter(|n| !gt.contains_key(*n)) {
        warn!("prediction {name} has no ground truth and is ignored");
    }
    let zero = ConfusionMatrix::new(a.classes)?;
    let parts: Vec<Result<ConfusionMatrix, CliError>> = pairs
        .par_iter()
        .map(|(g, p)| {
            let gi = read_png_u8(g)?;
            let pi = read_png_u8(p)?;
            zero.accumulate(&gi, &pi).map_err(with_path(p))
        })
        .collect();
    let mut cm = zero.clone();
    for part in parts {
        cm = cm.merge(&part?);
    }
    let report = iou_report(&cm)?;
    print!("{}", report.to_table("eval"));
    if let Some(path) = &a.json {
        let mut v = report.to_json();
        v["images"] = pairs.len().into();
        v["confusion_matrix"] = json!(cm.rows());
        write_json(path, &v)?;
    }
    Ok(())
}
