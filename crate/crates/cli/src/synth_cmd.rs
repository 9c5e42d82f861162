use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde_json::json;
use thermalign_core::calibration::BoardSpec;
use thermalign_core::dataset::colorize;
use thermalign_core::geometry::{undistorted_matrix, Resolution, DEFAULT_BALANCE};
use thermalign_core::io::{
    write_json, write_png_u16, write_png_u8, CornerFile, ExtrinsicsFile, IntrinsicsFile, IoError,
};
use thermalign_core::linalg::Vec3;
use thermalign_core::raster::Raster;
use thermalign_core::synth::{
    calibration_poses, calibration_views, random_scene, render_depth, render_labels, render_thermal, PlanarScene,
    ScenePlane, SyntheticRig,
};

use crate::commands::print_json;
use crate::error::CliError;
use crate::{Preset, SynthArgs};

const BOARD_ROWS: usize = 6;
const BOARD_COLS: usize = 9;
const SQUARE_M: f64 = 0.04;
/// Near boards fill the low-resolution thermal frame, far boards the RGB frame.
const BOARD_DISTANCES_M: [f64; 2] = [0.5, 1.0];
const SCENE_SAMPLES: u64 = 4;
/// Columns the synthetic prediction is shifted by against the ground truth.
const PRED_SHIFT_PX: usize = 6;

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })?;
    Ok(())
}

struct Written(Vec<PathBuf>);

impl Written {
    fn add(&mut self, p: PathBuf) -> PathBuf {
        self.0.push(p.clone());
        p
    }
}

fn write_rig(rig: &SyntheticRig, out: &Path, files: &mut Written) -> Result<(), CliError> {
    write_json(&files.add(out.join("rgb_intrinsics.json")), &IntrinsicsFile::from_intrinsics(&rig.rgb))?;
    write_json(&files.add(out.join("thermal_intrinsics.json")), &IntrinsicsFile::from_intrinsics(&rig.thermal))?;
    write_json(&files.add(out.join("extrinsics.json")), &ExtrinsicsFile::from_extrinsics(&rig.extrinsics))?;
    Ok(())
}

fn calib_views(a: &SynthArgs, files: &mut Written) -> Result<(), CliError> {
    if a.views < 3 {
        return Err(CliError::usage("--views must be at least 3"));
    }
    if !(a.noise_px >= 0.0 && a.noise_px.is_finite()) {
        return Err(CliError::usage("--noise-px must be a non-negative number"));
    }
    let rig = SyntheticRig::pst_like(a.seed);
    let board = BoardSpec::new(BOARD_ROWS, BOARD_COLS, SQUARE_M)?;
    let near = a.views / 2;
    let mut poses = calibration_poses(&rig, &board, near, BOARD_DISTANCES_M[0], a.seed);
    poses.extend(calibration_poses(&rig, &board, a.views - near, BOARD_DISTANCES_M[1], a.seed.wrapping_add(1)));
    let (rgb, th) = calibration_views(&rig, &board, &poses, a.noise_px, a.seed)?;
    let rgb_file = CornerFile::new("rgb", &board, Some(rig.rgb.resolution()), &rgb);
    let th_file = CornerFile::new("thermal", &board, Some(rig.thermal.resolution()), &th);
    write_json(&files.add(a.out.join("corners_rgb.json")), &rgb_file)?;
    write_json(&files.add(a.out.join("corners_thermal.json")), &th_file)?;
    write_rig(&rig, &a.out, files)
}

fn write_sample(
    rig: &SyntheticRig,
    scene: &PlanarScene,
    root: &Path,
    stem: &str,
    files: &mut Written,
) -> Result<(), CliError> {
    let kp_rgb = undistorted_matrix(&rig.rgb, DEFAULT_BALANCE)?;
    let labels = render_labels(&kp_rgb, scene);
    let name = format!("{stem}.png");
    write_png_u8(&files.add(root.join("rgb").join(&name)), &colorize(&labels))?;
    write_png_u16(&files.add(root.join("thermal").join(&name)), &render_thermal(rig, scene, 0))?;
    write_png_u16(&files.add(root.join("depth").join(&name)), &render_depth(&kp_rgb, scene))?;
    write_png_u8(&files.add(root.join("labels").join(&name)), &labels)?;
    let w = labels.width();
    let pred = Raster::from_fn(w, labels.height(), |x, y| labels.pixel((x + PRED_SHIFT_PX).min(w - 1), y)[0]);
    write_png_u8(&files.add(root.join("pred").join(&name)), &pred)?;
    Ok(())
}

/// Far wall with a near plane covering `x > edge_x_m`. The PST-like thermal
/// camera sits to the right of the RGB camera, so the wall just left of the
/// near plane's edge is hidden from it.
fn two_plane_scene(edge_x_m: f64, near_z_m: f64, far_z_m: f64) -> PlanarScene {
    let big = 100.0;
    PlanarScene {
        planes: vec![
            ScenePlane::fronto_parallel(Vec3::new(0.0, 0.0, far_z_m), big, big, 30000, 0),
            ScenePlane::fronto_parallel(Vec3::new(edge_x_m + big, 0.0, near_z_m), big, big, 36000, 4),
        ],
    }
}

fn scene_dataset(a: &SynthArgs, files: &mut Written) -> Result<(), CliError> {
    let rig = SyntheticRig::pst_like(a.seed);
    for dir in ["rgb", "thermal", "depth", "labels", "pred"] {
        create_dir(&a.out.join(dir))?;
    }
    write_sample(&rig, &two_plane_scene(-0.1, 1.0, 4.0), &a.out, "scene_000", files)?;
    for i in 1..SCENE_SAMPLES {
        let scene = random_scene(a.seed.wrapping_mul(SCENE_SAMPLES).wrapping_add(i));
        write_sample(&rig, &scene, &a.out, &format!("scene_{i:03}"), files)?;
    }
    write_rig(&rig, &a.out, files)
}

fn identity_rig(a: &SynthArgs, files: &mut Written) -> Result<(), CliError> {
    let rig = SyntheticRig::identity(Resolution::new(320, 256), 300.0, a.seed);
    let scene = random_scene(a.seed);
    let kp = undistorted_matrix(&rig.rgb, DEFAULT_BALANCE)?;
    write_png_u16(&files.add(a.out.join("depth.png")), &render_depth(&kp, &scene))?;
    write_png_u16(&files.add(a.out.join("thermal.png")), &render_thermal(&rig, &scene, 0))?;
    write_rig(&rig, &a.out, files)
}

pub fn synth(a: &SynthArgs) -> Result<(), CliError> {
    create_dir(&a.out)?;
    let mut files = Written(Vec::new());
    match a.preset {
        Preset::CalibViews => calib_views(a, &mut files)?,
        Preset::OcclusionScene => scene_dataset(a, &mut files)?,
        Preset::IdentityRig => identity_rig(a, &mut files)?,
    }
    info!("wrote {} files under {}", files.0.len(), a.out.display());
    if a.json {
        print_json(&json!({ "seed": a.seed, "files": files.0 }));
    }
    Ok(())
}
