//! Acceptance run: one `[PASS]`/`[FAIL]` line per criterion, nonzero exit if
//! any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermalign_core::calibration::jacobian::corner_jacobian;
use thermalign_core::calibration::{calibrate_extrinsics, calibrate_intrinsics, BoardSpec, CameraViews, Pose};
use thermalign_core::dataset::{class_imbalance, enet_weight, enet_weights, ClassCounts, ClassStats};
use thermalign_core::eval::{iou_report, ConfusionMatrix};
use thermalign_core::geometry::{CameraIntrinsics, DistortionModel, LensModel, Resolution, UndistortedIntrinsics};
use thermalign_core::linalg::{rotation_angle_between, so3_exp, Mat3, Vec3};
use thermalign_core::raster::{Interpolation, Raster};
use thermalign_core::registration::{
    apply_alignment, build_alignment_map, AlignmentMap, MapEntry, DEFAULT_OCCLUSION_TOL_MM,
};
use thermalign_core::synth::{
    brute_force_alignment, calibration_poses, calibration_views, occlusion_scene, parallax_band, random_scene,
    render_depth, PinholeRig, SyntheticRig,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Cost histories of every solver run, checked by the hygiene criterion.
static COST_HISTORIES: Mutex<Vec<Vec<f64>>> = Mutex::new(Vec::new());

fn record_history(h: &[f64]) {
    COST_HISTORIES.lock().unwrap().push(h.to_vec());
}

fn histories() -> Vec<Vec<f64>> {
    COST_HISTORIES.lock().unwrap().clone()
}

fn board() -> BoardSpec<f64> {
    BoardSpec::new(6, 9, 0.04).unwrap()
}

fn params(c: &CameraIntrinsics<f64>) -> Vec<f64> {
    let mut p = vec![c.fx(), c.fy(), c.cx(), c.cy()];
    p.extend(c.distortion().coefficients());
    p
}

fn with_params(template: &CameraIntrinsics<f64>, p: &[f64]) -> CameraIntrinsics<f64> {
    let d = DistortionModel::from_coefficients(template.model(), &p[4..]).unwrap();
    CameraIntrinsics::new(p[0], p[1], p[2], p[3], d, template.resolution()).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn time_limit(start: Instant, limit_s: u64) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(limit_s), "took {:.1} s, limit {limit_s} s", t.as_secs_f64());
    Ok(t)
}

fn c1_noiseless_intrinsics() -> Outcome {
    let start = Instant::now();
    let rig = SyntheticRig::pst_like(1);
    let b = board();
    let poses = calibration_poses(&rig, &b, 20, 1.0, 11);
    let (rgb, th) = calibration_views(&rig, &b, &poses, 0.0, 0).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut worst_rms = 0.0f64;
    for (views, truth) in [(&rgb, &rig.rgb), (&th, &rig.thermal)] {
        let res = calibrate_intrinsics(&b, views, truth.model(), truth.resolution()).map_err(|e| e.to_string())?;
        record_history(&res.solver.cost_history);
        for (k, (e, t)) in params(&res.intrinsics).iter().zip(params(truth)).enumerate() {
            // zero-valued truth parameters are compared absolutely
            let err = if t == 0.0 { (e - t).abs() } else { ((e - t) / t).abs() };
            ensure!(err < 1e-6, "{} parameter {k}: error {err:e}", truth.model());
            worst = worst.max(err);
        }
        ensure!(res.rms_reproj < 1e-8, "{} rms {:e}", truth.model(), res.rms_reproj);
        worst_rms = worst_rms.max(res.rms_reproj);
    }
    let t = time_limit(start, 10)?;
    Ok(format!("max param error {worst:.1e}, max rms {worst_rms:.1e} px, {:.2} s", t.as_secs_f64()))
}

fn c2_noisy_intrinsics() -> Outcome {
    let sigma = 0.2;
    let b = board();
    let rig = SyntheticRig::pst_like(2);
    let mut parts = Vec::new();
    for (truth, distance) in [(&rig.rgb, 1.0), (&rig.thermal, 0.5)] {
        let (mut fx, mut fy) = (Vec::new(), Vec::new());
        for seed in 0..5u64 {
            let poses = calibration_poses(&rig, &b, 30, distance, 100 + seed);
            let (rgb, th) = calibration_views(&rig, &b, &poses, sigma, seed).map_err(|e| e.to_string())?;
            let views = if truth.model() == LensModel::PlumbBob { rgb } else { th };
            let res = calibrate_intrinsics(&b, &views, truth.model(), truth.resolution()).map_err(|e| e.to_string())?;
            record_history(&res.solver.cost_history);
            ensure!(
                (0.7 * sigma..=1.3 * sigma).contains(&res.rms_reproj),
                "{} seed {seed}: rms {}",
                truth.model(),
                res.rms_reproj
            );
            fx.push(((res.intrinsics.fx() - truth.fx()) / truth.fx()).abs());
            fy.push(((res.intrinsics.fy() - truth.fy()) / truth.fy()).abs());
        }
        let (mx, my) = (median(fx), median(fy));
        ensure!(mx < 5e-3 && my < 5e-3, "{}: median fx {mx:.4}, fy {my:.4}", truth.model());
        parts.push(format!("{} median fx {:.3}% fy {:.3}%", truth.model(), 100.0 * mx, 100.0 * my));
    }
    Ok(parts.join("; "))
}

fn c3_extrinsics() -> Outcome {
    let rig = SyntheticRig::pst_like(5);
    let b = board();
    let poses = calibration_poses(&rig, &b, 10, 1.0, 31);
    let (rgb, th) = calibration_views(&rig, &b, &poses, 0.0, 0).map_err(|e| e.to_string())?;
    let ext = calibrate_extrinsics(&b, CameraViews::new(&rig.rgb, &rgb), CameraViews::new(&rig.thermal, &th), None)
        .map_err(|e| e.to_string())?;
    record_history(&ext.solver.cost_history);
    let a0 = rotation_angle_between(ext.extrinsics.rotation(), rig.extrinsics.rotation());
    let t0 = (ext.extrinsics.translation() - rig.extrinsics.translation()).norm();
    ensure!(a0 < 1e-7 && t0 < 1e-8, "noiseless: angle {a0:e} rad, translation {t0:e} m");

    let (mut angles, mut trans) = (Vec::new(), Vec::new());
    for seed in 0..5u64 {
        let poses = calibration_poses(&rig, &b, 10, 1.0, 200 + seed);
        let (rgb, th) = calibration_views(&rig, &b, &poses, 0.2, seed).map_err(|e| e.to_string())?;
        let ext = calibrate_extrinsics(&b, CameraViews::new(&rig.rgb, &rgb), CameraViews::new(&rig.thermal, &th), None)
            .map_err(|e| e.to_string())?;
        record_history(&ext.solver.cost_history);
        angles.push(rotation_angle_between(ext.extrinsics.rotation(), rig.extrinsics.rotation()).to_degrees());
        trans.push((ext.extrinsics.translation() - rig.extrinsics.translation()).norm());
    }
    let (a, t) = (median(angles), median(trans));
    ensure!(a < 0.1 && t < 2e-3, "noisy: median angle {a:.4} deg, translation {:.3} mm", 1e3 * t);
    Ok(format!("noiseless {a0:.1e} rad / {t0:.1e} m; noisy median {a:.4} deg / {:.3} mm", 1e3 * t))
}

fn maps_match(a: &AlignmentMap<f64>, b: &AlignmentMap<f64>) -> Result<f64, String> {
    ensure!((a.width(), a.height()) == (b.width(), b.height()), "map sizes differ");
    let mut worst = 0.0f64;
    for (i, (x, y)) in a.entries().iter().zip(b.entries()).enumerate() {
        ensure!(x.status() == y.status(), "pixel {i}: {:?} vs {:?}", x.status(), y.status());
        if let (MapEntry::Valid(p), MapEntry::Valid(q)) = (x, y) {
            worst = worst.max(p.distance(*q));
        }
    }
    ensure!(worst < 1e-6, "coordinate difference {worst:e} px");
    Ok(worst)
}

fn c4_alignment_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut occluded = 0;
    for seed in 0..100u64 {
        let rig = PinholeRig::random(seed, 32);
        let depth = render_depth(&rig.rgb, &random_scene(1000 + seed));
        let fast = build_alignment_map(&depth, &rig.rgb, &rig.thermal, &rig.extrinsics, DEFAULT_OCCLUSION_TOL_MM)
            .map_err(|e| e.to_string())?;
        let oracle = brute_force_alignment(&rig, &depth, DEFAULT_OCCLUSION_TOL_MM).map_err(|e| e.to_string())?;
        worst = worst.max(maps_match(&fast, &oracle).map_err(|e| format!("rig {seed}: {e}"))?);
        occluded += fast.entries().iter().filter(|e| **e == MapEntry::Occluded).count();
    }
    let t = time_limit(start, 30)?;
    Ok(format!(
        "100 rigs equal, max coordinate diff {worst:.1e} px, {occluded} occluded pixels, {:.2} s",
        t.as_secs_f64()
    ))
}

fn c5_identity() -> Outcome {
    let mut checked = 0usize;
    for res in [Resolution::new(1280, 720), Resolution::new(320, 256)] {
        let rig = SyntheticRig::identity(res, 0.8 * res.width as f64, 0).pinhole().map_err(|e| e.to_string())?;
        let depth = render_depth(&rig.rgb, &random_scene(5));
        let map = build_alignment_map(&depth, &rig.rgb, &rig.thermal, &rig.extrinsics, DEFAULT_OCCLUSION_TOL_MM)
            .map_err(|e| e.to_string())?;
        let thermal = Raster::<u16>::from_fn(res.width, res.height, |x, y| (1 + (x * 37 + y * 101) % 65000) as u16);
        let out = apply_alignment(&map, &thermal, Interpolation::Nearest).map_err(|e| e.to_string())?;
        for y in 0..res.height {
            for x in 0..res.width {
                if let MapEntry::Valid(_) = map.get(x, y) {
                    ensure!(out.get(x, y) == thermal.get(x, y), "{}x{} pixel ({x},{y}) differs", res.width, res.height);
                    checked += 1;
                } else {
                    ensure!(depth.get(x, y) == 0, "{}x{} pixel ({x},{y}) not valid", res.width, res.height);
                }
            }
        }
    }
    Ok(format!("{checked} valid pixels bit-exact at 1280x720 and 320x256"))
}

fn c6_occlusion() -> Outcome {
    let res = Resolution::new(160, 120);
    let cam = UndistortedIntrinsics::new(140.0, 140.0, 80.0, 60.0, res).map_err(|e| e.to_string())?;
    let baseline = 0.1;
    let ext = thermalign_core::calibration::Extrinsics::new(Mat3::identity(), Vec3::new(baseline, 0.0, 0.0))
        .map_err(|e| e.to_string())?;
    let (edge, near, far) = (0.05, 1.0, 3.0);
    let depth = render_depth(&cam, &occlusion_scene(edge, near, far));
    let map = build_alignment_map(&depth, &cam, &cam, &ext, DEFAULT_OCCLUSION_TOL_MM).map_err(|e| e.to_string())?;
    let (start, end) = parallax_band(cam.fx(), cam.cx(), edge, near, far, baseline);
    let mut inside = 0;
    for y in 0..res.height {
        for x in 0..res.width {
            let xf = x as f64;
            let occluded = map.get(x, y) == MapEntry::Occluded;
            if xf > start + 1.0 && xf < end - 1.0 {
                ensure!(occluded, "({x},{y}) inside band [{start:.2}, {end:.2}) not occluded");
                inside += 1;
            } else if xf < start - 1.0 || xf > end + 1.0 {
                ensure!(!occluded, "({x},{y}) outside band [{start:.2}, {end:.2}) occluded");
            }
        }
    }
    ensure!(inside > 0, "band is empty");
    Ok(format!("band [{start:.2}, {end:.2}) px matched within 1 px"))
}

fn random_labels(rng: &mut ChaCha8Rng, classes: u8) -> Raster<u8> {
    let (w, h) = (rng.random_range(1..48), rng.random_range(1..40));
    let used = rng.random_range(1..=classes);
    let data = (0..w * h).map(|_| if rng.random_bool(0.7) { 0 } else { rng.random_range(0..used) }).collect();
    Raster::from_vec(w, h, 1, data).unwrap()
}

fn pst900_check(root: &Path) -> Outcome {
    let index = thermalign_core::dataset::scan_dataset(root).map_err(|e| e.to_string())?;
    let stats = thermalign_core::dataset::class_imbalance_files(&index.label_paths(), 5).map_err(|e| e.to_string())?;
    let expected = [96.9845, 0.2829, 1.1962, 0.1764, 1.3597];
    for (k, e) in expected.iter().enumerate() {
        let got = (stats.per_pixel_pct[k] * 1e4).round() / 1e4;
        ensure!((got - e).abs() < 5e-5, "PST900 class {k}: {got:.4} vs {e:.4}");
    }
    Ok("PST900 per-pixel stats match to 4 decimals".into())
}

fn c7_class_statistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for corpus in 0..20 {
        let images: Vec<(String, Raster<u8>)> =
            (0..rng.random_range(1..12)).map(|i| (format!("{i}.png"), random_labels(&mut rng, 5))).collect();
        let (mut pixels, mut present) = ([0u64; 5], [0u64; 5]);
        for (_, img) in &images {
            let mut seen = [false; 5];
            for &v in img.data() {
                pixels[usize::from(v)] += 1;
                seen[usize::from(v)] = true;
            }
            for k in 0..5 {
                present[k] += u64::from(seen[k]);
            }
        }
        let total: u64 = pixels.iter().sum();
        let n = images.len() as f64;
        let stats = class_imbalance(images, 5).map_err(|e| e.to_string())?;
        for k in 0..5 {
            ensure!(stats.counts.pixels[k] == pixels[k], "corpus {corpus} class {k}: pixel count");
            ensure!(
                stats.per_pixel_pct[k] == 100.0 * pixels[k] as f64 / total as f64,
                "corpus {corpus} class {k}: pixel %"
            );
            ensure!(
                stats.per_instance_pct[k] == 100.0 * present[k] as f64 / n,
                "corpus {corpus} class {k}: instance %"
            );
        }
    }
    let note = match std::env::var_os("THERMALIGN_PST900") {
        Some(root) => pst900_check(Path::new(&root))?,
        None => "PST900 not present (set THERMALIGN_PST900 to check Table 1)".into(),
    };
    Ok(format!("20 synthetic corpora match the histogram oracle exactly; {note}"))
}

fn c8_weights() -> Outcome {
    let mut parts = Vec::new();
    for (p, expected) in [(1.0, 1.4223), (0.5, 2.3883)] {
        let w = enet_weight(p, 1.02).map_err(|e| e.to_string())?;
        let direct = 1.0 / (1.02f64 + p).ln();
        ensure!((w - direct).abs() < 1e-3 && (w - expected).abs() < 1e-3, "p = {p}: {w} vs {direct}");
        parts.push(format!("w({p}) = {w:.4}"));
    }
    // the same numbers through the statistics path
    let counts = ClassCounts { pixels: vec![1, 1], images_with: vec![1, 1], images: 1 };
    let stats = ClassStats::from_counts(counts);
    let w = enet_weights(&stats, 1.02).map_err(|e| e.to_string())?;
    ensure!((w.weights[0] - 1.0 / 1.52f64.ln()).abs() < 1e-12, "enet_weights disagrees: {:?}", w.weights);
    Ok(parts.join(", "))
}

fn c9_iou() -> Outcome {
    let gt = Raster::from_vec(2, 2, 1, vec![0u8, 0, 1, 1]).unwrap();
    let pred = Raster::from_vec(2, 2, 1, vec![0u8, 1, 1, 1]).unwrap();
    let cm = ConfusionMatrix::new(2).map_err(|e| e.to_string())?.accumulate(&gt, &pred).map_err(|e| e.to_string())?;
    let r = iou_report(&cm).map_err(|e| e.to_string())?;
    ensure!(r.iou == vec![Some(0.5), Some(2.0 / 3.0)], "IoU {:?}", r.iou);
    ensure!((r.miou - 0.58333).abs() < 1e-5 && (r.miou - 7.0 / 12.0).abs() < 1e-9, "mIoU {}", r.miou);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..200 {
        let classes = rng.random_range(1..=6u8);
        let (w, h) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let gen = |rng: &mut ChaCha8Rng| (0..w * h).map(|_| rng.random_range(0..classes)).collect::<Vec<u8>>();
        let (g, p) = (gen(&mut rng), gen(&mut rng));
        let cm = ConfusionMatrix::new(usize::from(classes))
            .and_then(|m| {
                m.accumulate(
                    &Raster::from_vec(w, h, 1, g.clone()).unwrap(),
                    &Raster::from_vec(w, h, 1, p.clone()).unwrap(),
                )
            })
            .map_err(|e| e.to_string())?;
        let r = iou_report(&cm).map_err(|e| e.to_string())?;
        for k in 0..classes {
            let inter = g.iter().zip(&p).filter(|(a, b)| **a == k && **b == k).count();
            let union = g.iter().zip(&p).filter(|(a, b)| **a == k || **b == k).count();
            let expected = (union > 0).then(|| inter as f64 / union as f64);
            ensure!(
                r.iou[usize::from(k)] == expected,
                "case {case} class {k}: {:?} vs {expected:?}",
                r.iou[usize::from(k)]
            );
        }
    }
    Ok(format!("2x2 example IoU (0.5, 0.6667), mIoU {:.5}; 200 random pairs exact", 7.0 / 12.0))
}

fn rel_err(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sum();
    let norm: f64 = b.iter().map(|y| y[0] * y[0] + y[1] * y[1]).sum();
    (diff / norm).sqrt()
}

fn c10_numerical_hygiene() -> Outcome {
    let h = 1e-7;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let res = Resolution::new(640, 480);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let distortion = if i % 2 == 0 {
            DistortionModel::PlumbBob {
                k1: rng.random_range(-0.3..0.1),
                k2: rng.random_range(-0.05..0.1),
                p1: rng.random_range(-2e-3..2e-3),
                p2: rng.random_range(-2e-3..2e-3),
                k3: rng.random_range(-0.02..0.02),
            }
        } else {
            DistortionModel::Fisheye {
                k1: rng.random_range(-0.1..0.1),
                k2: rng.random_range(-0.03..0.03),
                k3: rng.random_range(-0.01..0.01),
                k4: rng.random_range(-0.005..0.005),
            }
        };
        let f = rng.random_range(200.0..900.0);
        let intr = CameraIntrinsics::new(
            f,
            f * rng.random_range(0.97..1.03),
            320.0 + rng.random_range(-20.0..20.0),
            240.0 + rng.random_range(-20.0..20.0),
            distortion,
            res,
        )
        .map_err(|e| e.to_string())?;
        let w = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let pose = Pose::new(
            so3_exp(w),
            Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(0.6..2.0)),
        );
        let x = Vec3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.15..0.15), 0.0);
        let j = corner_jacobian(&intr, &pose, x).map_err(|e| e.to_string())?;

        let proj = |c: &CameraIntrinsics<f64>, p: &Pose<f64>| c.project(p.transform(x)).unwrap();
        let base = params(&intr);
        let di: Vec<[f64; 2]> = (0..base.len())
            .map(|k| {
                let (mut lo, mut hi) = (base.clone(), base.clone());
                lo[k] -= h;
                hi[k] += h;
                let (a, b) = (proj(&with_params(&intr, &lo), &pose), proj(&with_params(&intr, &hi), &pose));
                [(b.u - a.u) / (2.0 * h), (b.v - a.v) / (2.0 * h)]
            })
            .collect();
        let dp: Vec<[f64; 2]> = (0..6)
            .map(|k| {
                let mut e = [0.0; 3];
                e[k % 3] = h;
                let shift = |s: f64| {
                    let v = Vec3::from_array(e).scale(s);
                    if k < 3 {
                        Pose::new(so3_exp(v) * pose.rotation, pose.translation)
                    } else {
                        Pose::new(pose.rotation, pose.translation + v)
                    }
                };
                let (a, b) = (proj(&intr, &shift(-1.0)), proj(&intr, &shift(1.0)));
                [(b.u - a.u) / (2.0 * h), (b.v - a.v) / (2.0 * h)]
            })
            .collect();
        let (ei, ep) = (rel_err(&j.d_intrinsics, &di), rel_err(&j.d_pose, &dp));
        ensure!(ei < 1e-5 && ep < 1e-5, "point {i} ({}): intrinsics {ei:e}, pose {ep:e}", intr.model());
        worst = worst.max(ei).max(ep);
    }
    let runs = histories();
    ensure!(!runs.is_empty(), "no solver runs recorded");
    for (r, h) in runs.iter().enumerate() {
        for w in h.windows(2) {
            ensure!(w[1] <= w[0], "solver run {r}: cost increased {} -> {}", w[0], w[1]);
        }
    }
    Ok(format!("max Jacobian relative error {worst:.1e} over 100 points; {} solver runs monotone", runs.len()))
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_thermalign")).args(args).output().map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "`thermalign {}` exited with {:?}: {}",
        args.join(" "),
        out.status.code(),
        String::from_utf8_lossy(&out.stderr).trim()
    );
    Ok(out.stdout)
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.clone(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn pipeline(dir: &Path) -> Result<Vec<Vec<u8>>, String> {
    let p = |name: &str| dir.join(name).to_str().unwrap().to_string();
    let (calib, data) = (p("calib"), p("data"));
    let mut stdout = Vec::new();
    run_cli(&["synth", "--preset", "calib-views", "--seed", "3", "--noise-px", "0.2", "--out", &calib])?;
    let corners = |c: &str| format!("{calib}/corners_{c}.json");
    stdout.push(run_cli(&[
        "calibrate-intrinsics",
        "--corners",
        &corners("rgb"),
        "--model",
        "plumb_bob",
        "--out",
        &p("rgb.json"),
        "--json",
    ])?);
    stdout.push(run_cli(&[
        "calibrate-intrinsics",
        "--corners",
        &corners("thermal"),
        "--model",
        "fisheye",
        "--out",
        &p("thermal.json"),
        "--json",
    ])?);
    stdout.push(run_cli(&[
        "calibrate-extrinsics",
        "--rgb",
        &p("rgb.json"),
        "--thermal",
        &p("thermal.json"),
        "--corners-rgb",
        &corners("rgb"),
        "--corners-thermal",
        &corners("thermal"),
        "--out",
        &p("ext.json"),
        "--json",
    ])?);
    run_cli(&["synth", "--preset", "occlusion-scene", "--seed", "3", "--out", &data])?;
    stdout.push(run_cli(&[
        "align",
        "--depth",
        &format!("{data}/depth/scene_000.png"),
        "--thermal",
        &format!("{data}/thermal/scene_000.png"),
        "--rgb-intr",
        &p("rgb.json"),
        "--th-intr",
        &p("thermal.json"),
        "--ext",
        &p("ext.json"),
        "--out",
        &p("aligned.png"),
        "--status",
        &p("status.png"),
        "--json",
    ])?);
    stdout.push(run_cli(&["fill", "--input", &p("aligned.png"), "--out", &p("filled.png"), "--json"])?);
    stdout.push(run_cli(&["stats", "--root", &data, "--json"])?);
    stdout.push(run_cli(&["weights", "--root", &data, "--json"])?);
    stdout.push(run_cli(&[
        "eval",
        "--gt",
        &format!("{data}/labels"),
        "--pred",
        &format!("{data}/pred"),
        "--json",
        &p("eval.json"),
    ])?);
    Ok(stdout)
}

fn c11_end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first_out = pipeline(dir.path())?;
    let first = snapshot(dir.path());
    let second_out = pipeline(dir.path())?;
    let second = snapshot(dir.path());
    ensure!(first.keys().eq(second.keys()), "rerun produced a different file set");
    for (path, bytes) in &first {
        ensure!(second[path] == *bytes, "{} changed on rerun", path.display());
    }
    ensure!(first_out == second_out, "stdout changed on rerun");
    let t = time_limit(start, 60)?;
    Ok(format!("pipeline ran twice, {} output files byte-identical, {:.2} s", first.len(), t.as_secs_f64()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("intrinsic recovery, noiseless", c1_noiseless_intrinsics),
        ("intrinsic recovery, noisy", c2_noisy_intrinsics),
        ("extrinsic recovery", c3_extrinsics),
        ("alignment oracle equivalence", c4_alignment_oracle),
        ("identity invariant", c5_identity),
        ("occlusion correctness", c6_occlusion),
        ("class statistics", c7_class_statistics),
        ("class weights", c8_weights),
        ("IoU", c9_iou),
        ("numerical hygiene", c10_numerical_hygiene),
        ("end-to-end smoke", c11_end_to_end),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("[PASS] {:>2}. {name}: {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("[FAIL] {:>2}. {name}: {reason}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
