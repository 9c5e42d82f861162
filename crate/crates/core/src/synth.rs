//! Synthetic ground truth: virtual RGB-thermal rigs, rendered checkerboard
//! corners, piecewise-planar scenes and a brute-force alignment oracle.
//! Everything is deterministic given its seed.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::calibration::{BoardSpec, Extrinsics, Pose, ViewObservation};
use crate::geometry::{
    undistorted_matrix, CameraIntrinsics, DistortionModel, GeometryError, LensModel, PixelCoord, Resolution,
    UndistortedIntrinsics,
};
use crate::linalg::{so3_exp, Mat3, Vec3};
use crate::raster::Raster;
use crate::registration::{clamp_to_bounds, AlignmentMap, DepthImage, MapEntry, RegistrationError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("board corner {corner} of view `{view}` is not visible in the {camera} camera")]
    BoardNotVisible { view: String, camera: &'static str, corner: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Ground-truth two-camera rig.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRig {
    pub rgb: CameraIntrinsics<f64>,
    pub thermal: CameraIntrinsics<f64>,
    pub extrinsics: Extrinsics<f64>,
    pub seed: u64,
}

impl SyntheticRig {
    /// 1280x720 plumb-bob RGB camera next to a 320x256 fisheye thermal camera.
    pub fn pst_like(seed: u64) -> Self {
        let rgb = CameraIntrinsics::new(
            760.0,
            755.0,
            641.3,
            358.7,
            DistortionModel::PlumbBob { k1: -0.2, k2: 0.05, p1: 0.0, p2: 0.0, k3: 0.0 },
            Resolution::new(1280, 720),
        )
        .expect("valid preset");
        let thermal = CameraIntrinsics::new(
            210.0,
            209.0,
            161.2,
            127.4,
            DistortionModel::Fisheye { k1: 0.05, k2: -0.01, k3: 0.0, k4: 0.0 },
            Resolution::new(320, 256),
        )
        .expect("valid preset");
        let extrinsics = Extrinsics::new(so3_exp(Vec3::new(0.004, -0.012, 0.003)), Vec3::new(-0.06, 0.012, 0.004))
            .expect("valid preset");
        Self { rgb, thermal, extrinsics, seed }
    }

    /// Both cameras identical and distortion-free, identity extrinsics.
    pub fn identity(resolution: Resolution, focal: f64, seed: u64) -> Self {
        let cam = CameraIntrinsics::new(
            focal,
            focal,
            resolution.width as f64 / 2.0,
            resolution.height as f64 / 2.0,
            DistortionModel::none(LensModel::PlumbBob),
            resolution,
        )
        .expect("valid identity rig");
        Self { rgb: cam, thermal: cam, extrinsics: Extrinsics::identity(), seed }
    }

    /// Undistorted pinhole pair used by registration (`balance = 0`).
    pub fn pinhole(&self) -> Result<PinholeRig, GeometryError> {
        Ok(PinholeRig {
            rgb: undistorted_matrix(&self.rgb, 0.0)?,
            thermal: undistorted_matrix(&self.thermal, 0.0)?,
            extrinsics: self.extrinsics,
        })
    }
}

/// Registration-side rig: undistorted camera matrices plus extrinsics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeRig {
    pub rgb: UndistortedIntrinsics<f64>,
    pub thermal: UndistortedIntrinsics<f64>,
    pub extrinsics: Extrinsics<f64>,
}

impl PinholeRig {
    /// Random small rig with an RGB frame of `size x size` and a thermal
    /// frame of similar size, modest rotation and up to 20 cm baseline.
    pub fn random(seed: u64, size: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = size as f64;
        let cam = |w: usize, h: usize, rng: &mut ChaCha8Rng| {
            let f = rng.random_range(0.6..1.4) * s;
            UndistortedIntrinsics::new(
                f,
                f * rng.random_range(0.95..1.05),
                w as f64 / 2.0 + rng.random_range(-2.0..2.0),
                h as f64 / 2.0 + rng.random_range(-2.0..2.0),
                Resolution::new(w, h),
            )
            .expect("positive focal length")
        };
        let rgb = cam(size, size, &mut rng);
        let tw = (s * rng.random_range(0.75..1.25)).round() as usize;
        let th = (s * rng.random_range(0.75..1.25)).round() as usize;
        let thermal = cam(tw.max(4), th.max(4), &mut rng);
        let w = Vec3::new(rng.random_range(-0.08..0.08), rng.random_range(-0.08..0.08), rng.random_range(-0.05..0.05));
        let t = Vec3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.1..0.1), rng.random_range(-0.05..0.05));
        Self { rgb, thermal, extrinsics: Extrinsics::new(so3_exp(w), t).expect("exp is a rotation") }
    }
}

/// Corner observations of `pose` (board to RGB) in both cameras with
/// isotropic Gaussian pixel noise.
pub fn render_corners(
    rig: &SyntheticRig,
    board: &BoardSpec<f64>,
    pose: &Pose<f64>,
    view_id: &str,
    noise_sigma_px: f64,
    seed: u64,
) -> Result<(ViewObservation<f64>, ViewObservation<f64>), SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma_px.max(0.0)).expect("finite sigma");
    let th_pose = rig.extrinsics.as_pose().compose(pose);
    let mut render = |cam: &CameraIntrinsics<f64>, p: &Pose<f64>, name: &'static str| {
        let res = cam.resolution();
        let (wm, hm) = ((res.width - 1) as f64, (res.height - 1) as f64);
        board
            .object_points()
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let q = p.transform(*x);
                let not_visible = SynthError::BoardNotVisible { view: view_id.to_string(), camera: name, corner: i };
                if q.z <= 0.0 {
                    return Err(not_visible);
                }
                let pix = cam.project(q).map_err(|_| not_visible.clone())?;
                if !(pix.u >= 0.0 && pix.v >= 0.0 && pix.u <= wm && pix.v <= hm) {
                    return Err(not_visible);
                }
                if noise_sigma_px > 0.0 {
                    Ok(PixelCoord::new(pix.u + noise.sample(&mut rng), pix.v + noise.sample(&mut rng)))
                } else {
                    Ok(pix)
                }
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|c| ViewObservation::new(view_id, c))
    };
    let rgb = render(&rig.rgb, pose, "rgb")?;
    let thermal = render(&rig.thermal, &th_pose, "thermal")?;
    Ok((rgb, thermal))
}

/// `n` board poses (board to RGB) with varied tilt, roll and image position,
/// each fully visible in both cameras with a margin, boards about
/// `distance_m` away.
pub fn calibration_poses(
    rig: &SyntheticRig,
    board: &BoardSpec<f64>,
    n: usize,
    distance_m: f64,
    seed: u64,
) -> Vec<Pose<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = board.square_size() * (board.inner_cols() - 1) as f64;
    let h = board.square_size() * (board.inner_rows() - 1) as f64;
    let center = Vec3::new(w / 2.0, h / 2.0, 0.0);
    let margin = 0.04;
    let visible = |cam: &CameraIntrinsics<f64>, p: &Pose<f64>| {
        let res = cam.resolution();
        let (mx, my) = (margin * res.width as f64, margin * res.height as f64);
        board.object_points().iter().all(|x| {
            let q = p.transform(*x);
            q.z > 0.0
                && cam.project(q).is_ok_and(|px| {
                    px.u >= mx
                        && px.v >= my
                        && px.u <= res.width as f64 - 1.0 - mx
                        && px.v <= res.height as f64 - 1.0 - my
                })
        })
    };
    let mut poses = Vec::with_capacity(n);
    while poses.len() < n {
        let tilt = Vec3::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6), rng.random_range(-0.4..0.4));
        let rotation = so3_exp(tilt);
        let d = distance_m * rng.random_range(0.8..1.25);
        let target = Vec3::new(rng.random_range(-0.35..0.35) * d, rng.random_range(-0.25..0.25) * d, d);
        let pose = Pose::new(rotation, target - rotation * center);
        let th_pose = rig.extrinsics.as_pose().compose(&pose);
        if visible(&rig.rgb, &pose) && visible(&rig.thermal, &th_pose) {
            poses.push(pose);
        }
    }
    poses
}

/// RGB and thermal observations of the same board poses.
pub type ViewPair = (Vec<ViewObservation<f64>>, Vec<ViewObservation<f64>>);

/// Noisy corner observations for a full calibration data set.
pub fn calibration_views(
    rig: &SyntheticRig,
    board: &BoardSpec<f64>,
    poses: &[Pose<f64>],
    noise_sigma_px: f64,
    seed: u64,
) -> Result<ViewPair, SynthError> {
    let mut rgb = Vec::with_capacity(poses.len());
    let mut th = Vec::with_capacity(poses.len());
    for (i, pose) in poses.iter().enumerate() {
        let view_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64);
        let (r, t) = render_corners(rig, board, pose, &format!("view_{i:03}"), noise_sigma_px, view_seed)?;
        rgb.push(r);
        th.push(t);
    }
    Ok((rgb, th))
}

/// Rectangle `|x| <= half_width, |y| <= half_height` in the `z = 0` plane of
/// `pose` (plane to RGB frame).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenePlane {
    pub pose: Pose<f64>,
    pub half_width: f64,
    pub half_height: f64,
    pub intensity: u16,
    pub label: u8,
}

impl ScenePlane {
    /// Plane facing the RGB camera, centred at `center`.
    pub fn fronto_parallel(center: Vec3<f64>, half_width: f64, half_height: f64, intensity: u16, label: u8) -> Self {
        Self { pose: Pose::new(Mat3::identity(), center), half_width, half_height, intensity, label }
    }

    /// Ray parameter `s > 0` at which `origin + s * dir` hits the rectangle.
    pub fn intersect(&self, origin: Vec3<f64>, dir: Vec3<f64>) -> Option<f64> {
        let n = self.pose.rotation.col(2);
        let denom = n.dot(dir);
        if denom.abs() < 1e-15 {
            return None;
        }
        let s = n.dot(self.pose.translation - origin) / denom;
        if !(s > 0.0) {
            return None;
        }
        let local = self.pose.rotation.transpose() * (origin + dir.scale(s) - self.pose.translation);
        (local.x.abs() <= self.half_width && local.y.abs() <= self.half_height).then_some(s)
    }

    /// The same plane expressed in another frame.
    pub fn transformed(&self, t: &Pose<f64>) -> Self {
        Self { pose: t.compose(&self.pose), ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlanarScene {
    pub planes: Vec<ScenePlane>,
}

impl PlanarScene {
    /// Nearest hit `(s, plane)` along a ray.
    pub fn nearest(&self, origin: Vec3<f64>, dir: Vec3<f64>) -> Option<(f64, &ScenePlane)> {
        self.planes.iter().filter_map(|p| p.intersect(origin, dir).map(|s| (s, p))).min_by(|a, b| a.0.total_cmp(&b.0))
    }

    pub fn transformed(&self, t: &Pose<f64>) -> Self {
        Self { planes: self.planes.iter().map(|p| p.transformed(t)).collect() }
    }
}

/// One to three tilted rectangles between 0.5 m and 5 m in front of the
/// RGB camera.
pub fn random_scene(seed: u64) -> PlanarScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=3);
    let planes = (0..n)
        .map(|k| {
            let z = rng.random_range(0.5..5.0);
            let center = Vec3::new(rng.random_range(-0.4..0.4) * z, rng.random_range(-0.4..0.4) * z, z);
            let tilt = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0));
            let extent = z * if k == 0 { 2.0 } else { rng.random_range(0.1..0.5) };
            ScenePlane {
                pose: Pose::new(so3_exp(tilt), center),
                half_width: extent,
                half_height: extent * rng.random_range(0.5..1.5),
                intensity: rng.random_range(1000..60000),
                label: k as u8 + 1,
            }
        })
        .collect();
    PlanarScene { planes }
}

/// Depth in integer millimetres in the undistorted RGB frame; 0 where no
/// plane is hit.
pub fn render_depth(kp_rgb: &UndistortedIntrinsics<f64>, scene: &PlanarScene) -> DepthImage {
    let res = kp_rgb.resolution();
    Raster::from_fn(res.width, res.height, |x, y| {
        let ray = kp_rgb.ray(PixelCoord::new(x as f64, y as f64));
        scene
            .nearest(Vec3::zeros(), ray)
            .map(|(s, _)| (s * ray.z * 1000.0).round().clamp(1.0, f64::from(u16::MAX)) as u16)
            .unwrap_or(0)
    })
}

/// Class labels in the undistorted RGB frame; 0 where no plane is hit.
pub fn render_labels(kp_rgb: &UndistortedIntrinsics<f64>, scene: &PlanarScene) -> Raster<u8> {
    let res = kp_rgb.resolution();
    Raster::from_fn(res.width, res.height, |x, y| {
        let ray = kp_rgb.ray(PixelCoord::new(x as f64, y as f64));
        scene.nearest(Vec3::zeros(), ray).map_or(0, |(_, p)| p.label)
    })
}

/// Raw (distorted) thermal image of the scene; `background` where no plane
/// is hit.
pub fn render_thermal(rig: &SyntheticRig, scene: &PlanarScene, background: u16) -> Raster<u16> {
    let in_thermal = scene.transformed(&rig.extrinsics.as_pose());
    let res = rig.thermal.resolution();
    Raster::from_fn(res.width, res.height, |x, y| {
        rig.thermal
            .unproject(PixelCoord::new(x as f64, y as f64))
            .ok()
            .and_then(|ray| in_thermal.nearest(Vec3::zeros(), ray))
            .map_or(background, |(_, p)| p.intensity)
    })
}

/// `(u, v, z, bin x, bin y)` of an RGB pixel landing in the thermal view.
type Hit = (f64, f64, f64, i64, i64);

/// Reference alignment by exhaustive comparison: a pixel is occluded if any
/// other RGB pixel landing in the same rounded thermal pixel is closer than
/// its own thermal depth minus the tolerance. Every pair of pixels sharing a
/// bin is compared.
pub fn brute_force_alignment(
    rig: &PinholeRig,
    depth: &DepthImage,
    occlusion_tol_mm: f64,
) -> Result<AlignmentMap<f64>, RegistrationError> {
    let res = rig.rgb.resolution();
    if depth.dims() != res.as_tuple() {
        return Err(RegistrationError::ResolutionMismatch { expected: res.as_tuple(), actual: depth.dims() });
    }
    let th = rig.thermal.resolution();
    let (wm, hm) = ((th.width - 1) as f64, (th.height - 1) as f64);
    let (fx, fy, cx, cy) = (rig.rgb.fx(), rig.rgb.fy(), rig.rgb.cx(), rig.rgb.cy());
    let (tfx, tfy, tcx, tcy) = (rig.thermal.fx(), rig.thermal.fy(), rig.thermal.cx(), rig.thermal.cy());
    let r = rig.extrinsics.rotation().m;
    let t = rig.extrinsics.translation();

    let mut hits: Vec<Option<Hit>> = Vec::with_capacity(res.pixels());
    let mut entries = Vec::with_capacity(res.pixels());
    for y in 0..res.height {
        for x in 0..res.width {
            let d = depth.get(x, y);
            if d == 0 {
                hits.push(None);
                entries.push(MapEntry::NoDepth);
                continue;
            }
            let z = f64::from(d) / 1000.0;
            let px = (x as f64 - cx) / fx * z;
            let py = (y as f64 - cy) / fy * z;
            let qx = r[0][0] * px + r[0][1] * py + r[0][2] * z + t.x;
            let qy = r[1][0] * px + r[1][1] * py + r[1][2] * z + t.y;
            let qz = r[2][0] * px + r[2][1] * py + r[2][2] * z + t.z;
            if qz <= 0.0 {
                hits.push(None);
                entries.push(MapEntry::OutOfView);
                continue;
            }
            let u = tfx * qx / qz + tcx;
            let v = tfy * qy / qz + tcy;
            match (clamp_to_bounds(u, wm), clamp_to_bounds(v, hm)) {
                (Some(u), Some(v)) => {
                    hits.push(Some((u, v, qz, u.round() as i64, v.round() as i64)));
                    entries.push(MapEntry::Valid(PixelCoord::new(u, v)));
                }
                _ => {
                    hits.push(None);
                    entries.push(MapEntry::OutOfView);
                }
            }
        }
    }
    let tol = occlusion_tol_mm / 1000.0;
    let mut bins: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, h) in hits.iter().enumerate() {
        if let Some((_, _, _, bx, by)) = *h {
            bins.entry((bx, by)).or_default().push(i);
        }
    }
    for members in bins.values() {
        for &i in members {
            let zi = hits[i].expect("binned").2;
            if members.iter().any(|&j| zi > hits[j].expect("binned").2 + tol) {
                entries[i] = MapEntry::Occluded;
            }
        }
    }
    Ok(AlignmentMap::from_entries(res.width, res.height, th, entries).expect("coordinates clamped in bounds"))
}

/// Half-open column band `[start, end)` of RGB pixels occluded from a
/// thermal camera displaced by `baseline_m` along -x (`t = (+b, 0, 0)`),
/// when a near plane covering `x < edge_x_m` at depth `near_z_m` sits in
/// front of a far plane at `far_z_m`. Coordinates refer to the RGB camera
/// `(fx, cx)`.
pub fn parallax_band(fx: f64, cx: f64, edge_x_m: f64, near_z_m: f64, far_z_m: f64, baseline_m: f64) -> (f64, f64) {
    let start = cx + fx * edge_x_m / near_z_m;
    (start, start + fx * baseline_m * (1.0 / near_z_m - 1.0 / far_z_m))
}

/// Occlusion test scene: a far wall and a near half-plane whose right edge
/// is at `edge_x_m`, both parallel to the image plane.
pub fn occlusion_scene(edge_x_m: f64, near_z_m: f64, far_z_m: f64) -> PlanarScene {
    let big = 100.0;
    PlanarScene {
        planes: vec![
            ScenePlane::fronto_parallel(Vec3::new(0.0, 0.0, far_z_m), big, big, 30000, 0),
            ScenePlane::fronto_parallel(Vec3::new(edge_x_m - big, 0.0, near_z_m), big, big, 36000, 4),
        ],
    }
}
