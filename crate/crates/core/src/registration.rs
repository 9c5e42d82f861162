//! Depth-guided registration of thermal imagery into the RGB frame.
//!
//! Both cameras are handled in their undistorted (pinhole) frames. Depth is
//! a 16-bit millimetre raster in the undistorted RGB frame with `0` marking
//! missing measurements.

use rayon::prelude::*;
use thiserror::Error;

use crate::calibration::Extrinsics;
use crate::geometry::{PixelCoord, Point3, Resolution, UndistortedIntrinsics};
use crate::linalg::Vec3;
use crate::raster::{Channel, Interpolation, Raster};
use crate::scalar::Real;

/// Depth in millimetres, `0` = invalid.
pub type DepthImage = Raster<u16>;
/// Raw 16-bit radiometric counts.
pub type ThermalImage = Raster<u16>;

pub const DEFAULT_OCCLUSION_TOL_MM: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistrationError {
    #[error("depth value 0 is not a measurement")]
    InvalidDepth,
    #[error("point lies behind the thermal camera")]
    BehindCamera,
    #[error("resolution mismatch: expected {expected:?}, got {actual:?}")]
    ResolutionMismatch { expected: (usize, usize), actual: (usize, usize) },
}

/// RGB-frame point seen at `pix` with the given depth, in metres.
pub fn backproject<T: Real>(
    pix: PixelCoord<T>,
    depth_mm: T,
    kp_rgb: &UndistortedIntrinsics<T>,
) -> Result<Point3<T>, RegistrationError> {
    if !(depth_mm > T::zero()) {
        return Err(RegistrationError::InvalidDepth);
    }
    let z = depth_mm / T::lit(1000.0);
    Ok(Vec3::new((pix.u - kp_rgb.cx()) / kp_rgb.fx() * z, (pix.v - kp_rgb.cy()) / kp_rgb.fy() * z, z))
}

/// Thermal pixel of an RGB-frame point.
pub fn project_to_thermal<T: Real>(
    p: Point3<T>,
    ext: &Extrinsics<T>,
    kp_th: &UndistortedIntrinsics<T>,
) -> Result<PixelCoord<T>, RegistrationError> {
    project_with_depth(p, ext, kp_th).map(|(pix, _)| pix)
}

fn project_with_depth<T: Real>(
    p: Point3<T>,
    ext: &Extrinsics<T>,
    kp_th: &UndistortedIntrinsics<T>,
) -> Result<(PixelCoord<T>, T), RegistrationError> {
    let q = ext.transform(p);
    if !(q.z > T::zero()) {
        return Err(RegistrationError::BehindCamera);
    }
    let pix = PixelCoord::new(kp_th.fx() * q.x / q.z + kp_th.cx(), kp_th.fy() * q.y / q.z + kp_th.cy());
    Ok((pix, q.z))
}

/// Per-pixel outcome of the alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlignmentStatus {
    Valid,
    NoDepth,
    OutOfView,
    Occluded,
}

impl AlignmentStatus {
    /// Code used in 8-bit status images.
    pub fn code(self) -> u8 {
        match self {
            Self::Valid => 255,
            Self::NoDepth => 0,
            Self::OutOfView => 128,
            Self::Occluded => 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapEntry<T> {
    /// Sub-pixel source location in the thermal image.
    Valid(PixelCoord<T>),
    NoDepth,
    OutOfView,
    Occluded,
}

impl<T> MapEntry<T> {
    pub fn status(&self) -> AlignmentStatus {
        match self {
            Self::Valid(_) => AlignmentStatus::Valid,
            Self::NoDepth => AlignmentStatus::NoDepth,
            Self::OutOfView => AlignmentStatus::OutOfView,
            Self::Occluded => AlignmentStatus::Occluded,
        }
    }
}

/// Source thermal coordinate for every pixel of the RGB frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMap<T> {
    width: usize,
    height: usize,
    thermal: Resolution,
    entries: Vec<MapEntry<T>>,
}

/// Border slack absorbing rounding in coordinates that should sit exactly on
/// the image edge; such coordinates are clamped onto the edge.
pub(crate) fn edge_slack<T: Real>() -> T {
    T::tol(1e-9, 1024.0)
}

/// Clamps a coordinate within slack of `[0, max]` onto it.
pub(crate) fn clamp_to_bounds<T: Real>(x: T, max: T) -> Option<T> {
    let slack = edge_slack::<T>();
    (x >= -slack && x <= max + slack).then(|| x.max(T::zero()).min(max))
}

impl<T: Real> AlignmentMap<T> {
    /// Fails if the entry count does not match or a valid coordinate lies
    /// outside the thermal image.
    pub fn from_entries(width: usize, height: usize, thermal: Resolution, entries: Vec<MapEntry<T>>) -> Option<Self> {
        if entries.len() != width * height {
            return None;
        }
        let (wm, hm) = (T::from_usize_lossy(thermal.width) - T::one(), T::from_usize_lossy(thermal.height) - T::one());
        let inside = |e: &MapEntry<T>| match e {
            MapEntry::Valid(p) => p.u >= T::zero() && p.v >= T::zero() && p.u <= wm && p.v <= hm,
            _ => true,
        };
        entries.iter().all(inside).then_some(Self { width, height, thermal, entries })
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn thermal_resolution(&self) -> Resolution {
        self.thermal
    }
    pub fn entries(&self) -> &[MapEntry<T>] {
        &self.entries
    }
    pub fn get(&self, x: usize, y: usize) -> MapEntry<T> {
        self.entries[y * self.width + x]
    }

    pub fn count(&self, status: AlignmentStatus) -> usize {
        self.entries.iter().filter(|e| e.status() == status).count()
    }

    pub fn status_image(&self) -> Raster<u8> {
        let data = self.entries.iter().map(|e| e.status().code()).collect();
        Raster::from_vec(self.width, self.height, 1, data).expect("size matches")
    }
}

enum Projected<T> {
    NoDepth,
    OutOfView,
    Hit { pix: PixelCoord<T>, z: T, bin: usize },
}

/// Two-pass alignment: project every valid-depth RGB pixel into the thermal
/// frame and keep the closest surface per thermal pixel (rounded bin); a
/// pixel farther than `closest + occlusion_tol_mm` is occluded.
pub fn build_alignment_map<T: Real>(
    depth: &DepthImage,
    kp_rgb: &UndistortedIntrinsics<T>,
    kp_th: &UndistortedIntrinsics<T>,
    ext: &Extrinsics<T>,
    occlusion_tol_mm: T,
) -> Result<AlignmentMap<T>, RegistrationError> {
    let expected = kp_rgb.resolution().as_tuple();
    if depth.dims() != expected || depth.channels() != 1 {
        return Err(RegistrationError::ResolutionMismatch { expected, actual: depth.dims() });
    }
    let (w, h) = expected;
    let th = kp_th.resolution();
    let (wm, hm) = (T::from_usize_lossy(th.width) - T::one(), T::from_usize_lossy(th.height) - T::one());

    let projected: Vec<Projected<T>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let d = depth.get(x, y);
            let pix = PixelCoord::new(T::from_usize_lossy(x), T::from_usize_lossy(y));
            let Ok(p) = backproject(pix, T::lit(f64::from(d)), kp_rgb) else {
                return Projected::NoDepth;
            };
            let Ok((q, z)) = project_with_depth(p, ext, kp_th) else {
                return Projected::OutOfView;
            };
            match (clamp_to_bounds(q.u, wm), clamp_to_bounds(q.v, hm)) {
                (Some(u), Some(v)) => {
                    let bx = u.round().to_usize().unwrap_or(0).min(th.width - 1);
                    let by = v.round().to_usize().unwrap_or(0).min(th.height - 1);
                    Projected::Hit { pix: PixelCoord::new(u, v), z, bin: by * th.width + bx }
                }
                _ => Projected::OutOfView,
            }
        })
        .collect();

    let mut zbuf = vec![T::infinity(); th.pixels()];
    for p in &projected {
        if let Projected::Hit { z, bin, .. } = *p {
            if z < zbuf[bin] {
                zbuf[bin] = z;
            }
        }
    }

    let tol_m = occlusion_tol_mm / T::lit(1000.0);
    let entries = projected
        .par_iter()
        .map(|p| match *p {
            Projected::NoDepth => MapEntry::NoDepth,
            Projected::OutOfView => MapEntry::OutOfView,
            Projected::Hit { pix, z, bin } => {
                if z <= zbuf[bin] + tol_m {
                    MapEntry::Valid(pix)
                } else {
                    MapEntry::Occluded
                }
            }
        })
        .collect();
    Ok(AlignmentMap { width: w, height: h, thermal: th, entries })
}

/// Samples the thermal image through the map; every non-valid pixel is 0.
pub fn apply_alignment<C: Channel, T: Real>(
    map: &AlignmentMap<T>,
    thermal: &Raster<C>,
    interp: Interpolation,
) -> Result<Raster<C>, RegistrationError> {
    let expected = map.thermal.as_tuple();
    if thermal.dims() != expected {
        return Err(RegistrationError::ResolutionMismatch { expected, actual: thermal.dims() });
    }
    let channels = thermal.channels();
    let mut out = Raster::new(map.width, map.height, channels);
    let stride = (map.width * channels).max(1);
    out.data_mut().par_chunks_mut(stride).enumerate().for_each(|(y, row)| {
        for (x, px) in row.chunks_mut(channels).enumerate() {
            if let MapEntry::Valid(p) = map.get(x, y) {
                thermal.sample_into(p.u, p.v, interp, px);
            }
        }
    });
    Ok(out)
}

/// Iterative neighbour-average fill. Each pass gives every hole with at
/// least one non-hole 8-neighbour the mean of those neighbours, reading only
/// the previous pass. Stops after `max_radius_px` passes or when no hole can
/// be filled.
pub fn fill_holes<C: Channel>(img: &Raster<C>, max_radius_px: usize) -> Raster<C> {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut cur = img.clone();
    for _ in 0..max_radius_px {
        let prev = cur.clone();
        let filled = cur
            .data_mut()
            .par_chunks_mut((w * ch).max(1))
            .enumerate()
            .map(|(y, row)| {
                let mut n_filled = 0usize;
                let mut acc = vec![0.0f64; ch];
                for x in 0..w {
                    if !prev.is_hole(x, y) {
                        continue;
                    }
                    acc.iter_mut().for_each(|a| *a = 0.0);
                    let mut n = 0u32;
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                            if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                                continue;
                            }
                            let (nx, ny) = (nx as usize, ny as usize);
                            if prev.is_hole(nx, ny) {
                                continue;
                            }
                            for (a, v) in acc.iter_mut().zip(prev.pixel(nx, ny)) {
                                *a += v.to_f64();
                            }
                            n += 1;
                        }
                    }
                    if n > 0 {
                        for (c, a) in acc.iter().enumerate() {
                            row[x * ch + c] = C::from_f64(a / f64::from(n));
                        }
                        n_filled += 1;
                    }
                }
                n_filled
            })
            .sum::<usize>();
        if filled == 0 {
            break;
        }
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat3;

    fn kp(w: usize, h: usize, f: f64) -> UndistortedIntrinsics<f64> {
        UndistortedIntrinsics::new(f, f * 1.02, w as f64 / 2.0 - 0.3, h as f64 / 2.0 + 0.2, Resolution::new(w, h))
            .unwrap()
    }

    #[test]
    fn backproject_examples() {
        let k = kp(64, 48, 50.0);
        let p = backproject(PixelCoord::new(k.cx(), k.cy()), 1000.0, &k).unwrap();
        assert_eq!(p, Vec3::new(0.0, 0.0, 1.0));
        let p = backproject(PixelCoord::new(k.cx() + k.fx(), k.cy()), 1000.0, &k).unwrap();
        assert!((p - Vec3::new(1.0, 0.0, 1.0)).norm() < 1e-15);
        assert_eq!(backproject(PixelCoord::new(1.0, 1.0), 0.0, &k), Err(RegistrationError::InvalidDepth));
        let pix = PixelCoord::new(13.7, 40.2);
        let p = backproject(pix, 2345.0, &k).unwrap();
        let back = k.project(p).unwrap();
        assert!(back.distance(pix) < 1e-9);
    }

    #[test]
    fn baseline_disparity() {
        let k = kp(64, 48, 50.0);
        let ext = Extrinsics::new(Mat3::identity(), Vec3::new(-0.1, 0.0, 0.0)).unwrap();
        let p = Vec3::new(0.2, -0.1, 1.0);
        let a = project_to_thermal(p, &Extrinsics::identity(), &k).unwrap();
        let b = project_to_thermal(p, &ext, &k).unwrap();
        assert!(((a.u - b.u) - 0.1 * k.fx()).abs() < 1e-12);
        assert_eq!(a.v, b.v);
        assert_eq!(project_to_thermal(Vec3::new(0.0, 0.0, 0.05), &ext.cast(), &k).map(|_| ()), Ok(()));
        let behind = Extrinsics::new(Mat3::identity(), Vec3::new(0.0, 0.0, -2.0)).unwrap();
        assert_eq!(project_to_thermal(p, &behind, &k), Err(RegistrationError::BehindCamera));
    }

    #[test]
    fn identity_rig_gives_identity_map() {
        let k = kp(40, 30, 35.0);
        let mut depth = Raster::<u16>::filled(40, 30, 1, 1500);
        depth.set(3, 4, 0);
        let map = build_alignment_map(&depth, &k, &k, &Extrinsics::identity(), 30.0).unwrap();
        for y in 0..30 {
            for x in 0..40 {
                match map.get(x, y) {
                    MapEntry::Valid(p) => {
                        assert!((p.u - x as f64).abs() < 1e-9 && (p.v - y as f64).abs() < 1e-9);
                    }
                    MapEntry::NoDepth => assert_eq!((x, y), (3, 4)),
                    other => panic!("{other:?} at {x},{y}"),
                }
            }
        }
        let img = Raster::<u16>::from_fn(40, 30, |x, y| (x * 100 + y + 1) as u16);
        let out = apply_alignment(&map, &img, Interpolation::Nearest).unwrap();
        let mut expected = img.clone();
        expected.set(3, 4, 0);
        assert_eq!(out, expected);
    }

    #[test]
    fn mismatched_inputs() {
        let k = kp(40, 30, 35.0);
        let depth = Raster::<u16>::filled(41, 30, 1, 1500);
        assert!(matches!(
            build_alignment_map(&depth, &k, &k, &Extrinsics::identity(), 30.0),
            Err(RegistrationError::ResolutionMismatch { .. })
        ));
        let depth = Raster::<u16>::filled(40, 30, 1, 1500);
        let map = build_alignment_map(&depth, &k, &k, &Extrinsics::identity(), 30.0).unwrap();
        assert!(apply_alignment(&map, &Raster::<u16>::new(30, 30, 1), Interpolation::Bilinear).is_err());
    }

    #[test]
    fn status_codes() {
        let codes: Vec<u8> =
            [AlignmentStatus::Valid, AlignmentStatus::NoDepth, AlignmentStatus::OutOfView, AlignmentStatus::Occluded]
                .iter()
                .map(|s| s.code())
                .collect();
        assert_eq!(codes, vec![255, 0, 128, 64]);
    }

    #[test]
    fn fill_holes_examples() {
        let img = Raster::<u16>::from_fn(8, 8, |x, y| (x + y + 1) as u16);
        assert_eq!(fill_holes(&img, 5), img);

        let mut single = Raster::<u16>::filled(7, 7, 1, 500);
        single.set(3, 3, 0);
        assert_eq!(fill_holes(&single, 1), Raster::filled(7, 7, 1, 500));

        // 3-px stripe running across the image along the gradient direction
        let truth = Raster::<u16>::from_fn(32, 16, |x, _| (1000 + 40 * x) as u16);
        let mut holed = truth.clone();
        for y in 7..10 {
            for x in 0..32 {
                holed.set(x, y, 0);
            }
        }
        let filled = fill_holes(&holed, 3);
        // one-sided neighbourhoods at the left/right border bias the first
        // two columns; the ramp is reproduced where neighbourhoods are symmetric
        for y in 0..16 {
            for x in 2..30 {
                let d = (i32::from(filled.get(x, y)) - i32::from(truth.get(x, y))).abs();
                assert!(d <= 2, "({x},{y}) off by {d}");
            }
        }
        // a 1-pass budget leaves the stripe center open
        assert_eq!(fill_holes(&holed, 1).get(15, 8), 0);
        assert_ne!(fill_holes(&holed, 2).get(15, 8), 0);
    }

    #[test]
    fn larger_tolerance_never_adds_occlusion() {
        let k = kp(32, 32, 30.0);
        let depth = Raster::<u16>::from_fn(32, 32, |x, y| if x < 12 { 800 } else { 2000 + (y as u16) * 7 });
        let ext = Extrinsics::new(Mat3::identity(), Vec3::new(0.15, 0.0, 0.0)).unwrap();
        let mut prev: Option<AlignmentMap<f64>> = None;
        for tol in [0.0, 10.0, 30.0, 300.0, 3000.0] {
            let map = build_alignment_map(&depth, &k, &k, &ext, tol).unwrap();
            if let Some(p) = &prev {
                for (a, b) in p.entries().iter().zip(map.entries()) {
                    if a.status() == AlignmentStatus::Valid {
                        assert_eq!(b.status(), AlignmentStatus::Valid);
                    }
                }
            }
            prev = Some(map);
        }
    }
}
