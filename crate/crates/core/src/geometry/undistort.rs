use rayon::prelude::*;

use super::camera::{CameraIntrinsics, PixelCoord, UndistortedIntrinsics};
use super::GeometryError;
use crate::raster::{Channel, Interpolation, Raster};
use crate::scalar::Real;

/// Default `balance` for [`undistorted_matrix`]: crop to all-valid pixels.
pub const DEFAULT_BALANCE: f64 = 0.0;

/// Camera matrix of a zero-distortion view of the same scene at the same
/// resolution, with the principal point at the image center `(w/2, h/2)`
/// and the source aspect ratio `fy/fx` preserved.
///
/// `balance = 0` picks the smallest focal length (widest view) for which
/// every output pixel sees a source pixel; `balance = 1` the largest for
/// which every source pixel lands inside the output. Intermediate values
/// interpolate the focal length linearly. Border pixels that do not
/// unproject (beyond a fold of the lens model) are ignored.
pub fn undistorted_matrix<T: Real>(
    intr: &CameraIntrinsics<T>,
    balance: T,
) -> Result<UndistortedIntrinsics<T>, GeometryError> {
    intr.validate()?;
    if !(balance >= T::zero() && balance <= T::one()) {
        return Err(GeometryError::InvalidIntrinsics(format!("balance {balance} outside [0, 1]")));
    }
    let res = intr.resolution();
    let (w1, h1) = (T::from_usize_lossy(res.width - 1), T::from_usize_lossy(res.height - 1));
    let c0x = T::from_usize_lossy(res.width) / T::lit(2.0);
    let c0y = T::from_usize_lossy(res.height) / T::lit(2.0);
    let aspect = intr.fy() / intr.fx();

    let ray = |u: T, v: T| intr.unproject(PixelCoord::new(u, v)).ok().map(|p| (p.x, p.y));
    let along = |n: usize| (0..n).map(move |i| T::from_usize_lossy(i));
    let left: Vec<_> = along(res.height).filter_map(|v| ray(T::zero(), v)).collect();
    let right: Vec<_> = along(res.height).filter_map(|v| ray(w1, v)).collect();
    let top: Vec<_> = along(res.width).filter_map(|u| ray(u, T::zero())).collect();
    let bottom: Vec<_> = along(res.width).filter_map(|u| ray(u, h1)).collect();

    // Every source border sample must fit inside the output image.
    let mut f_preserve = T::infinity();
    for &(x, y) in left.iter().chain(&right).chain(&top).chain(&bottom) {
        if x < T::zero() {
            f_preserve = f_preserve.min(c0x / -x);
        } else if x > T::zero() {
            f_preserve = f_preserve.min((w1 - c0x) / x);
        }
        let ya = y * aspect;
        if ya < T::zero() {
            f_preserve = f_preserve.min(c0y / -ya);
        } else if ya > T::zero() {
            f_preserve = f_preserve.min((h1 - c0y) / ya);
        }
    }

    // Every output border must stay inside the innermost source border.
    let fold_max = |s: &[(T, T)], g: fn(&(T, T)) -> T| s.iter().map(g).fold(T::neg_infinity(), T::max);
    let fold_min = |s: &[(T, T)], g: fn(&(T, T)) -> T| s.iter().map(g).fold(T::infinity(), T::min);
    let left_x = fold_max(&left, |p| p.0);
    let right_x = fold_min(&right, |p| p.0);
    let top_y = fold_max(&top, |p| p.1) * aspect;
    let bottom_y = fold_min(&bottom, |p| p.1) * aspect;
    let mut f_crop = T::zero();
    if left_x < T::zero() {
        f_crop = f_crop.max(c0x / -left_x);
    }
    if right_x > T::zero() {
        f_crop = f_crop.max((w1 - c0x) / right_x);
    }
    if top_y < T::zero() {
        f_crop = f_crop.max(c0y / -top_y);
    }
    if bottom_y > T::zero() {
        f_crop = f_crop.max((h1 - c0y) / bottom_y);
    }

    if !(f_preserve.is_finite() && f_preserve > T::zero() && f_crop.is_finite() && f_crop > T::zero()) {
        return Err(GeometryError::InvalidIntrinsics(
            "image border does not unproject to a bounded field of view".into(),
        ));
    }
    let f = f_crop + balance * (f_preserve - f_crop);
    UndistortedIntrinsics::new(f, f * aspect, c0x, c0y, res)
}

/// Inverse-map remap of a distorted image into the undistorted view `kp`
/// with bilinear interpolation. Unmapped pixels are set to 0.
pub fn undistort_image<C: Channel, T: Real>(
    img: &Raster<C>,
    intr: &CameraIntrinsics<T>,
    kp: &UndistortedIntrinsics<T>,
) -> Result<Raster<C>, GeometryError> {
    undistort_image_with(img, intr, kp, Interpolation::Bilinear)
}

pub fn undistort_image_with<C: Channel, T: Real>(
    img: &Raster<C>,
    intr: &CameraIntrinsics<T>,
    kp: &UndistortedIntrinsics<T>,
    mode: Interpolation,
) -> Result<Raster<C>, GeometryError> {
    let expected = intr.resolution().as_tuple();
    if img.dims() != expected {
        return Err(GeometryError::ResolutionMismatch { expected, actual: img.dims() });
    }
    let out_res = kp.resolution();
    let channels = img.channels();
    let mut out = Raster::new(out_res.width, out_res.height, channels);
    let stride = (out_res.width * channels).max(1);
    out.data_mut().par_chunks_mut(stride).enumerate().for_each(|(y, row)| {
        let v = T::from_usize_lossy(y);
        for (x, px) in row.chunks_mut(channels).enumerate() {
            let ray = kp.ray(PixelCoord::new(T::from_usize_lossy(x), v));
            if let Ok(src) = intr.project(ray) {
                img.sample_into(src.u, src.v, mode, px);
            }
        }
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DistortionModel, LensModel, Resolution};

    fn cam(d: DistortionModel<f64>, fx: f64, w: usize, h: usize) -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(fx, fx * 1.01, w as f64 / 2.0, h as f64 / 2.0, d, Resolution::new(w, h)).unwrap()
    }

    #[test]
    fn zero_distortion_keeps_matrix() {
        let c = cam(DistortionModel::none(LensModel::PlumbBob), 300.0, 320, 256);
        for b in [0.0, 0.5, 1.0] {
            let kp = undistorted_matrix(&c, b).unwrap();
            assert!((kp.fx() - 300.0).abs() < 1e-9, "{}", kp.fx());
            assert!((kp.fy() - 303.0).abs() < 1e-9);
            assert_eq!((kp.cx(), kp.cy()), (160.0, 128.0));
        }
    }

    #[test]
    fn principal_point_is_recentered() {
        let c = CameraIntrinsics::new(
            300.0,
            300.0,
            150.0,
            120.0,
            DistortionModel::none(LensModel::PlumbBob),
            Resolution::new(320, 256),
        )
        .unwrap();
        let kp = undistorted_matrix(&c, 0.0).unwrap();
        assert_eq!((kp.cx(), kp.cy()), (160.0, 128.0));
    }

    #[test]
    fn crop_focal_direction_follows_distortion_sign() {
        let barrel = cam(DistortionModel::PlumbBob { k1: -0.25, k2: 0.05, p1: 0.0, p2: 0.0, k3: 0.0 }, 300.0, 320, 256);
        let pincushion =
            cam(DistortionModel::PlumbBob { k1: 0.2, k2: 0.0, p1: 0.0, p2: 0.0, k3: 0.0 }, 300.0, 320, 256);
        let kb = undistorted_matrix(&barrel, 0.0).unwrap();
        let kq = undistorted_matrix(&pincushion, 0.0).unwrap();
        assert!(kb.fx() <= 300.0, "barrel crop fx {}", kb.fx());
        assert!(kq.fx() >= 300.0, "pincushion crop fx {}", kq.fx());
        // preserving everything never needs a longer focal length than cropping
        assert!(undistorted_matrix(&barrel, 1.0).unwrap().fx() <= kb.fx());
        assert!(undistorted_matrix(&barrel, 2.0).is_err());
    }

    fn border(res: Resolution, step: usize) -> Vec<(f64, f64)> {
        let (w1, h1) = ((res.width - 1) as f64, (res.height - 1) as f64);
        let mut pts = Vec::new();
        for u in (0..res.width).step_by(step) {
            pts.push((u as f64, 0.0));
            pts.push((u as f64, h1));
        }
        for v in (0..res.height).step_by(step) {
            pts.push((0.0, v as f64));
            pts.push((w1, v as f64));
        }
        pts.push((w1, h1));
        pts
    }

    #[test]
    fn fisheye_border_containment() {
        let c = cam(DistortionModel::Fisheye { k1: 0.05, k2: 0.0, k3: 0.0, k4: 0.0 }, 180.0, 320, 256);
        let res = c.resolution();
        let inside = |p: PixelCoord<f64>, tol: f64| {
            p.u >= -tol && p.v >= -tol && p.u <= (res.width - 1) as f64 + tol && p.v <= (res.height - 1) as f64 + tol
        };
        // balance 1: every source border ray lands inside the undistorted view
        let kp1 = undistorted_matrix(&c, 1.0).unwrap();
        for (u, v) in border(res, 1) {
            let ray = c.unproject(PixelCoord::new(u, v)).unwrap();
            assert!(inside(kp1.project(ray).unwrap(), 1e-9), "source ({u},{v}) escapes");
        }
        // balance 0: every output border ray lands inside the source image
        let kp0 = undistorted_matrix(&c, 0.0).unwrap();
        for (u, v) in border(res, 1) {
            let ray = kp0.ray(PixelCoord::new(u, v));
            assert!(inside(c.project(ray).unwrap(), 1e-6), "output ({u},{v}) unmapped");
        }
        assert!(kp0.fx() > kp1.fx());
    }

    #[test]
    fn identity_remap_is_bit_exact() {
        let c = cam(DistortionModel::none(LensModel::PlumbBob), 200.0, 64, 48);
        let kp = UndistortedIntrinsics::new(c.fx(), c.fy(), c.cx(), c.cy(), c.resolution()).unwrap();
        let img = Raster::<u16>::from_fn(64, 48, |x, y| (x * 631 + y * 17 + 3) as u16);
        assert_eq!(undistort_image(&img, &c, &kp).unwrap(), img);
        assert_eq!(undistort_image_with(&img, &c, &kp, Interpolation::Nearest).unwrap(), img);
    }

    #[test]
    fn constant_image_stays_constant_where_valid() {
        let c = cam(DistortionModel::PlumbBob { k1: -0.3, k2: 0.08, p1: 0.0, p2: 0.0, k3: 0.0 }, 150.0, 96, 64);
        let kp = undistorted_matrix(&c, 1.0).unwrap();
        let img = Raster::<u8>::filled(96, 64, 1, 77);
        let out = undistort_image(&img, &c, &kp).unwrap();
        assert!(out.data().iter().all(|&v| v == 77 || v == 0));
        assert!(out.data().iter().filter(|&&v| v == 0).count() > 0);
        assert_eq!(out.get(48, 32), 77);
    }

    #[test]
    fn resolution_mismatch_is_reported() {
        let c = cam(DistortionModel::none(LensModel::Fisheye), 150.0, 96, 64);
        let kp = undistorted_matrix(&c, 0.0).unwrap();
        let img = Raster::<u8>::new(95, 64, 1);
        assert!(matches!(undistort_image(&img, &c, &kp), Err(GeometryError::ResolutionMismatch { .. })));
    }

    #[test]
    fn rgb_channels_are_remapped_together() {
        let c = cam(DistortionModel::none(LensModel::PlumbBob), 200.0, 16, 8);
        let kp = undistorted_matrix(&c, 0.0).unwrap();
        let data: Vec<u8> = (0..16 * 8).flat_map(|i| [i as u8, 2, 200]).collect();
        let img = Raster::from_vec(16, 8, 3, data).unwrap();
        let out = undistort_image(&img, &c, &kp).unwrap();
        assert_eq!(out, img);
    }
}
