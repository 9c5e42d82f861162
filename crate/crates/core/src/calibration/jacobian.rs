//! Derivatives of the projection used by the calibration solvers: analytic
//! for the camera matrix and the point, central differences for the
//! distortion coefficients.
//!
//! Intrinsic parameters are ordered `fx, fy, cx, cy` followed by the
//! distortion coefficients of the lens model. Pose parameters are a left
//! rotation perturbation `R <- exp(dw) R` followed by a translation increment.

use super::{CalibrationError, Pose};
use crate::geometry::{CameraIntrinsics, DistortionModel, PixelCoord, Point3};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct PointJacobian<T> {
    pub pixel: PixelCoord<T>,
    /// `d(u, v)/d p_k` for every intrinsic parameter.
    pub d_intrinsics: Vec<[T; 2]>,
    /// `d(u, v)/d(X, Y, Z)`, columns.
    pub d_point: [[T; 2]; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CornerJacobian<T> {
    pub pixel: PixelCoord<T>,
    pub d_intrinsics: Vec<[T; 2]>,
    /// Columns for `(dw_x, dw_y, dw_z, dt_x, dt_y, dt_z)`.
    pub d_pose: [[T; 2]; 6],
}

/// Derivatives of distorted normalized coordinates with respect to the
/// distortion coefficients, by central differences.
fn coefficient_derivatives<T: Real>(d: &DistortionModel<T>, a: T, b: T) -> Vec<[T; 2]> {
    let h = T::lit(1e-7).max(T::epsilon().sqrt());
    let base = d.coefficients();
    (0..base.len())
        .map(|k| {
            let mut lo = base.clone();
            let mut hi = base.clone();
            lo[k] -= h;
            hi[k] += h;
            let dl = DistortionModel::from_coefficients(d.model(), &lo).expect("coefficient count");
            let dh = DistortionModel::from_coefficients(d.model(), &hi).expect("coefficient count");
            let ((xl, yl), (xh, yh)) = (dl.distort(a, b), dh.distort(a, b));
            let two_h = hi[k] - lo[k];
            [(xh - xl) / two_h, (yh - yl) / two_h]
        })
        .collect()
}

/// Projection of a camera-frame point in front of the camera with its
/// derivatives.
pub fn point_jacobian<T: Real>(intr: &CameraIntrinsics<T>, p: Point3<T>) -> Result<PointJacobian<T>, CalibrationError> {
    if !(p.z > T::zero()) {
        return Err(CalibrationError::BehindCamera);
    }
    let iz = T::one() / p.z;
    let (a, b) = (p.x * iz, p.y * iz);
    let d = intr.distortion();
    let ((xd, yd), jd) = d.distort_with_jacobian(a, b);
    let (fx, fy) = (intr.fx(), intr.fy());
    let pixel = PixelCoord::new(fx * xd + intr.cx(), fy * yd + intr.cy());

    let o = T::zero();
    let mut d_intrinsics = vec![[xd, o], [o, yd], [T::one(), o], [o, T::one()]];
    d_intrinsics.extend(coefficient_derivatives(d, a, b).into_iter().map(|c| [fx * c[0], fy * c[1]]));

    // d(a, b)/dP
    let dab = [[iz, o], [o, iz], [-a * iz, -b * iz]];
    let mut d_point = [[o; 2]; 3];
    for (k, col) in dab.iter().enumerate() {
        d_point[k] = [fx * (jd[0][0] * col[0] + jd[0][1] * col[1]), fy * (jd[1][0] * col[0] + jd[1][1] * col[1])];
    }
    Ok(PointJacobian { pixel, d_intrinsics, d_point })
}

/// Chains `d(u, v)/dP` through `P = R X + t` under the left perturbation.
pub(crate) fn pose_columns<T: Real>(d_point: &[[T; 2]; 3], rotated: Point3<T>) -> [[T; 2]; 6] {
    let o = T::zero();
    let mut cols = [[o; 2]; 6];
    // dP/dw = -[R X]x
    let s = rotated.skew();
    for k in 0..3 {
        for (row, col) in cols[k].iter_mut().enumerate() {
            *col = -(0..3).map(|i| d_point[i][row] * s.m[i][k]).fold(o, |acc, v| acc + v);
        }
        cols[3 + k] = d_point[k];
    }
    cols
}

/// Projection of board point `x` seen from `pose` (board to camera) with
/// derivatives with respect to intrinsics and pose.
pub fn corner_jacobian<T: Real>(
    intr: &CameraIntrinsics<T>,
    pose: &Pose<T>,
    x: Point3<T>,
) -> Result<CornerJacobian<T>, CalibrationError> {
    let rotated = pose.rotation * x;
    let pj = point_jacobian(intr, rotated + pose.translation)?;
    Ok(CornerJacobian { pixel: pj.pixel, d_pose: pose_columns(&pj.d_point, rotated), d_intrinsics: pj.d_intrinsics })
}

/// Intrinsics from a parameter vector laid out as in this module.
pub(crate) fn intrinsics_from_params<T: Real>(template: &CameraIntrinsics<T>, p: &[T]) -> CameraIntrinsics<T> {
    let d = DistortionModel::from_coefficients(template.model(), &p[4..]).expect("coefficient count");
    CameraIntrinsics::new_unchecked(p[0], p[1], p[2], p[3], d, template.resolution())
}

pub(crate) fn intrinsics_params<T: Real>(intr: &CameraIntrinsics<T>) -> Vec<T> {
    let mut p = vec![intr.fx(), intr.fy(), intr.cx(), intr.cy()];
    p.extend(intr.distortion().coefficients());
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{LensModel, Resolution};
    use crate::linalg::{so3_exp, Vec3};

    fn cameras() -> Vec<CameraIntrinsics<f64>> {
        let res = Resolution::new(640, 480);
        vec![
            CameraIntrinsics::new(
                610.0,
                605.0,
                318.0,
                243.0,
                DistortionModel::PlumbBob { k1: -0.21, k2: 0.06, p1: 1e-3, p2: -5e-4, k3: 0.01 },
                res,
            )
            .unwrap(),
            CameraIntrinsics::new(
                240.0,
                238.0,
                321.0,
                239.0,
                DistortionModel::Fisheye { k1: 0.05, k2: -0.01, k3: 0.002, k4: -0.0005 },
                res,
            )
            .unwrap(),
        ]
    }

    /// Central differences of the full projection, perturbing parameters
    /// exactly as the solvers do.
    fn numeric(intr: &CameraIntrinsics<f64>, pose: &Pose<f64>, x: Point3<f64>) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
        let h = 1e-6;
        let proj = |c: &CameraIntrinsics<f64>, p: &Pose<f64>| c.project(p.transform(x)).unwrap();
        let base = intrinsics_params(intr);
        let mut di = Vec::new();
        for k in 0..base.len() {
            let (mut lo, mut hi) = (base.clone(), base.clone());
            lo[k] -= h;
            hi[k] += h;
            let a = proj(&intrinsics_from_params(intr, &lo), pose);
            let b = proj(&intrinsics_from_params(intr, &hi), pose);
            di.push([(b.u - a.u) / (2.0 * h), (b.v - a.v) / (2.0 * h)]);
        }
        let mut dp = Vec::new();
        for k in 0..6 {
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
            let a = proj(intr, &shift(-1.0));
            let b = proj(intr, &shift(1.0));
            dp.push([(b.u - a.u) / (2.0 * h), (b.v - a.v) / (2.0 * h)]);
        }
        (di, dp)
    }

    fn rel_err(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sum();
        let norm: f64 = b.iter().map(|y| y[0] * y[0] + y[1] * y[1]).sum();
        (diff / norm).sqrt()
    }

    #[test]
    fn analytic_matches_central_differences() {
        let pose = Pose::new(so3_exp(Vec3::new(0.2, -0.3, 0.1)), Vec3::new(-0.1, 0.05, 0.9));
        for intr in cameras() {
            for &(bx, by) in &[(0.0, 0.0), (0.2, 0.1), (-0.15, 0.3), (0.3, -0.2)] {
                let x = Vec3::new(bx, by, 0.0);
                let j = corner_jacobian(&intr, &pose, x).unwrap();
                let (di, dp) = numeric(&intr, &pose, x);
                assert!(rel_err(&j.d_intrinsics, &di) < 1e-6, "{:?} intrinsics", intr.model());
                assert!(rel_err(&j.d_pose, &dp) < 1e-6, "{:?} pose", intr.model());
                assert!(j.pixel.distance(intr.project(pose.transform(x)).unwrap()) < 1e-10);
            }
        }
    }

    #[test]
    fn behind_camera_is_rejected() {
        let intr = &cameras()[0];
        assert_eq!(point_jacobian(intr, Vec3::new(0.0, 0.0, -1.0)), Err(CalibrationError::BehindCamera));
        assert_eq!(intr.model(), LensModel::PlumbBob);
    }
}
