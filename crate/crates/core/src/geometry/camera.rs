use serde::{Deserialize, Serialize};

use super::{DistortionModel, GeometryError, LensModel};
use crate::linalg::{Mat3, Vec3};
use crate::scalar::Real;

/// Image coordinate in pixels (`u` right, `v` down). May lie outside the
/// image; callers bound-check.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelCoord<T> {
    pub u: T,
    pub v: T,
}

impl<T: Real> PixelCoord<T> {
    pub const fn new(u: T, v: T) -> Self {
        Self { u, v }
    }

    pub fn distance(self, o: Self) -> T {
        (self.u - o.u).hypot(self.v - o.v)
    }

    pub fn is_finite(self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

/// 3D point in a camera frame, meters, `z` forward.
pub type Point3<T> = Vec3<T>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Resolution {
    pub width: usize,
    pub height: usize,
}

impl Resolution {
    pub const fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    pub fn pixels(self) -> usize {
        self.width * self.height
    }

    pub fn as_tuple(self) -> (usize, usize) {
        (self.width, self.height)
    }
}

fn validate_pinhole<T: Real>(fx: T, fy: T, cx: T, cy: T, res: Resolution) -> Result<(), GeometryError> {
    let bad = |msg: String| Err(GeometryError::InvalidIntrinsics(msg));
    if res.width == 0 || res.height == 0 {
        return bad(format!("resolution {}x{} must be positive", res.width, res.height));
    }
    if !(fx.is_finite() && fy.is_finite() && fx > T::zero() && fy > T::zero()) {
        return bad(format!("focal lengths must be finite and positive (fx={fx}, fy={fy})"));
    }
    let (w, h) = (T::from_usize_lossy(res.width), T::from_usize_lossy(res.height));
    if !(cx.is_finite() && cy.is_finite() && cx >= T::zero() && cy >= T::zero() && cx < w && cy < h) {
        return bad(format!("principal point ({cx}, {cy}) outside the {}x{} image", res.width, res.height));
    }
    Ok(())
}

fn pinhole_matrix<T: Real>(fx: T, fy: T, cx: T, cy: T) -> Mat3<T> {
    let (o, l) = (T::zero(), T::one());
    Mat3::from_rows([[fx, o, cx], [o, fy, cy], [o, o, l]])
}

fn split_matrix<T: Real>(k: &Mat3<T>) -> Result<(T, T, T, T), GeometryError> {
    let m = &k.m;
    let tol = T::tol(1e-12, 4.0);
    if m[0][1].abs() > tol || m[1][0].abs() > tol {
        return Err(GeometryError::InvalidIntrinsics("camera matrix must have zero skew".into()));
    }
    if m[2][0] != T::zero() || m[2][1] != T::zero() || m[2][2] != T::one() {
        return Err(GeometryError::InvalidIntrinsics("camera matrix last row must be (0, 0, 1)".into()));
    }
    Ok((m[0][0], m[1][1], m[0][2], m[1][2]))
}

/// Camera matrix, distortion model and image size of one camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics<T> {
    fx: T,
    fy: T,
    cx: T,
    cy: T,
    distortion: DistortionModel<T>,
    resolution: Resolution,
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(
        fx: T,
        fy: T,
        cx: T,
        cy: T,
        distortion: DistortionModel<T>,
        resolution: Resolution,
    ) -> Result<Self, GeometryError> {
        validate_pinhole(fx, fy, cx, cy, resolution)?;
        if !distortion.is_finite() {
            return Err(GeometryError::InvalidIntrinsics("distortion coefficients must be finite".into()));
        }
        Ok(Self::new_unchecked(fx, fy, cx, cy, distortion, resolution))
    }

    /// Constructor for solver iterates, which may transiently leave the valid set.
    pub(crate) fn new_unchecked(
        fx: T,
        fy: T,
        cx: T,
        cy: T,
        distortion: DistortionModel<T>,
        resolution: Resolution,
    ) -> Self {
        Self { fx, fy, cx, cy, distortion, resolution }
    }

    pub fn from_matrix(
        k: &Mat3<T>,
        distortion: DistortionModel<T>,
        resolution: Resolution,
    ) -> Result<Self, GeometryError> {
        let (fx, fy, cx, cy) = split_matrix(k)?;
        Self::new(fx, fy, cx, cy, distortion, resolution)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        Self::new(self.fx, self.fy, self.cx, self.cy, self.distortion, self.resolution).map(|_| ())
    }

    pub fn fx(&self) -> T {
        self.fx
    }
    pub fn fy(&self) -> T {
        self.fy
    }
    pub fn cx(&self) -> T {
        self.cx
    }
    pub fn cy(&self) -> T {
        self.cy
    }
    pub fn distortion(&self) -> &DistortionModel<T> {
        &self.distortion
    }
    pub fn model(&self) -> LensModel {
        self.distortion.model()
    }
    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn matrix(&self) -> Mat3<T> {
        pinhole_matrix(self.fx, self.fy, self.cx, self.cy)
    }

    pub fn with_distortion(&self, distortion: DistortionModel<T>) -> Self {
        Self { distortion, ..*self }
    }

    pub fn cast<U: Real>(&self) -> CameraIntrinsics<U> {
        CameraIntrinsics {
            fx: U::lit(self.fx.as_f64()),
            fy: U::lit(self.fy.as_f64()),
            cx: U::lit(self.cx.as_f64()),
            cy: U::lit(self.cy.as_f64()),
            distortion: self.distortion.cast(),
            resolution: self.resolution,
        }
    }

    /// Distorted normalized coordinates of a camera-frame point.
    pub(crate) fn distorted_normalized(&self, p: Point3<T>) -> Result<(T, T), GeometryError> {
        match self.distortion {
            DistortionModel::PlumbBob { .. } => {
                if !(p.z > T::zero()) {
                    return Err(GeometryError::NonPositiveDepth(p.z.as_f64()));
                }
                Ok(self.distortion.distort(p.x / p.z, p.y / p.z))
            }
            DistortionModel::Fisheye { .. } => {
                let norm = p.norm();
                if !(norm >= T::lit(1e-12)) {
                    return Err(GeometryError::DegeneratePoint);
                }
                let r = p.x.hypot(p.y);
                if r <= norm * T::tol(1e-15, 4.0) {
                    // On the optical axis: in front maps to the principal point,
                    // straight behind has no direction.
                    return if p.z > T::zero() {
                        Ok((T::zero(), T::zero()))
                    } else {
                        Err(GeometryError::DegeneratePoint)
                    };
                }
                let theta = r.atan2(p.z);
                let s = self.distortion.theta_distorted(theta) / r;
                Ok((p.x * s, p.y * s))
            }
        }
    }

    /// Projects a camera-frame point to pixel coordinates through the lens model.
    pub fn project(&self, p: Point3<T>) -> Result<PixelCoord<T>, GeometryError> {
        let (xd, yd) = self.distorted_normalized(p)?;
        Ok(PixelCoord::new(self.fx * xd + self.cx, self.fy * yd + self.cy))
    }

    /// Unit-depth ray `(x, y, 1)` through a pixel, inverting distortion
    /// iteratively (Newton, at most 50 iterations).
    pub fn unproject(&self, pix: PixelCoord<T>) -> Result<Point3<T>, GeometryError> {
        if !pix.is_finite() {
            return Err(GeometryError::NoConvergence { residual: f64::INFINITY });
        }
        let xd = (pix.u - self.cx) / self.fx;
        let yd = (pix.v - self.cy) / self.fy;
        let (x, y) = undistort_normalized(&self.distortion, xd, yd)?;
        Ok(Vec3::new(x, y, T::one()))
    }
}

const MAX_INVERSION_ITERS: usize = 50;

/// Inverts the distortion of normalized coordinates.
pub(crate) fn undistort_normalized<T: Real>(d: &DistortionModel<T>, xd: T, yd: T) -> Result<(T, T), GeometryError> {
    let fail_tol = T::tol(1e-6, 64.0);
    let stop_tol = T::epsilon() * T::lit(4.0);
    match d {
        DistortionModel::PlumbBob { .. } => {
            let (mut x, mut y) = (xd, yd);
            for _ in 0..MAX_INVERSION_ITERS {
                let ((fx, fy), j) = d.distort_with_jacobian(x, y);
                let (ex, ey) = (fx - xd, fy - yd);
                let residual = ex.hypot(ey);
                if !residual.is_finite() || residual <= stop_tol * (T::one() + xd.hypot(yd)) {
                    break;
                }
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                if det.abs() < T::min_positive_value() {
                    break;
                }
                x -= (j[1][1] * ex - j[0][1] * ey) / det;
                y -= (j[0][0] * ey - j[1][0] * ex) / det;
            }
            let (fx, fy) = d.distort(x, y);
            let residual = (fx - xd).hypot(fy - yd);
            if residual.is_finite() && residual <= fail_tol && on_first_branch(d, x.hypot(y)) {
                Ok((x, y))
            } else {
                Err(GeometryError::NoConvergence { residual: residual.as_f64() })
            }
        }
        DistortionModel::Fisheye { .. } => {
            let theta_d = xd.hypot(yd);
            if theta_d < T::tol(1e-14, 4.0) {
                return Ok((xd, yd));
            }
            let half_pi = T::FRAC_PI_2();
            let mut theta = theta_d.min(half_pi * T::lit(0.999));
            for _ in 0..MAX_INVERSION_ITERS {
                let e = d.theta_distorted(theta) - theta_d;
                if e.abs() <= stop_tol * (T::one() + theta_d) {
                    break;
                }
                let de = d.theta_distorted_derivative(theta);
                if !(de > T::zero()) {
                    break;
                }
                theta -= e / de;
                theta = theta.max(T::zero());
            }
            let residual = (d.theta_distorted(theta) - theta_d).abs();
            if !(residual <= fail_tol) || theta >= half_pi || !theta.is_finite() || !on_first_branch(d, theta) {
                return Err(GeometryError::NoConvergence { residual: residual.as_f64() });
            }
            let s = theta.tan() / theta_d;
            Ok((xd * s, yd * s))
        }
    }
}

const BRANCH_SAMPLES: usize = 16;

/// Whether the radial mapping increases from the axis out to `r` (normalized
/// radius for plumb-bob, incidence angle for fisheye). Roots beyond a fold of
/// the polynomial are not the camera's own rays.
fn on_first_branch<T: Real>(d: &DistortionModel<T>, r: T) -> bool {
    (1..=BRANCH_SAMPLES).all(|i| {
        let s = r * T::from_usize_lossy(i) / T::from_usize_lossy(BRANCH_SAMPLES);
        let slope = match *d {
            DistortionModel::PlumbBob { k1, k2, k3, .. } => {
                let s2 = s * s;
                T::one() + s2 * (T::lit(3.0) * k1 + s2 * (T::lit(5.0) * k2 + s2 * T::lit(7.0) * k3))
            }
            DistortionModel::Fisheye { .. } => d.theta_distorted_derivative(s),
        };
        slope > T::zero()
    })
}

/// Zero-distortion camera matrix of an undistorted view (`K'`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UndistortedIntrinsics<T> {
    fx: T,
    fy: T,
    cx: T,
    cy: T,
    resolution: Resolution,
}

impl<T: Real> UndistortedIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, resolution: Resolution) -> Result<Self, GeometryError> {
        validate_pinhole(fx, fy, cx, cy, resolution)?;
        Ok(Self { fx, fy, cx, cy, resolution })
    }

    pub fn from_matrix(k: &Mat3<T>, resolution: Resolution) -> Result<Self, GeometryError> {
        let (fx, fy, cx, cy) = split_matrix(k)?;
        Self::new(fx, fy, cx, cy, resolution)
    }

    pub fn fx(&self) -> T {
        self.fx
    }
    pub fn fy(&self) -> T {
        self.fy
    }
    pub fn cx(&self) -> T {
        self.cx
    }
    pub fn cy(&self) -> T {
        self.cy
    }
    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn matrix(&self) -> Mat3<T> {
        pinhole_matrix(self.fx, self.fy, self.cx, self.cy)
    }

    /// Pinhole projection; `None` for points with `z <= 0`.
    pub fn project(&self, p: Point3<T>) -> Option<PixelCoord<T>> {
        (p.z > T::zero()).then(|| PixelCoord::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// `K'^-1 (u, v, 1)`.
    pub fn ray(&self, pix: PixelCoord<T>) -> Point3<T> {
        Vec3::new((pix.u - self.cx) / self.fx, (pix.v - self.cy) / self.fy, T::one())
    }

    /// The same matrix viewed as a distortion-free camera.
    pub fn as_camera(&self, model: LensModel) -> CameraIntrinsics<T> {
        CameraIntrinsics::new_unchecked(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            DistortionModel::none(model),
            self.resolution,
        )
    }

    pub fn cast<U: Real>(&self) -> UndistortedIntrinsics<U> {
        UndistortedIntrinsics {
            fx: U::lit(self.fx.as_f64()),
            fy: U::lit(self.fy.as_f64()),
            cx: U::lit(self.cx.as_f64()),
            cy: U::lit(self.cy.as_f64()),
            resolution: self.resolution,
        }
    }
}
