//! Lens distortion models.
//!
//! Both models act on normalized image coordinates `(a, b) = (X/Z, Y/Z)`.
//! The fisheye model additionally has a ray form that stays defined for
//! points at or behind the image plane.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Which distortion model a camera uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LensModel {
    PlumbBob,
    Fisheye,
}

impl LensModel {
    pub fn coefficient_count(self) -> usize {
        match self {
            LensModel::PlumbBob => 5,
            LensModel::Fisheye => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LensModel::PlumbBob => "plumb_bob",
            LensModel::Fisheye => "fisheye",
        }
    }
}

impl std::str::FromStr for LensModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "plumb_bob" => Ok(LensModel::PlumbBob),
            "fisheye" => Ok(LensModel::Fisheye),
            other => Err(format!("unknown lens model `{other}` (expected plumb_bob or fisheye)")),
        }
    }
}

impl std::fmt::Display for LensModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistortionModel<T> {
    /// Radial-tangential: `(k1, k2, p1, p2, k3)`.
    PlumbBob { k1: T, k2: T, p1: T, p2: T, k3: T },
    /// Equidistant theta polynomial: `theta_d = theta (1 + k1 theta^2 + ... + k4 theta^8)`.
    Fisheye { k1: T, k2: T, k3: T, k4: T },
}

impl<T: Real> DistortionModel<T> {
    pub fn none(model: LensModel) -> Self {
        Self::from_coefficients(model, &vec![T::zero(); model.coefficient_count()]).expect("coefficient count matches")
    }

    /// Builds a model from its coefficient list (`D` in calibration files).
    pub fn from_coefficients(model: LensModel, d: &[T]) -> Option<Self> {
        match (model, d) {
            (LensModel::PlumbBob, &[k1, k2, p1, p2, k3]) => Some(Self::PlumbBob { k1, k2, p1, p2, k3 }),
            (LensModel::Fisheye, &[k1, k2, k3, k4]) => Some(Self::Fisheye { k1, k2, k3, k4 }),
            _ => None,
        }
    }

    pub fn model(&self) -> LensModel {
        match self {
            Self::PlumbBob { .. } => LensModel::PlumbBob,
            Self::Fisheye { .. } => LensModel::Fisheye,
        }
    }

    pub fn coefficients(&self) -> Vec<T> {
        match *self {
            Self::PlumbBob { k1, k2, p1, p2, k3 } => vec![k1, k2, p1, p2, k3],
            Self::Fisheye { k1, k2, k3, k4 } => vec![k1, k2, k3, k4],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coefficients().iter().all(|c| c.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients().iter().all(|&c| c == T::zero())
    }

    pub fn cast<U: Real>(&self) -> DistortionModel<U> {
        let d: Vec<U> = self.coefficients().iter().map(|c| U::lit(c.as_f64())).collect();
        DistortionModel::from_coefficients(self.model(), &d).expect("same model")
    }

    /// Applies distortion to normalized coordinates of a point in front of
    /// the camera.
    pub fn distort(&self, a: T, b: T) -> (T, T) {
        match *self {
            Self::PlumbBob { k1, k2, p1, p2, k3 } => {
                let two = T::lit(2.0);
                let r2 = a * a + b * b;
                let radial = T::one() + r2 * (k1 + r2 * (k2 + r2 * k3));
                let xd = a * radial + two * p1 * a * b + p2 * (r2 + two * a * a);
                let yd = b * radial + p1 * (r2 + two * b * b) + two * p2 * a * b;
                (xd, yd)
            }
            Self::Fisheye { .. } => {
                let r = (a * a + b * b).sqrt();
                if r < T::tol(1e-12, 4.0) {
                    return (a, b);
                }
                let s = self.theta_distorted(r.atan()) / r;
                (a * s, b * s)
            }
        }
    }

    /// Distortion together with its 2x2 Jacobian with respect to `(a, b)`.
    pub fn distort_with_jacobian(&self, a: T, b: T) -> ((T, T), [[T; 2]; 2]) {
        let two = T::lit(2.0);
        match *self {
            Self::PlumbBob { k1, k2, p1, p2, k3 } => {
                let r2 = a * a + b * b;
                let radial = T::one() + r2 * (k1 + r2 * (k2 + r2 * k3));
                // d radial / d r2
                let dr = k1 + r2 * (two * k2 + T::lit(3.0) * k3 * r2);
                let xd = a * radial + two * p1 * a * b + p2 * (r2 + two * a * a);
                let yd = b * radial + p1 * (r2 + two * b * b) + two * p2 * a * b;
                let six = T::lit(6.0);
                let j = [
                    [
                        radial + two * a * a * dr + two * p1 * b + six * p2 * a,
                        two * a * b * dr + two * p1 * a + two * p2 * b,
                    ],
                    [
                        two * a * b * dr + two * p1 * a + two * p2 * b,
                        radial + two * b * b * dr + six * p1 * b + two * p2 * a,
                    ],
                ];
                ((xd, yd), j)
            }
            Self::Fisheye { k1, .. } => {
                let r2 = a * a + b * b;
                let r = r2.sqrt();
                if r < T::tol(1e-7, 16.0) {
                    // s(r) = 1 + (k1 - 1/3) r^2 + O(r^4)
                    let c = k1 - T::one() / T::lit(3.0);
                    let s = T::one() + c * r2;
                    let j = [[s + two * c * a * a, two * c * a * b], [two * c * a * b, s + two * c * b * b]];
                    return ((a * s, b * s), j);
                }
                let theta = r.atan();
                let td = self.theta_distorted(theta);
                let dtd = self.theta_distorted_derivative(theta);
                let s = td / r;
                // ds/dr divided by r
                let ds_r = (dtd / (T::one() + r2) * r - td) / (r2 * r);
                let j = [[s + a * a * ds_r, a * b * ds_r], [a * b * ds_r, s + b * b * ds_r]];
                ((a * s, b * s), j)
            }
        }
    }

    /// `theta_d(theta)` of the fisheye model; identity for plumb-bob.
    pub fn theta_distorted(&self, theta: T) -> T {
        match *self {
            Self::Fisheye { k1, k2, k3, k4 } => {
                let t2 = theta * theta;
                theta * (T::one() + t2 * (k1 + t2 * (k2 + t2 * (k3 + t2 * k4))))
            }
            Self::PlumbBob { .. } => theta,
        }
    }

    pub fn theta_distorted_derivative(&self, theta: T) -> T {
        match *self {
            Self::Fisheye { k1, k2, k3, k4 } => {
                let t2 = theta * theta;
                T::one()
                    + t2 * (T::lit(3.0) * k1
                        + t2 * (T::lit(5.0) * k2 + t2 * (T::lit(7.0) * k3 + t2 * T::lit(9.0) * k4)))
            }
            Self::PlumbBob { .. } => T::one(),
        }
    }
}
