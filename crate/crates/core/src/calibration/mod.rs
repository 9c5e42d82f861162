//! Planar-checkerboard intrinsic calibration and two-camera extrinsic
//! calibration from corner observations.
//!
//! Pipeline per camera: DLT homography per view, closed-form intrinsics from
//! the image of the absolute conic, then joint Levenberg-Marquardt over the
//! camera matrix, distortion and all board poses. Extrinsics compose the
//! per-view board poses of both cameras, average them, and refine jointly.

mod extrinsics;
mod homography;
mod intrinsics;
pub mod jacobian;
mod lm;
mod pose;
mod zhang;

pub use extrinsics::{calibrate_extrinsics, CameraViews, ExtrinsicCalibration};
pub use homography::{estimate_homography, symmetric_transfer_error};
pub use intrinsics::{calibrate_intrinsics, calibrate_intrinsics_with, IntrinsicResult};
pub use lm::{LmSettings, SolverSummary, Termination};
pub use pose::estimate_board_pose;
pub use zhang::zhang_init;

use thiserror::Error;

use crate::geometry::{GeometryError, PixelCoord, Point3};
use crate::linalg::{Mat3, Vec3};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("ill-conditioned view set: {0} (more or more diverse views required)")]
    IllConditioned(String),
    #[error("optimizer did not converge after {iterations} iterations (relative decrease {relative_decrease:e})")]
    NoConvergence { iterations: usize, relative_decrease: f64 },
    #[error("board lies behind the camera")]
    BehindCamera,
    #[error("the two cameras share no views")]
    NoSharedViews,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Checkerboard geometry. Corners are numbered row-major; corner `(r, c)`
/// sits at `(c * square_size, r * square_size, 0)` in the board frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoardSpec<T> {
    inner_rows: usize,
    inner_cols: usize,
    square_size: T,
}

impl<T: Real> BoardSpec<T> {
    pub fn new(inner_rows: usize, inner_cols: usize, square_size: T) -> Result<Self, CalibrationError> {
        if inner_rows < 3 || inner_cols < 3 {
            return Err(CalibrationError::InvalidInput(format!(
                "board needs at least 3x3 inner corners, got {inner_rows}x{inner_cols}"
            )));
        }
        if !(square_size > T::zero() && square_size.is_finite()) {
            return Err(CalibrationError::InvalidInput(format!("square size {square_size} must be positive")));
        }
        Ok(Self { inner_rows, inner_cols, square_size })
    }

    pub fn inner_rows(&self) -> usize {
        self.inner_rows
    }
    pub fn inner_cols(&self) -> usize {
        self.inner_cols
    }
    pub fn square_size(&self) -> T {
        self.square_size
    }

    pub fn corner_count(&self) -> usize {
        self.inner_rows * self.inner_cols
    }

    /// Board-frame corner positions, row-major.
    pub fn object_points(&self) -> Vec<Point3<T>> {
        (0..self.inner_rows)
            .flat_map(|r| {
                (0..self.inner_cols).map(move |c| {
                    Vec3::new(
                        T::from_usize_lossy(c) * self.square_size,
                        T::from_usize_lossy(r) * self.square_size,
                        T::zero(),
                    )
                })
            })
            .collect()
    }

    pub fn plane_points(&self) -> Vec<[T; 2]> {
        self.object_points().iter().map(|p| [p.x, p.y]).collect()
    }
}

/// Detected corners of one board view, row-major board order.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewObservation<T> {
    pub view_id: String,
    pub corners: Vec<PixelCoord<T>>,
}

impl<T: Real> ViewObservation<T> {
    pub fn new(view_id: impl Into<String>, corners: Vec<PixelCoord<T>>) -> Self {
        Self { view_id: view_id.into(), corners }
    }

    pub fn validate(&self, board: &BoardSpec<T>) -> Result<(), CalibrationError> {
        if self.corners.len() != board.corner_count() {
            return Err(CalibrationError::InvalidInput(format!(
                "view `{}` has {} corners, board needs {}",
                self.view_id,
                self.corners.len(),
                board.corner_count()
            )));
        }
        if !self.corners.iter().all(|c| c.is_finite()) {
            return Err(CalibrationError::InvalidInput(format!("view `{}` has non-finite corners", self.view_id)));
        }
        Ok(())
    }
}

/// Rigid transform `x_dst = R x_src + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T> {
    pub rotation: Mat3<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> Pose<T> {
    pub fn new(rotation: Mat3<T>, translation: Vec3<T>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Mat3::identity(), Vec3::zeros())
    }

    pub fn transform(&self, p: Point3<T>) -> Point3<T> {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Pose<T>) -> Pose<T> {
        Pose::new(self.rotation * other.rotation, self.rotation * other.translation + self.translation)
    }

    pub fn inverse(&self) -> Pose<T> {
        let rt = self.rotation.transpose();
        Pose::new(rt, -(rt * self.translation))
    }

    pub fn cast<U: Real>(&self) -> Pose<U> {
        Pose::new(self.rotation.cast(), self.translation.cast())
    }
}

/// Rotation validity tolerance shared by every rigid transform constructor.
pub(crate) fn rotation_tolerance<T: Real>() -> T {
    T::tol(1e-9, 64.0)
}

/// Rigid transform from the RGB camera frame to the thermal camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsics<T> {
    rotation: Mat3<T>,
    translation: Vec3<T>,
}

impl<T: Real> Extrinsics<T> {
    /// Validates `RᵀR = I` and `det R = +1`.
    pub fn new(rotation: Mat3<T>, translation: Vec3<T>) -> Result<Self, CalibrationError> {
        if !rotation.is_rotation(rotation_tolerance()) {
            return Err(CalibrationError::InvalidInput("extrinsic rotation is not a proper rotation".into()));
        }
        if !translation.is_finite() {
            return Err(CalibrationError::InvalidInput("extrinsic translation is not finite".into()));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    pub fn rotation(&self) -> &Mat3<T> {
        &self.rotation
    }

    pub fn translation(&self) -> Vec3<T> {
        self.translation
    }

    pub fn as_pose(&self) -> Pose<T> {
        Pose::new(self.rotation, self.translation)
    }

    /// Maps an RGB-frame point into the thermal frame.
    pub fn transform(&self, p: Point3<T>) -> Point3<T> {
        self.rotation * p + self.translation
    }

    pub fn cast<U: Real>(&self) -> Extrinsics<U> {
        Extrinsics { rotation: self.rotation.cast(), translation: self.translation.cast() }
    }
}
