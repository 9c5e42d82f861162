//! Camera projection models: plumb-bob and fisheye intrinsics, point
//! projection and unprojection, undistorted camera matrices and remapping.

mod camera;
mod distortion;
mod undistort;

pub use camera::{CameraIntrinsics, PixelCoord, Point3, Resolution, UndistortedIntrinsics};
pub use distortion::{DistortionModel, LensModel};
pub use undistort::{undistort_image, undistorted_matrix, DEFAULT_BALANCE};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point has non-positive depth z = {0}")]
    NonPositiveDepth(f64),
    #[error("point has no defined viewing direction")]
    DegeneratePoint,
    #[error("distortion inversion did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("resolution mismatch: expected {expected:?}, got {actual:?}")]
    ResolutionMismatch { expected: (usize, usize), actual: (usize, usize) },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
}
