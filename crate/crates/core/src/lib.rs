//! Calibration and depth-guided registration of RGB and thermal (LWIR)
//! cameras, with dataset statistics and segmentation metrics.
//!
//! Numeric code is generic over [`scalar::Real`] (`f32` or `f64`); the
//! `*F64` / `*F32` aliases below name the common instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod calibration;
pub mod dataset;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod raster;
pub mod registration;
pub mod scalar;
pub mod synth;

pub use calibration::{
    calibrate_extrinsics, calibrate_intrinsics, estimate_board_pose, estimate_homography, zhang_init, BoardSpec,
    CalibrationError, CameraViews, ExtrinsicCalibration, Extrinsics, IntrinsicResult, Pose, ViewObservation,
};
pub use dataset::{class_imbalance, enet_weights, scan_dataset, ClassStats, ClassWeights, DatasetError, LabelImage};
pub use eval::{iou_report, ConfusionMatrix, EvalError, IoUReport};
pub use geometry::{
    undistort_image, undistorted_matrix, CameraIntrinsics, DistortionModel, GeometryError, LensModel, PixelCoord,
    Point3, Resolution, UndistortedIntrinsics,
};
pub use raster::{Interpolation, Raster};
pub use registration::{
    apply_alignment, backproject, build_alignment_map, fill_holes, project_to_thermal, AlignmentMap, AlignmentStatus,
    DepthImage, MapEntry, RegistrationError, ThermalImage,
};
pub use scalar::Real;

pub type PixelCoordF64 = PixelCoord<f64>;
pub type PixelCoordF32 = PixelCoord<f32>;
pub type Point3F64 = Point3<f64>;
pub type Point3F32 = Point3<f32>;
pub type CameraIntrinsicsF64 = CameraIntrinsics<f64>;
pub type CameraIntrinsicsF32 = CameraIntrinsics<f32>;
pub type UndistortedIntrinsicsF64 = UndistortedIntrinsics<f64>;
pub type UndistortedIntrinsicsF32 = UndistortedIntrinsics<f32>;
pub type DistortionModelF64 = DistortionModel<f64>;
pub type DistortionModelF32 = DistortionModel<f32>;
pub type ExtrinsicsF64 = Extrinsics<f64>;
pub type ExtrinsicsF32 = Extrinsics<f32>;
pub type PoseF64 = Pose<f64>;
pub type PoseF32 = Pose<f32>;
pub type BoardSpecF64 = BoardSpec<f64>;
pub type BoardSpecF32 = BoardSpec<f32>;
pub type ViewObservationF64 = ViewObservation<f64>;
pub type ViewObservationF32 = ViewObservation<f32>;
pub type IntrinsicResultF64 = IntrinsicResult<f64>;
pub type IntrinsicResultF32 = IntrinsicResult<f32>;
pub type AlignmentMapF64 = AlignmentMap<f64>;
pub type AlignmentMapF32 = AlignmentMap<f32>;
