use std::fmt;

use thermalign_core::calibration::CalibrationError;
use thermalign_core::dataset::DatasetError;
use thermalign_core::eval::EvalError;
use thermalign_core::geometry::GeometryError;
use thermalign_core::io::IoError;
use thermalign_core::registration::RegistrationError;
use thermalign_core::synth::SynthError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Usage = 1,
    Data = 2,
    Numerical = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug)]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { status: ExitStatus::Usage, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { status: ExitStatus::Data, message: message.into() }
    }

    /// Prefixes the message with the input it concerns.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn status_of_geometry(e: &GeometryError) -> ExitStatus {
    match e {
        GeometryError::NonPositiveDepth(_) | GeometryError::DegeneratePoint | GeometryError::NoConvergence { .. } => {
            ExitStatus::Numerical
        }
        GeometryError::ResolutionMismatch { .. } | GeometryError::InvalidIntrinsics(_) => ExitStatus::Data,
    }
}

fn status_of_calibration(e: &CalibrationError) -> ExitStatus {
    match e {
        CalibrationError::DegenerateConfiguration(_)
        | CalibrationError::IllConditioned(_)
        | CalibrationError::NoConvergence { .. }
        | CalibrationError::BehindCamera => ExitStatus::Numerical,
        CalibrationError::NoSharedViews | CalibrationError::InvalidInput(_) => ExitStatus::Data,
        CalibrationError::Geometry(g) => status_of_geometry(g),
    }
}

fn status_of_registration(e: &RegistrationError) -> ExitStatus {
    match e {
        RegistrationError::BehindCamera => ExitStatus::Numerical,
        RegistrationError::InvalidDepth | RegistrationError::ResolutionMismatch { .. } => ExitStatus::Data,
    }
}

fn status_of_dataset(e: &DatasetError) -> ExitStatus {
    match e {
        DatasetError::InvalidC { .. } | DatasetError::InvalidClassCount(_) => ExitStatus::Usage,
        DatasetError::MissingDirectory(_)
        | DatasetError::EmptyDataset(_)
        | DatasetError::LabelOutOfRange { .. }
        | DatasetError::NotALabelImage { .. }
        | DatasetError::Io(_) => ExitStatus::Data,
    }
}

fn status_of_eval(e: &EvalError) -> ExitStatus {
    match e {
        EvalError::InvalidClassCount(_) => ExitStatus::Usage,
        EvalError::ResolutionMismatch { .. } | EvalError::LabelOutOfRange { .. } | EvalError::EmptyMatrix => {
            ExitStatus::Data
        }
    }
}

fn status_of_synth(e: &SynthError) -> ExitStatus {
    match e {
        SynthError::BoardNotVisible { .. } => ExitStatus::Numerical,
        SynthError::Geometry(g) => status_of_geometry(g),
    }
}

macro_rules! from_error {
    ($ty:ty, $status:expr) => {
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                let status: fn(&$ty) -> ExitStatus = $status;
                Self { status: status(&e), message: e.to_string() }
            }
        }
    };
}

from_error!(GeometryError, status_of_geometry);
from_error!(CalibrationError, status_of_calibration);
from_error!(RegistrationError, status_of_registration);
from_error!(DatasetError, status_of_dataset);
from_error!(EvalError, status_of_eval);
from_error!(SynthError, status_of_synth);
from_error!(IoError, |_| ExitStatus::Data);

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    #[test]
    fn module_errors_map_to_documented_codes() {
        let cases: Vec<(CliError, i32)> = vec![
            (CalibrationError::IllConditioned("x".into()).into(), 3),
            (CalibrationError::NoConvergence { iterations: 200, relative_decrease: 1e-3 }.into(), 3),
            (CalibrationError::NoSharedViews.into(), 2),
            (CalibrationError::Geometry(GeometryError::InvalidIntrinsics("k".into())).into(), 2),
            (GeometryError::NoConvergence { residual: 1.0 }.into(), 3),
            (RegistrationError::ResolutionMismatch { expected: (1, 1), actual: (2, 2) }.into(), 2),
            (DatasetError::MissingDirectory(PathBuf::from("r/rgb")).into(), 2),
            (DatasetError::InvalidC { c: 0.0, reason: "r".into() }.into(), 1),
            (EvalError::EmptyMatrix.into(), 2),
            (IoError::Png { path: PathBuf::from("a.png"), message: "bad".into() }.into(), 2),
        ];
        for (err, code) in cases {
            assert_eq!(err.status.code(), code, "{err}");
        }
    }
}
