//! File formats: 8/16-bit PNG rasters, calibration and corner JSON files,
//! and atomic writes.
//!
//! JSON numbers are written with 17 significant digits so every `f64`
//! round-trips exactly.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use thiserror::Error;

use crate::calibration::{BoardSpec, CalibrationError, Extrinsics, ViewObservation};
use crate::geometry::{CameraIntrinsics, DistortionModel, GeometryError, LensModel, PixelCoord, Resolution};
use crate::linalg::{Mat3, Vec3};
use crate::raster::Raster;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: cannot decode PNG: {message}", path.display())]
    Png { path: PathBuf, message: String },
    #[error("{}: invalid JSON: {message}", path.display())]
    Json { path: PathBuf, message: String },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl IoError {
    pub fn path(&self) -> &Path {
        match self {
            IoError::Io { path, .. }
            | IoError::Png { path, .. }
            | IoError::Json { path, .. }
            | IoError::Format { path, .. } => path,
        }
    }

    fn format(path: &Path, message: impl Into<String>) -> Self {
        IoError::Format { path: path.to_path_buf(), message: message.into() }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| IoError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// JSON

/// Pretty JSON formatter writing floats with 17 significant digits.
struct PreciseFormatter(PrettyFormatter<'static>);

fn format_f64(v: f64) -> String {
    if !v.is_finite() {
        // JSON has no representation; serde_json writes null for these too
        return "null".into();
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{v:.16e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    if (-5..=16).contains(&exp) {
        let s = format!("{:.*}", (16 - exp).max(0) as usize, v);
        if s.contains('.') {
            s
        } else {
            s + ".0"
        }
    } else {
        sci
    }
}

impl Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty-printed JSON with 17 significant digits per float and a trailing
/// newline.
pub fn to_json_string<S: Serialize + ?Sized>(value: &S) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, PreciseFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<(), IoError> {
    write_atomic(path, to_json_string(value).as_bytes())
}

pub fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| IoError::Json { path: path.to_path_buf(), message: e.to_string() })
}

// ---------------------------------------------------------------------------
// Calibration files

/// On-disk camera calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicsFile {
    pub model: LensModel,
    pub width: usize,
    pub height: usize,
    #[serde(rename = "K")]
    pub k: [f64; 9],
    #[serde(rename = "D")]
    pub d: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rms_reproj_px: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view_count: Option<usize>,
}

impl IntrinsicsFile {
    pub fn from_intrinsics(intr: &CameraIntrinsics<f64>) -> Self {
        let m = intr.matrix().m;
        let res = intr.resolution();
        Self {
            model: intr.model(),
            width: res.width,
            height: res.height,
            k: [m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2]],
            d: intr.distortion().coefficients(),
            rms_reproj_px: None,
            view_count: None,
        }
    }

    pub fn to_intrinsics(&self) -> Result<CameraIntrinsics<f64>, GeometryError> {
        let d = DistortionModel::from_coefficients(self.model, &self.d).ok_or_else(|| {
            GeometryError::InvalidIntrinsics(format!(
                "{} expects {} distortion coefficients, got {}",
                self.model,
                self.model.coefficient_count(),
                self.d.len()
            ))
        })?;
        CameraIntrinsics::from_matrix(&Mat3::from_row_slice(&self.k), d, Resolution::new(self.width, self.height))
    }
}

pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics<f64>, IoError> {
    let file: IntrinsicsFile = read_json(path)?;
    file.to_intrinsics().map_err(|e| IoError::format(path, e.to_string()))
}

/// On-disk RGB-to-thermal transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrinsicsFile {
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t_m: [f64; 3],
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rms_reproj_px: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_views: Option<Vec<String>>,
}

impl ExtrinsicsFile {
    pub fn from_extrinsics(ext: &Extrinsics<f64>) -> Self {
        let m = ext.rotation().m;
        let t = ext.translation();
        Self {
            r: [m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2]],
            t_m: [t.x, t.y, t.z],
            from: "rgb".into(),
            to: "thermal".into(),
            rms_reproj_px: None,
            shared_views: None,
        }
    }

    pub fn to_extrinsics(&self) -> Result<Extrinsics<f64>, CalibrationError> {
        if self.from != "rgb" || self.to != "thermal" {
            return Err(CalibrationError::InvalidInput(format!(
                "expected a transform from rgb to thermal, got {} to {}",
                self.from, self.to
            )));
        }
        Extrinsics::new(Mat3::from_row_slice(&self.r), Vec3::from_array(self.t_m))
    }
}

pub fn read_extrinsics(path: &Path) -> Result<Extrinsics<f64>, IoError> {
    let file: ExtrinsicsFile = read_json(path)?;
    file.to_extrinsics().map_err(|e| IoError::format(path, e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoardFile {
    pub inner_rows: usize,
    pub inner_cols: usize,
    pub square_size_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewFile {
    pub view_id: String,
    pub corners: Vec<[f64; 2]>,
}

/// Checkerboard corner observations of one camera. `width`/`height` give the
/// image size when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerFile {
    pub camera: String,
    pub board: BoardFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    pub views: Vec<ViewFile>,
}

impl CornerFile {
    pub fn new(
        camera: &str,
        board: &BoardSpec<f64>,
        resolution: Option<Resolution>,
        views: &[ViewObservation<f64>],
    ) -> Self {
        Self {
            camera: camera.into(),
            board: BoardFile {
                inner_rows: board.inner_rows(),
                inner_cols: board.inner_cols(),
                square_size_m: board.square_size(),
            },
            width: resolution.map(|r| r.width),
            height: resolution.map(|r| r.height),
            views: views
                .iter()
                .map(|v| ViewFile {
                    view_id: v.view_id.clone(),
                    corners: v.corners.iter().map(|c| [c.u, c.v]).collect(),
                })
                .collect(),
        }
    }

    pub fn board(&self) -> Result<BoardSpec<f64>, CalibrationError> {
        BoardSpec::new(self.board.inner_rows, self.board.inner_cols, self.board.square_size_m)
    }

    pub fn resolution(&self) -> Option<Resolution> {
        match (self.width, self.height) {
            (Some(w), Some(h)) => Some(Resolution::new(w, h)),
            _ => None,
        }
    }

    /// Observations, each validated against the board.
    pub fn observations(&self) -> Result<Vec<ViewObservation<f64>>, CalibrationError> {
        let board = self.board()?;
        self.views
            .iter()
            .map(|v| {
                let obs = ViewObservation::new(
                    v.view_id.clone(),
                    v.corners.iter().map(|c| PixelCoord::new(c[0], c[1])).collect(),
                );
                obs.validate(&board).map(|_| obs)
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// PNG

fn decode(path: &Path) -> Result<DynamicImage, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    image::load_from_memory_with_format(&bytes, ImageFormat::Png)
        .map_err(|e| IoError::Png { path: path.to_path_buf(), message: e.to_string() })
}

/// 16-bit single-channel PNG (depth in mm, raw thermal counts).
pub fn read_png_u16(path: &Path) -> Result<Raster<u16>, IoError> {
    match decode(path)? {
        DynamicImage::ImageLuma16(img) => {
            let (w, h) = (img.width() as usize, img.height() as usize);
            Ok(Raster::from_vec(w, h, 1, img.into_raw()).expect("decoder buffer matches dimensions"))
        }
        other => Err(IoError::format(path, format!("expected 16-bit grayscale PNG, found {:?}", other.color()))),
    }
}

/// 8-bit single-channel PNG (label images).
pub fn read_png_u8(path: &Path) -> Result<Raster<u8>, IoError> {
    match decode(path)? {
        DynamicImage::ImageLuma8(img) => {
            let (w, h) = (img.width() as usize, img.height() as usize);
            Ok(Raster::from_vec(w, h, 1, img.into_raw()).expect("decoder buffer matches dimensions"))
        }
        other => Err(IoError::format(path, format!("expected 8-bit grayscale PNG, found {:?}", other.color()))),
    }
}

/// PNG image dimensions without keeping the pixels.
pub fn png_dimensions(path: &Path) -> Result<(usize, usize), IoError> {
    let img = decode(path)?;
    Ok((img.width() as usize, img.height() as usize))
}

fn encode(path: &Path, img: DynamicImage) -> Result<(), IoError> {
    let mut buf = io::Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| IoError::Png { path: path.to_path_buf(), message: e.to_string() })?;
    write_atomic(path, buf.get_ref())
}

fn dims_u32(path: &Path, w: usize, h: usize) -> Result<(u32, u32), IoError> {
    match (u32::try_from(w), u32::try_from(h)) {
        (Ok(w), Ok(h)) if w > 0 && h > 0 => Ok((w, h)),
        _ => Err(IoError::format(path, format!("cannot encode a {w}x{h} image"))),
    }
}

pub fn write_png_u16(path: &Path, img: &Raster<u16>) -> Result<(), IoError> {
    if img.channels() != 1 {
        return Err(IoError::format(path, "16-bit PNG output must have one channel"));
    }
    let (w, h) = dims_u32(path, img.width(), img.height())?;
    let buf = ImageBuffer::<Luma<u16>, _>::from_raw(w, h, img.data().to_vec()).expect("buffer matches dimensions");
    encode(path, DynamicImage::ImageLuma16(buf))
}

/// One-channel rasters become grayscale, three-channel rasters RGB.
pub fn write_png_u8(path: &Path, img: &Raster<u8>) -> Result<(), IoError> {
    let (w, h) = dims_u32(path, img.width(), img.height())?;
    let data = img.data().to_vec();
    let dynamic = match img.channels() {
        1 => DynamicImage::ImageLuma8(
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, data).expect("buffer matches dimensions"),
        ),
        3 => {
            DynamicImage::ImageRgb8(ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, data).expect("buffer matches dimensions"))
        }
        c => return Err(IoError::format(path, format!("cannot encode {c}-channel 8-bit PNG"))),
    };
    encode(path, dynamic)
}
