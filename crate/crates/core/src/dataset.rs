//! Dataset layout scanning, class-imbalance statistics and ENet-style loss
//! weights.
//!
//! A dataset root holds `rgb/`, `thermal/`, `depth/` and `labels/`, with one
//! PNG per sample sharing its file stem across folders. An RGB-only corpus
//! keeps empty `thermal/` and `depth/` folders.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::io::{read_png_u8, IoError};
use crate::raster::Raster;

/// Per-pixel class indices.
pub type LabelImage = Raster<u8>;

pub const PST900_CLASSES: [&str; 5] = ["background", "fire_extinguisher", "backpack", "hand_drill", "survivor"];

/// Visualization colours: background black, fire extinguisher red,
/// backpack green, hand drill orange, survivor white.
pub const PALETTE: [[u8; 3]; 5] = [[0, 0, 0], [255, 0, 0], [0, 255, 0], [255, 165, 0], [255, 255, 255]];

pub const DEFAULT_ENET_C: f64 = 1.02;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing directory {}", .0.display())]
    MissingDirectory(PathBuf),
    #[error("no complete samples under {}", .0.display())]
    EmptyDataset(PathBuf),
    #[error("{}: label {value} at ({x}, {y}) is not below the class count {classes}", file.display())]
    LabelOutOfRange { file: PathBuf, value: u8, x: usize, y: usize, classes: usize },
    #[error("invalid class count {0}")]
    InvalidClassCount(usize),
    #[error("invalid weighting constant c = {c}: {reason}")]
    InvalidC { c: f64, reason: String },
    #[error("{}: expected one label channel, found {channels}", file.display())]
    NotALabelImage { file: PathBuf, channels: usize },
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Rgb,
    Thermal,
    Depth,
    Labels,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::Rgb, Modality::Thermal, Modality::Depth, Modality::Labels];

    pub fn dir_name(self) -> &'static str {
        match self {
            Modality::Rgb => "rgb",
            Modality::Thermal => "thermal",
            Modality::Depth => "depth",
            Modality::Labels => "labels",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Rgbt,
    RgbOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Sample {
    pub stem: String,
    pub rgb: PathBuf,
    /// `None` in the RGB-only layout.
    pub thermal: Option<PathBuf>,
    pub depth: Option<PathBuf>,
    pub labels: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IncompleteSample {
    pub stem: String,
    pub missing: Vec<Modality>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub layout: Layout,
    /// Complete samples sorted by stem.
    pub samples: Vec<Sample>,
    pub incomplete: Vec<IncompleteSample>,
}

impl DatasetIndex {
    pub fn label_paths(&self) -> Vec<PathBuf> {
        self.samples.iter().map(|s| s.labels.clone()).collect()
    }
}

fn png_stems(dir: &Path) -> Result<BTreeMap<String, PathBuf>, DatasetError> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|source| IoError::Io { path: dir.to_path_buf(), source })?;
    for entry in entries {
        let path = entry.map_err(|source| IoError::Io { path: dir.to_path_buf(), source })?.path();
        let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if path.is_file() && is_png {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path);
            }
        }
    }
    Ok(out)
}

/// Indexes the samples under `root`. Stems present in some folders but not
/// all required ones are reported in `incomplete`.
pub fn scan_dataset(root: &Path) -> Result<DatasetIndex, DatasetError> {
    let mut files = BTreeMap::new();
    for m in Modality::ALL {
        let dir = root.join(m.dir_name());
        if !dir.is_dir() {
            return Err(DatasetError::MissingDirectory(dir));
        }
        files.insert(m, png_stems(&dir)?);
    }
    let layout = if files[&Modality::Thermal].is_empty() && files[&Modality::Depth].is_empty() {
        Layout::RgbOnly
    } else {
        Layout::Rgbt
    };
    let required: &[Modality] = match layout {
        Layout::Rgbt => &Modality::ALL,
        Layout::RgbOnly => &[Modality::Rgb, Modality::Labels],
    };
    let stems: BTreeSet<&String> = files.values().flat_map(|m| m.keys()).collect();
    let mut samples = Vec::new();
    let mut incomplete = Vec::new();
    for stem in stems {
        let missing: Vec<Modality> = required.iter().copied().filter(|m| !files[m].contains_key(stem)).collect();
        if !missing.is_empty() {
            incomplete.push(IncompleteSample { stem: stem.clone(), missing });
            continue;
        }
        samples.push(Sample {
            stem: stem.clone(),
            rgb: files[&Modality::Rgb][stem].clone(),
            thermal: files[&Modality::Thermal].get(stem).cloned(),
            depth: files[&Modality::Depth].get(stem).cloned(),
            labels: files[&Modality::Labels][stem].clone(),
        });
    }
    if samples.is_empty() {
        return Err(DatasetError::EmptyDataset(root.to_path_buf()));
    }
    Ok(DatasetIndex { root: root.to_path_buf(), layout, samples, incomplete })
}

/// Integer pixel and image counts per class. Merging is associative and
/// commutative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub pixels: Vec<u64>,
    /// Number of images containing at least one pixel of each class.
    pub images_with: Vec<u64>,
    pub images: u64,
}

impl ClassCounts {
    pub fn zeros(classes: usize) -> Self {
        Self { pixels: vec![0; classes], images_with: vec![0; classes], images: 0 }
    }

    pub fn classes(&self) -> usize {
        self.pixels.len()
    }

    pub fn total_pixels(&self) -> u64 {
        self.pixels.iter().sum()
    }

    /// Counts one image. On an out-of-range label returns `(value, x, y)` of
    /// the first offending pixel in row-major order.
    pub fn count_image(classes: usize, img: &LabelImage) -> Result<Self, (u8, usize, usize)> {
        let mut c = Self::zeros(classes);
        for (i, &v) in img.data().iter().enumerate() {
            let k = usize::from(v);
            if k >= classes {
                return Err((v, i % img.width().max(1), i / img.width().max(1)));
            }
            c.pixels[k] += 1;
        }
        for (w, &p) in c.images_with.iter_mut().zip(&c.pixels) {
            *w = u64::from(p > 0);
        }
        c.images = 1;
        Ok(c)
    }

    pub fn merge(mut self, other: &Self) -> Self {
        assert_eq!(self.classes(), other.classes(), "merging counts of different class sets");
        for (a, b) in self.pixels.iter_mut().zip(&other.pixels) {
            *a += b;
        }
        for (a, b) in self.images_with.iter_mut().zip(&other.images_with) {
            *a += b;
        }
        self.images += other.images;
        self
    }
}

/// Class-imbalance table: percentage of all pixels per class, and
/// percentage of images containing each class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassStats {
    pub class_names: Vec<String>,
    pub per_pixel_pct: Vec<f64>,
    pub per_instance_pct: Vec<f64>,
    pub counts: ClassCounts,
}

pub fn class_names(classes: usize) -> Vec<String> {
    if classes == PST900_CLASSES.len() {
        PST900_CLASSES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..classes).map(|k| format!("class_{k}")).collect()
    }
}

impl ClassStats {
    pub fn from_counts(counts: ClassCounts) -> Self {
        let total = counts.total_pixels();
        let pct = |n: u64, d: u64| if d == 0 { 0.0 } else { 100.0 * n as f64 / d as f64 };
        Self {
            class_names: class_names(counts.classes()),
            per_pixel_pct: counts.pixels.iter().map(|&n| pct(n, total)).collect(),
            per_instance_pct: counts.images_with.iter().map(|&n| pct(n, counts.images)).collect(),
            counts,
        }
    }

    /// Pixel fraction of class `k` as a probability.
    pub fn pixel_probability(&self, k: usize) -> f64 {
        let total = self.counts.total_pixels();
        if total == 0 {
            0.0
        } else {
            self.counts.pixels[k] as f64 / total as f64
        }
    }

    /// JSON with `per_pixel_pct` and `per_instance_pct` keyed by class name.
    pub fn to_json(&self) -> serde_json::Value {
        let block = |v: &[f64]| {
            serde_json::Value::Object(self.class_names.iter().cloned().zip(v.iter().map(|&x| x.into())).collect())
        };
        serde_json::json!({
            "classes": self.class_names,
            "images": self.counts.images,
            "pixels": self.counts.total_pixels(),
            "per_pixel_pct": block(&self.per_pixel_pct),
            "per_instance_pct": block(&self.per_instance_pct),
        })
    }

    /// Plain-text table with 4 decimals.
    pub fn to_table(&self) -> String {
        let width = self.class_names.iter().map(String::len).max().unwrap_or(5).max(5);
        let mut s = format!("{:<width$}  {:>10}  {:>12}\n", "class", "pixel %", "instance %");
        for ((name, p), i) in self.class_names.iter().zip(&self.per_pixel_pct).zip(&self.per_instance_pct) {
            s += &format!("{name:<width$}  {p:>10.4}  {i:>12.4}\n");
        }
        s
    }
}

fn check_classes(classes: usize) -> Result<(), DatasetError> {
    if classes == 0 || classes > 256 {
        return Err(DatasetError::InvalidClassCount(classes));
    }
    Ok(())
}

/// Exact class statistics over named label images; the name identifies an
/// offending file in errors.
pub fn class_imbalance<I, P>(labels: I, classes: usize) -> Result<ClassStats, DatasetError>
where
    I: IntoIterator<Item = (P, LabelImage)>,
    P: AsRef<Path>,
{
    check_classes(classes)?;
    let mut acc = ClassCounts::zeros(classes);
    for (name, img) in labels {
        acc = acc.merge(&count_named(name.as_ref(), &img, classes)?);
    }
    Ok(ClassStats::from_counts(acc))
}

fn count_named(file: &Path, img: &LabelImage, classes: usize) -> Result<ClassCounts, DatasetError> {
    if img.channels() != 1 {
        return Err(DatasetError::NotALabelImage { file: file.to_path_buf(), channels: img.channels() });
    }
    ClassCounts::count_image(classes, img).map_err(|(value, x, y)| DatasetError::LabelOutOfRange {
        file: file.to_path_buf(),
        value,
        x,
        y,
        classes,
    })
}

/// Loads and counts label PNGs in parallel. On error, the reported file is
/// the first offending one in the given order.
pub fn class_imbalance_files(paths: &[PathBuf], classes: usize) -> Result<ClassStats, DatasetError> {
    check_classes(classes)?;
    let per_file: Vec<Result<ClassCounts, DatasetError>> = paths
        .par_iter()
        .map(|p| {
            let img = read_png_u8(p)?;
            count_named(p, &img, classes)
        })
        .collect();
    let mut acc = ClassCounts::zeros(classes);
    for c in per_file {
        acc = acc.merge(&c?);
    }
    Ok(ClassStats::from_counts(acc))
}

/// `1 / ln(c + p)` for a pixel probability `p`.
pub fn enet_weight(p: f64, c: f64) -> Result<f64, DatasetError> {
    if !(c.is_finite() && c > 0.0) {
        return Err(DatasetError::InvalidC { c, reason: "c must be a positive finite number".into() });
    }
    if !(c + p > 1.0) {
        return Err(DatasetError::InvalidC { c, reason: format!("ln(c + p) is not positive for p = {p}") });
    }
    Ok(1.0 / (c + p).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassWeights {
    pub class_names: Vec<String>,
    pub c: f64,
    pub weights: Vec<f64>,
}

/// ENet class weights. Classes absent from the corpus get `1 / ln(c)`.
pub fn enet_weights(stats: &ClassStats, c: f64) -> Result<ClassWeights, DatasetError> {
    let weights = (0..stats.counts.classes())
        .map(|k| enet_weight(stats.pixel_probability(k), c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ClassWeights { class_names: stats.class_names.clone(), c, weights })
}

/// Label image rendered with [`PALETTE`]; indices beyond the palette are grey.
pub fn colorize(labels: &LabelImage) -> Raster<u8> {
    let mut out = Raster::new(labels.width(), labels.height(), 3);
    for (px, &k) in out.data_mut().chunks_mut(3).zip(labels.data()) {
        px.copy_from_slice(PALETTE.get(usize::from(k)).unwrap_or(&[128, 128, 128]));
    }
    out
}
