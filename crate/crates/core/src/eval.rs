//! Confusion matrices and per-class IoU / mIoU reports.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dataset::{class_names, LabelImage};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("resolution mismatch: ground truth {gt:?}, prediction {pred:?}")]
    ResolutionMismatch { gt: (usize, usize), pred: (usize, usize) },
    #[error("label {value} at ({x}, {y}) is not below the class count {classes}")]
    LabelOutOfRange { value: u8, x: usize, y: usize, classes: usize },
    #[error("confusion matrix has no counts")]
    EmptyMatrix,
    #[error("invalid class count {0}")]
    InvalidClassCount(usize),
}

/// `K x K` pixel counts; entry `(g, p)` counts pixels of ground-truth class
/// `g` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Result<Self, EvalError> {
        if classes == 0 || classes > 256 {
            return Err(EvalError::InvalidClassCount(classes));
        }
        Ok(Self { classes, counts: vec![0; classes * classes] })
    }

    /// Row-major `rows[g][p]`.
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self, EvalError> {
        let mut cm = Self::new(rows.len())?;
        for (g, row) in rows.iter().enumerate() {
            if row.len() != cm.classes {
                return Err(EvalError::InvalidClassCount(row.len()));
            }
            cm.counts[g * cm.classes..(g + 1) * cm.classes].copy_from_slice(row);
        }
        Ok(cm)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.classes).map(<[u64]>::to_vec).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn check(&self, gt: &LabelImage, pred: &LabelImage) -> Result<(), EvalError> {
        if gt.dims() != pred.dims() || gt.channels() != pred.channels() {
            return Err(EvalError::ResolutionMismatch { gt: gt.dims(), pred: pred.dims() });
        }
        let w = gt.width().max(1);
        let ch = gt.channels().max(1);
        for (i, (&g, &p)) in gt.data().iter().zip(pred.data()).enumerate() {
            let bad =
                if usize::from(g) >= self.classes { Some(g) } else { (usize::from(p) >= self.classes).then_some(p) };
            if let Some(value) = bad {
                let px = i / ch;
                return Err(EvalError::LabelOutOfRange { value, x: px % w, y: px / w, classes: self.classes });
            }
        }
        Ok(())
    }

    /// Adds the joint histogram of one image pair. Leaves `self` unchanged on
    /// error.
    pub fn add(&mut self, gt: &LabelImage, pred: &LabelImage) -> Result<(), EvalError> {
        self.check(gt, pred)?;
        for (&g, &p) in gt.data().iter().zip(pred.data()) {
            self.counts[usize::from(g) * self.classes + usize::from(p)] += 1;
        }
        Ok(())
    }

    /// `self + histogram(gt, pred)` as a new matrix.
    pub fn accumulate(&self, gt: &LabelImage, pred: &LabelImage) -> Result<Self, EvalError> {
        let mut out = self.clone();
        out.add(gt, pred)?;
        Ok(out)
    }

    pub fn merge(mut self, other: &Self) -> Self {
        assert_eq!(self.classes, other.classes, "merging matrices of different class counts");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self
    }

    /// Sum over image pairs, computed per image in parallel.
    pub fn from_pairs(classes: usize, pairs: &[(LabelImage, LabelImage)]) -> Result<Self, EvalError> {
        let zero = Self::new(classes)?;
        let parts: Vec<Result<Self, EvalError>> = pairs.par_iter().map(|(g, p)| zero.accumulate(g, p)).collect();
        parts.into_iter().try_fold(zero.clone(), |acc, m| Ok(acc.merge(&m?)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IoUReport {
    pub class_names: Vec<String>,
    /// `None` when the class is absent from both ground truth and prediction.
    pub iou: Vec<Option<f64>>,
    /// Mean over defined classes, background included.
    pub miou: f64,
    pub latency_ms: Option<f64>,
}

impl IoUReport {
    /// Report from already computed per-class IoUs.
    pub fn from_iou(
        class_names: Vec<String>,
        iou: Vec<Option<f64>>,
        latency_ms: Option<f64>,
    ) -> Result<Self, EvalError> {
        let defined: Vec<f64> = iou.iter().flatten().copied().collect();
        if defined.is_empty() {
            return Err(EvalError::EmptyMatrix);
        }
        let miou = defined.iter().sum::<f64>() / defined.len() as f64;
        Ok(Self { class_names, iou, miou, latency_ms })
    }

    pub fn undefined_classes(&self) -> Vec<&str> {
        self.class_names.iter().zip(&self.iou).filter(|(_, v)| v.is_none()).map(|(n, _)| n.as_str()).collect()
    }

    /// Aligned one-row table: a column per class, then mIoU and latency when
    /// present. Undefined classes print as `n/a`.
    pub fn to_table(&self, row_label: &str) -> String {
        let mut header = vec!["method".to_string()];
        header.extend(self.class_names.iter().cloned());
        header.push("mIoU".into());
        let mut row = vec![row_label.to_string()];
        row.extend(self.iou.iter().map(|v| v.map_or("n/a".into(), |x| format!("{x:.4}"))));
        row.push(format!("{:.4}", self.miou));
        if let Some(ms) = self.latency_ms {
            header.push("ms".into());
            row.push(format!("{ms:.0}"));
        }
        let widths: Vec<usize> = header.iter().zip(&row).map(|(h, r)| h.len().max(r.len())).collect();
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
                if i == 0 {
                    s += &format!("{c:<w$}");
                } else {
                    s += &format!("  {c:>w$}");
                }
            }
            s + "\n"
        };
        let mut out = line(&header) + &line(&row);
        let undefined = self.undefined_classes();
        if !undefined.is_empty() {
            out += &format!("undefined (excluded from mIoU): {}\n", undefined.join(", "));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let per_class: serde_json::Map<String, serde_json::Value> = self
            .class_names
            .iter()
            .cloned()
            .zip(self.iou.iter().map(|v| v.map_or(serde_json::Value::Null, Into::into)))
            .collect();
        let mut v = serde_json::json!({
            "classes": self.class_names,
            "iou": per_class,
            "miou": self.miou,
            "undefined": self.undefined_classes(),
        });
        if let Some(ms) = self.latency_ms {
            v["latency_ms"] = ms.into();
        }
        v
    }
}

/// `IoU_k = TP / (TP + FP + FN)`; classes with a zero denominator are
/// undefined and left out of the mean.
pub fn iou_report(cm: &ConfusionMatrix) -> Result<IoUReport, EvalError> {
    if cm.total() == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let k = cm.classes();
    let iou = (0..k)
        .map(|c| {
            let tp = cm.get(c, c);
            let fn_: u64 = (0..k).map(|p| cm.get(c, p)).sum::<u64>() - tp;
            let fp: u64 = (0..k).map(|g| cm.get(g, c)).sum::<u64>() - tp;
            let den = tp + fp + fn_;
            (den > 0).then(|| tp as f64 / den as f64)
        })
        .collect();
    IoUReport::from_iou(class_names(k), iou, None)
}
