//! Confusion counting and the change-detection metric suite: FM, PWC,
//! Recall, Precision, FPR, FNR and Sp.
//!
//! Conventions for degenerate denominators:
//!
//! * no positives in ground truth or prediction: Precision = Recall = FM = 1;
//! * positives in ground truth, none predicted: Precision = Recall = FM = 0;
//! * positives predicted, none in ground truth: Precision = 0, Recall = 1,
//!   FM = 0;
//! * no negatives in ground truth: FPR = 0, Sp = 1.
//!
//! FNR and Sp are computed as `1 - Recall` and `1 - FPR`. PWC is a
//! percentage.

use std::collections::BTreeMap;
use std::io::Write;
use std::ops::{Add, AddAssign};
use std::path::Path;

use image::GrayImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sequence_io::{label, Mask};
use crate::{fsutil, Scalar};

/// Column order of every report.
pub const METRIC_NAMES: [&str; 7] = ["FM", "PWC", "Recall", "Precision", "FPR", "FNR", "Sp"];

const PAR_MIN_PIXELS: usize = 1 << 16;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("probability {value} at pixel {pixel} is outside [0, 1]")]
    OutOfRange { pixel: usize, value: f64 },
    #[error("dimension mismatch: {a:?} vs {b:?}")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("no pixels were counted")]
    EmptyEvaluation,
    #[error("nothing to aggregate")]
    EmptyAggregate,
    #[error("probability map data does not match {width}x{height}")]
    BadShape { width: u32, height: u32 },
}

/// Row-major map of foreground probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbMap<S> {
    pub width: u32,
    pub height: u32,
    pub data: Vec<S>,
}

impl<S: Scalar> ProbMap<S> {
    pub fn new(width: u32, height: u32, data: Vec<S>) -> Result<Self, MetricsError> {
        if data.len() != width as usize * height as usize {
            return Err(MetricsError::BadShape { width, height });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Read an 8-bit gray raster as probabilities `v / 255`.
    pub fn from_gray(img: &GrayImage) -> Self {
        let (width, height) = img.dimensions();
        Self {
            width,
            height,
            data: img
                .iter()
                .map(|&v| S::lit(v as f64) / S::lit(255.0))
                .collect(),
        }
    }

    /// Quantize to 8 bits as `round(255 p)`.
    pub fn to_gray(&self) -> GrayImage {
        let data = self
            .data
            .iter()
            .map(|&p| {
                (p * S::lit(255.0))
                    .round()
                    .max(S::zero())
                    .min(S::lit(255.0))
                    .to_u8()
                    .unwrap_or(0)
            })
            .collect();
        GrayImage::from_raw(self.width, self.height, data).expect("sized")
    }
}

/// Threshold a probability map: strictly above `threshold` is foreground,
/// everything else (including a tie) is background.
pub fn binarize<S: Scalar>(map: &ProbMap<S>, threshold: S) -> Result<Mask, MetricsError> {
    let mut out = Vec::with_capacity(map.data.len());
    for (pixel, &p) in map.data.iter().enumerate() {
        if !(p >= S::zero() && p <= S::one()) {
            return Err(MetricsError::OutOfRange {
                pixel,
                value: p.to_f64().unwrap_or(f64::NAN),
            });
        }
        out.push(if p > threshold {
            label::FOREGROUND
        } else {
            label::BACKGROUND
        });
    }
    Ok(Mask::from_raw(map.width, map.height, out).expect("sized"))
}

pub fn binarize_default<S: Scalar>(map: &ProbMap<S>) -> Result<Mask, MetricsError> {
    binarize(map, S::lit(0.5))
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

#[inline]
fn tally(pred: &[u8], gt: &[u8], weight: Option<&[u8]>) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (i, (&p, &g)) in pred.iter().zip(gt).enumerate() {
        if !label::is_counted(g) || weight.is_some_and(|w| w[i] == 0) {
            continue;
        }
        match (p > 127, g == label::FOREGROUND) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

/// Count TP/FP/FN/TN. A prediction pixel is positive when its value is
/// above 127. Ground-truth ignore/unknown pixels and pixels whose `weight`
/// is 0 are excluded.
pub fn confusion(
    pred: &Mask,
    gt: &Mask,
    weight: Option<&GrayImage>,
) -> Result<ConfusionCounts, MetricsError> {
    if pred.dimensions() != gt.dimensions() {
        return Err(MetricsError::DimensionMismatch {
            a: pred.dimensions(),
            b: gt.dimensions(),
        });
    }
    if let Some(w) = weight {
        if w.dimensions() != gt.dimensions() {
            return Err(MetricsError::DimensionMismatch {
                a: w.dimensions(),
                b: gt.dimensions(),
            });
        }
    }
    let (p, g) = (pred.as_raw(), gt.as_raw());
    let w = weight.map(|w| w.as_raw().as_slice());
    if p.len() < PAR_MIN_PIXELS {
        return Ok(tally(p, g, w));
    }
    let row = pred.dimensions().0 as usize;
    Ok(p.par_chunks(row)
        .zip(g.par_chunks(row))
        .enumerate()
        .map(|(y, (pr, gr))| tally(pr, gr, w.map(|w| &w[y * row..(y + 1) * row])))
        .sum())
}

/// Confusion against a 0/1 target raster with an optional 0/1 weight mask,
/// as stored in exported samples.
pub fn confusion_binary(
    pred: &Mask,
    target: &GrayImage,
    weight: Option<&GrayImage>,
) -> Result<ConfusionCounts, MetricsError> {
    let gt = Mask(GrayImage::from_fn(
        target.width(),
        target.height(),
        |x, y| {
            image::Luma([if target.get_pixel(x, y)[0] != 0 {
                label::FOREGROUND
            } else {
                label::BACKGROUND
            }])
        },
    ));
    confusion(pred, &gt, weight)
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricReport<S> {
    #[serde(rename = "FM")]
    pub fm: S,
    /// Percent.
    #[serde(rename = "PWC")]
    pub pwc: S,
    #[serde(rename = "Recall")]
    pub recall: S,
    #[serde(rename = "Precision")]
    pub precision: S,
    #[serde(rename = "FPR")]
    pub fpr: S,
    #[serde(rename = "FNR")]
    pub fnr: S,
    #[serde(rename = "Sp")]
    pub sp: S,
}

impl<S: Scalar> MetricReport<S> {
    /// Values in [`METRIC_NAMES`] order.
    pub fn values(&self) -> [S; 7] {
        [
            self.fm,
            self.pwc,
            self.recall,
            self.precision,
            self.fpr,
            self.fnr,
            self.sp,
        ]
    }

    pub fn from_values(v: [S; 7]) -> Self {
        Self {
            fm: v[0],
            pwc: v[1],
            recall: v[2],
            precision: v[3],
            fpr: v[4],
            fnr: v[5],
            sp: v[6],
        }
    }
}

fn ratio<S: Scalar>(num: u64, den: u64) -> S {
    S::from_count(num) / S::from_count(den)
}

pub fn compute_metrics<S: Scalar>(c: &ConfusionCounts) -> Result<MetricReport<S>, MetricsError> {
    let total = c.total();
    if total == 0 {
        return Err(MetricsError::EmptyEvaluation);
    }
    let gt_pos = c.tp + c.fn_;
    let pred_pos = c.tp + c.fp;
    let (precision, recall) = match (gt_pos, pred_pos) {
        (0, 0) => (S::one(), S::one()),
        (_, 0) => (S::zero(), S::zero()),
        (0, _) => (S::zero(), S::one()),
        _ => (ratio(c.tp, pred_pos), ratio(c.tp, gt_pos)),
    };
    let fm = if precision + recall > S::zero() {
        S::lit(2.0) * precision * recall / (precision + recall)
    } else {
        S::zero()
    };
    let gt_neg = c.tn + c.fp;
    let fpr = if gt_neg == 0 {
        S::zero()
    } else {
        ratio(c.fp, gt_neg)
    };
    let pwc = S::lit(100.0) * ratio(c.fp + c.fn_, total);
    Ok(MetricReport {
        fm,
        pwc,
        recall,
        precision,
        fpr,
        fnr: S::one() - recall,
        sp: S::one() - fpr,
    })
}

/// Unweighted mean of each metric.
pub fn aggregate<S: Scalar>(reports: &[MetricReport<S>]) -> Result<MetricReport<S>, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::EmptyAggregate);
    }
    let n = S::from_count(reports.len() as u64);
    let mut sums = [S::zero(); 7];
    for r in reports {
        for (s, v) in sums.iter_mut().zip(r.values()) {
            *s = *s + v;
        }
    }
    Ok(MetricReport::from_values(sums.map(|s| s / n)))
}

/// How per-frame confusion counts become a scene report.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, Default, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum FrameAveraging {
    /// Sum counts over all frames, then compute metrics once.
    #[default]
    SummedCounts,
    /// Compute metrics per frame, then take the mean. Frames with no counted
    /// pixels are skipped.
    FrameMean,
}

/// How scene reports become the overall average.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, Default, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SceneAveraging {
    #[default]
    SceneMean,
    /// Mean within each category first, then mean over categories.
    CategoryMean,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct SceneReport<S> {
    pub scene_id: String,
    pub category: String,
    pub frames: usize,
    pub counts: ConfusionCounts,
    pub metrics: MetricReport<S>,
}

pub fn scene_report<S: Scalar>(
    scene_id: &str,
    category: &str,
    per_frame: &[ConfusionCounts],
    mode: FrameAveraging,
) -> Result<SceneReport<S>, MetricsError> {
    let counts: ConfusionCounts = per_frame.iter().copied().sum();
    let metrics = match mode {
        FrameAveraging::SummedCounts => compute_metrics(&counts)?,
        FrameAveraging::FrameMean => {
            let reports = per_frame
                .iter()
                .filter(|c| c.total() > 0)
                .map(compute_metrics)
                .collect::<Result<Vec<_>, _>>()?;
            aggregate(&reports).map_err(|_| MetricsError::EmptyEvaluation)?
        }
    };
    Ok(SceneReport {
        scene_id: scene_id.into(),
        category: category.into(),
        frames: per_frame.len(),
        counts,
        metrics,
    })
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct CategoryReport<S> {
    pub category: String,
    pub scenes: usize,
    pub metrics: MetricReport<S>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct EvalReport<S> {
    pub scenes: Vec<SceneReport<S>>,
    pub categories: Vec<CategoryReport<S>>,
    pub averaging: SceneAveraging,
    pub average: MetricReport<S>,
}

pub fn category_means<S: Scalar>(
    scenes: &[SceneReport<S>],
) -> Result<Vec<CategoryReport<S>>, MetricsError> {
    let mut groups: BTreeMap<&str, Vec<MetricReport<S>>> = BTreeMap::new();
    for s in scenes {
        groups.entry(&s.category).or_default().push(s.metrics);
    }
    groups
        .into_iter()
        .map(|(category, reports)| {
            Ok(CategoryReport {
                category: category.into(),
                scenes: reports.len(),
                metrics: aggregate(&reports)?,
            })
        })
        .collect()
}

impl<S: Scalar> EvalReport<S> {
    pub fn new(
        scenes: Vec<SceneReport<S>>,
        averaging: SceneAveraging,
    ) -> Result<Self, MetricsError> {
        let categories = category_means(&scenes)?;
        let average = match averaging {
            SceneAveraging::SceneMean => {
                aggregate(&scenes.iter().map(|s| s.metrics).collect::<Vec<_>>())?
            }
            SceneAveraging::CategoryMean => {
                aggregate(&categories.iter().map(|c| c.metrics).collect::<Vec<_>>())?
            }
        };
        Ok(Self {
            scenes,
            categories,
            averaging,
            average,
        })
    }

    /// CSV with one row per scene, one per category and a final average.
    pub fn to_csv(&self) -> String {
        let mut out = Vec::new();
        writeln!(out, "row,category,{}", METRIC_NAMES.join(",")).unwrap();
        let fmt = |m: &MetricReport<S>| {
            m.values()
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        for s in &self.scenes {
            writeln!(out, "{},{},{}", s.scene_id, s.category, fmt(&s.metrics)).unwrap();
        }
        for c in &self.categories {
            writeln!(
                out,
                "category:{},{},{}",
                c.category,
                c.category,
                fmt(&c.metrics)
            )
            .unwrap();
        }
        writeln!(out, "Average,,{}", fmt(&self.average)).unwrap();
        String::from_utf8(out).expect("ascii")
    }
}

impl<S: Scalar + Serialize> EvalReport<S> {
    /// Write `<stem>.json` and `<stem>.csv` next to each other.
    pub fn write(&self, json_path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_vec_pretty(self).map_err(std::io::Error::other)?;
        fsutil::write_atomic(json_path, &json)?;
        fsutil::write_atomic(&json_path.with_extension("csv"), self.to_csv().as_bytes())
    }
}
