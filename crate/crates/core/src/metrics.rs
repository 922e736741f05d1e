// SPDX-License-Identifier: Apache-2.0

//! Segmentation metrics on mask pairs and boundary point sets, with
//! dataset-level aggregation and CSV output.

use std::fmt::Write as _;

use crate::contour::PiecewiseContour;
use crate::error::{invalid, Error, Result};
use crate::mask::{boundary_pixels, BinaryMask};
use crate::point::Point2;

/// Samples per segment used when a contour is reduced to boundary points.
pub const CONTOUR_SAMPLES: usize = 128;

/// Pixel confusion counts with foreground as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

pub fn confusion(pred: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionCounts> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(invalid(format!(
            "mask size mismatch: {}x{} vs {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
        match (p, g) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Intersection over union; 1 when both masks are empty.
pub fn iou(c: &ConfusionCounts) -> f64 {
    let union = c.tp + c.fp + c.fn_;
    if union == 0 {
        1.0
    } else {
        c.tp as f64 / union as f64
    }
}

/// Matthews correlation coefficient; 0 when any marginal is empty.
pub fn mcc(c: &ConfusionCounts) -> f64 {
    let (tp, tn, fp, fn_) = (c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if den == 0.0 {
        return 0.0;
    }
    ((tp * tn - fp * fn_) / den.sqrt()).clamp(-1.0, 1.0)
}

/// `(fp / (fp + tn), fn / (fn + tp))`, each 0 on an empty denominator.
pub fn fp_fn_rates(c: &ConfusionCounts) -> (f64, f64) {
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    (ratio(c.fp, c.fp + c.tn), ratio(c.fn_, c.fn_ + c.tp))
}

/// Symmetric Euclidean Hausdorff distance.
///
/// Each directed pass abandons a point as soon as it finds a neighbour
/// closer than the running maximum; the result equals the exhaustive
/// computation bit for bit.
pub fn hausdorff(a: &[Point2], b: &[Point2]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::UndefinedMetric("Hausdorff distance of an empty point set".into()));
    }
    Ok(directed_sq(a, b).max(directed_sq(b, a)).sqrt())
}

fn directed_sq(from: &[Point2], to: &[Point2]) -> f64 {
    let mut cmax = 0.0f64;
    for &p in from {
        let mut cmin = f64::INFINITY;
        for &q in to {
            let d = p.dist_sq(q);
            if d < cmin {
                cmin = d;
                if cmin <= cmax {
                    break;
                }
            }
        }
        if cmin > cmax {
            cmax = cmin;
        }
    }
    cmax
}

/// Per-image metrics. `hausdorff` is `None` when either side has no
/// foreground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub iou: f64,
    pub hausdorff: Option<f64>,
    pub mcc: f64,
    pub fp_rate: f64,
    pub fn_rate: f64,
}

fn report(counts: &ConfusionCounts, pred_boundary: &[Point2], gt_boundary: &[Point2]) -> MetricsReport {
    let (fp_rate, fn_rate) = fp_fn_rates(counts);
    MetricsReport {
        iou: iou(counts),
        hausdorff: hausdorff(pred_boundary, gt_boundary).ok(),
        mcc: mcc(counts),
        fp_rate,
        fn_rate,
    }
}

/// Metrics between two masks; Hausdorff runs on their boundary pixels.
pub fn evaluate_masks(pred: &BinaryMask, gt: &BinaryMask) -> Result<MetricsReport> {
    let counts = confusion(pred, gt)?;
    Ok(report(&counts, &boundary_pixels(pred), &boundary_pixels(gt)))
}

/// Metrics between a contour and a mask. The contour is rasterized for the
/// pixel metrics and densely sampled for Hausdorff.
pub fn evaluate_contour(pred: &PiecewiseContour, gt: &BinaryMask) -> Result<MetricsReport> {
    evaluate_contour_with(pred, gt, CONTOUR_SAMPLES)
}

pub fn evaluate_contour_with(
    pred: &PiecewiseContour,
    gt: &BinaryMask,
    samples_per_segment: usize,
) -> Result<MetricsReport> {
    let raster = pred.rasterize(samples_per_segment)?;
    let counts = confusion(&raster, gt)?;
    Ok(report(&counts, &pred.decode(samples_per_segment)?, &boundary_pixels(gt)))
}

/// Dataset aggregate: means of every metric and the IoU spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSummary {
    pub count: usize,
    pub miou: f64,
    /// Population standard deviation of per-image IoU.
    pub siou: f64,
    /// Mean over images where the distance is defined.
    pub mean_hausdorff: Option<f64>,
    pub mean_mcc: f64,
    pub mean_fp_rate: f64,
    pub mean_fn_rate: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

fn population_std(values: &[f64]) -> f64 {
    let m = mean(values.iter().copied()).unwrap_or(0.0);
    mean(values.iter().map(|v| (v - m) * (v - m))).unwrap_or(0.0).sqrt()
}

pub fn summarize(per_image: &[MetricsReport]) -> Result<DatasetSummary> {
    if per_image.is_empty() {
        return Err(invalid("cannot summarize an empty set of reports"));
    }
    let ious: Vec<f64> = per_image.iter().map(|r| r.iou).collect();
    Ok(DatasetSummary {
        count: per_image.len(),
        miou: mean(ious.iter().copied()).expect("non-empty"),
        siou: population_std(&ious),
        mean_hausdorff: mean(per_image.iter().filter_map(|r| r.hausdorff)),
        mean_mcc: mean(per_image.iter().map(|r| r.mcc)).expect("non-empty"),
        mean_fp_rate: mean(per_image.iter().map(|r| r.fp_rate)).expect("non-empty"),
        mean_fn_rate: mean(per_image.iter().map(|r| r.fn_rate)).expect("non-empty"),
    })
}

pub const METRICS_CSV_HEADER: &str = "image_id,iou,hausdorff,mcc,fp,fn";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with one row per image, then a `summary` row of means and a
/// `summary_std` row of population standard deviations.
pub fn metrics_csv(rows: &[(String, MetricsReport)]) -> Result<String> {
    let reports: Vec<MetricsReport> = rows.iter().map(|(_, r)| *r).collect();
    let summary = summarize(&reports)?;
    let mut out = String::new();
    writeln!(out, "{METRICS_CSV_HEADER}").unwrap();
    for (id, r) in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            id,
            r.iou,
            opt(r.hausdorff),
            r.mcc,
            r.fp_rate,
            r.fn_rate
        )
        .unwrap();
    }
    writeln!(
        out,
        "summary,{},{},{},{},{}",
        summary.miou,
        opt(summary.mean_hausdorff),
        summary.mean_mcc,
        summary.mean_fp_rate,
        summary.mean_fn_rate
    )
    .unwrap();
    let column = |f: fn(&MetricsReport) -> f64| population_std(&reports.iter().map(f).collect::<Vec<_>>());
    let hd: Vec<f64> = reports.iter().filter_map(|r| r.hausdorff).collect();
    writeln!(
        out,
        "summary_std,{},{},{},{},{}",
        summary.siou,
        if hd.is_empty() { String::new() } else { population_std(&hd).to_string() },
        column(|r| r.mcc),
        column(|r| r.fp_rate),
        column(|r| r.fn_rate)
    )
    .unwrap();
    Ok(out)
}
