// SPDX-License-Identifier: Apache-2.0

//! Synthetic shape corpora and the representation studies run on them:
//! encode/decode fidelity, the degree sweep, and noise sensitivity against
//! an equal-size polygon.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::contour::PiecewiseContour;
use crate::decoder::gradient_check;
use crate::error::{invalid, Error, Result};
use crate::fit::{encode_arcs, extract_arcs, FitReport};
use crate::mask::{
    count_components, rasterize_polygon, rasterize_polygon_inclusive, BinaryMask, BoundaryTrace,
    Connectivity,
};
use crate::metrics::{
    confusion, evaluate_contour, iou, metrics_csv, summarize, DatasetSummary, MetricsReport,
    CONTOUR_SAMPLES,
};
use crate::point::Point2;
use crate::seed::stream;

const MAX_ATTEMPTS: u64 = 100;
const OUTLINE_VERTICES: usize = 360;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    Blob,
    Ellipse,
    Dumbbell,
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShapeKind::Blob => "blob",
            ShapeKind::Ellipse => "ellipse",
            ShapeKind::Dumbbell => "dumbbell",
        })
    }
}

impl FromStr for ShapeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blob" => Ok(ShapeKind::Blob),
            "ellipse" => Ok(ShapeKind::Ellipse),
            "dumbbell" => Ok(ShapeKind::Dumbbell),
            other => Err(invalid(format!("unknown shape kind {other:?}"))),
        }
    }
}

/// Parameters of one synthetic object. `scale` is the object's size as a
/// fraction of the smaller frame side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeParams {
    pub kind: ShapeKind,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub scale: f64,
}

/// Rasterizes one synthetic object. Draws that do not give exactly one
/// 8-connected component are retried with a derived seed.
pub fn generate_shape(params: &ShapeParams) -> Result<BinaryMask> {
    if !(params.scale > 0.0 && params.scale <= 1.0) {
        return Err(invalid(format!("scale {} outside (0, 1]", params.scale)));
    }
    if params.width == 0 || params.height == 0 {
        return Err(invalid("empty frame"));
    }
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = stream(params.seed, "shape-attempt", attempt);
        let mask = match params.kind {
            ShapeKind::Blob => blob(params, &mut rng)?,
            ShapeKind::Ellipse => ellipse(params, &mut rng)?,
            ShapeKind::Dumbbell => dumbbell(params, &mut rng)?,
        };
        if count_components(&mask, Connectivity::Eight) == 1 {
            return Ok(mask);
        }
    }
    Err(Error::Generation(format!(
        "no single-component {} after {MAX_ATTEMPTS} attempts (seed {})",
        params.kind, params.seed
    )))
}

fn half_side(params: &ShapeParams) -> f64 {
    params.width.min(params.height) as f64 / 2.0
}

/// Center jittered so that a shape of the given extent stays in frame.
fn jittered_center(params: &ShapeParams, extent: f64, rng: &mut impl Rng) -> Point2 {
    let slack = |side: usize| ((side as f64 / 2.0 - extent - 1.0) * 0.5).max(0.0);
    let (sx, sy) = (slack(params.width), slack(params.height));
    let jitter = |s: f64, rng: &mut dyn rand::RngCore| if s > 0.0 { rng.gen_range(-s..=s) } else { 0.0 };
    Point2::new(
        params.width as f64 / 2.0 + jitter(sx, rng),
        params.height as f64 / 2.0 + jitter(sy, rng),
    )
}

// r(θ) = r0 (1 + Σ_{k=2..6} a_k cos(kθ + φ_k)), |a_k| ≤ 0.08, so the radius
// stays within [0.6, 1.4]·r0 and the outline is star-shaped.
fn blob(params: &ShapeParams, rng: &mut impl Rng) -> Result<BinaryMask> {
    let r0 = params.scale * half_side(params) / 1.45;
    let harmonics: Vec<(f64, f64, f64)> = (2..=6)
        .map(|k| {
            (
                k as f64,
                rng.gen_range(-0.08..=0.08),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let center = jittered_center(params, 1.4 * r0, rng);
    let outline: Vec<Point2> = (0..OUTLINE_VERTICES)
        .map(|i| {
            let th = std::f64::consts::TAU * i as f64 / OUTLINE_VERTICES as f64;
            let r = r0 * (1.0 + harmonics.iter().map(|&(k, a, phi)| a * (k * th + phi).cos()).sum::<f64>());
            center + Point2::new(r * th.cos(), r * th.sin())
        })
        .collect();
    rasterize_polygon(&outline, params.width, params.height)
}

fn ellipse(params: &ShapeParams, rng: &mut impl Rng) -> Result<BinaryMask> {
    let a = params.scale * half_side(params);
    let b = a * rng.gen_range(0.5..=1.0);
    let rot: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let center = jittered_center(params, a, rng);
    let outline: Vec<Point2> = (0..OUTLINE_VERTICES)
        .map(|i| {
            let th = std::f64::consts::TAU * i as f64 / OUTLINE_VERTICES as f64;
            let (u, v) = (a * th.cos(), b * th.sin());
            center + Point2::new(u * rot.cos() - v * rot.sin(), u * rot.sin() + v * rot.cos())
        })
        .collect();
    rasterize_polygon(&outline, params.width, params.height)
}

// Two overlapping discs joined by a narrowing neck.
fn dumbbell(params: &ShapeParams, rng: &mut impl Rng) -> Result<BinaryMask> {
    let base = params.scale * half_side(params) / 2.0;
    let r1 = base * rng.gen_range(0.7..=1.0);
    let r2 = base * rng.gen_range(0.7..=1.0);
    let d = (r1 + r2) * rng.gen_range(0.7..=0.95);
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let extent = (d + r1 + r2) / 2.0;
    let center = jittered_center(params, extent, rng);
    let dir = Point2::new(angle.cos(), angle.sin());
    // place the pair so their combined extent is centered
    let c1 = center - dir * (extent - r1);
    let c2 = c1 + dir * d;
    BinaryMask::from_fn(params.width, params.height, |r, c| {
        let p = Point2::pixel_center(r, c);
        p.dist_sq(c1) <= r1 * r1 || p.dist_sq(c2) <= r2 * r2
    })
}

/// A named corpus entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub id: String,
    pub params: ShapeParams,
}

/// `count` shapes of one kind with scales drawn uniformly from
/// `scale_range`; item `i` depends only on `(seed, kind, i)`.
pub fn shape_corpus(
    kind: ShapeKind,
    count: usize,
    size: usize,
    scale_range: (f64, f64),
    seed: u64,
) -> Vec<CorpusItem> {
    let name = kind.to_string();
    (0..count)
        .map(|i| {
            let mut rng = stream(seed, &name, i as u64);
            let scale = if scale_range.0 < scale_range.1 {
                rng.gen_range(scale_range.0..=scale_range.1)
            } else {
                scale_range.0
            };
            CorpusItem {
                id: format!("{name}_{i:04}"),
                params: ShapeParams {
                    kind,
                    width: size,
                    height: size,
                    seed: rng.gen(),
                    scale,
                },
            }
        })
        .collect()
}

/// Scale range of the default corpus.
pub const DEFAULT_SCALES: (f64, f64) = (0.6, 0.9);

/// 200 blobs, 50 ellipses and 50 dumbbells in 256x256 frames.
pub fn default_corpus(seed: u64) -> Vec<CorpusItem> {
    let mut items = shape_corpus(ShapeKind::Blob, 200, 256, DEFAULT_SCALES, seed);
    items.extend(shape_corpus(ShapeKind::Ellipse, 50, 256, DEFAULT_SCALES, seed));
    items.extend(shape_corpus(ShapeKind::Dumbbell, 50, 256, DEFAULT_SCALES, seed));
    items
}

/// Renders every item in parallel, preserving order.
pub fn render_corpus(items: &[CorpusItem]) -> Result<Vec<BinaryMask>> {
    items.par_iter().map(|item| generate_shape(&item.params)).collect()
}

pub fn mean_area(masks: &[BinaryMask]) -> f64 {
    if masks.is_empty() {
        return 0.0;
    }
    masks.iter().map(|m| m.count() as f64).sum::<f64>() / masks.len() as f64
}

/// Outcome of encoding and decoding one mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityItem {
    pub metrics: MetricsReport,
    pub fit: FitReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityResult {
    /// Per input, in order; `Err` marks a skipped mask.
    pub items: Vec<std::result::Result<FidelityItem, Error>>,
    pub summary: DatasetSummary,
    pub skipped: usize,
    /// Mean of the per-arc RMS residuals over all encoded masks.
    pub mean_arc_residual: f64,
}

impl FidelityResult {
    /// Metrics CSV for the encoded items, labelled by `ids`.
    pub fn to_csv(&self, ids: &[String]) -> Result<String> {
        let rows: Vec<(String, MetricsReport)> = ids
            .iter()
            .zip(&self.items)
            .filter_map(|(id, item)| item.as_ref().ok().map(|it| (id.clone(), it.metrics)))
            .collect();
        metrics_csv(&rows)
    }
}

/// Encode → decode → rasterize → compare, per mask.
pub fn fidelity_study(masks: &[BinaryMask], degree: usize, smooth_radius: usize) -> Result<FidelityResult> {
    if masks.is_empty() {
        return Err(invalid("fidelity study needs at least one mask"));
    }
    let items: Vec<_> = masks
        .par_iter()
        .map(|m| {
            let (_, _, arcs) = extract_arcs(m, smooth_radius)?;
            let (contour, fit) = encode_arcs(&arcs, degree, m.width(), m.height())?;
            let metrics = evaluate_contour(&contour, m)?;
            Ok(FidelityItem { metrics, fit })
        })
        .collect();
    let ok: Vec<&FidelityItem> = items.iter().filter_map(|r| r.as_ref().ok()).collect();
    if ok.is_empty() {
        return Err(Error::DegenerateObject("no mask in the corpus could be encoded".into()));
    }
    let reports: Vec<MetricsReport> = ok.iter().map(|it| it.metrics).collect();
    let residual_sum: f64 = ok.iter().flat_map(|it| it.fit.residuals).sum();
    Ok(FidelityResult {
        summary: summarize(&reports)?,
        skipped: items.len() - ok.len(),
        mean_arc_residual: residual_sum / (4 * ok.len()) as f64,
        items,
    })
}

/// One row of a degree sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeRow {
    pub degree: usize,
    pub miou: f64,
    pub siou: f64,
    pub mean_arc_residual: f64,
    pub skipped: usize,
}

pub fn degree_sweep(masks: &[BinaryMask], degrees: &[usize], smooth_radius: usize) -> Result<Vec<DegreeRow>> {
    degrees
        .iter()
        .map(|&degree| {
            let r = fidelity_study(masks, degree, smooth_radius)?;
            Ok(DegreeRow {
                degree,
                miou: r.summary.miou,
                siou: r.summary.siou,
                mean_arc_residual: r.mean_arc_residual,
                skipped: r.skipped,
            })
        })
        .collect()
}

pub fn degree_sweep_csv(rows: &[DegreeRow]) -> String {
    let mut out = String::from("degree,miou,siou,mean_arc_residual,skipped\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.degree, r.miou, r.siou, r.mean_arc_residual, r.skipped).unwrap();
    }
    out
}

fn gaussian(delta: f64) -> Result<Normal<f64>> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(invalid(format!("noise level {delta} must be finite and non-negative")));
    }
    Normal::new(0.0, delta).map_err(|e| invalid(e.to_string()))
}

/// Adds N(0, delta²) noise (delta is the standard deviation in pixels) to
/// every coordinate of the four junctions and all interior control points.
/// Junctions are drawn once and stay shared between adjacent segments.
pub fn perturb_contour(contour: &PiecewiseContour, delta: f64, seed: u64) -> Result<PiecewiseContour> {
    let noise = gaussian(delta)?;
    if delta == 0.0 {
        return Ok(contour.clone());
    }
    let mut rng = stream(seed, "contour-noise", 0);
    contour.map_points(|p| Point2::new(p.x + noise.sample(&mut rng), p.y + noise.sample(&mut rng)))
}

pub fn perturb_points(points: &[Point2], delta: f64, seed: u64) -> Result<Vec<Point2>> {
    let noise = gaussian(delta)?;
    if delta == 0.0 {
        return Ok(points.to_vec());
    }
    let mut rng = stream(seed, "polygon-noise", 0);
    Ok(points
        .iter()
        .map(|p| Point2::new(p.x + noise.sample(&mut rng), p.y + noise.sample(&mut rng)))
        .collect())
}

/// `k` trace points at indices `round(j·m/k)`.
pub fn polygon_baseline(trace: &BoundaryTrace, k: usize) -> Result<Vec<Point2>> {
    let m = trace.len();
    if k < 3 {
        return Err(invalid(format!("polygon needs at least 3 points, got {k}")));
    }
    if m < k {
        return Err(Error::DegenerateObject(format!(
            "boundary has {m} points, fewer than the {k} polygon vertices"
        )));
    }
    Ok((0..k).map(|j| trace.points[(2 * j * m + k) / (2 * k)]).collect())
}

/// Vertex count of the polygon baseline (same number of points as the
/// degree-5 contour).
pub const POLYGON_POINTS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityCurve {
    pub deltas: Vec<f64>,
    pub miou_bezier: Vec<f64>,
    pub miou_polygon: Vec<f64>,
    pub trials: usize,
    /// Masks that could not be encoded.
    pub skipped: usize,
}

impl SensitivityCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,representation,miou,trials\n");
        for (i, d) in self.deltas.iter().enumerate() {
            writeln!(out, "{d},bezier,{},{}", self.miou_bezier[i], self.trials).unwrap();
            writeln!(out, "{d},polygon,{},{}", self.miou_polygon[i], self.trials).unwrap();
        }
        out
    }
}

fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    Ok(iou(&confusion(a, b)?))
}

/// Perturbs both representations of every mask with the same noise level
/// and reports the mean IoU of the rasterized results against the clean
/// mask, per noise level.
pub fn sensitivity_sweep(masks: &[BinaryMask], deltas: &[f64], trials: usize, seed: u64) -> Result<SensitivityCurve> {
    if masks.is_empty() {
        return Err(invalid("sensitivity sweep needs at least one mask"));
    }
    if trials == 0 {
        return Err(invalid("sensitivity sweep needs at least one trial"));
    }
    for &d in deltas {
        gaussian(d)?;
    }
    // per mask: Some(per-delta (bezier sum, polygon sum)) or None if skipped
    let per_mask: Vec<Option<Vec<(f64, f64)>>> = masks
        .par_iter()
        .enumerate()
        .map(|(i, m)| -> Result<Option<Vec<(f64, f64)>>> {
            let Ok((trace, _, arcs)) = extract_arcs(m, 0) else {
                return Ok(None);
            };
            let Ok((contour, _)) = encode_arcs(&arcs, 5, m.width(), m.height()) else {
                return Ok(None);
            };
            let Ok(polygon) = polygon_baseline(&trace, POLYGON_POINTS) else {
                return Ok(None);
            };
            let mask_seed = crate::seed::derive_seed(seed, "mask", i as u64);
            let mut sums = Vec::with_capacity(deltas.len());
            for (di, &delta) in deltas.iter().enumerate() {
                let (mut sb, mut sp) = (0.0, 0.0);
                for t in 0..trials {
                    let trial = crate::seed::derive_seed(mask_seed, "trial", (di * trials + t) as u64);
                    let noisy = perturb_contour(&contour, delta, trial)?;
                    sb += mask_iou(&noisy.rasterize(CONTOUR_SAMPLES)?, m)?;
                    let noisy_poly = perturb_points(&polygon, delta, trial)?;
                    sp += mask_iou(&rasterize_polygon_inclusive(&noisy_poly, m.width(), m.height())?, m)?;
                }
                sums.push((sb, sp));
            }
            Ok(Some(sums))
        })
        .collect::<Result<_>>()?;
    let used: Vec<&Vec<(f64, f64)>> = per_mask.iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::DegenerateObject("no mask in the corpus could be encoded".into()));
    }
    let denom = (used.len() * trials) as f64;
    let mut miou_bezier = Vec::with_capacity(deltas.len());
    let mut miou_polygon = Vec::with_capacity(deltas.len());
    for di in 0..deltas.len() {
        miou_bezier.push(used.iter().map(|s| s[di].0).sum::<f64>() / denom);
        miou_polygon.push(used.iter().map(|s| s[di].1).sum::<f64>() / denom);
    }
    Ok(SensitivityCurve {
        deltas: deltas.to_vec(),
        miou_bezier,
        miou_polygon,
        trials,
        skipped: masks.len() - used.len(),
    })
}

/// Finite-difference step, in pixels, used by [`gradient_study`].
pub const GRADIENT_STEP: f64 = 1e-5;

/// Contour with every layout coordinate uniform in its frame axis.
pub fn random_contour(width: usize, height: usize, seed: u64) -> Result<PiecewiseContour> {
    if width == 0 || height == 0 {
        return Err(invalid(format!("frame {width}x{height} is empty")));
    }
    let mut rng = stream(seed, "random-contour", 0);
    let values: Vec<f64> = (0..crate::contour::LAYOUT_LEN)
        .map(|i| {
            let extent = if i % 2 == 0 { width } else { height };
            rng.gen_range(0.0..extent as f64)
        })
        .collect();
    PiecewiseContour::unflatten(&values, width, height)
}

/// Gradient check on `pairs` random (prediction, target) contours in a
/// `size`x`size` frame. Returns the relative error of each pair, in order.
pub fn gradient_study(pairs: usize, size: usize, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    (0..pairs as u64)
        .into_par_iter()
        .map(|i| {
            let pred = random_contour(size, size, crate::seed::derive_seed(seed, "grad-pred", i))?;
            let gt = random_contour(size, size, crate::seed::derive_seed(seed, "grad-gt", i))?;
            let samples_seed = crate::seed::derive_seed(seed, "grad-samples", i);
            gradient_check(&pred, &gt, n_samples, samples_seed, GRADIENT_STEP)
        })
        .collect()
}
