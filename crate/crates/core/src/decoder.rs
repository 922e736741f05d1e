// SPDX-License-Identifier: Apache-2.0

//! Differentiable point decoder and the regression losses built on it.
//!
//! Decoding maps the 40-value contour vector to `N` boundary points at
//! random parameters. The map is linear in the control points, so its
//! Jacobian is the matrix of Bernstein weights and gradients are exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bezier::{bernstein_into, MAX_DEGREE};
use crate::contour::{PiecewiseContour, LAYOUT_DEGREE, LAYOUT_LEN};
use crate::error::{invalid, Result};
use crate::point::Point2;

/// Number of decoded points used by the matching loss.
pub const DEFAULT_LOSS_SAMPLES: usize = 72;

/// Random decoding parameters shared between prediction and target.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSamples {
    pub ts: Vec<f64>,
    /// Segment (0..4) each parameter is applied to.
    pub segment_ids: Vec<usize>,
}

impl ParamSamples {
    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.ts.len() != self.segment_ids.len() {
            return Err(invalid("parameter and segment id counts differ"));
        }
        if let Some(t) = self.ts.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(invalid(format!("parameter {t} outside [0, 1]")));
        }
        if let Some(s) = self.segment_ids.iter().find(|&&s| s >= 4) {
            return Err(invalid(format!("segment id {s} out of range")));
        }
        Ok(())
    }
}

/// Draws `n` parameters from U[0, 1), each paired with a uniformly drawn
/// segment id. Deterministic in `seed`.
pub fn sample_ts(n: usize, seed: u64) -> ParamSamples {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ts = Vec::with_capacity(n);
    let mut segment_ids = Vec::with_capacity(n);
    for _ in 0..n {
        ts.push(rng.gen::<f64>());
        segment_ids.push(rng.gen_range(0..4));
    }
    ParamSamples { ts, segment_ids }
}

/// Decoded boundary points with the parameters that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedPoints {
    pub points: Vec<Point2>,
    pub ts: Vec<f64>,
    pub segment_ids: Vec<usize>,
}

fn check_layout(contour: &PiecewiseContour) -> Result<()> {
    if contour.degree() != LAYOUT_DEGREE {
        return Err(invalid(format!(
            "decoder needs degree {LAYOUT_DEGREE} contours, got degree {}",
            contour.degree()
        )));
    }
    Ok(())
}

/// Evaluates segment `segment_ids[j]` at `ts[j]` for every sample.
pub fn forward(contour: &PiecewiseContour, samples: &ParamSamples) -> Result<DecodedPoints> {
    check_layout(contour)?;
    samples.validate()?;
    let mut basis = [0.0; MAX_DEGREE + 1];
    let points = samples
        .ts
        .iter()
        .zip(&samples.segment_ids)
        .map(|(&t, &k)| contour.segments()[k].eval_unchecked(t, &mut basis))
        .collect();
    Ok(DecodedPoints {
        points,
        ts: samples.ts.clone(),
        segment_ids: samples.segment_ids.clone(),
    })
}

/// Flat-layout point slot (0..20) of control point `i` of segment `k`.
fn layout_slot(k: usize, i: usize) -> usize {
    if i == 0 {
        k
    } else if i == LAYOUT_DEGREE {
        (k + 1) % 4
    } else {
        4 + k * (LAYOUT_DEGREE - 1) + (i - 1)
    }
}

/// Jacobian of the decoded coordinates with respect to the flat contour.
///
/// Row `j` holds the six `(point slot, weight)` pairs of output point `j`;
/// the same weight maps x to x and y to y, with no cross terms.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderJacobian {
    pub rows: Vec<[(usize, f64); LAYOUT_DEGREE + 1]>,
}

impl DecoderJacobian {
    /// Dense `2N x 40` matrix; output row `2j` is `x_j`, `2j + 1` is `y_j`.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; LAYOUT_LEN]; 2 * self.rows.len()];
        for (j, row) in self.rows.iter().enumerate() {
            for &(slot, w) in row {
                out[2 * j][2 * slot] += w;
                out[2 * j + 1][2 * slot + 1] += w;
            }
        }
        out
    }

    /// `J^T g` for an upstream gradient over the `2N` decoded coordinates.
    pub fn transpose_apply(&self, upstream: &[f64]) -> Vec<f64> {
        assert_eq!(upstream.len(), 2 * self.rows.len());
        let mut g = vec![0.0; LAYOUT_LEN];
        for (j, row) in self.rows.iter().enumerate() {
            for &(slot, w) in row {
                g[2 * slot] += w * upstream[2 * j];
                g[2 * slot + 1] += w * upstream[2 * j + 1];
            }
        }
        g
    }
}

/// Exact Jacobian of [`forward`]. It does not depend on the control points,
/// only on the layout of `contour` and the samples.
pub fn jacobian(contour: &PiecewiseContour, samples: &ParamSamples) -> Result<DecoderJacobian> {
    check_layout(contour)?;
    samples.validate()?;
    let mut basis = [0.0; MAX_DEGREE + 1];
    let rows = samples
        .ts
        .iter()
        .zip(&samples.segment_ids)
        .map(|(&t, &k)| {
            bernstein_into(LAYOUT_DEGREE, t, &mut basis);
            std::array::from_fn(|i| (layout_slot(k, i), basis[i]))
        })
        .collect();
    Ok(DecoderJacobian { rows })
}

/// Mean smooth-L1 loss and its gradient with respect to `pred`.
pub fn smooth_l1(pred: &[f64], target: &[f64], beta: f64) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(invalid(format!(
            "smooth L1 length mismatch: {} vs {}",
            pred.len(),
            target.len()
        )));
    }
    if beta.is_nan() || beta <= 0.0 {
        return Err(invalid(format!("smooth L1 beta must be positive, got {beta}")));
    }
    if pred.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &q) in pred.iter().zip(target) {
        let d = p - q;
        if d.abs() < beta {
            loss += 0.5 * d * d / beta;
            grad.push(d / beta / n);
        } else {
            loss += d.abs() - 0.5 * beta;
            grad.push(d.signum() / n);
        }
    }
    Ok((loss / n, grad))
}

/// Loss weights and smooth-L1 threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda_ce: f64,
    pub lambda_matching: f64,
    pub beta: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_ce: 1.0,
            lambda_matching: 1.0,
            beta: 1.0,
        }
    }
}

/// Loss terms and the gradient of the total with respect to the flat
/// prediction vector (pixel units).
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub l_ce: f64,
    pub l_matching: f64,
    pub gradient: Vec<f64>,
}

/// Control-point regression loss plus decoded-point matching loss.
/// Coordinates are divided by the frame size before comparison.
pub fn total_loss(
    pred: &PiecewiseContour,
    gt: &PiecewiseContour,
    n: usize,
    seed: u64,
) -> Result<LossValue> {
    total_loss_with(pred, gt, &sample_ts(n, seed), LossConfig::default())
}

pub fn total_loss_with(
    pred: &PiecewiseContour,
    gt: &PiecewiseContour,
    samples: &ParamSamples,
    config: LossConfig,
) -> Result<LossValue> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(invalid(format!(
            "frame mismatch: {}x{} vs {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    check_layout(pred)?;
    check_layout(gt)?;
    let scale = [1.0 / pred.width() as f64, 1.0 / pred.height() as f64];
    let normalize = |v: &[f64]| -> Vec<f64> {
        v.iter().enumerate().map(|(i, &x)| x * scale[i % 2]).collect()
    };

    let (l_ce, g_ce) = smooth_l1(&normalize(&pred.flatten()?), &normalize(&gt.flatten()?), config.beta)?;

    let flat_points = |d: DecodedPoints| -> Vec<f64> {
        d.points.iter().flat_map(|p| [p.x, p.y]).collect()
    };
    let pred_pts = normalize(&flat_points(forward(pred, samples)?));
    let gt_pts = normalize(&flat_points(forward(gt, samples)?));
    let (l_matching, g_out) = smooth_l1(&pred_pts, &gt_pts, config.beta)?;

    let g_match = jacobian(pred, samples)?.transpose_apply(&g_out);
    let gradient = g_ce
        .iter()
        .zip(&g_match)
        .enumerate()
        .map(|(i, (a, b))| (config.lambda_ce * a + config.lambda_matching * b) * scale[i % 2])
        .collect();
    Ok(LossValue {
        total: config.lambda_ce * l_ce + config.lambda_matching * l_matching,
        l_ce,
        l_matching,
        gradient,
    })
}

/// Compares the analytic gradient of [`total_loss`] with central finite
/// differences of the loss value. Returns the largest component error
/// relative to the gradient's max-norm.
pub fn gradient_check(
    pred: &PiecewiseContour,
    gt: &PiecewiseContour,
    n: usize,
    seed: u64,
    step: f64,
) -> Result<f64> {
    let analytic = total_loss(pred, gt, n, seed)?.gradient;
    let base = pred.flatten()?;
    let (w, h) = (pred.width(), pred.height());
    let mut numeric = Vec::with_capacity(LAYOUT_LEN);
    for i in 0..LAYOUT_LEN {
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[i] += step;
        minus[i] -= step;
        let fp = total_loss(&PiecewiseContour::unflatten(&plus, w, h)?, gt, n, seed)?.total;
        let fm = total_loss(&PiecewiseContour::unflatten(&minus, w, h)?, gt, n, seed)?.total;
        numeric.push((fp - fm) / (2.0 * step));
    }
    let scale = analytic
        .iter()
        .chain(&numeric)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let worst = analytic
        .iter()
        .zip(&numeric)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(worst / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bezier::BezierCurve;

    fn random_contour(rng: &mut ChaCha8Rng, size: usize) -> PiecewiseContour {
        let values: Vec<f64> = (0..LAYOUT_LEN).map(|_| rng.gen_range(0.0..size as f64)).collect();
        PiecewiseContour::unflatten(&values, size, size).unwrap()
    }

    #[test]
    fn sampling_is_deterministic() {
        assert_eq!(sample_ts(72, 5), sample_ts(72, 5));
        assert_ne!(sample_ts(72, 5), sample_ts(72, 6));
        let s = sample_ts(DEFAULT_LOSS_SAMPLES, 0);
        assert_eq!(s.len(), 72);
        assert!(s.segment_ids.iter().all(|&k| k < 4));
        assert!(s.ts.iter().all(|t| (0.0..1.0).contains(t)));
    }

    #[test]
    fn sample_mean_is_one_half() {
        let s = sample_ts(1_000_000, 42);
        let mean = s.ts.iter().sum::<f64>() / s.len() as f64;
        assert!((0.499..=0.501).contains(&mean), "{mean}");
    }

    #[test]
    fn forward_examples() {
        let v = vec![7.0; LAYOUT_LEN];
        let c = PiecewiseContour::unflatten(&v, 16, 16).unwrap();
        let d = forward(&c, &sample_ts(30, 1)).unwrap();
        assert!(d.points.iter().all(|&p| p.dist(Point2::new(7.0, 7.0)) < 1e-12));

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = random_contour(&mut rng, 64);
        let samples = ParamSamples {
            ts: vec![0.0, 0.0, 0.0, 0.0],
            segment_ids: vec![0, 1, 2, 3],
        };
        let d = forward(&c, &samples).unwrap();
        assert_eq!(d.points, c.junctions().to_vec());

        let samples = sample_ts(100, 9);
        let d = forward(&c, &samples).unwrap();
        for j in 0..100 {
            let seg: &BezierCurve = &c.segments()[samples.segment_ids[j]];
            let want = seg.sample(&[samples.ts[j]]).unwrap()[0];
            assert!(d.points[j].dist(want) < 1e-12);
        }
    }

    #[test]
    fn forward_rejects_other_degrees() {
        let j = [(0.0, 0.0), (0.0, 4.0), (4.0, 4.0), (4.0, 0.0)].map(Point2::from);
        let c = PiecewiseContour::from_parts(j, std::array::from_fn(|_| vec![]), 8, 8).unwrap();
        assert!(forward(&c, &sample_ts(4, 0)).is_err());
    }

    #[test]
    fn jacobian_rows_partition_unity_and_stay_local() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = random_contour(&mut rng, 64);
        let samples = sample_ts(72, 4);
        let jac = jacobian(&c, &samples).unwrap();
        let dense = jac.to_dense();
        for (j, &k) in samples.segment_ids.iter().enumerate() {
            let row = &dense[2 * j];
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let own: Vec<usize> = (0..=LAYOUT_DEGREE).map(|i| layout_slot(k, i)).collect();
            for slot in 0..20 {
                if !own.contains(&slot) {
                    assert_eq!(row[2 * slot], 0.0);
                    assert_eq!(dense[2 * j + 1][2 * slot + 1], 0.0);
                }
                // no x/y cross terms
                assert_eq!(row[2 * slot + 1], 0.0);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let c = random_contour(&mut rng, 256);
            let samples = sample_ts(72, rng.gen());
            let dense = jacobian(&c, &samples).unwrap().to_dense();
            let base = c.flatten().unwrap();
            let h = 1e-5;
            for i in 0..LAYOUT_LEN {
                let mut p = base.clone();
                let mut m = base.clone();
                p[i] += h;
                m[i] -= h;
                let fp = forward(&PiecewiseContour::unflatten(&p, 256, 256).unwrap(), &samples).unwrap();
                let fm = forward(&PiecewiseContour::unflatten(&m, 256, 256).unwrap(), &samples).unwrap();
                for j in 0..72 {
                    let dx = (fp.points[j].x - fm.points[j].x) / (2.0 * h);
                    let dy = (fp.points[j].y - fm.points[j].y) / (2.0 * h);
                    assert!((dx - dense[2 * j][i]).abs() <= 1e-6 * dense[2 * j][i].abs().max(1.0));
                    assert!((dy - dense[2 * j + 1][i]).abs() <= 1e-6 * dense[2 * j + 1][i].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn decoding_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_contour(&mut rng, 256);
        let b = random_contour(&mut rng, 256);
        let alpha = 0.3;
        let mix: Vec<f64> = a
            .flatten()
            .unwrap()
            .iter()
            .zip(b.flatten().unwrap())
            .map(|(x, y)| alpha * x + (1.0 - alpha) * y)
            .collect();
        let m = PiecewiseContour::unflatten(&mix, 256, 256).unwrap();
        let s = sample_ts(72, 1);
        let (fa, fb, fm) = (forward(&a, &s).unwrap(), forward(&b, &s).unwrap(), forward(&m, &s).unwrap());
        for j in 0..72 {
            let want = fa.points[j] * alpha + fb.points[j] * (1.0 - alpha);
            assert!(fm.points[j].dist(want) < 1e-10);
        }
    }

    #[test]
    fn smooth_l1_branches() {
        assert_eq!(smooth_l1(&[1.0, 2.0], &[1.0, 2.0], 1.0).unwrap(), (0.0, vec![0.0, 0.0]));
        assert_eq!(smooth_l1(&[0.5], &[0.0], 1.0).unwrap(), (0.125, vec![0.5]));
        assert_eq!(smooth_l1(&[2.0], &[0.0], 1.0).unwrap(), (1.5, vec![1.0]));
        assert_eq!(smooth_l1(&[-2.0], &[0.0], 1.0).unwrap(), (1.5, vec![-1.0]));
        // averaged over elements
        assert_eq!(smooth_l1(&[2.0, 0.0], &[0.0, 0.0], 1.0).unwrap(), (0.75, vec![0.5, 0.0]));
        assert!(smooth_l1(&[1.0], &[1.0, 2.0], 1.0).is_err());
        assert!(smooth_l1(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn loss_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let gt = random_contour(&mut rng, 256);
        let same = total_loss(&gt, &gt, 72, 0).unwrap();
        assert_eq!((same.total, same.l_ce, same.l_matching), (0.0, 0.0, 0.0));
        assert!(same.gradient.iter().all(|&g| g == 0.0));

        let pred = random_contour(&mut rng, 256);
        let l = total_loss(&pred, &gt, 72, 3).unwrap();
        assert!(l.total > 0.0 && l.l_ce > 0.0 && l.l_matching > 0.0);
        assert_eq!(l.total, l.l_ce + l.l_matching);
        assert_eq!(l, total_loss(&pred, &gt, 72, 3).unwrap());

        let shift = |c: &PiecewiseContour| c.map_points(|p| p + Point2::new(16.0, -8.0)).unwrap();
        let moved = total_loss(&shift(&pred), &shift(&gt), 72, 3).unwrap();
        assert!((moved.total - l.total).abs() < 1e-12);

        let other = PiecewiseContour::unflatten(&pred.flatten().unwrap(), 128, 256).unwrap();
        assert!(total_loss(&other, &gt, 72, 3).is_err());
    }

    #[test]
    fn gradient_agrees_with_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for i in 0..10 {
            let pred = random_contour(&mut rng, 256);
            let gt = random_contour(&mut rng, 256);
            let err = gradient_check(&pred, &gt, 72, i, 1e-5).unwrap();
            assert!(err < 1e-5, "case {i}: {err}");
        }
    }
}
