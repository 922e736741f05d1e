// SPDX-License-Identifier: Apache-2.0

//! Mask-to-contour encoding: extreme points, boundary splitting, and the
//! per-arc least-squares Bézier fit.

use nalgebra::DMatrix;

use crate::bezier::{bernstein_into, BezierCurve, MAX_DEGREE};
use crate::contour::PiecewiseContour;
use crate::error::{invalid, Error, Result};
use crate::mask::{
    largest_component, morphological_smooth, trace_boundary, BinaryMask, BoundaryTrace,
    Connectivity,
};
use crate::point::Point2;

/// Singular values below this fraction of the largest are treated as zero.
pub const PINV_RCOND: f64 = 1e-10;

/// The four extreme boundary points and their positions in the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremePoints {
    pub top: Point2,
    pub leftmost: Point2,
    pub bottom: Point2,
    pub rightmost: Point2,
    /// Trace indices of top, leftmost, bottom, rightmost.
    pub indices: [usize; 4],
}

impl ExtremePoints {
    pub fn as_array(&self) -> [Point2; 4] {
        [self.top, self.leftmost, self.bottom, self.rightmost]
    }
}

/// Picks the extremes with corner tie-breaking: top-left for the top,
/// bottom-left for the leftmost, bottom-right for the bottom and top-right
/// for the rightmost point.
pub fn find_extreme_points(trace: &BoundaryTrace) -> Result<ExtremePoints> {
    let pts = &trace.points;
    if pts.len() < 4 {
        return Err(Error::DegenerateObject(format!(
            "boundary has {} points, need at least 4",
            pts.len()
        )));
    }
    let pick = |better: &dyn Fn(Point2, Point2) -> bool| {
        let mut best = 0;
        for (i, &p) in pts.iter().enumerate().skip(1) {
            if better(p, pts[best]) {
                best = i;
            }
        }
        best
    };
    let top = pick(&|p, q| p.y < q.y || (p.y == q.y && p.x < q.x));
    let leftmost = pick(&|p, q| p.x < q.x || (p.x == q.x && p.y > q.y));
    let bottom = pick(&|p, q| p.y > q.y || (p.y == q.y && p.x > q.x));
    let rightmost = pick(&|p, q| p.x > q.x || (p.x == q.x && p.y < q.y));
    Ok(ExtremePoints {
        top: pts[top],
        leftmost: pts[leftmost],
        bottom: pts[bottom],
        rightmost: pts[rightmost],
        indices: [top, leftmost, bottom, rightmost],
    })
}

/// Cuts the closed trace into the arcs top→leftmost, leftmost→bottom,
/// bottom→rightmost and rightmost→top. Each arc includes both of its
/// junction points; coincident extremes yield single-point arcs.
pub fn split_boundary(trace: &BoundaryTrace, extremes: &ExtremePoints) -> Result<[Vec<Point2>; 4]> {
    let m = trace.points.len();
    let idx = extremes.indices;
    if let Some(&bad) = idx.iter().find(|&&i| i >= m) {
        return Err(invalid(format!("extreme index {bad} outside trace of length {m}")));
    }
    let steps: [usize; 4] = std::array::from_fn(|k| (idx[(k + 1) % 4] + m - idx[k]) % m);
    let total: usize = steps.iter().sum();
    if total != m {
        return Err(Error::InvariantViolation(format!(
            "extreme points are not in boundary order (arcs cover {total} of {m} steps)"
        )));
    }
    Ok(std::array::from_fn(|k| {
        (0..=steps[k])
            .map(|s| trace.points[(idx[k] + s) % m])
            .collect()
    }))
}

/// Fitted arc with its root-mean-square error at the assigned parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcFit {
    pub segment: BezierCurve,
    pub residual: f64,
}

/// Parameter for point `i` of an `m`-point arc.
fn arc_t(i: usize, m: usize) -> f64 {
    if m < 2 {
        0.0
    } else {
        i as f64 / (m - 1) as f64
    }
}

/// Root-mean-square distance between `arc[i]` and the curve at `t_i`.
pub fn arc_residual(segment: &BezierCurve, arc: &[Point2]) -> f64 {
    if arc.is_empty() {
        return 0.0;
    }
    let mut basis = [0.0; MAX_DEGREE + 1];
    let m = arc.len();
    let sum: f64 = arc
        .iter()
        .enumerate()
        .map(|(i, &p)| segment.eval_unchecked(arc_t(i, m), &mut basis).dist_sq(p))
        .sum();
    (sum / m as f64).sqrt()
}

/// Fits a degree-`degree` curve to `arc` with its end control points pinned
/// to the arc endpoints; the interior control points are the minimum-norm
/// least-squares solution with `t_i = i / (m - 1)`.
///
/// Arcs with fewer than `degree + 1` points get interior control points
/// spaced evenly along the chord instead, and a single-point arc collapses
/// to that point.
pub fn fit_arc(arc: &[Point2], degree: usize) -> Result<ArcFit> {
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(invalid(format!("degree {degree} outside 1..={MAX_DEGREE}")));
    }
    let m = arc.len();
    if m == 0 {
        return Err(invalid("cannot fit an empty arc"));
    }
    if m == 1 {
        let segment = BezierCurve::collapsed(arc[0], degree)?;
        return Ok(ArcFit { segment, residual: 0.0 });
    }
    let (start, end) = (arc[0], arc[m - 1]);
    let interior = if degree == 1 {
        Vec::new()
    } else if m < degree + 1 {
        (1..degree)
            .map(|i| start.lerp(end, i as f64 / degree as f64))
            .collect()
    } else {
        solve_interior(arc, degree)
    };
    let mut cps = Vec::with_capacity(degree + 1);
    cps.push(start);
    cps.extend(interior);
    cps.push(end);
    let segment = BezierCurve::new(cps)?;
    let residual = arc_residual(&segment, arc);
    Ok(ArcFit { segment, residual })
}

fn solve_interior(arc: &[Point2], degree: usize) -> Vec<Point2> {
    let m = arc.len();
    // Work relative to the first point; the endpoint rows are identities
    // and drop out of the system.
    let origin = arc[0];
    let end = arc[m - 1] - origin;
    let rows = m - 2;
    let cols = degree - 1;
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut b = DMatrix::<f64>::zeros(rows, 2);
    let mut basis = [0.0; MAX_DEGREE + 1];
    for r in 0..rows {
        let i = r + 1;
        bernstein_into(degree, arc_t(i, m), &mut basis);
        for c in 0..cols {
            a[(r, c)] = basis[c + 1];
        }
        let p = arc[i] - origin;
        b[(r, 0)] = p.x - basis[degree] * end.x;
        b[(r, 1)] = p.y - basis[degree] * end.y;
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let c = svd
        .solve(&b, PINV_RCOND * smax)
        .expect("U and V were computed");
    (0..cols)
        .map(|k| Point2::new(c[(k, 0)], c[(k, 1)]) + origin)
        .collect()
}

/// Per-arc fit diagnostics for an encoded mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// RMS fit error per arc, in pixels.
    pub residuals: [f64; 4],
    /// Number of boundary points per arc, junctions included.
    pub arc_lengths: [usize; 4],
}

impl FitReport {
    pub fn mean_residual(&self) -> f64 {
        self.residuals.iter().sum::<f64>() / 4.0
    }
}

/// Boundary arcs of the object in `mask` after component selection and
/// optional smoothing.
pub fn extract_arcs(mask: &BinaryMask, smooth_radius: usize) -> Result<(BoundaryTrace, ExtremePoints, [Vec<Point2>; 4])> {
    if mask.is_empty() {
        return Err(Error::EmptyObject);
    }
    let mut object = largest_component(mask, Connectivity::Eight);
    if smooth_radius > 0 {
        object = largest_component(&morphological_smooth(&object, smooth_radius), Connectivity::Eight);
        if object.is_empty() {
            return Err(Error::EmptyObject);
        }
    }
    let trace = trace_boundary(&object)?;
    let extremes = find_extreme_points(&trace)?;
    let arcs = split_boundary(&trace, &extremes)?;
    Ok((trace, extremes, arcs))
}

/// Encodes the largest object of `mask` as a closed four-arc contour.
pub fn encode_mask(
    mask: &BinaryMask,
    degree: usize,
    smooth_radius: usize,
) -> Result<(PiecewiseContour, FitReport)> {
    let (_, _, arcs) = extract_arcs(mask, smooth_radius)?;
    encode_arcs(&arcs, degree, mask.width(), mask.height())
}

/// Fits each arc and assembles the contour.
pub fn encode_arcs(
    arcs: &[Vec<Point2>; 4],
    degree: usize,
    width: usize,
    height: usize,
) -> Result<(PiecewiseContour, FitReport)> {
    let mut segs = Vec::with_capacity(4);
    let mut residuals = [0.0; 4];
    for (k, arc) in arcs.iter().enumerate() {
        let fit = fit_arc(arc, degree)?;
        residuals[k] = fit.residual;
        segs.push(fit.segment);
    }
    let segments: [BezierCurve; 4] = segs.try_into().expect("four arcs");
    let contour = PiecewiseContour::new(segments, width, height)?;
    let report = FitReport {
        residuals,
        arc_lengths: std::array::from_fn(|k| arcs[k].len()),
    };
    Ok((contour, report))
}
