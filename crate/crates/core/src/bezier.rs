// SPDX-License-Identifier: Apache-2.0

//! Bernstein-form Bézier curves: basis evaluation, the De Casteljau scheme,
//! batch sampling and degree elevation.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::point::Point2;

/// Highest supported curve degree.
pub const MAX_DEGREE: usize = 20;

const BINOMIAL: [[u64; MAX_DEGREE + 1]; MAX_DEGREE + 1] = binomial_table();

const fn binomial_table() -> [[u64; MAX_DEGREE + 1]; MAX_DEGREE + 1] {
    let mut table = [[0u64; MAX_DEGREE + 1]; MAX_DEGREE + 1];
    let mut n = 0;
    while n <= MAX_DEGREE {
        table[n][0] = 1;
        let mut k = 1;
        while k <= n {
            table[n][k] = table[n - 1][k - 1] + if k < n { table[n - 1][k] } else { 0 };
            k += 1;
        }
        n += 1;
    }
    table
}

/// Exact `binom(n, k)` for `n <= MAX_DEGREE`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        0
    } else {
        BINOMIAL[n][k]
    }
}

fn check_t(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(invalid(format!("parameter t = {t} outside [0, 1]")))
    }
}

fn check_degree(degree: usize) -> Result<()> {
    if (1..=MAX_DEGREE).contains(&degree) {
        Ok(())
    } else {
        Err(invalid(format!(
            "degree {degree} outside supported range 1..={MAX_DEGREE}"
        )))
    }
}

/// Fills `out[0..=degree]` with `b_{n,i}(t)`. Caller guarantees valid inputs.
pub(crate) fn bernstein_into(degree: usize, t: f64, out: &mut [f64]) {
    let s = 1.0 - t;
    // ascending powers of t
    let mut tp = 1.0;
    for slot in out.iter_mut().take(degree + 1) {
        *slot = tp;
        tp *= t;
    }
    // descending powers of (1 - t), folded in from the right
    let mut sp = 1.0;
    for i in (0..=degree).rev() {
        out[i] *= sp * BINOMIAL[degree][i] as f64;
        sp *= s;
    }
}

/// The `degree + 1` Bernstein basis values `binom(n,i) (1-t)^(n-i) t^i`.
pub fn bernstein_basis(degree: usize, t: f64) -> Result<Vec<f64>> {
    check_degree(degree)?;
    check_t(t)?;
    let mut out = vec![0.0; degree + 1];
    bernstein_into(degree, t, &mut out);
    Ok(out)
}

/// A single Bézier curve of degree `control_points.len() - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BezierCurve {
    control_points: Vec<Point2>,
}

impl BezierCurve {
    pub fn new(control_points: Vec<Point2>) -> Result<Self> {
        if control_points.len() < 2 {
            return Err(invalid("a segment needs at least two control points"));
        }
        check_degree(control_points.len() - 1)?;
        if let Some(p) = control_points.iter().find(|p| !p.is_finite()) {
            return Err(invalid(format!("non-finite control point {p:?}")));
        }
        Ok(Self { control_points })
    }

    /// Segment with every control point at `p`.
    pub fn collapsed(p: Point2, degree: usize) -> Result<Self> {
        Self::new(vec![p; degree + 1])
    }

    pub fn degree(&self) -> usize {
        self.control_points.len() - 1
    }

    pub fn control_points(&self) -> &[Point2] {
        &self.control_points
    }

    pub fn first(&self) -> Point2 {
        self.control_points[0]
    }

    pub fn last(&self) -> Point2 {
        self.control_points[self.degree()]
    }

    pub fn into_control_points(self) -> Vec<Point2> {
        self.control_points
    }

    pub(crate) fn eval_unchecked(&self, t: f64, basis: &mut [f64]) -> Point2 {
        let n = self.degree();
        bernstein_into(n, t, basis);
        let mut acc = Point2::default();
        for (p, b) in self.control_points.iter().zip(&basis[..=n]) {
            acc.x += b * p.x;
            acc.y += b * p.y;
        }
        acc
    }

    /// Evaluates the curve through its Bernstein expansion.
    pub fn eval_bernstein(&self, t: f64) -> Result<Point2> {
        check_t(t)?;
        // Endpoints are returned verbatim so interpolation is exact.
        if t == 0.0 {
            return Ok(self.first());
        }
        if t == 1.0 {
            return Ok(self.last());
        }
        let mut basis = [0.0; MAX_DEGREE + 1];
        Ok(self.eval_unchecked(t, &mut basis))
    }

    /// Evaluates the curve by repeated linear interpolation.
    pub fn eval_de_casteljau(&self, t: f64) -> Result<Point2> {
        check_t(t)?;
        let mut work = self.control_points.clone();
        for level in (1..work.len()).rev() {
            for i in 0..level {
                work[i] = work[i].lerp(work[i + 1], t);
            }
        }
        Ok(work[0])
    }

    /// Evaluates the curve at every parameter in `ts`, preserving order.
    pub fn sample(&self, ts: &[f64]) -> Result<Vec<Point2>> {
        ts.iter().map(|&t| self.eval_bernstein(t)).collect()
    }

    /// Same curve expressed with one more control point.
    pub fn elevate_degree(&self) -> Result<Self> {
        let p = &self.control_points;
        let n = self.degree();
        let m = (n + 1) as f64;
        let mut q = Vec::with_capacity(n + 2);
        q.push(p[0]);
        for i in 1..=n {
            let a = i as f64 / m;
            q.push(p[i - 1] * a + p[i] * (1.0 - a));
        }
        q.push(p[n]);
        Self::new(q)
    }

    /// Applies `f` to every control point.
    pub fn map_points(&self, mut f: impl FnMut(Point2) -> Point2) -> Result<Self> {
        Self::new(self.control_points.iter().map(|&p| f(p)).collect())
    }
}

/// `count` parameters evenly spaced over `[0, 1]`, both ends included.
pub fn uniform_ts(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => {
            let last = (count - 1) as f64;
            (0..count).map(|i| i as f64 / last).collect()
        }
    }
}
