// SPDX-License-Identifier: Apache-2.0

//! Pixel-domain operations on binary masks.
//!
//! Pixel `(row, col)` has continuous center `(col + 0.5, row + 0.5)`.
//! Foreground uses 8-connectivity and background 4-connectivity; pixels
//! outside the frame count as background.

use std::collections::VecDeque;

use crate::error::{invalid, Error, Result};
use crate::point::Point2;

/// A `width x height` foreground/background grid stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    /// All-background mask.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid(format!("mask dimensions {width}x{height} must be positive")));
        }
        Ok(Self {
            width,
            height,
            bits: vec![false; width * height],
        })
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        let mut mask = Self::new(width, height)?;
        if bits.len() != width * height {
            return Err(invalid(format!(
                "expected {} mask bits, got {}",
                width * height,
                bits.len()
            )));
        }
        mask.bits = bits;
        Ok(mask)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut mask = Self::new(width, height)?;
        for r in 0..height {
            for c in 0..width {
                mask.bits[r * width + c] = f(r, c);
            }
        }
        Ok(mask)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    /// Like [`get`](Self::get) but out-of-frame coordinates read as background.
    #[inline]
    pub fn get_signed(&self, row: isize, col: isize) -> bool {
        row >= 0
            && col >= 0
            && (row as usize) < self.height
            && (col as usize) < self.width
            && self.bits[row as usize * self.width + col as usize]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Foreground pixels as `(row, col)` in scan order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i / self.width, i % self.width))
    }

    /// Parses an 8-bit binary PGM (`P5`); values strictly above `threshold`
    /// become foreground.
    pub fn from_pgm(bytes: &[u8], threshold: u8) -> Result<Self> {
        let mut pos = 0;
        let magic = pgm_token(bytes, &mut pos)?;
        if magic != b"P5" {
            return Err(Error::Format("not a binary PGM (missing P5 magic)".into()));
        }
        let width = pgm_number(bytes, &mut pos)?;
        let height = pgm_number(bytes, &mut pos)?;
        let maxval = pgm_number(bytes, &mut pos)?;
        if maxval == 0 || maxval > 255 {
            return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::Format(format!("PGM dimensions {width}x{height}")));
        }
        // exactly one whitespace byte separates the header from the raster
        match bytes.get(pos) {
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            _ => return Err(Error::Format("missing whitespace after PGM header".into())),
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::Format("PGM dimensions overflow".into()))?;
        let data = bytes
            .get(pos..pos + n)
            .ok_or_else(|| Error::Format(format!("truncated PGM raster: need {n} bytes")))?;
        Self::from_bits(width, height, data.iter().map(|&v| v > threshold).collect())
    }

    /// Serializes as `P5` with foreground 255 and background 0.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.bits.iter().map(|&b| if b { 255u8 } else { 0 }));
        out
    }
}

fn pgm_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::Format("truncated PGM header".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    Ok(&bytes[start..*pos])
}

fn pgm_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    let tok = pgm_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad PGM header field {:?}", String::from_utf8_lossy(tok))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const EIGHT: [(isize, isize); 8] = [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// Labels foreground components; labels are 1-based and assigned in scan
/// order of each component's first pixel. Returns `(labels, sizes)` where
/// `sizes[k]` is the size of label `k + 1`.
pub fn label_components(mask: &BinaryMask, connectivity: Connectivity) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = (mask.width, mask.height);
    let mut labels = vec![0u32; w * h];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (r, c) = ((i / w) as isize, (i % w) as isize);
            for &(dr, dc) in connectivity.offsets() {
                let (nr, nc) = (r + dr, c + dc);
                if mask.get_signed(nr, nc) {
                    let j = nr as usize * w + nc as usize;
                    if labels[j] == 0 {
                        labels[j] = label;
                        queue.push_back(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

pub fn count_components(mask: &BinaryMask, connectivity: Connectivity) -> usize {
    label_components(mask, connectivity).1.len()
}

/// Keeps only the largest foreground component. Equal sizes resolve to the
/// component whose first pixel comes first in scan order.
pub fn largest_component(mask: &BinaryMask, connectivity: Connectivity) -> BinaryMask {
    let (labels, sizes) = label_components(mask, connectivity);
    let mut best: Option<(usize, u32)> = None;
    for (k, &size) in sizes.iter().enumerate() {
        if best.is_none_or(|(s, _)| size > s) {
            best = Some((size, k as u32 + 1));
        }
    }
    let keep = best.map_or(0, |(_, l)| l);
    BinaryMask {
        width: mask.width,
        height: mask.height,
        bits: labels.iter().map(|&l| l != 0 && l == keep).collect(),
    }
}

/// Digital disc: offsets whose distance from the origin is below
/// `radius + 0.5`, so radius 1 is the full 3x3 neighbourhood.
fn disc_offsets(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    // (r + 1/2)^2 scaled by 4 to stay in integers
    let limit = (2 * r + 1) * (2 * r + 1);
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if 4 * (dx * dx + dy * dy) < limit {
                out.push((dy, dx));
            }
        }
    }
    out
}

/// Scratch grid with a background margin around the frame.
struct Padded {
    w: usize,
    h: usize,
    pad: usize,
    bits: Vec<bool>,
}

impl Padded {
    fn from_mask(mask: &BinaryMask, pad: usize) -> Self {
        let (w, h) = (mask.width + 2 * pad, mask.height + 2 * pad);
        let mut bits = vec![false; w * h];
        for (r, c) in mask.foreground() {
            bits[(r + pad) * w + c + pad] = true;
        }
        Self { w, h, pad, bits }
    }

    fn get(&self, r: isize, c: isize) -> bool {
        r >= 0
            && c >= 0
            && (r as usize) < self.h
            && (c as usize) < self.w
            && self.bits[r as usize * self.w + c as usize]
    }

    fn transform(&self, offsets: &[(isize, isize)], erode: bool) -> Self {
        let mut bits = vec![false; self.w * self.h];
        for r in 0..self.h {
            for c in 0..self.w {
                let (ri, ci) = (r as isize, c as isize);
                bits[r * self.w + c] = if erode {
                    offsets.iter().all(|&(dr, dc)| self.get(ri + dr, ci + dc))
                } else {
                    offsets.iter().any(|&(dr, dc)| self.get(ri - dr, ci - dc))
                };
            }
        }
        Self { bits, ..*self }
    }

    fn crop(&self, width: usize, height: usize) -> BinaryMask {
        let mut out = BinaryMask::new(width, height).expect("non-empty frame");
        for r in 0..height {
            for c in 0..width {
                out.bits[r * width + c] = self.bits[(r + self.pad) * self.w + c + self.pad];
            }
        }
        out
    }
}

/// Opening followed by closing with a disc of the given radius. The frame
/// is embedded in an unbounded background plane while filtering.
pub fn morphological_smooth(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let disc = disc_offsets(radius);
    let grid = Padded::from_mask(mask, 2 * radius + 1);
    let opened = grid.transform(&disc, true).transform(&disc, false);
    let closed = opened.transform(&disc, false).transform(&disc, true);
    closed.crop(mask.width, mask.height)
}

/// Foreground pixels with a background 4-neighbour or lying on the frame
/// border, as pixel centers in scan order.
pub fn boundary_pixels(mask: &BinaryMask) -> Vec<Point2> {
    mask.foreground()
        .filter(|&(r, c)| is_boundary_pixel(mask, r, c))
        .map(|(r, c)| Point2::pixel_center(r, c))
        .collect()
}

fn is_boundary_pixel(mask: &BinaryMask, r: usize, c: usize) -> bool {
    let (ri, ci) = (r as isize, c as isize);
    [(-1, 0), (1, 0), (0, -1), (0, 1)]
        .iter()
        .any(|&(dr, dc)| !mask.get_signed(ri + dr, ci + dc))
}

/// Ordered closed loop of boundary pixel centers.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub points: Vec<Point2>,
    pub closed: bool,
}

impl BoundaryTrace {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

// Neighbour directions as (drow, dcol), ordered so that stepping forward
// through the array turns counter-clockwise on screen (y down):
// W, SW, S, SE, E, NE, N, NW.
const MOORE: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

fn moore_index(dr: isize, dc: isize) -> usize {
    MOORE
        .iter()
        .position(|&d| d == (dr, dc))
        .expect("backtrack pixel is a Moore neighbour")
}

/// One Moore-neighbour step: from `cur` with background `back`, returns the
/// next foreground pixel and its backtrack pixel.
fn moore_step(
    mask: &BinaryMask,
    cur: (isize, isize),
    back: (isize, isize),
) -> Option<((isize, isize), (isize, isize))> {
    let start = moore_index(back.0 - cur.0, back.1 - cur.1);
    let mut prev = back;
    for k in 1..=8 {
        let (dr, dc) = MOORE[(start + k) % 8];
        let cand = (cur.0 + dr, cur.1 + dc);
        if mask.get_signed(cand.0, cand.1) {
            return Some((cand, prev));
        }
        prev = cand;
    }
    None
}

/// Moore-neighbour trace of the single 8-connected object in `mask`.
///
/// Starts at the top-left-most foreground pixel and walks with the object on
/// the left-hand side on screen: down the left flank first, so the top,
/// leftmost, bottom and rightmost extremes are met in that order. Pixels the
/// walk revisits (one-pixel-wide necks) are kept at their first visit only.
pub fn trace_boundary(mask: &BinaryMask) -> Result<BoundaryTrace> {
    let components = count_components(mask, Connectivity::Eight);
    if components == 0 {
        return Err(Error::EmptyObject);
    }
    if components > 1 {
        return Err(Error::Precondition(format!(
            "boundary tracing needs one object, found {components} components"
        )));
    }
    let (r0, c0) = mask.foreground().next().expect("non-empty");
    let start = (r0 as isize, c0 as isize);
    let start_back = (start.0, start.1 - 1);

    let mut visited = vec![false; mask.width * mask.height];
    let mut points = Vec::new();
    let mut push = |p: (isize, isize), points: &mut Vec<Point2>| {
        let idx = p.0 as usize * mask.width + p.1 as usize;
        if !visited[idx] {
            visited[idx] = true;
            points.push(Point2::pixel_center(p.0 as usize, p.1 as usize));
        }
    };
    push(start, &mut points);

    let Some((second, mut back)) = moore_step(mask, start, start_back) else {
        return Ok(BoundaryTrace { points, closed: true });
    };
    let mut cur = second;
    // Each directed move occurs once per circuit; the loop closes when the
    // first move repeats. The bound only guards against logic errors.
    let limit = 8 * mask.count() + 16;
    for _ in 0..limit {
        push(cur, &mut points);
        let (next, nb) = moore_step(mask, cur, back).expect("connected object");
        if cur == start && next == second {
            return Ok(BoundaryTrace { points, closed: true });
        }
        cur = next;
        back = nb;
    }
    Err(Error::InvariantViolation("boundary trace did not close".into()))
}

/// Even-odd fill of a closed polygon sampled at pixel centers. The closing
/// edge from the last vertex back to the first is implicit.
pub fn rasterize_polygon(vertices: &[Point2], width: usize, height: usize) -> Result<BinaryMask> {
    if vertices.len() < 3 {
        return Err(invalid(format!(
            "polygon needs at least 3 vertices, got {}",
            vertices.len()
        )));
    }
    if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
        return Err(invalid(format!("non-finite polygon vertex {p:?}")));
    }
    let mut mask = BinaryMask::new(width, height)?;
    let mut crossings: Vec<(usize, f64)> = Vec::new();
    let n = vertices.len();
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        if a.y == b.y {
            continue;
        }
        let (lo, hi) = if a.y < b.y { (a.y, b.y) } else { (b.y, a.y) };
        let first = ((lo - 0.5).floor().max(0.0)) as usize;
        let last = ((hi - 0.5).ceil().min(height as f64 - 1.0)).max(-1.0);
        if last < 0.0 {
            continue;
        }
        for row in first..=last as usize {
            let y = row as f64 + 0.5;
            if (a.y > y) != (b.y > y) {
                crossings.push((row, edge_x_at(a, b, y)));
            }
        }
    }
    crossings.sort_by(|p, q| p.0.cmp(&q.0).then(p.1.total_cmp(&q.1)));
    for row_xs in crossings.chunk_by(|p, q| p.0 == q.0) {
        let row = row_xs[0].0;
        for pair in row_xs.chunks_exact(2) {
            let (xa, xb) = (pair[0].1, pair[1].1);
            fill_span(&mut mask, row, xa, xb);
        }
    }
    Ok(mask)
}

/// Fill that also keeps every pixel whose center lies within half a pixel
/// of the outline. A polygon through boundary pixel centers then covers
/// those boundary pixels, so tracing followed by filling loses no area.
pub fn rasterize_polygon_inclusive(
    vertices: &[Point2],
    width: usize,
    height: usize,
) -> Result<BinaryMask> {
    let mut mask = rasterize_polygon(vertices, width, height)?;
    let n = vertices.len();
    for i in 0..n {
        stamp_segment(&mut mask, vertices[i], vertices[(i + 1) % n]);
    }
    Ok(mask)
}

// Sets pixels whose centers are within 0.5 of segment a-b.
fn stamp_segment(mask: &mut BinaryMask, a: Point2, b: Point2) {
    let lo_c = (a.x.min(b.x) - 1.0).floor().max(0.0);
    let hi_c = (a.x.max(b.x) + 1.0).ceil().min(mask.width as f64 - 1.0);
    let lo_r = (a.y.min(b.y) - 1.0).floor().max(0.0);
    let hi_r = (a.y.max(b.y) + 1.0).ceil().min(mask.height as f64 - 1.0);
    if hi_c < lo_c || hi_r < lo_r {
        return;
    }
    let d = b - a;
    let len_sq = d.x * d.x + d.y * d.y;
    for r in lo_r as usize..=hi_r as usize {
        for c in lo_c as usize..=hi_c as usize {
            let p = Point2::pixel_center(r, c);
            let t = if len_sq == 0.0 {
                0.0
            } else {
                (((p - a).x * d.x + (p - a).y * d.y) / len_sq).clamp(0.0, 1.0)
            };
            if (a + d * t).dist_sq(p) <= 0.25 {
                mask.set(r, c, true);
            }
        }
    }
}

/// x where edge `a -> b` crosses the horizontal line at `y`.
#[inline]
pub(crate) fn edge_x_at(a: Point2, b: Point2, y: f64) -> f64 {
    a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y)
}

// Sets columns whose center lies in [xa, xb).
fn fill_span(mask: &mut BinaryMask, row: usize, xa: f64, xb: f64) {
    let w = mask.width as f64;
    let mut c = (xa - 0.5).floor().max(0.0);
    while c < w && c + 0.5 < xa {
        c += 1.0;
    }
    while c < w && c + 0.5 < xb {
        mask.set(row, c as usize, true);
        c += 1.0;
    }
}
