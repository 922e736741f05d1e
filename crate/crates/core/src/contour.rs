// SPDX-License-Identifier: Apache-2.0

//! Closed four-arc piecewise Bézier contours, their dense decoding, the flat
//! 40-value regression layout, and the JSON interchange format.

use serde::{Deserialize, Serialize};

use crate::bezier::{uniform_ts, BezierCurve};
use crate::error::{invalid, Error, Result};
use crate::mask::{rasterize_polygon_inclusive, BinaryMask};
use crate::point::Point2;

/// Degree of the flat regression layout.
pub const LAYOUT_DEGREE: usize = 5;
/// Length of the flat regression vector: 4 junctions + 16 interior points.
pub const LAYOUT_LEN: usize = 40;

/// Four Bézier segments chained at shared junctions. Segment `k` runs from
/// junction `k` to junction `(k + 1) % 4`; junctions are the top, leftmost,
/// bottom and rightmost extreme points in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseContour {
    segments: [BezierCurve; 4],
    width: usize,
    height: usize,
}

impl PiecewiseContour {
    pub fn new(segments: [BezierCurve; 4], width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid(format!("contour frame {width}x{height} must be positive")));
        }
        check_chain(&segments)?;
        Ok(Self {
            segments,
            width,
            height,
        })
    }

    /// Builds a contour from its junctions and per-segment interior points.
    pub fn from_parts(
        junctions: [Point2; 4],
        interiors: [Vec<Point2>; 4],
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let mut segs = Vec::with_capacity(4);
        for (k, inner) in interiors.into_iter().enumerate() {
            let mut pts = Vec::with_capacity(inner.len() + 2);
            pts.push(junctions[k]);
            pts.extend(inner);
            pts.push(junctions[(k + 1) % 4]);
            segs.push(BezierCurve::new(pts)?);
        }
        let segments: [BezierCurve; 4] = segs.try_into().expect("four segments");
        Self::new(segments, width, height)
    }

    pub fn segments(&self) -> &[BezierCurve; 4] {
        &self.segments
    }

    pub fn degree(&self) -> usize {
        self.segments[0].degree()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Junction points: top, leftmost, bottom, rightmost.
    pub fn junctions(&self) -> [Point2; 4] {
        std::array::from_fn(|k| self.segments[k].first())
    }

    /// Interior control points of each segment.
    pub fn interiors(&self) -> [Vec<Point2>; 4] {
        std::array::from_fn(|k| {
            let cp = self.segments[k].control_points();
            cp[1..cp.len() - 1].to_vec()
        })
    }

    /// Applies `f` to every junction once and to every interior point,
    /// keeping the junctions shared.
    pub fn map_points(&self, mut f: impl FnMut(Point2) -> Point2) -> Result<Self> {
        let junctions = self.junctions().map(&mut f);
        let interiors = self
            .interiors()
            .map(|inner| inner.into_iter().map(&mut f).collect::<Vec<_>>());
        Self::from_parts(junctions, interiors, self.width, self.height)
    }

    /// Rescales control points from this frame into a `width x height` frame.
    pub fn rescaled(&self, width: usize, height: usize) -> Result<Self> {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        let scaled = self.map_points(|p| Point2::new(p.x * sx, p.y * sy))?;
        Self::new(scaled.segments, width, height)
    }

    /// Closed polygon sampled at `samples_per_segment` uniform parameters per
    /// segment, with the duplicated junction samples dropped.
    pub fn decode(&self, samples_per_segment: usize) -> Result<Vec<Point2>> {
        if samples_per_segment < 2 {
            return Err(invalid(format!(
                "need at least 2 samples per segment, got {samples_per_segment}"
            )));
        }
        check_chain(&self.segments)?;
        let ts = uniform_ts(samples_per_segment);
        let mut out = Vec::with_capacity(4 * (samples_per_segment - 1));
        for seg in &self.segments {
            let pts = seg.sample(&ts[..samples_per_segment - 1])?;
            out.extend(pts);
        }
        Ok(out)
    }

    /// Decodes and fills the contour in its own frame, keeping pixels on
    /// the outline (see [`rasterize_polygon_inclusive`]).
    pub fn rasterize(&self, samples_per_segment: usize) -> Result<BinaryMask> {
        rasterize_polygon_inclusive(&self.decode(samples_per_segment)?, self.width, self.height)
    }

    /// The flat regression vector: the four junctions, then the interior
    /// points in segment order, each as `x, y`.
    pub fn flatten(&self) -> Result<Vec<f64>> {
        if self.degree() != LAYOUT_DEGREE {
            return Err(Error::UnsupportedLayout(format!(
                "flat layout needs degree {LAYOUT_DEGREE}, contour has degree {}",
                self.degree()
            )));
        }
        let mut v = Vec::with_capacity(LAYOUT_LEN);
        for p in self.junctions() {
            v.extend([p.x, p.y]);
        }
        for inner in self.interiors() {
            for p in inner {
                v.extend([p.x, p.y]);
            }
        }
        Ok(v)
    }

    pub fn unflatten(values: &[f64], width: usize, height: usize) -> Result<Self> {
        if values.len() != LAYOUT_LEN {
            return Err(Error::UnsupportedLayout(format!(
                "flat layout has {LAYOUT_LEN} values, got {}",
                values.len()
            )));
        }
        let pt = |i: usize| Point2::new(values[2 * i], values[2 * i + 1]);
        let junctions = std::array::from_fn(pt);
        let per = LAYOUT_DEGREE - 1;
        let interiors = std::array::from_fn(|k| (0..per).map(|j| pt(4 + k * per + j)).collect());
        Self::from_parts(junctions, interiors, width, height)
    }

    pub fn to_json(&self) -> String {
        let doc = ContourDoc {
            version: 1,
            width: self.width,
            height: self.height,
            degree: self.degree(),
            segments: self
                .segments
                .iter()
                .map(|s| SegmentDoc {
                    control_points: s.control_points().iter().map(|p| [p.x, p.y]).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("contour serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ContourDoc =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("contour JSON: {e}")))?;
        if doc.version != 1 {
            return Err(Error::Format(format!("unsupported contour version {}", doc.version)));
        }
        if doc.segments.len() != 4 {
            return Err(Error::Format(format!(
                "contour needs 4 segments, found {}",
                doc.segments.len()
            )));
        }
        let mut segs = Vec::with_capacity(4);
        for s in doc.segments {
            if s.control_points.len() != doc.degree + 1 {
                return Err(Error::Format(format!(
                    "segment has {} control points, degree {} needs {}",
                    s.control_points.len(),
                    doc.degree,
                    doc.degree + 1
                )));
            }
            let pts = s.control_points.iter().map(|&[x, y]| Point2::new(x, y)).collect();
            segs.push(BezierCurve::new(pts).map_err(|e| Error::Format(e.to_string()))?);
        }
        let segments: [BezierCurve; 4] = segs.try_into().expect("four segments");
        Self::new(segments, doc.width, doc.height).map_err(|e| Error::Format(e.to_string()))
    }
}

fn check_chain(segments: &[BezierCurve; 4]) -> Result<()> {
    let degree = segments[0].degree();
    for k in 0..4 {
        if segments[k].degree() != degree {
            return Err(Error::InvariantViolation(format!(
                "segment {k} has degree {}, expected {degree}",
                segments[k].degree()
            )));
        }
        let next = &segments[(k + 1) % 4];
        if segments[k].last() != next.first() {
            return Err(Error::InvariantViolation(format!(
                "segment {k} ends at {:?} but segment {} starts at {:?}",
                segments[k].last(),
                (k + 1) % 4,
                next.first()
            )));
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContourDoc {
    version: u32,
    width: usize,
    height: usize,
    degree: usize,
    segments: Vec<SegmentDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentDoc {
    control_points: Vec<[f64; 2]>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diamond(degree: usize) -> PiecewiseContour {
        let j = [(10.0, 2.0), (2.0, 10.0), (10.0, 18.0), (18.0, 10.0)].map(Point2::from);
        let interiors = std::array::from_fn(|k| {
            let (a, b) = (j[k], j[(k + 1) % 4]);
            (1..degree).map(|i| a.lerp(b, i as f64 / degree as f64)).collect()
        });
        PiecewiseContour::from_parts(j, interiors, 20, 20).unwrap()
    }

    #[test]
    fn two_samples_give_junction_quad() {
        let c = diamond(5);
        assert_eq!(c.decode(2).unwrap(), c.junctions().to_vec());
        assert_eq!(c.decode(128).unwrap().len(), 4 * 127);
        assert!(c.decode(1).is_err());
    }

    #[test]
    fn broken_chain_is_rejected() {
        let c = diamond(5);
        let mut segs = c.segments().clone();
        segs[2] = segs[2].map_points(|p| p + Point2::new(0.5, 0.0)).unwrap();
        assert!(matches!(
            PiecewiseContour::new(segs, 20, 20),
            Err(Error::InvariantViolation(_))
        ));
    }

    #[test]
    fn flat_layout() {
        let c = diamond(5);
        let v = c.flatten().unwrap();
        assert_eq!(v.len(), 40);
        assert_eq!((v[0], v[1]), (10.0, 2.0));
        assert_eq!((v[6], v[7]), (18.0, 10.0));
        let first_interior = c.segments()[0].control_points()[1];
        assert_eq!((v[8], v[9]), (first_interior.x, first_interior.y));
        assert_eq!(PiecewiseContour::unflatten(&v, 20, 20).unwrap(), c);
        assert!(matches!(diamond(3).flatten(), Err(Error::UnsupportedLayout(_))));
        assert!(matches!(
            PiecewiseContour::unflatten(&v[..39], 20, 20),
            Err(Error::UnsupportedLayout(_))
        ));
    }

    #[test]
    fn json_schema_checks() {
        let c = diamond(5);
        let text = c.to_json();
        assert!(text.contains("\"version\": 1"));
        assert_eq!(PiecewiseContour::from_json(&text).unwrap(), c);

        let broken = text.replacen("10.0", "10.5", 1);
        assert!(matches!(PiecewiseContour::from_json(&broken), Err(Error::Format(_))));
        let wrong_version = text.replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(PiecewiseContour::from_json(&wrong_version), Err(Error::Format(_))));
        let wrong_degree = text.replace("\"degree\": 5", "\"degree\": 4");
        assert!(matches!(PiecewiseContour::from_json(&wrong_degree), Err(Error::Format(_))));
        assert!(PiecewiseContour::from_json("{}").is_err());
    }

    #[test]
    fn rescale_moves_points_proportionally() {
        let c = diamond(5);
        let big = c.rescaled(40, 10).unwrap();
        assert_eq!((big.width(), big.height()), (40, 10));
        assert_eq!(big.junctions()[0], Point2::new(20.0, 1.0));
    }

    proptest! {
        #[test]
        fn flatten_round_trip(values in prop::collection::vec(-50.0..300.0f64, 40)) {
            let c = PiecewiseContour::unflatten(&values, 256, 256).unwrap();
            prop_assert_eq!(c.flatten().unwrap(), values);
        }

        #[test]
        fn json_round_trip_is_lossless(values in prop::collection::vec(-50.0..300.0f64, 40)) {
            let c = PiecewiseContour::unflatten(&values, 256, 256).unwrap();
            prop_assert_eq!(PiecewiseContour::from_json(&c.to_json()).unwrap(), c);
        }
    }
}
