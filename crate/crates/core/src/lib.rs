// SPDX-License-Identifier: Apache-2.0

//! Shape codec for binary segmentation masks.
//!
//! A mask's outer boundary is split at its four extreme points and each arc
//! is fitted with a Bézier curve by linear least squares, giving a closed
//! piecewise contour (40 reals at degree 5). The crate also provides the
//! differentiable point decoder used for training losses, segmentation
//! metrics, and the synthetic experiments used to study the representation.

pub mod bezier;
pub mod contour;
pub mod decoder;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod mask;
pub mod metrics;
pub mod point;
pub mod seed;

pub use bezier::BezierCurve;
pub use contour::PiecewiseContour;
pub use decoder::{LossValue, ParamSamples};
pub use error::{Error, Result};
pub use experiments::{SensitivityCurve, ShapeKind, ShapeParams};
pub use fit::{encode_mask, ExtremePoints, FitReport};
pub use mask::{BinaryMask, BoundaryTrace, Connectivity};
pub use metrics::{ConfusionCounts, DatasetSummary, MetricsReport};
pub use point::Point2;
