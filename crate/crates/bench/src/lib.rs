// SPDX-License-Identifier: Apache-2.0

//! Fixtures shared by the benchmarks.

use bzshape::experiments::{generate_shape, random_contour};
use bzshape::{BinaryMask, PiecewiseContour, ShapeKind, ShapeParams};

/// A blob filling most of a `size`x`size` frame.
pub fn blob(size: usize, seed: u64) -> BinaryMask {
    generate_shape(&ShapeParams {
        kind: ShapeKind::Blob,
        width: size,
        height: size,
        seed,
        scale: 0.8,
    })
    .expect("blob generation")
}

pub fn contour_pair(size: usize, seed: u64) -> (PiecewiseContour, PiecewiseContour) {
    (
        random_contour(size, size, seed).expect("frame is non-empty"),
        random_contour(size, size, seed + 1).expect("frame is non-empty"),
    )
}

