// SPDX-License-Identifier: Apache-2.0

//! Batch front end for the `bzshape` codec. The binary parses arguments
//! and hands off to [`commands`].

pub mod commands;
pub mod io;

pub use commands::{Failure, Outcome};
