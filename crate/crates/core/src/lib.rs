//! Source-receptor transport matrices from daily ocean-current fields, and
//! the exposure panels and fixed-effects regressions built on them.

// `!(x >= 0.0)` style checks are meant to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod econometrics;
pub mod error;
pub mod exposure;
pub mod geo;
pub mod grid;
pub mod pipeline;
pub mod synth;
pub mod table;
pub mod time;
pub mod transport;

pub use error::{Error, Result};
