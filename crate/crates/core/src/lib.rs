//! SOM-assisted deep autoencoding Gaussian mixture model for unsupervised
//! anomaly detection: SOM, compression and estimation networks, training,
//! evaluation, data pipeline and experiment harness.

// Index loops mirror the math; `!(a > b)` comparisons deliberately treat NaN as failing.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(
    test,
    allow(clippy::field_reassign_with_default, clippy::type_complexity, clippy::useless_vec)
)]

pub mod compression;
pub mod config;
pub mod data;
pub mod error;
pub mod estimation;
pub mod eval;
pub mod experiment;
pub mod model_file;
pub mod numeric;
pub mod rng;
pub mod som;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
