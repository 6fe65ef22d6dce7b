//! Noise-level-blind sparse denoising with randomized greedy pursuits.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod cli;
pub mod dictionary;
pub mod error;
pub mod io;
pub mod pursuit;
pub mod rng;
pub mod signal;
pub mod stopping;
pub mod structured;

pub use error::{Error, Result};
