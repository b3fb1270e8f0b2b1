//! Time-uniform (anytime-valid) concentration boundaries for iterative
//! stochastic algorithms, the algorithms themselves, and a Monte Carlo
//! harness that checks coverage empirically.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod boundaries;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod recursion;
pub mod rng;
pub mod schedule;
pub mod stitch;
pub mod streams;
pub mod trace;

pub use error::{Error, Result};
