//! Gaussian mixture clustering laboratory.
//!
//! Classical EM, its randomised δ-EM variant, Lloyd and δ-k-means, a
//! channel-level emulation of the quantum EM algorithm's error sources, the
//! runtime cost model of that algorithm, and a benchmark harness reproducing
//! the two-cluster comparison experiments.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below name the common instantiations.

// `!(x > 0)` also rejects NaN; index loops read better in the matrix code.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod cost;
pub mod delta_em;
pub mod distance;
pub mod em;
pub mod error;
pub mod io;
pub mod kmeans;
pub mod linalg;
pub mod model;
pub mod quantum;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{Dataset, GmmParams, HardAssignment, Responsibilities};
pub use scalar::Scalar;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type GmmParams64 = GmmParams<f64>;
pub type GmmParams32 = GmmParams<f32>;
pub type Responsibilities64 = Responsibilities<f64>;
pub type FitResult64 = em::FitResult<f64>;
pub type FitResult32 = em::FitResult<f32>;
