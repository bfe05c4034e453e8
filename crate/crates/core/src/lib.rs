//! Clustering toolkit for collections of networks.
//!
//! Two pipelines cover the two data regimes:
//!
//! * **Known node correspondence** — estimate each graph's link-probability
//!   matrix ([`graphon_est`]), take pairwise Frobenius distances, and
//!   spectrally cluster the distance matrix ([`ncge`]).
//! * **No correspondence** — embed each graph by the logarithms of its
//!   normalized adjacency trace moments, build a Gaussian-type kernel over
//!   those features with a tuned bandwidth, and spectrally cluster the
//!   kernel ([`nclm`]). Graphs may have different sizes.
//!
//! [`baselines`] provides the comparison methods (top eigenvalues and a
//! six-statistic summary vector), [`eval`] the simulation/report harness,
//! and [`linalg`] the one dense symmetric eigensolver plus k-means that
//! everything spectral runs through.

#![forbid(unsafe_code)]

pub mod baselines;
pub mod error;
pub mod eval;
pub mod graphon_est;
pub mod graphs;
pub mod linalg;
pub mod ncge;
pub mod nclm;
mod rng;

pub use error::{Error, ErrorClass, Result};
