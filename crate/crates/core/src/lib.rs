//! Differentially private two-sample comparison of multivariate means.
//!
//! The crate releases sample means through the Laplace mechanism and sample
//! covariances through an eigendecomposition-based mechanism, combines the
//! releases into a privatized Hotelling t² statistic, and calibrates the
//! rejection threshold either asymptotically (χ²) or with a parametric
//! bootstrap that only post-processes the private releases.
//!
//! Module map:
//!
//! * [`numlin`]: dense symmetric linear algebra (Jacobi eigensolver, PSD powers).
//! * [`randkit`]: reproducible RNG streams, Laplace/normal sampling, χ², and the
//!   spherical sampler used for private eigenvectors.
//! * [`mechanisms`]: privacy budget, summaries, and the private releases.
//! * [`hotelling`]: pooled covariances and the t² / private t² statistics.
//! * [`decision`]: asymptotic and bootstrap thresholds, end-to-end test.
//! * [`simbench`]: data designs and the Monte Carlo grid runner.
//!
//! The RNG is a seeded ChaCha stream. It is meant for reproducible research,
//! not for production releases, which need a cryptographically secure source
//! and floating-point-safe noise.

pub mod decision;
pub mod error;
pub mod hotelling;
pub mod mechanisms;
pub mod numlin;
pub mod randkit;
pub mod simbench;

pub use error::{Error, Result};
