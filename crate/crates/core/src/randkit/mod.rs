//! Seedable randomness and the distributions the private test needs:
//! Laplace and Gaussian draws, χ² distribution functions, and the rejection
//! sampler for exponential-family densities on the unit sphere.

mod bingham;
mod chi2;
mod dist;
mod stream;

pub use bingham::{sample_bingham_vector, solve_b, BinghamSampler, MAX_PROPOSALS};
pub use chi2::{chi2_cdf, chi2_quantile, chi2_sf, ln_gamma, Chi2Params};
pub use dist::{sample_laplace, sample_mvn, sample_std_normal, MvnSampler};
pub(crate) use dist::laplace_unchecked;
pub use stream::RngStream;
