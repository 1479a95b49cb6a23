//! Pooled covariances and Hotelling-type statistics.
//!
//! Statistics are computed as n₁n₂/(n₁+n₂)·‖S^{−1/2}(x̄ − ȳ)‖², which is
//! nonnegative by construction.

use serde::{Deserialize, Serialize};

use crate::mechanisms::{laplace_mean_scale, PrivatizedSummary};
use crate::numlin::{inverse_sqrt_from_eigen, jacobi_eigen, SymmetricMatrix, DEFAULT_EIGEN_FLOOR};
use crate::{Error, Result};

/// Relative eigenvalue threshold below which a non-private pooled matrix is
/// treated as singular.
const SINGULAR_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PooledKind {
    /// ((n₁−1)Σ̂_X + (n₂−1)Σ̂_Y)/(n₁+n₂−2)
    Classical,
    /// (n₂Σ̂_X + n₁Σ̂_Y)/(n₁+n₂), for unequal covariances.
    Reweighted,
    /// Classical pooling of private covariances plus the mean-noise
    /// correction on the diagonal.
    PrivateCorrected,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PooledCovariance {
    pub matrix: SymmetricMatrix,
    pub kind: PooledKind,
    pub n1: usize,
    pub n2: usize,
}

/// Variance added to each mean coordinate by the Laplace releases,
/// cᵢ = 2·(2md/(nᵢ·ε/4))².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseCorrection {
    pub c1: f64,
    pub c2: f64,
}

impl NoiseCorrection {
    pub fn total(&self) -> f64 {
        self.c1 + self.c2
    }

    fn from_scales(s1: f64, s2: f64) -> Self {
        Self {
            c1: 2.0 * s1 * s1,
            c2: 2.0 * s2 * s2,
        }
    }
}

pub fn pooled_covariance(
    sx_cov: &SymmetricMatrix,
    sy_cov: &SymmetricMatrix,
    n1: usize,
    n2: usize,
    kind: PooledKind,
) -> Result<PooledCovariance> {
    if sx_cov.dim() != sy_cov.dim() {
        return Err(Error::DimensionMismatch {
            expected: sx_cov.dim(),
            actual: sy_cov.dim(),
        });
    }
    if n1 == 0 || n2 == 0 {
        return Err(Error::invalid("sample sizes must be positive"));
    }
    let (f1, f2) = (n1 as f64, n2 as f64);
    let matrix = match kind {
        PooledKind::Classical => {
            if n1 + n2 < 3 {
                return Err(Error::invalid("classical pooling needs n1 + n2 >= 3"));
            }
            let denom = f1 + f2 - 2.0;
            sx_cov.lin_comb((f1 - 1.0) / denom, sy_cov, (f2 - 1.0) / denom)?
        }
        PooledKind::Reweighted => sx_cov.lin_comb(f2 / (f1 + f2), sy_cov, f1 / (f1 + f2))?,
        PooledKind::PrivateCorrected => {
            return Err(Error::invalid(
                "private-corrected pooling is built from a PrivatizedSummary",
            ))
        }
    };
    Ok(PooledCovariance {
        matrix,
        kind,
        n1,
        n2,
    })
}

pub fn noise_correction(m: f64, d: usize, n1: usize, n2: usize, eps: f64) -> Result<NoiseCorrection> {
    if !(m > 0.0) || d == 0 || n1 == 0 || n2 == 0 || !(eps > 0.0) {
        return Err(Error::invalid(
            "noise correction needs positive m, d, n1, n2 and epsilon",
        ));
    }
    let part = eps / 4.0;
    Ok(NoiseCorrection::from_scales(
        laplace_mean_scale(m, d, n1, part),
        laplace_mean_scale(m, d, n2, part),
    ))
}

/// Correction matching the mean budgets actually recorded in `ps`.
pub fn summary_noise_correction(ps: &PrivatizedSummary) -> NoiseCorrection {
    let (s1, s2) = ps.mean_noise_scales();
    NoiseCorrection::from_scales(s1, s2)
}

/// Classical pooling of the private covariances plus diag(c₁ + c₂).
///
/// With privatization off the correction vanishes and the result is the
/// classical pooled matrix, tagged as such so that singularity is reported.
pub fn private_pooled_covariance(ps: &PrivatizedSummary) -> Result<PooledCovariance> {
    let pooled = pooled_covariance(
        &ps.cov_x_dp,
        &ps.cov_y_dp,
        ps.n1,
        ps.n2,
        PooledKind::Classical,
    )?;
    let c = summary_noise_correction(ps).total();
    if c == 0.0 {
        return Ok(pooled);
    }
    Ok(PooledCovariance {
        matrix: pooled.matrix.shift_diagonal(c),
        kind: PooledKind::PrivateCorrected,
        n1: ps.n1,
        n2: ps.n2,
    })
}

/// Precomputed S^{−1/2} and the n₁n₂/(n₁+n₂) factor, so that repeated
/// statistics against one pooled matrix cost O(d²) each.
#[derive(Clone, Debug)]
pub struct Whitener {
    inv_sqrt: SymmetricMatrix,
    factor: f64,
}

impl Whitener {
    pub fn new(pooled: &PooledCovariance) -> Result<Self> {
        let eig = jacobi_eigen(&pooled.matrix)?;
        let (top, bottom) = (eig.largest(), eig.smallest());
        if pooled.kind != PooledKind::PrivateCorrected
            && (top <= 0.0 || bottom <= SINGULAR_RTOL * top)
        {
            return Err(Error::Singular {
                min_eigenvalue: bottom,
            });
        }
        let inv_sqrt = inverse_sqrt_from_eigen(&eig, &pooled.matrix, DEFAULT_EIGEN_FLOOR)?;
        let (f1, f2) = (pooled.n1 as f64, pooled.n2 as f64);
        Ok(Self {
            inv_sqrt,
            factor: f1 * f2 / (f1 + f2),
        })
    }

    pub fn dim(&self) -> usize {
        self.inv_sqrt.dim()
    }

    /// factor·‖S^{−1/2}·diff‖².
    pub fn statistic(&self, diff: &[f64]) -> Result<f64> {
        let w = self.inv_sqrt.matvec(diff)?;
        Ok(self.factor * w.iter().map(|x| x * x).sum::<f64>())
    }

    pub fn statistic_of(&self, mean_x: &[f64], mean_y: &[f64]) -> Result<f64> {
        if mean_x.len() != mean_y.len() {
            return Err(Error::DimensionMismatch {
                expected: mean_x.len(),
                actual: mean_y.len(),
            });
        }
        let diff: Vec<f64> = mean_x.iter().zip(mean_y).map(|(a, b)| a - b).collect();
        self.statistic(&diff)
    }
}

/// Hotelling's t² = n₁n₂/(n₁+n₂)·(x̄ − ȳ)ᵀS⁻¹(x̄ − ȳ).
pub fn t2_statistic(
    mean_x: &[f64],
    mean_y: &[f64],
    pooled: &PooledCovariance,
    n1: usize,
    n2: usize,
) -> Result<f64> {
    if n1 != pooled.n1 || n2 != pooled.n2 {
        return Err(Error::invalid(format!(
            "sample sizes ({n1}, {n2}) differ from the pooled matrix's ({}, {})",
            pooled.n1, pooled.n2
        )));
    }
    Whitener::new(pooled)?.statistic_of(mean_x, mean_y)
}

/// The privatized statistic t^DP built from the four releases.
pub fn t_dp_statistic(ps: &PrivatizedSummary) -> Result<f64> {
    let pooled = private_pooled_covariance(ps)?;
    t2_statistic(&ps.mean_x_dp, &ps.mean_y_dp, &pooled, ps.n1, ps.n2)
}
