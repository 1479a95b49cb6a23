//! Differentially private releases of sample means and covariances.
//!
//! A two-sample release spends the budget ε in four parts (both means, both
//! covariances). Means go through the Laplace mechanism with per-coordinate
//! scale 2md/(n·ε_part). Covariances go through the eigendecomposition
//! mechanism [`ed_covariance`]: noisy eigenvalues plus eigenvectors drawn one
//! at a time from an exponential-mechanism density on shrinking spheres.
//!
//! Passing `f64::INFINITY` as a budget part switches noise off. That mode is
//! for testing only and [`PrivacyBudget::is_private`] reports it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numlin::{axpy, jacobi_eigen, orthonormal_complement, Matrix, SymmetricMatrix};
use crate::randkit::{laplace_unchecked, BinghamSampler, RngStream};
use crate::{Error, Result};

/// Budget value that disables noise. Never use it for a real release.
pub const PRIVACY_OFF: f64 = f64::INFINITY;

const BUDGET_SUM_TOL: f64 = 1e-12;

/// Per-release share of the privacy budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetSplit {
    pub mean_x: f64,
    pub mean_y: f64,
    pub cov_x: f64,
    pub cov_y: f64,
}

impl BudgetSplit {
    pub fn sum(&self) -> f64 {
        self.mean_x + self.mean_y + self.cov_x + self.cov_y
    }

    fn parts(&self) -> [f64; 4] {
        [self.mean_x, self.mean_y, self.cov_x, self.cov_y]
    }
}

/// Total budget ε and its split over the four releases.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    epsilon_total: f64,
    split: BudgetSplit,
}

impl PrivacyBudget {
    /// Equal split ε/4 per release.
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        let q = epsilon / 4.0;
        Ok(Self {
            epsilon_total: epsilon,
            split: BudgetSplit {
                mean_x: q,
                mean_y: q,
                cov_x: q,
                cov_y: q,
            },
        })
    }

    /// Custom split; parts must be positive and sum to `epsilon_total`.
    pub fn with_split(epsilon_total: f64, split: BudgetSplit) -> Result<Self> {
        let b = Self {
            epsilon_total,
            split,
        };
        b.audit()?;
        Ok(b)
    }

    /// Noise-free sentinel (every part infinite).
    pub fn privacy_off() -> Self {
        Self {
            epsilon_total: PRIVACY_OFF,
            split: BudgetSplit {
                mean_x: PRIVACY_OFF,
                mean_y: PRIVACY_OFF,
                cov_x: PRIVACY_OFF,
                cov_y: PRIVACY_OFF,
            },
        }
    }

    /// Budget for a user-facing ε, which may be the noise-free sentinel.
    pub fn from_epsilon(epsilon: f64) -> Result<Self> {
        if epsilon == PRIVACY_OFF {
            Ok(Self::privacy_off())
        } else {
            Self::new(epsilon)
        }
    }

    pub fn epsilon_total(&self) -> f64 {
        self.epsilon_total
    }

    pub fn split(&self) -> BudgetSplit {
        self.split
    }

    pub fn is_private(&self) -> bool {
        self.epsilon_total.is_finite()
    }

    /// Checks that every part is positive and the parts add up to ε.
    pub fn audit(&self) -> Result<()> {
        let parts = self.split.parts();
        if parts.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::invalid(format!(
                "budget parts must be positive: {parts:?}"
            )));
        }
        if !self.is_private() {
            return if parts.iter().all(|p| p.is_infinite()) {
                Ok(())
            } else {
                Err(Error::invalid("privacy-off budget must be infinite in every part"))
            };
        }
        let sum = self.split.sum();
        if (sum - self.epsilon_total).abs() > BUDGET_SUM_TOL * self.epsilon_total.max(1.0) {
            return Err(Error::invalid(format!(
                "budget parts sum to {sum}, expected {}",
                self.epsilon_total
            )));
        }
        Ok(())
    }
}

/// What to do with observations outside [−m, m].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundPolicy {
    #[default]
    Reject,
    /// Clamp each entry into [−m, m] before any statistic is computed.
    Clamp,
}

/// Non-private summary of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: Vec<f64>,
    pub cov: SymmetricMatrix,
    pub bound_m: f64,
}

impl SampleSummary {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// The four releases of a two-sample privatization plus the public
/// parameters they were calibrated with.
#[derive(Clone, Debug, PartialEq)]
pub struct PrivatizedSummary {
    pub mean_x_dp: Vec<f64>,
    pub mean_y_dp: Vec<f64>,
    pub cov_x_dp: SymmetricMatrix,
    pub cov_y_dp: SymmetricMatrix,
    pub budget: PrivacyBudget,
    pub n1: usize,
    pub n2: usize,
    pub bound_m: f64,
}

impl PrivatizedSummary {
    pub fn dim(&self) -> usize {
        self.mean_x_dp.len()
    }

    /// Laplace scales that were applied to the two means.
    pub fn mean_noise_scales(&self) -> (f64, f64) {
        let d = self.dim();
        let s = self.budget.split();
        (
            laplace_mean_scale(self.bound_m, d, self.n1, s.mean_x),
            laplace_mean_scale(self.bound_m, d, self.n2, s.mean_y),
        )
    }
}

/// Mean and unbiased covariance of an n×d data matrix bounded by `m`.
pub fn compute_summary(data: &Matrix, m: f64, policy: BoundPolicy) -> Result<SampleSummary> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::invalid(format!("bound m must be positive, got {m}")));
    }
    let n = data.rows();
    let d = data.cols();
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 observations, got {n}")));
    }
    if d == 0 {
        return Err(Error::invalid("data have no columns"));
    }

    let clamped;
    let data = match policy {
        BoundPolicy::Reject => {
            for (i, row) in data.iter_rows().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    if v.is_nan() || v.abs() > m {
                        return Err(Error::BoundViolation {
                            row: i,
                            column: j,
                            value: v,
                            bound: m,
                        });
                    }
                }
            }
            data
        }
        BoundPolicy::Clamp => {
            let mut c = data.clone();
            for v in c.as_mut_slice() {
                if v.is_nan() {
                    return Err(Error::invalid("NaN in data"));
                }
                *v = v.clamp(-m, m);
            }
            clamped = c;
            &clamped
        }
    };

    let mut mean = vec![0.0; d];
    for row in data.iter_rows() {
        axpy(1.0, row, &mut mean);
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);

    let mut acc = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for row in data.iter_rows() {
        for ((c, x), mu) in centered.iter_mut().zip(row).zip(&mean) {
            *c = x - mu;
        }
        for i in 0..d {
            let ci = centered[i];
            let dst = &mut acc[i * d + i..(i + 1) * d];
            for (a, cj) in dst.iter_mut().zip(&centered[i..]) {
                *a += ci * cj;
            }
        }
    }
    let denom = (n - 1) as f64;
    let cov = SymmetricMatrix::from_upper_fn(d, |i, j| acc[i * d + j] / denom);
    Ok(SampleSummary {
        n,
        mean,
        cov,
        bound_m: m,
    })
}

/// Per-coordinate Laplace scale 2md/(n·ε_part) for a mean release; zero when
/// privacy is off.
pub fn laplace_mean_scale(m: f64, d: usize, n: usize, eps_part: f64) -> f64 {
    if eps_part.is_infinite() {
        0.0
    } else {
        2.0 * m * d as f64 / (n as f64 * eps_part)
    }
}

fn check_release_params(n: usize, m: f64, eps_part: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::invalid(format!("bound m must be positive, got {m}")));
    }
    if !(eps_part > 0.0) {
        return Err(Error::invalid(format!(
            "budget part must be positive, got {eps_part}"
        )));
    }
    Ok(())
}

/// Laplace mechanism for a sample mean: `mean + Z`, Z_k i.i.d.
/// Lap(0, 2md/(n·eps_part)).
pub fn privatize_mean(
    rng: &mut RngStream,
    mean: &[f64],
    n: usize,
    m: f64,
    eps_part: f64,
) -> Result<Vec<f64>> {
    check_release_params(n, m, eps_part)?;
    for (k, &v) in mean.iter().enumerate() {
        if !(v.abs() <= m) {
            return Err(Error::MeanOutOfBounds {
                coordinate: k,
                value: v,
                bound: m,
            });
        }
    }
    let scale = laplace_mean_scale(m, mean.len(), n, eps_part);
    if scale == 0.0 {
        return Ok(mean.to_vec());
    }
    Ok(mean
        .iter()
        .map(|&v| v + laplace_unchecked(rng, scale))
        .collect())
}

/// Eigendecomposition mechanism for a sample covariance.
///
/// The input is rescaled to C₁ = n·Ĉ/(d m²). Its eigenvalues receive
/// Laplace noise of scale 2/ε_step (ε_step = ε_part/(d+1)) and are folded
/// with |·|. Eigenvectors are drawn one per step: step i samples a unit
/// vector in the (d−i+1)-dimensional complement of the previous picks with
/// density ∝ exp((ε_step/4)·uᵀC_iu), C_i being C₁ compressed onto that
/// complement; the last direction is the remaining one with a random sign.
/// The release Σ λ̄ᵢ v̄ᵢv̄ᵢᵀ is scaled back by d m²/n.
///
/// For d = 1 there is no direction to choose and the whole part goes to the
/// single eigenvalue.
pub fn ed_covariance(
    rng: &mut RngStream,
    cov_hat: &SymmetricMatrix,
    n: usize,
    m: f64,
    eps_part: f64,
) -> Result<SymmetricMatrix> {
    check_release_params(n, m, eps_part)?;
    let d = cov_hat.dim();
    if eps_part.is_infinite() {
        return Ok(jacobi_eigen(cov_hat)?.recompose());
    }

    let scale = n as f64 / (d as f64 * m * m);
    let c1 = cov_hat.scale(scale);
    let eig = jacobi_eigen(&c1)?;
    if d == 1 {
        let noisy = (eig.eigenvalues[0] + laplace_unchecked(rng, 2.0 / eps_part)).abs();
        return Ok(SymmetricMatrix::diagonal(&[noisy / scale]));
    }

    let eps_step = eps_part / (d + 1) as f64;
    let lambdas: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| (l + laplace_unchecked(rng, 2.0 / eps_step)).abs())
        .collect();

    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut basis = SymmetricMatrix::identity(d).to_matrix();
    let mut compressed = c1.clone();
    for _ in 0..d - 1 {
        let u = BinghamSampler::new(&compressed, eps_step)?.sample(rng)?;
        directions.push(basis.transpose_matvec(&u)?);
        basis = orthonormal_complement(&directions, d)?;
        compressed = c1.congruence(&basis)?;
    }
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    directions.push(basis.row(0).iter().map(|x| sign * x).collect());

    let unscale = 1.0 / scale;
    Ok(SymmetricMatrix::from_upper_fn(d, |i, j| {
        lambdas
            .iter()
            .zip(&directions)
            .map(|(l, v)| l * v[i] * v[j])
            .sum::<f64>()
            * unscale
    }))
}

/// Privatizes both summaries: two Laplace mean releases and two ED
/// covariance releases, each with its own budget part.
pub fn privatize_summaries(
    rng: &mut RngStream,
    sx: &SampleSummary,
    sy: &SampleSummary,
    budget: PrivacyBudget,
) -> Result<PrivatizedSummary> {
    budget.audit()?;
    if sx.dim() != sy.dim() {
        return Err(Error::DimensionMismatch {
            expected: sx.dim(),
            actual: sy.dim(),
        });
    }
    if sx.bound_m != sy.bound_m {
        return Err(Error::invalid(format!(
            "both samples must share the bound m ({} vs {})",
            sx.bound_m, sy.bound_m
        )));
    }
    let m = sx.bound_m;
    let s = budget.split();
    let mean_x_dp = privatize_mean(rng, &sx.mean, sx.n, m, s.mean_x)?;
    let mean_y_dp = privatize_mean(rng, &sy.mean, sy.n, m, s.mean_y)?;
    let cov_x_dp = ed_covariance(rng, &sx.cov, sx.n, m, s.cov_x)?;
    let cov_y_dp = ed_covariance(rng, &sy.cov, sy.n, m, s.cov_y)?;
    Ok(PrivatizedSummary {
        mean_x_dp,
        mean_y_dp,
        cov_x_dp,
        cov_y_dp,
        budget,
        n1: sx.n,
        n2: sy.n,
        bound_m: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(mean: Vec<f64>, cov: SymmetricMatrix, n: usize, m: f64) -> SampleSummary {
        SampleSummary {
            n,
            mean,
            cov,
            bound_m: m,
        }
    }

    #[test]
    fn budget_split_is_exact() {
        for eps in [0.1, 0.5, 1.0, 5.0, 0.3, 7.77] {
            let b = PrivacyBudget::new(eps).unwrap();
            assert_eq!(b.split().sum(), eps);
            b.audit().unwrap();
        }
    }

    #[test]
    fn budget_rejects_bad_values() {
        assert!(PrivacyBudget::new(0.0).is_err());
        assert!(PrivacyBudget::new(-1.0).is_err());
        assert!(PrivacyBudget::new(f64::INFINITY).is_err());
        let bad = BudgetSplit {
            mean_x: 0.5,
            mean_y: 0.5,
            cov_x: 0.5,
            cov_y: 0.4,
        };
        assert!(PrivacyBudget::with_split(2.0, bad).is_err());
        let zero_part = BudgetSplit {
            mean_x: 1.0,
            mean_y: 0.0,
            cov_x: 0.5,
            cov_y: 0.5,
        };
        assert!(PrivacyBudget::with_split(2.0, zero_part).is_err());
    }

    #[test]
    fn privacy_off_budget_audits() {
        let b = PrivacyBudget::privacy_off();
        assert!(!b.is_private());
        b.audit().unwrap();
    }

    #[test]
    fn summary_of_identical_rows() {
        let data = Matrix::from_rows(&[[0.5, -0.25], [0.5, -0.25]]).unwrap();
        let s = compute_summary(&data, 1.0, BoundPolicy::Reject).unwrap();
        assert_eq!(s.mean, vec![0.5, -0.25]);
        assert_eq!(s.cov, SymmetricMatrix::zeros(2));
    }

    #[test]
    fn summary_one_dimensional() {
        let data = Matrix::from_rows(&[[-1.0], [1.0]]).unwrap();
        let s = compute_summary(&data, 1.0, BoundPolicy::Reject).unwrap();
        assert_eq!(s.mean, vec![0.0]);
        assert_eq!(s.cov.get(0, 0), 2.0);
    }

    #[test]
    fn summary_errors() {
        let one = Matrix::from_rows(&[[0.0]]).unwrap();
        assert!(compute_summary(&one, 1.0, BoundPolicy::Reject).is_err());
        let out = Matrix::from_rows(&[[0.0], [1.5]]).unwrap();
        assert!(matches!(
            compute_summary(&out, 1.0, BoundPolicy::Reject),
            Err(Error::BoundViolation { row: 1, column: 0, .. })
        ));
        let clamped = compute_summary(&out, 1.0, BoundPolicy::Clamp).unwrap();
        assert_eq!(clamped.mean, vec![0.5]);
    }

    #[test]
    fn mean_scale_arithmetic() {
        // m = 1, d = 1, n = 500, ε = 4 → ε/4 = 1
        assert!((laplace_mean_scale(1.0, 1, 500, 1.0) - 0.004).abs() < 1e-18);
        assert_eq!(laplace_mean_scale(1.0, 1, 500, PRIVACY_OFF), 0.0);
    }

    #[test]
    fn mean_privacy_off_is_identity() {
        let mut rng = RngStream::new(0, 0);
        let mean = vec![0.1, -0.7, 0.3];
        assert_eq!(
            privatize_mean(&mut rng, &mean, 10, 1.0, PRIVACY_OFF).unwrap(),
            mean
        );
    }

    #[test]
    fn mean_bound_violation() {
        let mut rng = RngStream::new(0, 0);
        assert!(matches!(
            privatize_mean(&mut rng, &[0.0, 2.0], 10, 1.0, 1.0),
            Err(Error::MeanOutOfBounds { coordinate: 1, .. })
        ));
    }

    #[test]
    fn mean_noise_variance() {
        let mut rng = RngStream::new(77, 0);
        let (m, n, eps) = (1.0, 50, 0.5);
        let mean = vec![0.2, -0.1];
        let scale = laplace_mean_scale(m, 2, n, eps);
        let reps = 100_000;
        let mut sq = [0.0; 2];
        for _ in 0..reps {
            let out = privatize_mean(&mut rng, &mean, n, m, eps).unwrap();
            for k in 0..2 {
                sq[k] += (out[k] - mean[k]).powi(2);
            }
        }
        let target = 2.0 * scale * scale;
        for s in sq {
            let v = s / reps as f64;
            assert!((v - target).abs() <= 0.05 * target, "{v} vs {target}");
        }
    }

    #[test]
    fn ed_privacy_off_recomposes_input() {
        let mut rng = RngStream::new(1, 0);
        let cov = SymmetricMatrix::from_rows(&[[1.0, 0.3, 0.0], [0.3, 0.8, -0.2], [0.0, -0.2, 0.5]])
            .unwrap();
        let out = ed_covariance(&mut rng, &cov, 100, 2.0, PRIVACY_OFF).unwrap();
        assert!(out.sub(&cov).unwrap().frobenius_norm() <= 1e-8);
    }

    #[test]
    fn ed_one_dimensional_is_folded_laplace() {
        let mut rng = RngStream::new(2, 0);
        let var = 0.2;
        let cov = SymmetricMatrix::diagonal(&[var]);
        let reps = 100_000;
        let mut outs: Vec<f64> = (0..reps)
            .map(|_| ed_covariance(&mut rng, &cov, 500, 1.0, 1.0).unwrap().get(0, 0))
            .collect();
        assert!(outs.iter().all(|&v| v >= 0.0));
        outs.sort_by(f64::total_cmp);
        let median = outs[reps / 2];
        // noise scale (m²/n)·(2/ε) = 0.004; Laplace median error ≈ b/√reps
        assert!((median - var).abs() <= 0.004 * 5.0 / (reps as f64).sqrt() * 3.0);
    }

    #[test]
    fn ed_outputs_are_psd_and_symmetric() {
        use rand::Rng;
        let mut gen = RngStream::new(3, 0);
        for case in 0..10_000u64 {
            let d = 1 + (case % 4) as usize;
            let raw = SymmetricMatrix::from_upper_fn(d, |_, _| gen.random_range(-1.0..1.0));
            let cov = raw.matmul(&raw.to_matrix()).unwrap();
            let cov = SymmetricMatrix::new(d, cov.as_slice().to_vec()).unwrap();
            let n = 10 + (case % 1000) as usize;
            let eps = [0.01, 0.3, 2.0, 50.0][(case / 4 % 4) as usize];
            let mut rng = RngStream::new(4, case);
            let out = ed_covariance(&mut rng, &cov, n, 1.5, eps).unwrap();
            assert_eq!(out.asymmetry(), 0.0);
            let eig = jacobi_eigen(&out).unwrap();
            assert!(
                eig.smallest() >= -1e-12 * (1.0 + out.frobenius_norm()),
                "case {case}: {}",
                eig.smallest()
            );
        }
    }

    #[test]
    fn ed_is_deterministic() {
        let cov = SymmetricMatrix::from_rows(&[[1.0, 0.2], [0.2, 0.5]]).unwrap();
        let a = ed_covariance(&mut RngStream::new(5, 5), &cov, 100, 1.0, 1.0).unwrap();
        let b = ed_covariance(&mut RngStream::new(5, 5), &cov, 100, 1.0, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn privatize_summaries_checks_inputs() {
        let mut rng = RngStream::new(6, 0);
        let sx = summary(vec![0.0], SymmetricMatrix::identity(1), 10, 1.0);
        let sy2 = summary(vec![0.0, 0.0], SymmetricMatrix::identity(2), 10, 1.0);
        let budget = PrivacyBudget::new(1.0).unwrap();
        assert!(privatize_summaries(&mut rng, &sx, &sy2, budget).is_err());
        let sy_other_m = summary(vec![0.0], SymmetricMatrix::identity(1), 10, 2.0);
        assert!(privatize_summaries(&mut rng, &sx, &sy_other_m, budget).is_err());
    }

    #[test]
    fn privatize_summaries_privacy_off_is_raw() {
        let mut rng = RngStream::new(7, 0);
        let sx = summary(
            vec![0.1, 0.2],
            SymmetricMatrix::from_rows(&[[1.0, 0.1], [0.1, 0.4]]).unwrap(),
            20,
            1.0,
        );
        let sy = summary(vec![-0.1, 0.0], SymmetricMatrix::identity(2), 30, 1.0);
        let ps = privatize_summaries(&mut rng, &sx, &sy, PrivacyBudget::privacy_off()).unwrap();
        assert_eq!(ps.mean_x_dp, sx.mean);
        assert_eq!(ps.mean_y_dp, sy.mean);
        assert!(ps.cov_x_dp.sub(&sx.cov).unwrap().frobenius_norm() < 1e-12);
        assert!(ps.cov_y_dp.sub(&sy.cov).unwrap().frobenius_norm() < 1e-12);
        assert_eq!((ps.n1, ps.n2), (20, 30));
    }
}
