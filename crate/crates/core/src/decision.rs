//! Rejection thresholds for the private test and the end-to-end procedure.
//!
//! Two rules are available. The asymptotic rule compares t^DP with the
//! (1−α)-quantile of χ²_d. The bootstrap rule simulates the null
//! distribution of t^DP from the private releases alone and takes its
//! empirical (1−α)-quantile, which keeps the level close to α in small
//! samples and strong-privacy regimes where the χ² quantile is far too
//! small.

use serde::{Deserialize, Serialize};

use crate::hotelling::{private_pooled_covariance, summary_noise_correction, Whitener};
use crate::mechanisms::{
    compute_summary, privatize_summaries, BoundPolicy, PrivacyBudget, PrivatizedSummary,
};
use crate::numlin::Matrix;
use crate::randkit::{chi2_quantile, laplace_unchecked, Chi2Params, MvnSampler, RngStream};
use crate::{Error, Result};

pub const DEFAULT_BOOTSTRAP_B: usize = 200;

/// Substream labels used by [`run_test`].
const PRIVATIZE_STREAM: u64 = 1;
const BOOTSTRAP_STREAM: u64 = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdKind {
    Asymptotic,
    #[default]
    Bootstrap,
}

impl std::fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ThresholdKind::Asymptotic => "asymptotic",
            ThresholdKind::Bootstrap => "bootstrap",
        })
    }
}

impl std::str::FromStr for ThresholdKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asymptotic" => Ok(ThresholdKind::Asymptotic),
            "bootstrap" => Ok(ThresholdKind::Bootstrap),
            other => Err(Error::invalid(format!("unknown threshold kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    /// Total budget; `f64::INFINITY` disables privatization (testing only).
    pub epsilon: f64,
    pub bound_m: f64,
    pub bootstrap_b: usize,
    pub threshold_kind: ThresholdKind,
    pub seed: u64,
    pub bound_policy: BoundPolicy,
}

impl TestConfig {
    /// Bootstrap test with B = 200, seed 0 and out-of-bound data rejected.
    pub fn new(alpha: f64, epsilon: f64, bound_m: f64) -> Self {
        Self {
            alpha,
            epsilon,
            bound_m,
            bootstrap_b: DEFAULT_BOOTSTRAP_B,
            threshold_kind: ThresholdKind::Bootstrap,
            seed: 0,
            bound_policy: BoundPolicy::Reject,
        }
    }

    pub fn with_kind(mut self, kind: ThresholdKind) -> Self {
        self.threshold_kind = kind;
        self
    }

    pub fn with_bootstrap_b(mut self, b: usize) -> Self {
        self.bootstrap_b = b;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_bound_policy(mut self, policy: BoundPolicy) -> Self {
        self.bound_policy = policy;
        self
    }

    pub fn budget(&self) -> Result<PrivacyBudget> {
        PrivacyBudget::from_epsilon(self.epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.bound_m > 0.0 && self.bound_m.is_finite()) {
            return Err(Error::invalid(format!(
                "bound m must be positive and finite, got {}",
                self.bound_m
            )));
        }
        self.budget()?;
        if self.threshold_kind == ThresholdKind::Bootstrap {
            order_statistic_index(self.alpha, self.bootstrap_b)?;
        }
        Ok(())
    }
}

/// 1-based index ⌊(1−α)B⌋ of the bootstrap order statistic.
///
/// Errors when the index would be 0, i.e. B < 1/(1−α).
pub fn order_statistic_index(alpha: f64, b: usize) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if b == 0 {
        return Err(Error::invalid("bootstrap B must be positive"));
    }
    // (1−α)·B is usually meant to be an integer (0.95·200); absorb the
    // representation error of α before flooring.
    let raw = (1.0 - alpha) * b as f64;
    let k = (raw + 1e-9 * raw.max(1.0)).floor() as usize;
    if k < 1 {
        return Err(Error::invalid(format!(
            "bootstrap B = {b} is too small for alpha = {alpha}: floor((1-alpha)*B) = 0"
        )));
    }
    Ok(k.min(b))
}

/// χ²_d quantile at level 1 − α.
pub fn asymptotic_threshold(alpha: f64, d: usize) -> Result<f64> {
    chi2_quantile(1.0 - alpha, Chi2Params::new(d)?)
}

/// B bootstrap replicates of t^DP under the null, sorted ascending.
///
/// Each replicate draws X̄* ∼ N(0, Σ̂_X^DP/n₁) and Ȳ* ∼ N(0, Σ̂_Y^DP/n₂),
/// adds fresh Laplace noise at the scales used for the original mean
/// releases, and whitens the difference with the same corrected pooled
/// matrix as the observed statistic. Only private releases and public
/// parameters are touched, so no budget is spent.
pub fn bootstrap_statistics(
    rng: &mut RngStream,
    ps: &PrivatizedSummary,
    b: usize,
) -> Result<Vec<f64>> {
    let whitener = Whitener::new(&private_pooled_covariance(ps)?)?;
    bootstrap_with_whitener(rng, ps, &whitener, b)
}

fn bootstrap_with_whitener(
    rng: &mut RngStream,
    ps: &PrivatizedSummary,
    whitener: &Whitener,
    b: usize,
) -> Result<Vec<f64>> {
    let d = ps.dim();
    let mvn_x = MvnSampler::new(&ps.cov_x_dp.scale(1.0 / ps.n1 as f64))?;
    let mvn_y = MvnSampler::new(&ps.cov_y_dp.scale(1.0 / ps.n2 as f64))?;
    let (lx, ly) = ps.mean_noise_scales();
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut stats = Vec::with_capacity(b);
    for _ in 0..b {
        mvn_x.sample_into(rng, &mut x);
        mvn_y.sample_into(rng, &mut y);
        if lx > 0.0 {
            x.iter_mut().for_each(|v| *v += laplace_unchecked(rng, lx));
        }
        if ly > 0.0 {
            y.iter_mut().for_each(|v| *v += laplace_unchecked(rng, ly));
        }
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        stats.push(whitener.statistic(&diff)?);
    }
    stats.sort_by(f64::total_cmp);
    Ok(stats)
}

/// Picks the ⌊(1−α)B⌋-th smallest of the replicates (1-based, clamped to [1, B]).
pub fn quantile_from_sorted(sorted: &[f64], alpha: f64) -> Result<f64> {
    let k = order_statistic_index(alpha, sorted.len())?;
    Ok(sorted[k - 1])
}

/// Bootstrap threshold q*_{1−α} for the private statistic.
pub fn bootstrap_threshold(
    rng: &mut RngStream,
    ps: &PrivatizedSummary,
    cfg: &TestConfig,
) -> Result<f64> {
    order_statistic_index(cfg.alpha, cfg.bootstrap_b)?;
    let stats = bootstrap_statistics(rng, ps, cfg.bootstrap_b)?;
    quantile_from_sorted(&stats, cfg.alpha)
}

/// Strict comparison: equality does not reject.
pub fn decide(statistic: f64, threshold: f64) -> bool {
    statistic > threshold
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// χ²_d quantile at 1 − α, reported whatever rule was used.
    pub chi2_reference: f64,
    /// Order-statistic index used by the bootstrap rule.
    pub order_index: Option<usize>,
    pub mean_noise_scale_x: f64,
    pub mean_noise_scale_y: f64,
    /// c₁ + c₂ added to the pooled diagonal.
    pub noise_correction: f64,
    pub private: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub threshold_kind: ThresholdKind,
    pub reject: bool,
    pub alpha: f64,
    pub dim: usize,
    pub n1: usize,
    pub n2: usize,
    /// None when privatization was switched off.
    pub epsilon: Option<f64>,
    pub budget: Option<PrivacyBudget>,
    pub bootstrap_b: Option<usize>,
    pub diagnostics: Diagnostics,
}

/// Threshold and decision for an existing release.
pub fn test_privatized(
    rng: &mut RngStream,
    ps: &PrivatizedSummary,
    cfg: &TestConfig,
) -> Result<TestOutcome> {
    cfg.validate()?;
    let d = ps.dim();
    let whitener = Whitener::new(&private_pooled_covariance(ps)?)?;
    let statistic = whitener.statistic_of(&ps.mean_x_dp, &ps.mean_y_dp)?;
    let chi2_reference = asymptotic_threshold(cfg.alpha, d)?;
    let (threshold, order_index) = match cfg.threshold_kind {
        ThresholdKind::Asymptotic => (chi2_reference, None),
        ThresholdKind::Bootstrap => {
            let stats = bootstrap_with_whitener(rng, ps, &whitener, cfg.bootstrap_b)?;
            let k = order_statistic_index(cfg.alpha, cfg.bootstrap_b)?;
            (stats[k - 1], Some(k))
        }
    };
    let (sx, sy) = ps.mean_noise_scales();
    let private = ps.budget.is_private();
    Ok(TestOutcome {
        statistic,
        threshold,
        threshold_kind: cfg.threshold_kind,
        reject: decide(statistic, threshold),
        alpha: cfg.alpha,
        dim: d,
        n1: ps.n1,
        n2: ps.n2,
        epsilon: private.then(|| ps.budget.epsilon_total()),
        budget: private.then_some(ps.budget),
        bootstrap_b: order_index.map(|_| cfg.bootstrap_b),
        diagnostics: Diagnostics {
            chi2_reference,
            order_index,
            mean_noise_scale_x: sx,
            mean_noise_scale_y: sy,
            noise_correction: summary_noise_correction(ps).total(),
            private,
        },
    })
}

/// Summaries, one privatization, statistic, threshold and decision.
///
/// Privatization and the bootstrap draw from separate substreams of `rng`,
/// so the outcome depends only on `rng`'s (seed, stream) and the inputs.
pub fn run_test(
    rng: &RngStream,
    data_x: &Matrix,
    data_y: &Matrix,
    cfg: &TestConfig,
) -> Result<TestOutcome> {
    cfg.validate()?;
    if data_x.cols() != data_y.cols() {
        return Err(Error::DimensionMismatch {
            expected: data_x.cols(),
            actual: data_y.cols(),
        });
    }
    let sx = compute_summary(data_x, cfg.bound_m, cfg.bound_policy)?;
    let sy = compute_summary(data_y, cfg.bound_m, cfg.bound_policy)?;
    let mut priv_rng = rng.substream(PRIVATIZE_STREAM);
    let ps = privatize_summaries(&mut priv_rng, &sx, &sy, cfg.budget()?)?;
    let mut boot_rng = rng.substream(BOOTSTRAP_STREAM);
    test_privatized(&mut boot_rng, &ps, cfg)
}

/// [`run_test`] on the stream (cfg.seed, 0).
pub fn run_test_seeded(data_x: &Matrix, data_y: &Matrix, cfg: &TestConfig) -> Result<TestOutcome> {
    run_test(&RngStream::new(cfg.seed, 0), data_x, data_y, cfg)
}
