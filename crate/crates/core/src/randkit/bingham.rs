use rand::Rng;

use super::dist::sample_std_normal;
use super::RngStream;
use crate::numlin::{jacobi_eigen, Matrix, SymmetricMatrix};
use crate::{Error, Result};

/// Proposals allowed before a draw is reported as stalled.
pub const MAX_PROPOSALS: u64 = 1_000_000;

/// Unique b > 0 with Σᵢ 1/(b + 2λᵢ) = 1, by bisection on (1e-12, q + 2·max λ].
///
/// Requires λᵢ ≥ 0 with min λᵢ = 0 (otherwise a positive root need not exist).
pub fn solve_b(lambdas: &[f64]) -> Result<f64> {
    if lambdas.is_empty() {
        return Err(Error::invalid("solve_b needs at least one eigenvalue"));
    }
    if lambdas.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(Error::invalid("solve_b eigenvalues must be finite and >= 0"));
    }
    let q = lambdas.len() as f64;
    if lambdas.iter().all(|&l| l == 0.0) {
        return Ok(q);
    }
    let f = |b: f64| lambdas.iter().map(|&l| 1.0 / (b + 2.0 * l)).sum::<f64>() - 1.0;
    let max_l = lambdas.iter().fold(0.0_f64, |m, &l| m.max(l));
    let mut lo = 1e-12;
    let mut hi = q + 2.0 * max_l;
    if f(lo) < 0.0 {
        return Err(Error::invalid(
            "solve_b has no positive root: smallest eigenvalue must be 0",
        ));
    }
    while hi - lo > 1e-13 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Rejection sampler for the density ∝ exp((eps_step/4)·uᵀCu) on S^{q−1}.
///
/// With A = (eps_step/4)(λ₁I − C) the target is exp(−uᵀAu). Proposals come
/// from the angular central Gaussian: z ∼ N(0, Ω⁻¹), Ω = I + 2A/b, u = z/‖z‖,
/// whose density on the sphere is ∝ (uᵀΩu)^{−q/2}. A proposal is accepted
/// with probability exp(−uᵀAu)·(uᵀΩu)^{q/2}/M, the target-to-envelope ratio
/// over its bound M = exp(−(q − b)/2)·(q/b)^{q/2}. Everything is evaluated in the
/// eigenbasis of C, which diagonalizes both A and Ω.
#[derive(Clone, Debug)]
pub struct BinghamSampler {
    eps_step: f64,
    basis: Matrix,
    a: Vec<f64>,
    omega: Vec<f64>,
    inv_sqrt_omega: Vec<f64>,
    log_m: f64,
    spread: f64,
}

impl BinghamSampler {
    pub fn new(c: &SymmetricMatrix, eps_step: f64) -> Result<Self> {
        if !(eps_step > 0.0 && eps_step.is_finite()) {
            return Err(Error::invalid(format!(
                "eps_step must be positive and finite, got {eps_step}"
            )));
        }
        let eig = jacobi_eigen(c)?;
        let q = c.dim() as f64;
        let top = eig.largest();
        let spread = top - eig.smallest();
        let a: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|&l| (0.25 * eps_step * (top - l)).max(0.0))
            .collect();
        let b = solve_b(&a)?;
        let omega: Vec<f64> = a.iter().map(|&ai| 1.0 + 2.0 * ai / b).collect();
        let inv_sqrt_omega = omega.iter().map(|o| 1.0 / o.sqrt()).collect();
        let log_m = if b == q {
            0.0
        } else {
            -(q - b) / 2.0 + 0.5 * q * (q / b).ln()
        };
        Ok(Self {
            eps_step,
            basis: eig.eigenvectors,
            a,
            omega,
            inv_sqrt_omega,
            log_m,
            spread,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// True when C is a multiple of the identity; every proposal is accepted.
    pub fn is_isotropic(&self) -> bool {
        self.a.iter().all(|&x| x == 0.0)
    }

    /// Log acceptance probability for a unit vector given in the eigenbasis.
    fn log_acceptance(&self, w: &[f64]) -> f64 {
        let q = self.dim() as f64;
        let quad_a: f64 = w.iter().zip(&self.a).map(|(x, a)| a * x * x).sum();
        let quad_omega: f64 = w.iter().zip(&self.omega).map(|(x, o)| o * x * x).sum();
        -quad_a - self.log_m + 0.5 * q * quad_omega.ln()
    }

    /// Acceptance probability for a unit vector `u` in the original basis.
    pub fn acceptance_probability(&self, u: &[f64]) -> Result<f64> {
        let w = self.basis.transpose_matvec(u)?;
        Ok(self.log_acceptance(&w).exp())
    }

    /// One accepted draw and the number of proposals it took.
    pub fn sample_counted(&self, rng: &mut RngStream) -> Result<(Vec<f64>, u64)> {
        let q = self.dim();
        let mut w = vec![0.0; q];
        for proposals in 1..=MAX_PROPOSALS {
            let mut norm2 = 0.0;
            for (wi, s) in w.iter_mut().zip(&self.inv_sqrt_omega) {
                *wi = sample_std_normal(rng) * s;
                norm2 += *wi * *wi;
            }
            if norm2 == 0.0 {
                continue;
            }
            let inv = 1.0 / norm2.sqrt();
            w.iter_mut().for_each(|x| *x *= inv);

            let accept = if self.is_isotropic() {
                true
            } else {
                let u: f64 = rng.random();
                u < self.log_acceptance(&w).exp()
            };
            if accept {
                let mut u = self.basis.matvec(&w)?;
                let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                u.iter_mut().for_each(|x| *x /= n);
                return Ok((u, proposals));
            }
        }
        Err(Error::SamplerStall {
            proposals: MAX_PROPOSALS,
            q,
            eps_step: self.eps_step,
            spread: self.spread,
        })
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<Vec<f64>> {
        self.sample_counted(rng).map(|(u, _)| u)
    }
}

/// One unit vector drawn ∝ exp((eps_step/4)·uᵀCu) on the sphere S^{q−1}.
pub fn sample_bingham_vector(
    rng: &mut RngStream,
    c: &SymmetricMatrix,
    eps_step: f64,
) -> Result<Vec<f64>> {
    BinghamSampler::new(c, eps_step)?.sample(rng)
}
