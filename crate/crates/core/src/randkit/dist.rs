use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;

use super::RngStream;
use crate::numlin::{sqrt_psd, SymmetricMatrix};
use crate::{Error, Result};

/// One draw from the centered Laplace distribution with scale `scale`
/// (density e^{−|x|/b}/(2b), variance 2b²), by inverse CDF.
pub fn sample_laplace(rng: &mut RngStream, scale: f64) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!(
            "Laplace scale must be positive and finite, got {scale}"
        )));
    }
    Ok(laplace_unchecked(rng, scale))
}

#[inline]
pub(crate) fn laplace_unchecked(rng: &mut RngStream, scale: f64) -> f64 {
    let u: f64 = rng.sample(Open01);
    if u < 0.5 {
        scale * (2.0 * u).ln()
    } else {
        -scale * (2.0 * (1.0 - u)).ln()
    }
}

pub fn sample_std_normal(rng: &mut RngStream) -> f64 {
    rng.sample(StandardNormal)
}

/// Reusable sampler for N(0, Σ); caches the symmetric square root of Σ.
#[derive(Clone, Debug)]
pub struct MvnSampler {
    factor: SymmetricMatrix,
}

impl MvnSampler {
    /// Negative eigenvalues down to −1e-10·‖Σ‖_F are clamped to zero.
    pub fn new(cov: &SymmetricMatrix) -> Result<Self> {
        Ok(Self {
            factor: sqrt_psd(cov)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    pub fn factor(&self) -> &SymmetricMatrix {
        &self.factor
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }

    pub fn sample_into(&self, rng: &mut RngStream, out: &mut [f64]) {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| sample_std_normal(rng)).collect();
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.factor.row(i).iter().zip(&z).map(|(a, b)| a * b).sum();
        }
    }
}

/// One draw from N(0, cov).
pub fn sample_mvn(rng: &mut RngStream, cov: &SymmetricMatrix) -> Result<Vec<f64>> {
    Ok(MvnSampler::new(cov)?.sample(rng))
}
