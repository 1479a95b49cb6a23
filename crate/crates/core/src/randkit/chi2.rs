use crate::{Error, Result};

/// Degrees of freedom of a χ² distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Chi2Params {
    dof: usize,
}

impl Chi2Params {
    pub fn new(dof: usize) -> Result<Self> {
        if dof == 0 {
            return Err(Error::invalid("chi-squared degrees of freedom must be >= 1"));
        }
        Ok(Self { dof })
    }

    pub fn dof(self) -> usize {
        self.dof
    }

    fn shape(self) -> f64 {
        0.5 * self.dof as f64
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 10_000;

/// Regularized lower incomplete gamma P(a, x) and its complement Q(a, x).
///
/// Series expansion for x < a + 1, Lentz continued fraction otherwise; the
/// directly computed side is the accurate one, the other is `1 - ` it.
fn regularized_gamma(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        for n in 1..GAMMA_MAX_ITER {
            term *= x / (a + n as f64);
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        let p = (sum.ln() + log_prefactor).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        let q = (h.ln() + log_prefactor).exp().min(1.0);
        (1.0 - q, q)
    }
}

/// P(χ²_d ≤ x).
pub fn chi2_cdf(x: f64, p: Chi2Params) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    regularized_gamma(p.shape(), 0.5 * x.max(0.0)).0
}

/// P(χ²_d > x).
pub fn chi2_sf(x: f64, p: Chi2Params) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    regularized_gamma(p.shape(), 0.5 * x.max(0.0)).1
}

/// Inverse of [`chi2_cdf`] by bisection on `[0, d + 40√d + 40]`.
///
/// Probabilities above ½ are matched through the upper tail so the root is
/// resolved to full relative precision there too.
pub fn chi2_quantile(prob: f64, p: Chi2Params) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::invalid(format!(
            "quantile probability must lie in (0, 1), got {prob}"
        )));
    }
    let d = p.dof() as f64;
    let mut lo = 0.0_f64;
    let mut hi = d + 40.0 * d.sqrt() + 40.0;
    let upper = prob > 0.5;
    let tail = 1.0 - prob;
    // g is increasing in x with its root at the quantile
    let g = |x: f64| {
        if upper {
            tail - chi2_sf(x, p)
        } else {
            chi2_cdf(x, p) - prob
        }
    };
    if g(hi) < 0.0 {
        return Ok(hi);
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
