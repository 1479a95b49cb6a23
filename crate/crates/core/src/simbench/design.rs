use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numlin::{Matrix, SymmetricMatrix};
use crate::randkit::RngStream;
use crate::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Data-generating models.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Design {
    /// X uniform on [−√3, √3]^d, Y on the same cube shifted by a/√d in every
    /// coordinate. Both have identity covariance and ‖μ_X − μ_Y‖ = a.
    UniformCube,
    /// The cube samples multiplied by the tridiagonal Toeplitz matrix Σ_T with
    /// diagonal `l` and off-diagonal `b`; covariance Σ_T².
    Toeplitz { l: f64, b: f64 },
    /// d = 1, density ∝ exp(−2t²) on [−1, 1] for both samples.
    TruncatedGaussian,
}

impl Design {
    pub fn toeplitz_default() -> Self {
        Design::Toeplitz { l: 1.0, b: 1.0 / 3.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Design::UniformCube => "uniform_cube",
            Design::Toeplitz { .. } => "toeplitz",
            Design::TruncatedGaussian => "truncated_gaussian",
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Design {
    type Err = Error;

    /// Parses a design name; Toeplitz gets its default (l, b) = (1, 1/3).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform_cube" => Ok(Design::UniformCube),
            "toeplitz" => Ok(Design::toeplitz_default()),
            "truncated_gaussian" => Ok(Design::TruncatedGaussian),
            other => Err(Error::invalid(format!("unknown design '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub design: Design,
    pub d: usize,
    /// Mean shift a ≥ 0; a = 0 is the null hypothesis.
    pub a: f64,
}

impl DesignSpec {
    pub fn new(design: Design, d: usize, a: f64) -> Result<Self> {
        let spec = Self { design, d, a };
        spec.validate()?;
        Ok(spec)
    }

    pub fn uniform_cube(d: usize, a: f64) -> Result<Self> {
        Self::new(Design::UniformCube, d, a)
    }

    pub fn toeplitz(d: usize, a: f64) -> Result<Self> {
        Self::new(Design::toeplitz_default(), d, a)
    }

    pub fn truncated_gaussian() -> Self {
        Self {
            design: Design::TruncatedGaussian,
            d: 1,
            a: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("design dimension must be >= 1"));
        }
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(Error::invalid(format!("shift a must be >= 0, got {}", self.a)));
        }
        match self.design {
            Design::TruncatedGaussian if self.d != 1 || self.a != 0.0 => Err(Error::invalid(
                "truncated_gaussian design is one-dimensional with a = 0",
            )),
            Design::Toeplitz { l, b } if !(l > 0.0 && b >= 0.0 && l.is_finite() && b.is_finite()) => {
                Err(Error::invalid("toeplitz needs l > 0 and b >= 0"))
            }
            _ => Ok(()),
        }
    }

    fn shift(&self) -> f64 {
        self.a / (self.d as f64).sqrt()
    }

    /// Public data bound m with every observation in [−m, m]^d.
    pub fn bound_m(&self) -> f64 {
        match self.design {
            Design::UniformCube => SQRT3 + self.shift(),
            Design::Toeplitz { l, b } => (SQRT3 + self.shift()) * (2.0 * b + l),
            Design::TruncatedGaussian => 1.0,
        }
    }

    /// Σ_T for the Toeplitz design.
    pub fn toeplitz_matrix(&self) -> Option<SymmetricMatrix> {
        match self.design {
            Design::Toeplitz { l, b } => Some(SymmetricMatrix::from_upper_fn(self.d, |i, j| {
                match j - i {
                    0 => l,
                    1 => b,
                    _ => 0.0,
                }
            })),
            _ => None,
        }
    }

    /// Population covariance shared by both samples.
    pub fn population_cov(&self) -> SymmetricMatrix {
        match self.design {
            Design::UniformCube => SymmetricMatrix::identity(self.d),
            Design::Toeplitz { .. } => {
                let t = self.toeplitz_matrix().expect("toeplitz design");
                let t2 = t.matmul(&t.to_matrix()).expect("square");
                SymmetricMatrix::from_upper_fn(self.d, |i, j| t2.get(i, j))
            }
            Design::TruncatedGaussian => {
                // Var of N(0, 1/4) truncated to ±2σ: σ²(1 − 2βφ(β)/(2Φ(β) − 1)), β = 2
                let phi = (-2.0f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let mass = 0.954_499_736_103_641_6;
                SymmetricMatrix::diagonal(&[0.25 * (1.0 - 4.0 * phi / mass)])
            }
        }
    }

    /// μ_Y − μ_X.
    pub fn mean_difference(&self) -> Vec<f64> {
        let s = vec![self.shift(); self.d];
        match self.toeplitz_matrix() {
            Some(t) => t.matvec(&s).expect("dims agree"),
            None => s,
        }
    }
}

fn uniform_cube_row(rng: &mut RngStream, shift: f64, out: &mut [f64]) {
    for v in out.iter_mut() {
        let u: f64 = rng.random();
        *v = -SQRT3 + 2.0 * SQRT3 * u + shift;
    }
}

fn truncated_gaussian_draw(rng: &mut RngStream) -> f64 {
    loop {
        let t: f64 = 2.0 * rng.random::<f64>() - 1.0;
        let u: f64 = rng.random();
        if u < (-2.0 * t * t).exp() {
            return t;
        }
    }
}

fn sample(rng: &mut RngStream, spec: &DesignSpec, n: usize, shift: f64) -> Result<Matrix> {
    let d = spec.d;
    let m = spec.bound_m();
    let mut data = Matrix::zeros(n, d);
    let mut tmp = vec![0.0; d];
    for i in 0..n {
        let row = data.row_mut(i);
        match spec.design {
            Design::UniformCube => uniform_cube_row(rng, shift, row),
            Design::Toeplitz { l, b } => {
                uniform_cube_row(rng, shift, &mut tmp);
                for k in 0..d {
                    let mut v = l * tmp[k];
                    if k > 0 {
                        v += b * tmp[k - 1];
                    }
                    if k + 1 < d {
                        v += b * tmp[k + 1];
                    }
                    row[k] = v;
                }
            }
            Design::TruncatedGaussian => row[0] = truncated_gaussian_draw(rng),
        }
        // the support touches ±m exactly; absorb the last-ulp rounding
        for v in row.iter_mut() {
            *v = v.clamp(-m, m);
        }
    }
    Ok(data)
}

/// Draws the two samples (n₁ × d and n₂ × d) of `spec`.
pub fn generate(
    rng: &mut RngStream,
    spec: &DesignSpec,
    n1: usize,
    n2: usize,
) -> Result<(Matrix, Matrix)> {
    spec.validate()?;
    let x = sample(rng, spec, n1, 0.0)?;
    let y = sample(rng, spec, n2, spec.shift())?;
    Ok((x, y))
}
