use super::matrix::{Matrix, SymmetricMatrix};
use crate::{Error, Result};

/// Convergence threshold on the off-diagonal Frobenius norm, relative to ‖A‖_F.
pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Default eigenvalue floor for [`inverse_sqrt_psd`].
pub const DEFAULT_EIGEN_FLOOR: f64 = 1e-12;

/// Eigenvalues sorted descending; column `k` of `eigenvectors` belongs to
/// `eigenvalues[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k)
    }

    pub fn largest(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn smallest(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `V · diag(f(λ)) · Vᵀ`.
    pub fn recompose_with(&self, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
        let d = self.dim();
        let weights: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let v = &self.eigenvectors;
        SymmetricMatrix::from_upper_fn(d, |i, j| {
            (0..d).map(|k| v.get(i, k) * weights[k] * v.get(j, k)).sum()
        })
    }

    pub fn recompose(&self) -> SymmetricMatrix {
        self.recompose_with(|l| l)
    }
}

/// Cyclic Jacobi eigendecomposition.
///
/// Sweeps rotate every (p, q) pair in row order until the off-diagonal
/// Frobenius norm drops below `JACOBI_TOL · ‖A‖_F`. Each eigenvector is
/// signed so that its first component with magnitude above 1e-12 is positive.
pub fn jacobi_eigen(a: &SymmetricMatrix) -> Result<EigenDecomposition> {
    let n = a.dim();
    let mut m = a.as_slice().to_vec();
    let mut v = Matrix::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }
    let tol = JACOBI_TOL * a.frobenius_norm();

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&m, n);
        if off <= tol {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence {
                residual: off,
                sweeps,
            });
        }
        sweeps += 1;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                rotate(&mut m, v.as_mut_slice(), n, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]));

    let eigenvalues: Vec<f64> = order.iter().map(|&k| m[k * n + k]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let sign = (0..n)
            .map(|i| v.get(i, k))
            .find(|x| x.abs() > 1e-12)
            .map_or(1.0, f64::signum);
        for i in 0..n {
            vectors.set(i, col, sign * v.get(i, k));
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors: vectors,
    })
}

fn off_diagonal_norm(m: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[i * n + j] * m[i * n + j];
            }
        }
    }
    s.sqrt()
}

/// Applies the rotation annihilating `m[p][q]`, accumulating it into `v`.
fn rotate(m: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = m[p * n + q];
    if apq == 0.0 {
        return;
    }
    let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        let akp = m[k * n + p];
        let akq = m[k * n + q];
        m[k * n + p] = c * akp - s * akq;
        m[k * n + q] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = m[p * n + k];
        let aqk = m[q * n + k];
        m[p * n + k] = c * apk - s * aqk;
        m[q * n + k] = s * apk + c * aqk;
    }
    m[p * n + q] = 0.0;
    m[q * n + p] = 0.0;
    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = c * vkp - s * vkq;
        v[k * n + q] = s * vkp + c * vkq;
    }
}

fn check_psd(eig: &EigenDecomposition, a: &SymmetricMatrix) -> Result<()> {
    let min = eig.smallest();
    if min < -1e-10 * a.frobenius_norm() {
        return Err(Error::NotPositiveSemiDefinite {
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// `V · diag(max(λ, floor))^{-1/2} · Vᵀ`.
///
/// Eigenvalues slightly below zero (round-off, ≥ −1e-10·‖A‖_F) are accepted.
/// With `floor == 0` any non-positive eigenvalue is a [`Error::Singular`].
pub fn inverse_sqrt_psd(a: &SymmetricMatrix, floor: f64) -> Result<SymmetricMatrix> {
    let eig = jacobi_eigen(a)?;
    inverse_sqrt_from_eigen(&eig, a, floor)
}

pub(crate) fn inverse_sqrt_from_eigen(
    eig: &EigenDecomposition,
    a: &SymmetricMatrix,
    floor: f64,
) -> Result<SymmetricMatrix> {
    if !(floor >= 0.0) {
        return Err(Error::invalid("eigenvalue floor must be nonnegative"));
    }
    check_psd(eig, a)?;
    if floor == 0.0 && eig.smallest() <= 0.0 {
        return Err(Error::Singular {
            min_eigenvalue: eig.smallest(),
        });
    }
    Ok(eig.recompose_with(|l| 1.0 / l.max(floor).sqrt()))
}

/// Symmetric PSD square root, clamping negative eigenvalues to zero.
pub fn sqrt_psd(a: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let eig = jacobi_eigen(a)?;
    check_psd(&eig, a)?;
    Ok(eig.recompose_with(|l| l.max(0.0).sqrt()))
}
