//! Dense symmetric linear algebra: Jacobi eigendecomposition, PSD matrix
//! powers, orthonormal complements and quadratic forms.
//!
//! All routines are pure functions of their inputs.

mod eigen;
mod matrix;

pub use eigen::{
    inverse_sqrt_psd, jacobi_eigen, sqrt_psd, EigenDecomposition, DEFAULT_EIGEN_FLOOR,
    JACOBI_MAX_SWEEPS, JACOBI_TOL,
};
pub(crate) use eigen::inverse_sqrt_from_eigen;
pub use matrix::{axpy, dot, norm2, quadratic_form, Matrix, SymmetricMatrix, SYMMETRY_TOL};

use crate::{Error, Result};

/// Candidates whose residual norm falls below this are treated as dependent.
const COMPLEMENT_TOL: f64 = 1e-8;

/// Orthonormal basis (as rows) of the complement of `vectors` in ℝ^d.
///
/// Gram–Schmidt (with one re-orthogonalization pass) over e₁, …, e_d in
/// order, so the result is deterministic. Returns a (d − k)×d matrix.
pub fn orthonormal_complement(vectors: &[Vec<f64>], dim: usize) -> Result<Matrix> {
    let k = vectors.len();
    if k >= dim {
        return Err(Error::EmptyComplement { supplied: k, dim });
    }
    if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: v.len(),
        });
    }

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim - k);
    for j in 0..dim {
        if basis.len() == dim - k {
            break;
        }
        let mut cand = vec![0.0; dim];
        cand[j] = 1.0;
        for _ in 0..2 {
            for v in vectors.iter().chain(basis.iter()) {
                let c = dot(&cand, v);
                axpy(-c, v, &mut cand);
            }
        }
        let norm = norm2(&cand);
        if norm > COMPLEMENT_TOL {
            cand.iter_mut().for_each(|x| *x /= norm);
            basis.push(cand);
        }
    }
    if basis.len() != dim - k {
        return Err(Error::invalid(
            "supplied vectors are not orthonormal; complement has the wrong rank",
        ));
    }
    Matrix::from_rows(&basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_of_e1_in_plane() {
        let r = orthonormal_complement(&[vec![1.0, 0.0]], 2).unwrap();
        assert_eq!(r.rows(), 1);
        assert_eq!(r.row(0)[0], 0.0);
        assert_eq!(r.row(0)[1].abs(), 1.0);
    }

    #[test]
    fn complement_of_nothing_is_identity() {
        let r = orthonormal_complement(&[], 3).unwrap();
        assert_eq!(r, SymmetricMatrix::identity(3).to_matrix());
    }

    #[test]
    fn complement_of_diagonal_direction() {
        let s = 1.0 / 3f64.sqrt();
        let r = orthonormal_complement(&[vec![s, s, s]], 3).unwrap();
        assert_eq!((r.rows(), r.cols()), (2, 3));
        let ones = r.matvec(&[1.0, 1.0, 1.0]).unwrap();
        assert!(ones.iter().all(|v| v.abs() <= 1e-8));
        let rrt = r.matmul(&r.transpose()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let t = if i == j { 1.0 } else { 0.0 };
                assert!((rrt.get(i, j) - t).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn full_set_has_no_complement() {
        let err = orthonormal_complement(&[vec![1.0, 0.0], vec![0.0, 1.0]], 2).unwrap_err();
        assert_eq!(err, Error::EmptyComplement { supplied: 2, dim: 2 });
    }
}
