//! Dense symmetric eigendecompositions, Cholesky factorizations and
//! principal angles, bridged to `nalgebra`.
//!
//! Data matrices elsewhere in the crate are `ndarray` arrays; this module
//! is the single place where they cross into `nalgebra` for factorizations.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

pub fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in descending order with matching eigenvector
/// columns. The input is symmetrized as `(A + A^T)/2` before factoring so
/// that accumulated round-off cannot push it off the symmetric cone.
pub fn sym_eigen(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::DimensionMismatch(format!(
            "sym_eigen expects a square matrix, got {r}x{c}"
        )));
    }
    let m = to_dmatrix(a);
    let sym = (&m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let values = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors =
        Array2::from_shape_fn((r, r), |(i, j)| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// Cholesky factorization of a symmetric positive-definite matrix.
pub struct SpdFactor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl SpdFactor {
    pub fn new(a: &Array2<f64>) -> Result<Self> {
        let (r, c) = a.dim();
        if r != c {
            return Err(Error::DimensionMismatch(format!(
                "Cholesky expects a square matrix, got {r}x{c}"
            )));
        }
        let m = to_dmatrix(a);
        let sym = (&m + m.transpose()) * 0.5;
        let chol = sym.cholesky().ok_or_else(|| {
            Error::InvalidInput("matrix is not positive definite".into())
        })?;
        Ok(Self { chol })
    }

    /// log det(A), accumulated from the Cholesky diagonal.
    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Quadratic form v^T A^{-1} v.
    pub fn quad_form(&self, v: &Array1<f64>) -> f64 {
        let b = DVector::from_iterator(v.len(), v.iter().copied());
        let x = self.chol.solve(&b);
        b.dot(&x)
    }
}

/// Cosines of the principal angles between the column spaces of two
/// orthonormal matrices: the singular values of `U^T V`, clamped to [0,1].
pub fn principal_angle_cosines(u: &Array2<f64>, v: &Array2<f64>) -> Result<Vec<f64>> {
    if u.nrows() != v.nrows() || u.ncols() != v.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "subspace bases must share shape, got {:?} vs {:?}",
            u.dim(),
            v.dim()
        )));
    }
    let prod = to_dmatrix(&u.t().dot(v));
    let svd = prod.svd(false, false);
    Ok(svd
        .singular_values
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect())
}
