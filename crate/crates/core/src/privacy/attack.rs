//! SVD reconstruction-attack harness: how well do the top eigenvectors of a
//! released (noisy) second-moment matrix align with those of the true Gram
//! matrix of the normalized activations?

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::{principal_angle_cosines, sym_eigen};
use crate::metric::l2_normalize;

/// Subspace alignment between the attacked and true top-k eigenspaces.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AttackResult {
    /// Mean cosine of the principal angles, in [0,1]; 1 means the attacker
    /// recovers the true subspace exactly.
    pub alignment: f64,
    pub k: usize,
    /// The zCDP budget the released matrix was noised under, when known.
    pub rho: Option<f64>,
}

/// Gram matrix `H~^T H~` of the row-normalized activations.
pub fn normalized_gram(true_h: &Array2<f64>) -> Result<Array2<f64>> {
    let h = l2_normalize(true_h)?;
    Ok(h.t().dot(&h))
}

fn top_k_eigvecs(m: &Array2<f64>, k: usize) -> Result<Array2<f64>> {
    let (_, vecs) = sym_eigen(m)?;
    Ok(vecs.slice(ndarray::s![.., ..k]).to_owned())
}

/// Compare the top-k eigenvectors of `noisy_cov` against those of the true
/// Gram matrix of `true_h`; returns the mean principal-angle cosine.
pub fn svd_reconstruction_attack(
    noisy_cov: &Array2<f64>,
    true_h: &Array2<f64>,
    k: usize,
) -> Result<AttackResult> {
    let d = true_h.ncols();
    if noisy_cov.dim() != (d, d) {
        return Err(Error::DimensionMismatch(format!(
            "noisy covariance {:?} vs activation dim {d}",
            noisy_cov.dim()
        )));
    }
    if k == 0 || k > d {
        return Err(Error::InvalidInput(format!(
            "k must lie in 1..={d}, got {k}"
        )));
    }
    let gram = normalized_gram(true_h)?;
    let u = top_k_eigvecs(noisy_cov, k)?;
    let v = top_k_eigvecs(&gram, k)?;
    let cosines = principal_angle_cosines(&u, &v)?;
    let alignment = cosines.iter().sum::<f64>() / k as f64;
    Ok(AttackResult { alignment: alignment.clamp(0.0, 1.0), k, rho: None })
}
