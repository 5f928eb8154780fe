//! Per-class Gaussian statistics and the closed-form Hellinger distance.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::linalg::SpdFactor;

/// Gaussian parameters of one class's activations.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub class: usize,
    pub mean: Array1<f64>,
    /// Ridged sample covariance; positive definite by construction.
    pub cov: Array2<f64>,
    pub count: usize,
    /// Set when differentially private noise has been applied.
    pub noised: bool,
}

impl ClassStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Column mean and unbiased sample covariance plus `ridge * I`.
pub fn class_stats(h: &Array2<f64>, class: usize, ridge: f64) -> Result<ClassStats> {
    let n = h.nrows();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "class {class}: need >= 2 samples for covariance, got {n}"
        )));
    }
    if ridge <= 0.0 {
        return Err(Error::InvalidInput(format!("ridge must be > 0, got {ridge}")));
    }
    let mean = h.mean_axis(Axis(0)).expect("nonempty");
    let d = h.ncols();
    let mut cov = Array2::zeros((d, d));
    for row in h.rows() {
        let centered = &row - &mean;
        for i in 0..d {
            for j in i..d {
                cov[[i, j]] += centered[i] * centered[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[[i, j]] / denom;
            cov[[i, j]] = v;
            cov[[j, i]] = v;
        }
        cov[[i, i]] += ridge;
    }
    Ok(ClassStats { class, mean, cov, count: n, noised: false })
}

/// Closed-form Hellinger distance between two Gaussians:
///
/// `H^2 = 1 - det(S_a)^{1/4} det(S_b)^{1/4} / det(M)^{1/2}
///        * exp(-(mu_a - mu_b)^T M^{-1} (mu_a - mu_b) / 8)`
///
/// with `M = (S_a + S_b) / 2`; returns `H` clamped to [0,1]. Determinants
/// are handled in log space so small-variance classes stay stable.
pub fn hellinger_gaussian(a: &ClassStats, b: &ClassStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "stats dims {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let fa = SpdFactor::new(&a.cov)?;
    let fb = SpdFactor::new(&b.cov)?;
    let mid = (&a.cov + &b.cov) * 0.5;
    let fm = SpdFactor::new(&mid)?;

    let mean_diff = &a.mean - &b.mean;
    let quad = fm.quad_form(&mean_diff);
    let log_bc = 0.25 * fa.log_det() + 0.25 * fb.log_det() - 0.5 * fm.log_det() - 0.125 * quad;
    let h_sq = 1.0 - log_bc.exp();
    Ok(h_sq.clamp(0.0, 1.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn gaussian_1d(mean: f64, var: f64) -> ClassStats {
        ClassStats {
            class: 0,
            mean: array![mean],
            cov: array![[var]],
            count: 100,
            noised: false,
        }
    }

    #[test]
    fn two_point_stats() {
        let h = array![[0.0, 0.0], [2.0, 0.0]];
        let ridge = 1e-4;
        let s = class_stats(&h, 0, ridge).unwrap();
        assert_abs_diff_eq!(s.mean[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.mean[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.cov[[0, 0]], 2.0 + ridge, epsilon = 1e-12);
        assert_abs_diff_eq!(s.cov[[1, 1]], ridge, epsilon = 1e-12);
        assert_abs_diff_eq!(s.cov[[0, 1]], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_rows_give_pure_ridge() {
        let h = array![[0.5, -0.5], [0.5, -0.5], [0.5, -0.5]];
        let s = class_stats(&h, 1, 1e-4).unwrap();
        assert_abs_diff_eq!(s.cov[[0, 0]], 1e-4, epsilon = 1e-15);
        assert_abs_diff_eq!(s.cov[[1, 1]], 1e-4, epsilon = 1e-15);
        assert_abs_diff_eq!(s.cov[[0, 1]], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ridge_keeps_underdetermined_covariance_pd() {
        // 3 samples in 5 dims: sample covariance is rank-deficient.
        let h = array![
            [1.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0, 0.0]
        ];
        let s = class_stats(&h, 0, 1e-4).unwrap();
        let (vals, _) = crate::linalg::sym_eigen(&s.cov).unwrap();
        assert!(vals.iter().all(|&v| v >= 1e-4 - 1e-12));
    }

    #[test]
    fn single_sample_rejected() {
        let h = array![[1.0, 2.0]];
        assert!(class_stats(&h, 0, 1e-4).is_err());
    }

    #[test]
    fn hellinger_identical_stats_is_zero() {
        let s = gaussian_1d(0.3, 1.2);
        assert_abs_diff_eq!(hellinger_gaussian(&s, &s).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hellinger_standard_pair_matches_closed_form() {
        // N(0,1) vs N(1,1): H = sqrt(1 - exp(-1/8)).
        let a = gaussian_1d(0.0, 1.0);
        let b = gaussian_1d(1.0, 1.0);
        let expected = (1.0 - (-0.125f64).exp()).sqrt();
        assert_abs_diff_eq!(hellinger_gaussian(&a, &b).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.3428, epsilon = 5e-5);
    }

    #[test]
    fn hellinger_saturates_with_mean_separation() {
        let a = gaussian_1d(0.0, 1.0);
        let far = gaussian_1d(1e6, 1.0);
        let h = hellinger_gaussian(&a, &far).unwrap();
        assert_abs_diff_eq!(h, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn hellinger_is_symmetric() {
        let a = ClassStats {
            class: 0,
            mean: array![0.1, -0.4],
            cov: array![[0.8, 0.2], [0.2, 1.1]],
            count: 50,
            noised: false,
        };
        let b = ClassStats {
            class: 0,
            mean: array![0.5, 0.3],
            cov: array![[1.4, -0.3], [-0.3, 0.6]],
            count: 50,
            noised: false,
        };
        let hab = hellinger_gaussian(&a, &b).unwrap();
        let hba = hellinger_gaussian(&b, &a).unwrap();
        assert_abs_diff_eq!(hab, hba, epsilon = 1e-14);
        assert!(hab > 0.0 && hab < 1.0);
    }
}
