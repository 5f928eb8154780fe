//! zCDP Gaussian mechanism for class statistics, the reconstruction-
//! infeasibility budget gate and the zCDP -> (epsilon, delta) conversion.

use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::metric::ClassStats;
use crate::rng::{derive_seed, rng_from_seed};

/// zCDP budget with its split across the mean and covariance releases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub rho: f64,
    pub delta: f64,
    pub rho_mean: f64,
    pub rho_cov: f64,
}

impl PrivacyBudget {
    /// Even split: rho_mean = rho_cov = rho / 2.
    pub fn new(rho: f64, delta: f64) -> Result<Self> {
        Self::with_split(rho, delta, 0.5)
    }

    /// `mean_fraction` of rho goes to the mean release.
    pub fn with_split(rho: f64, delta: f64, mean_fraction: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&mean_fraction) || mean_fraction == 0.0 {
            return Err(Error::InvalidInput(format!(
                "mean fraction must lie in (0,1), got {mean_fraction}"
            )));
        }
        let budget = Self {
            rho,
            delta,
            rho_mean: rho * mean_fraction,
            rho_cov: rho * (1.0 - mean_fraction),
        };
        budget.validate()?;
        Ok(budget)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho <= 0.0 || !self.rho.is_finite() {
            return Err(Error::InvalidInput(format!("rho must be > 0, got {}", self.rho)));
        }
        if !(0.0..1.0).contains(&self.delta) || self.delta == 0.0 {
            return Err(Error::InvalidInput(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        if self.rho_mean <= 0.0 || self.rho_cov <= 0.0 {
            return Err(Error::InvalidInput("both budget shares must be positive".into()));
        }
        if ((self.rho_mean + self.rho_cov) - self.rho).abs() > 1e-12 * self.rho.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "budget split {} + {} does not sum to rho {}",
                self.rho_mean, self.rho_cov, self.rho
            )));
        }
        Ok(())
    }

    /// The (epsilon, delta)-DP guarantee this budget converts to.
    pub fn epsilon(&self) -> Result<f64> {
        zcdp_to_dp(self.rho, self.delta)
    }
}

/// Convert rho-zCDP to epsilon at the target delta:
/// `epsilon = rho + 2 sqrt(rho ln(1/delta))`.
pub fn zcdp_to_dp(rho: f64, delta: f64) -> Result<f64> {
    if rho <= 0.0 || !rho.is_finite() {
        return Err(Error::InvalidInput(format!("rho must be > 0, got {rho}")));
    }
    if !(0.0..1.0).contains(&delta) || delta == 0.0 {
        return Err(Error::InvalidInput(format!("delta must lie in (0,1), got {delta}")));
    }
    Ok(rho + 2.0 * (rho * (1.0 / delta).ln()).sqrt())
}

/// Outcome of the reconstruction-infeasibility gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetCheck {
    pub pass: bool,
    /// The gate threshold `6 sqrt(d) / n`.
    pub threshold: f64,
    /// `threshold - rho`; positive margin means the gate passes.
    pub margin: f64,
}

/// Reconstruction remains infeasible when `rho < 6 sqrt(d) / n` (strict).
pub fn check_privacy_budget(rho: f64, d: usize, n: usize) -> Result<BudgetCheck> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidInput("d and n must be >= 1".into()));
    }
    if !rho.is_finite() || rho <= 0.0 {
        return Err(Error::InvalidInput(format!("rho must be > 0, got {rho}")));
    }
    let threshold = 6.0 * (d as f64).sqrt() / n as f64;
    Ok(BudgetCheck { pass: rho < threshold, threshold, margin: threshold - rho })
}

/// Noise scales implied by a budget for class statistics over `n_c`
/// row-normalized activations (substitution sensitivity 2 / n_c).
pub fn noise_sigmas(budget: &PrivacyBudget, n_c: usize) -> (f64, f64) {
    let sensitivity = 2.0 / n_c as f64;
    let sigma_mean = sensitivity / (2.0 * budget.rho_mean).sqrt();
    let sigma_cov = sensitivity / (2.0 * budget.rho_cov).sqrt();
    (sigma_mean, sigma_cov)
}

/// Symmetric matrix of iid N(0, sigma^2) entries (upper triangle mirrored,
/// so every entry has standard deviation exactly sigma).
pub fn symmetric_gaussian_noise(
    d: usize,
    sigma: f64,
    rng: &mut crate::rng::SeededRng,
) -> Array2<f64> {
    let mut e = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in i..d {
            let z: f64 = StandardNormal.sample(rng);
            e[[i, j]] = sigma * z;
            e[[j, i]] = sigma * z;
        }
    }
    e
}

/// Gaussian mechanism over class statistics: `mu' = mu + N(0, sigma_mu^2 I)`
/// and `Sigma' = Sigma + E` with symmetric Gaussian `E`, then an eigenvalue
/// floor at `ridge` so the result stays positive definite. The floor (rather
/// than clip-to-zero-plus-ridge) keeps the noiseless limit exact.
pub fn add_dp_noise_stats(
    s: &ClassStats,
    budget: &PrivacyBudget,
    ridge: f64,
    seed: u64,
) -> Result<ClassStats> {
    budget.validate()?;
    if s.count == 0 {
        return Err(Error::InvalidInput("class stats with zero sample count".into()));
    }
    if ridge <= 0.0 {
        return Err(Error::InvalidInput(format!("ridge must be > 0, got {ridge}")));
    }
    let d = s.dim();
    let (sigma_mean, sigma_cov) = noise_sigmas(budget, s.count);

    let mut rng = rng_from_seed(derive_seed(seed, "dp-stats", s.class as u64));
    let mean = Array1::from_shape_fn(d, |i| {
        let z: f64 = StandardNormal.sample(&mut rng);
        s.mean[i] + sigma_mean * z
    });
    let noise = symmetric_gaussian_noise(d, sigma_cov, &mut rng);
    let noisy_cov = &s.cov + &noise;

    // Positive-definite repair: floor the spectrum at the ridge.
    let (vals, vecs) = sym_eigen(&noisy_cov)?;
    let floored = vals.mapv(|v| v.max(ridge));
    let cov = vecs.dot(&Array2::from_diag(&floored)).dot(&vecs.t());

    Ok(ClassStats { class: s.class, mean, cov, count: s.count, noised: true })
}
