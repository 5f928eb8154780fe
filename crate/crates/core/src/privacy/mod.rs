//! Privacy-preserving computation path: exact SMC feature costs, zCDP-noised
//! class statistics, the budget gate and the reconstruction-attack harness.

mod attack;
mod dp;
mod smc;

pub use attack::{normalized_gram, svd_reconstruction_attack, AttackResult};
pub use dp::{
    add_dp_noise_stats, check_privacy_budget, noise_sigmas, symmetric_gaussian_noise,
    zcdp_to_dp, BudgetCheck, PrivacyBudget,
};
pub use smc::{
    digest_matrix, secure_dot_product, Party, PartyTranscript, ProtocolEvidence, SmcExchange,
    SmcMessage,
};

use ndarray::Array2;

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::metric::{
    class_stats, similarity_from_activations, ClassStats, CostBackend, MetricConfig, Side,
    SimilarityReport,
};
use crate::probe::{extract_activations, ModelParams};
use crate::rng::derive_seed;

/// Cost backend that routes cross-client products through the simulated SMC
/// protocol and noises per-class statistics with the Gaussian mechanism.
pub struct PrivateBackend {
    budget: PrivacyBudget,
    /// Skip the reconstruction-infeasibility gate (explicit acknowledgment).
    allow_weak_privacy: bool,
    seed: u64,
    invocation: u64,
    transcripts: Vec<PartyTranscript>,
}

impl PrivateBackend {
    pub fn new(budget: PrivacyBudget, allow_weak_privacy: bool, seed: u64) -> Result<Self> {
        budget.validate()?;
        Ok(Self {
            budget,
            allow_weak_privacy,
            seed,
            invocation: 0,
            transcripts: Vec::new(),
        })
    }

    /// Transcripts of every SMC invocation performed so far.
    pub fn transcripts(&self) -> &[PartyTranscript] {
        &self.transcripts
    }

    pub fn into_transcripts(self) -> Vec<PartyTranscript> {
        self.transcripts
    }

    fn gate(&self, d: usize, n_c: usize) -> Result<()> {
        let check = check_privacy_budget(self.budget.rho, d, n_c)?;
        if !check.pass && !self.allow_weak_privacy {
            return Err(Error::BudgetGate {
                rho: self.budget.rho,
                threshold: check.threshold,
                dim: d,
                samples: n_c,
            });
        }
        Ok(())
    }
}

impl CostBackend for PrivateBackend {
    fn cross_gram(&mut self, a_norm: &Array2<f64>, b_norm: &Array2<f64>) -> Result<Array2<f64>> {
        let seed = derive_seed(self.seed, "smc-invocation", self.invocation);
        self.invocation += 1;
        let exchange = secure_dot_product(a_norm, b_norm, seed)?;
        self.transcripts.push(exchange.transcript);
        Ok(exchange.product)
    }

    fn class_stats(
        &mut self,
        side: Side,
        class: usize,
        h_norm: &Array2<f64>,
        ridge: f64,
    ) -> Result<ClassStats> {
        self.gate(h_norm.ncols(), h_norm.nrows())?;
        let plain = class_stats(h_norm, class, ridge)?;
        let side_tag = match side {
            Side::A => 0,
            Side::B => 1,
        };
        let seed = derive_seed(self.seed, "dp-side", side_tag);
        add_dp_noise_stats(&plain, &self.budget, ridge, seed)
    }

    fn privacy_mode(&self) -> bool {
        true
    }
}

/// The pairwise similarity pipeline with privacy-preserving cost
/// computation: feature costs through the SMC dot product (exact) and label
/// costs from zCDP-noised class statistics. Fails with a budget-gate error
/// when `rho` is too large for any participating class unless the caller
/// explicitly allows weak privacy.
pub fn private_pairwise_similarity(
    d_a: &Dataset,
    d_b: &Dataset,
    model: &ModelParams,
    cfg: &MetricConfig,
    budget: &PrivacyBudget,
    allow_weak_privacy: bool,
    seed: u64,
) -> Result<(SimilarityReport, Vec<PartyTranscript>)> {
    let acts_a = extract_activations(d_a, model, "A")?;
    let acts_b = extract_activations(d_b, model, "B")?;
    let mut backend = PrivateBackend::new(*budget, allow_weak_privacy, seed)?;
    let report = similarity_from_activations(&acts_a, &acts_b, cfg, &mut backend)?;
    Ok((report, backend.into_transcripts()))
}
