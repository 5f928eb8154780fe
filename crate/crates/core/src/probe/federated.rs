//! Federated orchestration: FedAvg aggregation, the single-round probe and
//! the multi-round training loop with weight-divergence tracking.

use serde::{Deserialize, Serialize};

use super::model::{evaluate, init_model, Layer, Metrics, ModelParams, ModelSpec};
use super::train::{local_update, TrainOpts};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Per-layer parameter differences between two shape-compatible models.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightDelta {
    pub layers: Vec<Layer>,
}

impl WeightDelta {
    /// new - old, layer by layer.
    pub fn between(new: &ModelParams, old: &ModelParams) -> Result<Self> {
        if !new.same_shape(old) {
            return Err(Error::DimensionMismatch(
                "weight delta requires identical layer shapes".into(),
            ));
        }
        let layers = new
            .layers
            .iter()
            .zip(&old.layers)
            .map(|(n, o)| Layer {
                weight: &n.weight - &o.weight,
                bias: &n.bias - &o.bias,
            })
            .collect();
        Ok(Self { layers })
    }

    /// l2 norm over all flattened parameters.
    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| {
                l.weight.iter().map(|v| v * v).sum::<f64>()
                    + l.bias.iter().map(|v| v * v).sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Flattened parameter vector, for cosine comparisons.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for l in &self.layers {
            v.extend(l.weight.iter().copied());
            v.extend(l.bias.iter().copied());
        }
        v
    }

    fn same_shape(&self, other: &WeightDelta) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weight.dim() == b.weight.dim() && a.bias.len() == b.bias.len())
    }
}

/// ||global - local|| / ||local|| over flattened parameters.
pub fn weight_divergence(global: &WeightDelta, local: &WeightDelta) -> Result<f64> {
    if !global.same_shape(local) {
        return Err(Error::DimensionMismatch(
            "weight divergence requires identical delta shapes".into(),
        ));
    }
    let local_norm = local.norm();
    if local_norm == 0.0 {
        return Err(Error::ZeroLocalDelta);
    }
    let mut diff_sq = 0.0;
    for (g, l) in global.layers.iter().zip(&local.layers) {
        diff_sq += g
            .weight
            .iter()
            .zip(l.weight.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        diff_sq += g
            .bias
            .iter()
            .zip(l.bias.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(diff_sq.sqrt() / local_norm)
}

/// Weighted per-parameter average; weights are normalized to sum 1.
pub fn fedavg(models: &[ModelParams], weights: &[f64]) -> Result<ModelParams> {
    if models.is_empty() {
        return Err(Error::InvalidInput("fedavg needs at least one model".into()));
    }
    if models.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} models vs {} weights",
            models.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| w < 0.0) {
        return Err(Error::InvalidInput("fedavg weights must be nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput("fedavg weights must not all be zero".into()));
    }
    for m in &models[1..] {
        if !m.same_shape(&models[0]) {
            return Err(Error::DimensionMismatch("fedavg models differ in shape".into()));
        }
    }

    let mut avg = models[0].clone();
    for layer in &mut avg.layers {
        layer.weight.fill(0.0);
        layer.bias.fill(0.0);
    }
    for (m, &w) in models.iter().zip(weights) {
        let scale = w / total;
        for (acc, layer) in avg.layers.iter_mut().zip(&m.layers) {
            acc.weight.scaled_add(scale, &layer.weight);
            acc.bias.scaled_add(scale, &layer.bias);
        }
    }
    Ok(avg)
}

/// Output of the single probe round.
#[derive(Debug, Clone)]
pub struct ProbeRound {
    /// Aggregated global model after one round.
    pub global: ModelParams,
    /// The initial global model the round started from.
    pub init: ModelParams,
    /// Per-client `theta_c^1 - theta_g^0`.
    pub client_deltas: Vec<WeightDelta>,
    /// `theta_g^1 - theta_g^0`.
    pub global_delta: WeightDelta,
}

/// Initialize a global model, run one local update per client and aggregate
/// with client-size weights.
pub fn run_probe_round(
    clients: &[Dataset],
    spec: &ModelSpec,
    opts: &TrainOpts,
) -> Result<ProbeRound> {
    if clients.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "probe round needs >= 2 clients, got {}",
            clients.len()
        )));
    }
    let init = init_model(spec)?;
    let (global, client_deltas, _) = federated_round(&init, clients, opts, 0, None)?;
    let global_delta = WeightDelta::between(&global, &init)?;
    Ok(ProbeRound { global, init, client_deltas, global_delta })
}

/// One synchronous round: local updates from `start`, FedAvg with sample
/// counts, optional per-client evaluation of the aggregate.
fn federated_round(
    start: &ModelParams,
    clients: &[Dataset],
    opts: &TrainOpts,
    round: u64,
    eval_sets: Option<&[Dataset]>,
) -> Result<(ModelParams, Vec<WeightDelta>, Vec<Metrics>)> {
    let round_opts = TrainOpts {
        seed: derive_seed(opts.seed, "round", round),
        ..opts.clone()
    };
    let mut locals = Vec::with_capacity(clients.len());
    for d in clients {
        locals.push(local_update(start, d, &round_opts)?);
    }
    let weights: Vec<f64> = clients.iter().map(|d| d.n() as f64).collect();
    let global = fedavg(&locals, &weights)?;
    let deltas = locals
        .iter()
        .map(|l| WeightDelta::between(l, start))
        .collect::<Result<Vec<_>>>()?;
    let metrics = match eval_sets {
        Some(sets) => sets
            .iter()
            .map(|d| evaluate(&global, d))
            .collect::<Result<Vec<_>>>()?,
        None => clients
            .iter()
            .map(|d| evaluate(&global, d))
            .collect::<Result<Vec<_>>>()?,
    };
    Ok((global, deltas, metrics))
}

/// Aggregation strategy for [`train_federated`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FedAlgorithm {
    FedAvg,
    /// FedAvg with the proximal term from `TrainOpts::prox_mu`.
    FedProx,
}

/// One recorded round of federated training.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub round: usize,
    pub global: ModelParams,
    pub client_deltas: Vec<WeightDelta>,
    /// Eq-style divergence per client: ||dW_global - dW_local|| / ||dW_local||.
    pub divergence: Vec<f64>,
    pub metrics: Vec<Metrics>,
}

/// Full multi-round history.
#[derive(Debug, Clone)]
pub struct TrainingTrace {
    /// The model the first round started from.
    pub init: ModelParams,
    pub rounds: Vec<RoundRecord>,
}

impl TrainingTrace {
    pub fn final_global(&self) -> &ModelParams {
        &self.rounds.last().expect("at least one round").global
    }

    /// Mean per-client divergence in the last round.
    pub fn terminal_divergence(&self) -> f64 {
        let last = self.rounds.last().expect("at least one round");
        last.divergence.iter().sum::<f64>() / last.divergence.len() as f64
    }

    /// Per-client local models of the final round (round-start global plus
    /// each client's delta); the personalized models under FedProx.
    pub fn final_local_models(&self) -> Vec<ModelParams> {
        let n = self.rounds.len();
        let start = if n >= 2 { &self.rounds[n - 2].global } else { &self.init };
        self.rounds[n - 1]
            .client_deltas
            .iter()
            .map(|delta| {
                let mut m = start.clone();
                for (layer, dl) in m.layers.iter_mut().zip(&delta.layers) {
                    layer.weight += &dl.weight;
                    layer.bias += &dl.bias;
                }
                m
            })
            .collect()
    }
}

/// Multi-round federated training, recording per-round weight divergence and
/// per-client metrics of the aggregated model.
pub fn train_federated(
    clients: &[Dataset],
    spec: &ModelSpec,
    opts: &TrainOpts,
    rounds: usize,
    algo: FedAlgorithm,
    eval_sets: Option<&[Dataset]>,
) -> Result<TrainingTrace> {
    if rounds == 0 {
        return Err(Error::InvalidInput("rounds must be >= 1".into()));
    }
    if clients.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "federated training needs >= 2 clients, got {}",
            clients.len()
        )));
    }
    if let Some(sets) = eval_sets {
        if sets.len() != clients.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} eval sets vs {} clients",
                sets.len(),
                clients.len()
            )));
        }
    }
    let effective_opts = TrainOpts {
        prox_mu: match algo {
            FedAlgorithm::FedAvg => 0.0,
            FedAlgorithm::FedProx => opts.prox_mu,
        },
        ..opts.clone()
    };

    let init = init_model(spec)?;
    let mut global = init.clone();
    let mut records = Vec::with_capacity(rounds);
    for round in 0..rounds {
        let (next, deltas, metrics) =
            federated_round(&global, clients, &effective_opts, round as u64, eval_sets)?;
        let global_delta = WeightDelta::between(&next, &global)?;
        let divergence = deltas
            .iter()
            .map(|local| weight_divergence(&global_delta, local))
            .collect::<Result<Vec<_>>>()?;
        records.push(RoundRecord {
            round,
            global: next.clone(),
            client_deltas: deltas,
            divergence,
            metrics,
        });
        global = next;
    }
    Ok(TrainingTrace { init, rounds: records })
}
