//! Scenario implementations: how each experiment builds its client pair,
//! what it measures, and the seed fan-out with incremental persistence.

use std::collections::HashSet;

use rayon::prelude::*;

use super::report::{append_rows_csv, read_rows_csv};
use super::{ExperimentConfig, ExperimentResult, MuAccuracy, RunRow, Scenario};
use crate::datagen::{
    apply_concept_shift, apply_feature_skew, apply_label_skew, gen_synthetic_pair, Dataset,
    SyntheticConfig,
};
use crate::error::{Error, Result};
use crate::metric::{
    pairwise_ot_similarity, similarity_from_activations, wasserstein_baseline, MetricConfig,
    PlainBackend,
};
use crate::privacy::{private_pairwise_similarity, PrivacyBudget};
use crate::probe::{
    evaluate, extract_activations, init_model, local_update, run_probe_round, train_federated,
    ActivationSet, FedAlgorithm, ModelSpec, TrainOpts,
};
use crate::rng::derive_seed;

const BASELINE_EPSILON_SCALE: f64 = 0.01;
const BASELINE_TOL: f64 = 1e-4;
const BASELINE_MAX_ITER: usize = 5_000;

/// Run the configured scenario over all seeds and levels. Per-run failures
/// are recorded in their row rather than aborting the sweep; with an output
/// directory set, finished (seed, level) combinations are skipped on rerun.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;

    let mut rows: Vec<RunRow> = Vec::new();
    let rows_path = cfg.output_dir.as_ref().map(|d| d.join("rows.csv"));
    if let Some(path) = &rows_path {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        if path.exists() {
            rows = read_rows_csv(path)?;
        }
    }
    let mut done: HashSet<(u64, u64)> = rows
        .iter()
        .map(|r| (r.seed, r.level.to_bits()))
        .collect();

    for &seed in &cfg.seeds {
        let jobs: Vec<f64> = job_levels(cfg)
            .into_iter()
            .filter(|level| !done.contains(&(seed, level.to_bits())))
            .collect();
        if jobs.is_empty() {
            continue;
        }
        let new_rows: Vec<RunRow> = jobs
            .par_iter()
            .map(|&level| run_one(cfg, seed, level))
            .collect();
        if let Some(path) = &rows_path {
            append_rows_csv(path, &new_rows)?;
        }
        for r in &new_rows {
            done.insert((r.seed, r.level.to_bits()));
        }
        rows.extend(new_rows);
    }

    Ok(ExperimentResult::from_rows(cfg.scenario, rows))
}

/// The per-seed job levels; for the sample-size study these are subsample
/// sizes (plus the full level), for everything else heterogeneity levels.
fn job_levels(cfg: &ExperimentConfig) -> Vec<f64> {
    match cfg.scenario {
        Scenario::SampleSizeStudy => {
            let full = cfg.datagen.samples_per_client / cfg.datagen.classes;
            let mut levels: Vec<f64> = cfg
                .effective_subsample_levels()
                .into_iter()
                .filter(|&k| k < full)
                .map(|k| k as f64)
                .collect();
            levels.push(full as f64);
            levels
        }
        _ => cfg.effective_levels(),
    }
}

fn run_one(cfg: &ExperimentConfig, seed: u64, level: f64) -> RunRow {
    match scenario_body(cfg, seed, level) {
        Ok(row) => row,
        Err(e) => {
            let mut row = RunRow::empty(cfg.scenario, seed, level);
            row.error = Some(e.to_string());
            row
        }
    }
}

fn scenario_body(cfg: &ExperimentConfig, seed: u64, level: f64) -> Result<RunRow> {
    match cfg.scenario {
        Scenario::OverlapSweep | Scenario::WeightDivergenceStudy => {
            let (a, b) = overlap_pair(cfg, seed, level)?;
            full_pipeline(cfg, seed, level, &a, &b)
        }
        Scenario::FeatureSkewSweep => {
            let (a, b) = overlap_pair(cfg, seed, 1.0)?;
            let b = apply_feature_skew(&b, level, derive_seed(seed, "feature-skew", 0))?;
            full_pipeline(cfg, seed, level, &a, &b)
        }
        Scenario::ConceptShiftSweep => {
            let (a, b) = overlap_pair(cfg, seed, 1.0)?;
            let b = apply_concept_shift(&b, level, derive_seed(seed, "concept-shift", 0))?;
            full_pipeline(cfg, seed, level, &a, &b)
        }
        Scenario::LabelSkewSweep => {
            let (a, b) = overlap_pair(cfg, seed, 1.0)?;
            let pooled = Dataset::concat(&[&a, &b])?;
            let part = apply_label_skew(&pooled, level, 2, derive_seed(seed, "label-skew", 0))?;
            full_pipeline(cfg, seed, level, &part.clients[0], &part.clients[1])
        }
        Scenario::FedproxMuSweep => fedprox_body(cfg, seed, level),
        Scenario::WassersteinComparison => scale_body(cfg, seed, level),
        Scenario::SampleSizeStudy => sample_size_body(cfg, seed, level),
    }
}

fn overlap_pair(cfg: &ExperimentConfig, seed: u64, overlap: f64) -> Result<(Dataset, Dataset)> {
    let data_cfg = SyntheticConfig {
        overlap,
        seed: derive_seed(seed, "data", 0),
        ..cfg.datagen.clone()
    };
    gen_synthetic_pair(&data_cfg)
}

fn model_spec_for(cfg: &ExperimentConfig, input: usize, seed: u64) -> ModelSpec {
    ModelSpec {
        input,
        seed: derive_seed(seed, "model", 0),
        ..cfg.model.clone()
    }
}

fn train_opts_for(cfg: &ExperimentConfig, seed: u64) -> TrainOpts {
    TrainOpts {
        seed: derive_seed(seed, "train", 0),
        ..cfg.train.clone()
    }
}

fn probe_similarity(
    cfg: &ExperimentConfig,
    seed: u64,
    train_a: &Dataset,
    train_b: &Dataset,
    model: &crate::probe::ModelParams,
) -> Result<f64> {
    match &cfg.privacy {
        Some(p) => {
            let budget = PrivacyBudget::new(p.rho, p.delta)?;
            let (report, _) = private_pairwise_similarity(
                train_a,
                train_b,
                model,
                &cfg.metric,
                &budget,
                p.allow_weak_privacy,
                derive_seed(seed, "privacy", 0),
            )?;
            Ok(report.s_tilde)
        }
        None => Ok(pairwise_ot_similarity(train_a, train_b, model, &cfg.metric)?.s_tilde),
    }
}

fn mean_accuracy(metrics: &[crate::probe::Metrics]) -> f64 {
    metrics.iter().map(|m| m.accuracy).sum::<f64>() / metrics.len() as f64
}

/// Probe similarity, Wasserstein baseline, federated-vs-local accuracy and
/// terminal weight divergence for one client pair.
fn full_pipeline(
    cfg: &ExperimentConfig,
    seed: u64,
    level: f64,
    a: &Dataset,
    b: &Dataset,
) -> Result<RunRow> {
    let (train_a, test_a) = a.split(cfg.eval_train_frac, derive_seed(seed, "split", 0))?;
    let (train_b, test_b) = b.split(cfg.eval_train_frac, derive_seed(seed, "split", 1))?;
    let spec = model_spec_for(cfg, a.dim(), seed);
    let opts = train_opts_for(cfg, seed);

    let clients = vec![train_a.clone(), train_b.clone()];
    let probe = run_probe_round(&clients, &spec, &opts)?;
    let s_tilde = probe_similarity(cfg, seed, &train_a, &train_b, &probe.global)?;

    let acts_a = extract_activations(&train_a, &probe.global, "A")?;
    let acts_b = extract_activations(&train_b, &probe.global, "B")?;
    let wasserstein = wasserstein_baseline(
        &acts_a,
        &acts_b,
        BASELINE_EPSILON_SCALE,
        BASELINE_TOL,
        BASELINE_MAX_ITER,
    )?;

    let eval_sets = vec![test_a.clone(), test_b.clone()];
    let trace = train_federated(
        &clients,
        &spec,
        &opts,
        cfg.rounds,
        FedAlgorithm::FedAvg,
        Some(&eval_sets),
    )?;
    let fedavg_accuracy = mean_accuracy(&trace.rounds.last().expect("rounds >= 1").metrics);
    let terminal_divergence = trace.terminal_divergence();

    // Local baseline: same init, same total epoch budget, no federation.
    let local_opts = TrainOpts { epochs: cfg.rounds * opts.epochs, ..opts.clone() };
    let init = init_model(&spec)?;
    let local_a = local_update(&init, &train_a, &local_opts)?;
    let local_b = local_update(&init, &train_b, &local_opts)?;
    let local_accuracy = (evaluate(&local_a, &test_a)?.accuracy
        + evaluate(&local_b, &test_b)?.accuracy)
        / 2.0;
    if local_accuracy == 0.0 {
        return Err(Error::InvalidInput("local baseline accuracy is zero".into()));
    }
    let improvement_pct = 100.0 * (fedavg_accuracy - local_accuracy) / local_accuracy;

    let mut row = RunRow::empty(cfg.scenario, seed, level);
    row.s_tilde = Some(s_tilde);
    row.wasserstein = Some(wasserstein);
    row.local_accuracy = Some(local_accuracy);
    row.fedavg_accuracy = Some(fedavg_accuracy);
    row.improvement_pct = Some(improvement_pct);
    row.terminal_divergence = Some(terminal_divergence);
    Ok(row)
}

/// FedProx sweep over the regularization grid; models are evaluated as
/// personalized (final local) models per client, and the best mu prefers
/// stronger regularization on ties.
fn fedprox_body(cfg: &ExperimentConfig, seed: u64, level: f64) -> Result<RunRow> {
    let (a, b) = overlap_pair(cfg, seed, level)?;
    let (train_a, test_a) = a.split(cfg.eval_train_frac, derive_seed(seed, "split", 0))?;
    let (train_b, test_b) = b.split(cfg.eval_train_frac, derive_seed(seed, "split", 1))?;
    let spec = model_spec_for(cfg, a.dim(), seed);
    let opts = train_opts_for(cfg, seed);

    let clients = vec![train_a.clone(), train_b.clone()];
    let probe = run_probe_round(&clients, &spec, &opts)?;
    let s_tilde = probe_similarity(cfg, seed, &train_a, &train_b, &probe.global)?;

    let local_opts = TrainOpts { epochs: cfg.rounds * opts.epochs, ..opts.clone() };
    let init = init_model(&spec)?;
    let local_a = local_update(&init, &train_a, &local_opts)?;
    let local_b = local_update(&init, &train_b, &local_opts)?;
    let local_accuracy = (evaluate(&local_a, &test_a)?.accuracy
        + evaluate(&local_b, &test_b)?.accuracy)
        / 2.0;

    let mut fedprox = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    for &mu in &cfg.effective_mu_grid() {
        let prox_opts = TrainOpts { prox_mu: mu, ..opts.clone() };
        let trace = train_federated(
            &clients,
            &spec,
            &prox_opts,
            cfg.rounds,
            FedAlgorithm::FedProx,
            None,
        )?;
        let locals = trace.final_local_models();
        let accuracy = (evaluate(&locals[0], &test_a)?.accuracy
            + evaluate(&locals[1], &test_b)?.accuracy)
            / 2.0;
        fedprox.push(MuAccuracy { mu, accuracy });
        let better = match best {
            None => true,
            Some((best_acc, _)) => accuracy >= best_acc,
        };
        if better {
            best = Some((accuracy, mu));
        }
    }

    let mut row = RunRow::empty(cfg.scenario, seed, level);
    row.s_tilde = Some(s_tilde);
    row.local_accuracy = Some(local_accuracy);
    row.fedprox = fedprox;
    row.best_mu = best.map(|(_, mu)| mu);
    Ok(row)
}

/// Scale-contrast run: multiply both activation sets by `level` and record
/// the normalized metric next to the raw Wasserstein baseline.
fn scale_body(cfg: &ExperimentConfig, seed: u64, level: f64) -> Result<RunRow> {
    let (a, b) = overlap_pair(cfg, seed, cfg.datagen.overlap)?;
    let spec = model_spec_for(cfg, a.dim(), seed);
    let opts = train_opts_for(cfg, seed);
    let probe = run_probe_round(&[a.clone(), b.clone()], &spec, &opts)?;

    let scale = |acts: &ActivationSet| ActivationSet {
        activations: acts.activations.mapv(|v| v * level),
        ..acts.clone()
    };
    let acts_a = scale(&extract_activations(&a, &probe.global, "A")?);
    let acts_b = scale(&extract_activations(&b, &probe.global, "B")?);

    let report = similarity_from_activations(&acts_a, &acts_b, &cfg.metric, &mut PlainBackend)?;
    let wasserstein = wasserstein_baseline(
        &acts_a,
        &acts_b,
        BASELINE_EPSILON_SCALE,
        BASELINE_TOL,
        BASELINE_MAX_ITER,
    )?;

    let mut row = RunRow::empty(cfg.scenario, seed, level);
    row.s_tilde = Some(report.s_tilde);
    row.wasserstein = Some(wasserstein);
    Ok(row)
}

/// One subsample level of the sample-size study: the probe model and the
/// full-data reference cost are recomputed deterministically per seed, then
/// the metric is re-estimated on `level` samples per class.
fn sample_size_body(cfg: &ExperimentConfig, seed: u64, level: f64) -> Result<RunRow> {
    let (a, b) = overlap_pair(cfg, seed, cfg.datagen.overlap)?;
    let spec = model_spec_for(cfg, a.dim(), seed);
    let opts = train_opts_for(cfg, seed);
    let probe = run_probe_round(&[a.clone(), b.clone()], &spec, &opts)?;

    // Small subsamples are the point here, so drop the statistical floor.
    let study_metric = MetricConfig {
        min_class_samples: 2,
        override_stat_floor: true,
        ..cfg.metric.clone()
    };

    let s_full = pairwise_ot_similarity(&a, &b, &probe.global, &study_metric)?.s_tilde;
    let per_class = level as usize;
    let sub_a = a.subsample_per_class(per_class, derive_seed(seed, "subsample-a", 0))?;
    let sub_b = b.subsample_per_class(per_class, derive_seed(seed, "subsample-b", 0))?;
    let s_sub = pairwise_ot_similarity(&sub_a, &sub_b, &probe.global, &study_metric)?.s_tilde;

    let mut row = RunRow::empty(cfg.scenario, seed, level);
    row.s_tilde_subsampled = Some(s_sub);
    row.s_tilde_full = Some(s_full);
    row.s_tilde = Some(s_sub);
    Ok(row)
}

/// The sample-size study as a standalone operation.
pub fn sample_size_study(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let cfg = ExperimentConfig { scenario: Scenario::SampleSizeStudy, ..cfg.clone() };
    run_experiment(&cfg)
}
