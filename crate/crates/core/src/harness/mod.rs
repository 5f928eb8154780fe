//! Experiment orchestration: scenario sweeps over seeds and heterogeneity
//! levels, threshold classification and report emission.

mod experiments;
pub mod cli;
pub mod report;
pub mod stats;

pub use experiments::{run_experiment, sample_size_study};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::datagen::SyntheticConfig;
use crate::error::{Error, Result};
use crate::metric::MetricConfig;
use crate::probe::{Activation, ModelSpec, TrainOpts};

/// Collaboration recommendation bands over the normalized cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Collaboration {
    Beneficial,
    Uncertain,
    Detrimental,
}

/// Band classification with inclusive boundaries: `s <= 0.2` is beneficial,
/// `s >= 0.3` detrimental, the gap in between uncertain.
pub fn classify_collaboration(s_tilde: f64) -> Result<Collaboration> {
    if !s_tilde.is_finite() || !(0.0..=1.0).contains(&s_tilde) {
        return Err(Error::InvalidInput(format!(
            "cost must lie in [0,1], got {s_tilde}"
        )));
    }
    Ok(if s_tilde <= 0.2 {
        Collaboration::Beneficial
    } else if s_tilde >= 0.3 {
        Collaboration::Detrimental
    } else {
        Collaboration::Uncertain
    })
}

/// The experiment families the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    OverlapSweep,
    FeatureSkewSweep,
    LabelSkewSweep,
    ConceptShiftSweep,
    SampleSizeStudy,
    WeightDivergenceStudy,
    FedproxMuSweep,
    WassersteinComparison,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::OverlapSweep => "overlap_sweep",
            Scenario::FeatureSkewSweep => "feature_skew_sweep",
            Scenario::LabelSkewSweep => "label_skew_sweep",
            Scenario::ConceptShiftSweep => "concept_shift_sweep",
            Scenario::SampleSizeStudy => "sample_size_study",
            Scenario::WeightDivergenceStudy => "weight_divergence_study",
            Scenario::FedproxMuSweep => "fedprox_mu_sweep",
            Scenario::WassersteinComparison => "wasserstein_comparison",
        }
    }
}

/// Privacy settings for experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacySettings {
    pub rho: f64,
    pub delta: f64,
    #[serde(default)]
    pub allow_weak_privacy: bool,
}

/// Full configuration of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub datagen: SyntheticConfig,
    /// Heterogeneity levels; scenario-specific meaning (mixture overlap,
    /// skew severity, Dirichlet alpha, shifted-label fraction or activation
    /// scale). Empty selects the scenario default.
    pub levels: Vec<f64>,
    pub model: ModelSpec,
    pub train: TrainOpts,
    pub metric: MetricConfig,
    pub privacy: Option<PrivacySettings>,
    /// Federated training rounds for accuracy/divergence measurements.
    pub rounds: usize,
    pub seeds: Vec<u64>,
    /// When set, rows are persisted incrementally and finished seeds are
    /// skipped on rerun.
    pub output_dir: Option<PathBuf>,
    /// FedProx regularization grid; empty selects 8 log-spaced points in
    /// [1e-6, 5].
    pub mu_grid: Vec<f64>,
    /// Per-class subsample sizes for the sample-size study (the full level
    /// is always appended).
    pub subsample_levels: Vec<usize>,
    /// Per-client train fraction for held-out evaluation.
    pub eval_train_frac: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::OverlapSweep,
            datagen: SyntheticConfig::default(),
            levels: Vec::new(),
            model: ModelSpec {
                input: 16,
                hidden: vec![32, 16],
                classes: 4,
                activation: Activation::Tanh,
                seed: 0,
            },
            train: TrainOpts::default(),
            metric: MetricConfig::default(),
            privacy: None,
            rounds: 10,
            seeds: vec![0],
            output_dir: None,
            mu_grid: Vec::new(),
            subsample_levels: Vec::new(),
            eval_train_frac: 0.8,
        }
    }
}

impl ExperimentConfig {
    /// Levels actually used, falling back to scenario defaults.
    pub fn effective_levels(&self) -> Vec<f64> {
        if !self.levels.is_empty() {
            return self.levels.clone();
        }
        match self.scenario {
            Scenario::OverlapSweep => vec![0.0, 0.25, 0.5, 0.75, 1.0],
            Scenario::FeatureSkewSweep => vec![0.0, 0.5, 1.0, 2.0, 4.0],
            Scenario::LabelSkewSweep => vec![100.0, 10.0, 1.0, 0.5, 0.1],
            Scenario::ConceptShiftSweep => vec![0.0, 0.25, 0.5, 0.75, 1.0],
            Scenario::SampleSizeStudy => vec![0.5],
            Scenario::WeightDivergenceStudy => {
                (0..8).map(|i| i as f64 / 7.0).collect()
            }
            Scenario::FedproxMuSweep => vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            Scenario::WassersteinComparison => vec![1.0, 10.0],
        }
    }

    /// The FedProx grid, defaulting to 8 log-spaced points in [1e-6, 5].
    pub fn effective_mu_grid(&self) -> Vec<f64> {
        if !self.mu_grid.is_empty() {
            return self.mu_grid.clone();
        }
        let lo = 1e-6f64.ln();
        let hi = 5.0f64.ln();
        (0..8)
            .map(|i| (lo + (hi - lo) * i as f64 / 7.0).exp())
            .collect()
    }

    pub fn effective_subsample_levels(&self) -> Vec<usize> {
        if !self.subsample_levels.is_empty() {
            return self.subsample_levels.clone();
        }
        vec![10, 25, 50, 100]
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed required".into()));
        }
        self.datagen.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.train.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.metric.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.eval_train_frac) || self.eval_train_frac == 0.0 {
            return Err(Error::Config(format!(
                "eval_train_frac must lie in (0,1), got {}",
                self.eval_train_frac
            )));
        }
        match self.scenario {
            Scenario::OverlapSweep
            | Scenario::ConceptShiftSweep
            | Scenario::WeightDivergenceStudy
            | Scenario::FedproxMuSweep => {
                if self.effective_levels().iter().any(|&l| !(0.0..=1.0).contains(&l)) {
                    return Err(Error::Config(format!(
                        "{} levels must lie in [0,1]",
                        self.scenario.name()
                    )));
                }
            }
            Scenario::FeatureSkewSweep => {
                if self.effective_levels().iter().any(|&l| l < 0.0) {
                    return Err(Error::Config("feature-skew levels must be >= 0".into()));
                }
            }
            Scenario::LabelSkewSweep => {
                if self.effective_levels().iter().any(|&l| l <= 0.0) {
                    return Err(Error::Config("label-skew alpha levels must be > 0".into()));
                }
            }
            Scenario::SampleSizeStudy => {
                let per_class = self.datagen.samples_per_client / self.datagen.classes;
                if per_class < 200 {
                    return Err(Error::Config(format!(
                        "sample-size study needs >= 200 samples per class, got {per_class}"
                    )));
                }
            }
            Scenario::WassersteinComparison => {
                if self.effective_levels().iter().any(|&l| l <= 0.0) {
                    return Err(Error::Config("activation scales must be > 0".into()));
                }
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// FedProx accuracy at one regularization strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuAccuracy {
    pub mu: f64,
    pub accuracy: f64,
}

/// One (scenario, seed, level) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub scenario: Scenario,
    pub seed: u64,
    pub level: f64,
    pub s_tilde: Option<f64>,
    pub wasserstein: Option<f64>,
    pub local_accuracy: Option<f64>,
    pub fedavg_accuracy: Option<f64>,
    /// 100 * (fedavg - local) / local, from the recorded raw accuracies.
    pub improvement_pct: Option<f64>,
    pub terminal_divergence: Option<f64>,
    #[serde(default)]
    pub fedprox: Vec<MuAccuracy>,
    pub best_mu: Option<f64>,
    pub s_tilde_subsampled: Option<f64>,
    pub s_tilde_full: Option<f64>,
    pub error: Option<String>,
}

impl RunRow {
    pub fn empty(scenario: Scenario, seed: u64, level: f64) -> Self {
        Self {
            scenario,
            seed,
            level,
            s_tilde: None,
            wasserstein: None,
            local_accuracy: None,
            fedavg_accuracy: None,
            improvement_pct: None,
            terminal_divergence: None,
            fedprox: Vec::new(),
            best_mu: None,
            s_tilde_subsampled: None,
            s_tilde_full: None,
            error: None,
        }
    }
}

/// Threshold-classification confusion counts: band vs observed sign of the
/// federated improvement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub beneficial_improved: usize,
    pub beneficial_worsened: usize,
    pub uncertain_improved: usize,
    pub uncertain_worsened: usize,
    pub detrimental_improved: usize,
    pub detrimental_worsened: usize,
}

/// Aggregate statistics, all recomputable from the raw rows.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregates {
    pub spearman_s_vs_improvement: Option<f64>,
    pub spearman_s_vs_divergence: Option<f64>,
    pub spearman_wasserstein_vs_divergence: Option<f64>,
    pub spearman_s_vs_best_mu: Option<f64>,
    pub confusion: ConfusionCounts,
}

impl Aggregates {
    pub fn recompute(rows: &[RunRow]) -> Self {
        let paired = |f: fn(&RunRow) -> Option<f64>, g: fn(&RunRow) -> Option<f64>| {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for r in rows {
                if let (Some(x), Some(y)) = (f(r), g(r)) {
                    xs.push(x);
                    ys.push(y);
                }
            }
            stats::spearman(&xs, &ys)
        };

        let mut confusion = ConfusionCounts::default();
        for r in rows {
            if let (Some(s), Some(imp)) = (r.s_tilde, r.improvement_pct) {
                if let Ok(band) = classify_collaboration(s) {
                    let improved = imp >= 0.0;
                    match (band, improved) {
                        (Collaboration::Beneficial, true) => confusion.beneficial_improved += 1,
                        (Collaboration::Beneficial, false) => confusion.beneficial_worsened += 1,
                        (Collaboration::Uncertain, true) => confusion.uncertain_improved += 1,
                        (Collaboration::Uncertain, false) => confusion.uncertain_worsened += 1,
                        (Collaboration::Detrimental, true) => confusion.detrimental_improved += 1,
                        (Collaboration::Detrimental, false) => confusion.detrimental_worsened += 1,
                    }
                }
            }
        }

        Aggregates {
            spearman_s_vs_improvement: paired(|r| r.s_tilde, |r| r.improvement_pct),
            spearman_s_vs_divergence: paired(|r| r.s_tilde, |r| r.terminal_divergence),
            spearman_wasserstein_vs_divergence: paired(
                |r| r.wasserstein,
                |r| r.terminal_divergence,
            ),
            spearman_s_vs_best_mu: paired(|r| r.s_tilde, |r| r.best_mu),
            confusion,
        }
    }
}

/// All rows of an experiment plus recomputable aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema_version: String,
    pub scenario: Scenario,
    pub rows: Vec<RunRow>,
    pub aggregates: Aggregates,
}

impl ExperimentResult {
    pub fn from_rows(scenario: Scenario, mut rows: Vec<RunRow>) -> Self {
        rows.sort_by(|a, b| {
            (a.seed, a.level)
                .partial_cmp(&(b.seed, b.level))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let aggregates = Aggregates::recompute(&rows);
        Self {
            schema_version: env!("CARGO_PKG_VERSION").to_string(),
            scenario,
            rows,
            aggregates,
        }
    }

    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_bands() {
        assert_eq!(classify_collaboration(0.08).unwrap(), Collaboration::Beneficial);
        assert_eq!(classify_collaboration(0.2).unwrap(), Collaboration::Beneficial);
        assert_eq!(classify_collaboration(0.25).unwrap(), Collaboration::Uncertain);
        assert_eq!(classify_collaboration(0.3).unwrap(), Collaboration::Detrimental);
        assert_eq!(classify_collaboration(0.9).unwrap(), Collaboration::Detrimental);
        assert!(classify_collaboration(-0.1).is_err());
        assert!(classify_collaboration(1.1).is_err());
        assert!(classify_collaboration(f64::NAN).is_err());
    }

    #[test]
    fn config_toml_round_trip() {
        let cfg = ExperimentConfig {
            scenario: Scenario::FeatureSkewSweep,
            seeds: vec![1, 2, 3],
            levels: vec![0.0, 1.0, 2.0],
            ..ExperimentConfig::default()
        };
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn config_validation_catches_empty_seeds() {
        let cfg = ExperimentConfig { seeds: vec![], ..ExperimentConfig::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn sample_size_study_needs_enough_data() {
        let cfg = ExperimentConfig {
            scenario: Scenario::SampleSizeStudy,
            datagen: SyntheticConfig {
                samples_per_client: 100,
                classes: 4,
                ..SyntheticConfig::default()
            },
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn mu_grid_default_spans_paper_range() {
        let cfg = ExperimentConfig::default();
        let grid = cfg.effective_mu_grid();
        assert_eq!(grid.len(), 8);
        assert!((grid[0] - 1e-6).abs() < 1e-12);
        assert!((grid[7] - 5.0).abs() < 1e-9);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn aggregates_recompute_from_rows() {
        let mut row1 = RunRow::empty(Scenario::OverlapSweep, 0, 0.0);
        row1.s_tilde = Some(0.5);
        row1.improvement_pct = Some(-5.0);
        let mut row2 = RunRow::empty(Scenario::OverlapSweep, 0, 1.0);
        row2.s_tilde = Some(0.05);
        row2.improvement_pct = Some(4.0);
        let result = ExperimentResult::from_rows(Scenario::OverlapSweep, vec![row1, row2]);
        assert_eq!(result.aggregates.confusion.detrimental_worsened, 1);
        assert_eq!(result.aggregates.confusion.beneficial_improved, 1);
        assert_eq!(result.aggregates.spearman_s_vs_improvement, Some(-1.0));
        assert_eq!(result.aggregates, Aggregates::recompute(&result.rows));
    }
}
