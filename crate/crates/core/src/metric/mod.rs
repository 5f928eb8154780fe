//! The bounded per-class optimal-transport similarity:
//! feature cost + label cost -> hybrid cost matrix -> Sinkhorn ->
//! class-weighted aggregation and normalization into [0,1].

mod cost;
mod gaussian;
mod sinkhorn;

pub use cost::{
    feature_cost, l2_normalize, total_cost, CostComponent, CostMatrix, FeatureCostKind,
};
pub use gaussian::{class_stats, hellinger_gaussian, ClassStats};
pub use sinkhorn::{sinkhorn, uniform_marginal, wasserstein_baseline, TransportPlan};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::probe::{extract_activations, ActivationSet, ModelParams};

pub(crate) use cost::feature_cost_from_gram;

/// Knobs of the similarity computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// Feature-cost weight w_f.
    pub feature_weight: f64,
    /// Label-cost weight w_l.
    pub label_weight: f64,
    /// Entropic regularization for the per-class Sinkhorn solves.
    pub epsilon: f64,
    /// l1 marginal tolerance for Sinkhorn convergence.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Classes with fewer samples than this on either side are skipped.
    pub min_class_samples: usize,
    /// Drop the `d + 1` statistical floor on the skip threshold (needed for
    /// deliberate small-sample studies).
    pub override_stat_floor: bool,
    /// Ridge added to per-class covariances.
    pub ridge: f64,
    pub feature_cost_kind: FeatureCostKind,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            feature_weight: 2.0,
            label_weight: 1.0,
            epsilon: 1e-2,
            tolerance: 1e-6,
            max_iterations: 10_000,
            min_class_samples: 50,
            override_stat_floor: false,
            ridge: 1e-4,
            feature_cost_kind: FeatureCostKind::OneMinusCos,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_weight <= 0.0 || self.label_weight <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "cost weights must be positive, got w_f={}, w_l={}",
                self.feature_weight, self.label_weight
            )));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.tolerance <= 0.0 || self.max_iterations == 0 {
            return Err(Error::InvalidInput(
                "tolerance and max_iterations must be positive".into(),
            ));
        }
        if self.ridge <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "ridge must be > 0, got {}",
                self.ridge
            )));
        }
        Ok(())
    }

    /// Normalization ceiling `2 w_f + w_l`.
    pub fn cost_ceiling(&self) -> f64 {
        2.0 * self.feature_weight + self.label_weight
    }

    /// Skip threshold: the configured minimum, floored at `d + 1` samples so
    /// covariance estimates stay meaningful unless explicitly overridden.
    pub fn effective_min_samples(&self, dim: usize) -> usize {
        if self.override_stat_floor {
            self.min_class_samples.max(2)
        } else {
            self.min_class_samples.max(dim + 1)
        }
    }
}

/// Which client a per-class statistic belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

/// The two operations the similarity pipeline delegates, so that the plain
/// and the privacy-preserving paths share every other step.
pub trait CostBackend {
    /// Cross-client cosine Gram matrix of two row-normalized blocks.
    fn cross_gram(&mut self, a_norm: &Array2<f64>, b_norm: &Array2<f64>) -> Result<Array2<f64>>;

    /// Per-class Gaussian statistics of one side's normalized activations.
    fn class_stats(
        &mut self,
        side: Side,
        class: usize,
        h_norm: &Array2<f64>,
        ridge: f64,
    ) -> Result<ClassStats>;

    fn privacy_mode(&self) -> bool {
        false
    }
}

/// Direct computation with no privacy machinery.
pub struct PlainBackend;

impl CostBackend for PlainBackend {
    fn cross_gram(&mut self, a_norm: &Array2<f64>, b_norm: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(a_norm.dot(&b_norm.t()))
    }

    fn class_stats(
        &mut self,
        _side: Side,
        class: usize,
        h_norm: &Array2<f64>,
        ridge: f64,
    ) -> Result<ClassStats> {
        class_stats(h_norm, class, ridge)
    }
}

/// Solver summary for one per-class transport problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub iterations: usize,
    pub converged: bool,
    pub marginal_violation: f64,
}

/// One shared class's contribution to the metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassCost {
    pub class: usize,
    /// Per-class transport cost s^y.
    pub cost: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub hellinger: f64,
    pub plan: PlanSummary,
}

/// A class excluded from the aggregate, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedClass {
    pub class: usize,
    pub n_a: usize,
    pub n_b: usize,
    pub reason: String,
}

/// Cost weights as serialized in reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub feature: f64,
    pub label: f64,
}

/// Full result of one pairwise similarity computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub pair: (String, String),
    /// Aggregate normalized cost in [0,1].
    pub s_tilde: f64,
    pub per_class: Vec<PerClassCost>,
    pub skipped: Vec<SkippedClass>,
    pub weights: CostWeights,
    pub epsilon: f64,
    pub privacy_mode: bool,
}

impl SimilarityReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Run the per-class OT pipeline over two activation sets through the given
/// backend. This is the shared core of the plain and private paths.
pub fn similarity_from_activations(
    acts_a: &ActivationSet,
    acts_b: &ActivationSet,
    cfg: &MetricConfig,
    backend: &mut dyn CostBackend,
) -> Result<SimilarityReport> {
    cfg.validate()?;
    if acts_a.dim() != acts_b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "activation dims {} vs {}",
            acts_a.dim(),
            acts_b.dim()
        )));
    }
    for (name, acts) in [("A", acts_a), ("B", acts_b)] {
        if acts.activations.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("client {name} activations")));
        }
    }

    let min_samples = cfg.effective_min_samples(acts_a.dim());
    let n_classes = acts_a.n_classes.max(acts_b.n_classes);

    let counts = |acts: &ActivationSet| {
        let mut c = vec![0usize; n_classes];
        for &l in &acts.labels {
            c[l] += 1;
        }
        c
    };
    let counts_a = counts(acts_a);
    let counts_b = counts(acts_b);

    let mut per_class = Vec::new();
    let mut skipped = Vec::new();
    let mut s_total = 0.0;
    let mut n_total = 0.0;

    for class in 0..n_classes {
        let (n_a, n_b) = (counts_a[class], counts_b[class]);
        if n_a == 0 && n_b == 0 {
            continue;
        }
        if n_a == 0 || n_b == 0 {
            skipped.push(SkippedClass {
                class,
                n_a,
                n_b,
                reason: "class present on only one side".into(),
            });
            continue;
        }
        if n_a < min_samples || n_b < min_samples {
            skipped.push(SkippedClass {
                class,
                n_a,
                n_b,
                reason: format!("insufficient samples (minimum {min_samples} per side)"),
            });
            continue;
        }

        let h_a = l2_normalize(&acts_a.class_rows(class))?;
        let h_b = l2_normalize(&acts_b.class_rows(class))?;

        let gram = backend.cross_gram(&h_a, &h_b)?;
        if gram.dim() != (n_a, n_b) {
            return Err(Error::DimensionMismatch(format!(
                "backend gram {:?} vs expected ({n_a}, {n_b})",
                gram.dim()
            )));
        }
        let c_feat = feature_cost_from_gram(&gram, cfg.feature_cost_kind, class);

        let stats_a = backend.class_stats(Side::A, class, &h_a, cfg.ridge)?;
        let stats_b = backend.class_stats(Side::B, class, &h_b, cfg.ridge)?;
        let hellinger = hellinger_gaussian(&stats_a, &stats_b)?;

        let c_total = total_cost(&c_feat, hellinger, cfg.feature_weight, cfg.label_weight)?;
        let plan = sinkhorn(
            &c_total.values,
            &uniform_marginal(n_a),
            &uniform_marginal(n_b),
            cfg.epsilon,
            cfg.tolerance,
            cfg.max_iterations,
        )?;

        s_total += plan.cost * (n_a as f64) * (n_b as f64);
        n_total += (n_a as f64) * (n_b as f64);
        per_class.push(PerClassCost {
            class,
            cost: plan.cost,
            n_a,
            n_b,
            hellinger,
            plan: PlanSummary {
                iterations: plan.iterations,
                converged: plan.converged,
                marginal_violation: plan.marginal_violation,
            },
        });
    }

    if per_class.is_empty() {
        let counts = skipped
            .iter()
            .map(|s| format!("class {}: A={}, B={}", s.class, s.n_a, s.n_b))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::NoQualifyingClasses { min_samples, counts });
    }

    let s_tilde = (s_total / (n_total * cfg.cost_ceiling())).clamp(0.0, 1.0);
    Ok(SimilarityReport {
        pair: (acts_a.client_id.clone(), acts_b.client_id.clone()),
        s_tilde,
        per_class,
        skipped,
        weights: CostWeights { feature: cfg.feature_weight, label: cfg.label_weight },
        epsilon: cfg.epsilon,
        privacy_mode: backend.privacy_mode(),
    })
}

/// End-to-end pairwise similarity: extract activations from the probe model
/// and run the plain per-class OT pipeline.
pub fn pairwise_ot_similarity(
    d_a: &Dataset,
    d_b: &Dataset,
    model: &ModelParams,
    cfg: &MetricConfig,
) -> Result<SimilarityReport> {
    let acts_a = extract_activations(d_a, model, "A")?;
    let acts_b = extract_activations(d_b, model, "B")?;
    similarity_from_activations(&acts_a, &acts_b, cfg, &mut PlainBackend)
}

/// Symmetric all-pairs similarity matrix.
#[derive(Debug, Clone)]
pub struct AllPairsResult {
    /// `matrix[i][j]` is the s-tilde for pair (i, j); `None` when that pair
    /// failed (the error is recorded in `errors`).
    pub matrix: Vec<Vec<Option<f64>>>,
    pub errors: Vec<(usize, usize, String)>,
}

impl AllPairsResult {
    /// CSV with one row/column per client.
    pub fn to_csv(&self) -> String {
        let n = self.matrix.len();
        let mut out = String::from("client");
        for j in 0..n {
            out.push_str(&format!(",c{j}"));
        }
        out.push('\n');
        for (i, row) in self.matrix.iter().enumerate() {
            out.push_str(&format!("c{i}"));
            for v in row {
                match v {
                    Some(x) => out.push_str(&format!(",{x}")),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Pairwise similarity for every unordered client pair plus the diagonal
/// self-costs; per-pair failures become missing entries instead of aborting
/// the whole matrix.
pub fn cost_matrix_all_pairs(
    clients: &[Dataset],
    model: &ModelParams,
    cfg: &MetricConfig,
) -> Result<AllPairsResult> {
    if clients.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "all-pairs matrix needs >= 2 clients, got {}",
            clients.len()
        )));
    }
    let n = clients.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .collect();

    let computed: Vec<((usize, usize), std::result::Result<f64, String>)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let r = pairwise_ot_similarity(&clients[i], &clients[j], model, cfg)
                .map(|rep| rep.s_tilde)
                .map_err(|e| e.to_string());
            ((i, j), r)
        })
        .collect();

    let mut matrix = vec![vec![None; n]; n];
    let mut errors = Vec::new();
    for ((i, j), r) in computed {
        match r {
            Ok(v) => {
                matrix[i][j] = Some(v);
                matrix[j][i] = Some(v);
            }
            Err(e) => errors.push((i, j, e)),
        }
    }
    Ok(AllPairsResult { matrix, errors })
}
