//! Synthetic client datasets with controllable distribution overlap, plus
//! the three heterogeneity mechanisms: feature skew, label skew and concept
//! shift.

mod io;

pub use io::{read_csv, read_cache, write_csv, write_cache};

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, SeededRng};

/// Feature matrix plus integer labels for one client.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::InvalidInput("dataset must have at least one row".into()));
        }
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows vs {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidInput(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset features".into()));
        }
        Ok(Self { features, labels, n_classes })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Row indices belonging to class `c`.
    pub fn class_indices(&self, c: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == c)
            .map(|(i, _)| i)
            .collect()
    }

    /// Per-class sample counts, indexed by class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// New dataset holding the given rows, in order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let feats = Array2::from_shape_fn((rows.len(), self.dim()), |(i, j)| {
            self.features[[rows[i], j]]
        });
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        Dataset::new(feats, labels, self.n_classes)
    }

    /// Keep at most `per_class` samples of each class, chosen at random.
    pub fn subsample_per_class(&self, per_class: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(derive_seed(seed, "subsample", 0));
        let mut keep = Vec::new();
        for c in 0..self.n_classes {
            let mut idx = self.class_indices(c);
            idx.shuffle(&mut rng);
            idx.truncate(per_class);
            keep.extend(idx);
        }
        keep.sort_unstable();
        self.select(&keep)
    }

    /// Stack datasets with matching dimension and class count.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("concat needs at least one dataset".into()))?;
        let (p, k) = (first.dim(), first.n_classes());
        if parts.iter().any(|d| d.dim() != p || d.n_classes() != k) {
            return Err(Error::DimensionMismatch(
                "concat requires identical dims and class counts".into(),
            ));
        }
        let total: usize = parts.iter().map(|d| d.n()).sum();
        let mut feats = Array2::zeros((total, p));
        let mut labels = Vec::with_capacity(total);
        let mut row = 0;
        for d in parts {
            for i in 0..d.n() {
                feats.row_mut(row).assign(&d.features().row(i));
                labels.push(d.labels()[i]);
                row += 1;
            }
        }
        Dataset::new(feats, labels, k)
    }

    /// Seeded split into (train, test) with `train_frac` of each class in train.
    pub fn split(&self, train_frac: f64, seed: u64) -> Result<(Self, Self)> {
        if !(0.0..1.0).contains(&train_frac) || train_frac == 0.0 {
            return Err(Error::InvalidInput(format!(
                "train fraction must be in (0,1), got {train_frac}"
            )));
        }
        let mut rng = rng_from_seed(derive_seed(seed, "split", 0));
        let mut train = Vec::new();
        let mut test = Vec::new();
        for c in 0..self.n_classes {
            let mut idx = self.class_indices(c);
            idx.shuffle(&mut rng);
            let cut = ((idx.len() as f64) * train_frac).round() as usize;
            let cut = cut.clamp(1, idx.len().saturating_sub(1).max(1));
            train.extend_from_slice(&idx[..cut]);
            test.extend_from_slice(&idx[cut..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.select(&train)?, self.select(&test)?))
    }
}

/// Parameters for [`gen_synthetic_pair`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticConfig {
    /// Feature dimension p.
    pub dim: usize,
    /// Number of classes K.
    pub classes: usize,
    /// Samples per client.
    pub samples_per_client: usize,
    /// Fraction of client B's samples drawn from client A's mixture.
    pub overlap: f64,
    /// Distance of component means from the origin.
    pub mean_separation: f64,
    /// Standard deviation of each mixture component.
    pub cov_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            dim: 16,
            classes: 4,
            samples_per_client: 800,
            overlap: 1.0,
            mean_separation: 4.0,
            cov_scale: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidInput(format!("dim must be >= 2, got {}", self.dim)));
        }
        if self.classes < 2 {
            return Err(Error::InvalidInput(format!(
                "classes must be >= 2, got {}",
                self.classes
            )));
        }
        if self.samples_per_client == 0 {
            return Err(Error::InvalidInput("samples_per_client must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::InvalidInput(format!(
                "overlap must lie in [0,1], got {}",
                self.overlap
            )));
        }
        if self.mean_separation < 0.0 || self.cov_scale <= 0.0 {
            return Err(Error::InvalidInput(
                "mean_separation must be >= 0 and cov_scale > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Which heterogeneity mechanism to apply, and how hard.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeterogeneitySpec {
    /// Affine site transform of magnitude `severity` (p(X) changes only).
    FeatureSkew { severity: f64, seed: u64 },
    /// Dirichlet(alpha) class allocation across `n_clients` (p(y) changes only).
    LabelSkew { alpha: f64, n_clients: usize, seed: u64 },
    /// Each label deranged with probability `fraction` (p(y|X) changes only).
    ConceptShift { fraction: f64, seed: u64 },
}

impl HeterogeneitySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            HeterogeneitySpec::FeatureSkew { severity, .. } if severity < 0.0 => Err(
                Error::InvalidInput(format!("feature-skew severity must be >= 0, got {severity}")),
            ),
            HeterogeneitySpec::LabelSkew { alpha, .. } if alpha <= 0.0 => Err(
                Error::InvalidInput(format!("Dirichlet alpha must be > 0, got {alpha}")),
            ),
            HeterogeneitySpec::LabelSkew { n_clients, .. } if n_clients < 2 => Err(
                Error::InvalidInput(format!("label skew needs >= 2 clients, got {n_clients}")),
            ),
            HeterogeneitySpec::ConceptShift { fraction, .. }
                if !(0.0..=1.0).contains(&fraction) =>
            {
                Err(Error::InvalidInput(format!(
                    "concept-shift fraction must lie in [0,1], got {fraction}"
                )))
            }
            _ => Ok(()),
        }
    }
}

fn random_unit_vector(dim: usize, rng: &mut SeededRng) -> Array1<f64> {
    loop {
        let v = Array1::from_iter((0..dim).map(|_| {
            let x: f64 = StandardNormal.sample(rng);
            x
        }));
        let norm = v.dot(&v).sqrt();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Component means for one mixture: K points at `separation` from the origin
/// in random directions.
fn mixture_means(cfg: &SyntheticConfig, rng: &mut SeededRng) -> Vec<Array1<f64>> {
    (0..cfg.classes)
        .map(|_| random_unit_vector(cfg.dim, rng) * cfg.mean_separation)
        .collect()
}

/// A random permutation with no fixed point, by rejection.
fn derangement(k: usize, rng: &mut SeededRng) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidInput(
            "no derangement exists for fewer than 2 classes".into(),
        ));
    }
    let mut perm: Vec<usize> = (0..k).collect();
    loop {
        perm.shuffle(rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return Ok(perm);
        }
    }
}

/// Balanced label vector (counts differ by at most one), in shuffled order.
fn balanced_labels(n: usize, k: usize, rng: &mut SeededRng) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    labels.shuffle(rng);
    labels
}

fn sample_component(
    mean: &Array1<f64>,
    scale: f64,
    rng: &mut SeededRng,
) -> Array1<f64> {
    Array1::from_iter(mean.iter().map(|&m| {
        let z: f64 = StandardNormal.sample(rng);
        m + scale * z
    }))
}

/// Generate the two-client synthetic pair.
///
/// Client A draws from a K-component Gaussian mixture M_A. Client B draws
/// each sample from M_A with probability `overlap` and otherwise from a
/// second mixture M_B that reuses M_A's component locations under a seeded
/// derangement of the class assignment, so that fully disjoint pairs
/// (`overlap = 0`) place conflicting labels on the same feature regions.
pub fn gen_synthetic_pair(cfg: &SyntheticConfig) -> Result<(Dataset, Dataset)> {
    cfg.validate()?;

    let mut geometry_rng = rng_from_seed(derive_seed(cfg.seed, "mixture-means", 0));
    let means_a = mixture_means(cfg, &mut geometry_rng);
    let mut derange_rng = rng_from_seed(derive_seed(cfg.seed, "mixture-derangement", 0));
    let sigma = derangement(cfg.classes, &mut derange_rng)?;

    let n = cfg.samples_per_client;
    let build = |client: u64, cfg: &SyntheticConfig| -> Result<Dataset> {
        let mut rng = rng_from_seed(derive_seed(cfg.seed, "client", client));
        let labels = balanced_labels(n, cfg.classes, &mut rng);
        let mut feats = Array2::zeros((n, cfg.dim));
        for (i, &label) in labels.iter().enumerate() {
            let aligned = client == 0 || rng.random::<f64>() < cfg.overlap;
            let mean = if aligned { &means_a[label] } else { &means_a[sigma[label]] };
            let x = sample_component(mean, cfg.cov_scale, &mut rng);
            feats.row_mut(i).assign(&x);
        }
        Dataset::new(feats, labels, cfg.classes)
    };

    Ok((build(0, cfg)?, build(1, cfg)?))
}

/// Apply a seeded affine site transform: rotation by angles proportional to
/// `severity` plus a mean shift of magnitude `severity` along a random
/// direction. Labels are untouched and `severity = 0` is the identity.
pub fn apply_feature_skew(d: &Dataset, severity: f64, seed: u64) -> Result<Dataset> {
    if severity < 0.0 {
        return Err(Error::InvalidInput(format!(
            "feature-skew severity must be >= 0, got {severity}"
        )));
    }
    let p = d.dim();
    let mut rng = rng_from_seed(derive_seed(seed, "feature-skew", 0));
    let shift = random_unit_vector(p, &mut rng) * severity;

    // Disjoint coordinate pairs with per-pair base angles; the applied angle
    // scales linearly with severity.
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng);
    let planes: Vec<(usize, usize, f64)> = order
        .chunks_exact(2)
        .map(|pair| {
            let theta: f64 = rng.random_range(-std::f64::consts::FRAC_PI_4..std::f64::consts::FRAC_PI_4);
            (pair[0], pair[1], theta)
        })
        .collect();

    let mut feats = d.features().clone();
    for mut row in feats.rows_mut() {
        for &(i, j, theta) in &planes {
            let angle = severity * theta;
            let (s, c) = angle.sin_cos();
            let (xi, xj) = (row[i], row[j]);
            row[i] = c * xi - s * xj;
            row[j] = s * xi + c * xj;
        }
        for (k, v) in shift.iter().enumerate() {
            row[k] += v;
        }
    }
    Dataset::new(feats, d.labels().to_vec(), d.n_classes())
}

/// Result of a label-skew partition.
#[derive(Debug, Clone)]
pub struct LabelSkewPartition {
    pub clients: Vec<Dataset>,
    /// (class, client) slices that received zero samples.
    pub empty_slices: Vec<(usize, usize)>,
    /// Repair notes, e.g. a sample moved so that no client ends up empty.
    pub warnings: Vec<String>,
}

/// Partition `d` across `n_clients` by per-class Dirichlet(alpha) proportions.
///
/// The union of the output exactly equals the input (no sample duplicated or
/// dropped). A class with fewer samples than clients may leave some clients
/// without that class; such slices are reported in `empty_slices`. If extreme
/// skew would leave a client with no samples at all, one sample is moved from
/// the largest client and the repair is recorded in `warnings`.
pub fn apply_label_skew(
    d: &Dataset,
    alpha: f64,
    n_clients: usize,
    seed: u64,
) -> Result<LabelSkewPartition> {
    HeterogeneitySpec::LabelSkew { alpha, n_clients, seed }.validate()?;

    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|e| Error::InvalidInput(format!("Dirichlet parameters rejected: {e}")))?;

    let mut assignments: Vec<Vec<usize>> = vec![Vec::new(); n_clients];
    let mut empty_slices = Vec::new();

    for c in 0..d.n_classes() {
        let mut idx = d.class_indices(c);
        if idx.is_empty() {
            continue;
        }
        let mut rng = rng_from_seed(derive_seed(seed, "label-skew-class", c as u64));
        idx.shuffle(&mut rng);
        // Symmetric Dirichlet(alpha) via normalized Gamma draws.
        let props: Vec<f64> = loop {
            let draws: Vec<f64> = (0..n_clients).map(|_| gamma.sample(&mut rng)).collect();
            let sum: f64 = draws.iter().sum();
            if sum > 0.0 && sum.is_finite() {
                break draws.into_iter().map(|g| g / sum).collect();
            }
        };
        let counts = apportion(idx.len(), &props);
        let mut start = 0;
        for (client, &count) in counts.iter().enumerate() {
            if count == 0 {
                empty_slices.push((c, client));
            }
            assignments[client].extend_from_slice(&idx[start..start + count]);
            start += count;
        }
    }

    let mut warnings = Vec::new();
    loop {
        let Some(empty) = assignments.iter().position(Vec::is_empty) else { break };
        let donor = assignments
            .iter()
            .enumerate()
            .max_by_key(|(_, v)| v.len())
            .map(|(i, _)| i)
            .expect("at least one client");
        if assignments[donor].len() <= 1 {
            return Err(Error::InvalidInput(format!(
                "cannot partition {} samples across {} clients",
                d.n(),
                n_clients
            )));
        }
        let moved = assignments[donor].pop().expect("donor non-empty");
        assignments[empty].push(moved);
        warnings.push(format!(
            "client {empty} received no samples; moved one sample from client {donor}"
        ));
    }

    let clients = assignments
        .into_iter()
        .enumerate()
        .map(|(client, mut rows)| {
            let mut rng = rng_from_seed(derive_seed(seed, "label-skew-order", client as u64));
            rows.shuffle(&mut rng);
            d.select(&rows)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(LabelSkewPartition { clients, empty_slices, warnings })
}

/// Largest-remainder apportionment of `total` items by `props`.
fn apportion(total: usize, props: &[f64]) -> Vec<usize> {
    let sum: f64 = props.iter().sum();
    let quotas: Vec<f64> = props.iter().map(|p| p / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut assigned: usize = counts.iter().sum();
    let mut remainders: Vec<(usize, f64)> = quotas
        .iter()
        .enumerate()
        .map(|(i, q)| (i, q - q.floor()))
        .collect();
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    let mut k = 0;
    while assigned < total {
        counts[remainders[k % remainders.len()].0] += 1;
        assigned += 1;
        k += 1;
    }
    counts
}

/// Replace each label by a seeded derangement of the class indices with
/// probability `fraction`. Features are untouched.
pub fn apply_concept_shift(d: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    HeterogeneitySpec::ConceptShift { fraction, seed }.validate()?;
    if d.n_classes() < 2 {
        return Err(Error::InvalidInput(
            "concept shift needs >= 2 classes (no derangement exists)".into(),
        ));
    }
    let mut rng = rng_from_seed(derive_seed(seed, "concept-shift", 0));
    let sigma = derangement(d.n_classes(), &mut rng)?;
    let labels = d
        .labels()
        .iter()
        .map(|&l| if rng.random::<f64>() < fraction { sigma[l] } else { l })
        .collect();
    Dataset::new(d.features().clone(), labels, d.n_classes())
}
