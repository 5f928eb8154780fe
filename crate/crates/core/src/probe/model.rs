//! Small feed-forward classifier: seeded init, forward pass, penultimate
//! activation capture and evaluation.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the post-activation value.
    pub(crate) fn derivative_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Architecture of the probe network.
///
/// Layers run input -> hidden[0] -> ... -> hidden[last] -> classes; the last
/// hidden layer is the penultimate layer whose activations feed the metric.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelSpec {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input == 0 {
            return Err(Error::InvalidInput("input width must be >= 1".into()));
        }
        if self.hidden.is_empty() {
            return Err(Error::InvalidInput("at least one hidden layer required".into()));
        }
        if self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::InvalidInput("hidden widths must be >= 1".into()));
        }
        if self.penultimate_dim() < 2 {
            return Err(Error::InvalidInput(format!(
                "penultimate width must be >= 2, got {}",
                self.penultimate_dim()
            )));
        }
        if self.classes < 2 {
            return Err(Error::InvalidInput(format!(
                "output width must be >= 2, got {}",
                self.classes
            )));
        }
        Ok(())
    }

    /// Dimension d of the activation space.
    pub fn penultimate_dim(&self) -> usize {
        *self.hidden.last().expect("validated non-empty")
    }

    fn layer_widths(&self) -> Vec<usize> {
        let mut widths = vec![self.input];
        widths.extend_from_slice(&self.hidden);
        widths.push(self.classes);
        widths
    }
}

/// One dense layer: weight matrix (out x in) and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Ordered dense layers plus the nonlinearity they were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<Layer>,
    pub activation: Activation,
}

/// Seeded Xavier-uniform initialization; biases start at zero.
pub fn init_model(spec: &ModelSpec) -> Result<ModelParams> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let widths = spec.layer_widths();
    let layers = widths
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weight = Array2::from_shape_fn((fan_out, fan_in), |_| {
                rng.random_range(-bound..bound)
            });
            Layer { weight, bias: Array1::zeros(fan_out) }
        })
        .collect();
    Ok(ModelParams { layers, activation: spec.activation })
}

impl ModelParams {
    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").weight.nrows()
    }

    pub fn penultimate_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.ncols()
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weight.dim() == b.weight.dim() && a.bias.len() == b.bias.len())
    }

    /// Total parameter count across all layers.
    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// FNV-1a over the parameter bytes; identifies the model in provenance.
    pub fn params_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: f64| {
            for b in v.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x1000_0000_01b3);
            }
        };
        for layer in &self.layers {
            layer.weight.iter().copied().for_each(&mut eat);
            layer.bias.iter().copied().for_each(&mut eat);
        }
        h
    }

    /// Forward pass over a batch of rows; returns all post-activation hidden
    /// layers (last entry is the penultimate activation matrix) and logits.
    pub(crate) fn forward_full(&self, x: &Array2<f64>) -> (Vec<Array2<f64>>, Array2<f64>) {
        let n_hidden = self.layers.len() - 1;
        let mut hiddens = Vec::with_capacity(n_hidden);
        let mut h = x.clone();
        for layer in &self.layers[..n_hidden] {
            let mut a = h.dot(&layer.weight.t());
            a += &layer.bias;
            a.mapv_inplace(|v| self.activation.apply(v));
            hiddens.push(a.clone());
            h = a;
        }
        let out = &self.layers[n_hidden];
        let mut logits = h.dot(&out.weight.t());
        logits += &out.bias;
        (hiddens, logits)
    }

    fn check_dataset(&self, d: &Dataset) -> Result<()> {
        if d.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "dataset dim {} vs model input {}",
                d.dim(),
                self.input_dim()
            )));
        }
        if d.n_classes() != self.output_dim() {
            return Err(Error::DimensionMismatch(format!(
                "dataset classes {} vs model output {}",
                d.n_classes(),
                self.output_dim()
            )));
        }
        Ok(())
    }
}

/// Per-client penultimate activations with labels and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationSet {
    pub activations: Array2<f64>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub client_id: String,
    pub model_hash: u64,
}

impl ActivationSet {
    pub fn n(&self) -> usize {
        self.activations.nrows()
    }

    pub fn dim(&self) -> usize {
        self.activations.ncols()
    }

    /// Rows of this set belonging to class `c`.
    pub fn class_rows(&self, c: usize) -> Array2<f64> {
        let idx: Vec<usize> = self
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == c)
            .map(|(i, _)| i)
            .collect();
        Array2::from_shape_fn((idx.len(), self.dim()), |(i, j)| {
            self.activations[[idx[i], j]]
        })
    }
}

/// Run the dataset through the model and capture penultimate activations.
pub fn extract_activations(d: &Dataset, m: &ModelParams, client_id: &str) -> Result<ActivationSet> {
    m.check_dataset(d)?;
    let (hiddens, _) = m.forward_full(d.features());
    let penult = hiddens.last().expect("at least one hidden layer").clone();
    if penult.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("penultimate activations".into()));
    }
    Ok(ActivationSet {
        activations: penult,
        labels: d.labels().to_vec(),
        n_classes: d.n_classes(),
        client_id: client_id.to_string(),
        model_hash: m.params_hash(),
    })
}

/// Accuracy and mean cross-entropy loss.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub loss: f64,
}

/// Row-wise stable softmax.
pub(crate) fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    p
}

/// Mean cross-entropy of logits against integer labels.
pub(crate) fn cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (row, &y) in logits.axis_iter(Axis(0)).zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[y];
    }
    total / labels.len() as f64
}

/// Deterministic metrics of `m` on `d`.
pub fn evaluate(m: &ModelParams, d: &Dataset) -> Result<Metrics> {
    m.check_dataset(d)?;
    let (_, logits) = m.forward_full(d.features());
    let mut correct = 0usize;
    for (row, &y) in logits.axis_iter(Axis(0)).zip(d.labels()) {
        let pred = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if pred == y {
            correct += 1;
        }
    }
    Ok(Metrics {
        accuracy: correct as f64 / d.n() as f64,
        loss: cross_entropy(&logits, d.labels()),
    })
}
