//! Local client training: minibatch SGD on softmax cross-entropy with an
//! optional FedProx proximal term.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;

use super::model::{softmax, Layer, ModelParams};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Hyperparameters for a local update.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainOpts {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Local epochs E per round.
    pub epochs: usize,
    /// FedProx proximal coefficient; 0 disables the term.
    pub prox_mu: f64,
    pub seed: u64,
}

impl Default for TrainOpts {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            batch_size: 64,
            epochs: 1,
            prox_mu: 0.0,
            seed: 0,
        }
    }
}

impl TrainOpts {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidInput("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch size must be >= 1".into()));
        }
        if self.prox_mu < 0.0 {
            return Err(Error::InvalidInput(format!(
                "prox_mu must be >= 0, got {}",
                self.prox_mu
            )));
        }
        Ok(())
    }
}

/// Gradients of the batch loss for every layer.
fn backward(
    m: &ModelParams,
    batch: &Array2<f64>,
    labels: &[usize],
) -> (f64, Vec<Layer>) {
    let n_hidden = m.layers.len() - 1;
    let (hiddens, logits) = m.forward_full(batch);
    let loss = super::model::cross_entropy(&logits, labels);

    let batch_n = labels.len() as f64;
    let mut delta = softmax(&logits);
    for (i, &y) in labels.iter().enumerate() {
        delta[[i, y]] -= 1.0;
    }
    delta /= batch_n;

    let mut grads = vec![
        Layer {
            weight: Array2::zeros((0, 0)),
            bias: Array1::zeros(0),
        };
        m.layers.len()
    ];

    // Output layer.
    let last_hidden = &hiddens[n_hidden - 1];
    grads[n_hidden] = Layer {
        weight: delta.t().dot(last_hidden),
        bias: delta.sum_axis(Axis(0)),
    };

    // Hidden layers, walking backwards.
    let mut upstream = delta.dot(&m.layers[n_hidden].weight);
    for l in (0..n_hidden).rev() {
        let h = &hiddens[l];
        let mut da = upstream;
        da.zip_mut_with(h, |g, &hv| *g *= m.activation.derivative_from_output(hv));
        let input: &Array2<f64> = if l == 0 { batch } else { &hiddens[l - 1] };
        grads[l] = Layer {
            weight: da.t().dot(input),
            bias: da.sum_axis(Axis(0)),
        };
        upstream = da.dot(&m.layers[l].weight);
    }

    (loss, grads)
}

/// E epochs of minibatch SGD starting from `m`; with `prox_mu > 0` the loss
/// carries the proximal term (mu/2)*||w - w_global||^2 anchored at the input
/// parameters, applied at every minibatch step.
pub fn local_update(m: &ModelParams, d: &Dataset, opts: &TrainOpts) -> Result<ModelParams> {
    opts.validate()?;
    if d.dim() != m.input_dim() || d.n_classes() != m.output_dim() {
        return Err(Error::DimensionMismatch(format!(
            "dataset ({} features, {} classes) vs model ({} inputs, {} outputs)",
            d.dim(),
            d.n_classes(),
            m.input_dim(),
            m.output_dim()
        )));
    }

    let anchor = m.clone();
    let mut current = m.clone();
    let mut rng = rng_from_seed(opts.seed);
    let mut order: Vec<usize> = (0..d.n()).collect();

    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        for (batch_idx, chunk) in order.chunks(opts.batch_size).enumerate() {
            let batch = Array2::from_shape_fn((chunk.len(), d.dim()), |(i, j)| {
                d.features()[[chunk[i], j]]
            });
            let labels: Vec<usize> = chunk.iter().map(|&i| d.labels()[i]).collect();

            let (loss, grads) = backward(&current, &batch, &labels);
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    loss,
                    epoch,
                    batch: batch_idx,
                    learning_rate: opts.learning_rate,
                });
            }

            for ((layer, grad), anchor_layer) in current
                .layers
                .iter_mut()
                .zip(&grads)
                .zip(&anchor.layers)
            {
                ndarray::Zip::from(&mut layer.weight)
                    .and(&grad.weight)
                    .and(&anchor_layer.weight)
                    .for_each(|w, &g, &w0| {
                        *w -= opts.learning_rate * (g + opts.prox_mu * (*w - w0));
                    });
                ndarray::Zip::from(&mut layer.bias)
                    .and(&grad.bias)
                    .and(&anchor_layer.bias)
                    .for_each(|b, &g, &b0| {
                        *b -= opts.learning_rate * (g + opts.prox_mu * (*b - b0));
                    });
            }
        }
    }
    Ok(current)
}
