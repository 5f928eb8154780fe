//! Probe networks: local and federated training of small classifiers,
//! single-round activation extraction and weight-divergence measurement.

mod federated;
mod gradient_bound;
mod io;
mod model;
mod train;

pub use federated::{
    fedavg, run_probe_round, train_federated, weight_divergence, FedAlgorithm, ProbeRound,
    RoundRecord, TrainingTrace, WeightDelta,
};
pub use gradient_bound::check_gradient_bound;
pub use io::{read_params, write_params, write_trace_csv};
pub use model::{
    evaluate, extract_activations, init_model, Activation, ActivationSet, Layer, Metrics,
    ModelParams, ModelSpec,
};
pub use train::{local_update, TrainOpts};
