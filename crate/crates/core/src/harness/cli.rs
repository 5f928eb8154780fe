//! Command-line surface: dataset generation, the single-round probe,
//! pairwise similarity, experiment sweeps and report emission.
//!
//! Exit codes: 0 success, 2 configuration error, 3 partial failure (some
//! runs failed), 4 privacy-gate refusal.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::report::{emit_report, ReportFormat};
use super::{classify_collaboration, run_experiment, ExperimentConfig};
use crate::datagen::{gen_synthetic_pair, read_cache, read_csv, write_cache, write_csv, Dataset, SyntheticConfig};
use crate::error::{Error, Result};
use crate::metric::{pairwise_ot_similarity, MetricConfig, SimilarityReport};
use crate::privacy::{private_pairwise_similarity, PrivacyBudget};
use crate::probe::{
    run_probe_round, write_params, read_params, Activation, ModelSpec, TrainOpts,
};

#[derive(Debug, Parser)]
#[command(
    name = "fedsim",
    version,
    about = "Bounded dataset-similarity metric for cross-silo federated learning"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic two-client dataset pair.
    Generate(GenerateArgs),
    /// Run the single federated probe round and save the global model.
    Probe(ProbeArgs),
    /// Compute the pairwise similarity between two client datasets.
    Similarity(SimilarityArgs),
    /// Run an experiment scenario from a config file.
    Experiment(ExperimentArgs),
    /// Re-emit a stored experiment result in another format.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// TOML file holding a synthetic-data config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Fraction of client B drawn from client A's mixture.
    #[arg(long)]
    pub overlap: Option<f64>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub cov_scale: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for client_a/client_b files.
    #[arg(long)]
    pub out: PathBuf,
    /// csv or cache (the versioned binary format).
    #[arg(long, default_value = "csv")]
    pub format: String,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub client_a: PathBuf,
    #[arg(long)]
    pub client_b: PathBuf,
    /// Hidden layer widths, comma separated; the last is the activation dim.
    #[arg(long, default_value = "32,16")]
    pub hidden: String,
    #[arg(long, default_value = "tanh")]
    pub activation: String,
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimilarityArgs {
    #[arg(long)]
    pub client_a: PathBuf,
    #[arg(long)]
    pub client_b: PathBuf,
    /// Precomputed probe model; omitted means a probe round runs first.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Cost weights as w_f:w_l.
    #[arg(long, default_value = "2:1")]
    pub weights: String,
    #[arg(long, default_value_t = 1e-2)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 50)]
    pub min_class_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Route the computation through the privacy-preserving path.
    #[arg(long)]
    pub privacy: bool,
    /// zCDP budget (requires --privacy).
    #[arg(long)]
    pub rho: Option<f64>,
    /// Target delta for the (epsilon, delta) conversion.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Proceed even when the reconstruction-infeasibility gate fails.
    #[arg(long)]
    pub allow_weak_privacy: bool,
    /// Where to write the JSON report; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Probe hyperparameters used when --model is omitted.
    #[arg(long, default_value = "32,16")]
    pub hidden: String,
    #[arg(long, default_value = "tanh")]
    pub activation: String,
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace the config's seed list with a single seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A result.json produced by `experiment`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "markdown")]
    pub format: String,
    #[arg(long)]
    pub out: PathBuf,
}

/// Load a dataset by extension: .csv or the binary cache.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_csv(path, None),
        _ => read_cache(path),
    }
}

fn parse_hidden(s: &str) -> Result<Vec<usize>> {
    let widths = s
        .split(',')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .map_err(|e| Error::Config(format!("bad hidden width {w:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if widths.is_empty() {
        return Err(Error::Config("hidden widths must not be empty".into()));
    }
    Ok(widths)
}

fn parse_activation(s: &str) -> Result<Activation> {
    match s {
        "tanh" => Ok(Activation::Tanh),
        "relu" => Ok(Activation::Relu),
        other => Err(Error::Config(format!("unknown activation {other:?}"))),
    }
}

fn parse_weights(s: &str) -> Result<(f64, f64)> {
    let (wf, wl) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("weights must be w_f:w_l, got {s:?}")))?;
    let parse = |v: &str| {
        v.parse::<f64>()
            .map_err(|e| Error::Config(format!("bad weight {v:?}: {e}")))
    };
    Ok((parse(wf)?, parse(wl)?))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Probe(args) => probe(args),
        Command::Similarity(args) => similarity(args),
        Command::Experiment(args) => experiment(args),
        Command::Report(args) => report(args),
    }
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str::<SyntheticConfig>(&text).map_err(|e| Error::Config(e.to_string()))?
        }
        None => SyntheticConfig::default(),
    };
    if let Some(v) = args.dim {
        cfg.dim = v;
    }
    if let Some(v) = args.classes {
        cfg.classes = v;
    }
    if let Some(v) = args.samples {
        cfg.samples_per_client = v;
    }
    if let Some(v) = args.overlap {
        cfg.overlap = v;
    }
    if let Some(v) = args.separation {
        cfg.mean_separation = v;
    }
    if let Some(v) = args.cov_scale {
        cfg.cov_scale = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    cfg.validate().map_err(|e| Error::Config(e.to_string()))?;

    let (a, b) = gen_synthetic_pair(&cfg)?;
    std::fs::create_dir_all(&args.out)?;
    match args.format.as_str() {
        "csv" => {
            write_csv(&a, &args.out.join("client_a.csv"))?;
            write_csv(&b, &args.out.join("client_b.csv"))?;
        }
        "cache" => {
            write_cache(&a, &args.out.join("client_a.fsds"))?;
            write_cache(&b, &args.out.join("client_b.fsds"))?;
        }
        other => return Err(Error::Config(format!("unknown format {other:?}"))),
    }
    println!(
        "generated {} samples x {} features, {} classes per client into {}",
        cfg.samples_per_client,
        cfg.dim,
        cfg.classes,
        args.out.display()
    );
    Ok(())
}

fn probe(args: ProbeArgs) -> Result<()> {
    let a = load_dataset(&args.client_a)?;
    let b = load_dataset(&args.client_b)?;
    let spec = ModelSpec {
        input: a.dim(),
        hidden: parse_hidden(&args.hidden)?,
        classes: a.n_classes().max(b.n_classes()),
        activation: parse_activation(&args.activation)?,
        seed: args.seed,
    };
    let opts = TrainOpts {
        learning_rate: args.learning_rate,
        batch_size: args.batch_size,
        epochs: args.epochs,
        prox_mu: 0.0,
        seed: args.seed,
    };
    let probe = run_probe_round(&[a, b], &spec, &opts)?;

    std::fs::create_dir_all(&args.out)?;
    let model_path = args.out.join("model.fsmp");
    write_params(&probe.global, &model_path)?;
    let summary = serde_json::json!({
        "model": model_path.display().to_string(),
        "global_delta_norm": probe.global_delta.norm(),
        "client_delta_norms": probe.client_deltas.iter().map(|d| d.norm()).collect::<Vec<_>>(),
    });
    std::fs::write(args.out.join("probe.json"), serde_json::to_string_pretty(&summary)?)?;
    println!("probe model written to {}", model_path.display());
    Ok(())
}

fn similarity(args: SimilarityArgs) -> Result<()> {
    let a = load_dataset(&args.client_a)?;
    let b = load_dataset(&args.client_b)?;
    let (w_f, w_l) = parse_weights(&args.weights)?;
    let metric = MetricConfig {
        feature_weight: w_f,
        label_weight: w_l,
        epsilon: args.epsilon,
        min_class_samples: args.min_class_samples,
        ..MetricConfig::default()
    };

    let model = match &args.model {
        Some(path) => read_params(path)?,
        None => {
            let spec = ModelSpec {
                input: a.dim(),
                hidden: parse_hidden(&args.hidden)?,
                classes: a.n_classes().max(b.n_classes()),
                activation: parse_activation(&args.activation)?,
                seed: args.seed,
            };
            let opts = TrainOpts {
                learning_rate: args.learning_rate,
                seed: args.seed,
                ..TrainOpts::default()
            };
            run_probe_round(&[a.clone(), b.clone()], &spec, &opts)?.global
        }
    };

    let report: SimilarityReport = if args.privacy {
        let rho = args
            .rho
            .ok_or_else(|| Error::Config("--privacy requires --rho".into()))?;
        let delta = args
            .delta
            .ok_or_else(|| Error::Config("--privacy requires --delta".into()))?;
        let budget = PrivacyBudget::new(rho, delta)?;
        let (report, _) = private_pairwise_similarity(
            &a,
            &b,
            &model,
            &metric,
            &budget,
            args.allow_weak_privacy,
            args.seed,
        )?;
        report
    } else {
        pairwise_ot_similarity(&a, &b, &model, &metric)?
    };

    let json = report.to_json()?;
    match &args.out {
        Some(path) => {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, &json)?;
        }
        None => println!("{json}"),
    }
    let band = classify_collaboration(report.s_tilde)?;
    eprintln!("s_tilde = {:.4} ({:?})", report.s_tilde, band);
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(out) = args.out {
        cfg.output_dir = Some(out);
    }
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    let result = run_experiment(&cfg)?;

    let out_dir = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));
    emit_report(&result, ReportFormat::Json, &out_dir)?;
    emit_report(&result, ReportFormat::Csv, &out_dir)?;
    emit_report(&result, ReportFormat::Markdown, &out_dir)?;
    println!(
        "{}: {} rows ({} failed) written to {}",
        result.scenario.name(),
        result.rows.len(),
        result.failed_rows(),
        out_dir.display()
    );

    let failed = result.failed_rows();
    if failed > 0 {
        let first = result
            .rows
            .iter()
            .find_map(|r| r.error.clone())
            .unwrap_or_default();
        return Err(Error::PartialFailure { failed, total: result.rows.len(), first });
    }
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input)?;
    let result: super::ExperimentResult = serde_json::from_str(&text)?;
    let format: ReportFormat = args.format.parse()?;
    let paths = emit_report(&result, format, &args.out)?;
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}
