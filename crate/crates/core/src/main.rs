use clap::{Args, Parser, Subcommand};
use hallumark::cli::{run_detect, run_evaluate, run_sample, run_tune, ProviderChoice, RunManifest};
use hallumark::evaluator::CorrelationKind;
use hallumark::sampler::{ApiShape, SamplingProfile};
use hallumark::tuner::Objective;
use std::path::PathBuf;

/// Hallucination span detection over sampled LLM responses, with evaluation
/// and tuning for character-offset span tasks.
#[derive(Parser)]
#[command(name = "hallumark", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Input records, line-delimited JSON.
    #[arg(long)]
    input: PathBuf,
    /// Output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Only process records with this language code.
    #[arg(long)]
    lang: Option<String>,
    /// Worker threads (0 = library default).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Predict hallucination spans for each input record.
    Detect {
        #[command(flatten)]
        common: CommonArgs,
        /// Detection config file: a per-language JSON map or a single config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Embedding provider.
        #[arg(long, default_value = "stub")]
        provider: ProviderChoice,
        /// Offline samples file (record id -> sample texts).
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Never touch the network; samples must come from --samples or
        /// inline sample_texts.
        #[arg(long)]
        offline: bool,
        /// Sample cache directory.
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        /// Refuse fresh network sampling so reruns are byte-identical.
        #[arg(long)]
        deterministic: bool,
    },
    /// Score a predictions file against gold labels.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Predictions file produced by `detect`.
        #[arg(long)]
        predictions: PathBuf,
        /// Correlation coefficient for the Cor metric.
        #[arg(long, default_value = "spearman")]
        metric: CorrelationKind,
    },
    /// Generate the stochastic sample sets for each record.
    Sample {
        #[command(flatten)]
        common: CommonArgs,
        /// Sample cache directory.
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        /// Completion endpoint URL (defaults to $HALLUMARK_COMPLETION_URL).
        #[arg(long)]
        endpoint: Option<String>,
        /// Model id sent to the endpoint.
        #[arg(long)]
        model: Option<String>,
        /// Endpoint request shape.
        #[arg(long, value_enum, default_value_t = ApiShapeArg::Chat)]
        api_shape: ApiShapeArg,
        /// Completions per query.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Grid-search detection hyperparameters per language on gold-labeled
    /// records, writing a config file `detect --config` understands.
    Tune {
        #[command(flatten)]
        common: CommonArgs,
        /// Grid spec file; built-in candidate lists when omitted.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Embedding provider.
        #[arg(long, default_value = "stub")]
        provider: ProviderChoice,
        /// Offline samples file (record id -> sample texts).
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        offline: bool,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        /// Tuning objective.
        #[arg(long, value_enum, default_value_t = ObjectiveArg::Iou)]
        objective: ObjectiveArg,
    },
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum ApiShapeArg {
    Chat,
    Completion,
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum ObjectiveArg {
    Iou,
    Cor,
}

fn manifest_from(common: &CommonArgs) -> RunManifest {
    RunManifest {
        input: common.input.clone(),
        output: common.output.clone(),
        lang: common.lang.clone(),
        jobs: common.jobs,
        ..RunManifest::default()
    }
}

fn run() -> hallumark::Result<()> {
    match Cli::parse().command {
        Command::Detect {
            common,
            config,
            provider,
            samples,
            offline,
            cache_dir,
            deterministic,
        } => {
            let manifest = RunManifest {
                config,
                provider,
                samples,
                offline,
                cache_dir,
                deterministic,
                ..manifest_from(&common)
            };
            run_detect(&manifest)
        }
        Command::Evaluate {
            common,
            predictions,
            metric,
        } => {
            let manifest = RunManifest {
                predictions: Some(predictions),
                metric,
                ..manifest_from(&common)
            };
            run_evaluate(&manifest)
        }
        Command::Sample {
            common,
            cache_dir,
            endpoint,
            model,
            api_shape,
            n,
        } => {
            let manifest = RunManifest {
                cache_dir,
                ..manifest_from(&common)
            };
            let mut profile = SamplingProfile {
                endpoint: endpoint
                    .or_else(|| std::env::var(hallumark::cli::ENV_COMPLETION_URL).ok())
                    .unwrap_or_default(),
                auth_token: std::env::var(hallumark::cli::ENV_COMPLETION_TOKEN).ok(),
                api_shape: match api_shape {
                    ApiShapeArg::Chat => ApiShape::Chat,
                    ApiShapeArg::Completion => ApiShape::Completion,
                },
                ..SamplingProfile::default()
            };
            if let Some(model) = model {
                profile.model = model;
            }
            if let Some(n) = n {
                profile.sample_count = n;
            }
            run_sample(&manifest, &profile)
        }
        Command::Tune {
            common,
            grid,
            provider,
            samples,
            offline,
            cache_dir,
            objective,
        } => {
            let manifest = RunManifest {
                provider,
                samples,
                offline,
                cache_dir,
                ..manifest_from(&common)
            };
            let objective = match objective {
                ObjectiveArg::Iou => Objective::MeanIou,
                ObjectiveArg::Cor => Objective::MeanCor,
            };
            run_tune(&manifest, grid.as_deref(), objective)
        }
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
