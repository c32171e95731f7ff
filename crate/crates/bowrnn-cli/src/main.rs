//! Command-line front end for the bag-of-words sequence classification
//! pipeline: synthetic data generation, codebook and network training,
//! histogram encoding, classification, and evaluation.

mod commands;
mod config;
mod pipeline;

use clap::{Args, Parser, Subcommand};
use config::{Config, UsageError};
use pipeline::PrepareOptions;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "bowrnn",
    version,
    about = "Bag-of-words sequence classification: codebooks, recurrent histogram networks, kernel feature maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic rare-word dataset with manifests and a
    /// generator sidecar.
    GenSynth(GenSynthArgs),
    /// Fit a kMeans visual vocabulary (one codebook per channel).
    TrainKmeans(TrainKmeansArgs),
    /// Train the network (scratch, init-linear, or retrain-top).
    TrainNet(TrainNetArgs),
    /// Encode sequences as visual-word histograms.
    Encode(EncodeArgs),
    /// Classify sequences with a model, or histograms with an SVM expansion.
    Classify(ClassifyArgs),
    /// Score predictions against manifest labels (accuracy and mAP).
    Eval(EvalArgs),
}

/// Options shared by every command.
#[derive(Args)]
struct Common {
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Plain `key = value` config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Options shared by the commands that read sequence data.
#[derive(Args)]
struct DataOptions {
    /// Channel treatment: concat | separate.
    #[arg(long)]
    channels: Option<String>,
    /// Keep at most this many frames per sequence.
    #[arg(long)]
    subsample: Option<usize>,
    /// Subsampling mode: even | random.
    #[arg(long)]
    subsample_mode: Option<String>,
    /// Apply z-score statistics from this file.
    #[arg(long)]
    zscore: Option<PathBuf>,
    /// Fit z-score statistics on this data, save them here, then apply.
    #[arg(long)]
    fit_zscore: Option<PathBuf>,
}

impl DataOptions {
    fn prepare(&self, config: &Config, seed: u64) -> anyhow::Result<PrepareOptions> {
        Ok(PrepareOptions {
            mode: commands::parse_channel_mode(config, self.channels.clone())?,
            subsample: config.get(self.subsample, "subsample")?,
            subsample_mode: commands::parse_subsample_mode(config, self.subsample_mode.clone())?,
            seed,
            zscore: self.zscore.clone(),
            fit_zscore: self.fit_zscore.clone(),
        })
    }
}

#[derive(Args)]
struct GenSynthArgs {
    #[command(flatten)]
    common: Common,
    /// Number of classes.
    #[arg(long)]
    classes: Option<usize>,
    /// Descriptor dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Shared mixture components in the generator.
    #[arg(long)]
    codewords: Option<usize>,
    /// Number of sequences.
    #[arg(long)]
    sequences: Option<usize>,
    /// Frames per sequence.
    #[arg(long)]
    frames: Option<usize>,
    /// Per-frame probability of drawing a rare class component.
    #[arg(long)]
    rho: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Write each sequence as this many channel files (must divide --dim).
    #[arg(long)]
    split_channels: Option<usize>,
    /// Fraction of sequences listed in test.txt.
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Rare components per class.
    #[arg(long)]
    rare_per_class: Option<usize>,
    /// Spread of the mixture centers.
    #[arg(long)]
    center_scale: Option<f64>,
    /// Within-component noise.
    #[arg(long)]
    noise: Option<f64>,
    /// Distance of rare components from their cross-class anchors.
    #[arg(long)]
    rare_spread: Option<f64>,
}

#[derive(Args)]
struct TrainKmeansArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data_options: DataOptions,
    /// Dataset manifest.
    #[arg(long)]
    data: PathBuf,
    /// Vocabulary size M.
    #[arg(long)]
    codewords: Option<usize>,
    /// kMeans restarts (lowest final SSE wins).
    #[arg(long)]
    restarts: Option<usize>,
    /// Lloyd iteration cap per restart.
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Relative SSE change below which a restart stops.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Output codebook path (per-channel suffixes in separate mode).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainNetArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data_options: DataOptions,
    /// Dataset manifest.
    #[arg(long)]
    data: PathBuf,
    /// Training strategy: scratch | init-linear | retrain-top.
    #[arg(long)]
    strategy: Option<String>,
    /// Vocabulary size (scratch only).
    #[arg(long)]
    codewords: Option<usize>,
    /// Codebook file initializing the quantization layer.
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Trained model initializing the quantization layer.
    #[arg(long)]
    init_model: Option<PathBuf>,
    /// Feature map: none | hellinger | chi2 | intersection.
    #[arg(long)]
    feature_map: Option<String>,
    /// Spectrum samples n of the approximate map.
    #[arg(long)]
    map_samples: Option<usize>,
    /// Sampling period L of the approximate map.
    #[arg(long)]
    map_period: Option<f64>,
    /// Optimizer: rprop | sgd.
    #[arg(long)]
    optimizer: Option<String>,
    /// SGD learning rate.
    #[arg(long)]
    rate: Option<f64>,
    /// Batch mode: full, or a minibatch size.
    #[arg(long)]
    batch: Option<String>,
    /// Epoch cap.
    #[arg(long)]
    epochs: Option<usize>,
    /// Histogram assignment for retrain-top features: soft | hard.
    #[arg(long)]
    assignment: Option<String>,
    /// Output model path.
    #[arg(long)]
    out: PathBuf,
    /// Optional training log (epoch/loss/accuracy lines).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data_options: DataOptions,
    /// Dataset manifest.
    #[arg(long)]
    data: PathBuf,
    /// Encode through a trained model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Encode through a codebook.
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Assignment: soft | hard.
    #[arg(long)]
    assignment: Option<String>,
    /// Output histogram file (per-channel suffixes in separate mode).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data_options: DataOptions,
    /// Dataset manifest (model mode).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Trained model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// SVM expansion file (kernel oracle mode).
    #[arg(long)]
    expansion: Option<PathBuf>,
    /// Histogram file for expansion mode.
    #[arg(long)]
    hist: Option<PathBuf>,
    /// Kernel override for the expansion: hellinger | chi2 | intersection.
    #[arg(long)]
    kernel: Option<String>,
    /// Evaluate the expansion through an explicit feature map instead of
    /// kernel sums: none | hellinger | chi2 | intersection.
    #[arg(long)]
    feature_map: Option<String>,
    #[arg(long)]
    map_samples: Option<usize>,
    #[arg(long)]
    map_period: Option<f64>,
    /// Assignment: soft | hard.
    #[arg(long)]
    assignment: Option<String>,
    /// Output predictions file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Predictions file from `classify`.
    #[arg(long)]
    pred: PathBuf,
    /// Dataset manifest carrying the reference labels.
    #[arg(long)]
    data: PathBuf,
    /// Optional metrics output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    bowrnn::par::configure_threads_from_env();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if err.downcast_ref::<UsageError>().is_some() {
                eprintln!("usage error: {err}");
                ExitCode::from(2)
            } else {
                eprintln!("error: {err:#}");
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenSynth(args) => {
            let config = Config::load(args.common.config.as_deref())?;
            commands::gen_synth(&commands::GenSynthOptions {
                classes: config.get_or(args.classes, "classes", 3)?,
                dim: config.get_or(args.dim, "dim", 8)?,
                codewords: config.get_or(args.codewords, "codewords", 32)?,
                sequences: config.get_or(args.sequences, "sequences", 200)?,
                frames: config.get_or(args.frames, "frames", 100)?,
                rho: config.get_or(args.rho, "rho", 0.3)?,
                seed: config.get_or(args.common.seed, "seed", 0)?,
                out: args.out,
                split_channels: config.get_or(args.split_channels, "split-channels", 1)?,
                test_fraction: config.get_or(args.test_fraction, "test-fraction", 0.25)?,
                rare_per_class: config.get(args.rare_per_class, "rare-per-class")?,
                center_scale: config.get(args.center_scale, "center-scale")?,
                noise: config.get(args.noise, "noise")?,
                rare_spread: config.get(args.rare_spread, "rare-spread")?,
            })
        }
        Command::TrainKmeans(args) => {
            let config = Config::load(args.common.config.as_deref())?;
            let seed = config.get_or(args.common.seed, "seed", 0)?;
            commands::train_kmeans(&commands::TrainKmeansOptions {
                prepare: args.data_options.prepare(&config, seed)?,
                data: args.data,
                codewords: config.require(args.codewords, "codewords")?,
                restarts: config.get_or(args.restarts, "restarts", 8)?,
                max_iterations: config.get_or(args.max_iterations, "max-iterations", 100)?,
                tolerance: config.get_or(args.tolerance, "tolerance", 1e-6)?,
                seed,
                out: args.out,
            })
        }
        Command::TrainNet(args) => {
            let config = Config::load(args.common.config.as_deref())?;
            let seed = config.get_or(args.common.seed, "seed", 0)?;
            commands::train_net(&commands::TrainNetOptions {
                prepare: args.data_options.prepare(&config, seed)?,
                data: args.data,
                strategy: commands::parse_strategy(&config, args.strategy)?,
                codewords: config.get(args.codewords, "codewords")?,
                codebook: args.codebook,
                init_model: args.init_model,
                map: commands::parse_feature_map(
                    &config,
                    args.feature_map,
                    args.map_samples,
                    args.map_period,
                )?,
                optimizer: commands::parse_optimizer(&config, args.optimizer, args.rate)?,
                batch: commands::parse_batch(&config, args.batch)?,
                epochs: config.get_or(args.epochs, "epochs", 500)?,
                assignment: commands::parse_assignment(&config, args.assignment)?,
                seed,
                out: args.out,
                log: args.log,
            })
        }
        Command::Encode(args) => {
            let config = Config::load(args.common.config.as_deref())?;
            let seed = config.get_or(args.common.seed, "seed", 0)?;
            commands::encode(&commands::EncodeOptions {
                prepare: args.data_options.prepare(&config, seed)?,
                data: args.data,
                model: args.model,
                codebook: args.codebook,
                assignment: commands::parse_assignment(&config, args.assignment)?,
                out: args.out,
            })
        }
        Command::Classify(args) => {
            let config = Config::load(args.common.config.as_deref())?;
            let seed = config.get_or(args.common.seed, "seed", 0)?;
            commands::classify(&commands::ClassifyOptions {
                prepare: args.data_options.prepare(&config, seed)?,
                data: args.data,
                model: args.model,
                expansion: args.expansion,
                hist: args.hist,
                kernel: commands::parse_kernel(&config, args.kernel)?,
                map: commands::parse_feature_map(
                    &config,
                    args.feature_map,
                    args.map_samples,
                    args.map_period,
                )?,
                assignment: commands::parse_assignment(&config, args.assignment)?,
                out: args.out,
            })
        }
        Command::Eval(args) => commands::eval(&commands::EvalOptions {
            pred: args.pred,
            data: args.data,
            out: args.out,
        }),
    }
}
