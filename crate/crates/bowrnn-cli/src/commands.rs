//! Implementations of the CLI subcommands.

use crate::config::{usage, Config};
use crate::pipeline::{
    channel_path, metrics, pool_frames, prepare, ChannelMode, Prepared, PrepareOptions,
    SubsampleMode,
};
use anyhow::{Context, Result};
use bowrnn::bownet::{Assignment, BowNetwork, Histogram};
use bowrnn::codebook::{kmeans_fit_detailed, Codebook, KMeansConfig, QuantLayer};
use bowrnn::data::synth::{generate_synthetic, SynthConfig};
use bowrnn::data::{save_sequence, Manifest, ManifestEntry};
use bowrnn::featmap::{FeatureMapSpec, MapKernel};
use bowrnn::kernels::{self, SvmExpansion};
use bowrnn::optim::{
    train, BatchMode, OptimizerKind, RpropConfig, Strategy, TrainConfig, TrainLog,
};
use bowrnn::par;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

// ---------------------------------------------------------------------------
// gen-synth

pub struct GenSynthOptions {
    pub classes: usize,
    pub dim: usize,
    pub codewords: usize,
    pub sequences: usize,
    pub frames: usize,
    pub rho: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub split_channels: usize,
    pub test_fraction: f64,
    pub rare_per_class: Option<usize>,
    pub center_scale: Option<f64>,
    pub noise: Option<f64>,
    pub rare_spread: Option<f64>,
}

pub fn gen_synth(options: &GenSynthOptions) -> Result<()> {
    if !(0.0..=1.0).contains(&options.rho) {
        return Err(usage(format!("--rho must be in [0, 1], got {}", options.rho)));
    }
    if !(0.0..1.0).contains(&options.test_fraction) {
        return Err(usage(format!(
            "--test-fraction must be in [0, 1), got {}",
            options.test_fraction
        )));
    }
    if options.split_channels == 0 || !options.dim.is_multiple_of(options.split_channels) {
        return Err(usage(format!(
            "--split-channels must divide --dim ({} / {})",
            options.dim, options.split_channels
        )));
    }

    let mut config = SynthConfig::new(
        options.classes,
        options.codewords,
        options.dim,
        options.sequences,
        options.frames,
        options.rho,
        options.seed,
    );
    if let Some(v) = options.rare_per_class {
        config.rare_per_class = v;
    }
    if let Some(v) = options.center_scale {
        config.center_scale = v;
    }
    if let Some(v) = options.noise {
        config.noise = v;
    }
    if let Some(v) = options.rare_spread {
        config.rare_spread = v;
    }
    let dataset = generate_synthetic(&config).context("generating synthetic data")?;

    std::fs::create_dir_all(&options.out)
        .with_context(|| format!("creating output directory {}", options.out.display()))?;

    let channels = options.split_channels;
    let channel_dim = options.dim / channels;
    let mut entries = Vec::with_capacity(dataset.samples.len());
    for (i, sample) in dataset.samples.iter().enumerate() {
        let seq = &sample.channels[0];
        let mut paths = Vec::with_capacity(channels);
        for c in 0..channels {
            let name = if channels == 1 {
                format!("seq_{i:05}.bin")
            } else {
                format!("seq_{i:05}.c{c}.bin")
            };
            let slice = seq
                .frames
                .slice(ndarray::s![.., c * channel_dim..(c + 1) * channel_dim])
                .to_owned();
            let part = bowrnn::data::FeatureSequence::new(slice, seq.source.clone())?;
            save_sequence(options.out.join(&name), &part)
                .with_context(|| format!("writing {name}"))?;
            paths.push(PathBuf::from(name));
        }
        entries.push(ManifestEntry {
            label: sample.label,
            paths,
        });
    }

    let manifest = Manifest::new(options.classes, channels, entries)?;
    manifest.save(options.out.join("manifest.txt"))?;
    let num_test = (options.sequences as f64 * options.test_fraction).round() as usize;
    let num_train = options.sequences - num_test;
    let split = |range: std::ops::Range<usize>| -> Result<Manifest> {
        Ok(Manifest::new(
            options.classes,
            channels,
            manifest.entries[range].to_vec(),
        )?)
    };
    split(0..num_train)?.save(options.out.join("train.txt"))?;
    split(num_train..options.sequences)?.save(options.out.join("test.txt"))?;

    // Generator sidecar so an exact Bayes oracle can be rebuilt.
    let mut gen = format!(
        "BOWGEN1 {} {} {} {} {} {}\n",
        options.classes,
        options.codewords,
        options.dim,
        config.rare_per_class,
        format_f64(config.rho),
        format_f64(config.noise),
    );
    for row in dataset.generator.shared.rows() {
        push_row(&mut gen, row.iter().copied());
    }
    for class_comps in &dataset.generator.rare {
        for row in class_comps.rows() {
            push_row(&mut gen, row.iter().copied());
        }
    }
    std::fs::write(options.out.join("generator.txt"), gen)?;

    println!(
        "generated {} sequences ({} classes, dim {}, {} frames, rho {}, {} channel(s)) in {}",
        options.sequences,
        options.classes,
        options.dim,
        options.frames,
        options.rho,
        channels,
        options.out.display()
    );
    println!("train/test split: {num_train}/{num_test} (manifest.txt, train.txt, test.txt)");
    Ok(())
}

fn push_row(out: &mut String, row: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in row {
        if !first {
            out.push(' ');
        }
        let _ = write!(out, "{v:.16e}");
        first = false;
    }
    out.push('\n');
}

// ---------------------------------------------------------------------------
// train-kmeans

pub struct TrainKmeansOptions {
    pub data: PathBuf,
    pub prepare: PrepareOptions,
    pub codewords: usize,
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn train_kmeans(options: &TrainKmeansOptions) -> Result<()> {
    let prepared = prepare(&options.data, &options.prepare).context("train-kmeans: preparing data")?;
    let mut config = KMeansConfig::new(options.codewords, options.seed);
    config.restarts = options.restarts;
    config.max_iterations = options.max_iterations;
    config.tolerance = options.tolerance;
    for c in 0..prepared.channels {
        let pooled = pool_frames(&prepared.samples, c)?;
        let fit = kmeans_fit_detailed(pooled.view(), &config)
            .with_context(|| format!("train-kmeans: clustering channel {c}"))?;
        let path = channel_path(&options.out, prepared.channels, c);
        fit.codebook
            .save(&path)
            .with_context(|| format!("writing codebook {}", path.display()))?;
        println!(
            "channel {c}: {} words over {} frames, final SSE {:.6} -> {}",
            options.codewords,
            pooled.nrows(),
            fit.sse,
            path.display()
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// train-net

pub struct TrainNetOptions {
    pub data: PathBuf,
    pub prepare: PrepareOptions,
    pub strategy: Strategy,
    pub codewords: Option<usize>,
    pub codebook: Option<PathBuf>,
    pub init_model: Option<PathBuf>,
    pub map: Option<FeatureMapSpec>,
    pub optimizer: OptimizerKind,
    pub batch: BatchMode,
    pub epochs: usize,
    pub assignment: Assignment,
    pub seed: u64,
    pub out: PathBuf,
    pub log: Option<PathBuf>,
}

pub fn train_net(options: &TrainNetOptions) -> Result<()> {
    let prepared = prepare(&options.data, &options.prepare).context("train-net: preparing data")?;
    if prepared.samples.is_empty() {
        anyhow::bail!("train-net: empty dataset");
    }
    let dim = prepared.samples[0].channels[0].dim();
    let classes = prepared.manifest.num_classes;

    let mut net = build_network(options, &prepared, dim, classes)?;
    let mut config = TrainConfig::new(options.strategy, options.seed);
    config.optimizer = options.optimizer.clone();
    config.batch = options.batch;
    config.max_epochs = options.epochs;
    config.assignment = options.assignment;

    let log = train(&mut net, &prepared.samples, &config).context("train-net: optimization")?;
    net.save(&options.out)
        .with_context(|| format!("writing model {}", options.out.display()))?;
    if let Some(path) = &options.log {
        std::fs::write(path, log.to_text())
            .with_context(|| format!("writing training log {}", path.display()))?;
    }
    print_summary(&log);
    println!("model written to {}", options.out.display());
    Ok(())
}

fn print_summary(log: &TrainLog) {
    if let Some(last) = log.epochs.last() {
        println!(
            "trained {} epochs, final loss {:.6}, training accuracy {:.4}",
            last.epoch, last.loss, last.accuracy
        );
    }
}

fn build_network(
    options: &TrainNetOptions,
    prepared: &Prepared,
    dim: usize,
    classes: usize,
) -> Result<BowNetwork> {
    match options.strategy {
        Strategy::Scratch => {
            let words = options.codewords.ok_or_else(|| {
                usage("--strategy scratch needs --codewords")
            })?;
            if options.codebook.is_some() || options.init_model.is_some() {
                return Err(usage("--strategy scratch starts from random parameters; drop --codebook/--init-model"));
            }
            Ok(BowNetwork::random(
                dim,
                words,
                classes,
                prepared.channels,
                options.map,
                options.seed,
            )?)
        }
        Strategy::InitLinear | Strategy::RetrainTop => {
            let quant = load_quant_layers(options, prepared.channels)?;
            if quant[0].dim() != dim {
                return Err(usage(format!(
                    "initialization dimension {} does not match data dimension {dim}",
                    quant[0].dim()
                )));
            }
            Ok(BowNetwork::from_quant_layers(
                quant,
                options.map,
                classes,
                options.seed,
            )?)
        }
    }
}

fn load_quant_layers(options: &TrainNetOptions, channels: usize) -> Result<Vec<QuantLayer>> {
    match (&options.codebook, &options.init_model) {
        (Some(_), Some(_)) => Err(usage("--codebook and --init-model are mutually exclusive")),
        (Some(path), None) => (0..channels)
            .map(|c| {
                let chan_path = channel_path(path, channels, c);
                let cb = Codebook::load(&chan_path)
                    .with_context(|| format!("loading codebook {}", chan_path.display()))?;
                Ok(cb.to_network()?)
            })
            .collect(),
        (None, Some(path)) => {
            let source = BowNetwork::load(path)
                .with_context(|| format!("loading model {}", path.display()))?;
            if source.num_channels() != channels {
                return Err(usage(format!(
                    "initial model has {} channels, data has {channels}",
                    source.num_channels()
                )));
            }
            Ok((0..channels).map(|c| source.channel(c).clone()).collect())
        }
        (None, None) => Err(usage(format!(
            "--strategy {} needs --codebook or --init-model",
            options.strategy.name()
        ))),
    }
}

// ---------------------------------------------------------------------------
// encode

pub struct EncodeOptions {
    pub data: PathBuf,
    pub prepare: PrepareOptions,
    pub model: Option<PathBuf>,
    pub codebook: Option<PathBuf>,
    pub assignment: Assignment,
    pub out: PathBuf,
}

pub fn encode(options: &EncodeOptions) -> Result<()> {
    let prepared = prepare(&options.data, &options.prepare).context("encode: preparing data")?;
    if prepared.samples.is_empty() {
        anyhow::bail!("encode: the manifest lists no samples");
    }
    let histograms: Vec<Vec<Histogram>> = match (&options.model, &options.codebook) {
        (Some(_), Some(_)) => {
            return Err(usage("--model and --codebook are mutually exclusive"))
        }
        (Some(path), None) => {
            let net = BowNetwork::load(path)
                .with_context(|| format!("loading model {}", path.display()))?;
            if net.num_channels() != prepared.channels {
                return Err(usage(format!(
                    "model has {} channels, data has {}",
                    net.num_channels(),
                    prepared.channels
                )));
            }
            let encoded = par::map_ordered(&prepared.samples, |sample| {
                net.encode_sample(&sample.channels, options.assignment)
            });
            encoded
                .into_iter()
                .collect::<bowrnn::Result<_>>()
                .context("encode: histogram computation")?
        }
        (None, Some(path)) => {
            let codebooks: Vec<Codebook> = (0..prepared.channels)
                .map(|c| {
                    let chan_path = channel_path(path, prepared.channels, c);
                    Codebook::load(&chan_path)
                        .with_context(|| format!("loading codebook {}", chan_path.display()))
                })
                .collect::<Result<_>>()?;
            let encoded = par::map_ordered(&prepared.samples, |sample| {
                sample
                    .channels
                    .iter()
                    .zip(&codebooks)
                    .enumerate()
                    .map(|(c, (seq, cb))| codebook_histogram(cb, seq, options.assignment, c))
                    .collect::<bowrnn::Result<Vec<Histogram>>>()
            });
            encoded
                .into_iter()
                .collect::<bowrnn::Result<_>>()
                .context("encode: histogram computation")?
        }
        (None, None) => return Err(usage("encode needs --model or --codebook")),
    };

    for c in 0..prepared.channels {
        let path = channel_path(&options.out, prepared.channels, c);
        let words = histograms[0][c].len();
        let mut out = format!("BOWHIST1 {} {}\n", histograms.len(), words);
        for row in &histograms {
            push_row(&mut out, row[c].values.iter().copied());
        }
        std::fs::write(&path, out)
            .with_context(|| format!("writing histograms {}", path.display()))?;
        println!(
            "channel {c}: {} histograms of {} words -> {}",
            histograms.len(),
            words,
            path.display()
        );
    }
    Ok(())
}

/// Histogram straight from a codebook: frame-averaged posteriors (soft) or
/// nearest-word counts (hard).
fn codebook_histogram(
    cb: &Codebook,
    seq: &bowrnn::data::FeatureSequence,
    assignment: Assignment,
    channel: usize,
) -> bowrnn::Result<Histogram> {
    let mut acc = vec![0.0; cb.size()];
    for frame in seq.frames.rows() {
        let x: Vec<f64> = frame.to_vec();
        match assignment {
            Assignment::Soft => {
                for (a, p) in acc.iter_mut().zip(cb.posterior(&x, true)?) {
                    *a += p;
                }
            }
            Assignment::Hard => acc[cb.nearest_index(&x, true)?] += 1.0,
        }
    }
    let frames = seq.num_frames() as f64;
    acc.iter_mut().for_each(|a| *a /= frames);
    Histogram::new(acc, Some(channel))
}

// ---------------------------------------------------------------------------
// classify

pub struct ClassifyOptions {
    pub data: Option<PathBuf>,
    pub prepare: PrepareOptions,
    pub model: Option<PathBuf>,
    pub expansion: Option<PathBuf>,
    pub hist: Option<PathBuf>,
    pub kernel: Option<MapKernel>,
    pub map: Option<FeatureMapSpec>,
    pub assignment: Assignment,
    pub out: PathBuf,
}

pub fn classify(options: &ClassifyOptions) -> Result<()> {
    let scores: Vec<Vec<f64>> = match (&options.model, &options.expansion) {
        (Some(_), Some(_)) => {
            return Err(usage("--model and --expansion are mutually exclusive"))
        }
        (Some(path), None) => {
            let data = options
                .data
                .as_ref()
                .ok_or_else(|| usage("classify --model needs --data"))?;
            let prepared = prepare(data, &options.prepare).context("classify: preparing data")?;
            let net = BowNetwork::load(path)
                .with_context(|| format!("loading model {}", path.display()))?;
            if net.num_channels() != prepared.channels {
                return Err(usage(format!(
                    "model has {} channels, data has {}",
                    net.num_channels(),
                    prepared.channels
                )));
            }
            let posteriors = par::map_ordered(&prepared.samples, |sample| {
                net.forward_with(&sample.channels, options.assignment)
            });
            posteriors
                .into_iter()
                .collect::<bowrnn::Result<_>>()
                .context("classify: forward pass")?
        }
        (None, Some(path)) => {
            let hist_path = options
                .hist
                .as_ref()
                .ok_or_else(|| usage("classify --expansion needs --hist"))?;
            let mut expansion = load_expansion(path)?;
            if let Some(kernel) = options.kernel {
                expansion.kernel = kernel;
            }
            let histograms = load_histograms(hist_path)?;
            expansion_scores(&expansion, &histograms, options.map.as_ref())?
        }
        (None, None) => return Err(usage("classify needs --model or --expansion")),
    };

    let classes = scores.first().map(|s| s.len()).unwrap_or(0);
    let mut out = format!("PRED1 {} {}\n", scores.len(), classes);
    for row in &scores {
        let best = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
            .map(|(i, _)| i + 1)
            .unwrap_or(1);
        let _ = write!(out, "{best}");
        for &v in row {
            let _ = write!(out, " {}", format_f64(v));
        }
        out.push('\n');
    }
    std::fs::write(&options.out, out)
        .with_context(|| format!("writing predictions {}", options.out.display()))?;
    println!(
        "classified {} items into {} classes -> {}",
        scores.len(),
        classes,
        options.out.display()
    );
    Ok(())
}

/// Kernel-expansion decisions mapped onto two classes: the decision value
/// scores class 1, its negation class 2. With a feature-map spec the
/// mapped-linear path is used, otherwise the kernel expansion is evaluated
/// directly.
fn expansion_scores(
    expansion: &SvmExpansion,
    histograms: &[Vec<f64>],
    map: Option<&FeatureMapSpec>,
) -> Result<Vec<Vec<f64>>> {
    let weights = match map {
        Some(spec) => {
            if spec.kernel != expansion.kernel {
                return Err(usage(format!(
                    "feature map {} does not match expansion kernel {}",
                    spec.kernel.name(),
                    expansion.kernel.name()
                )));
            }
            Some((kernels::expansion_weights(expansion, spec)?, spec))
        }
        None => None,
    };
    histograms
        .iter()
        .map(|h| {
            let decision = match &weights {
                Some((w, spec)) => kernels::svm_decision_mapped(w, expansion.bias, spec, h)?,
                None => kernels::svm_decision(expansion, h)?,
            };
            Ok(vec![decision, -decision])
        })
        .collect()
}

/// Text expansion format: `SVMEXP1 <I> <M> <kernel>`, a bias line, then one
/// support vector per line as `<alpha> <y> <M histogram entries>`.
fn load_expansion(path: &Path) -> Result<SvmExpansion> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty expansion file")?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "SVMEXP1" {
        anyhow::bail!("bad expansion header {header:?}");
    }
    let count: usize = fields[1].parse().context("support vector count")?;
    let dim: usize = fields[2].parse().context("histogram dimension")?;
    let kernel = MapKernel::parse(fields[3])?;
    let bias: f64 = lines
        .next()
        .context("missing bias line")?
        .trim()
        .parse()
        .context("bias value")?;
    let mut supports = Vec::with_capacity(count);
    let mut coefficients = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let line = lines
            .next()
            .with_context(|| format!("missing support vector {i}"))?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("support vector {i}"))?;
        if values.len() != dim + 2 {
            anyhow::bail!("support vector {i}: expected {} values", dim + 2);
        }
        coefficients.push(values[0]);
        labels.push(values[1] as i8);
        supports.push(values[2..].to_vec());
    }
    Ok(SvmExpansion::new(kernel, supports, coefficients, labels, bias)?)
}

pub fn load_histograms(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty histogram file")?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != "BOWHIST1" {
        anyhow::bail!("bad histogram header {header:?}");
    }
    let count: usize = fields[1].parse().context("histogram count")?;
    let words: usize = fields[2].parse().context("word count")?;
    let mut rows = Vec::with_capacity(count);
    for i in 0..count {
        let line = lines.next().with_context(|| format!("missing row {i}"))?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("histogram row {i}"))?;
        if values.len() != words {
            anyhow::bail!("histogram row {i}: expected {words} values");
        }
        rows.push(values);
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// eval

pub struct EvalOptions {
    pub pred: PathBuf,
    pub data: PathBuf,
    pub out: Option<PathBuf>,
}

pub fn eval(options: &EvalOptions) -> Result<()> {
    let manifest = Manifest::load(&options.data)
        .with_context(|| format!("loading manifest {}", options.data.display()))?;
    let labels = manifest.labels();
    let (predictions, scores) = load_predictions(&options.pred)?;
    if predictions.len() != labels.len() {
        anyhow::bail!(
            "{} predictions vs {} labeled items",
            predictions.len(),
            labels.len()
        );
    }
    let accuracy = metrics::accuracy(&predictions, &labels).context("eval: accuracy")?;
    let map = metrics::mean_average_precision(&scores, &labels).context("eval: mAP")?;
    let text = format!("accuracy {accuracy:.6}\nmAP {map:.6}\n");
    print!("{text}");
    if let Some(path) = &options.out {
        std::fs::write(path, &text)
            .with_context(|| format!("writing metrics {}", path.display()))?;
    }
    Ok(())
}

fn load_predictions(path: &Path) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty predictions file")?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != "PRED1" {
        anyhow::bail!("bad predictions header {header:?}");
    }
    let count: usize = fields[1].parse().context("prediction count")?;
    let classes: usize = fields[2].parse().context("class count")?;
    let mut predictions = Vec::with_capacity(count);
    let mut scores = Vec::with_capacity(count);
    for i in 0..count {
        let line = lines.next().with_context(|| format!("missing row {i}"))?;
        let mut tokens = line.split_whitespace();
        let label: usize = tokens
            .next()
            .with_context(|| format!("row {i}: missing label"))?
            .parse()
            .with_context(|| format!("row {i}: label"))?;
        let row: Vec<f64> = tokens
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("row {i}: scores"))?;
        if row.len() != classes {
            anyhow::bail!("row {i}: expected {classes} scores");
        }
        predictions.push(label);
        scores.push(row);
    }
    Ok((predictions, scores))
}

// ---------------------------------------------------------------------------
// shared flag parsing helpers

pub fn parse_assignment(config: &Config, flag: Option<String>) -> Result<Assignment> {
    let name = config.get_or(flag, "assignment", "soft".to_string())?;
    Assignment::parse(&name).map_err(|e| usage(e.to_string()))
}

pub fn parse_feature_map(
    config: &Config,
    kind: Option<String>,
    samples: Option<usize>,
    period: Option<f64>,
) -> Result<Option<FeatureMapSpec>> {
    let kind = config.get_or(kind, "feature-map", "none".to_string())?;
    let samples = config.get_or(samples, "map-samples", FeatureMapSpec::DEFAULT_SAMPLES)?;
    let period = config.get_or(period, "map-period", FeatureMapSpec::DEFAULT_PERIOD)?;
    match kind.as_str() {
        "none" => Ok(None),
        name => {
            let kernel = MapKernel::parse(name).map_err(|e| usage(e.to_string()))?;
            Ok(Some(
                FeatureMapSpec::new(kernel, samples, period).map_err(|e| usage(e.to_string()))?,
            ))
        }
    }
}

pub fn parse_strategy(config: &Config, flag: Option<String>) -> Result<Strategy> {
    let name = config.require(flag, "strategy")?;
    Strategy::parse(&name).map_err(|e| usage(e.to_string()))
}

pub fn parse_optimizer(
    config: &Config,
    optimizer: Option<String>,
    rate: Option<f64>,
) -> Result<OptimizerKind> {
    let name = config.get_or(optimizer, "optimizer", "rprop".to_string())?;
    match name.as_str() {
        "rprop" => Ok(OptimizerKind::Rprop(RpropConfig::default())),
        "sgd" => {
            let rate = config.get_or(rate, "rate", 0.1)?;
            Ok(OptimizerKind::Sgd { rate })
        }
        other => Err(usage(format!("unknown optimizer {other:?}"))),
    }
}

pub fn parse_batch(config: &Config, flag: Option<String>) -> Result<BatchMode> {
    let value = config.get_or(flag, "batch", "full".to_string())?;
    if value == "full" {
        return Ok(BatchMode::Full);
    }
    let size: usize = value
        .parse()
        .map_err(|_| usage(format!("--batch expects `full` or a size, got {value:?}")))?;
    if size == 0 {
        return Err(usage("--batch size must be >= 1"));
    }
    Ok(BatchMode::Minibatch(size))
}

pub fn parse_channel_mode(config: &Config, flag: Option<String>) -> Result<ChannelMode> {
    let name = config.get_or(flag, "channels", "concat".to_string())?;
    name.parse::<ChannelMode>().map_err(usage)
}

pub fn parse_subsample_mode(config: &Config, flag: Option<String>) -> Result<SubsampleMode> {
    let name = config.get_or(flag, "subsample-mode", "even".to_string())?;
    name.parse::<SubsampleMode>().map_err(usage)
}

pub fn parse_kernel(config: &Config, flag: Option<String>) -> Result<Option<MapKernel>> {
    match config.get(flag, "kernel")? {
        None => Ok(None),
        Some(name) => Ok(Some(
            MapKernel::parse(&name).map_err(|e| usage(e.to_string()))?,
        )),
    }
}
