//! Parameter optimization: RProp (the iRprop⁻ variant) and SGD, plus the
//! training loop with the three strategies — training everything from
//! scratch, initializing the quantization layer from a linear-classifier
//! network, or freezing it and retraining only the output layer.

use crate::bownet::{Assignment, BowNetwork, GradientSet};
use crate::data::LabeledSample;
use crate::error::{Error, Result};
use crate::par;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// RProp update constants. The values are the standard ones from the RProp
/// literature.
#[derive(Debug, Clone)]
pub struct RpropConfig {
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub delta_init: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

impl Default for RpropConfig {
    fn default() -> Self {
        Self {
            eta_plus: 1.2,
            eta_minus: 0.5,
            delta_init: 0.01,
            delta_min: 1e-8,
            delta_max: 1.0,
        }
    }
}

impl RpropConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0 < self.eta_minus && self.eta_minus < 1.0 && self.eta_plus > 1.0) {
            return Err(Error::InvalidConfig(
                "RProp needs 0 < eta_minus < 1 < eta_plus".into(),
            ));
        }
        if !(0.0 < self.delta_min && self.delta_min <= self.delta_init
            && self.delta_init <= self.delta_max)
        {
            return Err(Error::InvalidConfig(
                "RProp needs 0 < delta_min <= delta_init <= delta_max".into(),
            ));
        }
        Ok(())
    }
}

/// Per-parameter step sizes and previous gradients, one block per tensor.
#[derive(Debug, Clone)]
pub struct RpropState {
    config: RpropConfig,
    steps: Vec<Vec<f64>>,
    previous: Vec<Vec<f64>>,
}

impl RpropState {
    pub fn new(config: RpropConfig, tensor_sizes: &[usize]) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            steps: tensor_sizes
                .iter()
                .map(|&n| vec![config.delta_init; n])
                .collect(),
            previous: tensor_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            config,
        })
    }

    pub fn step_sizes(&self) -> &[Vec<f64>] {
        &self.steps
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One iRprop⁻ update over matching parameter and gradient tensors.
///
/// Per parameter: if the gradient kept its sign, the step grows by
/// `eta_plus` (capped at `delta_max`); on a sign flip it shrinks by
/// `eta_minus` (floored at `delta_min`) and the stored sign is zeroed so the
/// next iteration is treated as fresh. Either way the parameter moves by
/// `-sign(gradient) * step`.
pub fn rprop_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut RpropState,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.steps.len() {
        return Err(Error::DimensionMismatch {
            expected: state.steps.len(),
            actual: params.len().min(grads.len()),
        });
    }
    for tensor in grads {
        if tensor.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged("non-finite gradient".into()));
        }
    }
    let cfg = &state.config;
    for (t, (param, grad)) in params.iter_mut().zip(grads).enumerate() {
        if param.len() != grad.len() || param.len() != state.steps[t].len() {
            return Err(Error::DimensionMismatch {
                expected: state.steps[t].len(),
                actual: param.len().min(grad.len()),
            });
        }
        let steps = &mut state.steps[t];
        let previous = &mut state.previous[t];
        for i in 0..param.len() {
            let g = grad[i];
            let signed = g * previous[i];
            if signed > 0.0 {
                steps[i] = (steps[i] * cfg.eta_plus).min(cfg.delta_max);
                previous[i] = g;
            } else if signed < 0.0 {
                steps[i] = (steps[i] * cfg.eta_minus).max(cfg.delta_min);
                previous[i] = 0.0;
            } else {
                previous[i] = g;
            }
            param[i] -= sign(g) * steps[i];
        }
    }
    Ok(())
}

/// Plain gradient step `params -= rate * gradient`.
pub fn sgd_step(params: &mut [&mut [f64]], grads: &[&[f64]], rate: f64) -> Result<()> {
    if !rate.is_finite() || rate <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "learning rate must be positive, got {rate}"
        )));
    }
    if params.len() != grads.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            actual: grads.len(),
        });
    }
    for (param, grad) in params.iter_mut().zip(grads) {
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged("non-finite gradient".into()));
        }
        for (p, &g) in param.iter_mut().zip(*grad) {
            *p -= rate * g;
        }
    }
    Ok(())
}

/// Which parameters a training run touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// All parameters from random initialization.
    Scratch,
    /// Quantization layer initialized from a linear-classifier network, then
    /// everything trained.
    InitLinear,
    /// Quantization layer frozen; only the output layer is optimized
    /// (multiclass logistic regression on fixed features).
    RetrainTop,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Scratch => "scratch",
            Strategy::InitLinear => "init-linear",
            Strategy::RetrainTop => "retrain-top",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "scratch" => Ok(Strategy::Scratch),
            "init-linear" => Ok(Strategy::InitLinear),
            "retrain-top" => Ok(Strategy::RetrainTop),
            other => Err(Error::Format(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum OptimizerKind {
    Rprop(RpropConfig),
    Sgd { rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchMode {
    Full,
    Minibatch(usize),
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub strategy: Strategy,
    pub optimizer: OptimizerKind,
    pub batch: BatchMode,
    pub max_epochs: usize,
    /// Relative objective improvement below which an epoch counts as stalled.
    pub stop_tolerance: f64,
    /// Consecutive stalled epochs before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Histogram assignment for the retrain-top feature cache. Full-network
    /// training always quantizes softly (hard assignment is not
    /// differentiable).
    pub assignment: Assignment,
}

impl TrainConfig {
    pub fn new(strategy: Strategy, seed: u64) -> Self {
        Self {
            strategy,
            optimizer: OptimizerKind::Rprop(RpropConfig::default()),
            batch: BatchMode::Full,
            max_epochs: 500,
            stop_tolerance: 1e-6,
            patience: 5,
            seed,
            assignment: Assignment::Soft,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be >= 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidConfig("patience must be >= 1".into()));
        }
        if self.stop_tolerance.is_nan() || self.stop_tolerance < 0.0 {
            return Err(Error::InvalidConfig("stop tolerance must be >= 0".into()));
        }
        match &self.optimizer {
            OptimizerKind::Rprop(cfg) => cfg.validate()?,
            OptimizerKind::Sgd { rate } => {
                if !rate.is_finite() || *rate <= 0.0 {
                    return Err(Error::InvalidConfig("learning rate must be positive".into()));
                }
            }
        }
        if let BatchMode::Minibatch(size) = self.batch {
            if size == 0 {
                return Err(Error::InvalidConfig("minibatch size must be >= 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxEpochs,
}

#[derive(Debug, Clone)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub stop: StopReason,
}

impl TrainLog {
    /// The `epoch <k> loss <v> accuracy <a>` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.epochs {
            out.push_str(&format!(
                "epoch {} loss {:.6} accuracy {:.6}\n",
                r.epoch, r.loss, r.accuracy
            ));
        }
        out
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.loss)
    }
}

/// Train `net` in place on labeled sequences. The training loop is the
/// single writer of the parameters; gradient evaluation fans out over
/// sequences and reduces in a fixed order, so runs are reproducible bitwise
/// for a given seed and configuration.
pub fn train(
    net: &mut BowNetwork,
    data: &[LabeledSample],
    config: &TrainConfig,
) -> Result<TrainLog> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    for sample in data {
        if sample.label == 0 || sample.label > net.num_classes() {
            return Err(Error::InvalidLabel {
                label: sample.label,
                classes: net.num_classes(),
            });
        }
    }
    let first_label = data[0].label;
    if data.iter().all(|s| s.label == first_label) {
        log::warn!("training data contains a single class");
    }

    match config.strategy {
        Strategy::RetrainTop => train_top(net, data, config),
        Strategy::Scratch | Strategy::InitLinear => train_full(net, data, config),
    }
}

/// Full-network training through the memory-efficient gradient.
fn train_full(
    net: &mut BowNetwork,
    data: &[LabeledSample],
    config: &TrainConfig,
) -> Result<TrainLog> {
    let tensor_sizes: Vec<usize> = GradientSet::zeros_like(net)
        .tensors(true)
        .iter()
        .map(|t| t.len())
        .collect();
    let mut rprop = match &config.optimizer {
        OptimizerKind::Rprop(cfg) => Some(RpropState::new(cfg.clone(), &tensor_sizes)?),
        OptimizerKind::Sgd { .. } => None,
    };

    let mut stopper = Stopper::new(config);
    let mut log = Vec::new();
    for epoch in 1..=config.max_epochs {
        let loss = match config.batch {
            BatchMode::Full => {
                let (grad, loss) = net.batch_gradient(data)?;
                apply_step(net, &grad, true, config, &mut rprop)?;
                loss
            }
            BatchMode::Minibatch(size) => {
                let order = shuffled_indices(data.len(), config.seed, epoch as u64);
                let mut loss_sum = 0.0;
                for chunk in order.chunks(size) {
                    let batch: Vec<LabeledSample> =
                        chunk.iter().map(|&i| data[i].clone()).collect();
                    let (grad, loss) = net.batch_gradient(&batch)?;
                    apply_step(net, &grad, true, config, &mut rprop)?;
                    loss_sum += loss * chunk.len() as f64;
                }
                loss_sum / data.len() as f64
            }
        };
        let accuracy = evaluate_accuracy(net, data)?;
        log.push(EpochRecord {
            epoch,
            loss,
            accuracy,
        });
        if stopper.stalled(loss) {
            return Ok(TrainLog {
                epochs: log,
                stop: StopReason::Converged,
            });
        }
    }
    Ok(TrainLog {
        epochs: log,
        stop: StopReason::MaxEpochs,
    })
}

/// Retrain-top: multiclass logistic regression on cached mapped histograms.
/// The quantization layers are never touched.
fn train_top(
    net: &mut BowNetwork,
    data: &[LabeledSample],
    config: &TrainConfig,
) -> Result<TrainLog> {
    let features: Vec<Vec<f64>> = {
        let results = par::map_ordered(data, |sample| {
            net.features(&sample.channels, config.assignment)
        });
        results.into_iter().collect::<Result<_>>()?
    };
    let labels: Vec<usize> = data.iter().map(|s| s.label).collect();
    let num_classes = net.num_classes();
    let feature_dim = net.feature_dim();

    let tensor_sizes = [feature_dim * num_classes, num_classes];
    let mut rprop = match &config.optimizer {
        OptimizerKind::Rprop(cfg) => Some(RpropState::new(cfg.clone(), &tensor_sizes)?),
        OptimizerKind::Sgd { .. } => None,
    };

    let mut stopper = Stopper::new(config);
    let mut log = Vec::new();
    for epoch in 1..=config.max_epochs {
        let epoch_indices: Vec<Vec<usize>> = match config.batch {
            BatchMode::Full => vec![(0..data.len()).collect()],
            BatchMode::Minibatch(size) => shuffled_indices(data.len(), config.seed, epoch as u64)
                .chunks(size)
                .map(|c| c.to_vec())
                .collect(),
        };
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for indices in epoch_indices {
            let mut dw = Array2::<f64>::zeros((feature_dim, num_classes));
            let mut db = Array1::<f64>::zeros(num_classes);
            for &i in &indices {
                let mut err = net.classify_features(&features[i]);
                if crate::codebook::argmax(&err) + 1 == labels[i] {
                    correct += 1;
                }
                loss_sum += -err[labels[i] - 1].max(1e-300).ln();
                err[labels[i] - 1] -= 1.0;
                for (f, &fv) in features[i].iter().enumerate() {
                    for (g, &e) in dw.row_mut(f).iter_mut().zip(&err) {
                        *g += fv * e;
                    }
                }
                db += &ndarray::ArrayView1::from(&err[..]);
            }
            let scale = 1.0 / indices.len() as f64;
            dw *= scale;
            db *= scale;
            let grads: Vec<&[f64]> = vec![
                dw.as_slice().expect("standard layout"),
                db.as_slice().expect("standard layout"),
            ];
            let mut params = net.trainable_tensors_mut(false);
            match &config.optimizer {
                OptimizerKind::Rprop(_) => {
                    rprop_step(&mut params, &grads, rprop.as_mut().expect("rprop state"))?
                }
                OptimizerKind::Sgd { rate } => sgd_step(&mut params, &grads, *rate)?,
            }
        }
        let loss = loss_sum / data.len() as f64;
        let accuracy = correct as f64 / data.len() as f64;
        log.push(EpochRecord {
            epoch,
            loss,
            accuracy,
        });
        if stopper.stalled(loss) {
            return Ok(TrainLog {
                epochs: log,
                stop: StopReason::Converged,
            });
        }
    }
    Ok(TrainLog {
        epochs: log,
        stop: StopReason::MaxEpochs,
    })
}

fn apply_step(
    net: &mut BowNetwork,
    grad: &GradientSet,
    include_quant: bool,
    config: &TrainConfig,
    rprop: &mut Option<RpropState>,
) -> Result<()> {
    let grads = grad.tensors(include_quant);
    let mut params = net.trainable_tensors_mut(include_quant);
    match &config.optimizer {
        OptimizerKind::Rprop(_) => {
            rprop_step(&mut params, &grads, rprop.as_mut().expect("rprop state"))
        }
        OptimizerKind::Sgd { rate } => sgd_step(&mut params, &grads, *rate),
    }
}

fn evaluate_accuracy(net: &BowNetwork, data: &[LabeledSample]) -> Result<f64> {
    let predictions = par::map_ordered(data, |sample| {
        net.predict(&sample.channels, Assignment::Soft)
    });
    let mut correct = 0usize;
    for (prediction, sample) in predictions.into_iter().zip(data) {
        if prediction? == sample.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

fn shuffled_indices(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut indices: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
    indices
}

/// Patience-based convergence check on the objective.
struct Stopper {
    best: f64,
    stalled_epochs: usize,
    tolerance: f64,
    patience: usize,
}

impl Stopper {
    fn new(config: &TrainConfig) -> Self {
        Self {
            best: f64::INFINITY,
            stalled_epochs: 0,
            tolerance: config.stop_tolerance,
            patience: config.patience,
        }
    }

    fn stalled(&mut self, loss: f64) -> bool {
        let improvement = self.best - loss;
        if improvement > self.tolerance * self.best.abs().max(1e-12) {
            self.stalled_epochs = 0;
        } else {
            self.stalled_epochs += 1;
        }
        if loss < self.best {
            self.best = loss;
        }
        self.stalled_epochs >= self.patience
    }
}
