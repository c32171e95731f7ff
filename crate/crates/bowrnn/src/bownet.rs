//! The bag-of-words network: a quantization softmax layer per channel, a
//! recurrent accumulation layer that averages per-frame posteriors into a
//! histogram, an optional explicit feature-map layer, and a softmax output
//! classifier.
//!
//! The recurrent connection is the fixed unit matrix and is never trained,
//! so it is implicit rather than stored. Two consequences are exploited
//! throughout: the network output is invariant to the order of the input
//! frames, and the error signal entering the recurrent layer is the same at
//! every timeframe. The gradient therefore needs one forward accumulation
//! pass, a single stored error signal, and a second pass over the frames —
//! auxiliary storage stays constant in the sequence length.

use crate::codebook::{argmax, softmax_in_place, QuantLayer};
use crate::data::{FeatureSequence, LabeledSample};
use crate::error::{Error, Result};
use crate::featmap::{self, FeatureMapSpec};
use crate::par;
use crate::textio;
use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// Posterior floor before taking the log, keeping the loss finite.
const LOSS_FLOOR: f64 = 1e-300;

/// How frame mass is distributed over visual words when encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    /// Use the posterior distribution directly.
    Soft,
    /// Shift all probability mass to the most likely word. Encoding and
    /// inference only; training needs differentiability and always
    /// quantizes softly.
    Hard,
}

impl Assignment {
    pub fn name(self) -> &'static str {
        match self {
            Assignment::Soft => "soft",
            Assignment::Hard => "hard",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "soft" => Ok(Assignment::Soft),
            "hard" => Ok(Assignment::Hard),
            other => Err(Error::Format(format!("unknown assignment {other:?}"))),
        }
    }
}

/// An M-dimensional normalized visual-word histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub values: Vec<f64>,
    pub channel: Option<usize>,
}

impl Histogram {
    pub fn new(values: Vec<f64>, channel: Option<usize>) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::NegativeEntry(bad));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "histogram must sum to 1 within 1e-9, got {sum}"
            )));
        }
        Ok(Self { values, channel })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Output classifier: `F×C` weights over mapped features and a `C` bias.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl OutputLayer {
    pub fn feature_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.weights.ncols()
    }
}

/// Gradient of the loss w.r.t. every parameter; shapes mirror the network.
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub quant_weights: Vec<Array2<f64>>,
    pub quant_bias: Vec<Array1<f64>>,
    pub out_weights: Array2<f64>,
    pub out_bias: Array1<f64>,
}

impl GradientSet {
    pub fn zeros_like(net: &BowNetwork) -> Self {
        Self {
            quant_weights: net
                .channels
                .iter()
                .map(|l| Array2::zeros(l.weights.dim()))
                .collect(),
            quant_bias: net
                .channels
                .iter()
                .map(|l| Array1::zeros(l.bias.len()))
                .collect(),
            out_weights: Array2::zeros(net.output.weights.dim()),
            out_bias: Array1::zeros(net.output.bias.len()),
        }
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.quant_weights.iter_mut().zip(&other.quant_weights) {
            *a += b;
        }
        for (a, b) in self.quant_bias.iter_mut().zip(&other.quant_bias) {
            *a += b;
        }
        self.out_weights += &other.out_weights;
        self.out_bias += &other.out_bias;
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.quant_weights {
            *a *= factor;
        }
        for a in &mut self.quant_bias {
            *a *= factor;
        }
        self.out_weights *= factor;
        self.out_bias *= factor;
    }

    /// Largest absolute difference over all matching entries.
    pub fn max_abs_diff(&self, other: &GradientSet) -> f64 {
        let mut worst = 0.0f64;
        let pairs = self
            .flat_tensors()
            .into_iter()
            .zip(other.flat_tensors());
        for (a, b) in pairs {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
        worst
    }

    pub(crate) fn flat_tensors(&self) -> Vec<&[f64]> {
        self.tensors(true)
    }

    /// Tensor slices in network order; `include_quant = false` restricts to
    /// the output layer.
    pub(crate) fn tensors(&self, include_quant: bool) -> Vec<&[f64]> {
        let mut out = Vec::new();
        if include_quant {
            for (w, b) in self.quant_weights.iter().zip(&self.quant_bias) {
                out.push(w.as_slice().expect("standard layout"));
                out.push(b.as_slice().expect("standard layout"));
            }
        }
        out.push(self.out_weights.as_slice().expect("standard layout"));
        out.push(self.out_bias.as_slice().expect("standard layout"));
        out
    }
}

/// The full network. Multi-channel configurations hold one quantization
/// layer per channel (shared `D` and `M`); per-channel histograms are mapped
/// independently and concatenated before the output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BowNetwork {
    channels: Vec<QuantLayer>,
    map: Option<FeatureMapSpec>,
    output: OutputLayer,
}

impl BowNetwork {
    pub fn new(
        channels: Vec<QuantLayer>,
        map: Option<FeatureMapSpec>,
        output: OutputLayer,
    ) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidConfig("network needs >= 1 channel".into()));
        }
        let dim = channels[0].dim();
        let num_words = channels[0].num_words();
        for layer in &channels {
            layer.validate()?;
            if layer.dim() != dim || layer.num_words() != num_words {
                return Err(Error::InvalidConfig(
                    "all channels must share dimension and word count".into(),
                ));
            }
        }
        if output.bias.len() != output.num_classes() || output.num_classes() == 0 {
            return Err(Error::InvalidConfig("bad output layer shape".into()));
        }
        if output.weights.iter().any(|v| !v.is_finite())
            || output.bias.iter().any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("output layer parameters"));
        }
        let net = Self {
            channels,
            map,
            output,
        };
        let expected = net.feature_dim();
        if net.output.feature_dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: net.output.feature_dim(),
            });
        }
        Ok(net)
    }

    /// Fresh network with zero-mean uniform initialization: quantization
    /// weights scaled by `1/√D`, output weights by `1/√F`.
    pub fn random(
        dim: usize,
        num_words: usize,
        num_classes: usize,
        num_channels: usize,
        map: Option<FeatureMapSpec>,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let quant_range = 1.0 / (dim as f64).sqrt();
        let channels: Vec<QuantLayer> = (0..num_channels)
            .map(|_| QuantLayer {
                weights: Array2::from_shape_fn((dim, num_words), |_| {
                    rng.random_range(-quant_range..quant_range)
                }),
                bias: Array1::from_shape_fn(num_words, |_| {
                    rng.random_range(-quant_range..quant_range)
                }),
            })
            .collect();
        Self::with_random_output(channels, map, num_classes, &mut rng)
    }

    /// Network from existing quantization layers and a fresh random output
    /// layer; used by the init-linear and retrain-top strategies.
    pub fn from_quant_layers(
        channels: Vec<QuantLayer>,
        map: Option<FeatureMapSpec>,
        num_classes: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_random_output(channels, map, num_classes, &mut rng)
    }

    fn with_random_output(
        channels: Vec<QuantLayer>,
        map: Option<FeatureMapSpec>,
        num_classes: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidConfig("network needs >= 1 channel".into()));
        }
        let per_channel = match &map {
            Some(spec) => spec.map_dim(channels[0].num_words()),
            None => channels[0].num_words(),
        };
        let feature_dim = per_channel * channels.len();
        let range = 1.0 / (feature_dim as f64).sqrt();
        let output = OutputLayer {
            weights: Array2::from_shape_fn((feature_dim, num_classes), |_| {
                rng.random_range(-range..range)
            }),
            bias: Array1::from_shape_fn(num_classes, |_| rng.random_range(-range..range)),
        };
        Self::new(channels, map, output)
    }

    pub fn dim(&self) -> usize {
        self.channels[0].dim()
    }

    pub fn num_words(&self) -> usize {
        self.channels[0].num_words()
    }

    pub fn num_classes(&self) -> usize {
        self.output.num_classes()
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn map(&self) -> Option<&FeatureMapSpec> {
        self.map.as_ref()
    }

    /// Mapped feature dimension `F` seen by the output layer.
    pub fn feature_dim(&self) -> usize {
        let per_channel = match &self.map {
            Some(spec) => spec.map_dim(self.num_words()),
            None => self.num_words(),
        };
        per_channel * self.num_channels()
    }

    pub fn channel(&self, c: usize) -> &QuantLayer {
        &self.channels[c]
    }

    pub fn channels_mut(&mut self) -> &mut [QuantLayer] {
        &mut self.channels
    }

    pub fn output(&self) -> &OutputLayer {
        &self.output
    }

    pub fn output_mut(&mut self) -> &mut OutputLayer {
        &mut self.output
    }

    /// Mutable parameter slices in the same order as
    /// [`GradientSet::tensors`]; `include_quant = false` restricts to the
    /// output layer.
    pub(crate) fn trainable_tensors_mut(&mut self, include_quant: bool) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        if include_quant {
            for layer in &mut self.channels {
                let QuantLayer { weights, bias } = layer;
                out.push(weights.as_slice_mut().expect("standard layout"));
                out.push(bias.as_slice_mut().expect("standard layout"));
            }
        }
        let OutputLayer { weights, bias } = &mut self.output;
        out.push(weights.as_slice_mut().expect("standard layout"));
        out.push(bias.as_slice_mut().expect("standard layout"));
        out
    }

    fn check_sample(&self, sample: &[FeatureSequence]) -> Result<()> {
        if sample.len() != self.num_channels() {
            return Err(Error::ChannelMismatch {
                expected: self.num_channels(),
                actual: sample.len(),
            });
        }
        for seq in sample {
            if seq.dim() != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    actual: seq.dim(),
                });
            }
        }
        Ok(())
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label == 0 || label > self.num_classes() {
            return Err(Error::InvalidLabel {
                label,
                classes: self.num_classes(),
            });
        }
        Ok(())
    }

    /// Posterior over visual words for one descriptor:
    /// `softmax(Wᵀx + b)`, numerically stabilized.
    pub fn quantize(&self, channel: usize, x: &[f64]) -> Result<Vec<f64>> {
        let layer = &self.channels[channel];
        if x.len() != layer.dim() {
            return Err(Error::DimensionMismatch {
                expected: layer.dim(),
                actual: x.len(),
            });
        }
        let mut out = vec![0.0; layer.num_words()];
        quantize_into(layer, &ArrayView1::from(x), &mut out);
        Ok(out)
    }

    /// Frame-averaged histogram `H = (1/T) Σ_t h(x_t)` for one channel's
    /// sequence; invariant under frame permutation.
    pub fn encode(
        &self,
        channel: usize,
        seq: &FeatureSequence,
        assignment: Assignment,
    ) -> Result<Histogram> {
        if seq.num_frames() == 0 {
            return Err(Error::EmptySequence);
        }
        if seq.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: seq.dim(),
            });
        }
        let layer = &self.channels[channel];
        let m = layer.num_words();
        let mut acc = vec![0.0; m];
        let mut h = vec![0.0; m];
        for frame in seq.frames.rows() {
            quantize_into(layer, &frame, &mut h);
            match assignment {
                Assignment::Soft => {
                    for (a, &v) in acc.iter_mut().zip(&h) {
                        *a += v;
                    }
                }
                Assignment::Hard => acc[argmax(&h)] += 1.0,
            }
        }
        let t = seq.num_frames() as f64;
        acc.iter_mut().for_each(|a| *a /= t);
        Histogram::new(acc, Some(channel))
    }

    /// Per-channel histograms of a multi-channel sample.
    pub fn encode_sample(
        &self,
        sample: &[FeatureSequence],
        assignment: Assignment,
    ) -> Result<Vec<Histogram>> {
        self.check_sample(sample)?;
        sample
            .iter()
            .enumerate()
            .map(|(c, seq)| self.encode(c, seq, assignment))
            .collect()
    }

    /// The feature vector seen by the output layer: per-channel histograms,
    /// mapped when a feature-map layer is configured, concatenated.
    pub fn features(&self, sample: &[FeatureSequence], assignment: Assignment) -> Result<Vec<f64>> {
        let histograms = self.encode_sample(sample, assignment)?;
        self.features_from_histograms(&histograms)
    }

    /// As [`Self::features`], starting from already-encoded histograms.
    pub fn features_from_histograms(&self, histograms: &[Histogram]) -> Result<Vec<f64>> {
        if histograms.len() != self.num_channels() {
            return Err(Error::ChannelMismatch {
                expected: self.num_channels(),
                actual: histograms.len(),
            });
        }
        let mut features = Vec::with_capacity(self.feature_dim());
        for hist in histograms {
            if hist.len() != self.num_words() {
                return Err(Error::DimensionMismatch {
                    expected: self.num_words(),
                    actual: hist.len(),
                });
            }
            match &self.map {
                Some(spec) => features.extend(featmap::map_histogram(spec, &hist.values)?),
                None => features.extend_from_slice(&hist.values),
            }
        }
        Ok(features)
    }

    /// Class posterior `softmax(W̃ᵀ Ψ(H) + b̃)`.
    pub fn forward(&self, sample: &[FeatureSequence]) -> Result<Vec<f64>> {
        self.forward_with(sample, Assignment::Soft)
    }

    pub fn forward_with(
        &self,
        sample: &[FeatureSequence],
        assignment: Assignment,
    ) -> Result<Vec<f64>> {
        let features = self.features(sample, assignment)?;
        Ok(self.classify_features(&features))
    }

    /// Output softmax over an already-mapped feature vector.
    pub fn classify_features(&self, features: &[f64]) -> Vec<f64> {
        let mut scores: Vec<f64> = self.output.bias.to_vec();
        for (f, &fv) in features.iter().enumerate() {
            for (s, &w) in scores.iter_mut().zip(self.output.weights.row(f)) {
                *s += fv * w;
            }
        }
        softmax_in_place(&mut scores);
        scores
    }

    /// Cross-entropy loss `-log p(label | sample)`, floored to stay finite.
    pub fn loss(&self, sample: &[FeatureSequence], label: usize) -> Result<f64> {
        self.check_label(label)?;
        let posterior = self.forward(sample)?;
        Ok(-posterior[label - 1].max(LOSS_FLOOR).ln())
    }

    /// Exact gradient of the cross-entropy loss w.r.t. all parameters.
    ///
    /// One forward accumulation pass computes the histogram and the output
    /// error; the single recurrent error signal is then reused while a
    /// second pass over the frames accumulates the quantization-layer
    /// gradient. Auxiliary storage is independent of the sequence length.
    pub fn gradient(
        &self,
        sample: &[FeatureSequence],
        label: usize,
    ) -> Result<(GradientSet, f64)> {
        let (grad, loss, _) = self.gradient_impl(sample, label)?;
        Ok((grad, loss))
    }

    /// [`Self::gradient`] plus the number of scratch buffers it allocated;
    /// the count is constant in the sequence length.
    pub fn gradient_counting_allocations(
        &self,
        sample: &[FeatureSequence],
        label: usize,
    ) -> Result<(GradientSet, f64, usize)> {
        self.gradient_impl(sample, label)
    }

    fn gradient_impl(
        &self,
        sample: &[FeatureSequence],
        label: usize,
    ) -> Result<(GradientSet, f64, usize)> {
        self.check_sample(sample)?;
        self.check_label(label)?;
        for seq in sample {
            if seq.num_frames() == 0 {
                return Err(Error::EmptySequence);
            }
        }

        let m = self.num_words();
        let num_classes = self.num_classes();
        let feature_dim = self.feature_dim();
        let block = match &self.map {
            Some(spec) => spec.map_dim(m),
            None => m,
        };
        let mut allocs = 0usize;
        let buffer = |len: usize, allocs: &mut usize| -> Vec<f64> {
            *allocs += 1;
            vec![0.0; len]
        };

        // Forward accumulation: per-channel histograms, one reused
        // frame-posterior buffer.
        let mut h = buffer(m, &mut allocs);
        let mut histograms = Vec::with_capacity(self.num_channels());
        for (layer, seq) in self.channels.iter().zip(sample) {
            let mut acc = buffer(m, &mut allocs);
            for frame in seq.frames.rows() {
                quantize_into(layer, &frame, &mut h);
                for (a, &v) in acc.iter_mut().zip(&h) {
                    *a += v;
                }
            }
            let t = seq.num_frames() as f64;
            acc.iter_mut().for_each(|a| *a /= t);
            histograms.push(acc);
        }

        // Map layer and output softmax.
        let mut y_map = buffer(feature_dim, &mut allocs);
        for (c, hist) in histograms.iter().enumerate() {
            let slot = &mut y_map[c * block..(c + 1) * block];
            match &self.map {
                Some(spec) => {
                    let out_dim = spec.output_dim();
                    for (e, chunk) in hist.iter().zip(slot.chunks_mut(out_dim)) {
                        featmap::map_scalar_into(spec, *e, chunk)?;
                    }
                }
                None => slot.copy_from_slice(hist),
            }
        }
        let mut y_out = buffer(num_classes, &mut allocs);
        y_out.copy_from_slice(self.output.bias.as_slice().expect("standard layout"));
        for (f, &fv) in y_map.iter().enumerate() {
            for (s, &w) in y_out.iter_mut().zip(self.output.weights.row(f)) {
                *s += fv * w;
            }
        }
        softmax_in_place(&mut y_out);
        let loss = -y_out[label - 1].max(LOSS_FLOOR).ln();

        // Backward pass. The output error doubles as its own buffer.
        let e_out = {
            y_out[label - 1] -= 1.0;
            y_out
        };
        let mut grads = GradientSet::zeros_like(self);
        // dW̃ = Ψ(H) e_outᵀ, db̃ = e_out.
        for (f, &fv) in y_map.iter().enumerate() {
            for (g, &e) in grads
                .out_weights
                .row_mut(f)
                .iter_mut()
                .zip(&e_out)
            {
                *g = fv * e;
            }
        }
        grads
            .out_bias
            .as_slice_mut()
            .expect("standard layout")
            .copy_from_slice(&e_out);

        // Error reaching the histogram: u = W̃ e_out, pushed through the
        // feature-map Jacobian per channel, then scaled by 1/T. The signal
        // is identical for every timeframe.
        let mut u = buffer(feature_dim, &mut allocs);
        for (f, slot) in u.iter_mut().enumerate() {
            *slot = self
                .output
                .weights
                .row(f)
                .iter()
                .zip(&e_out)
                .map(|(w, e)| w * e)
                .sum();
        }

        let mut e_rec = buffer(m, &mut allocs);
        let mut e_sft = buffer(m, &mut allocs);
        let mut deriv = buffer(self.map.as_ref().map_or(1, |s| s.output_dim()), &mut allocs);
        for (c, (layer, seq)) in self.channels.iter().zip(sample).enumerate() {
            let u_block = &u[c * block..(c + 1) * block];
            match &self.map {
                Some(spec) => {
                    let out_dim = spec.output_dim();
                    for (j, (&entry, chunk)) in histograms[c]
                        .iter()
                        .zip(u_block.chunks(out_dim))
                        .enumerate()
                    {
                        // Zero histogram entries use the zero-column
                        // convention: the map derivative diverges there.
                        e_rec[j] = if entry > 0.0 {
                            featmap::map_derivative_into(spec, entry, &mut deriv)?;
                            deriv.iter().zip(chunk).map(|(d, e)| d * e).sum()
                        } else {
                            0.0
                        };
                    }
                }
                None => e_rec.copy_from_slice(u_block),
            }
            let t = seq.num_frames() as f64;
            e_rec.iter_mut().for_each(|e| *e /= t);

            // Second pass: recompute each frame posterior, form the softmax
            // Jacobian product, accumulate.
            let dw = &mut grads.quant_weights[c];
            let db = grads.quant_bias[c].as_slice_mut().expect("standard layout");
            for frame in seq.frames.rows() {
                quantize_into(layer, &frame, &mut h);
                let dot: f64 = h.iter().zip(&e_rec).map(|(a, b)| a * b).sum();
                for ((s, &hv), &ev) in e_sft.iter_mut().zip(&h).zip(&e_rec) {
                    *s = hv * (ev - dot);
                }
                for (d, &xd) in frame.iter().enumerate() {
                    for (g, &s) in dw.row_mut(d).iter_mut().zip(&e_sft) {
                        *g += xd * s;
                    }
                }
                for (g, &s) in db.iter_mut().zip(&e_sft) {
                    *g += s;
                }
            }
        }

        Ok((grads, loss, allocs))
    }

    /// Mean gradient and loss over a batch. Per-sample gradients may be
    /// computed in parallel; the reduction runs in batch order, so the
    /// result does not depend on the worker count.
    pub fn batch_gradient(&self, batch: &[LabeledSample]) -> Result<(GradientSet, f64)> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let results = par::map_ordered(batch, |sample| {
            self.gradient(&sample.channels, sample.label)
        });
        let mut total: Option<GradientSet> = None;
        let mut loss_sum = 0.0;
        for result in results {
            let (grad, loss) = result?;
            loss_sum += loss;
            match &mut total {
                Some(acc) => acc.add_assign(&grad),
                None => total = Some(grad),
            }
        }
        let mut total = total.expect("non-empty batch");
        let n = batch.len() as f64;
        total.scale(1.0 / n);
        Ok((total, loss_sum / n))
    }

    /// Predicted label (argmax of the class posterior), 1-based.
    pub fn predict(&self, sample: &[FeatureSequence], assignment: Assignment) -> Result<usize> {
        let posterior = self.forward_with(sample, assignment)?;
        Ok(argmax(&posterior) + 1)
    }

    /// Text serialization: header
    /// `BOWNET1 <D> <M> <C> <channels> <map-kind> <n> <L>`, then per channel
    /// `W` (D rows of M floats) and `b`, then `W̃` (F rows of C floats) and
    /// `b̃`.
    pub fn to_text(&self) -> String {
        let (kind, n, period) = match &self.map {
            None => ("none", 0, 0.0),
            Some(spec) => (spec.kernel.name(), spec.samples, spec.period),
        };
        let mut out = format!(
            "BOWNET1 {} {} {} {} {} {} {}\n",
            self.dim(),
            self.num_words(),
            self.num_classes(),
            self.num_channels(),
            kind,
            n,
            textio::format_f64(period),
        );
        for layer in &self.channels {
            for row in layer.weights.rows() {
                textio::push_row(&mut out, row.iter().copied());
            }
            textio::push_row(&mut out, layer.bias.iter().copied());
        }
        for row in self.output.weights.rows() {
            textio::push_row(&mut out, row.iter().copied());
        }
        textio::push_row(&mut out, self.output.bias.iter().copied());
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = textio::next_line(&mut lines, "BOWNET1 header")?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 8 || fields[0] != "BOWNET1" {
            return Err(Error::Format(format!("bad model header {header:?}")));
        }
        let dim = textio::parse_usize(fields[1], "dimension")?;
        let num_words = textio::parse_usize(fields[2], "word count")?;
        let num_classes = textio::parse_usize(fields[3], "class count")?;
        let num_channels = textio::parse_usize(fields[4], "channel count")?;
        let samples = textio::parse_usize(fields[6], "map samples")?;
        let period: f64 = fields[7]
            .parse()
            .map_err(|_| Error::Format(format!("bad map period {:?}", fields[7])))?;
        let map = match fields[5] {
            "none" => None,
            kind => Some(FeatureMapSpec::new(
                featmap::MapKernel::parse(kind)?,
                samples,
                period,
            )?),
        };

        let mut read_matrix = |rows: usize, cols: usize, what: &str| -> Result<Array2<f64>> {
            let mut matrix = Array2::zeros((rows, cols));
            for r in 0..rows {
                let row = textio::parse_row(
                    textio::next_line(&mut lines, what)?,
                    cols,
                    &format!("{what} row {r}"),
                )?;
                matrix.row_mut(r).assign(&Array1::from_vec(row));
            }
            Ok(matrix)
        };

        let mut channels = Vec::with_capacity(num_channels);
        for c in 0..num_channels {
            let weights = read_matrix(dim, num_words, &format!("channel {c} weights"))?;
            let bias = read_matrix(1, num_words, &format!("channel {c} bias"))?
                .row(0)
                .to_owned();
            channels.push(QuantLayer { weights, bias });
        }
        let per_channel = match &map {
            Some(spec) => spec.map_dim(num_words),
            None => num_words,
        };
        let feature_dim = per_channel * num_channels;
        let out_weights = read_matrix(feature_dim, num_classes, "output weights")?;
        let out_bias = read_matrix(1, num_classes, "output bias")?.row(0).to_owned();
        Self::new(
            channels,
            map,
            OutputLayer {
                weights: out_weights,
                bias: out_bias,
            },
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// `out = softmax(Wᵀx + b)` without allocating.
fn quantize_into(layer: &QuantLayer, x: &ArrayView1<'_, f64>, out: &mut [f64]) {
    out.copy_from_slice(layer.bias.as_slice().expect("standard layout"));
    for (d, &xd) in x.iter().enumerate() {
        for (o, &w) in out.iter_mut().zip(layer.weights.row(d)) {
            *o += xd * w;
        }
    }
    softmax_in_place(out);
}
