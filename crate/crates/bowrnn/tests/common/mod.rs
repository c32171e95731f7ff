#![allow(clippy::needless_range_loop)]

//! Independent reference implementations used by the integration and
//! acceptance tests. Everything here is written straight from the formulas
//! on plain nested `Vec`s — no code shared with the library's computation
//! paths beyond reading network parameters.

use bowrnn::bownet::{BowNetwork, GradientSet};
use bowrnn::data::FeatureSequence;
use bowrnn::featmap::{FeatureMapSpec, MapKernel};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn naive_softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

fn naive_kappa(kernel: MapKernel, lambda: f64) -> f64 {
    match kernel {
        MapKernel::Hellinger => unreachable!("hellinger has an exact map"),
        MapKernel::Chi2 => 1.0 / (std::f64::consts::PI * lambda).cosh(),
        MapKernel::Intersection => 2.0 / (std::f64::consts::PI * (1.0 + 4.0 * lambda * lambda)),
    }
}

/// The approximate feature map, written directly from its definition.
pub fn naive_map_scalar(spec: &FeatureMapSpec, x: f64) -> Vec<f64> {
    match spec.kernel {
        MapKernel::Hellinger => vec![x.sqrt()],
        kernel => {
            let n = spec.samples;
            let period = spec.period;
            let mut out = vec![0.0; 2 * n + 1];
            if x == 0.0 {
                return out;
            }
            out[0] = (naive_kappa(kernel, 0.0) * x * period).sqrt();
            for k in 1..=n {
                let freq = k as f64 * period;
                let amp = (2.0 * naive_kappa(kernel, freq) * x * period).sqrt();
                out[2 * k - 1] = amp * (freq * x.ln()).cos();
                out[2 * k] = amp * (freq * x.ln()).sin();
            }
            out
        }
    }
}

/// Derivative of the map, differentiated by hand:
/// `d/dx [A√x cos(ω log x)] = A cos(ω log x)/(2√x) - A√x sin(ω log x)·ω/x`
/// and the sine component symmetrically with `+cos`.
fn naive_map_derivative(spec: &FeatureMapSpec, x: f64) -> Vec<f64> {
    match spec.kernel {
        MapKernel::Hellinger => vec![0.5 / x.sqrt()],
        kernel => {
            let n = spec.samples;
            let period = spec.period;
            let mut out = vec![0.0; 2 * n + 1];
            let sqrt_x = x.sqrt();
            out[0] = (naive_kappa(kernel, 0.0) * period).sqrt() / (2.0 * sqrt_x);
            for k in 1..=n {
                let freq = k as f64 * period;
                let amp = (2.0 * naive_kappa(kernel, freq) * period).sqrt();
                let theta = freq * x.ln();
                out[2 * k - 1] =
                    amp * theta.cos() / (2.0 * sqrt_x) - amp * sqrt_x * theta.sin() * freq / x;
                out[2 * k] =
                    amp * theta.sin() / (2.0 * sqrt_x) + amp * sqrt_x * theta.cos() * freq / x;
            }
            out
        }
    }
}

/// Fully-unrolled BPTT reference gradient.
///
/// The forward pass stores every per-frame activation; the backward pass
/// materializes the softmax Jacobian per frame and walks the recurrence
/// explicitly from t = T down to 1, keeping one error vector per timeframe.
pub fn unrolled_bptt(
    net: &BowNetwork,
    sample: &[FeatureSequence],
    label: usize,
) -> (GradientSet, f64) {
    let m = net.num_words();
    let num_classes = net.num_classes();

    // Forward, storing all activations.
    let mut frame_posteriors: Vec<Vec<Vec<f64>>> = Vec::new(); // [channel][t][m]
    let mut histograms: Vec<Vec<f64>> = Vec::new();
    for (c, seq) in sample.iter().enumerate() {
        let layer = net.channel(c);
        let t_total = seq.num_frames();
        let mut per_frame = Vec::with_capacity(t_total);
        for t in 0..t_total {
            let x = seq.frame(t);
            let scores: Vec<f64> = (0..m)
                .map(|j| {
                    layer.bias[j]
                        + (0..seq.dim()).map(|d| layer.weights[(d, j)] * x[d]).sum::<f64>()
                })
                .collect();
            per_frame.push(naive_softmax(&scores));
        }
        let mut hist = vec![0.0; m];
        for h in &per_frame {
            for (a, &v) in hist.iter_mut().zip(h) {
                *a += v;
            }
        }
        hist.iter_mut().for_each(|v| *v /= t_total as f64);
        frame_posteriors.push(per_frame);
        histograms.push(hist);
    }

    let block = match net.map() {
        Some(spec) => spec.map_dim(m),
        None => m,
    };
    let mut y_map = Vec::new();
    for hist in &histograms {
        match net.map() {
            Some(spec) => {
                for &e in hist {
                    y_map.extend(naive_map_scalar(spec, e));
                }
            }
            None => y_map.extend_from_slice(hist),
        }
    }
    let out_scores: Vec<f64> = (0..num_classes)
        .map(|cl| {
            net.output().bias[cl]
                + (0..y_map.len())
                    .map(|f| net.output().weights[(f, cl)] * y_map[f])
                    .sum::<f64>()
        })
        .collect();
    let y_out = naive_softmax(&out_scores);
    let loss = -y_out[label - 1].max(1e-300).ln();

    // Backward.
    let mut e_out = y_out;
    e_out[label - 1] -= 1.0;

    let mut grads = GradientSet::zeros_like(net);
    for f in 0..y_map.len() {
        for cl in 0..num_classes {
            grads.out_weights[(f, cl)] = y_map[f] * e_out[cl];
        }
    }
    for cl in 0..num_classes {
        grads.out_bias[cl] = e_out[cl];
    }

    // dL/dy_map = W̃ e_out.
    let dmap: Vec<f64> = (0..y_map.len())
        .map(|f| {
            (0..num_classes)
                .map(|cl| net.output().weights[(f, cl)] * e_out[cl])
                .sum()
        })
        .collect();

    for (c, seq) in sample.iter().enumerate() {
        let t_total = seq.num_frames();
        // Push through the feature map Jacobian (blockwise transpose).
        let u_block = &dmap[c * block..(c + 1) * block];
        let dhist: Vec<f64> = match net.map() {
            Some(spec) => {
                let w = spec.output_dim();
                histograms[c]
                    .iter()
                    .enumerate()
                    .map(|(j, &entry)| {
                        if entry > 0.0 {
                            let deriv = naive_map_derivative(spec, entry);
                            deriv
                                .iter()
                                .zip(&u_block[j * w..(j + 1) * w])
                                .map(|(d, e)| d * e)
                                .sum()
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            None => u_block.to_vec(),
        };

        // Unroll the recurrence: the error at the last pre-activation is
        // (1/T)·dhist, and because every σ_t below T is the identity with a
        // unit recurrent weight, it propagates unchanged to every t.
        let mut timeframe_errors: Vec<Vec<f64>> = vec![Vec::new(); t_total];
        timeframe_errors[t_total - 1] =
            dhist.iter().map(|v| v / t_total as f64).collect();
        for t in (0..t_total - 1).rev() {
            timeframe_errors[t] = timeframe_errors[t + 1].clone();
        }

        for t in 0..t_total {
            let h = &frame_posteriors[c][t];
            // Explicit softmax Jacobian: J[i][j] = h_i (δ_ij - h_j).
            let mut e_sft = vec![0.0; m];
            for i in 0..m {
                for j in 0..m {
                    let jac = h[i] * (if i == j { 1.0 } else { 0.0 } - h[j]);
                    e_sft[i] += jac * timeframe_errors[t][j];
                }
            }
            let x = seq.frame(t);
            for d in 0..seq.dim() {
                for j in 0..m {
                    grads.quant_weights[c][(d, j)] += x[d] * e_sft[j];
                }
            }
            for j in 0..m {
                grads.quant_bias[c][j] += e_sft[j];
            }
        }
    }
    (grads, loss)
}

/// Central finite differences of `net.loss` w.r.t. every parameter.
pub fn finite_difference_gradient(
    net: &BowNetwork,
    sample: &[FeatureSequence],
    label: usize,
    epsilon: f64,
) -> GradientSet {
    let mut grads = GradientSet::zeros_like(net);
    let mut work = net.clone();

    for c in 0..net.num_channels() {
        for d in 0..net.dim() {
            for j in 0..net.num_words() {
                grads.quant_weights[c][(d, j)] = central_diff(&mut work, sample, label, epsilon, |n, v| {
                    n.channels_mut()[c].weights[(d, j)] = v;
                }, net.channel(c).weights[(d, j)]);
            }
        }
        for j in 0..net.num_words() {
            grads.quant_bias[c][j] = central_diff(&mut work, sample, label, epsilon, |n, v| {
                n.channels_mut()[c].bias[j] = v;
            }, net.channel(c).bias[j]);
        }
    }
    for f in 0..net.feature_dim() {
        for cl in 0..net.num_classes() {
            grads.out_weights[(f, cl)] = central_diff(&mut work, sample, label, epsilon, |n, v| {
                n.output_mut().weights[(f, cl)] = v;
            }, net.output().weights[(f, cl)]);
        }
    }
    for cl in 0..net.num_classes() {
        grads.out_bias[cl] = central_diff(&mut work, sample, label, epsilon, |n, v| {
            n.output_mut().bias[cl] = v;
        }, net.output().bias[cl]);
    }
    grads
}

fn central_diff(
    net: &mut BowNetwork,
    sample: &[FeatureSequence],
    label: usize,
    epsilon: f64,
    set: impl Fn(&mut BowNetwork, f64),
    original: f64,
) -> f64 {
    set(net, original + epsilon);
    let plus = net.loss(sample, label).expect("loss");
    set(net, original - epsilon);
    let minus = net.loss(sample, label).expect("loss");
    set(net, original);
    (plus - minus) / (2.0 * epsilon)
}

/// Relative disagreement between two gradients with a floor on the scale,
/// so near-zero entries compare absolutely.
pub fn max_relative_error(a: &GradientSet, b: &GradientSet, floor: f64) -> f64 {
    let mut worst = 0.0f64;
    for (ta, tb) in a.clone().flat_pairs(b) {
        let scale = ta.abs().max(tb.abs()).max(floor);
        worst = worst.max((ta - tb).abs() / scale);
    }
    worst
}

/// Flattened pairing helper for [`max_relative_error`].
trait FlatPairs {
    fn flat_pairs(self, other: &GradientSet) -> Vec<(f64, f64)>;
}

impl FlatPairs for GradientSet {
    fn flat_pairs(self, other: &GradientSet) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for (a, b) in self.quant_weights.iter().zip(&other.quant_weights) {
            out.extend(a.iter().copied().zip(b.iter().copied()));
        }
        for (a, b) in self.quant_bias.iter().zip(&other.quant_bias) {
            out.extend(a.iter().copied().zip(b.iter().copied()));
        }
        out.extend(
            self.out_weights
                .iter()
                .copied()
                .zip(other.out_weights.iter().copied()),
        );
        out.extend(
            self.out_bias
                .iter()
                .copied()
                .zip(other.out_bias.iter().copied()),
        );
        out
    }
}

/// Random sequence with entries in [-scale, scale].
pub fn random_sequence(rng: &mut ChaCha8Rng, frames: usize, dim: usize, scale: f64) -> FeatureSequence {
    FeatureSequence::new(
        Array2::from_shape_fn((frames, dim), |_| rng.random_range(-scale..scale)),
        "random",
    )
    .unwrap()
}

/// Random normalized histogram with strictly positive entries.
pub fn random_histogram(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut h: Vec<f64> = (0..len).map(|_| rng.random::<f64>() + 1e-3).collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    h
}
