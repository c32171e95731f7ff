//! Exact kernels between histograms: Hellinger, additive homogeneous χ²,
//! histogram intersection, and the multichannel RBF-χ² kernel, plus Gram
//! matrices and the support-vector expansion decision rule used to check
//! that the explicit feature map reproduces kernel classification.

use crate::error::{Error, Result};
use crate::featmap::{self, FeatureMapSpec, MapKernel};
use crate::par;
use crate::textio;
use std::path::Path;

/// Scalar kernel `k(a, b)` for one histogram entry pair.
///
/// χ² is defined as 0 when `a + b = 0`.
pub fn scalar_kernel(kind: MapKernel, a: f64, b: f64) -> f64 {
    match kind {
        MapKernel::Hellinger => (a * b).sqrt(),
        MapKernel::Chi2 => {
            if a + b > 0.0 {
                2.0 * a * b / (a + b)
            } else {
                0.0
            }
        }
        MapKernel::Intersection => a.min(b),
    }
}

fn check_pair(h1: &[f64], h2: &[f64]) -> Result<()> {
    if h1.len() != h2.len() {
        return Err(Error::DimensionMismatch {
            expected: h1.len(),
            actual: h2.len(),
        });
    }
    for &v in h1.iter().chain(h2) {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::NegativeEntry(v));
        }
    }
    Ok(())
}

/// Additive kernel `Σ_m k(h1_m, h2_m)`.
pub fn additive_kernel(kind: MapKernel, h1: &[f64], h2: &[f64]) -> Result<f64> {
    check_pair(h1, h2)?;
    Ok(h1
        .iter()
        .zip(h2)
        .map(|(&a, &b)| scalar_kernel(kind, a, b))
        .sum())
}

/// χ² distance `½ Σ_m (h1_m - h2_m)² / (h1_m + h2_m)`, 0/0 terms dropped.
pub fn chi2_distance(h1: &[f64], h2: &[f64]) -> Result<f64> {
    check_pair(h1, h2)?;
    Ok(h1
        .iter()
        .zip(h2)
        .map(|(&a, &b)| {
            if a + b > 0.0 {
                0.5 * (a - b) * (a - b) / (a + b)
            } else {
                0.0
            }
        })
        .sum())
}

/// Per-channel normalizers `A_c` for the multichannel RBF-χ² kernel: the
/// mean χ² distance over all histogram pairs of the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelKernelParams {
    pub channel_means: Vec<f64>,
}

impl MultichannelKernelParams {
    pub fn new(channel_means: Vec<f64>) -> Result<Self> {
        if channel_means.is_empty() {
            return Err(Error::InvalidConfig("need at least one channel".into()));
        }
        if channel_means.iter().any(|&a| !a.is_finite() || a <= 0.0) {
            return Err(Error::InvalidConfig(
                "channel mean distances must be positive".into(),
            ));
        }
        Ok(Self { channel_means })
    }

    pub fn num_channels(&self) -> usize {
        self.channel_means.len()
    }
}

/// `exp( -(1/C) Σ_c D(a_c, b_c) / A_c )` over per-channel histograms; a
/// single channel uses the same formula with `C = 1`.
pub fn multichannel_rbf_chi2(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    params: &MultichannelKernelParams,
) -> Result<f64> {
    if a.len() != params.num_channels() || b.len() != params.num_channels() {
        return Err(Error::ChannelMismatch {
            expected: params.num_channels(),
            actual: a.len().min(b.len()),
        });
    }
    let mut sum = 0.0;
    for c in 0..params.num_channels() {
        sum += chi2_distance(&a[c], &b[c])? / params.channel_means[c];
    }
    Ok((-sum / params.num_channels() as f64).exp())
}

/// Estimate `A_c` as the mean χ² distance over all unordered histogram pairs
/// within each channel. `histograms[c]` holds the training histograms of
/// channel `c`.
pub fn estimate_channel_means(histograms: &[Vec<Vec<f64>>]) -> Result<MultichannelKernelParams> {
    let mut means = Vec::with_capacity(histograms.len());
    for (c, channel) in histograms.iter().enumerate() {
        let n = channel.len();
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "channel {c}: need at least 2 histograms to estimate the mean distance"
            )));
        }
        let mut total = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                total += chi2_distance(&channel[i], &channel[j])?;
            }
        }
        let mean = total / (n * (n - 1) / 2) as f64;
        if mean == 0.0 {
            return Err(Error::DegenerateChannel(c));
        }
        means.push(mean);
    }
    MultichannelKernelParams::new(means)
}

/// Kernel selector for Gram matrices.
#[derive(Debug, Clone)]
pub enum GramKind {
    Additive(MapKernel),
    RbfChi2(MultichannelKernelParams),
}

impl GramKind {
    pub fn name(&self) -> &'static str {
        match self {
            GramKind::Additive(k) => k.name(),
            GramKind::RbfChi2(_) => "rbf-chi2",
        }
    }
}

/// Symmetric Gram matrix over single-channel histograms; each pair is
/// computed once and mirrored.
pub fn gram_matrix(kind: MapKernel, histograms: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    gram_from(histograms.len(), |i, j| {
        additive_kernel(kind, &histograms[i], &histograms[j])
    })
}

/// Symmetric Gram matrix of the multichannel RBF-χ² kernel;
/// `samples[i]` holds the per-channel histograms of item `i`.
pub fn gram_matrix_rbf(
    samples: &[Vec<Vec<f64>>],
    params: &MultichannelKernelParams,
) -> Result<Vec<Vec<f64>>> {
    gram_from(samples.len(), |i, j| {
        multichannel_rbf_chi2(&samples[i], &samples[j], params)
    })
}

fn gram_from(
    n: usize,
    kernel: impl Fn(usize, usize) -> Result<f64> + Sync + Send,
) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InsufficientData("empty histogram set".into()));
    }
    // Upper triangle rows in parallel, mirrored afterwards.
    let rows: Vec<Result<Vec<f64>>> =
        par::map_range(n, |i| (i..n).map(|j| kernel(i, j)).collect());
    let mut gram = vec![vec![0.0; n]; n];
    for (i, row) in rows.into_iter().enumerate() {
        for (off, value) in row?.into_iter().enumerate() {
            let j = i + off;
            gram[i][j] = value;
            gram[j][i] = value;
        }
    }
    Ok(gram)
}

/// Write a Gram matrix as text: `GRAM1 <N> <kind>`, then N rows of N floats.
pub fn save_gram(path: impl AsRef<Path>, kind: &GramKind, gram: &[Vec<f64>]) -> Result<()> {
    let mut out = format!("GRAM1 {} {}\n", gram.len(), kind.name());
    for row in gram {
        textio::push_row(&mut out, row.iter().copied());
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// A two-class support-vector expansion: decision
/// `Σ_i α_i y_i K(h_i, h) + bias`.
#[derive(Debug, Clone)]
pub struct SvmExpansion {
    pub kernel: MapKernel,
    pub supports: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
    /// Labels in {-1, +1}.
    pub labels: Vec<i8>,
    pub bias: f64,
}

impl SvmExpansion {
    pub fn new(
        kernel: MapKernel,
        supports: Vec<Vec<f64>>,
        coefficients: Vec<f64>,
        labels: Vec<i8>,
        bias: f64,
    ) -> Result<Self> {
        if supports.is_empty() {
            return Err(Error::InsufficientData(
                "expansion needs at least one support vector".into(),
            ));
        }
        if supports.len() != coefficients.len() || supports.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: supports.len(),
                actual: coefficients.len().min(labels.len()),
            });
        }
        if labels.iter().any(|&y| y != 1 && y != -1) {
            return Err(Error::InvalidConfig("labels must be -1 or +1".into()));
        }
        Ok(Self {
            kernel,
            supports,
            coefficients,
            labels,
            bias,
        })
    }
}

/// Kernel-expansion decision `Σ_i α_i y_i K(h_i, h) + bias`.
pub fn svm_decision(exp: &SvmExpansion, h: &[f64]) -> Result<f64> {
    let mut sum = exp.bias;
    for i in 0..exp.supports.len() {
        sum += exp.coefficients[i]
            * exp.labels[i] as f64
            * additive_kernel(exp.kernel, &exp.supports[i], h)?;
    }
    Ok(sum)
}

/// Collapsed weight vector `w = Σ_i α_i y_i Ψ(h_i)` in mapped space.
pub fn expansion_weights(exp: &SvmExpansion, spec: &FeatureMapSpec) -> Result<Vec<f64>> {
    let dim = spec.map_dim(exp.supports[0].len());
    let mut w = vec![0.0; dim];
    for i in 0..exp.supports.len() {
        let mapped = featmap::map_histogram(spec, &exp.supports[i])?;
        let scale = exp.coefficients[i] * exp.labels[i] as f64;
        for (acc, v) in w.iter_mut().zip(&mapped) {
            *acc += scale * v;
        }
    }
    Ok(w)
}

/// Mapped-linear decision `⟨w, Ψ(h)⟩ + bias`; with the exact Hellinger map
/// this equals [`svm_decision`] up to floating point.
pub fn svm_decision_mapped(
    w: &[f64],
    bias: f64,
    spec: &FeatureMapSpec,
    h: &[f64],
) -> Result<f64> {
    let mapped = featmap::map_histogram(spec, h)?;
    if mapped.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            actual: mapped.len(),
        });
    }
    Ok(w.iter().zip(&mapped).map(|(a, b)| a * b).sum::<f64>() + bias)
}
