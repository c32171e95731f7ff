//! Visual vocabularies: multi-restart kMeans, posteriors over visual words,
//! and the exact bidirectional conversion between a codebook and the
//! parameters of a quantization softmax layer.
//!
//! The conversion identity: with `W = (v_1 … v_M)` and
//! `b_m = -½ v_mᵀv_m + log p(v_m)`, `softmax(Wᵀx + b)` equals the Gaussian
//! posterior over visual words for every input. The reverse direction reads
//! the words off the columns of `W` and recovers the prior from
//! `p(v_m) ∝ exp(b_m + ½ v_mᵀv_m)`.

use crate::error::{Error, Result};
use crate::par;
use crate::textio;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::path::Path;

/// Parameters of a quantization softmax layer: `D×M` weights (one column per
/// visual word) and an `M` bias.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl QuantLayer {
    pub fn dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn num_words(&self) -> usize {
        self.weights.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bias.len() != self.num_words() {
            return Err(Error::DimensionMismatch {
                expected: self.num_words(),
                actual: self.bias.len(),
            });
        }
        if self.weights.iter().any(|v| !v.is_finite())
            || self.bias.iter().any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("quantization layer parameters"));
        }
        Ok(())
    }
}

/// A visual vocabulary: `M` words in `R^D` plus a prior over words.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    /// One word per row, `M×D`.
    words: Array2<f64>,
    /// `p(v_m)`, non-negative, sums to 1.
    prior: Vec<f64>,
}

impl Codebook {
    /// Build a codebook from `M×D` words and an optional prior (uniform when
    /// omitted).
    pub fn new(words: Array2<f64>, prior: Option<Vec<f64>>) -> Result<Self> {
        let m = words.nrows();
        if m == 0 || words.ncols() == 0 {
            return Err(Error::InsufficientData(
                "codebook needs at least one word of dimension >= 1".into(),
            ));
        }
        if words.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("codebook words"));
        }
        let prior = match prior {
            Some(p) => {
                if p.len() != m {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        actual: p.len(),
                    });
                }
                if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
                    return Err(Error::InvalidConfig("prior entries must be >= 0".into()));
                }
                let sum: f64 = p.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidConfig(format!(
                        "prior must sum to 1 within 1e-12, got {sum}"
                    )));
                }
                p
            }
            None => vec![1.0 / m as f64; m],
        };
        Ok(Self { words, prior })
    }

    pub fn size(&self) -> usize {
        self.words.nrows()
    }

    pub fn dim(&self) -> usize {
        self.words.ncols()
    }

    pub fn words(&self) -> ArrayView2<'_, f64> {
        self.words.view()
    }

    pub fn word(&self, m: usize) -> ArrayView1<'_, f64> {
        self.words.row(m)
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("descriptor"));
        }
        Ok(())
    }

    /// Posterior log-scores `log p(v_m) - ½‖x - v_m‖²` (uniform prior drops
    /// the first term).
    fn log_scores(&self, x: &[f64], use_prior: bool) -> Vec<f64> {
        (0..self.size())
            .map(|m| {
                let d2: f64 = self
                    .word(m)
                    .iter()
                    .zip(x)
                    .map(|(w, v)| (v - w) * (v - w))
                    .sum();
                let lp = if use_prior {
                    if self.prior[m] == 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    self.prior[m].ln()
                } else {
                    0.0
                };
                lp - 0.5 * d2
            })
            .collect()
    }

    /// `p(v_m | x) ∝ p(v_m) · exp(-½‖x - v_m‖²)`, softmax-stabilized.
    ///
    /// With `use_prior` off the prior is taken as uniform regardless of the
    /// stored one.
    pub fn posterior(&self, x: &[f64], use_prior: bool) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut scores = self.log_scores(x, use_prior);
        softmax_in_place(&mut scores);
        Ok(scores)
    }

    /// Unit vector at the argmax of the posterior; ties go to the lowest
    /// index.
    pub fn hard_assign(&self, x: &[f64], use_prior: bool) -> Result<Vec<f64>> {
        let m = self.nearest_index(x, use_prior)?;
        let mut out = vec![0.0; self.size()];
        out[m] = 1.0;
        Ok(out)
    }

    /// Index of the most likely word for `x` (argmax of the posterior).
    pub fn nearest_index(&self, x: &[f64], use_prior: bool) -> Result<usize> {
        self.check_input(x)?;
        let scores = self.log_scores(x, use_prior);
        Ok(argmax(&scores))
    }

    /// Quantization-layer parameters reproducing the posterior exactly:
    /// `softmax(Wᵀx + b) = posterior(x, use_prior=true)` for every `x`.
    ///
    /// Words with an exactly zero prior have no finite `log p(v_m)` and are
    /// rejected.
    pub fn to_network(&self) -> Result<QuantLayer> {
        if let Some(m) = self.prior.iter().position(|&p| p == 0.0) {
            return Err(Error::DegeneratePrior(m));
        }
        let weights = self.words.t().as_standard_layout().into_owned();
        let bias = Array1::from_iter((0..self.size()).map(|m| {
            let sq: f64 = self.word(m).iter().map(|v| v * v).sum();
            -0.5 * sq + self.prior[m].ln()
        }));
        Ok(QuantLayer { weights, bias })
    }

    /// Inverse conversion: words from the columns of `W`, prior from
    /// `p(v_m) ∝ exp(b_m + ½ v_mᵀv_m)`.
    pub fn from_network(layer: &QuantLayer) -> Result<Self> {
        layer.validate()?;
        let words = layer.weights.t().as_standard_layout().into_owned();
        let mut logits: Vec<f64> = (0..words.nrows())
            .map(|m| {
                let sq: f64 = words.row(m).iter().map(|v| v * v).sum();
                layer.bias[m] + 0.5 * sq
            })
            .collect();
        softmax_in_place(&mut logits);
        Self::new(words, Some(logits))
    }

    /// Text serialization: `BOWCB1 <M> <D>`, the prior line, then one word
    /// per line, 17 significant digits throughout.
    pub fn to_text(&self) -> String {
        let mut out = format!("BOWCB1 {} {}\n", self.size(), self.dim());
        textio::push_row(&mut out, self.prior.iter().copied());
        for m in 0..self.size() {
            textio::push_row(&mut out, self.word(m).iter().copied());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = textio::next_line(&mut lines, "BOWCB1 header")?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 || fields[0] != "BOWCB1" {
            return Err(Error::Format(format!("bad codebook header {header:?}")));
        }
        let m = textio::parse_usize(fields[1], "word count")?;
        let d = textio::parse_usize(fields[2], "dimension")?;
        let prior = textio::parse_row(textio::next_line(&mut lines, "prior")?, m, "prior")?;
        let mut words = Array2::zeros((m, d));
        for i in 0..m {
            let row = textio::parse_row(
                textio::next_line(&mut lines, "word row")?,
                d,
                &format!("word {i}"),
            )?;
            words.row_mut(i).assign(&Array1::from_vec(row));
        }
        Self::new(words, Some(prior))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Numerically stabilized softmax (max subtraction), in place.
pub(crate) fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// kMeans settings; the paper's baseline protocol runs eight restarts and
/// keeps the clustering with the lowest sum of squared distances.
#[derive(Debug, Clone)]
pub struct KMeansConfig {
    pub num_words: usize,
    pub restarts: usize,
    pub max_iterations: usize,
    /// Relative SSE change below which a restart stops.
    pub tolerance: f64,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(num_words: usize, seed: u64) -> Self {
        Self {
            num_words,
            restarts: 8,
            max_iterations: 100,
            tolerance: 1e-6,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_words == 0 {
            return Err(Error::InvalidConfig("num_words must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be >= 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(Error::InvalidConfig("tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

/// Outcome of [`kmeans_fit_detailed`]: the winning codebook, its SSE, and the
/// per-iteration SSE trace of every restart.
#[derive(Debug)]
pub struct KMeansFit {
    pub codebook: Codebook,
    pub sse: f64,
    pub traces: Vec<Vec<f64>>,
}

/// Multi-restart Lloyd kMeans over `N×D` data; returns the restart with the
/// lowest final SSE as a uniform-prior codebook. Deterministic given the
/// seed: every restart uses its own RNG stream and all reductions run in a
/// fixed order.
pub fn kmeans_fit(data: ArrayView2<'_, f64>, config: &KMeansConfig) -> Result<Codebook> {
    Ok(kmeans_fit_detailed(data, config)?.codebook)
}

pub fn kmeans_fit_detailed(data: ArrayView2<'_, f64>, config: &KMeansConfig) -> Result<KMeansFit> {
    config.validate()?;
    let n = data.nrows();
    let d = data.ncols();
    if n == 0 || d == 0 {
        return Err(Error::InsufficientData("no data points".into()));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kmeans data"));
    }
    if distinct_rows(&data) < config.num_words {
        return Err(Error::InsufficientData(format!(
            "need at least {} distinct points, got fewer",
            config.num_words
        )));
    }

    let runs = par::map_range(config.restarts, |restart| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(restart as u64);
        lloyd_restart(&data, config, &mut rng)
    });

    let mut best: Option<(usize, f64)> = None;
    for (i, (_, sse)) in runs.iter().enumerate() {
        if best.is_none_or(|(_, b)| *sse < b) {
            best = Some((i, *sse));
        }
    }
    let (winner, sse) = best.expect("at least one restart");
    let mut traces = Vec::with_capacity(runs.len());
    let mut centers = None;
    for (i, (c, _)) in runs.into_iter().enumerate() {
        traces.push(c.1);
        if i == winner {
            centers = Some(c.0);
        }
    }
    Ok(KMeansFit {
        codebook: Codebook::new(centers.expect("winner centers"), None)?,
        sse,
        traces,
    })
}

fn distinct_rows(data: &ArrayView2<'_, f64>) -> usize {
    let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(data.nrows());
    for row in data.rows() {
        seen.insert(row.iter().map(|v| v.to_bits()).collect());
    }
    seen.len()
}

/// One seeded Lloyd run; returns ((centers, sse trace), final sse).
fn lloyd_restart(
    data: &ArrayView2<'_, f64>,
    config: &KMeansConfig,
    rng: &mut ChaCha8Rng,
) -> ((Array2<f64>, Vec<f64>), f64) {
    let n = data.nrows();
    let d = data.ncols();
    let m = config.num_words;
    let mut centers = seed_plus_plus(data, m, rng);
    let mut trace = Vec::new();
    let mut prev_sse = f64::INFINITY;

    for _ in 0..config.max_iterations {
        // Assignment is embarrassingly parallel: each point's nearest center
        // is independent of every other point.
        let assign = par::map_range(n, |i| nearest_center(&data.row(i), &centers));
        let sse: f64 = assign.iter().map(|&(_, d2)| d2).sum();
        trace.push(sse);

        // Means accumulate in point order.
        let mut sums = Array2::<f64>::zeros((m, d));
        let mut counts = vec![0usize; m];
        for (i, &(c, _)) in assign.iter().enumerate() {
            counts[c as usize] += 1;
            let mut row = sums.row_mut(c as usize);
            row += &data.row(i);
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let mut row = centers.row_mut(c);
                row.assign(&sums.row(c));
                row /= count as f64;
            }
        }

        // Re-seed empty clusters to the points farthest from their centers.
        let empties: Vec<usize> = (0..m).filter(|&c| counts[c] == 0).collect();
        if !empties.is_empty() {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                assign[b]
                    .1
                    .partial_cmp(&assign[a].1)
                    .unwrap()
                    .then(a.cmp(&b))
            });
            for (slot, &c) in empties.iter().enumerate() {
                centers.row_mut(c).assign(&data.row(order[slot]));
            }
        }

        let converged = prev_sse.is_finite()
            && (prev_sse - sse).abs() <= config.tolerance * prev_sse.max(f64::MIN_POSITIVE);
        prev_sse = sse;
        if sse == 0.0 || converged {
            break;
        }
    }

    // Final assignment so the reported SSE matches the returned centers.
    let assign = par::map_range(n, |i| nearest_center(&data.row(i), &centers));
    let sse: f64 = assign.iter().map(|&(_, d2)| d2).sum();
    trace.push(sse);
    ((centers, trace), sse)
}

fn nearest_center(x: &ArrayView1<'_, f64>, centers: &Array2<f64>) -> (u32, f64) {
    let mut best = 0u32;
    let mut best_d2 = f64::INFINITY;
    for (c, center) in centers.rows().into_iter().enumerate() {
        let d2: f64 = center.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < best_d2 {
            best_d2 = d2;
            best = c as u32;
        }
    }
    (best, best_d2)
}

/// k-means++ seeding: first center uniform, then each next center sampled
/// with probability proportional to the squared distance to the nearest
/// chosen center.
fn seed_plus_plus(data: &ArrayView2<'_, f64>, m: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = data.nrows();
    let d = data.ncols();
    let mut centers = Array2::zeros((m, d));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&data.row(first));

    let mut dist2: Vec<f64> = (0..n)
        .map(|i| sq_dist(&data.row(i), &centers.row(0)))
        .collect();
    for k in 1..m {
        let total: f64 = dist2.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut chosen = n - 1;
        for (i, &w) in dist2.iter().enumerate() {
            target -= w;
            if target <= 0.0 && w > 0.0 {
                chosen = i;
                break;
            }
        }
        centers.row_mut(k).assign(&data.row(chosen));
        for (i, best) in dist2.iter_mut().enumerate() {
            let d2 = sq_dist(&data.row(i), &centers.row(k));
            if d2 < *best {
                *best = d2;
            }
        }
    }
    centers
}

fn sq_dist(a: &ArrayView1<'_, f64>, b: &ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
