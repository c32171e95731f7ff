//! Synthetic rare-word sequence data.
//!
//! Frames are drawn from a Gaussian mixture whose components are shared
//! across classes, except for a small set of rare class-exclusive components
//! hit with probability ρ per frame. Rare-word occurrences in a histogram
//! are then the discriminative signal: at ρ = 0 the classes are
//! indistinguishable, at ρ = 1 every frame carries class evidence. The
//! generator records its parameters so an oracle Bayes classifier is
//! available for small instances.

use crate::data::{FeatureSequence, LabeledSample};
use crate::error::{Error, Result};
use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub classes: usize,
    /// Number of shared mixture components.
    pub codewords: usize,
    pub dim: usize,
    pub sequences: usize,
    pub frames: usize,
    /// Probability that a frame comes from one of its class's rare
    /// components.
    pub rho: f64,
    pub seed: u64,
    /// Rare class-exclusive components per class.
    pub rare_per_class: usize,
    /// Standard deviation of the component centers around the origin.
    pub center_scale: f64,
    /// Within-component noise standard deviation.
    pub noise: f64,
    /// Rare components of different classes are placed around common
    /// anchors, this many noise units away, so unsupervised clustering sees
    /// one confusable mode per anchor where the classes actually differ.
    pub rare_spread: f64,
}

impl SynthConfig {
    pub fn new(
        classes: usize,
        codewords: usize,
        dim: usize,
        sequences: usize,
        frames: usize,
        rho: f64,
        seed: u64,
    ) -> Self {
        Self {
            classes,
            codewords,
            dim,
            sequences,
            frames,
            rho,
            seed,
            rare_per_class: 4,
            center_scale: 3.0,
            noise: 1.0,
            rare_spread: 2.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.classes == 0
            || self.codewords == 0
            || self.dim == 0
            || self.sequences == 0
            || self.frames == 0
            || self.rare_per_class == 0
        {
            return Err(Error::InvalidConfig("all sizes must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidConfig(format!(
                "rho must be in [0, 1], got {}",
                self.rho
            )));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.center_scale) || !positive(self.noise) {
            return Err(Error::InvalidConfig(
                "center_scale and noise must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The mixture the data was drawn from; enough to evaluate exact
/// per-class frame likelihoods.
#[derive(Debug, Clone)]
pub struct GeneratorModel {
    /// Shared components, one per row.
    pub shared: Array2<f64>,
    /// Rare components per class, one matrix per class.
    pub rare: Vec<Array2<f64>>,
    pub rho: f64,
    pub noise: f64,
}

impl GeneratorModel {
    pub fn num_classes(&self) -> usize {
        self.rare.len()
    }

    /// All components stacked: shared rows first, then the rare rows of each
    /// class in order. Useful as an oracle codebook.
    pub fn all_components(&self) -> Array2<f64> {
        let dim = self.shared.ncols();
        let total = self.shared.nrows() + self.rare.iter().map(|r| r.nrows()).sum::<usize>();
        let mut out = Array2::zeros((total, dim));
        let mut row = 0;
        for source in std::iter::once(&self.shared).chain(&self.rare) {
            for r in source.rows() {
                out.row_mut(row).assign(&r);
                row += 1;
            }
        }
        out
    }

    /// Rows of [`Self::all_components`] holding class `label`'s rare
    /// components (1-based label).
    pub fn rare_rows(&self, label: usize) -> std::ops::Range<usize> {
        let mut start = self.shared.nrows();
        for class in 1..label {
            start += self.rare[class - 1].nrows();
        }
        start..start + self.rare[label - 1].nrows()
    }

    /// Log-likelihood of one frame under the class-conditional mixture
    /// (up to a constant shared by all classes).
    fn frame_log_likelihood(&self, x: &ArrayView1<'_, f64>, class: usize) -> f64 {
        let inv_two_var = 0.5 / (self.noise * self.noise);
        let mut log_terms: Vec<f64> = Vec::with_capacity(
            self.shared.nrows() + self.rare[class - 1].nrows(),
        );
        let shared_weight =
            ((1.0 - self.rho) / self.shared.nrows() as f64).max(f64::MIN_POSITIVE);
        for c in self.shared.rows() {
            let d2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            log_terms.push(shared_weight.ln() - d2 * inv_two_var);
        }
        let rare = &self.rare[class - 1];
        let rare_weight = (self.rho / rare.nrows() as f64).max(f64::MIN_POSITIVE);
        for c in rare.rows() {
            let d2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            log_terms.push(rare_weight.ln() - d2 * inv_two_var);
        }
        log_sum_exp(&log_terms)
    }

    /// Bayes-optimal label for a sequence under the generator (uniform class
    /// prior): argmax over classes of the summed frame log-likelihoods.
    pub fn bayes_classify(&self, seq: &FeatureSequence) -> usize {
        let mut best = 1;
        let mut best_ll = f64::NEG_INFINITY;
        for class in 1..=self.num_classes() {
            let ll: f64 = seq
                .frames
                .rows()
                .into_iter()
                .map(|frame| self.frame_log_likelihood(&frame, class))
                .sum();
            if ll > best_ll {
                best_ll = ll;
                best = class;
            }
        }
        best
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Labeled sequences plus the generator that produced them.
#[derive(Debug)]
pub struct SyntheticDataset {
    pub samples: Vec<LabeledSample>,
    pub generator: GeneratorModel,
}

/// Draw a synthetic dataset. Labels cycle `1, 2, …, C, 1, …` so every prefix
/// split stays balanced. Deterministic given the seed.
pub fn generate_synthetic(config: &SynthConfig) -> Result<SyntheticDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let shared = Array2::from_shape_fn((config.codewords, config.dim), |_| {
        config.center_scale * unit.sample(&mut rng)
    });
    // One anchor per rare slot; each class's component sits `rare_spread`
    // noise units away from the anchor in its own direction.
    let anchors = Array2::from_shape_fn((config.rare_per_class, config.dim), |_| {
        config.center_scale * unit.sample(&mut rng)
    });
    let mut rare: Vec<Array2<f64>> = Vec::with_capacity(config.classes);
    for _class in 0..config.classes {
        let mut comps = Array2::zeros((config.rare_per_class, config.dim));
        for r in 0..config.rare_per_class {
            let mut dir: Vec<f64> = (0..config.dim).map(|_| unit.sample(&mut rng)).collect();
            let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            dir.iter_mut()
                .for_each(|v| *v *= config.rare_spread * config.noise / norm.max(1e-12));
            for j in 0..config.dim {
                comps[(r, j)] = anchors[(r, j)] + dir[j];
            }
        }
        rare.push(comps);
    }
    let rare = rare;
    let generator = GeneratorModel {
        shared,
        rare,
        rho: config.rho,
        noise: config.noise,
    };

    let mut samples = Vec::with_capacity(config.sequences);
    for i in 0..config.sequences {
        let label = 1 + (i % config.classes);
        let mut frames = Array2::zeros((config.frames, config.dim));
        for t in 0..config.frames {
            let center = if rng.random::<f64>() < config.rho {
                let k = rng.random_range(0..config.rare_per_class);
                generator.rare[label - 1].row(k)
            } else {
                let k = rng.random_range(0..config.codewords);
                generator.shared.row(k)
            };
            for (j, c) in center.iter().enumerate() {
                frames[(t, j)] = c + config.noise * unit.sample(&mut rng);
            }
        }
        samples.push(LabeledSample {
            channels: vec![FeatureSequence::new(frames, format!("synth_{i:05}"))?],
            label,
        });
    }
    Ok(SyntheticDataset { samples, generator })
}
