//! Shared data-preparation steps: manifest loading, channel treatment,
//! subsampling, and z-score normalization.

use crate::config::usage;
use anyhow::{Context, Result};
use bowrnn::data::{
    self, load_zscore_stats, save_zscore_stats, subsample_random, subsample_uniform, zscore_apply,
    zscore_fit, FeatureSequence, LabeledSample, Manifest, NormalizationStats,
};
use bowrnn::par;
use ndarray::Array2;
use std::path::{Path, PathBuf};

/// Concatenated descriptors treat a multi-channel sample as one feature
/// vector per frame; separate descriptors keep one sequence per channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    Concat,
    Separate,
}

impl std::str::FromStr for ChannelMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "concat" => Ok(ChannelMode::Concat),
            "separate" => Ok(ChannelMode::Separate),
            other => Err(format!("expected concat|separate, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsampleMode {
    Even,
    Random,
}

impl std::str::FromStr for SubsampleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "even" => Ok(SubsampleMode::Even),
            "random" => Ok(SubsampleMode::Random),
            other => Err(format!("expected even|random, got {other:?}")),
        }
    }
}

pub struct Prepared {
    pub manifest: Manifest,
    pub samples: Vec<LabeledSample>,
    /// Channels after the concat/separate treatment.
    pub channels: usize,
}

pub struct PrepareOptions {
    pub mode: ChannelMode,
    pub subsample: Option<usize>,
    pub subsample_mode: SubsampleMode,
    pub seed: u64,
    /// Apply stats loaded from this file.
    pub zscore: Option<PathBuf>,
    /// Fit stats on this data, save them here, then apply.
    pub fit_zscore: Option<PathBuf>,
}

pub fn prepare(data: &Path, options: &PrepareOptions) -> Result<Prepared> {
    let manifest = Manifest::load(data)
        .with_context(|| format!("loading manifest {}", data.display()))?;
    let base = data.parent().unwrap_or(Path::new("."));
    let mut samples = manifest
        .load_samples(base)
        .context("loading sequence files")?;

    if options.mode == ChannelMode::Separate && manifest.num_channels < 2 {
        return Err(usage("--channels separate requires a multi-channel manifest"));
    }
    if options.mode == ChannelMode::Concat && manifest.num_channels > 1 {
        samples = samples
            .into_iter()
            .map(concat_channels)
            .collect::<Result<_>>()?;
    }
    let channels = if options.mode == ChannelMode::Concat {
        1
    } else {
        manifest.num_channels
    };

    if let Some(limit) = options.subsample {
        for (i, sample) in samples.iter_mut().enumerate() {
            for seq in &mut sample.channels {
                *seq = match options.subsample_mode {
                    SubsampleMode::Even => subsample_uniform(seq, limit)?,
                    SubsampleMode::Random => {
                        subsample_random(seq, limit, options.seed.wrapping_add(i as u64))?
                    }
                };
            }
        }
    }

    let stats: Option<Vec<NormalizationStats>> = match (&options.zscore, &options.fit_zscore) {
        (Some(_), Some(_)) => {
            return Err(usage("--zscore and --fit-zscore are mutually exclusive"))
        }
        (Some(path), None) => Some(
            load_zscore_stats(path)
                .with_context(|| format!("loading normalization stats {}", path.display()))?,
        ),
        (None, Some(path)) => {
            let fitted: Vec<NormalizationStats> = (0..channels)
                .map(|c| zscore_fit(samples.iter().map(move |s| &s.channels[c])))
                .collect::<bowrnn::Result<_>>()
                .context("fitting z-score statistics")?;
            save_zscore_stats(path, &fitted)
                .with_context(|| format!("writing normalization stats {}", path.display()))?;
            Some(fitted)
        }
        (None, None) => None,
    };
    if let Some(stats) = stats {
        if stats.len() != channels {
            return Err(usage(format!(
                "normalization stats have {} channels, data has {channels}",
                stats.len()
            )));
        }
        let normalized = par::map_ordered(&samples, |sample| -> bowrnn::Result<LabeledSample> {
            let channels = sample
                .channels
                .iter()
                .zip(&stats)
                .map(|(seq, s)| zscore_apply(s, seq))
                .collect::<bowrnn::Result<_>>()?;
            Ok(LabeledSample {
                channels,
                label: sample.label,
            })
        });
        samples = normalized
            .into_iter()
            .collect::<bowrnn::Result<_>>()
            .context("applying z-score normalization")?;
    }

    Ok(Prepared {
        manifest,
        samples,
        channels,
    })
}

/// Fuse a multi-channel sample into one sequence with per-frame
/// concatenated descriptors; all channels must agree on the frame count.
fn concat_channels(sample: LabeledSample) -> Result<LabeledSample> {
    let frames = sample.channels[0].num_frames();
    for seq in &sample.channels {
        if seq.num_frames() != frames {
            anyhow::bail!(
                "cannot concatenate channels with differing frame counts ({} vs {})",
                frames,
                seq.num_frames()
            );
        }
    }
    let dim: usize = sample.channels.iter().map(|s| s.dim()).sum();
    let mut fused = Array2::zeros((frames, dim));
    for t in 0..frames {
        let mut offset = 0;
        for seq in &sample.channels {
            for (j, &v) in seq.frame(t).iter().enumerate() {
                fused[(t, offset + j)] = v;
            }
            offset += seq.dim();
        }
    }
    Ok(LabeledSample {
        channels: vec![FeatureSequence::new(fused, sample.channels[0].source.clone())
            .map_err(anyhow::Error::from)?],
        label: sample.label,
    })
}

/// Pool all frames of one channel into an `N×D` matrix for clustering.
pub fn pool_frames(samples: &[LabeledSample], channel: usize) -> Result<Array2<f64>> {
    let dim = samples
        .first()
        .map(|s| s.channels[channel].dim())
        .ok_or_else(|| anyhow::anyhow!("no samples to pool"))?;
    let total: usize = samples.iter().map(|s| s.channels[channel].num_frames()).sum();
    let mut pooled = Array2::zeros((total, dim));
    let mut row = 0;
    for sample in samples {
        for frame in sample.channels[channel].frames.rows() {
            pooled.row_mut(row).assign(&frame);
            row += 1;
        }
    }
    Ok(pooled)
}

/// Path for channel `c` of a per-channel file family: the base path itself
/// for single-channel data, `<base>.chan<c>` otherwise.
pub fn channel_path(base: &Path, channels: usize, c: usize) -> PathBuf {
    if channels == 1 {
        base.to_path_buf()
    } else {
        let mut name = base.as_os_str().to_os_string();
        name.push(format!(".chan{c}"));
        PathBuf::from(name)
    }
}

/// `data::metrics` re-exported for command code.
pub use data::metrics;
