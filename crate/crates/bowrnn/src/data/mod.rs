//! Sequence ingestion and preparation: the binary sequence format, dataset
//! manifests, z-score normalization, uniform subsampling, synthetic data,
//! and evaluation metrics.

pub mod metrics;
pub mod synth;

use crate::error::{Error, Result};
use crate::par;
use crate::textio;
use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

/// Magic bytes of the binary sequence file format.
pub const SEQUENCE_MAGIC: &[u8; 8] = b"BOWSEQ1\0";

/// One sample (or one channel of a sample): `T` frame descriptors of
/// dimension `D`, one frame per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub frames: Array2<f64>,
    pub source: String,
}

impl FeatureSequence {
    pub fn new(frames: Array2<f64>, source: impl Into<String>) -> Result<Self> {
        if frames.nrows() == 0 {
            return Err(Error::EmptySequence);
        }
        if frames.ncols() == 0 {
            return Err(Error::InvalidConfig("frame dimension must be >= 1".into()));
        }
        Ok(Self {
            frames,
            source: source.into(),
        })
    }

    pub fn num_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    pub fn frame(&self, t: usize) -> ArrayView1<'_, f64> {
        self.frames.row(t)
    }
}

/// A labeled multi-channel sample; single-channel data uses one entry.
#[derive(Debug, Clone)]
pub struct LabeledSample {
    pub channels: Vec<FeatureSequence>,
    /// Class label in `1..=C`.
    pub label: usize,
}

/// Parse the binary sequence format. Values are stored as 32-bit floats and
/// promoted to f64.
pub fn load_sequence(path: impl AsRef<Path>) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let parse_err = |offset: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        offset,
        message,
    };
    if bytes.len() < 8 || &bytes[..8] != SEQUENCE_MAGIC {
        return Err(parse_err(0, "bad magic, expected BOWSEQ1".into()));
    }
    if bytes.len() < 16 {
        return Err(parse_err(bytes.len(), "truncated header".into()));
    }
    let t = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if t == 0 {
        return Err(parse_err(8, "sequence length 0".into()));
    }
    if d == 0 {
        return Err(parse_err(12, "dimension 0".into()));
    }
    let expected = 16 + t * d * 4;
    if bytes.len() < expected {
        return Err(parse_err(
            bytes.len(),
            format!("truncated payload, expected {expected} bytes"),
        ));
    }
    if bytes.len() > expected {
        return Err(parse_err(expected, "trailing bytes after payload".into()));
    }
    let mut frames = Array2::zeros((t, d));
    for (i, value) in frames.iter_mut().enumerate() {
        let off = 16 + i * 4;
        *value = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as f64;
    }
    FeatureSequence::new(frames, path.display().to_string())
}

/// Write a sequence in the binary format (values narrowed to f32).
pub fn save_sequence(path: impl AsRef<Path>, seq: &FeatureSequence) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + seq.frames.len() * 4);
    bytes.extend_from_slice(SEQUENCE_MAGIC);
    bytes.extend_from_slice(&(seq.num_frames() as u32).to_le_bytes());
    bytes.extend_from_slice(&(seq.dim() as u32).to_le_bytes());
    for &v in seq.frames.iter() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

/// One manifest line: a class label and one sequence file per channel.
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub label: usize,
    pub paths: Vec<PathBuf>,
}

/// A dataset manifest: `BOWDS1 <C> <channels>` followed by one line per
/// sample, `<label> <path_channel_1> [...]`. Paths must not contain
/// whitespace and are resolved relative to the manifest's directory.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub num_classes: usize,
    pub num_channels: usize,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(
        num_classes: usize,
        num_channels: usize,
        entries: Vec<ManifestEntry>,
    ) -> Result<Self> {
        if num_classes == 0 || num_channels == 0 {
            return Err(Error::InvalidConfig(
                "manifest needs at least one class and one channel".into(),
            ));
        }
        for (i, entry) in entries.iter().enumerate() {
            if entry.label == 0 || entry.label > num_classes {
                return Err(Error::InvalidLabel {
                    label: entry.label,
                    classes: num_classes,
                });
            }
            if entry.paths.len() != num_channels {
                return Err(Error::Format(format!(
                    "manifest entry {i}: expected {num_channels} channel paths, got {}",
                    entry.paths.len()
                )));
            }
        }
        Ok(Self {
            num_classes,
            num_channels,
            entries,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("BOWDS1 {} {}\n", self.num_classes, self.num_channels);
        for entry in &self.entries {
            out.push_str(&entry.label.to_string());
            for path in &entry.paths {
                out.push(' ');
                out.push_str(&path.display().to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = textio::next_line(&mut lines, "BOWDS1 header")?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 || fields[0] != "BOWDS1" {
            return Err(Error::Format(format!("bad manifest header {header:?}")));
        }
        let num_classes = textio::parse_usize(fields[1], "class count")?;
        let num_channels = textio::parse_usize(fields[2], "channel count")?;
        let mut entries = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let label = textio::parse_usize(tokens.next().unwrap(), "label")?;
            let paths: Vec<PathBuf> = tokens.map(PathBuf::from).collect();
            entries.push(ManifestEntry { label, paths });
        }
        Self::new(num_classes, num_channels, entries)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Load every referenced sequence, resolving paths against `base_dir`.
    /// Files load in parallel; the returned order matches the manifest.
    pub fn load_samples(&self, base_dir: &Path) -> Result<Vec<LabeledSample>> {
        let loaded = par::map_ordered(&self.entries, |entry| {
            let channels: Result<Vec<FeatureSequence>> = entry
                .paths
                .iter()
                .map(|p| load_sequence(base_dir.join(p)))
                .collect();
            channels.map(|channels| LabeledSample {
                channels,
                label: entry.label,
            })
        });
        loaded.into_iter().collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.label).collect()
    }
}

/// Per-dimension mean and standard deviation of one channel's pooled
/// training frames.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

/// Pool all frames of the given sequences and compute per-dimension mean and
/// population standard deviation. Constant dimensions get σ = 1 and a
/// warning (they become 0 after centering).
pub fn zscore_fit<'a>(
    sequences: impl IntoIterator<Item = &'a FeatureSequence>,
) -> Result<NormalizationStats> {
    let mut iter = sequences.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::InsufficientData("no sequences to normalize".into()))?;
    let d = first.dim();
    let mut count = 0usize;
    let mut sum = Array1::<f64>::zeros(d);
    let mut sum_sq = Array1::<f64>::zeros(d);
    let mut min = Array1::<f64>::from_elem(d, f64::INFINITY);
    let mut max = Array1::<f64>::from_elem(d, f64::NEG_INFINITY);
    for seq in std::iter::once(first).chain(iter) {
        if seq.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: seq.dim(),
            });
        }
        for frame in seq.frames.rows() {
            count += 1;
            for (j, &v) in frame.iter().enumerate() {
                sum[j] += v;
                sum_sq[j] += v * v;
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
    }
    if count < 2 {
        return Err(Error::InsufficientData(
            "z-score needs at least 2 frames".into(),
        ));
    }
    let n = count as f64;
    let mean = &sum / n;
    let mut std = Array1::zeros(d);
    for j in 0..d {
        if min[j] == max[j] {
            log::warn!("dimension {j} is constant; using std = 1");
            std[j] = 1.0;
        } else {
            let var = (sum_sq[j] / n - mean[j] * mean[j]).max(0.0);
            std[j] = var.sqrt().max(f64::MIN_POSITIVE);
        }
    }
    Ok(NormalizationStats { mean, std })
}

/// Apply `(x - μ) / σ` per dimension.
pub fn zscore_apply(stats: &NormalizationStats, seq: &FeatureSequence) -> Result<FeatureSequence> {
    if seq.dim() != stats.mean.len() {
        return Err(Error::DimensionMismatch {
            expected: stats.mean.len(),
            actual: seq.dim(),
        });
    }
    let mut frames = seq.frames.clone();
    for mut frame in frames.rows_mut() {
        frame -= &stats.mean;
        frame /= &stats.std;
    }
    FeatureSequence::new(frames, seq.source.clone())
}

/// Write per-channel normalization stats: `ZSTAT1 <channels>`, then per
/// channel a dimension line, a mean line, and a std line.
pub fn save_zscore_stats(path: impl AsRef<Path>, stats: &[NormalizationStats]) -> Result<()> {
    let mut out = format!("ZSTAT1 {}\n", stats.len());
    for s in stats {
        out.push_str(&format!("{}\n", s.mean.len()));
        textio::push_row(&mut out, s.mean.iter().copied());
        textio::push_row(&mut out, s.std.iter().copied());
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_zscore_stats(path: impl AsRef<Path>) -> Result<Vec<NormalizationStats>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = textio::next_line(&mut lines, "ZSTAT1 header")?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 2 || fields[0] != "ZSTAT1" {
        return Err(Error::Format(format!("bad stats header {header:?}")));
    }
    let channels = textio::parse_usize(fields[1], "channel count")?;
    let mut stats = Vec::with_capacity(channels);
    for _ in 0..channels {
        let d = textio::parse_usize(
            textio::next_line(&mut lines, "dimension")?.trim(),
            "dimension",
        )?;
        let mean = textio::parse_row(textio::next_line(&mut lines, "mean")?, d, "mean")?;
        let std = textio::parse_row(textio::next_line(&mut lines, "std")?, d, "std")?;
        stats.push(NormalizationStats {
            mean: Array1::from_vec(mean),
            std: Array1::from_vec(std),
        });
    }
    Ok(stats)
}

/// Deterministic even-spaced subsampling: keeps frames at indices
/// `floor(i·T/K)` for `i = 0..K-1`; the identity when `T <= K`.
pub fn subsample_uniform(seq: &FeatureSequence, max_frames: usize) -> Result<FeatureSequence> {
    if max_frames == 0 {
        return Err(Error::InvalidConfig("subsample limit must be >= 1".into()));
    }
    let t = seq.num_frames();
    if t <= max_frames {
        return Ok(seq.clone());
    }
    let indices: Vec<usize> = (0..max_frames).map(|i| i * t / max_frames).collect();
    take_frames(seq, &indices)
}

/// Randomized subsampling: `K` distinct frames drawn with the given seed,
/// kept in their original order.
pub fn subsample_random(
    seq: &FeatureSequence,
    max_frames: usize,
    seed: u64,
) -> Result<FeatureSequence> {
    if max_frames == 0 {
        return Err(Error::InvalidConfig("subsample limit must be >= 1".into()));
    }
    let t = seq.num_frames();
    if t <= max_frames {
        return Ok(seq.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Partial Fisher-Yates over the index array.
    let mut pool: Vec<usize> = (0..t).collect();
    for i in 0..max_frames {
        let j = rng.random_range(i..t);
        pool.swap(i, j);
    }
    let mut indices = pool[..max_frames].to_vec();
    indices.sort_unstable();
    take_frames(seq, &indices)
}

fn take_frames(seq: &FeatureSequence, indices: &[usize]) -> Result<FeatureSequence> {
    let mut frames = Array2::zeros((indices.len(), seq.dim()));
    for (row, &t) in indices.iter().enumerate() {
        frames.row_mut(row).assign(&seq.frame(t));
    }
    FeatureSequence::new(frames, seq.source.clone())
}
