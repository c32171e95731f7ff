//! Explicit feature maps for additive homogeneous kernels.
//!
//! Hellinger's kernel has the exact closed-form map `ψ(x) = √x`. The χ² and
//! histogram intersection kernels are approximated by sampling their spectral
//! density κ at frequencies `0, L, 2L, …, nL`, yielding a `2n+1`-dimensional
//! map per histogram entry. The derivative of the map and a block-diagonal
//! Jacobian are provided so the map can sit between the histogram layer and
//! the classifier of a network.

use crate::error::{Error, Result};

/// Kernel family an explicit feature map can represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKernel {
    /// `k(a, b) = √(ab)`; exact map `ψ(x) = √x`.
    Hellinger,
    /// Additive homogeneous χ²: `k(a, b) = 2ab / (a + b)`.
    Chi2,
    /// Histogram intersection: `k(a, b) = min(a, b)`.
    Intersection,
}

impl MapKernel {
    pub fn name(self) -> &'static str {
        match self {
            MapKernel::Hellinger => "hellinger",
            MapKernel::Chi2 => "chi2",
            MapKernel::Intersection => "intersection",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "hellinger" => Ok(MapKernel::Hellinger),
            "chi2" => Ok(MapKernel::Chi2),
            "intersection" => Ok(MapKernel::Intersection),
            other => Err(Error::Format(format!("unknown kernel {other:?}"))),
        }
    }
}

/// Kernel kind plus approximation parameters defining the map ψ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureMapSpec {
    pub kernel: MapKernel,
    /// Number of spectrum samples `n`; ignored for Hellinger.
    pub samples: usize,
    /// Sampling period `L`; ignored for Hellinger.
    pub period: f64,
}

impl FeatureMapSpec {
    pub const DEFAULT_SAMPLES: usize = 2;
    pub const DEFAULT_PERIOD: f64 = 0.5;

    pub fn new(kernel: MapKernel, samples: usize, period: f64) -> Result<Self> {
        if kernel != MapKernel::Hellinger && !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sampling period must be positive, got {period}"
            )));
        }
        Ok(Self {
            kernel,
            samples,
            period,
        })
    }

    pub fn hellinger() -> Self {
        Self {
            kernel: MapKernel::Hellinger,
            samples: 0,
            period: Self::DEFAULT_PERIOD,
        }
    }

    pub fn chi2(samples: usize, period: f64) -> Result<Self> {
        Self::new(MapKernel::Chi2, samples, period)
    }

    pub fn intersection(samples: usize, period: f64) -> Result<Self> {
        Self::new(MapKernel::Intersection, samples, period)
    }

    /// Output dimension per scalar input: 1 for Hellinger, 2n+1 otherwise.
    pub fn output_dim(&self) -> usize {
        match self.kernel {
            MapKernel::Hellinger => 1,
            _ => 2 * self.samples + 1,
        }
    }

    /// Dimension of the mapped histogram: `num_words * output_dim`.
    pub fn map_dim(&self, num_words: usize) -> usize {
        num_words * self.output_dim()
    }
}

/// Spectral density κ of the kernel, sampled at frequency λ.
///
/// χ²: `sech(πλ)`; intersection: `2 / (π (1 + 4λ²))`. Hellinger needs no
/// spectral form since its map is exact.
pub fn kappa(kernel: MapKernel, lambda: f64) -> Result<f64> {
    if !lambda.is_finite() {
        return Err(Error::NonFinite("kappa argument"));
    }
    match kernel {
        MapKernel::Hellinger => Err(Error::NoSpectralForm),
        MapKernel::Chi2 => Ok(1.0 / (std::f64::consts::PI * lambda).cosh()),
        MapKernel::Intersection => {
            Ok(2.0 / (std::f64::consts::PI * (1.0 + 4.0 * lambda * lambda)))
        }
    }
}

/// ψ applied to one histogram entry. Returns `output_dim()` components.
///
/// Component 0 is `√(κ(0) x L)`; odd component `2k−1` is
/// `√(2 κ(kL) x L) cos(kL log x)` and even component `2k` is the matching
/// sine term. At `x = 0` the whole map is the zero vector (its limit).
pub fn map_scalar(spec: &FeatureMapSpec, x: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; spec.output_dim()];
    map_scalar_into(spec, x, &mut out)?;
    Ok(out)
}

pub(crate) fn map_scalar_into(spec: &FeatureMapSpec, x: f64, out: &mut [f64]) -> Result<()> {
    debug_assert_eq!(out.len(), spec.output_dim());
    if !x.is_finite() || x < 0.0 {
        return Err(Error::NegativeEntry(x));
    }
    match spec.kernel {
        MapKernel::Hellinger => {
            out[0] = x.sqrt();
        }
        kernel => {
            if x == 0.0 {
                out.fill(0.0);
                return Ok(());
            }
            let period = spec.period;
            let log_x = x.ln();
            out[0] = (kappa(kernel, 0.0)?* x * period).sqrt();
            for k in 1..=spec.samples {
                let freq = k as f64 * period;
                let scale = (2.0 * kappa(kernel, freq)? * x * period).sqrt();
                out[2 * k - 1] = scale * (freq * log_x).cos();
                out[2 * k] = scale * (freq * log_x).sin();
            }
        }
    }
    Ok(())
}

/// ψ applied entrywise to a histogram, entry-major: all `output_dim()`
/// components of entry 0, then entry 1, and so on.
pub fn map_histogram(spec: &FeatureMapSpec, h: &[f64]) -> Result<Vec<f64>> {
    let block = spec.output_dim();
    let mut out = vec![0.0; h.len() * block];
    for (entry, chunk) in h.iter().zip(out.chunks_mut(block)) {
        map_scalar_into(spec, *entry, chunk)?;
    }
    Ok(out)
}

/// γ(x) = κ(0)L / (2 [ψ(x)]₀²), the shared factor of the map derivative.
///
/// Since `[ψ(x)]₀² = κ(0) x L` this is `1/(2x)` in closed form; it is still
/// computed from the definition so tests can confirm the identity.
pub fn gamma(spec: &FeatureMapSpec, x: f64) -> Result<f64> {
    if x <= 0.0 || !x.is_finite() {
        return Err(Error::DerivativeAtZero(x));
    }
    match spec.kernel {
        MapKernel::Hellinger => Err(Error::NoSpectralForm),
        kernel => {
            let psi0 = (kappa(kernel, 0.0)? * x * spec.period).sqrt();
            Ok(kappa(kernel, 0.0)? * spec.period / (2.0 * psi0 * psi0))
        }
    }
}

/// dψ/dx at one histogram entry; undefined at `x = 0`.
pub fn map_derivative_scalar(spec: &FeatureMapSpec, x: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; spec.output_dim()];
    map_derivative_into(spec, x, &mut out)?;
    Ok(out)
}

pub(crate) fn map_derivative_into(spec: &FeatureMapSpec, x: f64, out: &mut [f64]) -> Result<()> {
    debug_assert_eq!(out.len(), spec.output_dim());
    if x <= 0.0 || !x.is_finite() {
        return Err(Error::DerivativeAtZero(x));
    }
    match spec.kernel {
        MapKernel::Hellinger => {
            out[0] = 0.5 / x.sqrt();
        }
        _ => {
            let mut psi = vec![0.0; spec.output_dim()];
            map_scalar_into(spec, x, &mut psi)?;
            let g = 0.5 / x;
            out[0] = psi[0] * g;
            let period = spec.period;
            for k in 1..=spec.samples {
                let j = 2 * k - 1;
                // d/dx of the cosine component picks up a -sin term; the
                // matching sine component picks up +cos.
                out[j] = (psi[j] - psi[j + 1] * (j + 1) as f64 * period) * g;
                out[j + 1] = (psi[j + 1] + psi[j] * (j + 1) as f64 * period) * g;
            }
        }
    }
    Ok(())
}

/// Block-diagonal Jacobian of [`map_histogram`] at a histogram.
///
/// Entry `m` only influences output slots `m*B .. (m+1)*B` where `B` is the
/// per-entry output dimension, so the Jacobian is stored as one derivative
/// block per entry. Entries equal to zero get a zero block (the derivative
/// diverges there; the zero column keeps training defined).
pub struct MapJacobian {
    block: usize,
    columns: Vec<f64>,
}

impl MapJacobian {
    pub fn block_dim(&self) -> usize {
        self.block
    }

    pub fn num_entries(&self) -> usize {
        self.columns.len() / self.block
    }

    /// Derivative block for histogram entry `m`.
    pub fn column(&self, m: usize) -> &[f64] {
        &self.columns[m * self.block..(m + 1) * self.block]
    }

    /// `J · v`: directional derivative of the mapped histogram, `v` has one
    /// component per histogram entry.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.num_entries() {
            return Err(Error::DimensionMismatch {
                expected: self.num_entries(),
                actual: v.len(),
            });
        }
        let mut out = vec![0.0; self.columns.len()];
        for (m, &vm) in v.iter().enumerate() {
            for (o, c) in out[m * self.block..(m + 1) * self.block]
                .iter_mut()
                .zip(self.column(m))
            {
                *o = c * vm;
            }
        }
        Ok(out)
    }

    /// `Jᵀ · u`: backpropagated error signal, `u` has one component per
    /// mapped output slot.
    pub fn apply_transpose(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                actual: u.len(),
            });
        }
        Ok((0..self.num_entries())
            .map(|m| {
                self.column(m)
                    .iter()
                    .zip(&u[m * self.block..(m + 1) * self.block])
                    .map(|(c, e)| c * e)
                    .sum()
            })
            .collect())
    }
}

/// Jacobian of the mapped histogram at `h`, with the zero-block convention
/// for zero entries.
pub fn jacobian(spec: &FeatureMapSpec, h: &[f64]) -> Result<MapJacobian> {
    let block = spec.output_dim();
    let mut columns = vec![0.0; h.len() * block];
    for (entry, chunk) in h.iter().zip(columns.chunks_mut(block)) {
        if !entry.is_finite() || *entry < 0.0 {
            return Err(Error::NegativeEntry(*entry));
        }
        if *entry > 0.0 {
            map_derivative_into(spec, *entry, chunk)?;
        }
    }
    Ok(MapJacobian { block, columns })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chi2_spec() -> FeatureMapSpec {
        FeatureMapSpec::chi2(2, 0.5).unwrap()
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn kappa_known_values() {
        assert_eq!(kappa(MapKernel::Chi2, 0.0).unwrap(), 1.0);
        assert!((kappa(MapKernel::Intersection, 0.0).unwrap() - 0.63662).abs() < 1e-5);
        assert!((kappa(MapKernel::Chi2, 0.5).unwrap() - 0.39854).abs() < 1e-5);
        assert!(matches!(
            kappa(MapKernel::Hellinger, 0.0),
            Err(Error::NoSpectralForm)
        ));
    }

    #[test]
    fn hellinger_map_is_sqrt() {
        let spec = FeatureMapSpec::hellinger();
        assert_eq!(map_scalar(&spec, 0.25).unwrap(), vec![0.5]);
        assert_eq!(
            map_histogram(&spec, &[0.25, 0.75]).unwrap(),
            vec![0.5, 0.75f64.sqrt()]
        );
    }

    #[test]
    fn chi2_map_at_one() {
        // log 1 = 0 kills every sine component; component 0 is sqrt(k(0)*L).
        let psi = map_scalar(&chi2_spec(), 1.0).unwrap();
        assert_eq!(psi.len(), 5);
        assert!((psi[0] - 0.5f64.sqrt()).abs() < 1e-9, "{}", psi[0]);
        assert_eq!(psi[2], 0.0);
        assert_eq!(psi[4], 0.0);
    }

    #[test]
    fn map_at_zero_is_zero_vector() {
        for spec in [
            FeatureMapSpec::hellinger(),
            chi2_spec(),
            FeatureMapSpec::intersection(2, 0.5).unwrap(),
        ] {
            assert!(map_scalar(&spec, 0.0).unwrap().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn negative_input_rejected() {
        assert!(matches!(
            map_scalar(&chi2_spec(), -0.1),
            Err(Error::NegativeEntry(_))
        ));
        assert!(map_histogram(&chi2_spec(), &[0.5, -0.5]).is_err());
    }

    #[test]
    fn output_dims() {
        assert_eq!(FeatureMapSpec::hellinger().output_dim(), 1);
        assert_eq!(chi2_spec().output_dim(), 5);
        assert_eq!(chi2_spec().map_dim(4000), 20_000);
        assert_eq!(5 * chi2_spec().map_dim(4000), 100_000);
    }

    #[test]
    fn gamma_closed_form() {
        for spec in [chi2_spec(), FeatureMapSpec::intersection(2, 0.5).unwrap()] {
            for &x in &[1e-3, 0.01, 0.1, 0.5, 1.0] {
                let g = gamma(&spec, x).unwrap();
                assert!((g * 2.0 * x - 1.0).abs() <= 1e-12, "gamma({x}) = {g}");
            }
        }
    }

    #[test]
    fn hellinger_derivative() {
        let spec = FeatureMapSpec::hellinger();
        assert!((map_derivative_scalar(&spec, 0.25).unwrap()[0] - 1.0).abs() < 1e-15);
        assert!(map_derivative_scalar(&spec, 0.0).is_err());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for spec in [
            chi2_spec(),
            FeatureMapSpec::intersection(2, 0.5).unwrap(),
            FeatureMapSpec::hellinger(),
        ] {
            for &x in &[1e-3, 0.01, 0.1, 0.5, 1.0] {
                let d = map_derivative_scalar(&spec, x).unwrap();
                let eps = 1e-7 * x.max(1e-3);
                let hi = map_scalar(&spec, x + eps).unwrap();
                let lo = map_scalar(&spec, x - eps).unwrap();
                for j in 0..d.len() {
                    let fd = (hi[j] - lo[j]) / (2.0 * eps);
                    let scale = d[j].abs().max(fd.abs()).max(1e-8);
                    assert!(
                        (d[j] - fd).abs() / scale <= 1e-6,
                        "{:?} x={x} j={j}: analytic {} vs fd {}",
                        spec.kernel,
                        d[j],
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn jacobian_block_structure() {
        let spec = chi2_spec();
        let h = [0.5, 0.0, 0.5];
        let jac = jacobian(&spec, &h).unwrap();
        assert_eq!(jac.block_dim(), 5);
        // Zero entry gets a zero block.
        assert!(jac.column(1).iter().all(|&v| v == 0.0));
        // Entry m only touches its own block of outputs.
        let jv = jac.apply(&[1.0, 0.0, 0.0]).unwrap();
        assert!(jv[5..].iter().all(|&v| v == 0.0));
        assert!(jv[..5].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn jacobian_vector_product_matches_directional_fd() {
        let spec = chi2_spec();
        let h = [0.3, 0.2, 0.5];
        let dir = [0.4, -1.0, 0.6];
        let jac = jacobian(&spec, &h).unwrap();
        let jv = jac.apply(&dir).unwrap();
        let eps = 1e-7;
        let hp: Vec<f64> = h.iter().zip(&dir).map(|(a, d)| a + eps * d).collect();
        let hm: Vec<f64> = h.iter().zip(&dir).map(|(a, d)| a - eps * d).collect();
        let fp = map_histogram(&spec, &hp).unwrap();
        let fm = map_histogram(&spec, &hm).unwrap();
        for j in 0..jv.len() {
            let fd = (fp[j] - fm[j]) / (2.0 * eps);
            let scale = jv[j].abs().max(fd.abs()).max(1e-8);
            assert!((jv[j] - fd).abs() / scale <= 1e-6, "slot {j}");
        }
    }

    #[test]
    fn hellinger_inner_products_reproduce_kernel() {
        let spec = FeatureMapSpec::hellinger();
        for i in 1..=20 {
            for j in 1..=20 {
                let (x, y) = (i as f64 / 20.0, j as f64 / 20.0);
                let px = map_scalar(&spec, x).unwrap();
                let py = map_scalar(&spec, y).unwrap();
                let dot: f64 = px.iter().zip(&py).map(|(a, b)| a * b).sum();
                assert!((dot - (x * y).sqrt()).abs() <= 1e-12);
            }
        }
    }
}
