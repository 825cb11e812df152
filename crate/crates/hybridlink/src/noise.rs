//! Asymmetric interference models: Gaussian-mixture noise for the wireless
//! link and cyclostationary region-based impulsive noise for NB-PLC.
//!
//! Generators emit both the complex samples and the latent instantaneous
//! variance track (the power parameter of the conditionally-Gaussian process),
//! which feeds the genie-aided instantaneous-SNR combiner.

use crate::error::{Error, Result};
use crate::ofdm::OfdmConfig;
use crate::signal::RngStream;
use num_complex::Complex64;

/// Gaussian-mixture parameters. Each sample draws component i with
/// probability `weights[i]`, then a circular complex Gaussian of variance
/// `variances[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GmParams {
    pub weights: Vec<f64>,
    pub variances: Vec<f64>,
}

impl GmParams {
    /// Two-component impulsive default: 90% background, 10% impulses at
    /// 100x power, scaled by `sigma0_sq`.
    pub fn default_impulsive(sigma0_sq: f64) -> Self {
        Self {
            weights: vec![0.9, 0.1],
            variances: vec![sigma0_sq, 100.0 * sigma0_sq],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.variances.len() || self.weights.is_empty() {
            return Err(Error::Config(
                "mixture weights and variances must be non-empty and equal length".into(),
            ));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "mixture weights must sum to 1, got {total}"
            )));
        }
        if self.weights.iter().any(|&p| p < 0.0) {
            return Err(Error::Config("mixture weights must be nonnegative".into()));
        }
        if self.variances.iter().any(|&v| v <= 0.0) {
            return Err(Error::Config("mixture variances must be positive".into()));
        }
        Ok(())
    }

    /// Total variance sum(p_i * sigma_i^2).
    pub fn avg_power(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.variances)
            .map(|(p, v)| p * v)
            .sum()
    }
}

/// One temporal region of the cyclostationary model.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    /// Start position as a fraction of the noise period, in [0, 1).
    pub start_frac: f64,
    /// Power multiplier relative to the base power.
    pub multiplier: f64,
    /// Spectral-shaping FIR taps, normalized to unit energy at build time.
    pub taps: Vec<f64>,
}

/// Cyclostationary region-based noise: the period (half the AC cycle) is
/// split into stationary regions, each with its own power and shaping filter.
#[derive(Debug, Clone, PartialEq)]
pub struct CycloParams {
    pub period_samples: usize,
    pub regions: Vec<Region>,
    /// Base variance multiplying every region's multiplier.
    pub base_power: f64,
}

impl CycloParams {
    /// Default three-region model at fractions (0, 0.4, 0.7) with power
    /// multipliers (1, 10, 100) and no spectral shaping.
    pub fn default_impulsive(sample_rate: f64, ac_hz: f64, base_power: f64) -> Self {
        let period_samples = (sample_rate / (2.0 * ac_hz)).floor() as usize;
        let mk = |start_frac: f64, multiplier: f64| Region {
            start_frac,
            multiplier,
            taps: vec![1.0],
        };
        Self {
            period_samples,
            regions: vec![mk(0.0, 1.0), mk(0.4, 10.0), mk(0.7, 100.0)],
            base_power,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.period_samples == 0 {
            return Err(Error::Config("noise period must be positive".into()));
        }
        if self.regions.is_empty() {
            return Err(Error::Config("at least one noise region required".into()));
        }
        if self.regions[0].start_frac != 0.0 {
            return Err(Error::Config("first region must start at fraction 0".into()));
        }
        for w in self.regions.windows(2) {
            if w[0].start_frac >= w[1].start_frac {
                return Err(Error::Config(
                    "region fractions must be strictly increasing".into(),
                ));
            }
        }
        for r in &self.regions {
            if r.start_frac < 0.0 || r.start_frac >= 1.0 {
                return Err(Error::Config("region fraction outside [0, 1)".into()));
            }
            if r.multiplier <= 0.0 {
                return Err(Error::Config("region multiplier must be positive".into()));
            }
            if r.taps.is_empty() {
                return Err(Error::Config("region shaping taps must be non-empty".into()));
            }
        }
        if self.base_power <= 0.0 {
            return Err(Error::Config("base power must be positive".into()));
        }
        Ok(())
    }

    /// Region boundaries in samples within one period.
    pub fn boundaries(&self) -> Vec<usize> {
        self.regions
            .iter()
            .map(|r| (r.start_frac * self.period_samples as f64).floor() as usize)
            .collect()
    }

    /// Region index owning sample `t` (after phase offset is applied).
    pub fn region_at(&self, t: usize) -> usize {
        let pos = t % self.period_samples;
        let bounds = self.boundaries();
        let mut idx = 0;
        for (i, &b) in bounds.iter().enumerate() {
            if pos >= b {
                idx = i;
            }
        }
        idx
    }

    /// Fraction of the period each region occupies.
    pub fn region_fractions(&self) -> Vec<f64> {
        let bounds = self.boundaries();
        let mut fracs = Vec::with_capacity(bounds.len());
        for i in 0..bounds.len() {
            let end = if i + 1 < bounds.len() {
                bounds[i + 1]
            } else {
                self.period_samples
            };
            fracs.push((end - bounds[i]) as f64 / self.period_samples as f64);
        }
        fracs
    }

    /// Time-average power: base * sum_r frac_r * mult_r (unit-energy taps).
    pub fn avg_power(&self) -> f64 {
        self.base_power
            * self
                .region_fractions()
                .iter()
                .zip(&self.regions)
                .map(|(f, r)| f * r.multiplier)
                .sum::<f64>()
    }

    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }
}

/// Tagged union of the supported noise models.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// Stationary white complex Gaussian with the given variance.
    White { power: f64 },
    GaussianMixture(GmParams),
    Cyclostationary(CycloParams),
}

/// Signal-side quantities needed to place a noise model on an Eb/N0 axis.
#[derive(Debug, Clone, Copy)]
pub struct LinkBudget {
    /// Energy per transmitted constellation cell (Es).
    pub symbol_energy: f64,
    /// Information bits per transmitted cell (code rate x bits/symbol,
    /// including differential-reference and tail overhead).
    pub info_bits_per_cell: f64,
    /// Mean squared channel gain over the active subcarriers.
    pub channel_gain_sq: f64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::White { power } => {
                if *power <= 0.0 {
                    return Err(Error::Config("noise power must be positive".into()));
                }
                Ok(())
            }
            NoiseModel::GaussianMixture(p) => p.validate(),
            NoiseModel::Cyclostationary(p) => p.validate(),
        }
    }

    /// Time-average noise power.
    pub fn avg_power(&self) -> f64 {
        match self {
            NoiseModel::White { power } => *power,
            NoiseModel::GaussianMixture(p) => p.avg_power(),
            NoiseModel::Cyclostationary(p) => p.avg_power(),
        }
    }

    pub fn n_regions(&self) -> usize {
        match self {
            NoiseModel::Cyclostationary(p) => p.n_regions(),
            _ => 1,
        }
    }

    /// Scale all variances so the time-average noise power puts the link at
    /// the requested Eb/N0 (dB): N0 = gain^2 * Es / (bits-per-cell * gamma).
    pub fn calibrate_to_ebno(&self, target_ebno_db: f64, budget: &LinkBudget) -> Result<NoiseModel> {
        if budget.symbol_energy <= 0.0
            || budget.info_bits_per_cell <= 0.0
            || budget.channel_gain_sq <= 0.0
        {
            return Err(Error::Domain(
                "link budget terms must be positive".into(),
            ));
        }
        let gamma = 10f64.powf(target_ebno_db / 10.0);
        let eb = budget.channel_gain_sq * budget.symbol_energy / budget.info_bits_per_cell;
        let n0 = eb / gamma;
        Ok(self.with_avg_power(n0))
    }

    /// Rescale to a given time-average power, preserving shape.
    pub fn with_avg_power(&self, n0: f64) -> NoiseModel {
        let ratio = n0 / self.avg_power();
        match self {
            NoiseModel::White { .. } => NoiseModel::White { power: n0 },
            NoiseModel::GaussianMixture(p) => NoiseModel::GaussianMixture(GmParams {
                weights: p.weights.clone(),
                variances: p.variances.iter().map(|v| v * ratio).collect(),
            }),
            NoiseModel::Cyclostationary(p) => {
                let mut q = p.clone();
                q.base_power *= ratio;
                NoiseModel::Cyclostationary(q)
            }
        }
    }

    /// Analytic noise PSD per active subcarrier for one region:
    /// sigma^2_r * |G_r(w_k)|^2 with unit-energy shaping taps.
    pub fn psd(&self, region: usize, cfg: &OfdmConfig) -> Vec<f64> {
        match self {
            NoiseModel::White { power } => vec![*power; cfg.n_active()],
            NoiseModel::GaussianMixture(p) => vec![p.avg_power(); cfg.n_active()],
            NoiseModel::Cyclostationary(p) => {
                let r = &p.regions[region];
                let var = p.base_power * r.multiplier;
                cfg.active
                    .iter()
                    .map(|&k| var * shaping_gain(&r.taps, k, cfg.fft_size))
                    .collect()
            }
        }
    }

    /// Analytic PSD per active subcarrier averaged over time (regions
    /// weighted by occupancy). This is the per-subchannel average noise
    /// power used for CNR-based media selection.
    pub fn time_avg_psd(&self, cfg: &OfdmConfig) -> Vec<f64> {
        match self {
            NoiseModel::Cyclostationary(p) => {
                let fracs = p.region_fractions();
                let mut acc = vec![0.0; cfg.n_active()];
                for (r, frac) in fracs.iter().enumerate() {
                    for (a, v) in acc.iter_mut().zip(self.psd(r, cfg)) {
                        *a += frac * v;
                    }
                }
                acc
            }
            _ => self.psd(0, cfg),
        }
    }
}

/// |G(w_k)|^2 for unit-energy-normalized taps.
fn shaping_gain(taps: &[f64], k: usize, fft_size: usize) -> f64 {
    let energy: f64 = taps.iter().map(|t| t * t).sum();
    let mut g = Complex64::default();
    for (m, &t) in taps.iter().enumerate() {
        g += t * Complex64::from_polar(
            1.0,
            -2.0 * std::f64::consts::PI * (k * m) as f64 / fft_size as f64,
        );
    }
    g.norm_sqr() / energy
}

/// Receiver-side view of a link's noise: the three combiner denominators.
#[derive(Debug, Clone)]
pub struct NoiseStats {
    /// Link-wide average noise power (ASC denominator).
    pub avg_power: f64,
    /// Noise PSD per region per active subcarrier (PSDC denominator).
    pub psd: Vec<Vec<f64>>,
    /// Instantaneous noise power per data cell, symbol-major (ISC
    /// denominator); absent when no instantaneous source is available.
    pub instantaneous: Option<Vec<f64>>,
}

/// A generated noise segment with its latent per-sample variance track and
/// (for cyclostationary noise) per-sample region labels.
#[derive(Debug, Clone)]
pub struct NoiseRealization {
    pub samples: Vec<Complex64>,
    /// Instantaneous variance parameter per sample (flat across frequency;
    /// spectral shaping is accounted for in per-cell variance queries).
    pub sample_var: Vec<f64>,
    pub region_idx: Option<Vec<u8>>,
}

impl NoiseRealization {
    /// Majority region over a window (PSDC symbol labeling).
    pub fn dominant_region(&self, start: usize, len: usize, n_regions: usize) -> usize {
        match &self.region_idx {
            None => 0,
            Some(idx) => {
                let mut counts = vec![0usize; n_regions];
                for &r in &idx[start..start + len] {
                    counts[r as usize] += 1;
                }
                counts
                    .iter()
                    .enumerate()
                    .max_by_key(|(_, &c)| c)
                    .map(|(i, _)| i)
                    .unwrap_or(0)
            }
        }
    }
}

/// White circular complex Gaussian.
pub fn white_sample(n: usize, power: f64, stream: &mut RngStream) -> NoiseRealization {
    let scale = power.sqrt();
    let samples = (0..n).map(|_| stream.standard_complex() * scale).collect();
    NoiseRealization {
        samples,
        sample_var: vec![power; n],
        region_idx: None,
    }
}

/// Gaussian-mixture noise: per sample, draw a component, then a circular
/// complex Gaussian of that component's variance.
pub fn gm_sample(n: usize, p: &GmParams, stream: &mut RngStream) -> Result<NoiseRealization> {
    p.validate()?;
    let mut samples = Vec::with_capacity(n);
    let mut sample_var = Vec::with_capacity(n);
    for _ in 0..n {
        let u = stream.uniform();
        let mut acc = 0.0;
        let mut var = *p.variances.last().unwrap();
        for (w, v) in p.weights.iter().zip(&p.variances) {
            acc += w;
            if u < acc {
                var = *v;
                break;
            }
        }
        samples.push(stream.standard_complex() * var.sqrt());
        sample_var.push(var);
    }
    Ok(NoiseRealization {
        samples,
        sample_var,
        region_idx: None,
    })
}

/// Cyclostationary region-based noise. Sample `t` belongs to the region
/// covering `(t + phase_offset) mod period`; each region shapes a shared
/// white stream with its own unit-energy filter and power multiplier, with
/// per-region filters running continuously so region statistics stay
/// stationary across boundaries.
pub fn cyclo_sample(
    n: usize,
    p: &CycloParams,
    stream: &mut RngStream,
    phase_offset: usize,
) -> Result<NoiseRealization> {
    p.validate()?;
    // Unit-energy-normalized taps per region.
    let taps: Vec<Vec<f64>> = p
        .regions
        .iter()
        .map(|r| {
            let e: f64 = r.taps.iter().map(|t| t * t).sum();
            let s = e.sqrt().recip();
            r.taps.iter().map(|t| t * s).collect()
        })
        .collect();
    let max_len = taps.iter().map(|t| t.len()).max().unwrap();
    let mut white: Vec<Complex64> = Vec::with_capacity(max_len);
    for _ in 0..max_len - 1 {
        white.push(stream.standard_complex());
    }
    let mut samples = Vec::with_capacity(n);
    let mut sample_var = Vec::with_capacity(n);
    let mut region_idx = Vec::with_capacity(n);
    for t in 0..n {
        white.push(stream.standard_complex());
        let w_end = white.len();
        let r = p.region_at(t + phase_offset);
        let var = p.base_power * p.regions[r].multiplier;
        let mut acc = Complex64::default();
        for (m, &g) in taps[r].iter().enumerate() {
            acc += g * white[w_end - 1 - m];
        }
        samples.push(acc * var.sqrt());
        sample_var.push(var);
        region_idx.push(r as u8);
    }
    Ok(NoiseRealization {
        samples,
        sample_var,
        region_idx: Some(region_idx),
    })
}

/// Generate a segment from any model.
pub fn sample(
    model: &NoiseModel,
    n: usize,
    stream: &mut RngStream,
    phase_offset: usize,
) -> Result<NoiseRealization> {
    match model {
        NoiseModel::White { power } => Ok(white_sample(n, *power, stream)),
        NoiseModel::GaussianMixture(p) => gm_sample(n, p, stream),
        NoiseModel::Cyclostationary(p) => cyclo_sample(n, p, stream, phase_offset),
    }
}

/// Latent per-cell noise variance for one OFDM symbol window: the window
/// average of the instantaneous variance, shaped per bin by each region's
/// filter response. Exact for unshaped (white-per-region) noise.
pub fn cell_variance(
    model: &NoiseModel,
    real: &NoiseRealization,
    window_start: usize,
    cfg: &OfdmConfig,
) -> Vec<f64> {
    let n = cfg.fft_size;
    match model {
        NoiseModel::Cyclostationary(p) => {
            let idx = real.region_idx.as_ref().expect("cyclo realization");
            let mut counts = vec![0usize; p.regions.len()];
            for &r in &idx[window_start..window_start + n] {
                counts[r as usize] += 1;
            }
            let mut out = vec![0.0; cfg.n_active()];
            for (r, &c) in counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let frac = c as f64 / n as f64;
                for (o, v) in out.iter_mut().zip(model.psd(r, cfg)) {
                    *o += frac * v;
                }
            }
            out
        }
        _ => {
            let mean = real.sample_var[window_start..window_start + n]
                .iter()
                .sum::<f64>()
                / n as f64;
            vec![mean; cfg.n_active()]
        }
    }
}
