//! Per-link channel realizations: deterministic frequency-selective PLC
//! presets and Rayleigh block-fading for the wireless link.

use crate::error::{Error, Result};
use crate::ofdm::OfdmConfig;
use crate::signal::{ComplexFrame, RngStream};
use num_complex::Complex64;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelModel {
    PlcStatic,
    RayleighBlock,
}

/// A channel realization: per-active-subcarrier gains, plus the impulse
/// response they were derived from when one exists.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub gains: Vec<Complex64>,
    pub taps: Option<Vec<Complex64>>,
    pub model: ChannelModel,
}

impl ChannelRealization {
    /// Mean |H_k|^2 over the active subcarriers; enters the link budget.
    pub fn mean_gain_sq(&self) -> f64 {
        self.gains.iter().map(|h| h.norm_sqr()).sum::<f64>() / self.gains.len() as f64
    }
}

/// Gains at the active bins from an impulse response:
/// H_k = sum_m taps[m] * exp(-j 2 pi k m / N).
pub fn gains_from_taps(taps: &[Complex64], cfg: &OfdmConfig) -> Vec<Complex64> {
    cfg.active
        .iter()
        .map(|&k| {
            taps.iter()
                .enumerate()
                .map(|(m, &g)| {
                    g * Complex64::from_polar(
                        1.0,
                        -2.0 * std::f64::consts::PI * (k * m) as f64 / cfg.fft_size as f64,
                    )
                })
                .sum()
        })
        .collect()
}

/// How the PLC channel is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum PlcChannelSpec {
    Preset(String),
    Taps(Vec<Complex64>),
}

/// Shipped 3-tap lowpass example, unit tap energy.
pub fn lowpass3_taps() -> Vec<Complex64> {
    let raw = [0.85, 0.45, 0.25];
    let energy: f64 = raw.iter().map(|t| t * t).sum();
    let scale = energy.sqrt().recip();
    raw.iter().map(|&t| Complex64::new(t * scale, 0.0)).collect()
}

/// Deterministic PLC channel from a named preset or explicit tap list.
/// Identical across all frames of a run.
pub fn plc_channel(spec: &PlcChannelSpec, cfg: &OfdmConfig) -> Result<ChannelRealization> {
    let taps = match spec {
        PlcChannelSpec::Preset(name) => match name.as_str() {
            "flat" => vec![Complex64::new(1.0, 0.0)],
            "lowpass3" => lowpass3_taps(),
            other => {
                return Err(Error::Config(format!(
                    "unknown PLC channel preset '{other}' (known: flat, lowpass3)"
                )))
            }
        },
        PlcChannelSpec::Taps(taps) => {
            if taps.is_empty() {
                return Err(Error::Config("PLC tap list is empty".into()));
            }
            if taps.len() > cfg.cp_len {
                return Err(Error::Config(format!(
                    "PLC channel has {} taps, exceeding cp_len {}",
                    taps.len(),
                    cfg.cp_len
                )));
            }
            taps.clone()
        }
    };
    Ok(ChannelRealization {
        gains: gains_from_taps(&taps, cfg),
        taps: Some(taps),
        model: ChannelModel::PlcStatic,
    })
}

/// Rayleigh block-fading realization: i.i.d. complex Gaussian taps with unit
/// total power, constant within a frame, redrawn per frame. E[|H_k|^2] = 1.
pub fn rayleigh_block(stream: &mut RngStream, n_taps: usize, cfg: &OfdmConfig) -> ChannelRealization {
    let scale = (n_taps as f64).sqrt().recip();
    let taps: Vec<Complex64> = (0..n_taps).map(|_| stream.standard_complex() * scale).collect();
    ChannelRealization {
        gains: gains_from_taps(&taps, cfg),
        taps: Some(taps),
        model: ChannelModel::RayleighBlock,
    }
}

/// Linear convolution truncated to the input length.
pub fn convolve_same_len(signal: &[Complex64], taps: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); signal.len()];
    for (m, &g) in taps.iter().enumerate() {
        if g == Complex64::default() {
            continue;
        }
        for t in m..signal.len() {
            out[t] += g * signal[t - m];
        }
    }
    out
}

/// Apply a channel realization to a time-domain frame: linear convolution
/// with the taps (output length = input length, tail truncated).
pub fn apply(frame: &ComplexFrame, ch: &ChannelRealization) -> Result<ComplexFrame> {
    match &ch.taps {
        Some(taps) => Ok(ComplexFrame::time(convolve_same_len(&frame.data, taps))),
        None => Err(Error::Config(
            "time-domain apply needs an impulse response".into(),
        )),
    }
}

/// Per-bin multiplication for grid-domain (genie) application.
pub fn apply_to_gains(cells: &mut [Complex64], gains: &[Complex64], n_active: usize) {
    for (i, c) in cells.iter_mut().enumerate() {
        *c *= gains[i % n_active];
    }
}

/// Load taps from a plain-text file, one complex tap per line as "re im".
pub fn load_taps(path: &Path) -> Result<Vec<Complex64>> {
    let text = std::fs::read_to_string(path)?;
    let mut taps = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let re: f64 = parts
            .next()
            .ok_or_else(|| Error::Config(format!("{}:{}: missing re", path.display(), ln + 1)))?
            .parse()
            .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), ln + 1)))?;
        let im: f64 = parts
            .next()
            .ok_or_else(|| Error::Config(format!("{}:{}: missing im", path.display(), ln + 1)))?
            .parse()
            .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), ln + 1)))?;
        if parts.next().is_some() {
            return Err(Error::Config(format!(
                "{}:{}: expected exactly two fields",
                path.display(),
                ln + 1
            )));
        }
        taps.push(Complex64::new(re, im));
    }
    if taps.is_empty() {
        return Err(Error::Config(format!(
            "{}: no taps found",
            path.display()
        )));
    }
    Ok(taps)
}
