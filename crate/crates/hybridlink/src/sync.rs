//! Preamble generation and acquisition: delayed-correlation coarse detection
//! with fractional CFO estimation, cross-correlation timing refinement with
//! integer CFO estimation, combined into a two-stage hybrid detector.
//!
//! The preamble is n_syncp identical SYNCP symbols followed by one SYNCM
//! symbol and the first half of a second SYNCM, where SYNCM = -SYNCP. The
//! sign flip at the SYNCP/SYNCM boundary gives the delayed-correlation
//! profile a steep zero crossing that anchors coarse timing.

use crate::error::{Error, Result};
use crate::ofdm::{OfdmConfig, SymbolGrid};
use crate::signal::{ComplexFrame, Fft, RngStream};
use num_complex::Complex64;

/// Seed for the frozen SYNCP phase table.
const PREAMBLE_SEED: u64 = 0x5943_4e53;

/// Preamble structure: n_syncp repetitions of SYNCP, one SYNCM, half a SYNCM.
#[derive(Debug, Clone)]
pub struct PreambleSpec {
    pub n_syncp: usize,
    pub symbol_len: usize,
    syncp: Vec<Complex64>,
    /// Unit-modulus cells on the active subcarriers.
    spectrum: Vec<Complex64>,
}

impl PreambleSpec {
    /// Build the frozen preamble for a grid geometry. SYNCP is the inverse
    /// DFT of unit-modulus pseudorandom phases on the active subcarriers.
    pub fn new(cfg: &OfdmConfig, n_syncp: usize) -> Result<Self> {
        cfg.validate()?;
        if n_syncp != 8 && n_syncp != 12 {
            return Err(Error::Config(format!(
                "n_syncp must be 8 or 12, got {n_syncp}"
            )));
        }
        let mut stream = RngStream::new(PREAMBLE_SEED, 0);
        let spectrum: Vec<Complex64> = (0..cfg.n_active())
            .map(|_| Complex64::from_polar(1.0, stream.uniform() * std::f64::consts::TAU))
            .collect();
        let mut spec = vec![Complex64::default(); cfg.fft_size];
        for (i, &k) in cfg.active.iter().enumerate() {
            spec[k] = spectrum[i];
        }
        let fft = Fft::new(cfg.fft_size)?;
        fft.inverse(&mut spec);
        Ok(Self {
            n_syncp,
            symbol_len: cfg.fft_size,
            syncp: spec,
            spectrum,
        })
    }

    pub fn syncp(&self) -> &[Complex64] {
        &self.syncp
    }

    pub fn syncm(&self) -> Vec<Complex64> {
        self.syncp.iter().map(|c| -c).collect()
    }

    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    /// n_syncp * L + L + L/2.
    pub fn total_len(&self) -> usize {
        self.n_syncp * self.symbol_len + self.symbol_len + self.symbol_len / 2
    }

    /// The full preamble time series.
    pub fn time_series(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.total_len());
        for _ in 0..self.n_syncp {
            out.extend_from_slice(&self.syncp);
        }
        let m = self.syncm();
        out.extend_from_slice(&m);
        out.extend_from_slice(&m[..self.symbol_len / 2]);
        out
    }

    /// Known frequency-domain cells of the n_syncp + 1 full preamble symbols
    /// (SYNCPs then SYNCM), for LS channel estimation.
    pub fn known_grid(&self) -> SymbolGrid {
        let n_act = self.spectrum.len();
        let mut grid = SymbolGrid::new(self.n_syncp + 1, n_act);
        for s in 0..self.n_syncp {
            for k in 0..n_act {
                grid.set(s, k, self.spectrum[k]);
            }
        }
        for k in 0..n_act {
            grid.set(self.n_syncp, k, -self.spectrum[k]);
        }
        grid
    }
}

/// Generate the preamble waveform.
pub fn gen_preamble(spec: &PreambleSpec) -> ComplexFrame {
    ComplexFrame::time(spec.time_series())
}

/// Delayed autocorrelation: corr[t] = sum_{m<lag} s[t+m] * conj(s[t+m+lag]),
/// with metric[t] = |corr[t]| / sqrt(e1[t]*e2[t]) normalized by the windowed
/// energies. Computed recursively, O(1) per sample.
#[derive(Debug, Clone)]
pub struct DelayedCorr {
    pub corr: Vec<Complex64>,
    pub metric: Vec<f64>,
}

pub fn delayed_corr(signal: &[Complex64], lag: usize) -> DelayedCorr {
    if signal.len() < 2 * lag {
        return DelayedCorr {
            corr: Vec::new(),
            metric: Vec::new(),
        };
    }
    let n_out = signal.len() - 2 * lag + 1;
    let mut corr = Vec::with_capacity(n_out);
    let mut metric = Vec::with_capacity(n_out);
    let mut c = Complex64::default();
    let mut e1 = 0.0f64;
    let mut e2 = 0.0f64;
    for m in 0..lag {
        c += signal[m] * signal[m + lag].conj();
        e1 += signal[m].norm_sqr();
        e2 += signal[m + lag].norm_sqr();
    }
    for t in 0..n_out {
        let denom = (e1 * e2).sqrt();
        corr.push(c);
        metric.push(if denom > 1e-300 { c.norm() / denom } else { 0.0 });
        if t + 1 < n_out {
            c += signal[t + lag] * signal[t + 2 * lag].conj()
                - signal[t] * signal[t + lag].conj();
            e1 += signal[t + lag].norm_sqr() - signal[t].norm_sqr();
            e2 += signal[t + 2 * lag].norm_sqr() - signal[t + lag].norm_sqr();
        }
    }
    DelayedCorr { corr, metric }
}

/// Fractional CFO from the delayed-correlation value on the plateau:
/// f = -arg(c) * fs / (2 pi lag). Unambiguous for |f| < fs / (2 lag).
pub fn frac_cfo_estimate(c: Complex64, lag: usize, sample_rate: f64) -> f64 {
    -c.arg() * sample_rate / (std::f64::consts::TAU * lag as f64)
}

/// Remove a carrier offset of `f_hz`: sample t is multiplied by
/// exp(-j 2 pi f t / fs).
pub fn compensate_cfo(signal: &[Complex64], f_hz: f64, sample_rate: f64) -> Vec<Complex64> {
    let step = Complex64::from_polar(1.0, -std::f64::consts::TAU * f_hz / sample_rate);
    let mut rot = Complex64::new(1.0, 0.0);
    signal
        .iter()
        .map(|&s| {
            let out = s * rot;
            rot *= step;
            out
        })
        .collect()
}

/// Detector output. `detected == false` leaves the remaining fields at their
/// best-effort values (not an error).
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub detected: bool,
    pub start_index: usize,
    pub frac_cfo_hz: f64,
    pub int_cfo_bins: i32,
    pub metric_peak: f64,
}

impl DetectionResult {
    fn failed() -> Self {
        Self {
            detected: false,
            start_index: 0,
            frac_cfo_hz: 0.0,
            int_cfo_bins: 0,
            metric_peak: 0.0,
        }
    }

    /// Total estimated carrier offset in Hz.
    pub fn total_cfo_hz(&self, cfg: &OfdmConfig) -> f64 {
        self.frac_cfo_hz + self.int_cfo_bins as f64 * cfg.subcarrier_spacing()
    }
}

/// Detector thresholds and knobs. The stage-2 search range is the
/// performance/complexity trade-off of the hybrid scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncConfig {
    pub stage1_threshold: f64,
    pub stage2_threshold: f64,
    pub search_range: usize,
    /// CFO estimation/compensation is only meaningful for the wireless link;
    /// PLC transmissions are in the baseband and skip all CFO steps.
    pub estimate_cfo: bool,
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self {
            stage1_threshold: 0.5,
            stage2_threshold: 0.6,
            search_range: 64,
            estimate_cfo: true,
        }
    }
}

/// Cross-correlation refinement around a coarse start: the known preamble
/// template is slid over +-search_range samples, jointly over candidate
/// integer CFO bin shifts in [-2, 2] (a shift of a whole bin rotates 2 pi
/// per symbol and collapses the plain correlation, so timing and integer CFO
/// must be searched together). The best normalized peak gives the start
/// index and the bin shift. Fractional CFO must already be compensated.
pub fn cross_corr_refine(
    signal: &[Complex64],
    coarse_start: usize,
    spec: &PreambleSpec,
    cfg: &OfdmConfig,
    sync: &SyncConfig,
) -> DetectionResult {
    let template = spec.time_series();
    let t_len = template.len();
    let e_t: f64 = template.iter().map(|c| c.norm_sqr()).sum();
    let lo = coarse_start.saturating_sub(sync.search_range);
    let hi = (coarse_start + sync.search_range).min(signal.len().saturating_sub(t_len));
    if lo > hi || signal.len() < t_len {
        return DetectionResult::failed();
    }
    let bin_shifts: Vec<i32> = if sync.estimate_cfo {
        (-2..=2).collect()
    } else {
        vec![0]
    };
    let seg = &signal[lo..(hi + t_len).min(signal.len())];
    let mut best = (0usize, 0i32, 0.0f64);
    for &b in &bin_shifts {
        let shifted;
        let work: &[Complex64] = if b == 0 {
            seg
        } else {
            shifted = compensate_cfo(seg, b as f64 * cfg.subcarrier_spacing(), cfg.sample_rate);
            &shifted
        };
        let mut e_w: f64 = work[..t_len].iter().map(|c| c.norm_sqr()).sum();
        for delta in 0..=(hi - lo) {
            let x: Complex64 = template
                .iter()
                .zip(&work[delta..delta + t_len])
                .map(|(p, w)| w * p.conj())
                .sum();
            let denom = (e_t * e_w).sqrt();
            let m = if denom > 1e-300 { x.norm() / denom } else { 0.0 };
            if m > best.2 {
                best = (lo + delta, b, m);
            }
            if delta < hi - lo {
                e_w += work[delta + t_len].norm_sqr() - work[delta].norm_sqr();
            }
        }
    }
    let (start, bins, peak) = best;
    DetectionResult {
        detected: peak >= sync.stage2_threshold,
        start_index: start,
        frac_cfo_hz: 0.0,
        int_cfo_bins: if peak >= sync.stage2_threshold { bins } else { 0 },
        metric_peak: peak,
    }
}

/// Two-stage hybrid detection: delayed correlation for presence, coarse
/// timing, and fractional CFO; cross correlation for refined timing and
/// integer CFO. Returns a failed result (not an error) when no stage-1
/// threshold crossing or no stage-2 peak is found.
pub fn hybrid_detect(
    signal: &[Complex64],
    spec: &PreambleSpec,
    cfg: &OfdmConfig,
    sync: &SyncConfig,
) -> DetectionResult {
    let l = spec.symbol_len;
    if signal.len() < spec.total_len() {
        return DetectionResult::failed();
    }
    let dc = delayed_corr(signal, l);
    if dc.metric.is_empty() {
        return DetectionResult::failed();
    }
    let (t_max, peak) = dc
        .metric
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, &m)| (i, m))
        .unwrap();
    if peak < sync.stage1_threshold {
        return DetectionResult::failed();
    }

    // Signed profile, derotated by the phase at the stage-1 peak. The
    // SYNCP->SYNCM boundary is the zero crossing whose two flanks (at +-L/3)
    // both carry a large fraction of the peak with opposite signs.
    let phase = dc.corr[t_max].arg();
    let derot = Complex64::from_polar(1.0, -phase);
    let signed: Vec<f64> = dc
        .corr
        .iter()
        .zip(&dc.metric)
        .map(|(c, &m)| {
            let norm = c.norm();
            if norm > 1e-300 {
                m * (c * derot).re / norm
            } else {
                0.0
            }
        })
        .collect();
    let flank = l / 3;
    let scan_lo = t_max.saturating_sub(2 * l).max(flank);
    let scan_hi = (t_max + (spec.n_syncp + 1) * l).min(signed.len().saturating_sub(flank + 1));
    let mut candidates: Vec<usize> = Vec::new();
    let mut t = scan_lo;
    while t < scan_hi {
        if signed[t].signum() != signed[t + 1].signum() {
            let a = signed[t - flank];
            let b = signed[t + flank];
            if a.signum() != b.signum()
                && a.abs() > 0.4 * peak
                && b.abs() > 0.4 * peak
            {
                candidates.push(t);
                if candidates.len() >= 4 {
                    break;
                }
                t += l / 2; // skip the rest of this transition
                continue;
            }
        }
        t += 1;
    }

    let offset = spec.n_syncp * l - 3 * l / 2; // crossing position past the true start
    let mut best = DetectionResult::failed();
    for &t_zero in &candidates {
        let coarse = match t_zero.checked_sub(offset) {
            Some(c) => c,
            None => continue,
        };
        // Fractional CFO from the main-plateau average (bounds derived from
        // the crossing, robust to where the stage-1 peak landed).
        let frac = if sync.estimate_cfo {
            let lo = (t_zero + 7 * l / 4).saturating_sub(spec.n_syncp * l);
            let hi = t_zero.saturating_sub(3 * l / 4).min(dc.corr.len() - 1);
            if lo < hi {
                let c_sum: Complex64 = dc.corr[lo..=hi].iter().sum();
                frac_cfo_estimate(c_sum, l, cfg.sample_rate)
            } else {
                frac_cfo_estimate(dc.corr[t_max], l, cfg.sample_rate)
            }
        } else {
            0.0
        };
        let refined = if sync.estimate_cfo {
            let compensated = compensate_cfo(signal, frac, cfg.sample_rate);
            cross_corr_refine(&compensated, coarse, spec, cfg, sync)
        } else {
            cross_corr_refine(signal, coarse, spec, cfg, sync)
        };
        if refined.metric_peak > best.metric_peak {
            best = DetectionResult {
                frac_cfo_hz: frac,
                ..refined
            };
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::white_sample;
    use crate::signal::RngStream;

    fn cfg() -> OfdmConfig {
        OfdmConfig::default()
    }

    #[test]
    fn preamble_length_and_structure() {
        let spec = PreambleSpec::new(&cfg(), 8).unwrap();
        let pre = spec.time_series();
        assert_eq!(pre.len(), 8 * 256 + 256 + 128);
        assert_eq!(pre.len(), 2432);
        // SYNCP repetitions are identical.
        for i in 1..8 {
            assert_eq!(&pre[i * 256..(i + 1) * 256], &pre[..256]);
        }
        // SYNCM is the exact negation of SYNCP.
        for m in 0..256 {
            assert_eq!(pre[8 * 256 + m], -pre[m]);
        }
        // Half SYNCM tail.
        for m in 0..128 {
            assert_eq!(pre[9 * 256 + m], -pre[m]);
        }
    }

    #[test]
    fn preamble_is_frozen() {
        let a = PreambleSpec::new(&cfg(), 8).unwrap();
        let b = PreambleSpec::new(&cfg(), 8).unwrap();
        assert_eq!(a.time_series(), b.time_series());
    }

    #[test]
    fn n_syncp_validated() {
        assert!(PreambleSpec::new(&cfg(), 7).is_err());
        assert!(PreambleSpec::new(&cfg(), 12).is_ok());
    }

    #[test]
    fn delayed_corr_plateau_on_clean_preamble() {
        let spec = PreambleSpec::new(&cfg(), 8).unwrap();
        let pre = spec.time_series();
        let dc = delayed_corr(&pre, 256);
        // Both windows inside the SYNCP region for t in [0, 6*256].
        for t in 0..=6 * 256 {
            assert!(dc.metric[t] > 0.99, "metric[{t}] = {}", dc.metric[t]);
        }
    }

    #[test]
    fn delayed_corr_low_on_noise() {
        let mut stream = RngStream::new(77, 0);
        let noise = white_sample(4096, 1.0, &mut stream);
        let dc = delayed_corr(&noise.samples, 256);
        let above = dc.metric.iter().filter(|&&m| m > 0.2).count();
        assert!(
            (above as f64) < 0.01 * dc.metric.len() as f64,
            "{above} excursions above 0.2"
        );
    }

    #[test]
    fn delayed_corr_magnitude_cfo_invariant() {
        let spec = PreambleSpec::new(&cfg(), 8).unwrap();
        let pre = spec.time_series();
        let shifted = compensate_cfo(&pre, -500.0, 400_000.0); // inject +500 Hz
        let a = delayed_corr(&pre, 256);
        let b = delayed_corr(&shifted, 256);
        for t in (0..=6 * 256).step_by(64) {
            assert!(
                (a.metric[t] - b.metric[t]).abs() < 0.01,
                "metric changed at {t}"
            );
        }
    }

    #[test]
    fn frac_cfo_closed_form() {
        let spec = PreambleSpec::new(&cfg(), 8).unwrap();
        let pre = spec.time_series();
        let with_cfo = compensate_cfo(&pre, -50.0, 400_000.0); // +50 Hz offset
        let dc = delayed_corr(&with_cfo, 256);
        let est = frac_cfo_estimate(dc.corr[512], 256, 400_000.0);
        assert!((est - 50.0).abs() < 0.1, "estimated {est} Hz");
    }

    #[test]
    fn frac_cfo_wraps_beyond_ambiguity() {
        // 800 Hz exceeds the +-781.25 Hz unambiguous range and aliases to
        // 800 - 1562.5 = -762.5 Hz.
        let spec = PreambleSpec::new(&cfg(), 8).unwrap();
        let pre = spec.time_series();
        let with_cfo = compensate_cfo(&pre, -800.0, 400_000.0);
        let dc = delayed_corr(&with_cfo, 256);
        let est = frac_cfo_estimate(dc.corr[512], 256, 400_000.0);
        assert!((est + 762.5).abs() < 1.0, "estimated {est} Hz");
    }

    fn embed_preamble(
        spec: &PreambleSpec,
        start: usize,
        total: usize,
        noise_power: f64,
        seed: u64,
    ) -> Vec<Complex64> {
        let mut stream = RngStream::new(seed, 0);
        let mut sig = white_sample(total, noise_power, &mut stream).samples;
        for (i, &p) in spec.time_series().iter().enumerate() {
            sig[start + i] += p;
        }
        sig
    }

    #[test]
    fn noiseless_detection_is_exact() {
        let c = cfg();
        let spec = PreambleSpec::new(&c, 8).unwrap();
        let start = 700;
        let sig = embed_preamble(&spec, start, 6000, 1e-12, 1);
        let det = hybrid_detect(&sig, &spec, &c, &SyncConfig::default());
        assert!(det.detected);
        assert_eq!(det.start_index, start);
        assert!(det.frac_cfo_hz.abs() < 1.0);
        assert_eq!(det.int_cfo_bins, 0);
    }

    #[test]
    fn detection_is_shift_equivariant() {
        let c = cfg();
        let spec = PreambleSpec::new(&c, 8).unwrap();
        let k = 37;
        let base = 300;
        let a = embed_preamble(&spec, base, 6000, 1e-12, 2);
        let b = embed_preamble(&spec, base + k, 6000 + k, 1e-12, 2);
        // Same content shifted by k fresh noise samples at the front.
        let da = hybrid_detect(&a, &spec, &c, &SyncConfig::default());
        let db = hybrid_detect(&b, &spec, &c, &SyncConfig::default());
        assert!(da.detected && db.detected);
        assert_eq!(db.start_index, da.start_index + k);
    }

    #[test]
    fn integer_offset_of_one_bin_recovered() {
        let c = cfg();
        let spec = PreambleSpec::new(&c, 8).unwrap();
        let start = 512;
        let mut sig = embed_preamble(&spec, start, 6000, 1e-12, 3);
        // Inject exactly one subcarrier spacing: the fractional part aliases
        // to zero and only the integer stage can see it.
        sig = compensate_cfo(&sig, -c.subcarrier_spacing(), c.sample_rate);
        let det = hybrid_detect(&sig, &spec, &c, &SyncConfig::default());
        assert!(det.detected);
        assert_eq!(det.int_cfo_bins, 1);
        assert!(det.frac_cfo_hz.abs() < 2.0);
        assert_eq!(det.start_index, start);
    }

    #[test]
    fn wireless_frame_with_cfo_300hz() {
        let c = cfg();
        let spec = PreambleSpec::new(&c, 8).unwrap();
        let start = 450;
        // 10 dB SNR relative to the preamble's time-domain power.
        let p_sig = 36.0 / 256.0;
        let mut sig = embed_preamble(&spec, start, 7000, p_sig / 10.0, 4);
        sig = compensate_cfo(&sig, -300.0, c.sample_rate);
        let det = hybrid_detect(&sig, &spec, &c, &SyncConfig::default());
        assert!(det.detected);
        assert!((det.start_index as i64 - start as i64).abs() <= 2);
        let residual = det.total_cfo_hz(&c) - 300.0;
        assert!(
            residual.abs() < 0.01 * c.subcarrier_spacing(),
            "residual CFO {residual} Hz"
        );
    }

    #[test]
    fn plc_path_has_zero_cfo_by_construction() {
        let c = cfg();
        let spec = PreambleSpec::new(&c, 8).unwrap();
        let sig = embed_preamble(&spec, 400, 6000, 1e-6, 5);
        let sync = SyncConfig {
            estimate_cfo: false,
            ..SyncConfig::default()
        };
        let det = hybrid_detect(&sig, &spec, &c, &sync);
        assert!(det.detected);
        assert_eq!(det.frac_cfo_hz, 0.0);
        assert_eq!(det.int_cfo_bins, 0);
    }

    #[test]
    fn noise_only_mostly_rejected() {
        let c = cfg();
        let spec = PreambleSpec::new(&c, 8).unwrap();
        let mut false_alarms = 0;
        let trials = 200;
        for t in 0..trials {
            let mut stream = RngStream::new(1000 + t, 0);
            let sig = white_sample(4000, 1.0, &mut stream).samples;
            if hybrid_detect(&sig, &spec, &c, &SyncConfig::default()).detected {
                false_alarms += 1;
            }
        }
        assert!(false_alarms <= 2, "{false_alarms}/{trials} false alarms");
    }
}
