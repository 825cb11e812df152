//! End-to-end seeded trial execution: bits through FEC, mapping, OFDM,
//! channel, noise, acquisition, estimation, combining and decoding, plus the
//! batched sweep loop whose output is independent of worker count.

use super::{BerPoint, Modulation, ReceiverMode, Scenario, Scheme};
use crate::channel::{self, ChannelRealization};
use crate::combining::{
    self, asc_diff_weights, coherent_link_llrs, diff_llrs, diff_soft_values, dssc_weights,
    trsd_apply, trsd_select, CoherentWeighting, Link, LlrFrame, SelectionMask,
};
use crate::error::{Error, Result};
use crate::estimation::{instantaneous_noise_power_residual, ls_channel_estimate};
use crate::fec::{conv_encode, deinterleave, interleave, viterbi_decode, CodeConfig};
use crate::noise::{self, cell_variance, LinkBudget, NoiseModel, NoiseRealization, NoiseStats};
use crate::ofdm::{demodulate, diff_detect, modulate, OfdmConfig, SymbolGrid};
use crate::signal::{ComplexFrame, Fft, RngStream};
use crate::sync::{compensate_cfo, hybrid_detect, PreambleSpec, SyncConfig};
use num_complex::Complex64;
use rayon::prelude::*;

/// Weight denominators below 1e-6 of the unit symbol energy are clamped.
const WEIGHT_FLOOR: f64 = 1e-6;

// Per-trial stream purposes: stream_id = trial * N_PURPOSES + purpose.
const N_PURPOSES: u64 = 8;
const P_INFO: u64 = 0;
const P_WL_CHAN: u64 = 1;
const P_PLC_NOISE: u64 = 2;
const P_WL_NOISE: u64 = 3;
const P_PLC_PHASE: u64 = 4;
const P_WL_PHASE: u64 = 5;
const P_IDLE: u64 = 6;

fn stream_for(seed: u64, purpose: u64, trial: u64) -> RngStream {
    RngStream::new(seed, trial * N_PURPOSES + purpose)
}

fn bpsk(bit: u8) -> Complex64 {
    Complex64::new(if bit == 0 { 1.0 } else { -1.0 }, 0.0)
}

/// Map coded bits onto a (possibly differentially encoded) symbol grid.
fn build_grid(coded: &[u8], modulation: Modulation, data_symbols: usize, n_active: usize) -> Result<SymbolGrid> {
    match modulation {
        Modulation::BpskCoherent => {
            let mut g = SymbolGrid::new(data_symbols, n_active);
            for (c, &b) in g.cells_mut().iter_mut().zip(coded) {
                *c = bpsk(b);
            }
            Ok(g)
        }
        Modulation::DbpskTddm => {
            let mut data = SymbolGrid::new(data_symbols + 1, n_active);
            data.cells_mut().fill(Complex64::new(1.0, 0.0));
            for s in 0..data_symbols {
                for k in 0..n_active {
                    data.set(s + 1, k, bpsk(coded[s * n_active + k]));
                }
            }
            crate::ofdm::diff_encode(&data, crate::ofdm::DiffMode::Tddm)
        }
        Modulation::DbpskFddm => {
            let mut data = SymbolGrid::new(data_symbols, n_active);
            data.cells_mut().fill(Complex64::new(1.0, 0.0));
            for s in 0..data_symbols {
                for k in 1..n_active {
                    data.set(s, k, bpsk(coded[s * (n_active - 1) + (k - 1)]));
                }
            }
            crate::ofdm::diff_encode(&data, crate::ofdm::DiffMode::Fddm)
        }
    }
}

/// Receiver-side view of one link after acquisition and estimation.
struct RxLink {
    grid: SymbolGrid,
    gains: Vec<Complex64>,
    stats: NoiseStats,
    region_labels: Vec<usize>,
    grid_symbols: usize,
    detect_failed: bool,
}

struct LinkJob<'a> {
    ofdm: &'a OfdmConfig,
    channel: &'a ChannelRealization,
    noise_model: &'a NoiseModel,
    is_plc: bool,
    cfo_hz: f64,
    phase_pin: Option<usize>,
}

fn phase_for(model: &NoiseModel, pin: Option<usize>, stream: &mut RngStream) -> usize {
    match model {
        NoiseModel::Cyclostationary(p) => pin.unwrap_or_else(|| stream.below(p.period_samples)),
        _ => 0,
    }
}

/// Region label per OFDM symbol: the majority region over the FFT window.
fn symbol_regions(
    real: &NoiseRealization,
    model: &NoiseModel,
    frame_offset: usize,
    n_symbols: usize,
    ofdm: &OfdmConfig,
) -> Vec<usize> {
    (0..n_symbols)
        .map(|s| {
            let w = frame_offset + s * ofdm.symbol_len() + ofdm.cp_len;
            real.dominant_region(w, ofdm.fft_size, model.n_regions())
        })
        .collect()
}

/// Latent per-cell noise variance, symbol-major over the whole grid.
fn latent_instantaneous(
    real: &NoiseRealization,
    model: &NoiseModel,
    frame_offset: usize,
    n_symbols: usize,
    ofdm: &OfdmConfig,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_symbols * ofdm.n_active());
    for s in 0..n_symbols {
        let w = frame_offset + s * ofdm.symbol_len() + ofdm.cp_len;
        out.extend(cell_variance(model, real, w, ofdm));
    }
    out
}

/// DFT of `n_blocks` contiguous CP-less blocks (preamble symbols).
fn demod_blocks(
    sig: &[Complex64],
    start: usize,
    n_blocks: usize,
    ofdm: &OfdmConfig,
) -> Result<SymbolGrid> {
    let l = ofdm.fft_size;
    if start + n_blocks * l > sig.len() {
        return Err(Error::Framing("preamble blocks out of range".into()));
    }
    let fft = Fft::new(l)?;
    let mut grid = SymbolGrid::new(n_blocks, ofdm.n_active());
    let mut buf = vec![Complex64::default(); l];
    for s in 0..n_blocks {
        buf.copy_from_slice(&sig[start + s * l..start + (s + 1) * l]);
        fft.forward(&mut buf);
        for (i, &k) in ofdm.active.iter().enumerate() {
            grid.set(s, i, buf[k]);
        }
    }
    Ok(grid)
}

/// Run one link end to end (modulate, channel, noise, receive) and produce
/// the receiver-side bundle.
fn transceive(
    sc: &Scenario,
    trial: u64,
    job: &LinkJob,
    grid: &SymbolGrid,
    idle_len: usize,
) -> Result<RxLink> {
    let ofdm = job.ofdm;
    let grid_symbols = grid.n_symbols();
    let tx = modulate(grid, ofdm)?;
    let (noise_purpose, phase_purpose) = if job.is_plc {
        (P_PLC_NOISE, P_PLC_PHASE)
    } else {
        (P_WL_NOISE, P_WL_PHASE)
    };
    let mut phase_stream = stream_for(sc.seed, phase_purpose, trial);
    let phase = phase_for(job.noise_model, job.phase_pin, &mut phase_stream);
    let mut noise_stream = stream_for(sc.seed, noise_purpose, trial);

    match sc.receiver {
        ReceiverMode::Genie => {
            let sig = channel::apply(&tx, job.channel)?;
            let real = noise::sample(job.noise_model, sig.len(), &mut noise_stream, phase)?;
            let rx_samples: Vec<Complex64> = sig
                .data
                .iter()
                .zip(&real.samples)
                .map(|(a, b)| a + b)
                .collect();
            let rx_grid = demodulate(&ComplexFrame::time(rx_samples), ofdm)?;
            let region_labels = symbol_regions(&real, job.noise_model, 0, grid_symbols, ofdm);
            let n_regions = job.noise_model.n_regions();
            let stats = NoiseStats {
                avg_power: job.noise_model.avg_power(),
                psd: (0..n_regions).map(|r| job.noise_model.psd(r, ofdm)).collect(),
                instantaneous: Some(latent_instantaneous(
                    &real,
                    job.noise_model,
                    0,
                    grid_symbols,
                    ofdm,
                )),
            };
            Ok(RxLink {
                grid: rx_grid,
                gains: job.channel.gains.clone(),
                stats,
                region_labels,
                grid_symbols,
                detect_failed: false,
            })
        }
        ReceiverMode::Realistic => {
            let preamble = PreambleSpec::new(ofdm, sc.n_syncp)?;
            let pre_len = preamble.total_len();
            let tail_pad = 128;
            let mut clean =
                Vec::with_capacity(idle_len + pre_len + tx.len() + tail_pad);
            clean.extend(std::iter::repeat(Complex64::default()).take(idle_len));
            clean.extend(preamble.time_series());
            clean.extend_from_slice(&tx.data);
            clean.extend(std::iter::repeat(Complex64::default()).take(tail_pad));
            let mut sig = channel::apply(&ComplexFrame::time(clean), job.channel)?.data;
            if !job.is_plc && job.cfo_hz != 0.0 {
                // Inject the carrier offset (opposite sign of compensation).
                sig = compensate_cfo(&sig, -job.cfo_hz, ofdm.sample_rate);
            }
            let real = noise::sample(job.noise_model, sig.len(), &mut noise_stream, phase)?;
            let rx: Vec<Complex64> = sig
                .iter()
                .zip(&real.samples)
                .map(|(a, b)| a + b)
                .collect();
            let sync = SyncConfig {
                estimate_cfo: !job.is_plc,
                ..sc.sync
            };
            let det = hybrid_detect(&rx, &preamble, ofdm, &sync);
            let failed = |grid_symbols| RxLink {
                grid: SymbolGrid::new(1, ofdm.n_active()),
                gains: vec![Complex64::default(); ofdm.n_active()],
                stats: NoiseStats {
                    avg_power: 1.0,
                    psd: vec![vec![1.0; ofdm.n_active()]],
                    instantaneous: None,
                },
                region_labels: Vec::new(),
                grid_symbols,
                detect_failed: true,
            };
            if !det.detected {
                return Ok(failed(grid_symbols));
            }
            let rx_c = if sync.estimate_cfo {
                compensate_cfo(&rx, det.total_cfo_hz(ofdm), ofdm.sample_rate)
            } else {
                rx
            };
            let start = det.start_index;
            let data_offset = start + pre_len;
            let data_len = grid_symbols * ofdm.symbol_len();
            if data_offset + data_len > rx_c.len() {
                return Ok(failed(grid_symbols));
            }
            let pre_grid = match demod_blocks(&rx_c, start, sc.n_syncp + 1, ofdm) {
                Ok(g) => g,
                Err(_) => return Ok(failed(grid_symbols)),
            };
            let est = ls_channel_estimate(&pre_grid, &preamble.known_grid())?;
            let rx_grid = demodulate(
                &ComplexFrame::time(rx_c[data_offset..data_offset + data_len].to_vec()),
                ofdm,
            )?;
            // Region boundaries are receiver knowledge; labels come from the
            // generator's ground truth at the frame's true position.
            let true_offset = idle_len + pre_len;
            let region_labels =
                symbol_regions(&real, job.noise_model, true_offset, grid_symbols, ofdm);
            let n_regions = job.noise_model.n_regions();
            let ch_power: Vec<f64> = est.gains.iter().map(|h| h.norm_sqr()).collect();
            let psd_est = crate::estimation::noise_psd_estimate(
                &rx_grid,
                &region_labels,
                n_regions,
                &ch_power,
            )?;
            let mut cell_count = 0.0;
            let mut acc = 0.0;
            for s in 0..rx_grid.n_symbols() {
                for k in 0..rx_grid.n_active() {
                    acc += (rx_grid.get(s, k).norm_sqr() - ch_power[k]).max(0.0);
                    cell_count += 1.0;
                }
            }
            let avg_power = (acc / cell_count).max(WEIGHT_FLOOR);
            let psd: Vec<Vec<f64>> = psd_est
                .into_iter()
                .map(|r| r.unwrap_or_else(|| vec![avg_power; ofdm.n_active()]))
                .collect();
            let instantaneous = instantaneous_noise_power_residual(&rx_grid, &est)?;
            Ok(RxLink {
                grid: rx_grid,
                gains: est.gains,
                stats: NoiseStats {
                    avg_power,
                    psd,
                    instantaneous: Some(instantaneous),
                },
                region_labels,
                grid_symbols,
                detect_failed: false,
            })
        }
    }
}

/// Extract per-data-cell values from a per-grid-cell vector (symbol-major),
/// skipping differential reference cells.
fn data_cells_of(full: &[f64], modulation: Modulation, grid_symbols: usize, n_active: usize) -> Vec<f64> {
    match modulation.diff_mode() {
        None => full.to_vec(),
        Some(crate::ofdm::DiffMode::Tddm) => full[n_active..].to_vec(),
        Some(crate::ofdm::DiffMode::Fddm) => {
            let mut out = Vec::with_capacity(grid_symbols * (n_active - 1));
            for s in 0..grid_symbols {
                out.extend_from_slice(&full[s * n_active + 1..(s + 1) * n_active]);
            }
            out
        }
    }
}

/// Per-link LLRs under the scheme's weighting rule.
fn link_llrs(sc: &Scenario, rx: &RxLink, modulation: Modulation, link: Link) -> Result<LlrFrame> {
    match modulation.diff_mode() {
        None => {
            let weighting = match sc.scheme {
                Scheme::Isc => CoherentWeighting::InstantaneousNoise,
                Scheme::Psdc => CoherentWeighting::PerRegionPsd,
                Scheme::Egc => {
                    // Unweighted soft values: equalized real parts.
                    let mut llrs = Vec::with_capacity(rx.grid.n_symbols() * rx.grid.n_active());
                    for s in 0..rx.grid.n_symbols() {
                        for k in 0..rx.grid.n_active() {
                            llrs.push((rx.gains[k].conj() * rx.grid.get(s, k)).re);
                        }
                    }
                    return Ok(LlrFrame {
                        llrs,
                        link: Some(link),
                        weights_used: Vec::new(),
                    });
                }
                _ => CoherentWeighting::AverageNoise,
            };
            coherent_link_llrs(
                &rx.grid,
                &rx.gains,
                weighting,
                &rx.stats,
                &rx.region_labels,
                link,
                WEIGHT_FLOOR,
            )
        }
        Some(mode) => {
            let detected = diff_detect(&rx.grid, mode);
            let soft = diff_soft_values(&detected, mode);
            let weights: Vec<f64> = match sc.scheme {
                Scheme::Dssc | Scheme::Mixed | Scheme::Psdc => {
                    dssc_weights(&rx.grid, mode, &rx.stats, &rx.region_labels, WEIGHT_FLOOR)?
                }
                Scheme::Isc => {
                    let inst = rx.stats.instantaneous.as_ref().ok_or_else(|| {
                        Error::Framing("instantaneous noise power unavailable".into())
                    })?;
                    let denoms = data_cells_of(inst, modulation, rx.grid_symbols, rx.grid.n_active());
                    let mags = {
                        let all: Vec<f64> =
                            rx.grid.cells().iter().map(|c| c.norm()).collect();
                        data_cells_of(&all, modulation, rx.grid_symbols, rx.grid.n_active())
                    };
                    mags.iter()
                        .zip(&denoms)
                        .map(|(m, d)| m / d.max(WEIGHT_FLOOR))
                        .collect()
                }
                Scheme::Asc => asc_diff_weights(
                    &rx.gains,
                    rx.stats.avg_power,
                    rx.grid_symbols,
                    mode,
                    WEIGHT_FLOOR,
                ),
                _ => vec![1.0; soft.len()],
            };
            diff_llrs(&soft, &weights, link)
        }
    }
}

/// Combined LLRs for TRSD: each subcarrier's soft value comes from its
/// selected medium only.
fn trsd_llrs(plc: &LlrFrame, wl: &LlrFrame, mask: &SelectionMask, n_active: usize) -> LlrFrame {
    let llrs = plc
        .llrs
        .iter()
        .zip(&wl.llrs)
        .enumerate()
        .map(|(i, (p, w))| if mask.bits[i % n_active] { *p } else { *w })
        .collect();
    LlrFrame {
        llrs,
        link: None,
        weights_used: Vec::new(),
    }
}

/// Outcome of one frame trial.
pub struct TrialOutcome {
    pub bit_errors: u64,
    pub bits: u64,
}

/// Run one end-to-end frame at the given PLC-link Eb/N0. Deterministic in
/// `(scenario.seed, trial)`.
pub fn run_trial(sc: &Scenario, ebno_db: f64, trial: u64) -> Result<TrialOutcome> {
    let info_len = sc.info_bits();
    let coded_len = sc.coded_bits();
    let rows = sc.interleaver_rows_effective();
    let code_cfg = CodeConfig {
        interleaver_rows: rows,
        ..CodeConfig::default()
    };

    let mut info_stream = stream_for(sc.seed, P_INFO, trial);
    let info: Vec<u8> = (0..info_len).map(|_| info_stream.bit()).collect();
    let coded: Vec<u8> = if sc.fec {
        interleave(&conv_encode(&info, &code_cfg), rows)?
    } else {
        info.clone()
    };
    debug_assert_eq!(coded.len(), coded_len);

    let need_plc = sc.scheme != Scheme::WlOnly;
    let need_wl = sc.scheme != Scheme::PlcOnly;

    // Channels.
    let plc_ch = channel::plc_channel(&sc.plc_channel, &sc.ofdm_plc)?;
    let mut wl_ch_stream = stream_for(sc.seed, P_WL_CHAN, trial);
    let wl_ch = channel::rayleigh_block(&mut wl_ch_stream, sc.wl_taps, &sc.ofdm_wl);

    // Per-link Eb/N0 calibration at the receiver side of each channel.
    let plc_cells_total =
        sc.plc_modulation.grid_symbols(sc.data_symbols) * sc.ofdm_plc.n_active();
    let wl_cells_total = sc.wl_modulation.grid_symbols(sc.data_symbols) * sc.ofdm_wl.n_active();
    let plc_budget = LinkBudget {
        symbol_energy: 1.0,
        info_bits_per_cell: info_len as f64 / plc_cells_total as f64,
        channel_gain_sq: plc_ch.mean_gain_sq(),
    };
    let wl_budget = LinkBudget {
        symbol_energy: 1.0,
        info_bits_per_cell: info_len as f64 / wl_cells_total as f64,
        channel_gain_sq: 1.0, // ensemble E|H|^2 for Rayleigh block fading
    };
    let wl_ebno = if sc.scheme == Scheme::WlOnly {
        ebno_db
    } else {
        sc.wl_ebno_db
    };
    let plc_noise = sc.plc_noise.calibrate_to_ebno(ebno_db, &plc_budget)?;
    let wl_noise = sc.wl_noise.calibrate_to_ebno(wl_ebno, &wl_budget)?;

    // TRSD media selection from per-subcarrier CNRs (ideal feedback).
    let mask = if sc.scheme == Scheme::Trsd {
        let psd_p = plc_noise.time_avg_psd(&sc.ofdm_plc);
        let psd_w = wl_noise.time_avg_psd(&sc.ofdm_wl);
        let cnr_p: Vec<f64> = plc_ch
            .gains
            .iter()
            .zip(&psd_p)
            .map(|(h, p)| h.norm_sqr() / p.max(WEIGHT_FLOOR))
            .collect();
        let cnr_w: Vec<f64> = wl_ch
            .gains
            .iter()
            .zip(&psd_w)
            .map(|(h, p)| h.norm_sqr() / p.max(WEIGHT_FLOOR))
            .collect();
        Some(trsd_select(&cnr_p, &cnr_w)?)
    } else {
        None
    };

    // Grids.
    let (plc_grid, wl_grid) = if let Some(mask) = &mask {
        let full = build_grid(&coded, Modulation::BpskCoherent, sc.data_symbols, sc.ofdm_plc.n_active())?;
        let (p, w) = trsd_apply(&full, mask);
        (Some(p), Some(w))
    } else {
        let p = if need_plc {
            Some(build_grid(
                &coded,
                sc.plc_modulation,
                sc.data_symbols,
                sc.ofdm_plc.n_active(),
            )?)
        } else {
            None
        };
        let w = if need_wl {
            Some(build_grid(
                &coded,
                sc.wl_modulation,
                sc.data_symbols,
                sc.ofdm_wl.n_active(),
            )?)
        } else {
            None
        };
        (p, w)
    };

    // Idle gaps ahead of each frame (realistic mode only).
    let mut idle_stream = stream_for(sc.seed, P_IDLE, trial);
    let idle_plc = 256 + idle_stream.below(256);
    let idle_wl = 256 + idle_stream.below(256);

    let plc_rx = if let Some(grid) = &plc_grid {
        let job = LinkJob {
            ofdm: &sc.ofdm_plc,
            channel: &plc_ch,
            noise_model: &plc_noise,
            is_plc: true,
            cfo_hz: 0.0,
            phase_pin: sc.plc_phase,
        };
        Some(transceive(sc, trial, &job, grid, idle_plc)?)
    } else {
        None
    };
    let wl_rx = if let Some(grid) = &wl_grid {
        let job = LinkJob {
            ofdm: &sc.ofdm_wl,
            channel: &wl_ch,
            noise_model: &wl_noise,
            is_plc: false,
            cfo_hz: sc.wl_cfo_hz,
            phase_pin: sc.wl_phase,
        };
        Some(transceive(sc, trial, &job, grid, idle_wl)?)
    } else {
        None
    };

    // Detection failure on any participating link: the frame is lost and all
    // its bits are counted as errors (pessimistic).
    let any_failed = plc_rx.as_ref().map_or(false, |r| r.detect_failed)
        || wl_rx.as_ref().map_or(false, |r| r.detect_failed);
    if any_failed {
        return Ok(TrialOutcome {
            bit_errors: info_len as u64,
            bits: info_len as u64,
        });
    }

    let combined = match sc.scheme {
        Scheme::PlcOnly => link_llrs(sc, plc_rx.as_ref().unwrap(), sc.plc_modulation, Link::Plc)?,
        Scheme::WlOnly => link_llrs(sc, wl_rx.as_ref().unwrap(), sc.wl_modulation, Link::Wireless)?,
        Scheme::Trsd => {
            let p = link_llrs(sc, plc_rx.as_ref().unwrap(), Modulation::BpskCoherent, Link::Plc)?;
            let w = link_llrs(
                sc,
                wl_rx.as_ref().unwrap(),
                Modulation::BpskCoherent,
                Link::Wireless,
            )?;
            trsd_llrs(&p, &w, mask.as_ref().unwrap(), sc.ofdm_plc.n_active())
        }
        _ => {
            let p = link_llrs(sc, plc_rx.as_ref().unwrap(), sc.plc_modulation, Link::Plc)?;
            let w = link_llrs(sc, wl_rx.as_ref().unwrap(), sc.wl_modulation, Link::Wireless)?;
            match sc.scheme {
                Scheme::Asc => combining::combine_asc(&p, &w)?,
                Scheme::Isc => combining::combine_isc(&p, &w)?,
                Scheme::Psdc => combining::combine_psdc(&p, &w)?,
                Scheme::Egc => combining::egc_combine(&p, &w)?,
                Scheme::Dssc => combining::dssc_combine(&p, &w)?,
                Scheme::Mixed => combining::mixed_combine(&w, &p)?,
                _ => unreachable!(),
            }
        }
    };

    let decoded: Vec<u8> = if sc.fec {
        let deint = deinterleave(&combined.llrs, rows)?;
        viterbi_decode(&deint, &code_cfg)?
    } else {
        combined.llrs.iter().map(|&l| u8::from(l < 0.0)).collect()
    };
    let bit_errors = decoded
        .iter()
        .zip(&info)
        .filter(|(a, b)| a != b)
        .count() as u64;
    Ok(TrialOutcome {
        bit_errors,
        bits: info_len as u64,
    })
}

const TRIAL_BATCH: u64 = 32;

/// Run trials at one Eb/N0 until the stop rule fires. Batched so the output
/// is byte-identical for any worker count.
pub fn run_point(sc: &Scenario, ebno_db: f64) -> Result<BerPoint> {
    let mut errors = 0u64;
    let mut bits = 0u64;
    let mut next_trial = 0u64;
    while errors < sc.stop.min_errors && bits < sc.stop.max_bits {
        let results: Vec<Result<TrialOutcome>> = (next_trial..next_trial + TRIAL_BATCH)
            .into_par_iter()
            .map(|t| run_trial(sc, ebno_db, t))
            .collect();
        for r in results {
            let out = r?;
            errors += out.bit_errors;
            bits += out.bits;
        }
        next_trial += TRIAL_BATCH;
    }
    Ok(BerPoint::new(sc.scheme, ebno_db, bits, errors))
}

/// Run the whole sweep; one BER point per Eb/N0 in order.
pub fn run_sweep(sc: &Scenario) -> Result<Vec<BerPoint>> {
    sc.validate()?;
    sc.sweep.iter().map(|&e| run_point(sc, e)).collect()
}
