//! Per-link LLR computation and the diversity rules: ASC, ISC, PSDC, TRSD,
//! DSSC, EGC and mixed coherent/differential combining.
//!
//! LLR sign convention: positive favors bit 0 (BPSK maps bit 0 to +1).
//! Bit-level combining is additive; the schemes differ in which noise
//! denominator each link's LLRs were computed with.

use crate::error::{Error, Result};
use crate::noise::NoiseStats;
use crate::ofdm::{DiffMode, SymbolGrid};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Plc,
    Wireless,
}

/// Per-coded-bit soft values from one link (or a combined pair), plus the
/// per-cell weights/denominators that produced them.
#[derive(Debug, Clone)]
pub struct LlrFrame {
    pub llrs: Vec<f64>,
    pub link: Option<Link>,
    pub weights_used: Vec<f64>,
}

impl LlrFrame {
    pub fn len(&self) -> usize {
        self.llrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.llrs.is_empty()
    }
}

/// Which denominator feeds the coherent per-cell LLR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoherentWeighting {
    /// Link-wide average noise power (ASC).
    AverageNoise,
    /// Per-cell instantaneous noise power (ISC).
    InstantaneousNoise,
    /// Per-subchannel per-region noise PSD (PSDC).
    PerRegionPsd,
}

/// Coherent BPSK log-likelihood ratio for one cell under the Gaussian
/// assumption: 4 * Re(conj(H) * Y) / sigma^2.
pub fn llr_coherent(y: Complex64, h: Complex64, var: f64) -> Result<f64> {
    if var <= 0.0 {
        return Err(Error::Domain(format!("nonpositive noise variance {var}")));
    }
    Ok(4.0 * (h.conj() * y).re / var)
}

/// Coherent per-cell LLRs for a whole received grid, symbol-major, with the
/// scheme's denominator per cell. Denominators below `floor` are clamped.
pub fn coherent_link_llrs(
    rx: &SymbolGrid,
    gains: &[Complex64],
    weighting: CoherentWeighting,
    stats: &NoiseStats,
    region_of_symbol: &[usize],
    link: Link,
    floor: f64,
) -> Result<LlrFrame> {
    let n = rx.n_active();
    if gains.len() != n {
        return Err(Error::Framing("channel gains do not match active set".into()));
    }
    if region_of_symbol.len() != rx.n_symbols() {
        return Err(Error::Framing("region labels do not match symbol count".into()));
    }
    if let CoherentWeighting::InstantaneousNoise = weighting {
        match &stats.instantaneous {
            Some(inst) if inst.len() == rx.n_symbols() * n => {}
            _ => {
                return Err(Error::Framing(
                    "instantaneous noise power missing or mis-sized".into(),
                ))
            }
        }
    }
    let mut llrs = Vec::with_capacity(rx.n_symbols() * n);
    let mut weights = Vec::with_capacity(rx.n_symbols() * n);
    for s in 0..rx.n_symbols() {
        for k in 0..n {
            let var = match weighting {
                CoherentWeighting::AverageNoise => stats.avg_power,
                CoherentWeighting::InstantaneousNoise => {
                    stats.instantaneous.as_ref().unwrap()[s * n + k]
                }
                CoherentWeighting::PerRegionPsd => stats.psd[region_of_symbol[s]][k],
            }
            .max(floor);
            llrs.push(4.0 * (gains[k].conj() * rx.get(s, k)).re / var);
            weights.push(var);
        }
    }
    Ok(LlrFrame {
        llrs,
        link: Some(link),
        weights_used: weights,
    })
}

fn combine_sum(plc: &LlrFrame, wl: &LlrFrame) -> Result<LlrFrame> {
    if plc.len() != wl.len() {
        return Err(Error::Framing(format!(
            "LLR frames differ in length: {} vs {}",
            plc.len(),
            wl.len()
        )));
    }
    let llrs = plc.llrs.iter().zip(&wl.llrs).map(|(a, b)| a + b).collect();
    Ok(LlrFrame {
        llrs,
        link: None,
        weights_used: Vec::new(),
    })
}

/// ASC: per-link LLRs weighted by average SNR (average noise power in the
/// denominator), then added bit-by-bit.
pub fn combine_asc(plc: &LlrFrame, wl: &LlrFrame) -> Result<LlrFrame> {
    combine_sum(plc, wl)
}

/// ISC: per-link LLRs with instantaneous per-cell noise power denominators,
/// then added bit-by-bit.
pub fn combine_isc(plc: &LlrFrame, wl: &LlrFrame) -> Result<LlrFrame> {
    combine_sum(plc, wl)
}

/// PSDC: per-link LLRs with per-subchannel per-region PSD denominators,
/// then added bit-by-bit.
pub fn combine_psdc(plc: &LlrFrame, wl: &LlrFrame) -> Result<LlrFrame> {
    combine_sum(plc, wl)
}

/// Equal-gain combining: the unweighted sum of per-link soft values.
pub fn egc_combine(plc: &LlrFrame, wl: &LlrFrame) -> Result<LlrFrame> {
    combine_sum(plc, wl)
}

/// Per-subcarrier transmit media selection: true selects PLC.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMask {
    pub bits: Vec<bool>,
}

/// Selection mask from per-subcarrier channel-to-noise ratios; each
/// subcarrier goes to the medium with the higher CNR, ties to PLC.
pub fn trsd_select(cnr_plc: &[f64], cnr_wl: &[f64]) -> Result<SelectionMask> {
    if cnr_plc.len() != cnr_wl.len() {
        return Err(Error::Framing("CNR vectors differ in length".into()));
    }
    if cnr_plc
        .iter()
        .chain(cnr_wl.iter())
        .any(|v| !v.is_finite() || *v < 0.0)
    {
        return Err(Error::Domain("CNRs must be finite and nonnegative".into()));
    }
    Ok(SelectionMask {
        bits: cnr_plc
            .iter()
            .zip(cnr_wl)
            .map(|(p, w)| p >= w)
            .collect(),
    })
}

/// Split a data grid onto the two media: each subcarrier's cells go at full
/// power to its selected medium, the other medium carries zero on that bin.
pub fn trsd_apply(grid: &SymbolGrid, mask: &SelectionMask) -> (SymbolGrid, SymbolGrid) {
    let mut plc = SymbolGrid::new(grid.n_symbols(), grid.n_active());
    let mut wl = SymbolGrid::new(grid.n_symbols(), grid.n_active());
    for s in 0..grid.n_symbols() {
        for k in 0..grid.n_active() {
            if mask.bits[k] {
                plc.set(s, k, grid.get(s, k));
            } else {
                wl.set(s, k, grid.get(s, k));
            }
        }
    }
    (plc, wl)
}

/// Soft values from a differentially-detected grid, data cells only
/// (reference row/column skipped), symbol-major.
pub fn diff_soft_values(detected: &SymbolGrid, mode: DiffMode) -> Vec<Complex64> {
    let mut out = Vec::new();
    match mode {
        DiffMode::Tddm => {
            for s in 1..detected.n_symbols() {
                for k in 0..detected.n_active() {
                    out.push(detected.get(s, k));
                }
            }
        }
        DiffMode::Fddm => {
            for s in 0..detected.n_symbols() {
                for k in 1..detected.n_active() {
                    out.push(detected.get(s, k));
                }
            }
        }
    }
    out
}

/// DSSC weights per data cell: |Y|/psd over the data cells of `rx`
/// (the current cell of each differential pair), floored.
pub fn dssc_weights(
    rx: &SymbolGrid,
    mode: DiffMode,
    stats: &NoiseStats,
    region_of_symbol: &[usize],
    floor: f64,
) -> Result<Vec<f64>> {
    if region_of_symbol.len() != rx.n_symbols() {
        return Err(Error::Framing("region labels do not match symbol count".into()));
    }
    let mut out = Vec::new();
    let push = |out: &mut Vec<f64>, s: usize, k: usize| {
        let psd = stats.psd[region_of_symbol[s]][k].max(floor);
        out.push(rx.get(s, k).norm() / psd);
    };
    match mode {
        DiffMode::Tddm => {
            for s in 1..rx.n_symbols() {
                for k in 0..rx.n_active() {
                    push(&mut out, s, k);
                }
            }
        }
        DiffMode::Fddm => {
            for s in 0..rx.n_symbols() {
                for k in 1..rx.n_active() {
                    push(&mut out, s, k);
                }
            }
        }
    }
    Ok(out)
}

/// Conventional average-SNR weights for differential combining:
/// |H_k|^2 / average noise power, repeated over the data cells.
pub fn asc_diff_weights(
    gains: &[Complex64],
    avg_power: f64,
    n_symbols: usize,
    mode: DiffMode,
    floor: f64,
) -> Vec<f64> {
    let denom = avg_power.max(floor);
    let mut out = Vec::new();
    match mode {
        DiffMode::Tddm => {
            for _ in 1..n_symbols {
                for g in gains {
                    out.push(g.norm_sqr() / denom);
                }
            }
        }
        DiffMode::Fddm => {
            for _ in 0..n_symbols {
                for g in gains.iter().skip(1) {
                    out.push(g.norm_sqr() / denom);
                }
            }
        }
    }
    out
}

/// Weighted soft values for one differentially-modulated link:
/// llr = w * Re(detected cell).
pub fn diff_llrs(soft: &[Complex64], weights: &[f64], link: Link) -> Result<LlrFrame> {
    if soft.len() != weights.len() {
        return Err(Error::Framing("weights do not match soft values".into()));
    }
    Ok(LlrFrame {
        llrs: soft.iter().zip(weights).map(|(d, w)| w * d.re).collect(),
        link: Some(link),
        weights_used: weights.to_vec(),
    })
}

/// Differential signal strength combining: per-link weighted differential
/// soft values (weight = |received signal| / noise PSD), added bit-by-bit.
pub fn dssc_combine(plc: &LlrFrame, wl: &LlrFrame) -> Result<LlrFrame> {
    combine_sum(plc, wl)
}

/// Mixed combining: coherently-modulated wireless LLRs plus
/// differentially-modulated PLC soft values, bit-aligned.
pub fn mixed_combine(wl_coherent: &LlrFrame, plc_diff: &LlrFrame) -> Result<LlrFrame> {
    combine_sum(plc_diff, wl_coherent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseStats;

    fn frame(llrs: Vec<f64>, link: Link) -> LlrFrame {
        LlrFrame {
            llrs,
            link: Some(link),
            weights_used: Vec::new(),
        }
    }

    #[test]
    fn llr_formula_values() {
        let one = Complex64::new(1.0, 0.0);
        assert!((llr_coherent(one, one, 1.0).unwrap() - 4.0).abs() < 1e-12);
        assert!((llr_coherent(-one, one, 2.0).unwrap() + 2.0).abs() < 1e-12);
        assert!(llr_coherent(one, one, 0.0).is_err());
    }

    #[test]
    fn llr_matches_brute_force_likelihood_ratio() {
        // ln p(y | x=+1) - ln p(y | x=-1) under CN(0, sigma^2) noise.
        let cases = [
            (Complex64::new(0.3, -0.8), Complex64::new(1.1, 0.4), 0.7),
            (Complex64::new(-1.2, 0.1), Complex64::new(0.9, -0.2), 2.3),
            (Complex64::new(0.05, 0.0), Complex64::new(0.5, 0.5), 0.1),
        ];
        for (y, h, var) in cases {
            let direct = {
                let ll = |x: f64| -(y - h * x).norm_sqr() / var;
                ll(1.0) - ll(-1.0)
            };
            let llr = llr_coherent(y, h, var).unwrap();
            assert!((llr - direct).abs() < 1e-9, "llr {llr} direct {direct}");
        }
    }

    #[test]
    fn additive_rule() {
        let c = combine_asc(
            &frame(vec![2.0], Link::Plc),
            &frame(vec![3.0], Link::Wireless),
        )
        .unwrap();
        assert_eq!(c.llrs, vec![5.0]);
    }

    #[test]
    fn dead_wireless_reduces_to_plc_only() {
        let plc = frame(vec![1.5, -0.3, 4.2], Link::Plc);
        let wl = frame(vec![0.0, 0.0, 0.0], Link::Wireless);
        let c = combine_asc(&plc, &wl).unwrap();
        assert_eq!(c.llrs, plc.llrs);
        // Holds for every additive combiner.
        assert_eq!(combine_isc(&plc, &wl).unwrap().llrs, plc.llrs);
        assert_eq!(combine_psdc(&plc, &wl).unwrap().llrs, plc.llrs);
        assert_eq!(egc_combine(&plc, &wl).unwrap().llrs, plc.llrs);
    }

    #[test]
    fn length_mismatch_is_framing_error() {
        let a = frame(vec![1.0, 2.0], Link::Plc);
        let b = frame(vec![1.0], Link::Wireless);
        assert!(combine_asc(&a, &b).is_err());
    }

    #[test]
    fn egc_commutes() {
        let a = frame(vec![1.0, -2.0], Link::Plc);
        let b = frame(vec![0.5, 0.25], Link::Wireless);
        assert_eq!(
            egc_combine(&a, &b).unwrap().llrs,
            egc_combine(&b, &a).unwrap().llrs
        );
    }

    #[test]
    fn asc_psdc_isc_coincide_under_stationary_white_noise() {
        // Under stationary AWGN all three denominators equal sigma^2, so the
        // combined LLR vectors agree to numerical identity.
        use crate::ofdm::SymbolGrid;
        use crate::signal::RngStream;
        let n_sym = 6;
        let n_act = 8;
        let var: f64 = 0.37;
        let mut rng = RngStream::new(42, 0);
        let mut rx = SymbolGrid::new(n_sym, n_act);
        for c in rx.cells_mut() {
            *c = Complex64::new(
                if rng.bit() == 0 { 1.0 } else { -1.0 },
                0.0,
            ) + rng.standard_complex() * var.sqrt();
        }
        let gains = vec![Complex64::new(1.0, 0.0); n_act];
        let stats = NoiseStats {
            avg_power: var,
            psd: vec![vec![var; n_act]],
            instantaneous: Some(vec![var; n_sym * n_act]),
        };
        let regions = vec![0usize; n_sym];
        let mk = |w| {
            coherent_link_llrs(&rx, &gains, w, &stats, &regions, Link::Plc, 1e-6).unwrap()
        };
        let asc = mk(CoherentWeighting::AverageNoise);
        let isc = mk(CoherentWeighting::InstantaneousNoise);
        let psdc = mk(CoherentWeighting::PerRegionPsd);
        for i in 0..asc.len() {
            assert!((asc.llrs[i] - isc.llrs[i]).abs() < 1e-9);
            assert!((asc.llrs[i] - psdc.llrs[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn trsd_componentwise_max() {
        let mask = trsd_select(&[3.0, 1.0], &[2.0, 2.0]).unwrap();
        assert_eq!(mask.bits, vec![true, false]);
    }

    #[test]
    fn trsd_ties_go_to_plc() {
        let mask = trsd_select(&[2.0, 2.0], &[2.0, 2.0]).unwrap();
        assert!(mask.bits.iter().all(|&b| b));
    }

    #[test]
    fn trsd_matches_exhaustive_per_subcarrier_argmax() {
        use crate::signal::RngStream;
        let mut rng = RngStream::new(7, 0);
        for _ in 0..1000 {
            let n = 12;
            let cnr_p: Vec<f64> = (0..n).map(|_| rng.uniform() * 10.0).collect();
            let cnr_w: Vec<f64> = (0..n).map(|_| rng.uniform() * 10.0).collect();
            let mask = trsd_select(&cnr_p, &cnr_w).unwrap();
            for k in 0..n {
                // Exhaustive over the two pure allocations per subcarrier.
                let best_is_plc = cnr_p[k] >= cnr_w[k];
                assert_eq!(mask.bits[k], best_is_plc);
                let achieved = if mask.bits[k] { cnr_p[k] } else { cnr_w[k] };
                assert!(achieved >= cnr_p[k] && achieved >= cnr_w[k] - 1e-15);
            }
        }
    }

    #[test]
    fn trsd_scale_invariance() {
        use crate::signal::RngStream;
        let mut rng = RngStream::new(8, 0);
        let n = 16;
        let cnr_p: Vec<f64> = (0..n).map(|_| rng.uniform() * 5.0).collect();
        let cnr_w: Vec<f64> = (0..n).map(|_| rng.uniform() * 5.0).collect();
        let base = trsd_select(&cnr_p, &cnr_w).unwrap();
        for c in [0.01, 3.7, 1000.0] {
            let sp: Vec<f64> = cnr_p.iter().map(|v| v * c).collect();
            let sw: Vec<f64> = cnr_w.iter().map(|v| v * c).collect();
            assert_eq!(trsd_select(&sp, &sw).unwrap(), base);
        }
    }

    #[test]
    fn trsd_apply_partitions_energy() {
        use crate::ofdm::SymbolGrid;
        let mut grid = SymbolGrid::new(2, 3);
        for c in grid.cells_mut() {
            *c = Complex64::new(1.0, 0.0);
        }
        let mask = SelectionMask {
            bits: vec![true, false, true],
        };
        let (plc, wl) = trsd_apply(&grid, &mask);
        for s in 0..2 {
            for k in 0..3 {
                let total = plc.get(s, k) + wl.get(s, k);
                assert_eq!(total, grid.get(s, k));
                assert!(plc.get(s, k).norm() * wl.get(s, k).norm() == 0.0);
            }
        }
        // All-PLC mask zeroes the wireless grid.
        let all = SelectionMask {
            bits: vec![true; 3],
        };
        let (_, wl) = trsd_apply(&grid, &all);
        assert!(wl.cells().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn dssc_weight_ratio() {
        use crate::ofdm::SymbolGrid;
        // |Y| = 2 on PLC, |Y| = 1 on wireless, same PSD: PLC weight double.
        let mut plc_rx = SymbolGrid::new(2, 1);
        plc_rx.set(0, 0, Complex64::new(2.0, 0.0));
        plc_rx.set(1, 0, Complex64::new(2.0, 0.0));
        let mut wl_rx = SymbolGrid::new(2, 1);
        wl_rx.set(0, 0, Complex64::new(1.0, 0.0));
        wl_rx.set(1, 0, Complex64::new(1.0, 0.0));
        let stats = NoiseStats {
            avg_power: 1.0,
            psd: vec![vec![1.0]],
            instantaneous: None,
        };
        let wp = dssc_weights(&plc_rx, DiffMode::Tddm, &stats, &[0, 0], 1e-6).unwrap();
        let ww = dssc_weights(&wl_rx, DiffMode::Tddm, &stats, &[0, 0], 1e-6).unwrap();
        assert!((wp[0] / ww[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dssc_with_equal_weights_is_egc() {
        let soft = vec![Complex64::new(0.8, 0.1), Complex64::new(-1.2, 0.3)];
        let w = vec![1.0, 1.0];
        let a = diff_llrs(&soft, &w, Link::Plc).unwrap();
        let b = diff_llrs(&soft, &w, Link::Wireless).unwrap();
        let dssc = dssc_combine(&a, &b).unwrap();
        let egc = egc_combine(&a, &b).unwrap();
        assert_eq!(dssc.llrs, egc.llrs);
    }

    #[test]
    fn mixed_degenerate_branches() {
        let wl = frame(vec![1.0, -2.0], Link::Wireless);
        let plc_zero = frame(vec![0.0, 0.0], Link::Plc);
        assert_eq!(mixed_combine(&wl, &plc_zero).unwrap().llrs, wl.llrs);
        let plc = frame(vec![0.5, 0.25], Link::Plc);
        let wl_zero = frame(vec![0.0, 0.0], Link::Wireless);
        assert_eq!(mixed_combine(&wl_zero, &plc).unwrap().llrs, plc.llrs);
    }
}
