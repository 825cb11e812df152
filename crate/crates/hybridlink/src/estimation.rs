//! Receiver-side estimators feeding the combiners: least-squares channel
//! estimation from the preamble, per-region noise PSD estimation, and
//! instantaneous noise power (genie and decision-directed residual).

use crate::error::{Error, Result};
use crate::ofdm::SymbolGrid;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateSource {
    Genie,
    LsPreamble,
}

/// Per-active-subcarrier channel estimate.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub gains: Vec<Complex64>,
    pub source: EstimateSource,
}

/// Least-squares channel estimate averaged over all preamble symbols:
/// H_k = mean_s Y[s,k] / X[s,k]. Estimated once per frame.
pub fn ls_channel_estimate(
    received: &SymbolGrid,
    known: &SymbolGrid,
) -> Result<ChannelEstimate> {
    if received.n_symbols() != known.n_symbols() || received.n_active() != known.n_active() {
        return Err(Error::Framing(format!(
            "received {}x{} and known {}x{} preamble grids differ",
            received.n_symbols(),
            received.n_active(),
            known.n_symbols(),
            known.n_active()
        )));
    }
    if received.n_symbols() == 0 {
        return Err(Error::Framing("need at least one preamble symbol".into()));
    }
    let n = received.n_active();
    let mut gains = vec![Complex64::default(); n];
    for s in 0..received.n_symbols() {
        for k in 0..n {
            let x = known.get(s, k);
            if x.norm_sqr() == 0.0 {
                return Err(Error::Domain(format!(
                    "known preamble cell ({s},{k}) is zero"
                )));
            }
            gains[k] += received.get(s, k) / x;
        }
    }
    let inv = 1.0 / received.n_symbols() as f64;
    for g in &mut gains {
        *g *= inv;
    }
    Ok(ChannelEstimate {
        gains,
        source: EstimateSource::LsPreamble,
    })
}

/// Per-region noise PSD estimate from received data symbols:
/// psd[r][k] = max(0, mean over symbols in region r of |Y[s,k]|^2 minus the
/// average channel power |H_k|^2 * Es). Regions with no symbols yield `None`.
pub fn noise_psd_estimate(
    grids: &SymbolGrid,
    region_of_symbol: &[usize],
    n_regions: usize,
    channel_power: &[f64],
) -> Result<Vec<Option<Vec<f64>>>> {
    if region_of_symbol.len() != grids.n_symbols() {
        return Err(Error::Framing(format!(
            "{} region labels for {} symbols",
            region_of_symbol.len(),
            grids.n_symbols()
        )));
    }
    if channel_power.len() != grids.n_active() {
        return Err(Error::Framing(
            "channel power vector does not match active set".into(),
        ));
    }
    let n = grids.n_active();
    let mut acc = vec![vec![0.0f64; n]; n_regions];
    let mut count = vec![0usize; n_regions];
    for (s, &r) in region_of_symbol.iter().enumerate() {
        if r >= n_regions {
            return Err(Error::Framing(format!("region label {r} out of range")));
        }
        count[r] += 1;
        for k in 0..n {
            acc[r][k] += grids.get(s, k).norm_sqr();
        }
    }
    Ok((0..n_regions)
        .map(|r| {
            if count[r] == 0 {
                None
            } else {
                Some(
                    (0..n)
                        .map(|k| (acc[r][k] / count[r] as f64 - channel_power[k]).max(0.0))
                        .collect(),
                )
            }
        })
        .collect())
}

/// Exact per-cell noise power from the generated noise itself (genie mode):
/// |N[s,k]|^2, symbol-major.
pub fn instantaneous_noise_power_genie(noise_grid: &SymbolGrid) -> Vec<f64> {
    noise_grid.cells().iter().map(|c| c.norm_sqr()).collect()
}

/// Decision-directed residual estimate: |Y[s,k] - H_k * X_hat[s,k]|^2 with
/// the per-cell BPSK hard decision X_hat = sign(Re(conj(H_k) Y)).
pub fn instantaneous_noise_power_residual(
    rx: &SymbolGrid,
    est: &ChannelEstimate,
) -> Result<Vec<f64>> {
    if est.gains.len() != rx.n_active() {
        return Err(Error::Framing(
            "channel estimate does not match active set".into(),
        ));
    }
    let n = rx.n_active();
    let mut out = Vec::with_capacity(rx.n_symbols() * n);
    for s in 0..rx.n_symbols() {
        for k in 0..n {
            let y = rx.get(s, k);
            let h = est.gains[k];
            let hard = if (h.conj() * y).re >= 0.0 { 1.0 } else { -1.0 };
            out.push((y - h * hard).norm_sqr());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{white_sample, NoiseModel};
    use crate::ofdm::{demodulate, modulate, OfdmConfig, SymbolGrid};
    use crate::signal::{ComplexFrame, RngStream};

    fn bpsk_grid(s: usize, k: usize, seed: u64) -> SymbolGrid {
        let mut rng = RngStream::new(seed, 0);
        let mut g = SymbolGrid::new(s, k);
        for c in g.cells_mut() {
            *c = Complex64::new(if rng.bit() == 0 { 1.0 } else { -1.0 }, 0.0);
        }
        g
    }

    #[test]
    fn ls_exact_in_noiseless_channel() {
        let known = bpsk_grid(9, 8, 1);
        let h = Complex64::from_polar(2.0, std::f64::consts::FRAC_PI_4);
        let mut rx = known.clone();
        for c in rx.cells_mut() {
            *c *= h;
        }
        let est = ls_channel_estimate(&rx, &known).unwrap();
        for g in &est.gains {
            assert!((g - h).norm() < 1e-12);
        }
    }

    #[test]
    fn ls_variance_scales_with_symbol_count() {
        // Estimator variance per bin ~ sigma^2 / n_symbols.
        let sigma_sq: f64 = 0.5;
        let trials = 10_000;
        let mut mse1 = 0.0;
        let mut mse9 = 0.0;
        let mut noise_stream = RngStream::new(7, 0);
        for t in 0..trials {
            for (n_sym, mse) in [(1usize, &mut mse1), (9usize, &mut mse9)] {
                let known = bpsk_grid(n_sym, 4, 100 + t);
                let mut rx = known.clone();
                for c in rx.cells_mut() {
                    *c += noise_stream.standard_complex() * sigma_sq.sqrt();
                }
                let est = ls_channel_estimate(&rx, &known).unwrap();
                *mse += (est.gains[0] - Complex64::new(1.0, 0.0)).norm_sqr();
            }
        }
        mse1 /= trials as f64;
        mse9 /= trials as f64;
        assert!((mse1 - sigma_sq).abs() < 0.2 * sigma_sq, "mse1 {mse1}");
        assert!(
            (mse9 - sigma_sq / 9.0).abs() < 0.2 * sigma_sq / 9.0,
            "mse9 {mse9}"
        );
        let ratio = mse1 / mse9;
        assert!((ratio - 9.0).abs() < 9.0 * 0.2, "MSE ratio {ratio}");
    }

    #[test]
    fn psd_zero_in_noiseless_case() {
        let grid = bpsk_grid(20, 6, 2);
        let psd = noise_psd_estimate(&grid, &vec![0; 20], 1, &vec![1.0; 6]).unwrap();
        let p = psd[0].as_ref().unwrap();
        assert!(p.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn psd_recovers_awgn_variance() {
        // Per-bin |Y|^2 has variance 3 for sigma^2 = 1, so 2000 symbols put
        // the per-bin estimate within ~10% at 2.6 sigma.
        let n_sym = 2000;
        let cfg = OfdmConfig::default();
        let tx = bpsk_grid(n_sym, cfg.n_active(), 3);
        let frame = modulate(&tx, &cfg).unwrap();
        let mut stream = RngStream::new(4, 0);
        let noise = white_sample(frame.len(), 1.0, &mut stream);
        let rx_samples: Vec<Complex64> = frame
            .data
            .iter()
            .zip(&noise.samples)
            .map(|(a, b)| a + b)
            .collect();
        let rx = demodulate(&ComplexFrame::time(rx_samples), &cfg).unwrap();
        let psd = noise_psd_estimate(&rx, &vec![0; n_sym], 1, &vec![1.0; cfg.n_active()]).unwrap();
        let p = psd[0].as_ref().unwrap();
        for &v in p {
            assert!((v - 1.0).abs() < 0.15, "psd bin {v}");
        }
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        assert!((mean - 1.0).abs() < 0.03, "psd mean {mean}");
    }

    #[test]
    fn wireless_psd_flat_across_bins() {
        // Stationary GM noise: per-bin PSD constant and equal to the variance.
        let cfg = OfdmConfig::default();
        let model = NoiseModel::GaussianMixture(crate::noise::GmParams::default_impulsive(0.1));
        let psd = model.psd(0, &cfg);
        let p0 = psd[0];
        assert!(psd.iter().all(|&v| (v - p0).abs() < 1e-12));
        assert!((p0 - model.avg_power()).abs() < 1e-12);
    }

    #[test]
    fn empty_region_unavailable() {
        let grid = bpsk_grid(5, 4, 5);
        let psd = noise_psd_estimate(&grid, &vec![0; 5], 2, &vec![1.0; 4]).unwrap();
        assert!(psd[0].is_some());
        assert!(psd[1].is_none());
    }

    #[test]
    fn genie_matches_actual_noise() {
        let g = bpsk_grid(3, 4, 6);
        let inst = instantaneous_noise_power_genie(&g);
        for (v, c) in inst.iter().zip(g.cells()) {
            assert_eq!(*v, c.norm_sqr());
        }
    }

    #[test]
    fn residual_zero_when_noiseless() {
        let tx = bpsk_grid(4, 5, 7);
        let est = ChannelEstimate {
            gains: vec![Complex64::new(1.0, 0.0); 5],
            source: EstimateSource::Genie,
        };
        let res = instantaneous_noise_power_residual(&tx, &est).unwrap();
        assert!(res.iter().all(|&v| v < 1e-24));
    }

    #[test]
    fn residual_tracks_genie_at_moderate_snr() {
        // Correlation between residual and genie instantaneous power over
        // 10^4 cells at Eb/N0 = 6 dB (impulsive mixture).
        let cfg = OfdmConfig {
            symbols_per_frame: 280,
            ..OfdmConfig::default()
        };
        let n_sym = 280;
        let tx = bpsk_grid(n_sym, cfg.n_active(), 8);
        let frame = modulate(&tx, &cfg).unwrap();
        let sigma_sq = 10f64.powf(-0.6); // Eb/N0 = 6 dB uncoded BPSK
        let gm = crate::noise::GmParams {
            weights: vec![0.9, 0.1],
            variances: vec![sigma_sq / 10.9, 100.0 * sigma_sq / 10.9],
        };
        let mut stream = RngStream::new(9, 0);
        let noise = crate::noise::gm_sample(frame.len(), &gm, &mut stream).unwrap();
        let rx_samples: Vec<Complex64> = frame
            .data
            .iter()
            .zip(&noise.samples)
            .map(|(a, b)| a + b)
            .collect();
        let rx = demodulate(&ComplexFrame::time(rx_samples), &cfg).unwrap();
        let noise_grid = demodulate(&ComplexFrame::time(noise.samples.clone()), &cfg).unwrap();
        let est = ChannelEstimate {
            gains: vec![Complex64::new(1.0, 0.0); cfg.n_active()],
            source: EstimateSource::Genie,
        };
        let genie = instantaneous_noise_power_genie(&noise_grid);
        let resid = instantaneous_noise_power_residual(&rx, &est).unwrap();
        let n = genie.len().min(10_080);
        let (a, b) = (&genie[..n], &resid[..n]);
        let ma = a.iter().sum::<f64>() / n as f64;
        let mb = b.iter().sum::<f64>() / n as f64;
        let mut num = 0.0;
        let mut da = 0.0;
        let mut db = 0.0;
        for (x, y) in a.iter().zip(b) {
            num += (x - ma) * (y - mb);
            da += (x - ma) * (x - ma);
            db += (y - mb) * (y - mb);
        }
        let corr = num / (da * db).sqrt();
        assert!(corr > 0.8, "residual/genie correlation {corr}");
    }
}
