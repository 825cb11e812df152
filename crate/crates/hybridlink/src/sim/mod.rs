//! Monte Carlo experiment driver: scenario description, seeded trial
//! execution, sweep aggregation, and gain reporting.

pub mod config;
pub mod report;
pub mod runner;

use crate::channel::PlcChannelSpec;
use crate::error::{Error, Result};
use crate::noise::{CycloParams, GmParams, NoiseModel};
use crate::ofdm::{DiffMode, OfdmConfig};
use crate::sync::SyncConfig;

/// Diversity/combining scheme under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    PlcOnly,
    WlOnly,
    Asc,
    Isc,
    Psdc,
    Trsd,
    Dssc,
    Mixed,
    Egc,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::PlcOnly => "plc_only",
            Scheme::WlOnly => "wl_only",
            Scheme::Asc => "asc",
            Scheme::Isc => "isc",
            Scheme::Psdc => "psdc",
            Scheme::Trsd => "trsd",
            Scheme::Dssc => "dssc",
            Scheme::Mixed => "mixed",
            Scheme::Egc => "egc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "plc_only" => Scheme::PlcOnly,
            "wl_only" => Scheme::WlOnly,
            "asc" => Scheme::Asc,
            "isc" => Scheme::Isc,
            "psdc" => Scheme::Psdc,
            "trsd" => Scheme::Trsd,
            "dssc" => Scheme::Dssc,
            "mixed" => Scheme::Mixed,
            "egc" => Scheme::Egc,
            other => return Err(Error::Config(format!("unknown scheme '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    BpskCoherent,
    DbpskTddm,
    DbpskFddm,
}

impl Modulation {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "bpsk_coherent" => Modulation::BpskCoherent,
            "dbpsk_tddm" => Modulation::DbpskTddm,
            "dbpsk_fddm" => Modulation::DbpskFddm,
            other => return Err(Error::Config(format!("unknown modulation '{other}'"))),
        })
    }

    pub fn diff_mode(&self) -> Option<DiffMode> {
        match self {
            Modulation::BpskCoherent => None,
            Modulation::DbpskTddm => Some(DiffMode::Tddm),
            Modulation::DbpskFddm => Some(DiffMode::Fddm),
        }
    }

    /// OFDM symbols occupied by `data_symbols` data-bearing symbols.
    pub fn grid_symbols(&self, data_symbols: usize) -> usize {
        match self {
            Modulation::DbpskTddm => data_symbols + 1,
            _ => data_symbols,
        }
    }

    /// Data cells carried per frame.
    pub fn data_cells(&self, data_symbols: usize, n_active: usize) -> usize {
        match self {
            Modulation::BpskCoherent | Modulation::DbpskTddm => data_symbols * n_active,
            Modulation::DbpskFddm => data_symbols * (n_active - 1),
        }
    }
}

/// Genie receivers bypass sync and estimation with ground truth; realistic
/// receivers run the full acquisition and estimation chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiverMode {
    Genie,
    Realistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub min_errors: u64,
    pub max_bits: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            min_errors: 100,
            max_bits: 100_000_000,
        }
    }
}

/// Complete description of one simulation run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub seed: u64,
    pub scheme: Scheme,
    /// PLC-link Eb/N0 sweep in dB (applies to the wireless link for the
    /// wl_only scheme, which has no PLC axis).
    pub sweep: Vec<f64>,
    pub wl_ebno_db: f64,
    pub fec: bool,
    pub receiver: ReceiverMode,
    pub stop: StopRule,
    /// Data-bearing OFDM symbols per frame.
    pub data_symbols: usize,
    /// Block-interleaver rows; 0 selects the per-symbol data cell count.
    pub interleaver_rows: usize,
    pub ofdm_plc: OfdmConfig,
    pub ofdm_wl: OfdmConfig,
    pub plc_modulation: Modulation,
    pub wl_modulation: Modulation,
    pub plc_channel: PlcChannelSpec,
    /// Rayleigh tap count for the wireless channel.
    pub wl_taps: usize,
    /// Noise model shapes; absolute levels come from Eb/N0 calibration.
    pub plc_noise: NoiseModel,
    pub wl_noise: NoiseModel,
    /// AC phase in samples; None randomizes per trial.
    pub plc_phase: Option<usize>,
    pub wl_phase: Option<usize>,
    /// Injected wireless carrier offset (realistic receivers estimate it).
    pub wl_cfo_hz: f64,
    pub sync: SyncConfig,
    pub n_syncp: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        let ofdm = OfdmConfig::default();
        Self {
            seed: 1,
            scheme: Scheme::Psdc,
            sweep: Vec::new(),
            wl_ebno_db: 3.0,
            fec: true,
            receiver: ReceiverMode::Genie,
            stop: StopRule::default(),
            data_symbols: 40,
            interleaver_rows: 0,
            ofdm_plc: ofdm.clone(),
            ofdm_wl: ofdm,
            plc_modulation: Modulation::BpskCoherent,
            wl_modulation: Modulation::BpskCoherent,
            plc_channel: PlcChannelSpec::Preset("lowpass3".into()),
            wl_taps: 4,
            plc_noise: NoiseModel::Cyclostationary(CycloParams::default_impulsive(
                400_000.0, 60.0, 1.0,
            )),
            wl_noise: NoiseModel::GaussianMixture(GmParams::default_impulsive(1.0)),
            plc_phase: None,
            wl_phase: None,
            wl_cfo_hz: 0.0,
            sync: SyncConfig::default(),
            n_syncp: 8,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.sweep.is_empty() {
            return Err(Error::Config("sweep must list at least one Eb/N0".into()));
        }
        if self.stop.min_errors == 0 || self.stop.max_bits == 0 {
            return Err(Error::Config("stop rule terms must be positive".into()));
        }
        self.ofdm_plc.validate()?;
        self.ofdm_wl.validate()?;
        self.plc_noise.validate()?;
        self.wl_noise.validate()?;
        if self.data_symbols == 0 {
            return Err(Error::Config("frame.data_symbols must be positive".into()));
        }
        let plc_cells = self
            .plc_modulation
            .data_cells(self.data_symbols, self.ofdm_plc.n_active());
        let wl_cells = self
            .wl_modulation
            .data_cells(self.data_symbols, self.ofdm_wl.n_active());
        if plc_cells != wl_cells {
            return Err(Error::Config(format!(
                "links carry different bit counts per frame ({plc_cells} vs {wl_cells}); \
                 adjust modulation or active sets for equal bit rate"
            )));
        }
        if plc_cells == 0 {
            return Err(Error::Config("frame carries no data cells".into()));
        }
        match self.scheme {
            Scheme::Dssc => {
                if self.plc_modulation == Modulation::BpskCoherent
                    || self.wl_modulation == Modulation::BpskCoherent
                {
                    return Err(Error::Config(
                        "dssc requires differential modulation on both links".into(),
                    ));
                }
            }
            Scheme::Mixed => {
                if self.wl_modulation != Modulation::BpskCoherent
                    || self.plc_modulation == Modulation::BpskCoherent
                {
                    return Err(Error::Config(
                        "mixed requires a coherent wireless link and a differential PLC link"
                            .into(),
                    ));
                }
            }
            Scheme::Trsd => {
                if self.plc_modulation != Modulation::BpskCoherent
                    || self.wl_modulation != Modulation::BpskCoherent
                {
                    return Err(Error::Config("trsd requires coherent modulation".into()));
                }
                if self.ofdm_plc.n_active() != self.ofdm_wl.n_active() {
                    return Err(Error::Config(
                        "trsd requires equal active subcarrier counts".into(),
                    ));
                }
            }
            _ => {}
        }
        let coded = plc_cells;
        if self.fec {
            if coded % 2 != 0 || coded / 2 <= 6 {
                return Err(Error::Config(format!(
                    "coded frame length {coded} incompatible with the rate-1/2 zero-tail code"
                )));
            }
            let rows = self.interleaver_rows_effective();
            if coded % rows != 0 {
                return Err(Error::Config(format!(
                    "interleaver rows {rows} do not divide coded length {coded}"
                )));
            }
        }
        if self.n_syncp != 8 && self.n_syncp != 12 {
            return Err(Error::Config("sync.n_syncp must be 8 or 12".into()));
        }
        Ok(())
    }

    /// Interleaver rows, defaulting to the per-symbol data cell count so that
    /// adjacent coded bits land in different OFDM symbols.
    pub fn interleaver_rows_effective(&self) -> usize {
        if self.interleaver_rows != 0 {
            return self.interleaver_rows;
        }
        match self.plc_modulation {
            Modulation::DbpskFddm => self.ofdm_plc.n_active() - 1,
            _ => self.ofdm_plc.n_active(),
        }
    }

    /// Coded bits per frame (equals data cells per link).
    pub fn coded_bits(&self) -> usize {
        self.plc_modulation
            .data_cells(self.data_symbols, self.ofdm_plc.n_active())
    }

    /// Information bits per frame.
    pub fn info_bits(&self) -> usize {
        if self.fec {
            self.coded_bits() / 2 - 6
        } else {
            self.coded_bits()
        }
    }
}

/// One point of a BER curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub scheme: Scheme,
    pub ebno_db: f64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub ci95_halfwidth: f64,
}

impl BerPoint {
    pub fn new(scheme: Scheme, ebno_db: f64, bits: u64, bit_errors: u64) -> Self {
        let ber = bit_errors as f64 / bits as f64;
        let ci95_halfwidth = 1.96 * (ber * (1.0 - ber) / bits as f64).sqrt();
        Self {
            scheme,
            ebno_db,
            bits,
            bit_errors,
            ber,
            ci95_halfwidth,
        }
    }

    /// Whether the 95% confidence intervals of two points overlap.
    pub fn ci_overlaps(&self, other: &BerPoint) -> bool {
        (self.ber - other.ber).abs() <= self.ci95_halfwidth + other.ci95_halfwidth
    }
}
