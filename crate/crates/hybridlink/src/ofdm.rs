//! CP-OFDM modulation/demodulation and (D)BPSK symbol grids, including
//! time-domain (TDDM) and frequency-domain (FDDM) differential variants.

use crate::error::{Error, Result};
use crate::signal::{ComplexFrame, Domain, Fft};
use num_complex::Complex64;

/// OFDM grid geometry shared by both links unless overridden per link.
///
/// Defaults follow an IEEE 1901.2 / CENELEC-A style numerology: 256-sample
/// symbols at 400 kHz with a 30-sample cyclic prefix and 36 active
/// subcarriers (bins 23..=58).
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    pub fft_size: usize,
    pub cp_len: usize,
    /// Active subcarrier indices, strictly increasing.
    pub active: Vec<usize>,
    pub sample_rate: f64,
    pub symbols_per_frame: usize,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            fft_size: 256,
            cp_len: 30,
            active: (23..=58).collect(),
            sample_rate: 400_000.0,
            symbols_per_frame: 40,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.fft_size.is_power_of_two() {
            return Err(Error::Config(format!(
                "fft_size must be a power of two, got {}",
                self.fft_size
            )));
        }
        if self.cp_len >= self.fft_size {
            return Err(Error::Config("cp_len must be < fft_size".into()));
        }
        if self.active.is_empty() {
            return Err(Error::Config("active subcarrier set is empty".into()));
        }
        if self.active.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "active subcarriers must be strictly increasing".into(),
            ));
        }
        if *self.active.last().unwrap() >= self.fft_size {
            return Err(Error::Config("active subcarrier index out of range".into()));
        }
        if self.sample_rate <= 0.0 {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        if self.symbols_per_frame == 0 {
            return Err(Error::Config("symbols_per_frame must be positive".into()));
        }
        Ok(())
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    /// Samples per CP-OFDM symbol.
    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.cp_len
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        self.sample_rate / self.fft_size as f64
    }
}

/// Constellation points per `[symbol, active subcarrier]`, row-major by symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid {
    cells: Vec<Complex64>,
    n_symbols: usize,
    n_active: usize,
}

impl SymbolGrid {
    pub fn new(n_symbols: usize, n_active: usize) -> Self {
        Self {
            cells: vec![Complex64::default(); n_symbols * n_active],
            n_symbols,
            n_active,
        }
    }

    pub fn from_cells(cells: Vec<Complex64>, n_symbols: usize, n_active: usize) -> Result<Self> {
        if cells.len() != n_symbols * n_active {
            return Err(Error::Framing(format!(
                "grid needs {} cells, got {}",
                n_symbols * n_active,
                cells.len()
            )));
        }
        Ok(Self {
            cells,
            n_symbols,
            n_active,
        })
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn n_active(&self) -> usize {
        self.n_active
    }

    pub fn get(&self, symbol: usize, sub: usize) -> Complex64 {
        self.cells[symbol * self.n_active + sub]
    }

    pub fn set(&mut self, symbol: usize, sub: usize, v: Complex64) {
        self.cells[symbol * self.n_active + sub] = v;
    }

    pub fn row(&self, symbol: usize) -> &[Complex64] {
        &self.cells[symbol * self.n_active..(symbol + 1) * self.n_active]
    }

    pub fn cells(&self) -> &[Complex64] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [Complex64] {
        &mut self.cells
    }

    fn assert_unit_modulus(&self) -> Result<()> {
        for c in &self.cells {
            if (c.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!(
                    "cell {c} is not unit-modulus"
                )));
            }
        }
        Ok(())
    }
}

/// Differential mapping direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffMode {
    /// Across successive OFDM symbols at the same subcarrier.
    Tddm,
    /// Across successive subcarriers within one OFDM symbol.
    Fddm,
}

/// CP-OFDM modulation: per symbol, place active cells in the spectrum,
/// inverse transform, prepend the cyclic prefix.
pub fn modulate(grid: &SymbolGrid, cfg: &OfdmConfig) -> Result<ComplexFrame> {
    cfg.validate()?;
    if grid.n_active() != cfg.n_active() {
        return Err(Error::Config(format!(
            "grid has {} subcarriers, config expects {}",
            grid.n_active(),
            cfg.n_active()
        )));
    }
    let fft = Fft::new(cfg.fft_size)?;
    let mut out = Vec::with_capacity(grid.n_symbols() * cfg.symbol_len());
    let mut spec = vec![Complex64::default(); cfg.fft_size];
    for s in 0..grid.n_symbols() {
        spec.fill(Complex64::default());
        for (i, &k) in cfg.active.iter().enumerate() {
            spec[k] = grid.get(s, i);
        }
        fft.inverse(&mut spec);
        out.extend_from_slice(&spec[cfg.fft_size - cfg.cp_len..]);
        out.extend_from_slice(&spec);
    }
    Ok(ComplexFrame::time(out))
}

/// CP-OFDM demodulation: strip the CP, forward transform, extract active bins.
pub fn demodulate(frame: &ComplexFrame, cfg: &OfdmConfig) -> Result<SymbolGrid> {
    cfg.validate()?;
    if frame.domain != Domain::Time {
        return Err(Error::Framing("demodulate expects a time-domain frame".into()));
    }
    let sym_len = cfg.symbol_len();
    if frame.len() % sym_len != 0 {
        return Err(Error::Framing(format!(
            "frame length {} is not a multiple of symbol length {sym_len}",
            frame.len()
        )));
    }
    let n_symbols = frame.len() / sym_len;
    let fft = Fft::new(cfg.fft_size)?;
    let mut grid = SymbolGrid::new(n_symbols, cfg.n_active());
    let mut buf = vec![Complex64::default(); cfg.fft_size];
    for s in 0..n_symbols {
        let start = s * sym_len + cfg.cp_len;
        buf.copy_from_slice(&frame.data[start..start + cfg.fft_size]);
        fft.forward(&mut buf);
        for (i, &k) in cfg.active.iter().enumerate() {
            grid.set(s, i, buf[k]);
        }
    }
    Ok(grid)
}

/// Differential encoding. The reference cell (first symbol for TDDM, first
/// active subcarrier for FDDM) is forced to one and carries no data.
pub fn diff_encode(grid: &SymbolGrid, mode: DiffMode) -> Result<SymbolGrid> {
    grid.assert_unit_modulus()?;
    let mut out = SymbolGrid::new(grid.n_symbols(), grid.n_active());
    match mode {
        DiffMode::Tddm => {
            for k in 0..grid.n_active() {
                out.set(0, k, Complex64::new(1.0, 0.0));
            }
            for s in 1..grid.n_symbols() {
                for k in 0..grid.n_active() {
                    out.set(s, k, out.get(s - 1, k) * grid.get(s, k));
                }
            }
        }
        DiffMode::Fddm => {
            for s in 0..grid.n_symbols() {
                out.set(s, 0, Complex64::new(1.0, 0.0));
                for k in 1..grid.n_active() {
                    out.set(s, k, out.get(s, k - 1) * grid.get(s, k));
                }
            }
        }
    }
    Ok(out)
}

/// Differential detection: each cell multiplied by the conjugate of its
/// reference cell. No channel estimate is used. Reference rows/columns are
/// passed through unchanged.
pub fn diff_detect(grid: &SymbolGrid, mode: DiffMode) -> SymbolGrid {
    let mut out = SymbolGrid::new(grid.n_symbols(), grid.n_active());
    match mode {
        DiffMode::Tddm => {
            for k in 0..grid.n_active() {
                out.set(0, k, grid.get(0, k));
            }
            for s in 1..grid.n_symbols() {
                for k in 0..grid.n_active() {
                    out.set(s, k, grid.get(s, k) * grid.get(s - 1, k).conj());
                }
            }
        }
        DiffMode::Fddm => {
            for s in 0..grid.n_symbols() {
                out.set(s, 0, grid.get(s, 0));
                for k in 1..grid.n_active() {
                    out.set(s, k, grid.get(s, k) * grid.get(s, k - 1).conj());
                }
            }
        }
    }
    out
}

/// Number of data-bearing cells in a grid under the given modulation.
pub fn data_cells(n_symbols: usize, n_active: usize, mode: Option<DiffMode>) -> usize {
    match mode {
        None => n_symbols * n_active,
        Some(DiffMode::Tddm) => n_symbols.saturating_sub(1) * n_active,
        Some(DiffMode::Fddm) => n_symbols * n_active.saturating_sub(1),
    }
}
