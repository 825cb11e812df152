//! Link-level simulator for hybrid NB-PLC / wireless OFDM diversity.
//!
//! The library models two parallel OFDM links carrying the same coded bits:
//! a narrowband powerline link impaired by cyclostationary impulsive noise
//! and a sub-GHz wireless link with Rayleigh block fading and Gaussian
//! mixture interference. Soft bits from both links are combined at the bit
//! level under several weighting rules (ASC, ISC, PSDC, TRSD, DSSC, EGC and
//! mixed coherent/differential), and a Monte Carlo driver sweeps Eb/N0 to
//! produce BER curves and gain reports.

pub mod channel;
pub mod combining;
pub mod error;
pub mod estimation;
pub mod fec;
pub mod noise;
pub mod ofdm;
pub mod signal;
pub mod sim;
pub mod sync;

pub use error::{Error, Result};
