use thiserror::Error;

/// Errors surfaced by the library and the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad parameter values, unknown presets/keys).
    #[error("configuration error: {0}")]
    Config(String),
    /// Buffer/grid dimensions do not line up.
    #[error("framing error: {0}")]
    Framing(String),
    /// A value is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An estimate cannot be produced from the data at hand.
    #[error("estimation unavailable: {0}")]
    Unavailable(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
