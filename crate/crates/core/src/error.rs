use thiserror::Error;

/// Errors raised by the grid, model, solver and diagnostics layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("blow-up at t = {time} in cell {cell} (value {value})")]
    BlowUp { time: f64, cell: usize, value: f64 },

    #[error("flux sample is not finite at x = {x:?}, u = {u}")]
    NonFiniteSample { x: [f64; 2], u: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
