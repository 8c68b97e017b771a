use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} lies outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid flux: {0}")]
    InvalidFlux(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("time step {dt} violates CFL limit {limit}")]
    Cfl { dt: f64, limit: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("{0}")]
    Numerical(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_range(what: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::Domain { what, value, lo, hi })
    }
}
