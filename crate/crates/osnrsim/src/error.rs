//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument violated a domain precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// Modem implementation noise meets or exceeds the total measured
    /// noise, so no external SNR can be extracted.
    #[error("implementation noise exceeds total noise (EC·ESNR = {ec_esnr:.4}, SNR_imp = {snr_imp:.4})")]
    ImplementationNoiseExceedsTotal { ec_esnr: f64, snr_imp: f64 },

    /// The nonlinear SNR is at or below the external SNR, which would
    /// imply non-positive ASE noise.
    #[error("non-physical nonlinear SNR (SNR_NL {snr_nl:.4} <= SNR_ext {snr_ext:.4})")]
    NonPhysicalNonlinearSnr { snr_nl: f64, snr_ext: f64 },

    /// A sampled scenario cannot be realized (e.g. the delivered SNR
    /// is already below the FEC threshold).
    #[error("scenario rejected: {0}")]
    ScenarioRejected(String),

    /// Configuration file or structure is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// A data file (dataset, model, frame capture) is malformed or
    /// inconsistent with what the caller expects.
    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
