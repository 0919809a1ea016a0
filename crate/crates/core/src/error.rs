use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("slot infeasible: minimum purchase {q_min} exceeds maximum {q_max}")]
    InfeasibleSlot { q_min: f64, q_max: f64 },

    #[error("non-finite price {value} at index {index}")]
    NonFinitePrice { index: usize, value: f64 },

    #[error("need at least {needed} prices, got {got}")]
    TooFewPrices { needed: usize, got: usize },

    #[error("sample size {n} out of range for history of length {len}")]
    SampleSizeOutOfRange { n: usize, len: usize },

    #[error("sigma interval undefined for zero sample spread")]
    DegenerateInterval,

    #[error("lower price bound {m_hat} is not positive")]
    NonPositiveLowerBound { m_hat: f64 },

    #[error("optimal cost {0} is not positive")]
    NonPositiveOptimalCost(f64),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("slot {slot} beyond horizon {horizon}")]
    SlotOutOfRange { slot: usize, horizon: usize },

    #[error("enumeration too large: {0}")]
    EnumerationTooLarge(String),

    #[error("model {0} cannot be used here")]
    UnsupportedModel(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("{path}: no prices found")]
    EmptySeries { path: PathBuf },

    #[error("config `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input (config, missing files),
    /// as opposed to failures while running an experiment.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::Io { .. } | Error::Parse { .. } | Error::EmptySeries { .. }
        )
    }
}
