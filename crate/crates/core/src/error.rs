// Copyright 2026 The arpsim Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("norm drift {drift:e} exceeds tolerance {tol:e}; reduce dt")]
    NormDrift { drift: f64, tol: f64 },

    #[error("adiabaticity parameter undefined: Rabi frequency and detuning vanish over the whole window")]
    UndefinedAdiabaticity,

    #[error("dot {index}: {source}")]
    Dot {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("cell (phi2 = {phi2} ps², area = {area}π): {source}")]
    Cell {
        phi2: f64,
        area: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("no plateau at level {level}: map maximum is {max}")]
    ThresholdNotFound { level: f64, max: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True if the failure came from the integrator (possibly wrapped).
    pub fn is_integration_failure(&self) -> bool {
        match self {
            Error::NormDrift { .. } => true,
            Error::Dot { source, .. } | Error::Cell { source, .. } => source.is_integration_failure(),
            _ => false,
        }
    }
}
