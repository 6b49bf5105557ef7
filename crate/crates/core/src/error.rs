use thiserror::Error;

/// Errors produced anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid excitation sector {0}: only sectors 0, 1 and 2 exist")]
    InvalidSector(usize),

    #[error("invalid basis state: {0}")]
    InvalidState(String),

    #[error("operator lowers excitation number but sector {0} has nothing to lower")]
    EmptySector(usize),

    #[error("sector mismatch: expected sector {expected}, got {found}")]
    SectorMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("integrator failure at t = {time}: {reason}")]
    IntegratorFailure { time: f64, reason: String },

    #[error("jump on detector {detector} is impossible: click rate is zero")]
    ImpossibleJump { detector: char },

    #[error("degenerate summary: {0}")]
    DegenerateSummary(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures caused by bad user input rather than numerics or I/O.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidSector(_) | Error::InvalidState(_) | Error::InvalidParams(_)
        )
    }

    /// True for failures of the numerical machinery.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IntegratorFailure { .. }
                | Error::ImpossibleJump { .. }
                | Error::DegenerateSummary(_)
                | Error::SectorMismatch { .. }
                | Error::EmptySector(_)
        )
    }
}
