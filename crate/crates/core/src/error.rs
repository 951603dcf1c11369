use thiserror::Error;

/// Errors produced by the physics pipeline, the predictors and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("negative discriminant {0:e}: the ball never reaches the table plane")]
    NegativeDiscriminant(f64),

    #[error("remaining-time gradient is singular (discriminant {0:e})")]
    SingularGradient(f64),

    #[error("flight did not reach the table within {0} steps")]
    MaxStepsExceeded(usize),

    #[error("post-impact ball at z = {z:.4} m starts below the table plane z = {table:.4} m")]
    BelowTable { z: f64, table: f64 },

    #[error("ball never crosses azimuth {0:.4} rad")]
    NoCrossing(f64),

    #[error("interception point at distance {distance:.4} m is outside reach [{min:.4}, {max:.4}] m")]
    OutOfReach { distance: f64, min: f64, max: f64 },

    #[error("dataset is degenerate: {0}")]
    DegenerateDataset(String),

    #[error("miss rate {rate:.3} exceeds the allowed maximum")]
    InfeasibleRegion { rate: f64 },

    #[error("run aborted after {0} consecutive missed interceptions")]
    AbortedRun(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed file {path}: {msg}")]
    Format { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Interception failures the online loop treats as a missed ball.
    pub fn is_miss(&self) -> bool {
        matches!(
            self,
            Error::NoCrossing(_)
                | Error::OutOfReach { .. }
                | Error::BelowTable { .. }
                | Error::NegativeDiscriminant(_)
                | Error::MaxStepsExceeded(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
