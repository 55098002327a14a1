//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Every log-weight is negative infinity, so no normalization exists.
    /// Signals total weight degeneracy or a model/data mismatch.
    #[error("all particle weights are zero (every log-weight is -inf)")]
    AllWeightsZero,

    /// Weight degeneracy detected while advancing the particle system.
    #[error("particle system degenerated at time {time}: all weights are zero")]
    DegenerateAt { time: usize },

    /// A transition was requested past the end of the observation record.
    #[error("no observation available for time {requested} (record holds {available})")]
    ObservationsExhausted { requested: usize, available: usize },

    /// A parameter violates a documented invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Path evaluation needs at least one state.
    #[error("additive functional evaluated on an empty path")]
    EmptyPath,

    /// Schedule factor needs at least one selection entry.
    #[error("schedule factor evaluated on an empty schedule")]
    EmptySchedule,

    /// Sample variance across replicates needs at least two runs.
    #[error("need at least 2 replicates for variance statistics, got {got}")]
    NotEnoughReplicates { got: usize },

    /// Schedule statistics are undefined without any resampling event.
    #[error("schedule statistics undefined: no resampling events in any trace")]
    NoResamplingEvents,

    /// A benchmark replicate failed; the index identifies the seed offset.
    #[error("replicate {index} failed: {source}")]
    ReplicateFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed observation or trajectory CSV.
    #[error("csv parse error at line {line}: {message}")]
    Csv { line: usize, message: String },
}
