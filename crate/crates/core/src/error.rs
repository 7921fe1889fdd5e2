use std::fmt;

use crate::sequence::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid sequence {id}: {}", DisplayList(.violations))]
    InvalidSequence { id: String, violations: Vec<Violation> },

    #[error("retention factor must lie in (0, 1], got {0}")]
    RetentionOutOfRange(f64),

    #[error("observation interval [{0}, {1}] is empty or not finite")]
    BadInterval(f64, f64),

    #[error("event at t = {t} lies outside the observation interval [{lo}, {hi}]")]
    OutsideInterval { t: f64, lo: f64, hi: f64 },

    #[error("grid coarsening needs at least 2 cells but the retention factor gives {cells}; use cluster mode")]
    GridInapplicable { cells: usize },

    #[error("cannot cluster {points} points into {k} clusters")]
    BadClusterCount { points: usize, k: usize },

    #[error("sequence has {0} event(s); at least 2 are needed to form intervals")]
    NoIntervals(usize),

    #[error("requested {requested} intervals but only {available} carry nonzero weight")]
    SamplingExhausted { requested: usize, available: usize },

    #[error("p_high must lie in [0, 1), got {0}")]
    BadPHigh(f64),

    #[error("variable {0} has no observed training values")]
    UnfitVariable(usize),

    #[error("ordinal level {level} out of range 1..={levels}")]
    LevelOutOfRange { level: usize, levels: usize },

    #[error("ordinal levels must be finite and strictly increasing")]
    BadLevels,

    #[error("negative time gap {0}")]
    NegativeGap(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0} is undefined when only one class is present")]
    SingleClass(&'static str),

    #[error("{0} is undefined for zero-variance input")]
    ZeroVariance(&'static str),

    #[error("metric inputs are empty or have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("bootstrap gave up after {0} consecutive degenerate resamples")]
    BootstrapExhausted(usize),

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("label does not match the task: {0}")]
    LabelMismatch(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by numerical breakdown rather than bad data.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Diverged { .. } | Error::BootstrapExhausted(_))
    }

    /// True for out-of-range settings supplied by the caller.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::RetentionOutOfRange(_) | Error::BadPHigh(_) | Error::BadInterval(..)
        )
    }
}

struct DisplayList<'a, T>(&'a [T]);

impl<T: fmt::Display> fmt::Display for DisplayList<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, item) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{item}")?;
        }
        Ok(())
    }
}
