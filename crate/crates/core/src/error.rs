use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A tradeoff-table query fell outside the grid while strict lookup was requested.
    #[error("table does not cover horizon {horizon_ms} ms at delta {delta_pct}% (strict lookup)")]
    TableCoverage { horizon_ms: f64, delta_pct: f64 },

    /// A tradeoff-table file failed to parse.
    #[error("table file {path}:{line}:{column}: {message}")]
    TableFormat {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    /// A loaded table violates the monotonicity invariants under strict load.
    #[error("table file {path}: {message}")]
    TableInvariant { path: String, message: String },

    /// The AR normal equations are rank deficient.
    #[error("rank-deficient normal equations: regressor at lag {lag} is degenerate")]
    RankDeficient { lag: usize },

    /// RRMSE is undefined for a truth series whose mean is zero.
    #[error("rrmse undefined: truth series has zero mean")]
    ZeroMeanTruth,

    /// Too few evaluation windows for the requested table resolution.
    #[error("insufficient windows: every cell of the {rows}x{cols} grid would have n={got} < {needed}")]
    InsufficientWindows {
        rows: usize,
        cols: usize,
        needed: usize,
        got: usize,
    },

    /// A prediction was requested with a history of the wrong length.
    #[error("history length {got} does not match the model's history_len {expected}")]
    WrongHistoryLen { expected: usize, got: usize },

    /// The optimizer's search grid is empty.
    #[error("empty search grid: {0}")]
    EmptyGrid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
