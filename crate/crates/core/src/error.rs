use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("level {level} out of range 1..={n_files}")]
    LevelOutOfRange { level: usize, n_files: usize },

    #[error("caching parameter t={t} out of range [0, {k}]")]
    TOutOfRange { t: f64, k: usize },

    #[error("ratios sum to {sum}, expected 1")]
    RatiosNotNormalized { sum: f64 },

    #[error("invalid demand vector: {0}")]
    InvalidDemand(String),

    #[error("demand for file {file} lies outside the schedule window")]
    DemandOutsideWindow { file: usize },

    #[error("schedule construction failed for |R|={window}, s={fixed}, l={level}")]
    ScheduleConstruction {
        window: usize,
        fixed: usize,
        level: usize,
    },

    #[error("schedule column {column} out of range ({columns} columns)")]
    ColumnOutOfRange { column: usize, columns: usize },

    #[error("divisibility violation: {bits} bits cannot be split into {parts} equal parts")]
    Divisibility { bits: usize, parts: usize },

    #[error("subfile size F_{level}={size} is not a whole number of bits")]
    NonIntegralSize { level: usize, size: f64 },

    #[error("enumeration guard exceeded: {points} points (limit {limit})")]
    EnumerationGuard { points: u128, limit: u128 },

    #[error("user {user} cannot decode: {reason}")]
    Undecodable { user: usize, reason: String },

    #[error("fixture parse error at line {line}: {reason}")]
    Fixture { line: usize, reason: String },

    #[error("allocation infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
