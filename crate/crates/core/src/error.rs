use std::path::PathBuf;

use chrono::NaiveDate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: malformed field `{field}`: {reason}")]
    MalformedRow {
        line: u64,
        field: &'static str,
        reason: String,
    },

    #[error("line {line}: close price for {ticker} on {date} must be positive, got {close}")]
    NonPositivePrice {
        line: u64,
        ticker: String,
        date: NaiveDate,
        close: f64,
    },

    #[error("line {line}: duplicate record for ({date}, {ticker}), first seen on line {first_line}")]
    DuplicateRecord {
        line: u64,
        first_line: u64,
        ticker: String,
        date: NaiveDate,
    },

    #[error("input contains no records")]
    EmptyInput,

    #[error("invalid date range: start {start} must precede end {end}")]
    InvalidRange { start: NaiveDate, end: NaiveDate },

    #[error("no ticker has complete data between {start} and {end}")]
    EmptyPanel { start: NaiveDate, end: NaiveDate },

    #[error("{count} tickers cannot be split into groups of {group_size}")]
    IndivisibleGroups { count: usize, group_size: usize },

    #[error("unknown ticker `{0}`")]
    UnknownTicker(String),

    #[error("ticker `{0}` listed more than once")]
    DuplicateTicker(String),

    #[error("sector assignment is invalid: {0}")]
    InvalidSectors(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("window ending at column {end} with length {len} does not fit {columns} return columns")]
    WindowOutOfRange {
        end: usize,
        len: usize,
        columns: usize,
    },

    #[error("ticker subset is empty")]
    EmptySubset,

    #[error("ticker subset index {index} is invalid for {rows} rows (or repeated)")]
    InvalidSubset { index: usize, rows: usize },

    #[error("series of {columns} returns is shorter than the window length {window}")]
    SeriesTooShort { columns: usize, window: usize },

    #[error("matrix is not symmetric: |a[{row}][{col}] - a[{col}][{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("portfolio ({sectors},{per_sector}) is outside the {max_sectors}x{max_per_sector} grid")]
    SpecOutOfBounds {
        sectors: usize,
        per_sector: usize,
        max_sectors: usize,
        max_per_sector: usize,
    },

    #[error("trajectory lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("cluster count {k} must lie in 1..={leaves}")]
    ClusterCount { k: usize, leaves: usize },

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
