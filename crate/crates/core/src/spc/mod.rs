//! Distribution-free Phase I and Phase II control charts over spectra.

mod changepoint;
mod phase1;
mod phase2;
pub mod ranks;
mod report;
mod series;

use thiserror::Error;

pub use changepoint::{changepoint_trace, estimate_changepoint};
pub use phase1::{phase1_test, FlaggedVariable, Phase1Result};
pub use phase2::{calibrate_limit, charting_statistics, chart_with_limit, phase2_chart, Calibration, Phase2Options, Phase2Result};
pub use report::{write_phase1_csv, write_phase1_summary, write_phase2_csv};
pub use series::{Phase, SpectraSeries};

#[derive(Debug, Error, PartialEq)]
pub enum SpcError {
    #[error("empty series")]
    Empty,
    #[error("row {row} has {len} values, expected {expected}")]
    RaggedRow { row: usize, len: usize, expected: usize },
    #[error("{labels} part labels for {rows} rows")]
    LabelCount { labels: usize, rows: usize },
    #[error("row {row} contains a non-finite value")]
    NonFinite { row: usize },
    #[error("{m} observations are too few for {p} variables")]
    InsufficientObservations { m: usize, p: usize },
    #[error("{0}")]
    InvalidParameter(String),
    #[error("reference has {reference} variables, stream has {stream}")]
    DimensionMismatch { reference: usize, stream: usize },
}
