//! Statistics and tables computed from experiment results.

pub mod export;
mod stats;
mod summary;
mod survival;

use thiserror::Error;

pub use stats::{
    average_ranks, bonferroni_threshold, bootstrap_ci, bootstrap_ci_with, chi_square_independence, chi_square_sf,
    kruskal_wallis, one_sided_t, quantile_sorted, OneSidedT, TestResult,
};
pub use summary::{
    summarize, Accumulator, ArchetypeSummary, FiveNumber, GlobalSummary, HistogramBin, PsychRow, SummaryTables, TestRow,
};
pub use survival::{kaplan_meier, kaplan_meier_counts, SurvivalCurve, SurvivalPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("no observations")]
    EmptyInput,
    #[error("need at least 2 replications, got {0}")]
    InsufficientReplications(usize),
    #[error("all values are identical")]
    DegenerateInput,
    #[error("contingency table has an empty row or column")]
    ZeroMarginal,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
