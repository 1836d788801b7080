//! Caption-then-predict QA benchmark: capability re-labeling, quality
//! filtering, stratified sampling, evaluation and metrics.

pub mod eval;
pub mod filter;
pub mod metrics;
pub mod pool;
pub mod sampling;
pub mod types;

use thiserror::Error;

use crate::backend::BackendError;

pub use eval::{caption_text, evaluate_caption, load_caption_dir, run_evaluation, EvalConfig};
pub use filter::{
    assign_difficulty, phase_a_classify, phase_b_classify, relabel_capability, run_filters, text_leak_filter, PhaseA,
    PhaseB, UnknownRule,
};
pub use metrics::{compute_metrics, render_table, Estimate, MetricsReport, DEFAULT_RESAMPLES};
pub use pool::{ingest_pool, load_votes, ColumnMap, PoolConfig};
pub use sampling::{
    allocate_budget, backfill, build_benchmark, difficulty_targets, sample_within_dimension, Benchmark, BuildConfig,
    MIXTURE_PERCENT,
};
pub use types::{
    Capability, Difficulty, EvalResult, FilterState, Prediction, QaQuestion, SourceBenchmark, Vote, VotePhase,
    VoteRecord,
};

#[derive(Debug, Error)]
pub enum QaError {
    #[error("{0}")]
    Input(String),
    #[error("invalid question state: {0}")]
    State(String),
    #[error("budget allocation: {0}")]
    Allocation(String),
    #[error("sampling: {0}")]
    Sampling(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
