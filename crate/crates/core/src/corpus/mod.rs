//! Datasets, metrics, the synthetic toy task, sampling and diagnostics.

pub mod dataset;
pub mod diagnostics;
pub mod metrics;
pub mod sampling;
pub mod toy;

use thiserror::Error;

pub use dataset::{load_dataset, subsample, Dataset, Example, LineError, Split};
pub use diagnostics::{signal_report, DiagnosticsRecord};
pub use metrics::{canonicalize, evaluate, exact_match, MetricsReport};
pub use sampling::{sample_utterances, SampleReport};
pub use toy::{make_toy_task, ToySizes, ToyTask};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{0}")]
    Io(String),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("asked for {k} labeled examples, only {available} available")]
    TooLarge { k: usize, available: usize },
    #[error("rejection budget exhausted after {rejections} rejections in {draws} draws")]
    Budget { rejections: usize, draws: usize },
}
