//! Scoring generated questions against the question the reader was given.

pub mod clients;
pub mod metrics;
pub mod records;
mod report;

use std::path::Path;

pub use clients::{CommandClient, CompletionClient, QaClient, UiucCache, UiucCategory};
pub use metrics::{bleu, question_word_of, semantic_similarity, QuestionWord, BLEU_SMOOTHING};
pub use records::{human_baseline_records, read_generated, write_generated, GeneratedRecord, Source};
pub use report::{
    evaluate_records, reconstruction_report, write_metric_rows, write_reconstruction_report, MetricContext, MetricRow,
    QaOutcome, ReconRow,
};

#[derive(Debug, thiserror::Error)]
pub enum ReconstructionError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("client: {0}")]
    Client(String),
    #[error("record refers to unknown trial {0}")]
    UnknownTrial(String),
    #[error(transparent)]
    Embedding(#[from] crate::embeddings::EmbeddingError),
}

impl ReconstructionError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ReconstructionError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
