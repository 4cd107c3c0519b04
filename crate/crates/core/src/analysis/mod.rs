//! Corpus-level question/text overlap and the per-trial feature export.

pub mod overlap;
mod trial_features;

use std::path::Path;

pub use overlap::{
    ngram_overlap_report, rouge_n, rouge_words, write_overlap_report, Measure, OverlapCell, OverlapConfig,
    OverlapReport, Prf, TextPart,
};
pub use trial_features::{
    trial_feature_header, trial_feature_table, write_trial_features, z_columns, z_normalize, Partition,
    TrialFeatureRow, PREDICTORS,
};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("prediction for unknown trial {0}")]
    UnknownTrial(String),
    #[error("prediction for {0} has no probabilities")]
    MissingProbabilities(String),
}

impl AnalysisError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        AnalysisError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
