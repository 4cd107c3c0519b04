//! Goal-selection accuracy under the three span conditions.

mod chance;
mod metrics;
mod preds;

pub use chance::{chance_by_enumeration, Chance, ChanceTable};
pub use metrics::{accuracy, outcome, selection_report, write_report, Condition, ReportRow, SameSpanMode};
pub use preds::{read_predictions, write_predictions, Prediction, SelectionRecord, PREDS_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no records to evaluate")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {detail}")]
    Parse { path: String, line: usize, detail: String },
}
