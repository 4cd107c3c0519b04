//! Paragraphs, question triples, participants and fixation records.

mod binary;
mod ingest;
mod measures;
mod model;

pub use binary::{load_corpus, save_corpus, CORPUS_FORMAT_VERSION, CORPUS_MAGIC};
pub use ingest::{ingest_trials, write_tables, IngestConfig, IngestReport, RejectReason, TrialRejection};
pub use measures::{aggregate_fixations, aggregate_word_measures, WordMeasure, WordMeasures};
pub use model::{
    Answers, Corpus, CorpusMeta, DifficultyLevel, Fixation, Paragraph, ParagraphKey, Question, QuestionSet,
    QuestionType, Span, SurprisalUnits, Trial, TrialKey, Word,
};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{file}: missing column {column:?}")]
    MissingColumn { file: String, column: String },
    #[error("{file} line {line}: column {column:?} has invalid value {value:?}")]
    BadValue {
        file: String,
        line: u64,
        column: String,
        value: String,
    },
    #[error("{file} line {line}: unknown difficulty level {value:?}")]
    UnknownDifficulty { file: String, line: u64, value: String },
    #[error("duplicate paragraph {0}")]
    DuplicateParagraph(String),
    #[error("paragraph {paragraph}: word indices must be contiguous (expected {expected}, found {found})")]
    NonContiguousWords {
        paragraph: String,
        expected: usize,
        found: usize,
    },
    #[error("question {question_id}: multi-segment critical span {value:?} is not supported")]
    MultiSegmentSpan { question_id: String, value: String },
    #[error("question {question_id}: critical span {span} outside paragraph of {n_words} words")]
    SpanOutOfBounds {
        question_id: String,
        span: String,
        n_words: usize,
    },
    #[error("incomplete question set: {detail}")]
    IncompleteQuestionSet { detail: String },
    #[error("missing stimulus for trial {trial}")]
    MissingStimulus { trial: String },
    #[error("fixations.tsv line {line}: no trial record for {trial}")]
    UnknownTrial { line: u64, trial: String },
    #[error("corpus cache: {0}")]
    Cache(String),
    #[error("{0}")]
    Invalid(String),
}

impl CorpusError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CorpusError::Invalid(msg.into())
    }
}
