//! Generated-question interchange and the no-gaze human baselines.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ReconstructionError;
use crate::corpus::{Corpus, QuestionType, Trial, TrialKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    GazeModel,
    HumanDiffSpan,
    HumanSameSpan,
    LlmArbitrary,
    LlmTextOnly,
}

impl Source {
    pub const ALL: [Source; 5] = [
        Source::GazeModel,
        Source::HumanDiffSpan,
        Source::HumanSameSpan,
        Source::LlmArbitrary,
        Source::LlmTextOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::GazeModel => "gaze_model",
            Source::HumanDiffSpan => "human_diff_span",
            Source::HumanSameSpan => "human_same_span",
            Source::LlmArbitrary => "llm_arbitrary",
            Source::LlmTextOnly => "llm_text_only",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Source::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown source {s:?}"))
    }
}

/// One JSON line: `{trial_key, source, question}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedRecord {
    #[serde(with = "key_string")]
    pub trial_key: TrialKey,
    pub source: Source,
    pub question: String,
    /// Set when generation failed or produced nothing.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub flagged: bool,
}

mod key_string {
    use super::TrialKey;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(k: &TrialKey, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(k)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<TrialKey, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn write_generated(path: &Path, records: &[GeneratedRecord]) -> Result<(), ReconstructionError> {
    let file = std::fs::File::create(path).map_err(|e| ReconstructionError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(out, "{line}").map_err(|e| ReconstructionError::io(path, e))?;
    }
    out.flush().map_err(|e| ReconstructionError::io(path, e))
}

pub fn read_generated(path: &Path) -> Result<Vec<GeneratedRecord>, ReconstructionError> {
    let file = std::fs::File::open(path).map_err(|e| ReconstructionError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ReconstructionError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut r: GeneratedRecord = serde_json::from_str(&line)
            .map_err(|e| ReconstructionError::Format(format!("{} line {}: {e}", path.display(), i + 1)))?;
        if r.question.trim().is_empty() {
            r.flagged = true;
        }
        out.push(r);
    }
    Ok(out)
}

/// The type whose question stands in for a different-span human guess.
/// Types 2 and 3 use the type 1 question; for type 1 the choice between 2 and
/// 3 is a stable hash of the trial key.
pub fn diff_span_type(trial: &Trial) -> QuestionType {
    match trial.question {
        QuestionType::Q1 => {
            let h = Sha256::digest(trial.key.to_string().as_bytes());
            if h[0] & 1 == 0 {
                QuestionType::Q2
            } else {
                QuestionType::Q3
            }
        }
        _ => QuestionType::Q1,
    }
}

/// The other question on the true critical span, if there is one.
pub fn same_span_type(trial: &Trial) -> Option<QuestionType> {
    match trial.question {
        QuestionType::Q1 => None,
        QuestionType::Q2 => Some(QuestionType::Q3),
        QuestionType::Q3 => Some(QuestionType::Q2),
    }
}

/// Human-written questions the reader did not see, routed by critical span.
pub fn human_baseline_records<'a>(
    corpus: &Corpus,
    trials: impl IntoIterator<Item = &'a Trial>,
) -> Vec<GeneratedRecord> {
    let mut out = Vec::new();
    for t in trials {
        let qs = corpus.question_set(t);
        out.push(GeneratedRecord {
            trial_key: t.key.clone(),
            source: Source::HumanDiffSpan,
            question: qs.get(diff_span_type(t)).text.clone(),
            flagged: false,
        });
        if let Some(s) = same_span_type(t) {
            out.push(GeneratedRecord {
                trial_key: t.key.clone(),
                source: Source::HumanSameSpan,
                question: qs.get(s).text.clone(),
                flagged: false,
            });
        }
    }
    out
}
