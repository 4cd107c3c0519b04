//! `preds.tsv`: one self-contained row per evaluated trial.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::EvalError;
use crate::corpus::{QuestionType, TrialKey};
use crate::splits::Regime;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub trial_key: TrialKey,
    pub fold: Option<usize>,
    pub true_type: QuestionType,
    pub regime: Option<Regime>,
    pub predicted_type: QuestionType,
    pub predicted_question_id: String,
    /// Raw per-candidate scores in type order.
    pub scores: Option<[f64; 3]>,
    /// Softmax probabilities in type order.
    pub probs: Option<[f64; 3]>,
}

pub type SelectionRecord = Prediction;

pub const PREDS_HEADER: [&str; 16] = [
    "trial_key",
    "participant_id",
    "article_id",
    "paragraph_id",
    "level",
    "fold",
    "true_type",
    "regime",
    "predicted_type",
    "predicted_question_id",
    "score_1",
    "score_2",
    "score_3",
    "prob_1",
    "prob_2",
    "prob_3",
];

fn opt3(v: &Option<[f64; 3]>) -> [String; 3] {
    match v {
        Some(a) => a.map(|x| format!("{x}")),
        None => [String::new(), String::new(), String::new()],
    }
}

pub fn write_predictions(path: &Path, preds: &[Prediction]) -> Result<(), EvalError> {
    let io = |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(out, "{}", PREDS_HEADER.join("\t")).map_err(io)?;
    for p in preds {
        let k = &p.trial_key;
        let [s1, s2, s3] = opt3(&p.scores);
        let [p1, p2, p3] = opt3(&p.probs);
        writeln!(
            out,
            "{k}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{s1}\t{s2}\t{s3}\t{p1}\t{p2}\t{p3}",
            k.participant_id,
            k.paragraph.article_id,
            k.paragraph.paragraph_id,
            k.paragraph.level,
            p.fold.map(|f| f.to_string()).unwrap_or_default(),
            p.true_type.index(),
            p.regime.map_or("", Regime::as_str),
            p.predicted_type.index(),
            p.predicted_question_id,
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>, EvalError> {
    let p = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| EvalError::Io {
        path: p.clone(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| EvalError::Io {
            path: p.clone(),
            source,
        })?;
        let bad = |detail: String| EvalError::Parse {
            path: p.clone(),
            line: i + 1,
            detail,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if i == 0 {
            if f != PREDS_HEADER {
                return Err(bad("unexpected header".into()));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if f.len() != PREDS_HEADER.len() {
            return Err(bad(format!(
                "expected {} fields, found {}",
                PREDS_HEADER.len(),
                f.len()
            )));
        }
        let qt = |s: &str| {
            s.parse::<u8>()
                .ok()
                .and_then(QuestionType::from_index)
                .ok_or_else(|| bad(format!("invalid question type {s:?}")))
        };
        let triple = |cols: &[&str]| -> Result<Option<[f64; 3]>, EvalError> {
            if cols.iter().all(|c| c.is_empty()) {
                return Ok(None);
            }
            let mut v = [0.0; 3];
            for (x, c) in v.iter_mut().zip(cols) {
                *x = c.parse().map_err(|_| bad(format!("invalid number {c:?}")))?;
            }
            Ok(Some(v))
        };
        out.push(Prediction {
            trial_key: f[0].parse().map_err(bad)?,
            fold: if f[5].is_empty() {
                None
            } else {
                Some(f[5].parse().map_err(|_| bad(format!("invalid fold {:?}", f[5])))?)
            },
            true_type: qt(f[6])?,
            regime: if f[7].is_empty() {
                None
            } else {
                Some(f[7].parse().map_err(bad)?)
            },
            predicted_type: qt(f[8])?,
            predicted_question_id: f[9].to_string(),
            scores: triple(&f[10..13])?,
            probs: triple(&f[13..16])?,
        });
    }
    Ok(out)
}
