//! Per-trial predictors of how much probability a scorer puts on the true
//! question, exported for mixed-effects fitting.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::overlap::rouge_n;
use super::AnalysisError;
use crate::corpus::{aggregate_word_measures, Corpus, DifficultyLevel, TrialKey};
use crate::eval_selection::Prediction;

/// Total fixation duration per word over a contiguous block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partition {
    pub n_words: usize,
    pub total_ms: f64,
}

impl Partition {
    fn of(dwell: &[f64]) -> Self {
        Partition {
            n_words: dwell.len(),
            total_ms: dwell.iter().sum(),
        }
    }

    /// 0 for an empty block.
    pub fn per_word(&self) -> f64 {
        if self.n_words == 0 {
            0.0
        } else {
            self.total_ms / self.n_words as f64
        }
    }

    pub fn is_empty(&self) -> bool {
        self.n_words == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFeatureRow {
    pub trial_key: TrialKey,
    pub tfd_before_span: f64,
    pub tfd_within_span: f64,
    pub tfd_after_span: f64,
    pub before_span_empty: bool,
    pub after_span_empty: bool,
    /// Mean total fixation duration per word over the whole paragraph.
    pub tfd_paragraph: f64,
    pub position_in_experiment: u32,
    pub comprehension_score: f64,
    pub paragraph_length: usize,
    pub span_length: usize,
    pub span_location: f64,
    pub difficulty_level: DifficultyLevel,
    pub question_span_rouge1_precision: f64,
    pub p_correct: f64,
    pub predicted_correct: bool,
}

pub const PREDICTORS: [&str; 10] = [
    "tfd_before_span",
    "tfd_within_span",
    "tfd_after_span",
    "position_in_experiment",
    "comprehension_score",
    "paragraph_length",
    "span_length",
    "span_location",
    "difficulty_level",
    "question_span_rouge1_precision",
];

impl TrialFeatureRow {
    /// Raw predictor values in `PREDICTORS` order; the simplified level is 1.
    pub fn predictors(&self) -> [f64; 10] {
        [
            self.tfd_before_span,
            self.tfd_within_span,
            self.tfd_after_span,
            self.position_in_experiment as f64,
            self.comprehension_score,
            self.paragraph_length as f64,
            self.span_length as f64,
            self.span_location,
            (self.difficulty_level == DifficultyLevel::Simplified) as u8 as f64,
            self.question_span_rouge1_precision,
        ]
    }
}

/// Rows for every prediction, in prediction order. Each prediction must carry
/// probabilities.
pub fn trial_feature_table(corpus: &Corpus, preds: &[Prediction]) -> Result<Vec<TrialFeatureRow>, AnalysisError> {
    let mut comprehension: HashMap<&str, (usize, usize)> = HashMap::new();
    for t in corpus.trials() {
        let e = comprehension.entry(t.key.participant_id.as_str()).or_default();
        e.0 += t.comprehension_correct as usize;
        e.1 += 1;
    }

    preds
        .par_iter()
        .map(|pred| {
            let trial = corpus
                .trial(&pred.trial_key)
                .ok_or_else(|| AnalysisError::UnknownTrial(pred.trial_key.to_string()))?;
            let probs = pred
                .probs
                .ok_or_else(|| AnalysisError::MissingProbabilities(pred.trial_key.to_string()))?;
            let p = corpus.paragraph(trial);
            let q = corpus.true_question(trial);
            let span = q.critical_span;
            let n = p.len();
            let dwell = aggregate_word_measures(trial, n).dwell_times();
            let before = Partition::of(&dwell[..span.start]);
            let within = Partition::of(&dwell[span.start..span.end]);
            let after = Partition::of(&dwell[span.end..]);
            let span_text: Vec<&str> = p.words[span.start..span.end].iter().map(|w| w.text.as_str()).collect();
            let (correct, total) = comprehension[trial.key.participant_id.as_str()];
            Ok(TrialFeatureRow {
                trial_key: trial.key.clone(),
                tfd_before_span: before.per_word(),
                tfd_within_span: within.per_word(),
                tfd_after_span: after.per_word(),
                before_span_empty: before.is_empty(),
                after_span_empty: after.is_empty(),
                tfd_paragraph: Partition::of(&dwell).per_word(),
                position_in_experiment: trial.position_in_experiment,
                comprehension_score: correct as f64 / total as f64,
                paragraph_length: n,
                span_length: span.len(),
                span_location: span.start as f64 / n as f64,
                difficulty_level: p.key.level,
                question_span_rouge1_precision: rouge_n(&q.text, &span_text.join(" "), 1).precision,
                p_correct: probs[trial.question.slot()],
                predicted_correct: pred.predicted_type == trial.question,
            })
        })
        .collect()
}

/// Column z-scores with the sample standard deviation; a constant column
/// maps to 0.
pub fn z_normalize(column: &[f64]) -> Vec<f64> {
    let n = column.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mean = column.iter().sum::<f64>() / n as f64;
    let var = column.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 || !sd.is_finite() {
        return vec![0.0; n];
    }
    column.iter().map(|x| (x - mean) / sd).collect()
}

/// `z[i][j]` is predictor `j` of row `i`, z-normalized over the table.
pub fn z_columns(rows: &[TrialFeatureRow]) -> Vec<[f64; 10]> {
    let raw: Vec<[f64; 10]> = rows.iter().map(TrialFeatureRow::predictors).collect();
    let mut out = vec![[0.0; 10]; rows.len()];
    for j in 0..PREDICTORS.len() {
        let col: Vec<f64> = raw.iter().map(|r| r[j]).collect();
        for (i, z) in z_normalize(&col).into_iter().enumerate() {
            out[i][j] = z;
        }
    }
    out
}

pub fn trial_feature_header() -> Vec<String> {
    let mut h: Vec<String> = ["trial_key", "participant_id", "article_id", "paragraph_id", "level"]
        .map(String::from)
        .to_vec();
    h.extend(PREDICTORS.iter().map(|s| s.to_string()));
    h.extend(
        [
            "before_span_empty",
            "after_span_empty",
            "tfd_paragraph",
            "p_correct",
            "predicted_correct",
        ]
        .map(String::from),
    );
    h.extend(PREDICTORS.iter().map(|s| format!("z_{s}")));
    h
}

pub fn write_trial_features(path: &Path, rows: &[TrialFeatureRow]) -> Result<(), AnalysisError> {
    let io = |e| AnalysisError::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(out, "{}", trial_feature_header().join("\t")).map_err(io)?;
    let z = z_columns(rows);
    for (r, z) in rows.iter().zip(&z) {
        let k = &r.trial_key;
        let mut cells = vec![
            k.to_string(),
            k.participant_id.clone(),
            k.paragraph.article_id.clone(),
            k.paragraph.paragraph_id.clone(),
            k.paragraph.level.as_str().to_string(),
        ];
        cells.extend(r.predictors().iter().map(|v| v.to_string()));
        cells.push((r.before_span_empty as u8).to_string());
        cells.push((r.after_span_empty as u8).to_string());
        cells.push(r.tfd_paragraph.to_string());
        cells.push(r.p_correct.to_string());
        cells.push((r.predicted_correct as u8).to_string());
        cells.extend(z.iter().map(|v| v.to_string()));
        writeln!(out, "{}", cells.join("\t")).map_err(io)?;
    }
    out.flush().map_err(io)
}
