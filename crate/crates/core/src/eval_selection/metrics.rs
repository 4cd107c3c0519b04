use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use super::{EvalError, Prediction};
use crate::corpus::QuestionType;
use crate::splits::Regime;
use crate::stats::{cluster_bootstrap_ci, dense_ids, BootstrapConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    All,
    DifferentSpans,
    SameSpan,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::All, Condition::DifferentSpans, Condition::SameSpan];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::All => "all",
            Condition::DifferentSpans => "different_spans",
            Condition::SameSpan => "same_span",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the shared-span condition reads a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SameSpanMode {
    /// Choose between the two shared-span candidates by probability (or
    /// score); falls back to `Raw` when neither is recorded.
    #[default]
    Restricted,
    /// Use the unrestricted argmax; a q1 prediction counts as wrong.
    Raw,
}

impl FromStr for SameSpanMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "restricted" => Ok(SameSpanMode::Restricted),
            "raw" => Ok(SameSpanMode::Raw),
            _ => Err(format!("unknown same-span mode {s:?} (restricted or raw)")),
        }
    }
}

fn restricted_choice(p: &Prediction) -> QuestionType {
    let pick = |v: [f64; 3]| {
        if v[1] >= v[2] || v[2].is_nan() {
            QuestionType::Q2
        } else {
            QuestionType::Q3
        }
    };
    match (p.probs, p.scores) {
        (Some(v), _) => pick(v),
        (None, Some(v)) => pick(v),
        (None, None) => p.predicted_type,
    }
}

/// Correctness of one record under a condition; `None` when the record is
/// outside the condition's denominator.
pub fn outcome(p: &Prediction, cond: Condition, mode: SameSpanMode) -> Option<bool> {
    match cond {
        Condition::All => Some(p.predicted_type == p.true_type),
        Condition::DifferentSpans => Some(p.predicted_type.shares_span() == p.true_type.shares_span()),
        Condition::SameSpan => {
            if !p.true_type.shares_span() {
                return None;
            }
            let pred = match mode {
                SameSpanMode::Restricted => restricted_choice(p),
                SameSpanMode::Raw => p.predicted_type,
            };
            Some(pred == p.true_type)
        }
    }
}

/// `(n, accuracy)` over the records inside the condition's denominator.
pub fn accuracy(records: &[Prediction], cond: Condition, mode: SameSpanMode) -> Result<(usize, f64), EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let hits: Vec<bool> = records.iter().filter_map(|p| outcome(p, cond, mode)).collect();
    let n = hits.len();
    let acc = if n == 0 {
        f64::NAN
    } else {
        hits.iter().filter(|&&h| h).count() as f64 / n as f64
    };
    Ok((n, acc))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub condition: Condition,
    /// `None` for the pooled row.
    pub regime: Option<Regime>,
    pub n: usize,
    pub accuracy: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Accuracy per condition, pooled and per regime, with two-way cluster
/// bootstrap intervals over participants and paragraphs.
pub fn selection_report(
    records: &[Prediction],
    mode: SameSpanMode,
    bootstrap: &BootstrapConfig,
) -> Result<Vec<ReportRow>, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut rows = Vec::new();
    for cond in Condition::ALL {
        for regime in std::iter::once(None).chain(Regime::ALL.into_iter().map(Some)) {
            let subset: Vec<(&Prediction, bool)> = records
                .iter()
                .filter(|p| regime.is_none() || p.regime == regime)
                .filter_map(|p| outcome(p, cond, mode).map(|o| (p, o)))
                .collect();
            let n = subset.len();
            if n == 0 {
                rows.push(ReportRow {
                    condition: cond,
                    regime,
                    n,
                    accuracy: f64::NAN,
                    ci_low: f64::NAN,
                    ci_high: f64::NAN,
                });
                continue;
            }
            let values: Vec<f64> = subset.iter().map(|(_, o)| *o as u8 as f64).collect();
            let (pa, _) = dense_ids(
                &subset
                    .iter()
                    .map(|(p, _)| p.trial_key.participant_id.clone())
                    .collect::<Vec<_>>(),
            );
            let (pb, _) = dense_ids(
                &subset
                    .iter()
                    .map(|(p, _)| p.trial_key.paragraph.clone())
                    .collect::<Vec<_>>(),
            );
            let (ci_low, ci_high) = cluster_bootstrap_ci(&values, &pa, &pb, bootstrap);
            rows.push(ReportRow {
                condition: cond,
                regime,
                n,
                accuracy: values.iter().sum::<f64>() / n as f64,
                ci_low,
                ci_high,
            });
        }
    }
    Ok(rows)
}

fn cell(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.6}")
    }
}

pub fn write_report(path: &Path, rows: &[ReportRow]) -> Result<(), EvalError> {
    let io = |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(out, "condition\tregime\tn\taccuracy\tci_low\tci_high").map_err(io)?;
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.condition,
            r.regime.map_or("all", Regime::as_str),
            r.n,
            cell(r.accuracy),
            cell(r.ci_low),
            cell(r.ci_high)
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}
