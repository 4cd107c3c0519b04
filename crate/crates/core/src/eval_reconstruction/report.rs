use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::clients::{CompletionClient, QaClient, UiucCache};
use super::metrics::{bleu, question_word_of, semantic_similarity, BLEU_MAX_ORDER, BLEU_SMOOTHING};
use super::records::{GeneratedRecord, Source};
use super::ReconstructionError;
use crate::corpus::{Corpus, TrialKey};
use crate::embeddings::EmbeddingProvider;
use crate::splits::{FoldPlan, Regime};
use crate::stats::{cluster_bootstrap_ci, dense_ids, BootstrapConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QaOutcome {
    Valid,
    Invalid,
    /// The client misses the true question itself.
    NotApplicable,
    /// The client failed; excluded and counted.
    Failed,
    NotRun,
}

impl QaOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            QaOutcome::Valid => "valid",
            QaOutcome::Invalid => "invalid",
            QaOutcome::NotApplicable => "not_applicable",
            QaOutcome::Failed => "failed",
            QaOutcome::NotRun => "",
        }
    }

    fn value(self) -> Option<f64> {
        match self {
            QaOutcome::Valid => Some(1.0),
            QaOutcome::Invalid => Some(0.0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub trial_key: TrialKey,
    pub source: Source,
    pub regime: Option<Regime>,
    pub flagged: bool,
    pub question_word_match: bool,
    pub uiuc_match: Option<bool>,
    pub bleu: f64,
    pub semantic_similarity: Option<f64>,
    pub qa_valid: QaOutcome,
}

/// Optional services; metrics without one are left empty.
pub struct MetricContext<'a> {
    pub provider: Option<&'a dyn EmbeddingProvider<f64>>,
    pub uiuc_cache: Option<&'a UiucCache>,
    pub uiuc_client: Option<&'a dyn CompletionClient>,
    pub uiuc_batch: usize,
    pub qa: Option<&'a dyn QaClient>,
    pub plan: Option<&'a FoldPlan>,
}

impl Default for MetricContext<'_> {
    fn default() -> Self {
        MetricContext {
            provider: None,
            uiuc_cache: None,
            uiuc_client: None,
            uiuc_batch: 20,
            qa: None,
            plan: None,
        }
    }
}

/// Computes every available metric for each record against the trial's true question.
pub fn evaluate_records(
    corpus: &Corpus,
    records: &[GeneratedRecord],
    ctx: &MetricContext<'_>,
) -> Result<Vec<MetricRow>, ReconstructionError> {
    let trials = records
        .iter()
        .map(|r| {
            corpus
                .trial(&r.trial_key)
                .ok_or_else(|| ReconstructionError::UnknownTrial(r.trial_key.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut uiuc: HashMap<String, Option<crate::eval_reconstruction::UiucCategory>> = HashMap::new();
    if let Some(cache) = ctx.uiuc_cache {
        let mut texts: Vec<&str> = records.iter().map(|r| r.question.as_str()).collect();
        texts.extend(trials.iter().map(|t| corpus.true_question(t).text.as_str()));
        let labels = cache.classify(&texts, ctx.uiuc_client, ctx.uiuc_batch);
        for (t, l) in texts.iter().zip(labels) {
            uiuc.insert(t.to_string(), l);
        }
        cache.flush()?;
    }

    // whether the QA client answers each true question correctly
    let mut answerable: HashMap<String, Option<bool>> = HashMap::new();
    if let Some(qa) = ctx.qa {
        for t in &trials {
            let q = corpus.true_question(t);
            if answerable.contains_key(&q.question_id) {
                continue;
            }
            let verdict = match &q.answers {
                None => Some(false),
                Some(a) => qa
                    .answer(&q.text, &corpus.paragraph(t).text(), &a.options)
                    .ok()
                    .map(|pick| pick == a.correct),
            };
            answerable.insert(q.question_id.clone(), verdict);
        }
    }

    let rows = records
        .par_iter()
        .zip(trials.par_iter())
        .map(|(r, t)| {
            let truth = corpus.true_question(t);
            let regime = ctx
                .plan
                .and_then(|p| p.regime_of(&r.trial_key).ok())
                .and_then(|a| a.regime);
            let semantic = match ctx.provider {
                Some(p) => Some(semantic_similarity(&r.question, &truth.text, p)?),
                None => None,
            };
            let uiuc_match = match (uiuc.get(&r.question), uiuc.get(&truth.text)) {
                (Some(Some(a)), Some(Some(b))) => Some(a == b),
                _ => None,
            };
            let qa_valid = match ctx.qa {
                None => QaOutcome::NotRun,
                Some(qa) => match answerable.get(&truth.question_id).copied().flatten() {
                    None => QaOutcome::Failed,
                    Some(false) => QaOutcome::NotApplicable,
                    Some(true) => {
                        let a = truth.answers.as_ref().expect("answerable questions have answers");
                        match qa.answer(&r.question, &corpus.paragraph(t).text(), &a.options) {
                            Ok(pick) if pick == a.correct => QaOutcome::Valid,
                            Ok(_) => QaOutcome::Invalid,
                            Err(_) => QaOutcome::Failed,
                        }
                    }
                },
            };
            Ok(MetricRow {
                trial_key: r.trial_key.clone(),
                source: r.source,
                regime,
                flagged: r.flagged,
                question_word_match: question_word_of(&r.question).0 == question_word_of(&truth.text).0,
                uiuc_match,
                bleu: bleu(&r.question, &truth.text),
                semantic_similarity: semantic,
                qa_valid,
            })
        })
        .collect::<Result<Vec<_>, ReconstructionError>>()?;
    let failed = rows.iter().filter(|r| r.qa_valid == QaOutcome::Failed).count();
    if failed > 0 {
        log::warn!("{failed} QA validity checks failed and are excluded");
    }
    Ok(rows)
}

pub const METRICS: [&str; 5] = [
    "question_word_match",
    "uiuc_match",
    "bleu",
    "semantic_similarity",
    "qa_valid",
];

fn metric_value(r: &MetricRow, metric: &str) -> Option<f64> {
    match metric {
        "question_word_match" => Some(r.question_word_match as u8 as f64),
        "uiuc_match" => r.uiuc_match.map(|b| b as u8 as f64),
        "bleu" => Some(r.bleu),
        "semantic_similarity" => r.semantic_similarity,
        "qa_valid" => r.qa_valid.value(),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconRow {
    pub source: Source,
    pub regime: Option<Regime>,
    pub metric: &'static str,
    pub n: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Means with two-way cluster bootstrap intervals per source, pooled and per
/// regime, for every metric. Cells without data get n = 0 and NaN.
pub fn reconstruction_report(rows: &[MetricRow], bootstrap: &BootstrapConfig) -> Vec<ReconRow> {
    let mut sources: Vec<Source> = rows.iter().map(|r| r.source).collect();
    sources.sort();
    sources.dedup();
    let mut out = Vec::new();
    for &source in &sources {
        for regime in std::iter::once(None).chain(Regime::ALL.into_iter().map(Some)) {
            for metric in METRICS {
                let cell: Vec<(&MetricRow, f64)> = rows
                    .iter()
                    .filter(|r| r.source == source && !r.flagged && (regime.is_none() || r.regime == regime))
                    .filter_map(|r| metric_value(r, metric).map(|v| (r, v)))
                    .collect();
                let n = cell.len();
                if n == 0 {
                    out.push(ReconRow {
                        source,
                        regime,
                        metric,
                        n,
                        mean: f64::NAN,
                        ci_low: f64::NAN,
                        ci_high: f64::NAN,
                    });
                    continue;
                }
                let values: Vec<f64> = cell.iter().map(|c| c.1).collect();
                let (pa, _) = dense_ids(
                    &cell
                        .iter()
                        .map(|c| c.0.trial_key.participant_id.clone())
                        .collect::<Vec<_>>(),
                );
                let (pb, _) = dense_ids(&cell.iter().map(|c| c.0.trial_key.paragraph.clone()).collect::<Vec<_>>());
                let (ci_low, ci_high) = cluster_bootstrap_ci(&values, &pa, &pb, bootstrap);
                out.push(ReconRow {
                    source,
                    regime,
                    metric,
                    n,
                    mean: values.iter().sum::<f64>() / n as f64,
                    ci_low,
                    ci_high,
                });
            }
        }
    }
    out
}

fn cell(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.6}")
    }
}

/// `provider` names the similarity encoder for the header.
pub fn write_reconstruction_report(
    path: &Path,
    rows: &[ReconRow],
    provider: Option<&str>,
) -> Result<(), ReconstructionError> {
    let io = |e| ReconstructionError::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(
        out,
        "# bleu: sentence-level, max order {BLEU_MAX_ORDER}, smoothing {BLEU_SMOOTHING}, mean over trials"
    )
    .map_err(io)?;
    writeln!(
        out,
        "# semantic_similarity: greedy token cosine F1, provider {}",
        provider.unwrap_or("none")
    )
    .map_err(io)?;
    writeln!(out, "source\tregime\tmetric\tn\tmean\tci_low\tci_high").map_err(io)?;
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.source,
            r.regime.map_or("all", Regime::as_str),
            r.metric,
            r.n,
            cell(r.mean),
            cell(r.ci_low),
            cell(r.ci_high)
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Per-trial metric table for external mixed-effects fitting.
pub fn write_metric_rows(path: &Path, rows: &[MetricRow]) -> Result<(), ReconstructionError> {
    let io = |e| ReconstructionError::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(
        out,
        "trial_key\tparticipant_id\tarticle_id\tparagraph_id\tlevel\tsource\tregime\tflagged\tquestion_word_match\tuiuc_match\tbleu\tsemantic_similarity\tqa_valid"
    )
    .map_err(io)?;
    let b = |v: bool| if v { "1" } else { "0" };
    for r in rows {
        let k = &r.trial_key;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            k,
            k.participant_id,
            k.paragraph.article_id,
            k.paragraph.paragraph_id,
            k.paragraph.level.as_str(),
            r.source,
            r.regime.map_or("", Regime::as_str),
            b(r.flagged),
            b(r.question_word_match),
            r.uiuc_match.map_or("", b),
            r.bleu,
            r.semantic_similarity.map_or(String::new(), |v| v.to_string()),
            r.qa_valid.as_str()
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}
