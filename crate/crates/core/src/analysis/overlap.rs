//! Question-to-text n-gram overlap.
//!
//! Tokenization and n-gram sets follow the `rouge` 1.0.1 Python package:
//! text is cut at periods, whitespace-split and matched case-sensitively,
//! and each n-gram counts once per side.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::AnalysisError;
use crate::corpus::{Corpus, DifficultyLevel, Paragraph, Question, Span};
use crate::text::{is_stopword, normalize_word};

/// Words as the reference package sees them. A whitespace-only piece
/// between periods contributes one empty token, as it does there.
pub fn rouge_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for piece in text.split('.').filter(|p| !p.is_empty()) {
        let joined = piece.split_whitespace().collect::<Vec<_>>().join(" ");
        out.extend(joined.split(' ').map(str::to_string));
    }
    out
}

pub type NgramSet = HashSet<Vec<String>>;

pub fn ngram_set(words: &[String], n: usize) -> NgramSet {
    if n == 0 || words.len() < n {
        return NgramSet::new();
    }
    words.windows(n).map(<[String]>::to_vec).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf { precision, recall, f1 }
    }
}

/// Precision over the question's n-grams, recall over the context's.
pub fn set_overlap(question: &NgramSet, context: &NgramSet) -> Prf {
    let common = question.intersection(context).count() as f64;
    let ratio = |d: usize| if d == 0 { 0.0 } else { common / d as f64 };
    Prf::new(ratio(question.len()), ratio(context.len()))
}

pub fn rouge_n(question: &str, context: &str, n: usize) -> Prf {
    set_overlap(
        &ngram_set(&rouge_words(question), n),
        &ngram_set(&rouge_words(context), n),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TextPart {
    Paragraph,
    CriticalSpan,
    OutOfCriticalSpan,
}

impl TextPart {
    pub const ALL: [TextPart; 3] = [TextPart::Paragraph, TextPart::CriticalSpan, TextPart::OutOfCriticalSpan];

    pub fn as_str(self) -> &'static str {
        match self {
            TextPart::Paragraph => "paragraph",
            TextPart::CriticalSpan => "critical_span",
            TextPart::OutOfCriticalSpan => "out_of_critical_span",
        }
    }
}

impl fmt::Display for TextPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    Rouge1,
    Rouge2,
    Rouge1Content,
    Rouge2Content,
}

impl Measure {
    pub const ALL: [Measure; 4] = [
        Measure::Rouge1,
        Measure::Rouge2,
        Measure::Rouge1Content,
        Measure::Rouge2Content,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Rouge1 => "rouge1",
            Measure::Rouge2 => "rouge2",
            Measure::Rouge1Content => "rouge1_content",
            Measure::Rouge2Content => "rouge2_content",
        }
    }

    fn n(self) -> usize {
        match self {
            Measure::Rouge1 | Measure::Rouge1Content => 1,
            Measure::Rouge2 | Measure::Rouge2Content => 2,
        }
    }

    fn content(self) -> bool {
        matches!(self, Measure::Rouge1Content | Measure::Rouge2Content)
    }

    /// Content-word bigrams are an extra not found in the published table.
    pub fn published(self) -> bool {
        self != Measure::Rouge2Content
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct OverlapConfig {
    /// Paragraph level to analyse; `None` takes every paragraph.
    pub level: Option<DifficultyLevel>,
}

impl Default for OverlapConfig {
    fn default() -> Self {
        OverlapConfig {
            level: Some(DifficultyLevel::Original),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapCell {
    pub text_part: TextPart,
    pub measure: Measure,
    /// Questions with a non-empty context for this part.
    pub n_questions: usize,
    pub precision: f64,
    pub recall: f64,
    /// Harmonic mean of the two means.
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapReport {
    pub dataset: String,
    pub cells: Vec<OverlapCell>,
}

impl OverlapReport {
    pub fn get(&self, part: TextPart, measure: Measure) -> Option<&OverlapCell> {
        self.cells.iter().find(|c| c.text_part == part && c.measure == measure)
    }
}

fn question_tokens(q: &Question, content: bool) -> Vec<String> {
    let words = rouge_words(&q.text);
    if !content {
        return words;
    }
    words
        .into_iter()
        .filter(|w| {
            let n = normalize_word(w);
            !n.is_empty() && !is_stopword(&n)
        })
        .collect()
}

fn context_tokens(p: &Paragraph, range: std::ops::Range<usize>, content: bool) -> Vec<String> {
    let words = &p.words[range];
    if content {
        let kept: Vec<&str> = words
            .iter()
            .filter(|w| w.is_content_word)
            .map(|w| w.text.as_str())
            .collect();
        rouge_words(&kept.join(" "))
    } else {
        let text: Vec<&str> = words.iter().map(|w| w.text.as_str()).collect();
        rouge_words(&text.join(" "))
    }
}

fn context_set(p: &Paragraph, span: Span, part: TextPart, measure: Measure) -> NgramSet {
    let (n, content) = (measure.n(), measure.content());
    match part {
        TextPart::Paragraph => ngram_set(&context_tokens(p, 0..p.len(), content), n),
        TextPart::CriticalSpan => ngram_set(&context_tokens(p, span.start..span.end, content), n),
        TextPart::OutOfCriticalSpan => {
            // the two sides are separate texts; no n-gram bridges the span
            let mut s = ngram_set(&context_tokens(p, 0..span.start, content), n);
            s.extend(ngram_set(&context_tokens(p, span.end..p.len(), content), n));
            s
        }
    }
}

/// Per-question overlap for one part and measure; `None` when the part has
/// no words.
pub fn question_overlap(p: &Paragraph, q: &Question, part: TextPart, measure: Measure) -> Option<Prf> {
    let span = q.critical_span;
    let empty = match part {
        TextPart::Paragraph => p.is_empty(),
        TextPart::CriticalSpan => span.is_empty(),
        TextPart::OutOfCriticalSpan => span.start == 0 && span.end >= p.len(),
    };
    if empty {
        return None;
    }
    let qs = ngram_set(&question_tokens(q, measure.content()), measure.n());
    Some(set_overlap(&qs, &context_set(p, span, part, measure)))
}

/// Mean precision and recall over every question of the selected paragraphs.
pub fn ngram_overlap_report(corpus: &Corpus, config: &OverlapConfig) -> OverlapReport {
    let pairs: Vec<(&Paragraph, &Question)> = corpus
        .paragraphs()
        .iter()
        .zip(corpus.question_sets())
        .filter(|(p, _)| config.level.is_none_or(|l| p.key.level == l))
        .flat_map(|(p, qs)| qs.questions().iter().map(move |q| (p, q)))
        .collect();

    let mut cells = Vec::new();
    for part in TextPart::ALL {
        for measure in Measure::ALL {
            let scores: Vec<Prf> = pairs
                .par_iter()
                .filter_map(|(p, q)| question_overlap(p, q, part, measure))
                .collect();
            let n = scores.len();
            let (precision, recall) = if n == 0 {
                (0.0, 0.0)
            } else {
                (
                    scores.iter().map(|s| s.precision).sum::<f64>() / n as f64,
                    scores.iter().map(|s| s.recall).sum::<f64>() / n as f64,
                )
            };
            let prf = Prf::new(precision, recall);
            cells.push(OverlapCell {
                text_part: part,
                measure,
                n_questions: n,
                precision: prf.precision,
                recall: prf.recall,
                f1: prf.f1,
            });
        }
    }
    OverlapReport {
        dataset: corpus.meta.name.clone(),
        cells,
    }
}

pub fn write_overlap_report(path: &Path, report: &OverlapReport) -> Result<(), AnalysisError> {
    let io = |e| AnalysisError::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(
        out,
        "dataset\ttext_part\tmeasure\tn_questions\tprecision\trecall\tf1\tpublished"
    )
    .map_err(io)?;
    for c in &report.cells {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}",
            report.dataset,
            c.text_part,
            c.measure,
            c.n_questions,
            c.precision,
            c.recall,
            c.f1,
            c.measure.published() as u8
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenization_matches_reference_package() {
        assert_eq!(
            rouge_words("The cat sat. On  the mat."),
            ["The", "cat", "sat", "On", "the", "mat"]
        );
        assert_eq!(rouge_words("Hi. "), ["Hi", ""]);
        assert!(rouge_words("").is_empty());
    }

    #[test]
    fn one_shared_unigram() {
        let s = rouge_n("alpha beta gamma", "gamma d e f g h", 1);
        assert!((s.precision - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 1.0 / 6.0).abs() < 1e-12);
        assert!((s.f1 - 2.0 / 9.0).abs() < 1e-12);
    }
}
