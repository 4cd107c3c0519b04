//! Offline text metrics between a generated and a reference question.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::embeddings::{EmbeddingError, EmbeddingProvider};
use crate::matrix::Matrix;
use crate::scalar::{cosine, Scalar};
use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuestionWord {
    What,
    When,
    Where,
    Who,
    Whom,
    Which,
    Whose,
    Why,
    How,
    Other,
}

impl QuestionWord {
    pub const ALL: [QuestionWord; 10] = [
        QuestionWord::What,
        QuestionWord::When,
        QuestionWord::Where,
        QuestionWord::Who,
        QuestionWord::Whom,
        QuestionWord::Which,
        QuestionWord::Whose,
        QuestionWord::Why,
        QuestionWord::How,
        QuestionWord::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionWord::What => "What",
            QuestionWord::When => "When",
            QuestionWord::Where => "Where",
            QuestionWord::Who => "Who",
            QuestionWord::Whom => "Whom",
            QuestionWord::Which => "Which",
            QuestionWord::Whose => "Whose",
            QuestionWord::Why => "Why",
            QuestionWord::How => "How",
            QuestionWord::Other => "Other",
        }
    }
}

impl fmt::Display for QuestionWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The wh-word opening a question; `flagged` is set for empty input.
pub fn question_word_of(question: &str) -> (QuestionWord, bool) {
    let Some(first) = question.split_whitespace().next() else {
        return (QuestionWord::Other, true);
    };
    // contractions keep their head: "What's" -> "what"
    let head = first.trim_start_matches(|c: char| !c.is_alphanumeric());
    let head = head.split(['\'', '\u{2019}']).next().unwrap_or("");
    let token: String = head
        .chars()
        .filter(|c| c.is_alphanumeric())
        .collect::<String>()
        .to_lowercase();
    let word = QuestionWord::ALL
        .into_iter()
        .find(|w| *w != QuestionWord::Other && w.as_str().to_lowercase() == token)
        .unwrap_or(QuestionWord::Other);
    (word, false)
}

pub const BLEU_MAX_ORDER: usize = 4;
/// Written into report headers.
pub const BLEU_SMOOTHING: &str = "add-one on zero-match orders >= 2";

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *m.entry(g).or_insert(0) += 1;
        }
    }
    m
}

/// Sentence BLEU up to 4-grams with brevity penalty. An order >= 2 with no
/// clipped match contributes (0 + 1) / (candidate n-grams + 1).
pub fn bleu(candidate: &str, reference: &str) -> f64 {
    bleu_tokens(&tokenize(candidate), &tokenize(reference))
}

pub fn bleu_tokens(cand: &[String], refr: &[String]) -> f64 {
    if cand.is_empty() || refr.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=BLEU_MAX_ORDER {
        let c = ngram_counts(cand, n);
        let r = ngram_counts(refr, n);
        let total: usize = c.values().sum();
        let matched: usize = c.iter().map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0))).sum();
        let p = if matched > 0 {
            matched as f64 / total as f64
        } else if n == 1 {
            return 0.0;
        } else {
            1.0 / (total as f64 + 1.0)
        };
        log_sum += p.ln() / BLEU_MAX_ORDER as f64;
    }
    let (c, r) = (cand.len() as f64, refr.len() as f64);
    let bp = if c >= r { 1.0 } else { (1.0 - r / c).exp() };
    bp * log_sum.exp()
}

/// Greedy token matching precision, recall and their harmonic mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn greedy_match<T: Scalar>(cand: &Matrix<T>, refr: &Matrix<T>) -> SimilarityScore {
    if cand.rows() == 0 || refr.rows() == 0 {
        return SimilarityScore {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        };
    }
    let sims: Vec<Vec<f64>> = cand
        .iter_rows()
        .map(|c| {
            refr.iter_rows()
                .map(|r| cosine(c, r).map_or(0.0, |s| s.f64()))
                .collect()
        })
        .collect();
    let precision = sims
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / cand.rows() as f64;
    let recall = (0..refr.rows())
        .map(|j| sims.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / refr.rows() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    SimilarityScore { precision, recall, f1 }
}

/// Harmonic mean of greedy cosine precision and recall over token vectors.
pub fn semantic_similarity<T: Scalar, P: EmbeddingProvider<T> + ?Sized>(
    candidate: &str,
    reference: &str,
    provider: &P,
) -> Result<f64, EmbeddingError> {
    if candidate.trim().is_empty() {
        return Ok(0.0);
    }
    let c = provider.token_embeddings(candidate)?;
    let r = provider.token_embeddings(reference)?;
    Ok(greedy_match(&c, &r).f1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn question_words() {
        assert_eq!(
            question_word_of("Why does Myslajek mention Russia, Lithuania and Belarus?").0,
            QuestionWord::Why
        );
        assert_eq!(question_word_of("Hazmat stands for what?").0, QuestionWord::Other);
        assert_eq!(question_word_of("  what is this?").0, QuestionWord::What);
        assert_eq!(question_word_of(""), (QuestionWord::Other, true));
    }

    #[test]
    fn bleu_identity_and_disjoint() {
        assert!((bleu("Why is the sky blue?", "why is the sky blue ?") - 1.0).abs() < 1e-12);
        assert_eq!(bleu("alpha beta", "gamma delta"), 0.0);
        assert_eq!(bleu("", "gamma delta"), 0.0);
    }

    #[test]
    fn bleu_hand_value() {
        // 3 tokens vs 4: p1 = 1, p2 = 1, p3 = 1, p4 = 1/(0+1); bp = exp(1 - 4/3)
        let v = bleu("a b c", "a b c d");
        assert!((v - (1.0f64 - 4.0 / 3.0).exp()).abs() < 1e-12);
    }
}
