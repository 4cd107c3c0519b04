//! Zero-training selection baselines driven by normalized reading times.

use std::str::FromStr;

use crate::corpus::{aggregate_word_measures, Corpus, QuestionType, Trial};
use crate::embeddings::{EmbeddingError, EmbeddingProvider};
use crate::matrix::Matrix;
use crate::scalar::{argmax_first, cosine, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// Reading-time weighted passage embedding compared with each question.
    RtWeighted,
    /// Per-word question similarity profile compared with the reading times.
    RtProfile,
}

impl FromStr for Baseline {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rt-weighted" => Ok(Baseline::RtWeighted),
            "rt-profile" => Ok(Baseline::RtProfile),
            _ => Err(format!("unknown baseline {s:?} (expected rt-weighted or rt-profile)")),
        }
    }
}

impl Baseline {
    pub fn as_str(self) -> &'static str {
        match self {
            Baseline::RtWeighted => "rt-weighted",
            Baseline::RtProfile => "rt-profile",
        }
    }
}

/// Reading-time normalization. Only whole-text normalization is defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RtNorm {
    #[default]
    TotalRt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RtVector<T> {
    pub values: Vec<T>,
    /// Set when the trial had no on-text dwell; `values` is then all zero.
    pub degenerate: bool,
}

impl<T: Scalar> RtVector<T> {
    /// Uniform weights in place of a degenerate vector.
    pub fn or_uniform(&self) -> Vec<T> {
        if self.degenerate {
            let n = T::of(self.values.len().max(1) as f64);
            vec![T::one() / n; self.values.len()]
        } else {
            self.values.clone()
        }
    }
}

pub fn normalized_rt_vector<T: Scalar>(dwell_ms: &[f64]) -> RtVector<T> {
    let total: f64 = dwell_ms.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        log::warn!("trial has zero on-text dwell; reading-time vector is degenerate");
        return RtVector {
            values: vec![T::zero(); dwell_ms.len()],
            degenerate: true,
        };
    }
    RtVector {
        values: dwell_ms.iter().map(|&d| T::of(d / total)).collect(),
        degenerate: false,
    }
}

pub fn trial_rt_vector<T: Scalar>(corpus: &Corpus, trial: &Trial) -> RtVector<T> {
    let n = corpus.paragraph(trial).len();
    normalized_rt_vector(&aggregate_word_measures(trial, n).dwell_times())
}

/// Cosine or negative infinity for a zero vector.
fn cos_score<T: Scalar>(a: &[T], b: &[T]) -> T {
    cosine(a, b).unwrap_or(T::neg_infinity())
}

pub fn rt_weighted_scores<T: Scalar>(rt: &[T], words: &Matrix<T>, candidates: &[Vec<T>]) -> Vec<T> {
    let mut passage = vec![T::zero(); words.cols()];
    for (i, &w) in rt.iter().enumerate() {
        for (p, &x) in passage.iter_mut().zip(words.row(i)) {
            *p += w * x;
        }
    }
    candidates.iter().map(|q| cos_score(&passage, q)).collect()
}

pub fn rt_profile_scores<T: Scalar>(rt: &[T], words: &Matrix<T>, candidates: &[Vec<T>]) -> Vec<T> {
    candidates
        .iter()
        .map(|q| {
            let profile: Vec<T> = words.iter_rows().map(|w| cosine(q, w).unwrap_or(T::zero())).collect();
            cos_score(&profile, rt)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection<T> {
    /// Scores in question-type order.
    pub scores: [T; 3],
    pub predicted: QuestionType,
    pub uniform_fallback: bool,
}

pub fn select<T: Scalar, P: EmbeddingProvider<T> + ?Sized>(
    which: Baseline,
    corpus: &Corpus,
    trial: &Trial,
    provider: &P,
) -> Result<Selection<T>, EmbeddingError> {
    let rt = trial_rt_vector::<T>(corpus, trial);
    let words = provider.word_embeddings(corpus.paragraph(trial))?.vectors;
    let candidates = corpus
        .question_set(trial)
        .questions()
        .iter()
        .map(|q| provider.question_embedding(q).map(|e| e.vector))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(select_with(which, &rt, &words, &candidates))
}

/// Scores three candidates given in type order; ties go to the lowest type.
pub fn select_with<T: Scalar>(
    which: Baseline,
    rt: &RtVector<T>,
    words: &Matrix<T>,
    candidates: &[Vec<T>],
) -> Selection<T> {
    assert_eq!(candidates.len(), 3, "three candidate questions");
    let weights = rt.or_uniform();
    let s = match which {
        Baseline::RtWeighted => rt_weighted_scores(&weights, words, candidates),
        Baseline::RtProfile => rt_profile_scores(&weights, words, candidates),
    };
    Selection {
        scores: [s[0], s[1], s[2]],
        predicted: QuestionType::from_slot(argmax_first(&s)),
        uniform_fallback: rt.degenerate,
    }
}

/// Convenience wrappers named after the two selection models.
pub fn select_rt_weighted_passage<T: Scalar, P: EmbeddingProvider<T> + ?Sized>(
    corpus: &Corpus,
    trial: &Trial,
    provider: &P,
) -> Result<Selection<T>, EmbeddingError> {
    select(Baseline::RtWeighted, corpus, trial, provider)
}

pub fn select_rt_profile<T: Scalar, P: EmbeddingProvider<T> + ?Sized>(
    corpus: &Corpus,
    trial: &Trial,
    provider: &P,
) -> Result<Selection<T>, EmbeddingError> {
    select(Baseline::RtProfile, corpus, trial, provider)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rt_normalization() {
        let rt = normalized_rt_vector::<f64>(&[200.0, 300.0, 500.0]);
        assert_eq!(rt.values, [0.2, 0.3, 0.5]);
        let z = normalized_rt_vector::<f64>(&[0.0, 0.0]);
        assert!(z.degenerate && z.values == [0.0, 0.0]);
        assert_eq!(z.or_uniform(), [0.5, 0.5]);
    }

    #[test]
    fn weighted_hand_example() {
        let words = Matrix::from_rows(&[[1.0f64, 0.0], [0.0, 1.0]]);
        let rt = RtVector {
            values: vec![0.75, 0.25],
            degenerate: false,
        };
        let c = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]];
        let s = select_with(Baseline::RtWeighted, &rt, &words, &c);
        assert!((s.scores[0] - 0.948_683_298_050_513_8).abs() < 1e-12);
        assert!((s.scores[1] - 0.316_227_766_016_837_94).abs() < 1e-12);
        assert_eq!(s.scores[2], f64::NEG_INFINITY);
        assert_eq!(s.predicted, QuestionType::Q1);
    }

    #[test]
    fn profile_hand_example() {
        // similarity profiles (0.9, 0.1) and (0.1, 0.9) against RT (1, 0)
        let profile_a = [0.9f64, 0.1];
        let profile_b = [0.1f64, 0.9];
        let rt = [1.0f64, 0.0];
        assert!(cos_score(&profile_a, &rt) > cos_score(&profile_b, &rt));
        // the same through full scoring: unit words, questions chosen to give those profiles
        let words = Matrix::from_rows(&[[1.0f64, 0.0], [0.0, 1.0]]);
        let c = vec![vec![0.9, 0.1], vec![0.1, 0.9], vec![0.1, 0.9]];
        let s = select_with(
            Baseline::RtProfile,
            &RtVector {
                values: rt.to_vec(),
                degenerate: false,
            },
            &words,
            &c,
        );
        assert_eq!(s.predicted, QuestionType::Q1);
    }

    #[test]
    fn ties_go_to_type_one() {
        let words = Matrix::from_rows(&[[1.0f64, 0.0], [0.0, 1.0]]);
        let rt = RtVector {
            values: vec![0.5, 0.5],
            degenerate: false,
        };
        let same = vec![vec![0.3, 0.7]; 3];
        for b in [Baseline::RtWeighted, Baseline::RtProfile] {
            assert_eq!(select_with(b, &rt, &words, &same).predicted, QuestionType::Q1);
        }
    }
}
