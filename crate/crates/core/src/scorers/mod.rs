//! Question-selection scorers: each trial yields three candidate inputs
//! (one per question) and a scorer assigns each a real score.

pub mod autodiff;
pub mod checkpoint;
pub mod features;
pub mod fusion;
pub mod generative;
pub mod rnn;
pub mod train;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::QuestionType;
use crate::embeddings::EmbeddingError;
use crate::matrix::Matrix;
use crate::scalar::{argmax_first, softmax, Scalar};

pub use autodiff::{Tape, Var};
pub use features::{
    assemble_candidate_inputs, standardize_features, CandidateInput, FeatureConfig, FeatureGroup, FeatureStats,
    TrialInput,
};
pub use fusion::{FusionConfig, FusionScorer};
pub use rnn::{RnnConfig, RnnScorer};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("config error: {0}")]
    Config(String),
    #[error("feature stats belong to fold {stats}, not fold {requested}")]
    FoldMismatch { stats: usize, requested: usize },
    #[error("scorer expects {expected} features per fixation, input has {found}")]
    FeatureDim { expected: usize, found: usize },
    #[error("scorer expects {expected}-dimensional embeddings, input has {found}")]
    EmbeddingDim { expected: usize, found: usize },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("non-finite loss at epoch {epoch}, step {step} (lr {lr:e}, last finite loss {last_loss:?})")]
    NonFinite {
        epoch: usize,
        step: usize,
        lr: f64,
        last_loss: Option<f64>,
    },
    #[error("no training trials")]
    EmptyTrain,
    #[error("generative client does not expose log-likelihoods: {0}")]
    Unsupported(String),
    #[error("client error: {0}")]
    Client(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Scores and probabilities in candidate order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerOutput<T> {
    pub scores: [T; 3],
    pub probs: [T; 3],
    pub predicted: QuestionType,
}

impl<T: Scalar> ScorerOutput<T> {
    pub fn from_scores(scores: [T; 3], types: [QuestionType; 3]) -> Self {
        let p = softmax(&scores);
        ScorerOutput {
            scores,
            probs: [p[0], p[1], p[2]],
            predicted: types[argmax_first(&scores)],
        }
    }

    /// Scores rearranged into question-type order.
    pub fn by_type(&self, types: [QuestionType; 3]) -> ([T; 3], [T; 3]) {
        let mut s = self.scores;
        let mut p = self.probs;
        for (i, t) in types.iter().enumerate() {
            s[t.slot()] = self.scores[i];
            p[t.slot()] = self.probs[i];
        }
        (s, p)
    }
}

pub trait Scorer<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;
    /// Feature width the scorer was built for; `None` accepts anything.
    fn feature_dim(&self) -> Option<usize>;
    fn embedding_dim(&self) -> Option<usize> {
        None
    }
    /// Unchecked scores in candidate order.
    fn raw_scores(&self, input: &TrialInput<T>) -> [T; 3];

    fn score(&self, input: &TrialInput<T>) -> Result<ScorerOutput<T>, ScorerError> {
        if let Some(d) = self.feature_dim() {
            if input.features.cols() != d && input.features.rows() > 0 {
                return Err(ScorerError::FeatureDim {
                    expected: d,
                    found: input.features.cols(),
                });
            }
        }
        if let Some(d) = self.embedding_dim() {
            if input.word_emb.cols() != d {
                return Err(ScorerError::EmbeddingDim {
                    expected: d,
                    found: input.word_emb.cols(),
                });
            }
        }
        let types = input.candidates.each_ref().map(|c| c.qtype);
        Ok(ScorerOutput::from_scores(self.raw_scores(input), types))
    }
}

/// Scores each candidate by the character length of its text.
#[derive(Debug, Clone, Copy, Default)]
pub struct LengthStub;

impl<T: Scalar> Scorer<T> for LengthStub {
    fn name(&self) -> &str {
        "length-stub"
    }
    fn feature_dim(&self) -> Option<usize> {
        None
    }
    fn raw_scores(&self, input: &TrialInput<T>) -> [T; 3] {
        input
            .candidates
            .each_ref()
            .map(|c| T::of(c.text.chars().count() as f64))
    }
}

/// Named parameter matrices with per-parameter training flags.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    pub names: Vec<String>,
    pub values: Vec<Matrix<T>>,
    pub trainable: Vec<bool>,
    /// Whether weight decay applies.
    pub decay: Vec<bool>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn add(&mut self, name: &str, value: Matrix<T>, trainable: bool, decay: bool) -> usize {
        self.names.push(name.to_string());
        self.values.push(value);
        self.trainable.push(trainable);
        self.decay.push(decay);
        self.values.len() - 1
    }

    pub fn leaf(&self, tape: &mut Tape<T>, id: usize) -> Var {
        tape.param(id, &self.values[id])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_trainable(&self) -> usize {
        self.values
            .iter()
            .zip(&self.trainable)
            .filter(|(_, t)| **t)
            .map(|(v, _)| v.data().len())
            .sum()
    }
}

/// Glorot-uniform initialization.
pub(crate) fn glorot<T: Scalar>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<T> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| T::of(rng.random_range(-a..a))).collect(),
    )
}

pub(crate) fn small_normal<T: Scalar>(rows: usize, cols: usize, sd: f64, rng: &mut ChaCha8Rng) -> Matrix<T> {
    use rand_distr::{Distribution, Normal};
    let n = Normal::new(0.0, sd).expect("valid normal");
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| T::of(n.sample(rng))).collect())
}

/// Inverted-dropout mask, or `None` outside training.
pub(crate) fn dropout_mask<T: Scalar>(
    rows: usize,
    cols: usize,
    p: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> Option<Matrix<T>> {
    let rng = rng?;
    if p <= 0.0 {
        return None;
    }
    let keep = T::of(1.0 / (1.0 - p));
    Some(Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| if rng.random_bool(p) { T::zero() } else { keep })
            .collect(),
    ))
}

/// Differentiable scorer: a forward pass producing three logits.
pub trait NeuralScorer<T: Scalar>: Scorer<T> {
    fn params(&self) -> &ParamStore<T>;
    fn params_mut(&mut self) -> &mut ParamStore<T>;
    /// A 1 x 3 logit row; `rng` enables dropout.
    fn forward(&self, tape: &mut Tape<T>, input: &TrialInput<T>, rng: Option<&mut ChaCha8Rng>) -> Var;
    fn architecture(&self) -> Architecture;
    /// Hyperparameters and dimensions sufficient to rebuild the model.
    fn spec(&self) -> ModelSpec;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Rnn,
    Fusion,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Rnn => "rnn",
            Architecture::Fusion => "fusion",
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = ScorerError;
    fn from_str(s: &str) -> Result<Self, ScorerError> {
        match s {
            "rnn" => Ok(Architecture::Rnn),
            "fusion" => Ok(Architecture::Fusion),
            _ => Err(ScorerError::Config(format!(
                "unknown architecture {s:?} (expected rnn or fusion)"
            ))),
        }
    }
}

/// Everything needed to rebuild a model before loading its weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "architecture", rename_all = "snake_case")]
pub enum ModelSpec {
    Rnn(RnnConfig),
    Fusion(FusionConfig),
}

impl ModelSpec {
    pub fn architecture(&self) -> Architecture {
        match self {
            ModelSpec::Rnn(_) => Architecture::Rnn,
            ModelSpec::Fusion(_) => Architecture::Fusion,
        }
    }

    pub fn build<T: Scalar>(&self) -> Box<dyn NeuralScorer<T>> {
        match self {
            ModelSpec::Rnn(c) => Box::new(RnnScorer::new(c.clone())),
            ModelSpec::Fusion(c) => Box::new(FusionScorer::new(c.clone())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DifficultyLevel, ParagraphKey, TrialKey};

    pub(crate) fn toy_input(texts: [&str; 3]) -> TrialInput<f64> {
        let cand = |i: usize| CandidateInput {
            question_id: format!("q{i}"),
            qtype: QuestionType::from_slot(i),
            text: texts[i].to_string(),
            embedding: vec![0.0; 2],
            tokens: Matrix::zeros(1, 2),
        };
        TrialInput {
            trial_key: TrialKey::new("P1", ParagraphKey::new("A", "1", DifficultyLevel::Original)),
            true_type: QuestionType::Q1,
            fix_words: vec![],
            features: Matrix::zeros(0, 0),
            word_emb: Matrix::zeros(2, 2),
            candidates: [cand(0), cand(1), cand(2)],
            empty_scanpath: true,
        }
    }

    #[test]
    fn stub_scores_are_softmaxed_lengths() {
        let input = toy_input(["short?", "a much longer question?", "mid length?"]);
        let out = Scorer::<f64>::score(&LengthStub, &input).unwrap();
        let l = [6.0f64, 23.0, 11.0];
        let z: f64 = l.iter().map(|x| x.exp()).sum();
        for i in 0..3 {
            assert!((out.probs[i] - l[i].exp() / z).abs() < 1e-12);
        }
        assert_eq!(out.predicted, QuestionType::Q2);
        assert!((out.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
