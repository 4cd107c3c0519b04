//! Question selection with a generative decoder: the candidate with the
//! highest log-likelihood given the reconstruction prompt wins.

use crate::codec::{build_prompt, PromptKind, ScanpathFormat};
use crate::corpus::{Corpus, QuestionSet, QuestionType, Trial};
use crate::scalar::argmax_first;

use super::ScorerError;

pub trait LogLikClient {
    fn name(&self) -> &str;
    /// Log-likelihood of `candidate` as the continuation of `prompt`.
    fn candidate_loglik(&self, prompt: &str, candidate: &str) -> Result<f64, ScorerError>;
}

/// A client for a model that only returns text.
#[derive(Debug, Clone, Default)]
pub struct TextOnlyClient {
    pub model: String,
}

impl LogLikClient for TextOnlyClient {
    fn name(&self) -> &str {
        &self.model
    }
    fn candidate_loglik(&self, _prompt: &str, _candidate: &str) -> Result<f64, ScorerError> {
        Err(ScorerError::Unsupported(self.model.clone()))
    }
}

/// Returns the selected type and the log-likelihoods in type order; ties go
/// to the lowest type.
pub fn generative_loglik_select<C: LogLikClient + ?Sized>(
    client: &C,
    prompt: &str,
    questions: &QuestionSet,
) -> Result<(QuestionType, [f64; 3]), ScorerError> {
    let mut ll = [0.0; 3];
    for q in questions.questions() {
        ll[q.qtype.slot()] = client.candidate_loglik(prompt, &q.text)?;
    }
    Ok((QuestionType::from_slot(argmax_first(&ll)), ll))
}

/// Builds the main reconstruction prompt for `trial` and selects with it.
pub fn loglik_select_trial<C: LogLikClient + ?Sized>(
    client: &C,
    corpus: &Corpus,
    trial: &Trial,
    format: ScanpathFormat,
) -> Result<(QuestionType, [f64; 3]), ScorerError> {
    let bundle =
        build_prompt(corpus, trial, PromptKind::Main, format, false).map_err(|e| ScorerError::Client(e.to_string()))?;
    generative_loglik_select(client, &bundle.prompt, corpus.question_set(trial))
}
