//! Textual scanpaths, question-generation prompts and output parsing.

mod fewshot;
mod parse;
mod prompts;
mod scanpath;

pub use fewshot::{build_fewshot_prompt, eligible, sample_examples, trial_seed, FEWSHOT_EXAMPLES};
pub use parse::{parse_generated_question, ParsedQuestion};
pub use prompts::*;
pub use scanpath::*;

use crate::splits::Regime;

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("empty stimulus: paragraph text is empty")]
    EmptyStimulus,
    #[error("few-shot prompts are built with build_fewshot_prompt")]
    NeedsExamples,
    #[error("{regime} needs {needed} few-shot examples but only {available} are eligible")]
    FewShotShortfall {
        regime: Regime,
        needed: usize,
        available: usize,
    },
    #[error("trial {0} is a training trial and has no evaluation regime")]
    NotEvaluated(String),
    #[error("{0}")]
    Fold(String),
    #[error("scanpath parse error: {0}")]
    Parse(String),
}
