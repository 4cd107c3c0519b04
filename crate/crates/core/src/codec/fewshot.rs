//! Regime-aware few-shot example sampling.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::prompts::{build_prompt, render_fewshot, FewShotExample, PromptBundle, PromptKind};
use super::scanpath::{encode_scanpath, ScanpathFormat};
use super::CodecError;
use crate::corpus::{Corpus, Trial};
use crate::splits::{FoldPlan, Partition, Regime};

pub const FEWSHOT_EXAMPLES: usize = 10;

/// Whether `candidate` may serve as an example for `target` under `regime`.
pub fn eligible(regime: Regime, target: &Trial, candidate: &Trial) -> bool {
    let same_participant = target.key.participant_id == candidate.key.participant_id;
    let same_article = target.key.paragraph.article_id == candidate.key.paragraph.article_id;
    match regime {
        Regime::NewText => same_participant && !same_article,
        Regime::NewParticipant => target.key.paragraph.same_text(&candidate.key.paragraph) && !same_participant,
        Regime::NewTextAndParticipant => !same_participant && !same_article,
    }
}

/// Per-trial RNG seed derived from the run seed and the trial key.
pub fn trial_seed(seed: u64, trial: &Trial) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(trial.key.to_string().as_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

/// Indices into `corpus.trials()` of the sampled examples. The pool is the
/// fold's train and validation trials other than the target itself.
pub fn sample_examples(
    corpus: &Corpus,
    trial: &Trial,
    plan: &FoldPlan,
    seed: u64,
) -> Result<(Regime, Vec<usize>), CodecError> {
    let regime = plan
        .regime_of(&trial.key)
        .map_err(|e| CodecError::Fold(e.to_string()))?
        .regime
        .ok_or_else(|| CodecError::NotEvaluated(trial.key.to_string()))?;
    let pool: Vec<usize> = corpus
        .trials()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.key != trial.key)
        .filter(|(_, c)| {
            plan.regime_of(&c.key)
                .is_ok_and(|a| matches!(a.partition, Partition::Train | Partition::Val))
        })
        .filter(|(_, c)| eligible(regime, trial, c))
        .map(|(i, _)| i)
        .collect();
    if pool.len() < FEWSHOT_EXAMPLES {
        return Err(CodecError::FewShotShortfall {
            regime,
            needed: FEWSHOT_EXAMPLES,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, trial));
    let picked = sample(&mut rng, pool.len(), FEWSHOT_EXAMPLES)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    Ok((regime, picked))
}

pub fn build_fewshot_prompt(
    corpus: &Corpus,
    trial: &Trial,
    plan: &FoldPlan,
    format: ScanpathFormat,
    seed: u64,
    with_target: bool,
) -> Result<PromptBundle, CodecError> {
    let (_, picked) = sample_examples(corpus, trial, plan, seed)?;
    let examples: Vec<FewShotExample> = picked
        .iter()
        .map(|&i| {
            let t = &corpus.trials()[i];
            let p = corpus.paragraph(t);
            FewShotExample {
                trial_key: t.key.to_string(),
                paragraph: p.text(),
                scanpath: encode_scanpath(p, &t.fixations, format).body,
                question: corpus.true_question(t).text.clone(),
            }
        })
        .collect();
    let mut bundle = build_prompt(corpus, trial, PromptKind::Main, format, with_target)?;
    let scan = bundle.scanpath.as_ref().map_or("", |s| s.body.as_str()).to_string();
    bundle.prompt = render_fewshot(format, &examples, &bundle.paragraph, &scan)?;
    bundle.kind = PromptKind::Fewshot;
    bundle.examples = examples;
    Ok(bundle)
}
