//! Per-fixation feature rows and the three candidate inputs of a trial.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{aggregate_word_measures, Corpus, QuestionType, Trial, TrialKey, WordMeasure};
use crate::embeddings::EmbeddingProvider;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

use super::ScorerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    FixationLevel,
    Saccade,
    WordLevel,
    Linguistic,
    ParagraphRt,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 5] = [
        FeatureGroup::FixationLevel,
        FeatureGroup::Saccade,
        FeatureGroup::WordLevel,
        FeatureGroup::Linguistic,
        FeatureGroup::ParagraphRt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::FixationLevel => "fixation_level",
            FeatureGroup::Saccade => "saccade",
            FeatureGroup::WordLevel => "word_level",
            FeatureGroup::Linguistic => "linguistic",
            FeatureGroup::ParagraphRt => "paragraph_rt",
        }
    }

    /// Column names contributed by the group, in row order.
    pub fn names(self) -> Vec<&'static str> {
        match self {
            FeatureGroup::FixationLevel => FIXATION_LEVEL.to_vec(),
            FeatureGroup::Saccade => SACCADE.to_vec(),
            FeatureGroup::WordLevel => {
                let mut v = WordMeasure::FEATURE_NAMES.to_vec();
                v.extend(["IA_TOP", "IA_LEFT"]);
                v
            }
            FeatureGroup::Linguistic => LINGUISTIC.to_vec(),
            FeatureGroup::ParagraphRt => vec!["PARAGRAPH_RT"],
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureGroup {
    type Err = ScorerError;
    fn from_str(s: &str) -> Result<Self, ScorerError> {
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| ScorerError::Config(format!("unknown feature group {s:?}")))
    }
}

pub const FIXATION_LEVEL: [&str; 5] = [
    "CURRENT_FIX_INDEX",
    "CURRENT_FIX_DURATION",
    "CURRENT_FIX_PUPIL",
    "CURRENT_FIX_X",
    "CURRENT_FIX_Y",
];

pub const SACCADE: [&str; 10] = [
    "NEXT_FIX_ANGLE",
    "PREVIOUS_FIX_ANGLE",
    "NEXT_FIX_DISTANCE",
    "PREVIOUS_FIX_DISTANCE",
    "NEXT_SAC_AMPLITUDE",
    "NEXT_SAC_ANGLE",
    "NEXT_SAC_AVG_VELOCITY",
    "NEXT_SAC_DURATION",
    "NEXT_SAC_PEAK_VELOCITY",
    "NEXT_FIX_INTEREST_AREA_INDEX",
];

pub const LINGUISTIC: [&str; 8] = [
    "surprisal",
    "frequency",
    "word_length",
    "start_of_line",
    "end_of_line",
    "is_content_word",
    "left_dependents_count",
    "right_dependents_count",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub groups: BTreeSet<FeatureGroup>,
    /// Keep at most this many on-text fixations, dropping from the end.
    pub max_fixations: Option<usize>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            groups: FeatureGroup::ALL.into_iter().collect(),
            max_fixations: None,
        }
    }
}

impl FeatureConfig {
    /// Parses a comma-separated group list.
    pub fn from_list(list: &str) -> Result<Self, ScorerError> {
        let groups = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(FeatureGroup::from_str)
            .collect::<Result<BTreeSet<_>, _>>()?;
        Ok(FeatureConfig {
            groups,
            max_fixations: None,
        })
    }

    pub fn without(mut self, g: FeatureGroup) -> Self {
        self.groups.remove(&g);
        self
    }

    /// Feature column names in row order.
    pub fn names(&self) -> Vec<&'static str> {
        self.groups.iter().flat_map(|g| g.names()).collect()
    }

    pub fn dim(&self) -> usize {
        self.names().len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateInput<T> {
    pub question_id: String,
    pub qtype: QuestionType,
    pub text: String,
    pub embedding: Vec<T>,
    /// One row per question token.
    pub tokens: Matrix<T>,
}

/// What the scorers see for one trial, shared by its three candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialInput<T> {
    pub trial_key: TrialKey,
    pub true_type: QuestionType,
    /// Fixated word index for each feature row.
    pub fix_words: Vec<usize>,
    /// `fix_words.len()` x `FeatureConfig::dim()`.
    pub features: Matrix<T>,
    /// One row per paragraph word.
    pub word_emb: Matrix<T>,
    pub candidates: [CandidateInput<T>; 3],
    /// Set when the trial has no on-text fixation.
    pub empty_scanpath: bool,
}

impl<T: Scalar> TrialInput<T> {
    /// Position of `qtype` among the candidates.
    pub fn slot_of(&self, qtype: QuestionType) -> usize {
        self.candidates
            .iter()
            .position(|c| c.qtype == qtype)
            .expect("every type has a candidate")
    }

    pub fn target(&self) -> usize {
        self.slot_of(self.true_type)
    }

    /// Reorders the candidates; `order[i]` is the old slot placed at `i`.
    pub fn permuted(&self, order: [usize; 3]) -> Self {
        let mut out = self.clone();
        out.candidates = order.map(|i| self.candidates[i].clone());
        out
    }
}

fn b(v: bool) -> f64 {
    if v {
        1.0
    } else {
        0.0
    }
}

/// Raw feature rows for the on-text fixations of a trial.
pub fn fixation_rows(corpus: &Corpus, trial: &Trial, config: &FeatureConfig) -> (Vec<usize>, Vec<Vec<f64>>) {
    let paragraph = corpus.paragraph(trial);
    let measures = aggregate_word_measures(trial, paragraph.len());
    let mut on_text: Vec<_> = trial.on_text_fixations().collect();
    if let Some(m) = config.max_fixations {
        on_text.truncate(m);
    }
    let mut words = Vec::with_capacity(on_text.len());
    let mut rows = Vec::with_capacity(on_text.len());
    for (k, &(w, f)) in on_text.iter().enumerate() {
        // the last fixation points at itself
        let next_w = on_text.get(k + 1).map_or(w, |n| n.0);
        let word = &paragraph.words[w];
        let mut row = Vec::with_capacity(config.dim());
        for g in &config.groups {
            match g {
                FeatureGroup::FixationLevel => {
                    row.extend([f.fix_index as f64, f.duration_ms, f.pupil, f.x, f.y]);
                }
                FeatureGroup::Saccade => row.extend([
                    f.next_fix_angle,
                    f.prev_fix_angle,
                    f.next_fix_distance,
                    f.prev_fix_distance,
                    f.next_sac_amplitude,
                    f.next_sac_angle,
                    f.next_sac_avg_velocity,
                    f.next_sac_duration_ms,
                    f.next_sac_peak_velocity,
                    next_w as f64,
                ]),
                FeatureGroup::WordLevel => {
                    row.extend(measures.words[w].feature_values());
                    row.extend([word.top, word.left]);
                }
                FeatureGroup::Linguistic => row.extend([
                    word.surprisal,
                    word.frequency,
                    word.length as f64,
                    b(word.start_of_line),
                    b(word.end_of_line),
                    b(word.is_content_word),
                    word.left_dependents_count as f64,
                    word.right_dependents_count as f64,
                ]),
                FeatureGroup::ParagraphRt => row.push(trial.paragraph_rt_ms),
            }
        }
        // NaN or infinite raw values are treated as missing
        for x in row.iter_mut() {
            if !x.is_finite() {
                *x = 0.0;
            }
        }
        words.push(w);
        rows.push(row);
    }
    (words, rows)
}

/// Builds the shared trial input and its three candidates in type order.
pub fn assemble_candidate_inputs<T: Scalar, P: EmbeddingProvider<T> + ?Sized>(
    corpus: &Corpus,
    trial: &Trial,
    provider: &P,
    config: &FeatureConfig,
) -> Result<TrialInput<T>, ScorerError> {
    let (fix_words, rows) = fixation_rows(corpus, trial, config);
    let dim = config.dim();
    let mut features = Matrix::zeros(rows.len(), dim);
    for (i, r) in rows.iter().enumerate() {
        for (d, &x) in features.row_mut(i).iter_mut().zip(r) {
            *d = T::of(x);
        }
    }
    if fix_words.is_empty() {
        log::warn!("trial {} has an empty scanpath", trial.key);
    }
    let word_emb = provider.word_embeddings(corpus.paragraph(trial))?.vectors;
    let qs = corpus.question_set(trial);
    let mut cands = Vec::with_capacity(3);
    for q in qs.questions() {
        cands.push(CandidateInput {
            question_id: q.question_id.clone(),
            qtype: q.qtype,
            text: q.text.clone(),
            embedding: provider.question_embedding(q)?.vector,
            tokens: provider.token_embeddings(&q.text)?,
        });
    }
    let candidates: [CandidateInput<T>; 3] = cands
        .try_into()
        .map_err(|_| ScorerError::Config("three candidates".into()))?;
    Ok(TrialInput {
        trial_key: trial.key.clone(),
        true_type: trial.question,
        empty_scanpath: fix_words.is_empty(),
        fix_words,
        features,
        word_emb,
        candidates,
    })
}

/// Training-split mean and population standard deviation of every feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub fold_id: usize,
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl FeatureStats {
    pub fn fit<T: Scalar>(fold_id: usize, names: &[&str], train: &[TrialInput<T>]) -> Self {
        let dim = names.len();
        let mut n = 0usize;
        let mut sum = vec![0.0; dim];
        for t in train {
            for row in t.features.iter_rows() {
                n += 1;
                for (s, x) in sum.iter_mut().zip(row) {
                    *s += x.f64();
                }
            }
        }
        let denom = n.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / denom).collect();
        let mut ss = vec![0.0; dim];
        for t in train {
            for row in t.features.iter_rows() {
                for ((s, x), m) in ss.iter_mut().zip(row).zip(&mean) {
                    *s += (x.f64() - m).powi(2);
                }
            }
        }
        FeatureStats {
            fold_id,
            names: names.iter().map(|s| s.to_string()).collect(),
            mean,
            sd: ss.iter().map(|s| (s / denom).sqrt()).collect(),
        }
    }

    pub fn standardize_value(&self, j: usize, x: f64) -> f64 {
        if self.sd[j] == 0.0 {
            0.0
        } else {
            (x - self.mean[j]) / self.sd[j]
        }
    }

    /// Standardizes in place; refuses stats fitted on another fold.
    pub fn apply<T: Scalar>(&self, fold_id: usize, inputs: &mut [TrialInput<T>]) -> Result<(), ScorerError> {
        if fold_id != self.fold_id {
            return Err(ScorerError::FoldMismatch {
                stats: self.fold_id,
                requested: fold_id,
            });
        }
        for t in inputs.iter_mut() {
            if t.features.cols() != self.names.len() {
                return Err(ScorerError::FeatureDim {
                    expected: self.names.len(),
                    found: t.features.cols(),
                });
            }
            for i in 0..t.features.rows() {
                for (j, x) in t.features.row_mut(i).iter_mut().enumerate() {
                    *x = T::of(self.standardize_value(j, x.f64()));
                }
            }
        }
        Ok(())
    }

    /// Hex sha256 of the JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("stats serialize");
        hex::encode(Sha256::digest(json))
    }
}

/// Fits stats on `train` and standardizes every set with them.
pub fn standardize_features<T: Scalar>(
    fold_id: usize,
    config: &FeatureConfig,
    train: &mut [TrialInput<T>],
    others: &mut [&mut [TrialInput<T>]],
) -> Result<FeatureStats, ScorerError> {
    let stats = FeatureStats::fit(fold_id, &config.names(), train);
    stats.apply(fold_id, train)?;
    for o in others.iter_mut() {
        stats.apply(fold_id, o)?;
    }
    Ok(stats)
}
