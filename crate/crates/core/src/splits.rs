//! Ten-fold cross-validation with participant and article groups.
//!
//! Participants and articles are each dealt into `n_folds` groups. Fold `k`
//! tests on every trial whose participant is in participant group `k` or whose
//! article is in article group `k`, and validates on the trials of group
//! `k + 1` that are not already in test. Everything else trains. The regime of
//! an evaluation trial follows which of its two groups is held out.
//!
//! Participants whose question-type assignments are identical across
//! paragraphs are dealt together, so every group sees each paragraph under a
//! balanced mix of question types.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, QuestionType, TrialKey};

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum SplitError {
    #[error("corpus too small: {0}")]
    TooSmall(String),
    #[error("trial {0} is not part of the fold plan")]
    UnknownTrial(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {detail}")]
    Parse { path: String, line: usize, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl Partition {
    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Val => "val",
            Partition::Test => "test",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Partition {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Partition::Train),
            "val" => Ok(Partition::Val),
            "test" => Ok(Partition::Test),
            _ => Err(format!("unknown partition {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    NewParticipant,
    NewText,
    NewTextAndParticipant,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::NewParticipant, Regime::NewText, Regime::NewTextAndParticipant];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::NewParticipant => "new_participant",
            Regime::NewText => "new_text",
            Regime::NewTextAndParticipant => "new_text_and_participant",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Regime::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown regime {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub partition: Partition,
    /// `None` exactly for training trials.
    pub regime: Option<Regime>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub fold_id: usize,
    keys: Vec<TrialKey>,
    assignments: Vec<Assignment>,
    #[serde(skip)]
    index: HashMap<TrialKey, usize>,
}

impl FoldPlan {
    pub fn from_entries(fold_id: usize, entries: Vec<(TrialKey, Assignment)>) -> Self {
        let (keys, assignments): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        let index = keys.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        FoldPlan {
            fold_id,
            keys,
            assignments,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&TrialKey, Assignment)> {
        self.keys.iter().zip(self.assignments.iter().copied())
    }

    pub fn regime_of(&self, key: &TrialKey) -> Result<Assignment, SplitError> {
        self.index
            .get(key)
            .map(|&i| self.assignments[i])
            .ok_or_else(|| SplitError::UnknownTrial(key.to_string()))
    }

    pub fn keys_in(&self, partition: Partition) -> impl Iterator<Item = &TrialKey> {
        self.entries()
            .filter(move |(_, a)| a.partition == partition)
            .map(|(k, _)| k)
    }

    pub fn count(&self, partition: Partition, regime: Option<Regime>) -> usize {
        self.assignments
            .iter()
            .filter(|a| a.partition == partition && (regime.is_none() || a.regime == regime))
            .count()
    }

    /// Writes `fold_{id}.tsv` rows: trial key, its fields, partition, regime.
    pub fn write_tsv(&self, path: &Path) -> Result<(), SplitError> {
        let io = |source| SplitError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        writeln!(
            out,
            "trial_key\tparticipant_id\tarticle_id\tparagraph_id\tlevel\tpartition\tregime"
        )
        .map_err(io)?;
        for (k, a) in self.entries() {
            writeln!(
                out,
                "{k}\t{}\t{}\t{}\t{}\t{}\t{}",
                k.participant_id,
                k.paragraph.article_id,
                k.paragraph.paragraph_id,
                k.paragraph.level,
                a.partition,
                a.regime.map_or("", Regime::as_str)
            )
            .map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn read_tsv(path: &Path, fold_id: usize) -> Result<Self, SplitError> {
        let p = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|source| SplitError::Io {
            path: p.clone(),
            source,
        })?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| SplitError::Io {
                path: p.clone(),
                source,
            })?;
            if i == 0 || line.is_empty() {
                continue;
            }
            let bad = |detail: String| SplitError::Parse {
                path: p.clone(),
                line: i + 1,
                detail,
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 7 {
                return Err(bad(format!("expected 7 fields, found {}", f.len())));
            }
            let key: TrialKey = f[0].parse().map_err(bad)?;
            let partition: Partition = f[5].parse().map_err(bad)?;
            let regime = if f[6].is_empty() {
                None
            } else {
                Some(f[6].parse().map_err(bad)?)
            };
            entries.push((key, Assignment { partition, regime }));
        }
        Ok(FoldPlan::from_entries(fold_id, entries))
    }

    pub fn file_name(fold_id: usize) -> String {
        format!("fold_{fold_id}.tsv")
    }
}

/// Spreads `count` items over `n` groups: round-robin when there are enough
/// items, evenly spaced group ids otherwise.
fn deal(count: usize, n: usize) -> Vec<usize> {
    (0..count)
        .map(|i| if count >= n { i % n } else { i * n / count })
        .collect()
}

/// Group id per participant and per article for a given seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub participants: BTreeMap<String, usize>,
    pub articles: BTreeMap<String, usize>,
}

pub fn assign_groups(corpus: &Corpus, seed: u64, n_folds: usize) -> GroupAssignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut signatures: BTreeMap<String, Vec<(usize, QuestionType)>> = BTreeMap::new();
    for t in corpus.trials() {
        signatures
            .entry(t.key.participant_id.clone())
            .or_default()
            .push((t.paragraph, t.question));
    }
    let mut classes: BTreeMap<Vec<(usize, QuestionType)>, Vec<String>> = BTreeMap::new();
    for (pid, mut sig) in signatures {
        sig.sort();
        classes.entry(sig).or_default().push(pid);
    }
    let mut ordered = Vec::new();
    for (_, mut members) in classes {
        members.shuffle(&mut rng);
        ordered.extend(members);
    }
    let participants = ordered.iter().cloned().zip(deal(ordered.len(), n_folds)).collect();

    let mut articles = corpus.articles();
    articles.shuffle(&mut rng);
    let article_groups = articles.iter().cloned().zip(deal(articles.len(), n_folds)).collect();

    GroupAssignment {
        participants,
        articles: article_groups,
    }
}

pub fn make_folds(corpus: &Corpus, seed: u64) -> Result<Vec<FoldPlan>, SplitError> {
    make_folds_n(corpus, seed, DEFAULT_FOLDS)
}

pub fn make_folds_n(corpus: &Corpus, seed: u64, n_folds: usize) -> Result<Vec<FoldPlan>, SplitError> {
    let n_articles = corpus.articles().len();
    let n_participants = corpus.participants().len();
    if n_folds < 2 {
        return Err(SplitError::TooSmall(format!("need at least 2 folds, got {n_folds}")));
    }
    if n_articles < 2 {
        return Err(SplitError::TooSmall(format!(
            "new_text needs at least 2 articles, corpus has {n_articles}"
        )));
    }
    if n_participants < 2 {
        return Err(SplitError::TooSmall(format!(
            "new_participant needs at least 2 participants, corpus has {n_participants}"
        )));
    }
    let groups = assign_groups(corpus, seed, n_folds);
    let mut plans = Vec::with_capacity(n_folds);
    for k in 0..n_folds {
        let v = (k + 1) % n_folds;
        let entries: Vec<(TrialKey, Assignment)> = corpus
            .trials()
            .iter()
            .map(|t| {
                let pg = groups.participants[&t.key.participant_id];
                let ag = groups.articles[&t.key.paragraph.article_id];
                (t.key.clone(), assignment_for(pg, ag, k, v))
            })
            .collect();
        let plan = FoldPlan::from_entries(k, entries);
        if plan.count(Partition::Train, None) == 0 {
            return Err(SplitError::TooSmall(format!("fold {k} has an empty training set")));
        }
        plans.push(plan);
    }
    Ok(plans)
}

fn assignment_for(pg: usize, ag: usize, test: usize, val: usize) -> Assignment {
    let regime = |p: bool, a: bool| match (p, a) {
        (true, true) => Regime::NewTextAndParticipant,
        (true, false) => Regime::NewParticipant,
        _ => Regime::NewText,
    };
    if pg == test || ag == test {
        Assignment {
            partition: Partition::Test,
            regime: Some(regime(pg == test, ag == test)),
        }
    } else if pg == val || ag == val {
        Assignment {
            partition: Partition::Val,
            regime: Some(regime(pg == val, ag == val)),
        }
    } else {
        Assignment {
            partition: Partition::Train,
            regime: None,
        }
    }
}

/// Paragraphs whose question-type counts within one partition differ by more
/// than one, as `(partition, paragraph index, counts)`.
pub fn balance_violations(corpus: &Corpus, plan: &FoldPlan) -> Vec<(Partition, usize, [usize; 3])> {
    let mut counts: BTreeMap<(Partition, usize), [usize; 3]> = BTreeMap::new();
    for t in corpus.trials() {
        if let Ok(a) = plan.regime_of(&t.key) {
            counts.entry((a.partition, t.paragraph)).or_default()[t.question.slot()] += 1;
        }
    }
    counts
        .into_iter()
        .filter(|(_, c)| c.iter().max().unwrap() - c.iter().min().unwrap() > 1)
        .map(|((p, i), c)| (p, i, c))
        .collect()
}
