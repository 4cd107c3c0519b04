use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DifficultyLevel {
    Original,
    Simplified,
}

impl DifficultyLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            DifficultyLevel::Original => "original",
            DifficultyLevel::Simplified => "simplified",
        }
    }
}

impl fmt::Display for DifficultyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DifficultyLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        // OneStop ships "Adv"/"Ele" for the two levels.
        match s.trim().to_ascii_lowercase().as_str() {
            "original" | "adv" | "advanced" => Ok(DifficultyLevel::Original),
            "simplified" | "ele" | "elementary" => Ok(DifficultyLevel::Simplified),
            other => Err(other.to_string()),
        }
    }
}

/// Identity of one stimulus paragraph in one difficulty level.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParagraphKey {
    pub article_id: String,
    pub paragraph_id: String,
    pub level: DifficultyLevel,
}

impl ParagraphKey {
    pub fn new(article_id: impl Into<String>, paragraph_id: impl Into<String>, level: DifficultyLevel) -> Self {
        Self {
            article_id: article_id.into(),
            paragraph_id: paragraph_id.into(),
            level,
        }
    }

    /// Same paragraph regardless of difficulty level.
    pub fn same_text(&self, other: &ParagraphKey) -> bool {
        self.article_id == other.article_id && self.paragraph_id == other.paragraph_id
    }
}

impl fmt::Display for ParagraphKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}|{}", self.article_id, self.paragraph_id, self.level)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Word {
    pub index: usize,
    pub text: String,
    pub top: f64,
    pub left: f64,
    pub start_of_line: bool,
    pub end_of_line: bool,
    pub length: usize,
    pub frequency: f64,
    pub surprisal: f64,
    pub is_content_word: bool,
    pub left_dependents_count: u32,
    pub right_dependents_count: u32,
    pub distance_to_head: i32,
}

impl Word {
    /// A word with neutral geometry and linguistic fields.
    pub fn plain(index: usize, text: impl Into<String>) -> Self {
        let text = text.into();
        Word {
            index,
            length: text.chars().count(),
            text,
            top: 0.0,
            left: 0.0,
            start_of_line: false,
            end_of_line: false,
            frequency: 0.0,
            surprisal: 0.0,
            is_content_word: true,
            left_dependents_count: 0,
            right_dependents_count: 0,
            distance_to_head: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paragraph {
    pub key: ParagraphKey,
    pub words: Vec<Word>,
}

impl Paragraph {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Words joined by single spaces.
    pub fn text(&self) -> String {
        let mut s = String::new();
        for (i, w) in self.words.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(&w.text);
        }
        s
    }

    pub(crate) fn validate(&self) -> Result<(), CorpusError> {
        if self.words.is_empty() {
            return Err(CorpusError::invalid(format!("paragraph {} has no words", self.key)));
        }
        for (i, w) in self.words.iter().enumerate() {
            if w.index != i {
                return Err(CorpusError::NonContiguousWords {
                    paragraph: self.key.to_string(),
                    expected: i,
                    found: w.index,
                });
            }
            if w.length != w.text.chars().count() {
                return Err(CorpusError::invalid(format!(
                    "paragraph {} word {}: length {} does not match text {:?}",
                    self.key, i, w.length, w.text
                )));
            }
            let reals = [w.top, w.left, w.frequency, w.surprisal];
            if reals.iter().any(|v| !v.is_finite()) {
                return Err(CorpusError::invalid(format!(
                    "paragraph {} word {}: non-finite numeric field",
                    self.key, i
                )));
            }
        }
        Ok(())
    }
}

/// Half-open interval of word indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, index: usize) -> bool {
        index >= self.start && index < self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Position of a question within its paragraph's triple. `Q1` owns the
/// distinct span, `Q2` and `Q3` share the other one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuestionType {
    Q1,
    Q2,
    Q3,
}

impl QuestionType {
    pub const ALL: [QuestionType; 3] = [QuestionType::Q1, QuestionType::Q2, QuestionType::Q3];

    /// 1, 2 or 3.
    pub fn index(self) -> u8 {
        match self {
            QuestionType::Q1 => 1,
            QuestionType::Q2 => 2,
            QuestionType::Q3 => 3,
        }
    }

    pub fn slot(self) -> usize {
        self.index() as usize - 1
    }

    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            1 => Some(QuestionType::Q1),
            2 => Some(QuestionType::Q2),
            3 => Some(QuestionType::Q3),
            _ => None,
        }
    }

    pub fn from_slot(slot: usize) -> Self {
        QuestionType::ALL[slot]
    }

    /// `true` for the two questions over the shared span.
    pub fn shares_span(self) -> bool {
        self != QuestionType::Q1
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answers {
    pub options: [String; 4],
    /// 0-based index into `options`.
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub question_id: String,
    pub text: String,
    pub qtype: QuestionType,
    pub critical_span: Span,
    pub answers: Option<Answers>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionSet {
    questions: [Question; 3],
}

impl QuestionSet {
    /// Builds the triple, checking type coverage and the shared-span layout.
    pub fn new(mut questions: Vec<Question>, n_words: usize) -> Result<Self, CorpusError> {
        questions.sort_by_key(|q| q.qtype);
        let detail = |msg: String| CorpusError::IncompleteQuestionSet { detail: msg };
        if questions.len() != 3 {
            return Err(detail(format!("expected 3 questions, found {}", questions.len())));
        }
        for (q, t) in questions.iter().zip(QuestionType::ALL) {
            if q.qtype != t {
                return Err(detail(format!(
                    "question types must be exactly 1, 2, 3 (question {})",
                    q.question_id
                )));
            }
            let s = q.critical_span;
            if s.start >= s.end || s.end > n_words {
                return Err(CorpusError::SpanOutOfBounds {
                    question_id: q.question_id.clone(),
                    span: s.to_string(),
                    n_words,
                });
            }
            if let Some(a) = &q.answers {
                if a.correct >= 4 {
                    return Err(detail(format!(
                        "question {}: correct answer index out of range",
                        q.question_id
                    )));
                }
            }
        }
        if questions[1].critical_span != questions[2].critical_span {
            return Err(detail(format!(
                "questions {} and {} must share a critical span",
                questions[1].question_id, questions[2].question_id
            )));
        }
        if questions[0].critical_span == questions[1].critical_span {
            return Err(detail(format!(
                "question {} must have its own critical span",
                questions[0].question_id
            )));
        }
        let questions: [Question; 3] = questions.try_into().expect("length checked");
        Ok(QuestionSet { questions })
    }

    pub fn get(&self, t: QuestionType) -> &Question {
        &self.questions[t.slot()]
    }

    pub fn questions(&self) -> &[Question; 3] {
        &self.questions
    }

    pub fn by_id(&self, question_id: &str) -> Option<&Question> {
        self.questions.iter().find(|q| q.question_id == question_id)
    }

    pub fn c1(&self) -> Span {
        self.questions[0].critical_span
    }

    pub fn c2(&self) -> Span {
        self.questions[1].critical_span
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    pub fix_index: u32,
    /// `None` for off-text fixations (sentinel `-1` in the tabular format).
    pub word_index: Option<usize>,
    pub duration_ms: f64,
    pub start_ms: Option<f64>,
    pub pupil: f64,
    pub x: f64,
    pub y: f64,
    pub next_sac_duration_ms: f64,
    pub next_sac_amplitude: f64,
    pub next_sac_angle: f64,
    pub next_sac_avg_velocity: f64,
    pub next_sac_peak_velocity: f64,
    pub next_fix_distance: f64,
    pub prev_fix_distance: f64,
    pub next_fix_angle: f64,
    pub prev_fix_angle: f64,
}

impl Fixation {
    /// A fixation with only order, location and duration set.
    pub fn at(fix_index: u32, word_index: Option<usize>, duration_ms: f64) -> Self {
        Fixation {
            fix_index,
            word_index,
            duration_ms,
            start_ms: None,
            pupil: 0.0,
            x: 0.0,
            y: 0.0,
            next_sac_duration_ms: 0.0,
            next_sac_amplitude: 0.0,
            next_sac_angle: 0.0,
            next_sac_avg_velocity: 0.0,
            next_sac_peak_velocity: 0.0,
            next_fix_distance: 0.0,
            prev_fix_distance: 0.0,
            next_fix_angle: 0.0,
            prev_fix_angle: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrialKey {
    pub participant_id: String,
    pub paragraph: ParagraphKey,
}

impl TrialKey {
    pub fn new(participant_id: impl Into<String>, paragraph: ParagraphKey) -> Self {
        TrialKey {
            participant_id: participant_id.into(),
            paragraph,
        }
    }
}

impl fmt::Display for TrialKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.participant_id, self.paragraph)
    }
}

impl FromStr for TrialKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('|').collect();
        if parts.len() != 4 {
            return Err(format!("trial key {s:?} must have 4 '|'-separated fields"));
        }
        let level = parts[3]
            .parse()
            .map_err(|v| format!("trial key {s:?}: unknown difficulty level {v:?}"))?;
        Ok(TrialKey::new(parts[0], ParagraphKey::new(parts[1], parts[2], level)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub key: TrialKey,
    /// Index into `Corpus::paragraphs`.
    pub paragraph: usize,
    /// The question the participant read before the paragraph.
    pub question: QuestionType,
    pub fixations: Vec<Fixation>,
    pub paragraph_rt_ms: f64,
    pub position_in_experiment: u32,
    pub comprehension_correct: bool,
}

impl Trial {
    pub fn on_text_fixations(&self) -> impl Iterator<Item = (usize, &Fixation)> {
        self.fixations.iter().filter_map(|f| f.word_index.map(|w| (w, f)))
    }
}

/// How surprisal values in the stimuli were measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SurprisalUnits {
    #[default]
    Bits,
    Nats,
}

impl FromStr for SurprisalUnits {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bits" => Ok(SurprisalUnits::Bits),
            "nats" => Ok(SurprisalUnits::Nats),
            other => Err(format!("unknown surprisal units {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CorpusMeta {
    pub name: String,
    pub surprisal_units: SurprisalUnits,
}

/// Immutable, validated collection of paragraphs, their question triples and trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub meta: CorpusMeta,
    paragraphs: Vec<Paragraph>,
    question_sets: Vec<QuestionSet>,
    trials: Vec<Trial>,
    #[serde(skip)]
    paragraph_index: HashMap<ParagraphKey, usize>,
    #[serde(skip)]
    trial_index: HashMap<TrialKey, usize>,
}

impl Corpus {
    /// `question_sets[i]` belongs to `paragraphs[i]`.
    pub fn new(
        meta: CorpusMeta,
        paragraphs: Vec<Paragraph>,
        question_sets: Vec<QuestionSet>,
        trials: Vec<Trial>,
    ) -> Result<Self, CorpusError> {
        if paragraphs.len() != question_sets.len() {
            return Err(CorpusError::invalid(format!(
                "{} paragraphs but {} question sets",
                paragraphs.len(),
                question_sets.len()
            )));
        }
        let mut corpus = Corpus {
            meta,
            paragraphs,
            question_sets,
            trials,
            paragraph_index: HashMap::new(),
            trial_index: HashMap::new(),
        };
        corpus.rebuild_index()?;
        corpus.validate()?;
        Ok(corpus)
    }

    pub(crate) fn rebuild_index(&mut self) -> Result<(), CorpusError> {
        self.paragraph_index.clear();
        for (i, p) in self.paragraphs.iter().enumerate() {
            if self.paragraph_index.insert(p.key.clone(), i).is_some() {
                return Err(CorpusError::DuplicateParagraph(p.key.to_string()));
            }
        }
        self.trial_index.clear();
        for (i, t) in self.trials.iter().enumerate() {
            if self.trial_index.insert(t.key.clone(), i).is_some() {
                return Err(CorpusError::invalid(format!("duplicate trial {}", t.key)));
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), CorpusError> {
        for (p, qs) in self.paragraphs.iter().zip(&self.question_sets) {
            p.validate()?;
            for q in qs.questions() {
                if q.critical_span.end > p.len() {
                    return Err(CorpusError::SpanOutOfBounds {
                        question_id: q.question_id.clone(),
                        span: q.critical_span.to_string(),
                        n_words: p.len(),
                    });
                }
            }
        }
        for t in &self.trials {
            let p = self
                .paragraphs
                .get(t.paragraph)
                .ok_or_else(|| CorpusError::MissingStimulus {
                    trial: t.key.to_string(),
                })?;
            if p.key != t.key.paragraph {
                return Err(CorpusError::invalid(format!(
                    "trial {} points at paragraph {}",
                    t.key, p.key
                )));
            }
            let n = p.len();
            let mut prev = None;
            for f in &t.fixations {
                if prev.is_some_and(|p| f.fix_index <= p) {
                    return Err(CorpusError::invalid(format!(
                        "trial {}: fix_index not increasing",
                        t.key
                    )));
                }
                prev = Some(f.fix_index);
                if !(f.duration_ms > 0.0) {
                    return Err(CorpusError::invalid(format!("trial {}: non-positive duration", t.key)));
                }
                if f.word_index.is_some_and(|w| w >= n) {
                    return Err(CorpusError::invalid(format!(
                        "trial {}: word index out of bounds",
                        t.key
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn paragraphs(&self) -> &[Paragraph] {
        &self.paragraphs
    }

    pub fn question_sets(&self) -> &[QuestionSet] {
        &self.question_sets
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn paragraph(&self, trial: &Trial) -> &Paragraph {
        &self.paragraphs[trial.paragraph]
    }

    pub fn question_set(&self, trial: &Trial) -> &QuestionSet {
        &self.question_sets[trial.paragraph]
    }

    /// The question the participant held while reading.
    pub fn true_question(&self, trial: &Trial) -> &Question {
        self.question_set(trial).get(trial.question)
    }

    pub fn paragraph_index(&self, key: &ParagraphKey) -> Option<usize> {
        self.paragraph_index.get(key).copied()
    }

    pub fn trial_index(&self, key: &TrialKey) -> Option<usize> {
        self.trial_index.get(key).copied()
    }

    pub fn trial(&self, key: &TrialKey) -> Option<&Trial> {
        self.trial_index(key).map(|i| &self.trials[i])
    }

    pub fn articles(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.paragraphs.iter().map(|p| p.key.article_id.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn participants(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.trials.iter().map(|t| t.key.participant_id.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    /// Number of paragraph word tokens read across all trials.
    pub fn word_tokens_read(&self) -> usize {
        self.trials.iter().map(|t| self.paragraphs[t.paragraph].len()).sum()
    }

    /// Distinct question ids (questions are shared across difficulty levels).
    pub fn question_count(&self) -> usize {
        let ids: BTreeSet<&str> = self
            .question_sets
            .iter()
            .flat_map(|qs| qs.questions().iter().map(|q| q.question_id.as_str()))
            .collect();
        ids.len()
    }

    /// Distinct (article, paragraph) texts, ignoring difficulty level.
    pub fn text_count(&self) -> usize {
        let ids: BTreeSet<(&str, &str)> = self
            .paragraphs
            .iter()
            .map(|p| (p.key.article_id.as_str(), p.key.paragraph_id.as_str()))
            .collect();
        ids.len()
    }
}
