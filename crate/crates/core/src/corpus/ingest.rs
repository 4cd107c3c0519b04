use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::{Path, PathBuf};

use csv::StringRecord;
use serde::{Deserialize, Serialize};

use super::model::*;
use super::CorpusError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestConfig {
    pub corpus_name: String,
    pub surprisal_units: SurprisalUnits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RejectReason {
    NonMonotoneFixIndex { line: u64, previous: u32, found: u32 },
    WordIndexOutOfBounds { line: u64, word_index: i64, n_words: usize },
    NonPositiveDuration { line: u64 },
    QuestionMismatch { line: u64, question_id: String },
    FixationAfterTrialEnd { line: u64 },
    PositionOutOfRange { position: u32 },
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RejectReason::NonMonotoneFixIndex { line, previous, found } => {
                write!(f, "line {line}: fix_index {found} does not follow {previous}")
            }
            RejectReason::WordIndexOutOfBounds {
                line,
                word_index,
                n_words,
            } => {
                write!(
                    f,
                    "line {line}: word_index {word_index} out of bounds for {n_words} words"
                )
            }
            RejectReason::NonPositiveDuration { line } => write!(f, "line {line}: duration must be positive"),
            RejectReason::QuestionMismatch { line, question_id } => {
                write!(f, "line {line}: question_id {question_id} differs from trial record")
            }
            RejectReason::FixationAfterTrialEnd { line } => {
                write!(f, "line {line}: fixation ends after paragraph_rt_ms")
            }
            RejectReason::PositionOutOfRange { position } => {
                write!(f, "position_in_experiment {position} outside 1..=54")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRejection {
    pub trial: TrialKey,
    pub reason: RejectReason,
}

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub corpus: Corpus,
    pub rejected: Vec<TrialRejection>,
    /// Trials accepted with zero on-text fixations.
    pub empty_scanpaths: Vec<TrialKey>,
}

/// Header-indexed view over one TSV file.
struct Table {
    name: String,
    columns: HashMap<String, usize>,
    rows: Vec<(u64, StringRecord)>,
}

impl Table {
    fn read(path: &Path) -> Result<Table, CorpusError> {
        let file = File::open(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(b'\t')
            .quoting(false)
            .flexible(false)
            .from_reader(file);
        let csv_err = |source| CorpusError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let headers = reader.headers().map_err(csv_err)?.clone();
        let columns = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            rows.push((i as u64 + 2, rec.map_err(csv_err)?));
        }
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Table { name, columns, rows })
    }

    fn require(&self, columns: &[&str]) -> Result<(), CorpusError> {
        for c in columns {
            if !self.columns.contains_key(*c) {
                return Err(CorpusError::MissingColumn {
                    file: self.name.clone(),
                    column: c.to_string(),
                });
            }
        }
        Ok(())
    }

    fn has(&self, column: &str) -> bool {
        self.columns.contains_key(column)
    }

    fn cell<'r>(&self, rec: &'r StringRecord, column: &str) -> Option<&'r str> {
        self.columns.get(column).and_then(|&i| rec.get(i)).map(str::trim)
    }

    fn bad(&self, line: u64, column: &str, value: &str) -> CorpusError {
        CorpusError::BadValue {
            file: self.name.clone(),
            line,
            column: column.to_string(),
            value: value.to_string(),
        }
    }

    fn str(&self, line: u64, rec: &StringRecord, column: &str) -> Result<String, CorpusError> {
        let v = self.cell(rec, column).unwrap_or("");
        if v.contains('|') {
            return Err(self.bad(line, column, v));
        }
        Ok(v.to_string())
    }

    fn parse<T: std::str::FromStr>(&self, line: u64, rec: &StringRecord, column: &str) -> Result<T, CorpusError> {
        let v = self.cell(rec, column).unwrap_or("");
        v.parse().map_err(|_| self.bad(line, column, v))
    }

    /// Optional real; absent column, empty cell or EyeLink's "." read as `default`.
    fn real_or(&self, line: u64, rec: &StringRecord, column: &str, default: f64) -> Result<f64, CorpusError> {
        match self.cell(rec, column) {
            None | Some("") | Some(".") => Ok(default),
            Some(v) => {
                let x: f64 = v.parse().map_err(|_| self.bad(line, column, v))?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(self.bad(line, column, v))
                }
            }
        }
    }

    fn int_or<T: std::str::FromStr>(
        &self,
        line: u64,
        rec: &StringRecord,
        column: &str,
        default: T,
    ) -> Result<T, CorpusError> {
        match self.cell(rec, column) {
            None | Some("") | Some(".") => Ok(default),
            Some(v) => v.parse().map_err(|_| self.bad(line, column, v)),
        }
    }

    fn flag_or(&self, line: u64, rec: &StringRecord, column: &str, default: bool) -> Result<bool, CorpusError> {
        match self.cell(rec, column) {
            None | Some("") | Some(".") => Ok(default),
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" => Ok(true),
                "0" | "false" | "no" => Ok(false),
                _ => Err(self.bad(line, column, v)),
            },
        }
    }

    fn paragraph_key(&self, line: u64, rec: &StringRecord) -> Result<ParagraphKey, CorpusError> {
        let raw = self.cell(rec, "difficulty_level").unwrap_or("");
        let level = raw.parse().map_err(|_| CorpusError::UnknownDifficulty {
            file: self.name.clone(),
            line,
            value: raw.to_string(),
        })?;
        Ok(ParagraphKey::new(
            self.str(line, rec, "article_id")?,
            self.str(line, rec, "paragraph_id")?,
            level,
        ))
    }
}

const KEY_COLUMNS: [&str; 3] = ["article_id", "paragraph_id", "difficulty_level"];

fn read_paragraphs(path: &Path) -> Result<Vec<Paragraph>, CorpusError> {
    let t = Table::read(path)?;
    t.require(&KEY_COLUMNS)?;
    t.require(&["word_index", "word"])?;
    let freq_col = if t.has("frequency") {
        "frequency"
    } else {
        "wordfreq_frequency"
    };
    let surp_col = if t.has("surprisal") {
        "surprisal"
    } else {
        "gpt2_surprisal"
    };
    let mut by_key: BTreeMap<ParagraphKey, Vec<Word>> = BTreeMap::new();
    let mut order: Vec<ParagraphKey> = Vec::new();
    for (line, rec) in &t.rows {
        let line = *line;
        let key = t.paragraph_key(line, rec)?;
        let text = t.cell(rec, "word").unwrap_or("").to_string();
        let length = text.chars().count();
        if t.has("word_length") {
            let declared: usize = t.parse(line, rec, "word_length")?;
            if declared != length {
                return Err(t.bad(line, "word_length", &declared.to_string()));
            }
        }
        let word = Word {
            index: t.parse(line, rec, "word_index")?,
            text,
            top: t.real_or(line, rec, "top", 0.0)?,
            left: t.real_or(line, rec, "left", 0.0)?,
            start_of_line: t.flag_or(line, rec, "start_of_line", false)?,
            end_of_line: t.flag_or(line, rec, "end_of_line", false)?,
            length,
            frequency: t.real_or(line, rec, freq_col, 0.0)?,
            surprisal: t.real_or(line, rec, surp_col, 0.0)?,
            is_content_word: t.flag_or(line, rec, "is_content_word", false)?,
            left_dependents_count: t.int_or(line, rec, "left_dependents_count", 0)?,
            right_dependents_count: t.int_or(line, rec, "right_dependents_count", 0)?,
            distance_to_head: t.int_or(line, rec, "distance_to_head", 0)?,
        };
        if !by_key.contains_key(&key) {
            order.push(key.clone());
        }
        by_key.entry(key).or_default().push(word);
    }
    let mut out = Vec::with_capacity(order.len());
    for key in order {
        let mut words = by_key.remove(&key).unwrap_or_default();
        words.sort_by_key(|w| w.index);
        let p = Paragraph { key, words };
        p.validate()?;
        out.push(p);
    }
    Ok(out)
}

fn parse_span_bound(t: &Table, line: u64, rec: &StringRecord, column: &str, qid: &str) -> Result<usize, CorpusError> {
    let raw = t.cell(rec, column).unwrap_or("");
    if raw.contains([',', ';', ' ']) {
        return Err(CorpusError::MultiSegmentSpan {
            question_id: qid.to_string(),
            value: raw.to_string(),
        });
    }
    raw.parse().map_err(|_| t.bad(line, column, raw))
}

fn read_questions(path: &Path) -> Result<Vec<(ParagraphKey, Question)>, CorpusError> {
    let t = Table::read(path)?;
    t.require(&KEY_COLUMNS)?;
    t.require(&["question_id", "type_index", "text", "span_start", "span_end"])?;
    let has_answers = ["answer_a", "answer_b", "answer_c", "answer_d", "correct_label"]
        .iter()
        .all(|c| t.has(c));
    let mut out = Vec::new();
    for (line, rec) in &t.rows {
        let line = *line;
        let key = t.paragraph_key(line, rec)?;
        let question_id = t.str(line, rec, "question_id")?;
        let type_raw: u8 = t.parse(line, rec, "type_index")?;
        let qtype =
            QuestionType::from_index(type_raw).ok_or_else(|| t.bad(line, "type_index", &type_raw.to_string()))?;
        let start = parse_span_bound(&t, line, rec, "span_start", &question_id)?;
        let end = parse_span_bound(&t, line, rec, "span_end", &question_id)?;
        let answers = if has_answers {
            let label = t.cell(rec, "correct_label").unwrap_or("");
            match label {
                "" | "." => None,
                _ => {
                    let correct = match label.to_ascii_uppercase().as_str() {
                        "A" | "0" => 0,
                        "B" | "1" => 1,
                        "C" | "2" => 2,
                        "D" | "3" => 3,
                        _ => return Err(t.bad(line, "correct_label", label)),
                    };
                    let opt = |c| t.cell(rec, c).unwrap_or("").to_string();
                    Some(Answers {
                        options: [opt("answer_a"), opt("answer_b"), opt("answer_c"), opt("answer_d")],
                        correct,
                    })
                }
            }
        } else {
            None
        };
        out.push((
            key,
            Question {
                question_id,
                text: t.cell(rec, "text").unwrap_or("").to_string(),
                qtype,
                critical_span: Span::new(start, end),
                answers,
            },
        ));
    }
    Ok(out)
}

struct TrialRecord {
    key: TrialKey,
    question_id: String,
    paragraph_rt_ms: f64,
    position: u32,
    comprehension_correct: bool,
}

fn read_trials(path: &Path) -> Result<Vec<TrialRecord>, CorpusError> {
    let t = Table::read(path)?;
    t.require(&KEY_COLUMNS)?;
    t.require(&[
        "participant_id",
        "question_id",
        "paragraph_rt_ms",
        "position_in_experiment",
        "comprehension_correct",
    ])?;
    let mut out = Vec::new();
    for (line, rec) in &t.rows {
        let line = *line;
        out.push(TrialRecord {
            key: TrialKey::new(t.str(line, rec, "participant_id")?, t.paragraph_key(line, rec)?),
            question_id: t.str(line, rec, "question_id")?,
            paragraph_rt_ms: t.real_or(line, rec, "paragraph_rt_ms", 0.0)?,
            position: t.parse(line, rec, "position_in_experiment")?,
            comprehension_correct: t.flag_or(line, rec, "comprehension_correct", false)?,
        });
    }
    Ok(out)
}

struct FixationRow {
    line: u64,
    question_id: Option<String>,
    raw_word_index: i64,
    fixation: Fixation,
}

fn read_fixations(path: &Path) -> Result<Vec<(TrialKey, FixationRow)>, CorpusError> {
    let t = Table::read(path)?;
    t.require(&KEY_COLUMNS)?;
    t.require(&["participant_id", "fix_index", "word_index", "duration_ms"])?;
    let mut out = Vec::new();
    for (line, rec) in &t.rows {
        let line = *line;
        let key = TrialKey::new(t.str(line, rec, "participant_id")?, t.paragraph_key(line, rec)?);
        let raw_word_index: i64 = t.parse(line, rec, "word_index")?;
        let start_ms = match t.cell(rec, "start_ms") {
            None | Some("") | Some(".") => None,
            Some(_) => Some(t.real_or(line, rec, "start_ms", 0.0)?),
        };
        let fixation = Fixation {
            fix_index: t.parse(line, rec, "fix_index")?,
            word_index: usize::try_from(raw_word_index).ok(),
            duration_ms: t.parse(line, rec, "duration_ms")?,
            start_ms,
            pupil: t.real_or(line, rec, "pupil", 0.0)?,
            x: t.real_or(line, rec, "x", 0.0)?,
            y: t.real_or(line, rec, "y", 0.0)?,
            next_sac_duration_ms: t.real_or(line, rec, "next_sac_duration_ms", 0.0)?,
            next_sac_amplitude: t.real_or(line, rec, "next_sac_amplitude", 0.0)?,
            next_sac_angle: t.real_or(line, rec, "next_sac_angle", 0.0)?,
            next_sac_avg_velocity: t.real_or(line, rec, "next_sac_avg_velocity", 0.0)?,
            next_sac_peak_velocity: t.real_or(line, rec, "next_sac_peak_velocity", 0.0)?,
            next_fix_distance: t.real_or(line, rec, "next_fix_distance", 0.0)?,
            prev_fix_distance: t.real_or(line, rec, "prev_fix_distance", 0.0)?,
            next_fix_angle: t.real_or(line, rec, "next_fix_angle", 0.0)?,
            prev_fix_angle: t.real_or(line, rec, "prev_fix_angle", 0.0)?,
        };
        let question_id = match t.cell(rec, "question_id") {
            None | Some("") => None,
            Some(q) => Some(q.to_string()),
        };
        out.push((
            key,
            FixationRow {
                line,
                question_id,
                raw_word_index,
                fixation,
            },
        ));
    }
    Ok(out)
}

fn check_fixations(
    rows: &[FixationRow],
    n_words: usize,
    question_id: &str,
    paragraph_rt_ms: f64,
) -> Option<RejectReason> {
    let mut prev: Option<u32> = None;
    for r in rows {
        let f = &r.fixation;
        if let Some(p) = prev {
            if f.fix_index <= p {
                return Some(RejectReason::NonMonotoneFixIndex {
                    line: r.line,
                    previous: p,
                    found: f.fix_index,
                });
            }
        }
        prev = Some(f.fix_index);
        if r.raw_word_index < -1 || r.raw_word_index >= n_words as i64 {
            return Some(RejectReason::WordIndexOutOfBounds {
                line: r.line,
                word_index: r.raw_word_index,
                n_words,
            });
        }
        if !(f.duration_ms > 0.0) || !f.duration_ms.is_finite() {
            return Some(RejectReason::NonPositiveDuration { line: r.line });
        }
        if r.question_id.as_deref().is_some_and(|q| q != question_id) {
            return Some(RejectReason::QuestionMismatch {
                line: r.line,
                question_id: r.question_id.clone().unwrap_or_default(),
            });
        }
        if let Some(start) = f.start_ms {
            if start + f.duration_ms > paragraph_rt_ms + 1e-6 {
                return Some(RejectReason::FixationAfterTrialEnd { line: r.line });
            }
        }
    }
    None
}

/// Reads `stimuli/{paragraphs,questions}.tsv` and `gaze/{trials,fixations}.tsv`.
pub fn ingest_trials(stimuli_dir: &Path, gaze_dir: &Path, config: &IngestConfig) -> Result<IngestReport, CorpusError> {
    let paragraphs = read_paragraphs(&stimuli_dir.join("paragraphs.tsv"))?;
    let questions = read_questions(&stimuli_dir.join("questions.tsv"))?;
    let trial_records = read_trials(&gaze_dir.join("trials.tsv"))?;
    let fixation_rows = read_fixations(&gaze_dir.join("fixations.tsv"))?;

    let para_index: HashMap<&ParagraphKey, usize> = paragraphs.iter().enumerate().map(|(i, p)| (&p.key, i)).collect();
    let mut grouped: Vec<Vec<Question>> = vec![Vec::new(); paragraphs.len()];
    for (key, q) in questions {
        let Some(&i) = para_index.get(&key) else {
            return Err(CorpusError::invalid(format!(
                "question {} refers to unknown paragraph {}",
                q.question_id, key
            )));
        };
        grouped[i].push(q);
    }
    let mut question_sets = Vec::with_capacity(paragraphs.len());
    for (p, qs) in paragraphs.iter().zip(grouped) {
        let set = QuestionSet::new(qs, p.len()).map_err(|e| match e {
            CorpusError::IncompleteQuestionSet { detail } => CorpusError::IncompleteQuestionSet {
                detail: format!("paragraph {}: {detail}", p.key),
            },
            other => other,
        })?;
        question_sets.push(set);
    }

    let mut fix_by_trial: HashMap<TrialKey, Vec<FixationRow>> = HashMap::new();
    for (key, row) in fixation_rows {
        fix_by_trial.entry(key).or_default().push(row);
    }

    let mut trials = Vec::with_capacity(trial_records.len());
    let mut rejected = Vec::new();
    let mut empty_scanpaths = Vec::new();
    for rec in trial_records {
        let Some(&pi) = para_index.get(&rec.key.paragraph) else {
            return Err(CorpusError::MissingStimulus {
                trial: rec.key.to_string(),
            });
        };
        let Some(question) = question_sets[pi].by_id(&rec.question_id) else {
            return Err(CorpusError::MissingStimulus {
                trial: format!("{} (question {})", rec.key, rec.question_id),
            });
        };
        let qtype = question.qtype;
        let rows = fix_by_trial.remove(&rec.key).unwrap_or_default();
        if !(1..=54).contains(&rec.position) {
            rejected.push(TrialRejection {
                trial: rec.key,
                reason: RejectReason::PositionOutOfRange { position: rec.position },
            });
            continue;
        }
        if let Some(reason) = check_fixations(&rows, paragraphs[pi].len(), &rec.question_id, rec.paragraph_rt_ms) {
            rejected.push(TrialRejection { trial: rec.key, reason });
            continue;
        }
        let fixations: Vec<Fixation> = rows.into_iter().map(|r| r.fixation).collect();
        if fixations.iter().all(|f| f.word_index.is_none()) {
            empty_scanpaths.push(rec.key.clone());
        }
        trials.push(Trial {
            key: rec.key,
            paragraph: pi,
            question: qtype,
            fixations,
            paragraph_rt_ms: rec.paragraph_rt_ms,
            position_in_experiment: rec.position,
            comprehension_correct: rec.comprehension_correct,
        });
    }
    if let Some((key, rows)) = fix_by_trial.into_iter().min_by_key(|(_, rows)| rows[0].line) {
        return Err(CorpusError::UnknownTrial {
            line: rows[0].line,
            trial: key.to_string(),
        });
    }

    let meta = CorpusMeta {
        name: config.corpus_name.clone(),
        surprisal_units: config.surprisal_units,
    };
    let corpus = Corpus::new(meta, paragraphs, question_sets, trials)?;
    Ok(IngestReport {
        corpus,
        rejected,
        empty_scanpaths,
    })
}

fn write_tsv(path: PathBuf, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.clone(),
        source,
    };
    let file = File::create(&path).map_err(io)?;
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .quote_style(csv::QuoteStyle::Never)
        .from_writer(file);
    let csv_err = |source| CorpusError::Csv {
        path: path.clone(),
        source,
    };
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

fn key_cells(k: &ParagraphKey) -> [String; 3] {
    [k.article_id.clone(), k.paragraph_id.clone(), k.level.to_string()]
}

/// Writes a corpus back out in the tabular interchange layout read by [`ingest_trials`].
pub fn write_tables(corpus: &Corpus, stimuli_dir: &Path, gaze_dir: &Path) -> Result<(), CorpusError> {
    for d in [stimuli_dir, gaze_dir] {
        std::fs::create_dir_all(d).map_err(|source| CorpusError::Io {
            path: d.to_path_buf(),
            source,
        })?;
    }
    write_tsv(
        stimuli_dir.join("paragraphs.tsv"),
        &[
            "article_id",
            "paragraph_id",
            "difficulty_level",
            "word_index",
            "word",
            "top",
            "left",
            "start_of_line",
            "end_of_line",
            "frequency",
            "surprisal",
            "is_content_word",
            "left_dependents_count",
            "right_dependents_count",
            "distance_to_head",
        ],
        corpus.paragraphs().iter().flat_map(|p| {
            p.words.iter().map(move |w| {
                let mut row = key_cells(&p.key).to_vec();
                row.extend([
                    w.index.to_string(),
                    w.text.clone(),
                    w.top.to_string(),
                    w.left.to_string(),
                    flag(w.start_of_line),
                    flag(w.end_of_line),
                    w.frequency.to_string(),
                    w.surprisal.to_string(),
                    flag(w.is_content_word),
                    w.left_dependents_count.to_string(),
                    w.right_dependents_count.to_string(),
                    w.distance_to_head.to_string(),
                ]);
                row
            })
        }),
    )?;
    write_tsv(
        stimuli_dir.join("questions.tsv"),
        &[
            "question_id",
            "article_id",
            "paragraph_id",
            "difficulty_level",
            "type_index",
            "text",
            "span_start",
            "span_end",
            "answer_a",
            "answer_b",
            "answer_c",
            "answer_d",
            "correct_label",
        ],
        corpus
            .paragraphs()
            .iter()
            .zip(corpus.question_sets())
            .flat_map(|(p, qs)| {
                qs.questions().iter().map(move |q| {
                    let mut row = vec![q.question_id.clone()];
                    row.extend(key_cells(&p.key));
                    row.extend([
                        q.qtype.index().to_string(),
                        q.text.clone(),
                        q.critical_span.start.to_string(),
                        q.critical_span.end.to_string(),
                    ]);
                    match &q.answers {
                        Some(a) => {
                            row.extend(a.options.iter().cloned());
                            row.push(["A", "B", "C", "D"][a.correct].to_string());
                        }
                        None => row.extend(std::iter::repeat_n(String::new(), 5)),
                    }
                    row
                })
            }),
    )?;
    write_tsv(
        gaze_dir.join("trials.tsv"),
        &[
            "participant_id",
            "article_id",
            "paragraph_id",
            "difficulty_level",
            "question_id",
            "paragraph_rt_ms",
            "position_in_experiment",
            "comprehension_correct",
        ],
        corpus.trials().iter().map(|t| {
            let mut row = vec![t.key.participant_id.clone()];
            row.extend(key_cells(&t.key.paragraph));
            row.extend([
                corpus.true_question(t).question_id.clone(),
                t.paragraph_rt_ms.to_string(),
                t.position_in_experiment.to_string(),
                flag(t.comprehension_correct),
            ]);
            row
        }),
    )?;
    write_tsv(
        gaze_dir.join("fixations.tsv"),
        &[
            "participant_id",
            "article_id",
            "paragraph_id",
            "difficulty_level",
            "question_id",
            "fix_index",
            "word_index",
            "duration_ms",
            "start_ms",
            "pupil",
            "x",
            "y",
            "next_sac_duration_ms",
            "next_sac_amplitude",
            "next_sac_angle",
            "next_sac_avg_velocity",
            "next_sac_peak_velocity",
            "next_fix_distance",
            "prev_fix_distance",
            "next_fix_angle",
            "prev_fix_angle",
        ],
        corpus.trials().iter().flat_map(|t| {
            let qid = corpus.true_question(t).question_id.clone();
            t.fixations.iter().map(move |f| {
                let mut row = vec![t.key.participant_id.clone()];
                row.extend(key_cells(&t.key.paragraph));
                row.extend([
                    qid.clone(),
                    f.fix_index.to_string(),
                    f.word_index.map_or("-1".to_string(), |w| w.to_string()),
                    f.duration_ms.to_string(),
                    f.start_ms.map_or(String::new(), |s| s.to_string()),
                    f.pupil.to_string(),
                    f.x.to_string(),
                    f.y.to_string(),
                    f.next_sac_duration_ms.to_string(),
                    f.next_sac_amplitude.to_string(),
                    f.next_sac_angle.to_string(),
                    f.next_sac_avg_velocity.to_string(),
                    f.next_sac_peak_velocity.to_string(),
                    f.next_fix_distance.to_string(),
                    f.prev_fix_distance.to_string(),
                    f.next_fix_angle.to_string(),
                    f.prev_fix_angle.to_string(),
                ]);
                row
            })
        }),
    )?;
    Ok(())
}
