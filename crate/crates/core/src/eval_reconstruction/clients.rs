//! External model contracts: question categorization and multiple-choice QA.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::sync::{LazyLock, Mutex};

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ReconstructionError;
use crate::codec::UIUC_TEMPLATE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum UiucCategory {
    Abbr,
    Entity,
    Description,
    Manner,
    Reason,
    Definition,
    Human,
    Location,
    Numeric,
}

impl UiucCategory {
    pub const ALL: [UiucCategory; 9] = [
        UiucCategory::Abbr,
        UiucCategory::Entity,
        UiucCategory::Description,
        UiucCategory::Manner,
        UiucCategory::Reason,
        UiucCategory::Definition,
        UiucCategory::Human,
        UiucCategory::Location,
        UiucCategory::Numeric,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UiucCategory::Abbr => "ABBR",
            UiucCategory::Entity => "ENTITY",
            UiucCategory::Description => "DESCRIPTION",
            UiucCategory::Manner => "MANNER",
            UiucCategory::Reason => "REASON",
            UiucCategory::Definition => "DEFINITION",
            UiucCategory::Human => "HUMAN",
            UiucCategory::Location => "LOCATION",
            UiucCategory::Numeric => "NUMERIC",
        }
    }
}

impl FromStr for UiucCategory {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let u = s.trim().to_uppercase();
        UiucCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == u)
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

/// A text-in, text-out model.
pub trait CompletionClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, ReconstructionError>;
}

/// Picks one of four answers for a question about a text.
pub trait QaClient: Send + Sync {
    fn answer(&self, question: &str, text: &str, options: &[String; 4]) -> Result<usize, ReconstructionError>;
}

/// Runs a shell command per request with the prompt on stdin.
#[derive(Debug, Clone)]
pub struct CommandClient {
    pub program: String,
    pub args: Vec<String>,
}

impl CommandClient {
    /// Splits a command line on whitespace.
    pub fn parse(cmd: &str) -> Option<Self> {
        let mut parts = cmd.split_whitespace().map(str::to_string);
        Some(CommandClient {
            program: parts.next()?,
            args: parts.collect(),
        })
    }

    fn run(&self, input: &str) -> Result<String, ReconstructionError> {
        let fail = |m: String| ReconstructionError::Client(format!("{}: {m}", self.program));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| fail(e.to_string()))?;
        child
            .stdin
            .take()
            .expect("piped stdin")
            .write_all(input.as_bytes())
            .map_err(|e| fail(e.to_string()))?;
        let out = child.wait_with_output().map_err(|e| fail(e.to_string()))?;
        if !out.status.success() {
            return Err(fail(format!("exited with {}", out.status)));
        }
        String::from_utf8(out.stdout).map_err(|e| fail(e.to_string()))
    }
}

impl CompletionClient for CommandClient {
    fn complete(&self, prompt: &str) -> Result<String, ReconstructionError> {
        self.run(prompt)
    }
}

#[derive(Serialize)]
struct QaRequest<'a> {
    question: &'a str,
    text: &'a str,
    options: &'a [String; 4],
}

/// The command reads one JSON request and prints an answer index (0-3) or letter (A-D).
impl QaClient for CommandClient {
    fn answer(&self, question: &str, text: &str, options: &[String; 4]) -> Result<usize, ReconstructionError> {
        let req = serde_json::to_string(&QaRequest {
            question,
            text,
            options,
        })
        .expect("request serializes");
        let out = self.run(&req)?;
        parse_answer_label(&out).ok_or_else(|| ReconstructionError::Client(format!("unparseable answer {out:?}")))
    }
}

pub fn parse_answer_label(s: &str) -> Option<usize> {
    let t = s
        .trim()
        .trim_matches(|c: char| c == '"' || c == '(' || c == ')' || c == '.');
    match t {
        "0" | "A" | "a" => Some(0),
        "1" | "B" | "b" => Some(1),
        "2" | "C" | "c" => Some(2),
        "3" | "D" | "d" => Some(3),
        _ => None,
    }
}

/// The categorization prompt followed by the numbered question batch.
pub fn uiuc_prompt(questions: &[&str]) -> String {
    let mut p = UIUC_TEMPLATE.to_string();
    if !p.ends_with('\n') {
        p.push('\n');
    }
    p.push_str("\nQuestions:\n");
    for (i, q) in questions.iter().enumerate() {
        p.push_str(&format!("{i}: {q}\n"));
    }
    p
}

static TUPLE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"\(\s*(\d+)\s*,\s*["']?\s*([A-Za-z]+)\s*["']?\s*\)"#).expect("valid regex"));

/// Parses `[(0, "HUMAN"), ...]`; `None` unless every index in `0..n` is labelled.
pub fn parse_uiuc_tuples(output: &str, n: usize) -> Option<Vec<UiucCategory>> {
    let mut labels = vec![None; n];
    for cap in TUPLE.captures_iter(output) {
        let i: usize = cap[1].parse().ok()?;
        if i >= n {
            return None;
        }
        labels[i] = Some(cap[2].parse().ok()?);
    }
    labels.into_iter().collect()
}

pub fn text_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Category labels keyed by question-text hash, persisted as JSON.
#[derive(Debug, Default)]
pub struct UiucCache {
    path: Option<PathBuf>,
    labels: Mutex<BTreeMap<String, UiucCategory>>,
}

impl UiucCache {
    pub fn in_memory() -> Self {
        UiucCache::default()
    }

    pub fn open(path: &Path) -> Result<Self, ReconstructionError> {
        let labels = if path.exists() {
            let s = std::fs::read_to_string(path).map_err(|e| ReconstructionError::io(path, e))?;
            serde_json::from_str(&s).map_err(|e| ReconstructionError::Format(format!("{}: {e}", path.display())))?
        } else {
            BTreeMap::new()
        };
        Ok(UiucCache {
            path: Some(path.to_path_buf()),
            labels: Mutex::new(labels),
        })
    }

    pub fn get(&self, question: &str) -> Option<UiucCategory> {
        self.labels
            .lock()
            .expect("cache lock")
            .get(&text_hash(question))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.labels.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn insert(&self, question: &str, label: UiucCategory) {
        self.labels
            .lock()
            .expect("cache lock")
            .insert(text_hash(question), label);
    }

    /// Writes the cache atomically.
    pub fn flush(&self) -> Result<(), ReconstructionError> {
        let Some(path) = &self.path else { return Ok(()) };
        let json = serde_json::to_string_pretty(&*self.labels.lock().expect("cache lock")).expect("labels serialize");
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, json).map_err(|e| ReconstructionError::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| ReconstructionError::io(path, e))
    }

    /// Labels every question, querying `client` in batches for uncached ones.
    /// A batch whose output cannot be parsed is retried once; questions of a
    /// batch that fails twice come back as `None`.
    pub fn classify(
        &self,
        questions: &[&str],
        client: Option<&dyn CompletionClient>,
        batch_size: usize,
    ) -> Vec<Option<UiucCategory>> {
        let mut missing: Vec<&str> = questions.iter().copied().filter(|q| self.get(q).is_none()).collect();
        missing.sort_unstable();
        missing.dedup();
        if let Some(client) = client {
            for batch in missing.chunks(batch_size.max(1)) {
                let prompt = uiuc_prompt(batch);
                let mut parsed = None;
                for attempt in 0..2 {
                    match client.complete(&prompt) {
                        Ok(out) => {
                            parsed = parse_uiuc_tuples(&out, batch.len());
                            if parsed.is_some() {
                                break;
                            }
                            log::warn!("unparseable categorization output (attempt {})", attempt + 1);
                        }
                        Err(e) => log::warn!("categorization client failed (attempt {}): {e}", attempt + 1),
                    }
                }
                if let Some(labels) = parsed {
                    for (q, l) in batch.iter().zip(labels) {
                        self.insert(q, l);
                    }
                }
            }
        }
        questions.iter().map(|q| self.get(q)).collect()
    }
}
