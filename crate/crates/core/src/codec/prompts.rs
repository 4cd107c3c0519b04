//! Prompt templates and bundle construction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::scanpath::{encode_scanpath, ScanpathFormat, ScanpathText};
use super::CodecError;
use crate::corpus::{Corpus, Trial};

pub const TEMPLATE_VERSION: &str = "1";

pub const MAIN_TEMPLATE: &str = include_str!("../../templates/main.txt");
pub const ALTERNATIVE_TEMPLATE: &str = include_str!("../../templates/alternative.txt");
pub const TEXT_ONLY_TEMPLATE: &str = include_str!("../../templates/text_only.txt");
pub const FEWSHOT_TEMPLATE: &str = include_str!("../../templates/fewshot.txt");
pub const UIUC_TEMPLATE: &str = include_str!("../../templates/uiuc.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Main,
    Alternative,
    TextOnly,
    Arbitrary,
    Fewshot,
}

impl PromptKind {
    pub const ALL: [PromptKind; 5] = [
        PromptKind::Main,
        PromptKind::Alternative,
        PromptKind::TextOnly,
        PromptKind::Arbitrary,
        PromptKind::Fewshot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::Main => "main",
            PromptKind::Alternative => "alternative",
            PromptKind::TextOnly => "text_only",
            PromptKind::Arbitrary => "arbitrary",
            PromptKind::Fewshot => "fewshot",
        }
    }

    pub fn uses_gaze(self) -> bool {
        !matches!(self, PromptKind::TextOnly | PromptKind::Arbitrary)
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        PromptKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown prompt kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub trial_key: String,
    pub paragraph: String,
    pub scanpath: String,
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub trial_key: String,
    pub kind: PromptKind,
    pub format: Option<ScanpathFormat>,
    /// Instructions without the paragraph and scanpath.
    pub system: String,
    pub paragraph: String,
    pub scanpath: Option<ScanpathText>,
    pub examples: Vec<FewShotExample>,
    pub target: Option<String>,
    pub prompt: String,
}

/// One line of `prompts.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub trial_key: String,
    pub kind: PromptKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub format: Option<ScanpathFormat>,
    pub prompt: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scanpath_fixations: Option<usize>,
}

impl From<&PromptBundle> for PromptRecord {
    fn from(b: &PromptBundle) -> Self {
        PromptRecord {
            trial_key: b.trial_key.clone(),
            kind: b.kind,
            format: b.format,
            prompt: b.prompt.clone(),
            target: b.target.clone(),
            scanpath_fixations: b.scanpath.as_ref().map(|s| s.n_fixations),
        }
    }
}

/// `{FORMAT}` substitution: the format description and its example.
pub fn format_block(format: ScanpathFormat) -> String {
    format!("{}\nExample: {}", format.description(), format.example())
}

fn alternative_choices(format: ScanpathFormat) -> (&'static str, &'static str) {
    match format {
        ScanpathFormat::FixationLevel => ("a", "fixation-level"),
        ScanpathFormat::WordLevel => ("a", "word-level"),
        ScanpathFormat::Combined => ("two", "word-level and fixation-level"),
    }
}

const DATA_SLOTS: &str = "{PARAGRAPH}\n{SCANPATH}\n";

fn gaze_template(kind: PromptKind, format: ScanpathFormat) -> String {
    let base = match kind {
        PromptKind::Alternative => {
            let (count, level) = alternative_choices(format);
            ALTERNATIVE_TEMPLATE
                .replace("(a/two)", count)
                .replace("(word-level/fixation-level/word-level and fixation-level)", level)
        }
        _ => MAIN_TEMPLATE.to_string(),
    };
    base.replace("{FORMAT}", &format_block(format))
}

/// Instruction text with the paragraph and scanpath slots removed.
pub fn system_message(kind: PromptKind, format: ScanpathFormat) -> String {
    match kind {
        PromptKind::TextOnly | PromptKind::Arbitrary => TEXT_ONLY_TEMPLATE.trim_end().to_string(),
        PromptKind::Alternative => gaze_template(kind, format)
            .replace(DATA_SLOTS, "")
            .trim_end()
            .to_string(),
        PromptKind::Main | PromptKind::Fewshot => gaze_template(PromptKind::Main, format)
            .replace(DATA_SLOTS, "")
            .trim_end()
            .to_string(),
    }
}

/// Renders a zero-shot prompt from its parts.
pub fn render_prompt(
    kind: PromptKind,
    format: ScanpathFormat,
    paragraph: &str,
    scanpath: &str,
) -> Result<String, CodecError> {
    if paragraph.trim().is_empty() {
        return Err(CodecError::EmptyStimulus);
    }
    Ok(match kind {
        PromptKind::TextOnly | PromptKind::Arbitrary => format!("{TEXT_ONLY_TEMPLATE}\n{paragraph}\n"),
        PromptKind::Main | PromptKind::Alternative => gaze_template(kind, format)
            .replace("{PARAGRAPH}", paragraph)
            .replace("{SCANPATH}", scanpath),
        PromptKind::Fewshot => return Err(CodecError::NeedsExamples),
    })
}

/// Renders the few-shot scaffold with its examples and the test instance.
pub fn render_fewshot(
    format: ScanpathFormat,
    examples: &[FewShotExample],
    paragraph: &str,
    scanpath: &str,
) -> Result<String, CodecError> {
    if paragraph.trim().is_empty() {
        return Err(CodecError::EmptyStimulus);
    }
    let t = FEWSHOT_TEMPLATE;
    let start = t.find("    <Example>").expect("few-shot template has an example block");
    let end_tag = "</Example>\n";
    let end = t.find(end_tag).expect("few-shot template closes its example block") + end_tag.len();
    let marker = "    ... # X 10 examples\n";
    let after = &t[end..];
    let tail = after.strip_prefix(marker).unwrap_or(after);
    let block = &t[start..end];
    let mut out = t[..start].replace("{SYSTEM_MESSAGE}", &system_message(PromptKind::Main, format));
    for ex in examples {
        out.push_str(
            &block
                .replace("{PARAGRAPH_EXAMPLE}", &ex.paragraph)
                .replace("{SCANPATH_EXAMPLE}", &ex.scanpath)
                .replace("{EXAMPLE_TRUE_QUESTION}", &ex.question),
        );
    }
    out.push_str(
        &tail
            .replace("{PARAGRAPH_TEST}", paragraph)
            .replace("{SCANPATH_TEST}", scanpath),
    );
    Ok(out)
}

/// Zero-shot bundle for a trial. `with_target` attaches the true question.
pub fn build_prompt(
    corpus: &Corpus,
    trial: &Trial,
    kind: PromptKind,
    format: ScanpathFormat,
    with_target: bool,
) -> Result<PromptBundle, CodecError> {
    let paragraph = corpus.paragraph(trial);
    let text = paragraph.text();
    let scanpath = kind
        .uses_gaze()
        .then(|| encode_scanpath(paragraph, &trial.fixations, format));
    let prompt = render_prompt(kind, format, &text, scanpath.as_ref().map_or("", |s| s.body.as_str()))?;
    Ok(PromptBundle {
        trial_key: trial.key.to_string(),
        kind,
        format: kind.uses_gaze().then_some(format),
        system: system_message(kind, format),
        paragraph: text,
        scanpath,
        examples: Vec::new(),
        target: with_target.then(|| corpus.true_question(trial).text.clone()),
        prompt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_keep_their_markers() {
        let p = render_prompt(PromptKind::Main, ScanpathFormat::FixationLevel, "The fox.", "[]").unwrap();
        assert!(p.contains("\nEye Movements Representation:\n"));
        assert!(p.contains("formatted as a list of fixation-level features"));
        assert!(p.ends_with("The fox.\n[]\n"));
        let t = render_prompt(PromptKind::TextOnly, ScanpathFormat::FixationLevel, "The fox.", "").unwrap();
        assert!(t.contains("generate a question a reader had in mind"));
        assert!(t.ends_with("\nThe fox.\n"));
        let a = render_prompt(PromptKind::Alternative, ScanpathFormat::Combined, "x", "[] []").unwrap();
        assert!(a.contains("The input data is two time series composed of word-level and fixation-level features."));
        assert!(matches!(
            render_prompt(PromptKind::Main, ScanpathFormat::WordLevel, "  ", "[]"),
            Err(CodecError::EmptyStimulus)
        ));
    }

    #[test]
    fn fewshot_scaffold_repeats_examples() {
        let ex = FewShotExample {
            trial_key: "k".into(),
            paragraph: "P".into(),
            scanpath: "[]".into(),
            question: "Why?".into(),
        };
        let out = render_fewshot(
            ScanpathFormat::WordLevel,
            &vec![ex; 10],
            "TEST",
            "[[0, \"TEST\", 5, 0, 0, 0, 0]]",
        )
        .unwrap();
        assert_eq!(out.matches("<Example>").count(), 10);
        assert_eq!(out.matches("</OUTPUT>").count(), 10);
        assert!(!out.contains("# X 10"));
        assert!(!out.contains("{PARAGRAPH}") && !out.contains("{SCANPATH}"));
        assert!(out.trim_end().ends_with("[[0, \"TEST\", 5, 0, 0, 0, 0]]"));
        assert!(out.contains("Eye Movements Representation:"));
    }
}
