//! Textual scanpath encodings and their parser.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CodecError;
use crate::corpus::{Fixation, Paragraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanpathFormat {
    FixationLevel,
    WordLevel,
    Combined,
}

impl ScanpathFormat {
    pub const ALL: [ScanpathFormat; 3] = [
        ScanpathFormat::FixationLevel,
        ScanpathFormat::WordLevel,
        ScanpathFormat::Combined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScanpathFormat::FixationLevel => "fixation_level",
            ScanpathFormat::WordLevel => "word_level",
            ScanpathFormat::Combined => "combined",
        }
    }

    /// Format description used in prompts.
    pub fn description(self) -> &'static str {
        match self {
            ScanpathFormat::FixationLevel => "a list of fixation-level features: [fixated word index, fixated word, fixation duration in ms, direction of next saccade (backward to earlier word / within word / forward to later word)]",
            ScanpathFormat::WordLevel => "a list of word-level features: [word index, word, total fixation duration in ms, incoming forward saccades (from earlier word), incoming backward saccades (from later word), outgoing forward saccades (to later word), outgoing backward saccades (to earlier word)]",
            ScanpathFormat::Combined => "two lists of word-level and fixation-level features: [fixated word index, fixated word, fixation duration in ms, direction of next saccade (backward / within / forward)] [word index, word, total fixation duration in ms, incoming forward saccades, incoming backward saccades, outgoing forward saccades, outgoing backward saccades]",
        }
    }

    pub fn example(self) -> &'static str {
        match self {
            ScanpathFormat::FixationLevel => r#"[[4, "fox", 220, backward], ...]"#,
            ScanpathFormat::WordLevel => r#"[[4, "fox", 320, 2, 1, 3, 0], ...]"#,
            ScanpathFormat::Combined => r#"[[4, "fox", 220, backward], ...] [[4, "fox", 320, 2, 1, 3, 0], ...]"#,
        }
    }
}

impl fmt::Display for ScanpathFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScanpathFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ScanpathFormat::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown scanpath format {s:?} (fixation_level, word_level, combined)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Backward,
    Within,
    Forward,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Backward => "backward",
            Direction::Within => "within",
            Direction::Forward => "forward",
        }
    }
}

pub fn saccade_direction(from_word: usize, to_word: usize) -> Direction {
    match to_word.cmp(&from_word) {
        std::cmp::Ordering::Less => Direction::Backward,
        std::cmp::Ordering::Equal => Direction::Within,
        std::cmp::Ordering::Greater => Direction::Forward,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixationRecord {
    pub word_index: usize,
    pub word: String,
    pub duration_ms: u64,
    /// Absent on the last on-text fixation.
    pub direction: Option<Direction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordRecord {
    pub word_index: usize,
    pub word: String,
    pub total_ms: u64,
    pub in_forward: u32,
    pub in_backward: u32,
    pub out_forward: u32,
    pub out_backward: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScanpathRecords {
    pub fixations: Vec<FixationRecord>,
    pub words: Vec<WordRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanpathText {
    pub format: ScanpathFormat,
    pub body: String,
    /// On-text fixations encoded.
    pub n_fixations: usize,
}

pub fn round_half_up(ms: f64) -> u64 {
    (ms + 0.5).floor().max(0.0) as u64
}

/// Structured records for a fixation sequence; off-text fixations are dropped.
pub fn scanpath_records(paragraph: &Paragraph, fixations: &[Fixation]) -> ScanpathRecords {
    let on: Vec<&Fixation> = fixations
        .iter()
        .filter(|f| f.word_index.is_some_and(|w| w < paragraph.len()))
        .collect();
    let idx = |f: &Fixation| f.word_index.unwrap();
    let fix = on
        .iter()
        .enumerate()
        .map(|(k, f)| FixationRecord {
            word_index: idx(f),
            word: paragraph.words[idx(f)].text.clone(),
            duration_ms: round_half_up(f.duration_ms),
            direction: on.get(k + 1).map(|n| saccade_direction(idx(f), idx(n))),
        })
        .collect();

    let n = paragraph.len();
    let mut total = vec![0.0; n];
    let mut fixated = vec![false; n];
    let mut counts = vec![[0u32; 4]; n];
    for f in &on {
        total[idx(f)] += f.duration_ms;
        fixated[idx(f)] = true;
    }
    for pair in on.windows(2) {
        let (a, b) = (idx(pair[0]), idx(pair[1]));
        match saccade_direction(a, b) {
            Direction::Forward => {
                counts[b][0] += 1;
                counts[a][2] += 1;
            }
            Direction::Backward => {
                counts[b][1] += 1;
                counts[a][3] += 1;
            }
            Direction::Within => {}
        }
    }
    let words = (0..n)
        .filter(|&i| fixated[i])
        .map(|i| WordRecord {
            word_index: i,
            word: paragraph.words[i].text.clone(),
            total_ms: round_half_up(total[i]),
            in_forward: counts[i][0],
            in_backward: counts[i][1],
            out_forward: counts[i][2],
            out_backward: counts[i][3],
        })
        .collect();
    ScanpathRecords { fixations: fix, words }
}

fn quote(word: &str) -> String {
    serde_json::to_string(word).expect("strings always serialize")
}

pub fn render_fixations(records: &[FixationRecord]) -> String {
    let items: Vec<String> = records
        .iter()
        .map(|r| match r.direction {
            Some(d) => format!(
                "[{}, {}, {}, {}]",
                r.word_index,
                quote(&r.word),
                r.duration_ms,
                d.as_str()
            ),
            None => format!("[{}, {}, {}]", r.word_index, quote(&r.word), r.duration_ms),
        })
        .collect();
    format!("[{}]", items.join(", "))
}

pub fn render_words(records: &[WordRecord]) -> String {
    let items: Vec<String> = records
        .iter()
        .map(|r| {
            format!(
                "[{}, {}, {}, {}, {}, {}, {}]",
                r.word_index,
                quote(&r.word),
                r.total_ms,
                r.in_forward,
                r.in_backward,
                r.out_forward,
                r.out_backward
            )
        })
        .collect();
    format!("[{}]", items.join(", "))
}

pub fn render(records: &ScanpathRecords, format: ScanpathFormat) -> String {
    match format {
        ScanpathFormat::FixationLevel => render_fixations(&records.fixations),
        ScanpathFormat::WordLevel => render_words(&records.words),
        ScanpathFormat::Combined => format!(
            "{} {}",
            render_fixations(&records.fixations),
            render_words(&records.words)
        ),
    }
}

pub fn encode_scanpath(paragraph: &Paragraph, fixations: &[Fixation], format: ScanpathFormat) -> ScanpathText {
    let records = scanpath_records(paragraph, fixations);
    ScanpathText {
        format,
        body: render(&records, format),
        n_fixations: records.fixations.len(),
    }
}

struct Cursor<'a> {
    s: &'a str,
    at: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, what: &str) -> CodecError {
        CodecError::Parse(format!("expected {what} at byte {}", self.at))
    }

    fn ws(&mut self) {
        while self.s[self.at..].starts_with(' ') {
            self.at += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.ws();
        if self.s[self.at..].starts_with(c) {
            self.at += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), CodecError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("{c:?}")))
        }
    }

    fn int(&mut self) -> Result<u64, CodecError> {
        self.ws();
        let rest = &self.s[self.at..];
        let len = rest.bytes().take_while(u8::is_ascii_digit).count();
        if len == 0 {
            return Err(self.err("integer"));
        }
        self.at += len;
        rest[..len].parse().map_err(|_| self.err("integer"))
    }

    fn string(&mut self) -> Result<String, CodecError> {
        self.ws();
        let rest = &self.s[self.at..];
        if !rest.starts_with('"') {
            return Err(self.err("string"));
        }
        let mut escaped = false;
        for (i, c) in rest.char_indices().skip(1) {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                let lit = &rest[..=i];
                self.at += i + 1;
                return serde_json::from_str(lit).map_err(|e| CodecError::Parse(e.to_string()));
            }
        }
        Err(self.err("closing quote"))
    }

    fn ident(&mut self) -> Result<Direction, CodecError> {
        self.ws();
        for d in [Direction::Backward, Direction::Within, Direction::Forward] {
            if self.s[self.at..].starts_with(d.as_str()) {
                self.at += d.as_str().len();
                return Ok(d);
            }
        }
        Err(self.err("direction"))
    }

    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T, CodecError>) -> Result<Vec<T>, CodecError> {
        self.expect('[')?;
        let mut out = Vec::new();
        if self.eat(']') {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.eat(']') {
                return Ok(out);
            }
            self.expect(',')?;
        }
    }
}

fn fixation_item(c: &mut Cursor) -> Result<FixationRecord, CodecError> {
    c.expect('[')?;
    let word_index = c.int()? as usize;
    c.expect(',')?;
    let word = c.string()?;
    c.expect(',')?;
    let duration_ms = c.int()?;
    let direction = if c.eat(',') { Some(c.ident()?) } else { None };
    c.expect(']')?;
    Ok(FixationRecord {
        word_index,
        word,
        duration_ms,
        direction,
    })
}

fn word_item(c: &mut Cursor) -> Result<WordRecord, CodecError> {
    c.expect('[')?;
    let word_index = c.int()? as usize;
    c.expect(',')?;
    let word = c.string()?;
    let mut v = [0u64; 5];
    for x in &mut v {
        c.expect(',')?;
        *x = c.int()?;
    }
    c.expect(']')?;
    Ok(WordRecord {
        word_index,
        word,
        total_ms: v[0],
        in_forward: v[1] as u32,
        in_backward: v[2] as u32,
        out_forward: v[3] as u32,
        out_backward: v[4] as u32,
    })
}

/// Inverse of [`render`].
pub fn parse_scanpath(body: &str, format: ScanpathFormat) -> Result<ScanpathRecords, CodecError> {
    let mut c = Cursor { s: body, at: 0 };
    let mut out = ScanpathRecords::default();
    match format {
        ScanpathFormat::FixationLevel => out.fixations = c.list(fixation_item)?,
        ScanpathFormat::WordLevel => out.words = c.list(word_item)?,
        ScanpathFormat::Combined => {
            out.fixations = c.list(fixation_item)?;
            out.words = c.list(word_item)?;
        }
    }
    c.ws();
    if c.at != body.len() {
        return Err(c.err("end of input"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DifficultyLevel, ParagraphKey, Word};

    fn para(words: &[&str]) -> Paragraph {
        Paragraph {
            key: ParagraphKey::new("a", "1", DifficultyLevel::Original),
            words: words.iter().enumerate().map(|(i, w)| Word::plain(i, *w)).collect(),
        }
    }

    #[test]
    fn directions() {
        assert_eq!(saccade_direction(4, 3), Direction::Backward);
        assert_eq!(saccade_direction(4, 4), Direction::Within);
        assert_eq!(saccade_direction(4, 5), Direction::Forward);
    }

    #[test]
    fn single_fixation_has_no_direction() {
        let p = para(&["The", "fox"]);
        let t = encode_scanpath(&p, &[Fixation::at(1, Some(0), 150.0)], ScanpathFormat::FixationLevel);
        assert_eq!(t.body, r#"[[0, "The", 150]]"#);
        let e = encode_scanpath(&p, &[], ScanpathFormat::Combined);
        assert_eq!(e.body, "[] []");
        assert_eq!(
            parse_scanpath(&e.body, ScanpathFormat::Combined).unwrap(),
            ScanpathRecords::default()
        );
    }

    #[test]
    fn off_text_is_dropped_and_direction_skips_it() {
        let p = para(&["a", "b", "c"]);
        let f = [
            Fixation::at(1, Some(2), 100.4),
            Fixation::at(2, None, 80.0),
            Fixation::at(3, Some(1), 99.5),
        ];
        let t = encode_scanpath(&p, &f, ScanpathFormat::FixationLevel);
        assert_eq!(t.body, r#"[[2, "c", 100, backward], [1, "b", 100]]"#);
        assert_eq!(t.n_fixations, 2);
    }

    #[test]
    fn quotes_in_words_round_trip() {
        let p = para(&["say", "\"hi\"", "back\\slash"]);
        let f = [
            Fixation::at(1, Some(1), 10.0),
            Fixation::at(2, Some(2), 20.0),
            Fixation::at(3, Some(0), 30.0),
        ];
        for fmt in ScanpathFormat::ALL {
            let t = encode_scanpath(&p, &f, fmt);
            let back = parse_scanpath(&t.body, fmt).unwrap();
            let want = scanpath_records(&p, &f);
            if fmt != ScanpathFormat::WordLevel {
                assert_eq!(back.fixations, want.fixations);
            }
            if fmt != ScanpathFormat::FixationLevel {
                assert_eq!(back.words, want.words);
            }
        }
    }

    #[test]
    fn malformed_bodies_are_rejected() {
        for bad in ["[", "[[1, \"a\"]]", "[[1, \"a\", 3, sideways]]", "[] x"] {
            assert!(parse_scanpath(bad, ScanpathFormat::FixationLevel).is_err(), "{bad}");
        }
    }
}
