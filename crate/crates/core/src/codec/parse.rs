//! Extracting a single question from free-form model output.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedQuestion {
    pub question: String,
    /// Set when the output was empty after cleanup.
    pub flagged: bool,
}

const QUOTES: &[char] = &['"', '\'', '`', '\u{201c}', '\u{201d}', '\u{2018}', '\u{2019}'];

fn clean_line(line: &str) -> String {
    let mut s = line.trim();
    loop {
        let before = s;
        s = s.trim_start_matches(['#', '>', '-', '*', '_']).trim();
        s = s.trim_end_matches(['*', '_']).trim();
        // single-word label such as "Answer:" or "Question:"
        if let Some((head, rest)) = s.split_once(':') {
            if !head.is_empty() && head.chars().all(|c| c.is_alphabetic()) && !rest.trim().is_empty() {
                s = rest.trim();
            }
        }
        s = s.trim_matches(QUOTES).trim();
        if s == before {
            break;
        }
    }
    s.replace("**", "").trim().to_string()
}

pub fn parse_generated_question(raw: &str) -> ParsedQuestion {
    let lines: Vec<String> = raw
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .map(clean_line)
        .filter(|l| !l.is_empty() && !l.starts_with('<'))
        .collect();
    if let Some(q) = lines.iter().find(|l| l.ends_with('?')) {
        return ParsedQuestion {
            question: q.clone(),
            flagged: false,
        };
    }
    let whole = lines.join(" ");
    ParsedQuestion {
        flagged: whole.is_empty(),
        question: whole,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_quotes_labels_and_fences() {
        assert_eq!(
            parse_generated_question("\"What is among the primary attractions of Lemnos?\"").question,
            "What is among the primary attractions of Lemnos?"
        );
        assert_eq!(
            parse_generated_question("Answer: Why do horseshoes bring luck?\nExplanation: tradition.").question,
            "Why do horseshoes bring luck?"
        );
        assert_eq!(parse_generated_question("```\n**Who won?**\n```").question, "Who won?");
        assert_eq!(
            parse_generated_question("  Describe the city  ").question,
            "Describe the city"
        );
        let e = parse_generated_question("");
        assert!(e.flagged && e.question.is_empty());
    }
}
