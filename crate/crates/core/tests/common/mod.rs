//! Oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::HashMap;

use gazegoal::eval_reconstruction::{QaClient, QuestionWord, ReconstructionError};

/// Hand-labelled opening question words.
pub fn question_word_labels() -> Vec<(&'static str, QuestionWord)> {
    use QuestionWord::*;
    vec![
        ("Why does Myslajek mention Russia, Lithuania and Belarus?", Why),
        ("Approximately how many taxi drivers are there in the UK?", Other),
        (
            "How does Myslajek react to what he sees between the two paw prints?",
            How,
        ),
        ("Where was wolf-hunting banned in 1995?", Where),
        ("Which of the following will be featured at Pestival 2013?", Which),
        ("Who threw the bottle into the Baltic Sea?", Who),
        ("What does Angella think of the state of the sea today?", What),
        ("Hazmat stands for what?", Other),
        ("  what is this?", What),
        ("WHEN did the ban begin?", When),
        ("Whom did the council consult?", Whom),
        ("Whose boat was found?", Whose),
        ("why?", Why),
        ("\"Why\" would anyone do that?", Why),
        ("Is the lake frozen?", Other),
        ("Did the wolves return?", Other),
        ("In which year was it banned?", Other),
        ("According to the text, what changed?", Other),
        ("How many wolves live there?", How),
        ("Where's the nearest station?", Where),
        ("What's the main reason?", What),
        ("When, exactly, did it start?", When),
        ("Who, according to the author, is responsible?", Who),
        ("Which: the first or the second?", Which),
        ("The study found what?", Other),
        ("Whatever happened to the bottle?", Other),
        ("Howard asked what?", Other),
        ("Whence came the wolves?", Other),
        ("Can you name the river?", Other),
        ("What\tis a root canal?", What),
    ]
}

/// Reference BLEU written independently: linear n-gram search, direct product.
pub fn reference_bleu(c: &[String], r: &[String]) -> f64 {
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let grams = |t: &[String], n: usize| -> Vec<Vec<String>> {
        if t.len() < n {
            return vec![];
        }
        (0..=t.len() - n).map(|i| t[i..i + n].to_vec()).collect()
    };
    let mut prod = 1.0;
    for n in 1..=4 {
        let cg = grams(c, n);
        let mut pool = grams(r, n);
        let mut hits = 0;
        for g in &cg {
            if let Some(pos) = pool.iter().position(|x| x == g) {
                pool.remove(pos);
                hits += 1;
            }
        }
        let p = if hits > 0 {
            hits as f64 / cg.len() as f64
        } else if n == 1 {
            0.0
        } else {
            1.0 / (cg.len() as f64 + 1.0)
        };
        prod *= p;
    }
    let bp = if c.len() >= r.len() {
        1.0
    } else {
        (1.0 - r.len() as f64 / c.len() as f64).exp()
    };
    bp * prod.powf(0.25)
}

/// Answers correctly exactly when shown the true question of a paragraph.
pub struct ExactQa(pub HashMap<String, usize>);

impl QaClient for ExactQa {
    fn answer(&self, question: &str, _text: &str, _options: &[String; 4]) -> Result<usize, ReconstructionError> {
        Ok(self.0.get(question).copied().map_or(99, |c| c))
    }
}
