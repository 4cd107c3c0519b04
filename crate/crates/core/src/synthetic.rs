//! Seeded synthetic corpora with the same shape as the real stimuli.
//!
//! Readers dwell longer on the critical span of the question they were given
//! (`goal_strength`), so gaze carries recoverable goal information. With
//! `reading_batches > 1` each participant belongs to a batch that skips one
//! article in every `reading_batches`, and question types rotate over the
//! batches reading an article, which keeps every batch-stratified participant
//! group balanced over question types.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::corpus::*;

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub n_articles: usize,
    pub paragraphs_per_article: usize,
    pub words_per_paragraph: usize,
    pub n_participants: usize,
    pub reading_batches: usize,
    /// Multiplier on fixation duration inside the true critical span.
    pub goal_strength: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_articles: 20,
            paragraphs_per_article: 3,
            words_per_paragraph: 30,
            n_participants: 40,
            reading_batches: 4,
            goal_strength: 1.8,
            seed: 7,
        }
    }
}

const FUNCTION_WORDS: [&str; 16] = [
    "the", "of", "and", "a", "to", "in", "is", "that", "it", "was", "for", "on", "as", "with", "by", "at",
];
const ONSETS: [&str; 12] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t"];
const NUCLEI: [&str; 5] = ["a", "e", "i", "o", "u"];
const CODAS: [&str; 6] = ["", "n", "r", "s", "l", "m"];

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.random_range(1..=3);
    let mut s = String::new();
    for _ in 0..syllables {
        s.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
        s.push_str(NUCLEI[rng.random_range(0..NUCLEI.len())]);
        s.push_str(CODAS[rng.random_range(0..CODAS.len())]);
    }
    s
}

fn make_paragraph(key: ParagraphKey, n: usize, rng: &mut ChaCha8Rng) -> Paragraph {
    const PER_LINE: usize = 12;
    let mut words = Vec::with_capacity(n);
    let mut left = 10.0;
    for i in 0..n {
        let function = rng.random_bool(0.35);
        let mut text = if function {
            FUNCTION_WORDS[rng.random_range(0..FUNCTION_WORDS.len())].to_string()
        } else {
            pseudo_word(rng)
        };
        if i == 0 {
            let mut c = text.chars();
            text = c
                .next()
                .map(|f| f.to_uppercase().chain(c).collect())
                .unwrap_or_default();
        }
        if i + 1 == n {
            text.push('.');
        }
        let col = i % PER_LINE;
        if col == 0 {
            left = 10.0;
        }
        let length = text.chars().count();
        words.push(Word {
            index: i,
            top: 100.0 + (i / PER_LINE) as f64 * 60.0,
            left,
            start_of_line: col == 0,
            end_of_line: col == PER_LINE - 1 || i + 1 == n,
            length,
            frequency: if function { 7.0 } else { rng.random_range(2.0..5.0) },
            surprisal: if function {
                rng.random_range(1.0..4.0)
            } else {
                rng.random_range(5.0..15.0)
            },
            is_content_word: !function,
            left_dependents_count: rng.random_range(0..3),
            right_dependents_count: rng.random_range(0..3),
            distance_to_head: rng.random_range(-4..5),
            text,
        });
        left += length as f64 * 10.0 + 10.0;
    }
    Paragraph { key, words }
}

fn content_words(p: &Paragraph, span: Span) -> Vec<String> {
    let mut out: Vec<String> = p.words[span.start..span.end]
        .iter()
        .filter(|w| w.is_content_word)
        .map(|w| w.text.trim_end_matches('.').to_lowercase())
        .collect();
    if out.is_empty() {
        out.push(p.words[span.start].text.trim_end_matches('.').to_lowercase());
    }
    while out.len() < 3 {
        out.push(out[out.len() - 1].clone());
    }
    out
}

fn make_questions(p: &Paragraph, pidx: usize, rng: &mut ChaCha8Rng) -> QuestionSet {
    let n = p.len();
    let span_len = (n / 5).max(2);
    let early = Span::new(rng.random_range(0..=(n / 2 - span_len)), 0);
    let early = Span::new(early.start, early.start + span_len);
    let late_start = rng.random_range((n / 2)..=(n - span_len));
    let late = Span::new(late_start, late_start + span_len);
    let (c1, c2) = if rng.random_bool(0.5) {
        (early, late)
    } else {
        (late, early)
    };
    let w1 = content_words(p, c1);
    let w2 = content_words(p, c2);
    let texts = [
        format!("What is said about {} {}?", w1[0], w1[1]),
        format!("Why does {} {} matter here?", w2[0], w2[1]),
        format!("How does {} {} change over time?", w2[0], w2[1]),
    ];
    let questions = QuestionType::ALL
        .iter()
        .zip(texts)
        .map(|(&t, text)| {
            let qid = format!("q{pidx:03}_{}", t.index());
            Question {
                answers: Some(Answers {
                    options: [0, 1, 2, 3].map(|k| format!("option {} for {qid}", ["A", "B", "C", "D"][k])),
                    correct: rng.random_range(0..4),
                }),
                question_id: qid,
                text,
                qtype: t,
                critical_span: if t == QuestionType::Q1 { c1 } else { c2 },
            }
        })
        .collect();
    QuestionSet::new(questions, n).expect("synthetic question set is valid")
}

/// Simulates a left-to-right reading with skips, refixations, regressions and
/// a few off-text fixations; durations are stretched inside `goal_span`.
pub fn simulate_fixations(p: &Paragraph, goal_span: Span, goal_strength: f64, rng: &mut ChaCha8Rng) -> Vec<Fixation> {
    let dur = LogNormal::new(200f64.ln(), 0.35f64).expect("valid lognormal");
    let pupil = Normal::new(1000.0f64, 60.0).expect("valid normal");
    let n = p.len();
    let mut visits: Vec<Option<usize>> = Vec::new();
    let mut i = 0;
    while i < n {
        let in_goal = goal_span.contains(i);
        let skip_p = if p.words[i].length <= 3 { 0.45 } else { 0.15 };
        if !(in_goal && goal_strength > 1.0) && rng.random_bool(skip_p) {
            i += 1;
            continue;
        }
        visits.push(Some(i));
        if rng.random_bool(if in_goal { 0.35 } else { 0.12 }) {
            visits.push(Some(i));
        }
        if rng.random_bool(0.02) {
            visits.push(None);
        }
        if i > 2 && rng.random_bool(if in_goal { 0.15 } else { 0.06 }) {
            let back = rng.random_range(1..=3.min(i));
            visits.push(Some(i - back));
        }
        i += 1;
    }
    let mut out: Vec<Fixation> = Vec::with_capacity(visits.len());
    let mut clock = 0.0;
    for (k, w) in visits.iter().enumerate() {
        let mut d = dur.sample(rng).clamp(60.0, 900.0);
        if w.is_some_and(|w| goal_span.contains(w)) {
            d *= goal_strength;
        }
        let d = d.round().max(1.0);
        let (x, y) = match w {
            Some(w) => {
                let word = &p.words[*w];
                (word.left + word.length as f64 * 5.0, word.top + 20.0)
            }
            None => (5.0, 20.0),
        };
        let mut f = Fixation::at(k as u32 + 1, *w, d);
        f.start_ms = Some(clock);
        f.pupil = pupil.sample(rng).round();
        f.x = x;
        f.y = y;
        clock += d + 30.0;
        out.push(f);
    }
    for k in 0..out.len() {
        if k + 1 < out.len() {
            let (dx, dy) = (out[k + 1].x - out[k].x, out[k + 1].y - out[k].y);
            let dist = (dx * dx + dy * dy).sqrt();
            let angle = dy.atan2(dx).to_degrees();
            let amp = dist / 35.0;
            let f = &mut out[k];
            f.next_fix_distance = dist;
            f.next_fix_angle = angle;
            f.next_sac_amplitude = (amp * 100.0).round() / 100.0;
            f.next_sac_angle = angle;
            f.next_sac_duration_ms = (20.0 + 2.2 * amp).round();
            f.next_sac_avg_velocity = (amp / f.next_sac_duration_ms * 1000.0).round();
            f.next_sac_peak_velocity = (1.6 * f.next_sac_avg_velocity).round();
            out[k + 1].prev_fix_distance = dist;
            out[k + 1].prev_fix_angle = (-dy).atan2(-dx).to_degrees();
        }
    }
    out
}

/// Builds the corpus described by `config`.
pub fn synthetic_corpus(config: &SyntheticConfig) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let batches = config.reading_batches.max(1);
    let mut paragraphs = Vec::new();
    let mut question_sets = Vec::new();
    let mut article_of = Vec::new();
    for a in 0..config.n_articles {
        for j in 0..config.paragraphs_per_article {
            let key = ParagraphKey::new(
                format!("A{:02}", a + 1),
                format!("{}", j + 1),
                DifficultyLevel::Original,
            );
            let p = make_paragraph(key, config.words_per_paragraph.max(10), &mut rng);
            question_sets.push(make_questions(&p, paragraphs.len(), &mut rng));
            paragraphs.push(p);
            article_of.push(a);
        }
    }
    let mut trials = Vec::new();
    for pid in 0..config.n_participants {
        let batch = pid % batches;
        let participant = format!("P{:03}", pid + 1);
        let mut position = 0u32;
        for (pi, p) in paragraphs.iter().enumerate() {
            let a = article_of[pi];
            let qtype = if batches > 1 {
                if a % batches == batch {
                    continue;
                }
                // rank of this batch among the batches that read article `a`
                let rank = (0..batch).filter(|b| a % batches != *b).count();
                QuestionType::from_slot((rank + pi) % 3)
            } else {
                QuestionType::from_slot((pid + pi) % 3)
            };
            position += 1;
            let span = question_sets[pi].get(qtype).critical_span;
            let fixations = simulate_fixations(p, span, config.goal_strength, &mut rng);
            let rt = fixations
                .last()
                .map_or(0.0, |f| f.start_ms.unwrap_or(0.0) + f.duration_ms + 100.0);
            trials.push(Trial {
                key: TrialKey::new(participant.clone(), p.key.clone()),
                paragraph: pi,
                question: qtype,
                fixations,
                paragraph_rt_ms: rt,
                position_in_experiment: (position - 1) % 54 + 1,
                comprehension_correct: rng.random_bool(0.8),
            });
        }
    }
    let meta = CorpusMeta {
        name: "synthetic".to_string(),
        surprisal_units: SurprisalUnits::Bits,
    };
    Corpus::new(meta, paragraphs, question_sets, trials).expect("synthetic corpus is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_balance_question_types_per_paragraph() {
        let c = synthetic_corpus(&SyntheticConfig::default());
        assert_eq!(c.trials().len(), 60 * 30);
        for pi in 0..c.paragraphs().len() {
            let mut counts = [0; 3];
            for t in c.trials().iter().filter(|t| t.paragraph == pi) {
                counts[t.question.slot()] += 1;
            }
            assert_eq!(counts, [10, 10, 10]);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = SyntheticConfig {
            n_articles: 3,
            n_participants: 4,
            ..SyntheticConfig::default()
        };
        assert_eq!(synthetic_corpus(&cfg), synthetic_corpus(&cfg));
    }
}
