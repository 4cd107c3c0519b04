//! Word-level reading measures aggregated from a trial's fixation sequence.
//!
//! Off-text fixations are removed before aggregation; they still count towards
//! the trial totals used by the percentage measures. Word order follows IA_ID
//! order, so "higher" means later in the paragraph.

use serde::{Deserialize, Serialize};

use super::{Fixation, Trial};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WordMeasure {
    pub dwell_time_ms: f64,
    pub dwell_time_pct: f64,
    pub fixation_pct: f64,
    pub fixation_count: u32,
    pub run_count: u32,
    pub first_fixation_duration: f64,
    pub first_run_dwell_time: f64,
    pub first_run_fixation_count: u32,
    pub last_fixation_duration: f64,
    pub last_run_dwell_time: f64,
    pub last_run_fixation_count: u32,
    pub skip: bool,
    pub first_fix_progressive: bool,
    pub regression_in_count: u32,
    pub regression_out_count: u32,
    pub regression_out_full_count: u32,
    pub regression_path_duration: f64,
    pub selective_regression_path_duration: f64,
    pub first_fixation_visited_ia_count: u32,
    pub normalized_word_id: f64,
    pub total_skip: bool,
}

impl WordMeasure {
    pub const FEATURE_NAMES: [&'static str; 21] = [
        "IA_DWELL_TIME",
        "IA_DWELL_TIME_%",
        "IA_FIXATION_%",
        "IA_FIXATION_COUNT",
        "IA_RUN_COUNT",
        "IA_FIRST_FIXATION_DURATION",
        "IA_FIRST_RUN_DWELL_TIME",
        "IA_FIRST_RUN_FIXATION_COUNT",
        "IA_LAST_FIXATION_DURATION",
        "IA_LAST_RUN_DWELL_TIME",
        "IA_LAST_RUN_FIXATION_COUNT",
        "IA_SKIP",
        "IA_FIRST_FIX_PROGRESSIVE",
        "IA_REGRESSION_IN_COUNT",
        "IA_REGRESSION_OUT_COUNT",
        "IA_REGRESSION_OUT_FULL_COUNT",
        "IA_REGRESSION_PATH_DURATION",
        "IA_SELECTIVE_REGRESSION_PATH_DURATION",
        "IA_FIRST_FIXATION_VISITED_IA_COUNT",
        "normalized_Word_ID",
        "total_skip",
    ];

    /// Values in `FEATURE_NAMES` order.
    pub fn feature_values(&self) -> [f64; 21] {
        let b = |v: bool| if v { 1.0 } else { 0.0 };
        [
            self.dwell_time_ms,
            self.dwell_time_pct,
            self.fixation_pct,
            self.fixation_count as f64,
            self.run_count as f64,
            self.first_fixation_duration,
            self.first_run_dwell_time,
            self.first_run_fixation_count as f64,
            self.last_fixation_duration,
            self.last_run_dwell_time,
            self.last_run_fixation_count as f64,
            b(self.skip),
            b(self.first_fix_progressive),
            self.regression_in_count as f64,
            self.regression_out_count as f64,
            self.regression_out_full_count as f64,
            self.regression_path_duration,
            self.selective_regression_path_duration,
            self.first_fixation_visited_ia_count as f64,
            self.normalized_word_id,
            b(self.total_skip),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordMeasures {
    pub words: Vec<WordMeasure>,
    /// Set when the trial had no on-text fixation at all.
    pub no_on_text_fixations: bool,
}

impl WordMeasures {
    pub fn dwell_times(&self) -> Vec<f64> {
        self.words.iter().map(|w| w.dwell_time_ms).collect()
    }

    pub fn total_dwell(&self) -> f64 {
        self.words.iter().map(|w| w.dwell_time_ms).sum()
    }
}

/// Aggregates a trial's fixations over a paragraph of `n_words` words.
pub fn aggregate_word_measures(trial: &Trial, n_words: usize) -> WordMeasures {
    aggregate_fixations(&trial.fixations, n_words)
}

pub fn aggregate_fixations(fixations: &[Fixation], n_words: usize) -> WordMeasures {
    let total_duration: f64 = fixations.iter().map(|f| f.duration_ms).sum();
    let total_count = fixations.len();
    let seq: Vec<(usize, f64)> = fixations
        .iter()
        .filter_map(|f| f.word_index.filter(|&w| w < n_words).map(|w| (w, f.duration_ms)))
        .collect();

    let mut words: Vec<WordMeasure> = (0..n_words)
        .map(|i| WordMeasure {
            normalized_word_id: if n_words > 1 {
                i as f64 / (n_words - 1) as f64
            } else {
                0.0
            },
            ..WordMeasure::default()
        })
        .collect();

    // counts, dwell, runs, first/last fixation
    let mut run_start = 0;
    while run_start < seq.len() {
        let w = seq[run_start].0;
        let mut run_end = run_start;
        while run_end < seq.len() && seq[run_end].0 == w {
            run_end += 1;
        }
        let run_dwell: f64 = seq[run_start..run_end].iter().map(|&(_, d)| d).sum();
        let run_fix = (run_end - run_start) as u32;
        let m = &mut words[w];
        if m.run_count == 0 {
            m.first_fixation_duration = seq[run_start].1;
            m.first_run_dwell_time = run_dwell;
            m.first_run_fixation_count = run_fix;
        }
        m.run_count += 1;
        m.fixation_count += run_fix;
        m.dwell_time_ms += run_dwell;
        m.last_fixation_duration = seq[run_end - 1].1;
        m.last_run_dwell_time = run_dwell;
        m.last_run_fixation_count = run_fix;
        run_start = run_end;
    }

    // transitions between consecutive on-text fixations
    for pair in seq.windows(2) {
        let (from, to) = (pair[0].0, pair[1].0);
        if to < from {
            words[from].regression_out_full_count += 1;
            words[to].regression_in_count += 1;
        }
    }

    // first-pass measures
    let mut max_so_far: Option<usize> = None;
    let mut visited = std::collections::BTreeSet::new();
    let mut first_seen = vec![false; n_words];
    for (k, &(w, _)) in seq.iter().enumerate() {
        if !first_seen[w] {
            first_seen[w] = true;
            let m = &mut words[w];
            m.first_fixation_visited_ia_count = visited.len() as u32;
            let progressive = max_so_far.is_none_or(|mx| mx <= w);
            m.first_fix_progressive = progressive;
            if progressive {
                // first-pass period: until the first fixation on a later word
                let mut go_past = 0.0;
                let mut selective = 0.0;
                let mut exits_back = 0;
                let mut j = k;
                while j < seq.len() && seq[j].0 <= w {
                    go_past += seq[j].1;
                    if seq[j].0 == w {
                        selective += seq[j].1;
                        if j + 1 < seq.len() && seq[j + 1].0 < w {
                            exits_back += 1;
                        }
                    }
                    j += 1;
                }
                m.regression_path_duration = go_past;
                m.selective_regression_path_duration = selective;
                m.regression_out_count = exits_back;
            }
        }
        visited.insert(w);
        max_so_far = Some(max_so_far.map_or(w, |mx| mx.max(w)));
    }

    for m in &mut words {
        m.total_skip = m.fixation_count == 0;
        m.skip = !m.first_fix_progressive;
        if total_duration > 0.0 {
            m.dwell_time_pct = m.dwell_time_ms / total_duration;
        }
        if total_count > 0 {
            m.fixation_pct = m.fixation_count as f64 / total_count as f64;
        }
    }

    WordMeasures {
        words,
        no_on_text_fixations: seq.is_empty(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixes(words: &[i64], durs: &[f64]) -> Vec<Fixation> {
        words
            .iter()
            .zip(durs)
            .enumerate()
            .map(|(i, (&w, &d))| Fixation::at(i as u32 + 1, (w >= 0).then_some(w as usize), d))
            .collect()
    }

    #[test]
    fn runs_and_regressions_hand_trace() {
        let m = aggregate_fixations(&fixes(&[4, 4, 5, 4], &[100.0, 120.0, 80.0, 50.0]), 8);
        let w4 = &m.words[4];
        assert_eq!(w4.dwell_time_ms, 270.0);
        assert_eq!(w4.fixation_count, 3);
        assert_eq!(w4.run_count, 2);
        assert_eq!(w4.first_run_dwell_time, 220.0);
        assert_eq!(w4.first_run_fixation_count, 2);
        assert_eq!(w4.last_run_dwell_time, 50.0);
        assert_eq!(w4.last_fixation_duration, 50.0);
        assert_eq!(w4.regression_in_count, 1);
        assert_eq!(w4.regression_path_duration, 220.0);
        assert!(!w4.skip);
        let w5 = &m.words[5];
        assert_eq!(w5.regression_out_count, 1);
        assert_eq!(w5.regression_out_full_count, 1);
        assert_eq!(w5.regression_path_duration, 130.0);
        assert_eq!(w5.selective_regression_path_duration, 80.0);
        assert_eq!(w5.first_fixation_visited_ia_count, 1);
        assert!(m.words[0].skip && m.words[0].total_skip);
    }

    #[test]
    fn single_fixation_and_unvisited_words() {
        let m = aggregate_fixations(&fixes(&[0], &[200.0]), 3);
        assert_eq!(m.words[0].dwell_time_ms, 200.0);
        assert_eq!(m.words[0].run_count, 1);
        assert!(!m.words[0].skip);
        for w in &m.words[1..] {
            assert!(w.total_skip);
            assert_eq!(w.dwell_time_ms, 0.0);
            assert_eq!(w.fixation_count, 0);
            assert_eq!(w.dwell_time_pct, 0.0);
        }
        assert_eq!(m.words[2].normalized_word_id, 1.0);
    }

    #[test]
    fn skip_means_first_fixation_after_later_word() {
        // word 1 first fixated only after word 2: skipped in first pass
        let m = aggregate_fixations(&fixes(&[0, 2, 1], &[100.0, 100.0, 100.0]), 3);
        assert!(m.words[1].skip);
        assert!(!m.words[1].total_skip);
        assert!(!m.words[1].first_fix_progressive);
        assert_eq!(m.words[1].regression_path_duration, 0.0);
    }

    #[test]
    fn off_text_fixations_are_excluded_but_counted_in_totals() {
        let m = aggregate_fixations(&fixes(&[0, -1, 0], &[100.0, 100.0, 100.0]), 1);
        // the off-text fixation does not split the run
        assert_eq!(m.words[0].run_count, 1);
        assert!((m.words[0].dwell_time_pct - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.words[0].normalized_word_id, 0.0);
        let empty = aggregate_fixations(&fixes(&[-1], &[100.0]), 2);
        assert!(empty.no_on_text_fixations);
        assert!(empty.words.iter().all(|w| w.skip && w.total_skip));
    }
}
