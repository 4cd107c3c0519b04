use gazegoal::codec::*;
use gazegoal::corpus::*;
use gazegoal::splits::{make_folds, Partition};
use gazegoal::synthetic::{synthetic_corpus, SyntheticConfig};
use proptest::prelude::*;

fn paragraph(n: usize) -> Paragraph {
    Paragraph {
        key: ParagraphKey::new("a", "1", DifficultyLevel::Original),
        words: (0..n).map(|i| Word::plain(i, format!("w{i}"))).collect(),
    }
}

fn fixations(seq: &[(Option<usize>, f64)]) -> Vec<Fixation> {
    seq.iter()
        .enumerate()
        .map(|(k, &(w, d))| Fixation::at(k as u32 + 1, w, d))
        .collect()
}

proptest! {
    #[test]
    fn round_trip_all_formats(seq in proptest::collection::vec((proptest::option::weighted(0.95, 0usize..12), 1.0f64..900.0), 0..60)) {
        let p = paragraph(12);
        let f = fixations(&seq);
        let want = scanpath_records(&p, &f);
        for fmt in ScanpathFormat::ALL {
            let back = parse_scanpath(&encode_scanpath(&p, &f, fmt).body, fmt).unwrap();
            if fmt != ScanpathFormat::WordLevel { prop_assert_eq!(&back.fixations, &want.fixations); }
            if fmt != ScanpathFormat::FixationLevel { prop_assert_eq!(&back.words, &want.words); }
        }
    }

    #[test]
    fn saccade_count_identities(seq in proptest::collection::vec((proptest::option::weighted(0.9, 0usize..8), 1.0f64..500.0), 0..40)) {
        let p = paragraph(8);
        let f = fixations(&seq);
        let r = scanpath_records(&p, &f);
        let on: Vec<usize> = f.iter().filter_map(|x| x.word_index).collect();
        for w in &r.words {
            let arrivals = on.windows(2).filter(|s| s[1] == w.word_index && s[0] != w.word_index).count() as u32;
            prop_assert_eq!(w.in_forward + w.in_backward, arrivals);
        }
        let ins: u32 = r.words.iter().map(|w| w.in_forward + w.in_backward).sum();
        let outs: u32 = r.words.iter().map(|w| w.out_forward + w.out_backward).sum();
        prop_assert_eq!(ins, outs);
        let fwd_in: u32 = r.words.iter().map(|w| w.in_forward).sum();
        let fwd_out: u32 = r.words.iter().map(|w| w.out_forward).sum();
        prop_assert_eq!(fwd_in, fwd_out);
    }
}

#[test]
fn prompts_are_byte_stable_and_fewshot_is_seeded() {
    let c = synthetic_corpus(&SyntheticConfig::default());
    let plan = &make_folds(&c, 11).unwrap()[0];
    let key = plan.keys_in(Partition::Test).next().unwrap().clone();
    let t = c.trial(&key).unwrap();
    for kind in [PromptKind::Main, PromptKind::Alternative, PromptKind::TextOnly] {
        let a = build_prompt(&c, t, kind, ScanpathFormat::Combined, false).unwrap();
        let b = build_prompt(&c, t, kind, ScanpathFormat::Combined, false).unwrap();
        assert_eq!(a.prompt, b.prompt);
        assert_eq!(a.scanpath.is_none(), kind == PromptKind::TextOnly);
    }
    let a = build_fewshot_prompt(&c, t, plan, ScanpathFormat::FixationLevel, 3, false).unwrap();
    let b = build_fewshot_prompt(&c, t, plan, ScanpathFormat::FixationLevel, 3, false).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.examples.len(), 10);
    let other = build_fewshot_prompt(&c, t, plan, ScanpathFormat::FixationLevel, 4, false).unwrap();
    assert_ne!(a.examples, other.examples);
    let rec: PromptRecord = (&a).into();
    let line = serde_json::to_string(&rec).unwrap();
    assert!(line.contains("\"kind\":\"fewshot\""));
}

#[test]
fn fewshot_shortfall_names_regime() {
    let c = synthetic_corpus(&SyntheticConfig {
        n_articles: 3,
        n_participants: 4,
        ..SyntheticConfig::default()
    });
    let folds = make_folds(&c, 2).unwrap();
    let mut saw = false;
    for plan in &folds {
        for key in plan.keys_in(Partition::Test) {
            let t = c.trial(key).unwrap();
            if let Err(e) = build_fewshot_prompt(&c, t, plan, ScanpathFormat::WordLevel, 1, false) {
                let msg = e.to_string();
                assert!(msg.contains("new_") && msg.contains("eligible"), "{msg}");
                saw = true;
            }
        }
    }
    assert!(saw);
}
