use std::collections::HashSet;

use gazegoal::corpus::*;
use gazegoal::splits::*;
use gazegoal::synthetic::{synthetic_corpus, SyntheticConfig};

fn seen_in_train(plan: &FoldPlan) -> (HashSet<String>, HashSet<String>, HashSet<ParagraphKey>) {
    let mut ps = HashSet::new();
    let mut arts = HashSet::new();
    let mut paras = HashSet::new();
    for k in plan.keys_in(Partition::Train) {
        ps.insert(k.participant_id.clone());
        arts.insert(k.paragraph.article_id.clone());
        paras.insert(k.paragraph.clone());
    }
    (ps, arts, paras)
}

#[test]
fn proportions_and_coverage_on_balanced_design() {
    let c = synthetic_corpus(&SyntheticConfig::default());
    let n = c.trials().len() as f64;
    let folds = make_folds(&c, 17).unwrap();
    let mut cover = [0usize; 3];
    for plan in &folds {
        let pct = |p| plan.count(p, None) as f64 / n;
        assert!((pct(Partition::Train) - 0.64).abs() <= 0.01);
        assert!((pct(Partition::Val) - 0.17).abs() <= 0.01);
        assert!((pct(Partition::Test) - 0.19).abs() <= 0.01);
        for (i, r) in Regime::ALL.into_iter().enumerate() {
            cover[i] += plan.count(Partition::Test, Some(r));
        }
        assert!(balance_violations(&c, plan).is_empty());
    }
    let cover: Vec<f64> = cover.iter().map(|&x| x as f64 / n).collect();
    assert!((cover[0] - 0.9).abs() < 1e-9 && (cover[1] - 0.9).abs() < 1e-9 && (cover[2] - 0.1).abs() < 1e-9);
}

#[test]
fn no_leakage_and_article_grouping() {
    let c = synthetic_corpus(&SyntheticConfig::default());
    for plan in make_folds(&c, 3).unwrap() {
        let (ps, arts, _) = seen_in_train(&plan);
        let mut crossed = 0;
        for (k, a) in plan.entries() {
            match a.regime {
                Some(Regime::NewParticipant) => assert!(!ps.contains(&k.participant_id)),
                Some(Regime::NewText) => {
                    assert!(!arts.contains(&k.paragraph.article_id));
                    // readers of held-out articles who belong to the other
                    // held-out participant group are unseen as well
                    if !ps.contains(&k.participant_id) {
                        crossed += 1;
                    }
                }
                Some(Regime::NewTextAndParticipant) => {
                    assert!(!ps.contains(&k.participant_id) && !arts.contains(&k.paragraph.article_id))
                }
                None => assert_eq!(a.partition, Partition::Train),
            }
            if a.partition != Partition::Train {
                assert!(a.regime.is_some());
            }
        }
        assert!(crossed as f64 <= 0.01 * c.trials().len() as f64 * 2.0 + 1e-9);
    }
}

#[test]
fn toy_corpus_exhaustive_over_seeds() {
    let c = synthetic_corpus(&SyntheticConfig {
        n_articles: 2,
        paragraphs_per_article: 2,
        n_participants: 2,
        reading_batches: 1,
        ..SyntheticConfig::default()
    });
    for seed in 0..64 {
        let folds = make_folds(&c, seed).unwrap();
        for plan in &folds {
            let (ps, arts, _) = seen_in_train(plan);
            // no article straddles train and a new-text evaluation
            for (k, a) in plan.entries() {
                if matches!(a.regime, Some(Regime::NewText | Regime::NewTextAndParticipant)) {
                    assert!(!arts.contains(&k.paragraph.article_id));
                }
                if matches!(a.regime, Some(Regime::NewParticipant | Regime::NewTextAndParticipant)) {
                    assert!(!ps.contains(&k.participant_id));
                }
            }
            // for each reader, an article's paragraphs share one assignment
            let mut sides: std::collections::HashMap<(String, String), HashSet<Assignment>> = Default::default();
            for (k, a) in plan.entries() {
                sides
                    .entry((k.participant_id.clone(), k.paragraph.article_id.clone()))
                    .or_default()
                    .insert(a);
            }
            assert!(sides.values().all(|s| s.len() == 1));
        }
    }
}

#[test]
fn deterministic_and_tsv_round_trip() {
    let c = synthetic_corpus(&SyntheticConfig {
        n_articles: 8,
        n_participants: 12,
        ..SyntheticConfig::default()
    });
    let a = make_folds(&c, 5).unwrap();
    let b = make_folds(&c, 5).unwrap();
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("a.tsv");
    let p2 = dir.path().join("b.tsv");
    a[2].write_tsv(&p1).unwrap();
    b[2].write_tsv(&p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    let back = FoldPlan::read_tsv(&p1, 2).unwrap();
    assert_eq!(back, a[2]);
    let other = make_folds(&c, 6).unwrap();
    assert_ne!(other, a);
}

#[test]
fn regime_lookup_and_errors() {
    let c = synthetic_corpus(&SyntheticConfig {
        n_articles: 3,
        n_participants: 4,
        ..SyntheticConfig::default()
    });
    let plan = &make_folds(&c, 1).unwrap()[0];
    for t in c.trials() {
        plan.regime_of(&t.key).unwrap();
    }
    let stranger = TrialKey::new("nobody", c.trials()[0].key.paragraph.clone());
    assert!(matches!(plan.regime_of(&stranger), Err(SplitError::UnknownTrial(_))));

    let one_article = synthetic_corpus(&SyntheticConfig {
        n_articles: 1,
        n_participants: 4,
        reading_batches: 1,
        ..SyntheticConfig::default()
    });
    let err = make_folds(&one_article, 1).unwrap_err().to_string();
    assert!(err.contains("articles"), "{err}");
}
