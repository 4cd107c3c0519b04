use gazegoal::corpus::{Corpus, QuestionType};
use gazegoal::embeddings::FixtureProvider;
use gazegoal::matrix::Matrix;
use gazegoal::scorers::checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, CHECKPOINT_VERSION};
use gazegoal::scorers::generative::{generative_loglik_select, LogLikClient, TextOnlyClient};
use gazegoal::scorers::train::{train_scorer, TrainConfig};
use gazegoal::scorers::*;
use gazegoal::synthetic::{synthetic_corpus, SyntheticConfig};
use proptest::prelude::*;

const DIM: usize = 12;

fn small_corpus() -> Corpus {
    synthetic_corpus(&SyntheticConfig {
        n_articles: 4,
        n_participants: 8,
        ..SyntheticConfig::default()
    })
}

fn inputs(corpus: &Corpus, config: &FeatureConfig, n: usize) -> Vec<TrialInput<f64>> {
    let provider = FixtureProvider::<f64>::new(DIM, 3).with_lexical(1.0);
    corpus
        .trials()
        .iter()
        .take(n)
        .map(|t| assemble_candidate_inputs(corpus, t, &provider, config).unwrap())
        .collect()
}

fn standardized(corpus: &Corpus, n: usize) -> Vec<TrialInput<f64>> {
    let cfg = FeatureConfig::default();
    let mut xs = inputs(corpus, &cfg, n);
    standardize_features(0, &cfg, &mut xs, &mut []).unwrap();
    xs
}

#[test]
fn feature_groups_toggle_columns() {
    let corpus = small_corpus();
    let full = FeatureConfig::default();
    assert_eq!(full.dim(), 5 + 10 + 23 + 8 + 1);
    let a = inputs(&corpus, &full, 1).remove(0);
    assert_eq!(a.features.cols(), full.dim());
    assert_eq!(a.features.rows(), a.fix_words.len());

    let reduced = full.clone().without(FeatureGroup::WordLevel);
    assert!(!reduced.names().contains(&"IA_DWELL_TIME"));
    let b = inputs(&corpus, &reduced, 1).remove(0);
    assert_eq!(b.features.cols(), full.dim() - 23);
    // fixation and saccade columns come first in both layouts
    for i in 0..a.features.rows() {
        assert_eq!(a.features.row(i)[..15], b.features.row(i)[..15]);
        assert_eq!(a.features.row(i)[38..], b.features.row(i)[15..]);
    }
    assert!(FeatureConfig::from_list("fixation_level,gaze_magic").is_err());
}

#[test]
fn empty_scanpath_is_flagged() {
    let corpus = small_corpus();
    let mut trials = corpus.trials().to_vec();
    trials[0].fixations.clear();
    let corpus = Corpus::new(
        corpus.meta.clone(),
        corpus.paragraphs().to_vec(),
        corpus.question_sets().to_vec(),
        trials,
    )
    .unwrap();
    let input = inputs(&corpus, &FeatureConfig::default(), 1).remove(0);
    assert!(input.empty_scanpath);
    assert_eq!(input.features.rows(), 0);
    for model in [
        Box::new(RnnScorer::<f64>::new(RnnConfig::new(DIM, 47))) as Box<dyn NeuralScorer<f64>>,
        Box::new(FusionScorer::<f64>::new(FusionConfig::new(DIM, 47))),
    ] {
        let out = model.score(&input).unwrap();
        assert!((out.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn standardization_uses_population_sd_and_fold_guard() {
    let corpus = small_corpus();
    let mut xs = inputs(&corpus, &FeatureConfig::from_list("paragraph_rt").unwrap(), 3);
    for (x, v) in xs.iter_mut().zip([1.0, 2.0, 3.0]) {
        x.features = Matrix::from_vec(1, 1, vec![v]);
    }
    let stats = FeatureStats::fit(2, &["PARAGRAPH_RT"], &xs);
    stats.apply(2, &mut xs).unwrap();
    let z: Vec<f64> = xs.iter().map(|x| x.features[(0, 0)]).collect();
    let expected = [-1.224_744_871_391_589, 0.0, 1.224_744_871_391_589];
    for (a, b) in z.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(matches!(
        stats.apply(3, &mut xs),
        Err(ScorerError::FoldMismatch { stats: 2, requested: 3 })
    ));

    let mut c = xs.clone();
    for x in c.iter_mut() {
        x.features = Matrix::from_vec(1, 1, vec![7.0]);
    }
    let s = FeatureStats::fit(0, &["PARAGRAPH_RT"], &c);
    s.apply(0, &mut c).unwrap();
    assert!(c.iter().all(|x| x.features[(0, 0)] == 0.0));
}

#[test]
fn feature_width_mismatch_is_refused() {
    let corpus = small_corpus();
    let input = standardized(&corpus, 1).remove(0);
    let model = RnnScorer::<f64>::new(RnnConfig::new(DIM, 10));
    assert!(matches!(
        model.score(&input),
        Err(ScorerError::FeatureDim { expected: 10, .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn candidate_order_equivariance(k in 0usize..40, perm in 0usize..6, seed in 0u64..100) {
        let corpus = small_corpus();
        let input = standardized(&corpus, 40).swap_remove(k);
        let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let order = orders[perm];
        let permuted = input.permuted(order);
        let models: Vec<Box<dyn NeuralScorer<f64>>> = vec![
            Box::new(RnnScorer::new(RnnConfig { seed, ..RnnConfig::new(DIM, 47) })),
            Box::new(FusionScorer::new(FusionConfig { seed, ..FusionConfig::new(DIM, 47) })),
        ];
        for m in models {
            let a = m.score(&input).unwrap();
            let b = m.score(&permuted).unwrap();
            for i in 0..3 {
                prop_assert!((b.probs[i] - a.probs[order[i]]).abs() < 1e-12);
            }
            prop_assert!((a.probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert_eq!(a.predicted, b.predicted);
        }
    }
}

fn overfit(model: &mut dyn NeuralScorer<f64>, xs: &[TrialInput<f64>]) -> usize {
    let cfg = TrainConfig {
        lr: 1e-2,
        max_epochs: 200,
        weight_decay: 0.0,
        patience: 200,
        ..TrainConfig::default()
    };
    train_scorer(model, xs, &[], &cfg, None).unwrap();
    xs.iter()
        .filter(|x| model.score(x).unwrap().predicted == x.true_type)
        .count()
}

#[test]
fn both_architectures_memorize_eight_trials() {
    let corpus = small_corpus();
    let xs = standardized(&corpus, 8);
    let mut rnn = RnnScorer::new(RnnConfig {
        hidden: 16,
        dropout: 0.0,
        frozen: false,
        ..RnnConfig::new(DIM, 47)
    });
    assert!(overfit(&mut rnn, &xs) >= 7);
    let mut fusion = FusionScorer::new(FusionConfig {
        dropout: 0.0,
        ..FusionConfig::new(DIM, 47)
    });
    assert!(overfit(&mut fusion, &xs) >= 7);
}

#[test]
fn checkpoint_round_trip() {
    let corpus = small_corpus();
    let cfg = FeatureConfig::default();
    let mut xs = inputs(&corpus, &cfg, 4);
    let stats = standardize_features(1, &cfg, &mut xs, &mut []).unwrap();
    let model = FusionScorer::<f64>::new(FusionConfig {
        seed: 5,
        ..FusionConfig::new(DIM, 47)
    });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_VERSION,
        model: model.spec(),
        feature_config: cfg,
        fold_id: 1,
        stats_hash: stats.hash(),
        embedding_provider: "fixture".into(),
        embedding_version: "1".into(),
        train_config: TrainConfig::default(),
        report: None,
    };
    save_checkpoint(&path, &model, &stats, &manifest).unwrap();
    assert!(path.with_extension("json").exists());
    let loaded = load_checkpoint::<f64>(&path).unwrap();
    assert_eq!(loaded.stats, stats);
    assert_eq!(loaded.manifest, manifest);
    for x in &xs {
        assert_eq!(loaded.model.score(x).unwrap(), model.score(x).unwrap());
    }
}

struct Fixed([f64; 3]);

impl LogLikClient for Fixed {
    fn name(&self) -> &str {
        "fixed"
    }
    fn candidate_loglik(&self, _prompt: &str, candidate: &str) -> Result<f64, ScorerError> {
        let slot = if candidate.starts_with("What") {
            0
        } else if candidate.starts_with("Why") {
            1
        } else {
            2
        };
        Ok(self.0[slot])
    }
}

#[test]
fn loglik_selection() {
    let corpus = small_corpus();
    let qs = &corpus.question_sets()[0];
    assert_eq!(
        generative_loglik_select(&Fixed([-5.0, -2.0, -9.0]), "p", qs).unwrap().0,
        QuestionType::Q2
    );
    assert_eq!(
        generative_loglik_select(&Fixed([-1.0; 3]), "p", qs).unwrap().0,
        QuestionType::Q1
    );
    let unsupported = TextOnlyClient { model: "hosted".into() };
    assert!(matches!(
        generative_loglik_select(&unsupported, "p", qs),
        Err(ScorerError::Unsupported(_))
    ));
}
