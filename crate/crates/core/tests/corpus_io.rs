use gazegoal::corpus::*;
use gazegoal::synthetic::{synthetic_corpus, SyntheticConfig};

fn small() -> Corpus {
    synthetic_corpus(&SyntheticConfig {
        n_articles: 4,
        n_participants: 8,
        ..SyntheticConfig::default()
    })
}

#[test]
fn tables_round_trip() {
    let c = small();
    let dir = tempfile::tempdir().unwrap();
    let (s, g) = (dir.path().join("stimuli"), dir.path().join("gaze"));
    write_tables(&c, &s, &g).unwrap();
    let report = ingest_trials(
        &s,
        &g,
        &IngestConfig {
            corpus_name: "synthetic".into(),
            ..Default::default()
        },
    )
    .unwrap();
    assert!(report.rejected.is_empty(), "{:?}", report.rejected);
    assert_eq!(report.corpus.trials(), c.trials());
    assert_eq!(report.corpus.paragraphs(), c.paragraphs());
    assert_eq!(report.corpus.question_sets(), c.question_sets());
}

#[test]
fn binary_round_trip_and_bad_magic() {
    let c = small();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.bin");
    save_corpus(&c, &path).unwrap();
    let back = load_corpus(&path).unwrap();
    assert_eq!(back, c);
    assert!(back.trial(&c.trials()[3].key).is_some());
    std::fs::write(&path, b"nonsense").unwrap();
    assert!(matches!(load_corpus(&path), Err(CorpusError::Cache(_))));
}

#[test]
fn bad_fixation_rows_reject_only_their_trial() {
    let c = small();
    let dir = tempfile::tempdir().unwrap();
    let (s, g) = (dir.path().join("stimuli"), dir.path().join("gaze"));
    write_tables(&c, &s, &g).unwrap();
    let path = g.join("fixations.tsv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let header: Vec<&str> = lines[0].split('\t').collect();
    let col = header.iter().position(|h| *h == "duration_ms").unwrap();
    let mut fields: Vec<String> = lines[1].split('\t').map(String::from).collect();
    fields[col] = "0".into();
    lines[1] = fields.join("\t");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let report = ingest_trials(&s, &g, &IngestConfig::default()).unwrap();
    assert_eq!(report.rejected.len(), 1);
    assert!(matches!(
        report.rejected[0].reason,
        RejectReason::NonPositiveDuration { line: 2 }
    ));
    assert_eq!(report.corpus.trials().len(), c.trials().len() - 1);
}

#[test]
fn orphan_fixations_are_fatal() {
    let c = small();
    let dir = tempfile::tempdir().unwrap();
    let (s, g) = (dir.path().join("stimuli"), dir.path().join("gaze"));
    write_tables(&c, &s, &g).unwrap();
    let path = g.join("fixations.tsv");
    let text = std::fs::read_to_string(&path).unwrap();
    let fixed = text.replacen("P001", "P999", 1);
    // the header is first, so the first replacement hits a data row
    std::fs::write(&path, fixed).unwrap();
    assert!(matches!(
        ingest_trials(&s, &g, &IngestConfig::default()),
        Err(CorpusError::UnknownTrial { .. })
    ));
}
