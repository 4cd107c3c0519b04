use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn gazegoal(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gazegoal"))
        .current_dir(dir)
        .env_remove("GAZEGOAL_CACHE_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let o = gazegoal(dir, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    serde_json::from_slice(&o.stdout).expect("json status line")
}

fn error_of(o: &Output) -> Value {
    let line = String::from_utf8_lossy(&o.stderr);
    let last = line.lines().last().expect("error record");
    serde_json::from_str(last).expect("json error record")
}

fn manifest(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn sha(path: &Path) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

/// Synthetic tables under `dir/tables`.
fn tables(dir: &Path) {
    ok(
        dir,
        &[
            "synth",
            "--articles",
            "6",
            "--participants",
            "12",
            "--seed",
            "5",
            "--out",
            "synth.bin",
            "--tables",
            "tables",
        ],
    );
}

fn pipeline_config(dir: &Path, name: &str) -> PathBuf {
    let out = dir.join(name);
    std::fs::create_dir_all(&out).unwrap();
    let t = dir.join("tables");
    let cfg = format!(
        r#"
[run]
stages = ["ingest", "split", "baseline", "eval-selection"]

[common]
seed = 17

[ingest]
stimuli = "{stimuli}"
gaze = "{gaze}"
name = "synthetic"
out = "{o}/corpus.bin"

[split]
corpus = "{o}/corpus.bin"
out = "{o}/folds"

[baseline]
corpus = "{o}/corpus.bin"
folds = "{o}/folds"
which = "rt-weighted"
provider = "fixture"
dim = 16
out = "{o}/preds.tsv"

[eval-selection]
preds = "{o}/preds.tsv"
replicates = 200
out = "{o}/report.tsv"
"#,
        stimuli = t.join("stimuli").display(),
        gaze = t.join("gaze").display(),
        o = out.display()
    );
    let path = out.join("run.toml");
    std::fs::write(&path, cfg).unwrap();
    path
}

#[test]
fn eval_selection_without_preds_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = gazegoal(dir.path(), &["eval-selection", "--out", "report.tsv"]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_of(&o);
    assert_eq!(e["kind"], "missing_dependency");
    assert_eq!(e["dependency"], "--preds");

    let o = gazegoal(
        dir.path(),
        &["eval-selection", "--preds", "absent.tsv", "--out", "report.tsv"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_of(&o)["dependency"], "--preds");
}

#[test]
fn other_failures_exit_1_with_a_record() {
    let dir = tempfile::tempdir().unwrap();
    tables(dir.path());
    let o = gazegoal(
        dir.path(),
        &[
            "baseline",
            "--corpus",
            "synth.bin",
            "--which",
            "nearest",
            "--provider",
            "fixture",
            "--out",
            "p.tsv",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    let e = error_of(&o);
    assert_eq!(e["kind"], "usage");
    assert!(e["message"].as_str().unwrap().contains("nearest"));

    let o = gazegoal(dir.path(), &["baseline", "--corpus", "synth.bin", "--out", "p.tsv"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_of(&o)["dependency"], "--embeddings");

    let o = gazegoal(
        dir.path(),
        &[
            "prompts",
            "--corpus",
            "synth.bin",
            "--kind",
            "fewshot",
            "--out",
            "p.jsonl",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_of(&o)["dependency"], "--folds");
}

#[test]
fn pipeline_writes_four_linked_manifests() {
    let dir = tempfile::tempdir().unwrap();
    tables(dir.path());
    let cfg = pipeline_config(dir.path(), "a");
    let status = ok(dir.path(), &["run", "--config", cfg.to_str().unwrap()]);
    let paths: Vec<PathBuf> = status["manifests"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| PathBuf::from(p.as_str().unwrap()))
        .collect();
    assert_eq!(paths.len(), 4);
    let out = dir.path().join("a");
    assert_eq!(
        paths,
        [
            out.join("corpus.bin.manifest.json"),
            out.join("folds/manifest.json"),
            out.join("preds.tsv.manifest.json"),
            out.join("report.tsv.manifest.json"),
        ]
    );
    let ms: Vec<Value> = paths.iter().map(|p| manifest(p)).collect();
    let commands: Vec<&str> = ms.iter().map(|m| m["command"].as_str().unwrap()).collect();
    assert_eq!(commands, ["ingest", "split", "baseline", "eval-selection"]);

    let parent_paths = |m: &Value| -> Vec<String> {
        m["parents"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| p["path"].as_str().unwrap().to_string())
            .collect()
    };
    assert!(parent_paths(&ms[1]).contains(&paths[0].display().to_string()));
    assert!(parent_paths(&ms[2]).contains(&paths[1].display().to_string()));
    assert_eq!(parent_paths(&ms[3]), [paths[2].display().to_string()]);
    for m in &ms[1..] {
        for p in m["parents"].as_array().unwrap() {
            assert_eq!(
                p["sha256"].as_str().unwrap(),
                sha(Path::new(p["path"].as_str().unwrap()))
            );
        }
        assert_eq!(m["seeds"]["seed"], 17);
        assert!(m["config_file"]["sha256"].is_string());
        assert!(m["started_at"].is_string() && m["finished_at"].is_string());
    }
    let report = std::fs::read_to_string(out.join("report.tsv")).unwrap();
    assert!(report.starts_with("condition\tregime\tn\taccuracy\tci_low\tci_high"));
    assert_eq!(
        ms[3]["outputs"][0]["sha256"].as_str().unwrap(),
        sha(&out.join("report.tsv"))
    );
}

#[test]
fn same_config_twice_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    tables(dir.path());
    for name in ["a", "b"] {
        let cfg = pipeline_config(dir.path(), name);
        ok(dir.path(), &["run", "--config", cfg.to_str().unwrap()]);
    }
    for file in ["corpus.bin", "preds.tsv", "report.tsv"] {
        assert_eq!(
            sha(&dir.path().join("a").join(file)),
            sha(&dir.path().join("b").join(file)),
            "{file}"
        );
    }
    for k in 0..10 {
        let f = format!("folds/fold_{k}.tsv");
        assert_eq!(sha(&dir.path().join("a").join(&f)), sha(&dir.path().join("b").join(&f)));
    }

    // replaying a manifest reproduces its output
    let m = dir.path().join("a/preds.tsv.manifest.json");
    ok(dir.path(), &["replay", m.to_str().unwrap(), "--out", "replayed.tsv"]);
    assert_eq!(
        sha(&dir.path().join("replayed.tsv")),
        sha(&dir.path().join("a/preds.tsv"))
    );
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    tables(dir.path());
    let cfg = pipeline_config(dir.path(), "a");
    let c = cfg.to_str().unwrap();
    ok(dir.path(), &["ingest", "--config", c]);
    ok(
        dir.path(),
        &["split", "--config", c, "--seed", "3", "--out", "other_folds"],
    );
    let m = manifest(&dir.path().join("other_folds/manifest.json"));
    assert_eq!(m["seeds"]["seed"], 3);
    let argv: Vec<&str> = m["argv"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(argv.iter().filter(|a| **a == "--seed").count(), 1);
    assert!(argv.contains(&"other_folds"));

    std::fs::write(dir.path().join("bad.toml"), "[split]\nnope = 1\n").unwrap();
    let o = gazegoal(dir.path(), &["split", "--config", "bad.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(error_of(&o)["message"].as_str().unwrap().contains("--nope"));
}

#[test]
fn cache_dir_holds_on_the_fly_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    tables(dir.path());
    let cache = dir.path().join("cache");
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_gazegoal"))
            .current_dir(dir.path())
            .env("GAZEGOAL_CACHE_DIR", &cache)
            .args([
                "baseline",
                "--corpus",
                "synth.bin",
                "--provider",
                "fixture",
                "--dim",
                "8",
                "--out",
                "p.tsv",
            ])
            .output()
            .unwrap()
    };
    assert!(run().status.success());
    let files: Vec<_> = std::fs::read_dir(cache.join("embeddings")).unwrap().collect();
    assert_eq!(files.len(), 1);
    let first = sha(&dir.path().join("p.tsv"));
    assert!(run().status.success());
    assert_eq!(sha(&dir.path().join("p.tsv")), first);
    let m = manifest(&dir.path().join("p.tsv.manifest.json"));
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn train_select_and_analyse_one_fold() {
    let dir = tempfile::tempdir().unwrap();
    tables(dir.path());
    let d = dir.path();
    ok(d, &["split", "--corpus", "synth.bin", "--seed", "1", "--out", "folds"]);
    ok(
        d,
        &["embed", "--corpus", "synth.bin", "--dim", "8", "--out", "emb.cache"],
    );
    let train = [
        "train",
        "--corpus",
        "synth.bin",
        "--folds",
        "folds",
        "--embeddings",
        "emb.cache",
        "--fold",
        "2",
        "--epochs",
        "2",
        "--hidden",
        "6",
        "--lr",
        "1e-3",
        "--out",
        "m.ckpt",
    ];
    ok(d, &train);
    let m = manifest(&d.join("m.ckpt.manifest.json"));
    let parents: Vec<&str> = m["parents"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["path"].as_str().unwrap())
        .collect();
    assert!(parents.contains(&"emb.cache.manifest.json") && parents.contains(&"folds/manifest.json"));
    let ck = sha(&d.join("m.ckpt"));
    ok(d, &train);
    assert_eq!(sha(&d.join("m.ckpt")), ck);

    ok(
        d,
        &[
            "select",
            "--corpus",
            "synth.bin",
            "--folds",
            "folds",
            "--embeddings",
            "emb.cache",
            "--fold",
            "2",
            "--scorer",
            "m.ckpt",
            "--out",
            "p.tsv",
        ],
    );
    let preds = std::fs::read_to_string(d.join("p.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = preds.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert!(!rows.is_empty());
    for r in &rows {
        assert_eq!(r[5], "2");
        let p: f64 = r[13..16].iter().map(|x| x.parse::<f64>().unwrap()).sum();
        assert!((p - 1.0).abs() < 1e-9);
    }

    ok(
        d,
        &[
            "trial-features",
            "--corpus",
            "synth.bin",
            "--preds",
            "p.tsv",
            "--out",
            "tf.tsv",
        ],
    );
    let tf = std::fs::read_to_string(d.join("tf.tsv")).unwrap();
    assert_eq!(tf.lines().count(), rows.len() + 1);
    ok(
        d,
        &[
            "overlap-report",
            "--corpus",
            "synth.bin",
            "--level",
            "all",
            "--out",
            "ov.tsv",
        ],
    );
    assert_eq!(std::fs::read_to_string(d.join("ov.tsv")).unwrap().lines().count(), 13);

    let o = gazegoal(
        d,
        &[
            "select",
            "--corpus",
            "synth.bin",
            "--folds",
            "folds",
            "--embeddings",
            "emb.cache",
            "--fold",
            "3",
            "--scorer",
            "m.ckpt",
            "--out",
            "q.tsv",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(error_of(&o)["message"].as_str().unwrap().contains("fold 2"));
}

#[test]
fn prompts_and_reconstruction() {
    let dir = tempfile::tempdir().unwrap();
    tables(dir.path());
    let d = dir.path();
    ok(d, &["split", "--corpus", "synth.bin", "--seed", "1", "--out", "folds"]);
    ok(
        d,
        &[
            "prompts",
            "--corpus",
            "synth.bin",
            "--folds",
            "folds",
            "--fold",
            "0",
            "--kind",
            "main",
            "--with-target",
            "--out",
            "p.jsonl",
        ],
    );
    let text = std::fs::read_to_string(d.join("p.jsonl")).unwrap();
    let mut generated = String::new();
    for line in text.lines() {
        let r: Value = serde_json::from_str(line).unwrap();
        assert_eq!(r["fold"], 0);
        assert_eq!(r["kind"], "main");
        let rec = serde_json::json!({ "trial_key": r["trial_key"], "source": "gaze_model", "question": r["target"] });
        generated.push_str(&format!("{rec}\n"));
    }
    std::fs::write(d.join("gen.jsonl"), generated).unwrap();
    ok(
        d,
        &[
            "eval-reconstruction",
            "--corpus",
            "synth.bin",
            "--generated",
            "gen.jsonl",
            "--folds",
            "folds",
            "--fold",
            "0",
            "--human-baselines",
            "--replicates",
            "50",
            "--rows",
            "rows.tsv",
            "--out",
            "rr.tsv",
        ],
    );
    let report = std::fs::read_to_string(d.join("rr.tsv")).unwrap();
    // the true question reproduces itself exactly
    let bleu = report
        .lines()
        .map(|l| l.split('\t').collect::<Vec<_>>())
        .find(|c| c.len() > 4 && c[0] == "gaze_model" && c[1] == "all" && c[2] == "bleu")
        .expect("pooled bleu row");
    assert!((bleu[4].parse::<f64>().unwrap() - 1.0).abs() < 1e-9);
    assert!(report.contains("human_diff_span"));
}
