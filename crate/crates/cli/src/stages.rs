//! One function per subcommand. Each returns what it read and wrote so the
//! caller can record a manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use gazegoal::analysis::{
    ngram_overlap_report, trial_feature_table, write_overlap_report, write_trial_features, OverlapConfig,
};
use gazegoal::baselines::{self, Baseline};
use gazegoal::codec::{build_fewshot_prompt, build_prompt, PromptKind, PromptRecord, ScanpathFormat};
use gazegoal::corpus::{
    ingest_trials, load_corpus, save_corpus, write_tables, Corpus, DifficultyLevel, IngestConfig, QuestionType,
    SurprisalUnits, Trial,
};
use gazegoal::embeddings::{build_cache, CachedProvider, EmbeddingCache, EmbeddingProvider, FixtureProvider};
use gazegoal::eval_reconstruction::{
    evaluate_records, human_baseline_records, read_generated, reconstruction_report, write_metric_rows,
    write_reconstruction_report, CommandClient, CompletionClient, MetricContext, QaClient, UiucCache,
};
use gazegoal::eval_selection::{
    read_predictions, selection_report, write_predictions, write_report, Prediction, SameSpanMode,
};
use gazegoal::scorers::checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, CHECKPOINT_VERSION};
use gazegoal::scorers::train::{train_grid, train_scorer, GridSpec, TrainConfig};
use gazegoal::scorers::{
    assemble_candidate_inputs, standardize_features, Architecture, FeatureConfig, FusionConfig, ModelSpec,
    NeuralScorer, RnnConfig, TrialInput,
};
use gazegoal::splits::{make_folds_n, FoldPlan, Partition, Regime};
use gazegoal::stats::BootstrapConfig;
use gazegoal::synthetic::{synthetic_corpus, SyntheticConfig};

use crate::args::*;
use crate::error::{MissingDependency, Usage};

pub const CACHE_ENV: &str = "GAZEGOAL_CACHE_DIR";

/// Flags shared by every stage.
#[derive(Debug, Clone)]
pub struct Common {
    pub seed: u64,
    pub fold: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default)]
pub struct StageOutput {
    /// The artifact the manifest sits beside.
    pub primary: PathBuf,
    pub outputs: Vec<PathBuf>,
    pub inputs: Vec<PathBuf>,
    pub seeds: BTreeMap<String, u64>,
    pub summary: serde_json::Value,
}

impl StageOutput {
    fn new(primary: &Path, inputs: Vec<PathBuf>, seed: u64) -> Self {
        StageOutput {
            primary: primary.to_path_buf(),
            outputs: vec![primary.to_path_buf()],
            inputs,
            seeds: BTreeMap::from([("seed".to_string(), seed)]),
            summary: json!({}),
        }
    }
}

/// An upstream artifact that must exist.
fn need<'a>(flag: &'static str, v: &'a Option<PathBuf>) -> Result<&'a PathBuf> {
    match v {
        None => Err(MissingDependency { flag, path: None }.into()),
        Some(p) if !p.exists() => Err(MissingDependency {
            flag,
            path: Some(p.clone()),
        }
        .into()),
        Some(p) => Ok(p),
    }
}

fn out_path(c: &Common) -> Result<&PathBuf> {
    c.out.as_ref().ok_or_else(|| Usage("--out is required".into()).into())
}

fn parent_dir(p: &Path) -> Result<()> {
    if let Some(d) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(flag: &str, s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| Usage(format!("--{flag}: {e}")).into())
}

fn corpus_at(p: &Path) -> Result<Corpus> {
    load_corpus(p).with_context(|| format!("loading corpus {}", p.display()))
}

fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// Fold plans from a directory of `fold_k.tsv`, in fold order.
fn load_folds(dir: &Path, fold: Option<usize>) -> Result<Vec<FoldPlan>> {
    let ids: Vec<usize> = match fold {
        Some(k) => {
            if !dir.join(FoldPlan::file_name(k)).is_file() {
                return Err(MissingDependency {
                    flag: "--folds",
                    path: Some(dir.join(FoldPlan::file_name(k))),
                }
                .into());
            }
            vec![k]
        }
        None => {
            let mut ids = Vec::new();
            for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
                let name = entry?.file_name().to_string_lossy().into_owned();
                if let Some(k) = name
                    .strip_prefix("fold_")
                    .and_then(|s| s.strip_suffix(".tsv"))
                    .and_then(|s| s.parse().ok())
                {
                    ids.push(k);
                }
            }
            ids.sort_unstable();
            if ids.is_empty() {
                bail!("{} holds no fold files", dir.display());
            }
            ids
        }
    };
    ids.into_iter()
        .map(|k| {
            let p = dir.join(FoldPlan::file_name(k));
            FoldPlan::read_tsv(&p, k).with_context(|| format!("reading {}", p.display()))
        })
        .collect()
}

/// Trials of one partition in plan order, with their regimes.
fn partition_trials<'c>(
    corpus: &'c Corpus,
    plan: &FoldPlan,
    part: Partition,
) -> Result<Vec<(&'c Trial, Option<Regime>)>> {
    plan.entries()
        .filter(|(_, a)| a.partition == part)
        .map(|(k, a)| {
            let t = corpus
                .trial(k)
                .ok_or_else(|| anyhow!("fold {} names unknown trial {k}", plan.fold_id))?;
            Ok((t, a.regime))
        })
        .collect()
}

fn prediction(
    corpus: &Corpus,
    trial: &Trial,
    fold: Option<usize>,
    regime: Option<Regime>,
    predicted: QuestionType,
    scores: [f64; 3],
    probs: Option<[f64; 3]>,
) -> Prediction {
    Prediction {
        trial_key: trial.key.clone(),
        fold,
        true_type: trial.question,
        regime,
        predicted_type: predicted,
        predicted_question_id: corpus.question_set(trial).get(predicted).question_id.clone(),
        scores: Some(scores),
        probs,
    }
}

/// Embeddings from a cache file or built on the fly. A fixture provider is
/// cached under `$GAZEGOAL_CACHE_DIR` when set.
struct Embeddings {
    provider: CachedProvider,
    files: Vec<PathBuf>,
    seeds: BTreeMap<String, u64>,
}

fn fixture(name: &str, dim: usize, lexical: f64, seed: u64) -> Result<FixtureProvider<f64>> {
    if name != "fixture" {
        bail!(Usage(format!(
            "provider {name:?} is not built in; write its vectors with an external encoder into the cache format and pass --embeddings"
        )));
    }
    if dim < 2 {
        bail!(Usage("--dim must be at least 2".into()));
    }
    Ok(FixtureProvider::new(dim, seed).with_lexical(lexical))
}

fn embeddings(a: &EmbeddingArgs, corpus: &Corpus, corpus_path: &Path) -> Result<Embeddings> {
    if a.embeddings.is_some() {
        let p = need("--embeddings", &a.embeddings)?;
        let cache = EmbeddingCache::read(p).with_context(|| format!("reading embeddings {}", p.display()))?;
        return Ok(Embeddings {
            provider: CachedProvider::new(cache),
            files: vec![p.clone()],
            seeds: BTreeMap::new(),
        });
    }
    let Some(name) = &a.provider else {
        return Err(MissingDependency {
            flag: "--embeddings",
            path: None,
        }
        .into());
    };
    let provider = fixture(name, a.dim, a.lexical, a.provider_seed)?;
    let seeds = BTreeMap::from([("provider_seed".to_string(), a.provider_seed)]);
    let key = format!(
        "{}-{name}-d{}-l{}-s{}.cache",
        &crate::manifest::hash_path(corpus_path)?[..16],
        a.dim,
        a.lexical,
        a.provider_seed
    );
    if let Some(dir) = cache_dir() {
        let path = dir.join("embeddings").join(key);
        if !path.is_file() {
            parent_dir(&path)?;
            build_cache(&provider, corpus)?.write(&path)?;
        }
        let cache = EmbeddingCache::read(&path)?;
        return Ok(Embeddings {
            provider: CachedProvider::new(cache),
            files: vec![path],
            seeds,
        });
    }
    Ok(Embeddings {
        provider: CachedProvider::new(build_cache(&provider, corpus)?),
        files: Vec::new(),
        seeds,
    })
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n.max(1));
    }
    Ok(b.build()?)
}

pub fn dispatch(cmd: &Command, c: &Common, workers: Option<usize>) -> Result<StageOutput> {
    pool(workers)?.install(|| match cmd {
        Command::Synth(a) => synth(a, c),
        Command::Ingest(a) => ingest(a, c),
        Command::Split(a) => split(a, c),
        Command::Embed(a) => embed(a, c),
        Command::Baseline(a) => baseline(a, c),
        Command::Train(a) => train(a, c),
        Command::Select(a) => select(a, c),
        Command::Prompts(a) => prompts(a, c),
        Command::EvalSelection(a) => eval_selection(a, c),
        Command::EvalReconstruction(a) => eval_reconstruction(a, c),
        Command::OverlapReport(a) => overlap_report(a, c),
        Command::TrialFeatures(a) => trial_features(a, c),
        Command::Run | Command::Replay(_) => unreachable!("handled by the driver"),
    })
}

fn synth(a: &SynthArgs, c: &Common) -> Result<StageOutput> {
    let out = out_path(c)?;
    let mut corpus = synthetic_corpus(&SyntheticConfig {
        n_articles: a.articles,
        paragraphs_per_article: a.paragraphs,
        words_per_paragraph: a.words,
        n_participants: a.participants,
        reading_batches: a.batches,
        goal_strength: a.goal_strength,
        seed: c.seed,
    });
    corpus.meta.name = a.name.clone();
    parent_dir(out)?;
    save_corpus(&corpus, out)?;
    let mut s = StageOutput::new(out, Vec::new(), c.seed);
    if let Some(dir) = &a.tables {
        let (stimuli, gaze) = (dir.join("stimuli"), dir.join("gaze"));
        write_tables(&corpus, &stimuli, &gaze)?;
        s.outputs.extend([stimuli, gaze]);
    }
    s.summary = json!({ "trials": corpus.trials().len(), "paragraphs": corpus.paragraphs().len() });
    Ok(s)
}

fn ingest(a: &IngestArgs, c: &Common) -> Result<StageOutput> {
    let stimuli = need("--stimuli", &a.stimuli)?;
    let gaze = need("--gaze", &a.gaze)?;
    let out = out_path(c)?;
    let cfg = IngestConfig {
        corpus_name: a.name.clone(),
        surprisal_units: parse::<SurprisalUnits>("surprisal-units", &a.surprisal_units)?,
    };
    let report = ingest_trials(stimuli, gaze, &cfg)?;
    parent_dir(out)?;
    save_corpus(&report.corpus, out)?;
    let mut s = StageOutput::new(out, vec![stimuli.clone(), gaze.clone()], c.seed);
    for r in &report.rejected {
        log::warn!("rejected trial {}: {}", r.trial, r.reason);
    }
    if let Some(p) = &a.rejected {
        parent_dir(p)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(p)?);
        writeln!(f, "trial_key\treason")?;
        for r in &report.rejected {
            writeln!(f, "{}\t{}", r.trial, r.reason)?;
        }
        f.flush()?;
        s.outputs.push(p.clone());
    }
    s.summary = json!({
        "trials": report.corpus.trials().len(),
        "rejected": report.rejected.len(),
        "empty_scanpaths": report.empty_scanpaths.len(),
    });
    Ok(s)
}

fn split(a: &SplitArgs, c: &Common) -> Result<StageOutput> {
    let corpus_p = need("--corpus", &a.corpus)?;
    let out = out_path(c)?;
    let corpus = corpus_at(corpus_p)?;
    let plans = make_folds_n(&corpus, c.seed, a.n_folds)?;
    std::fs::create_dir_all(out)?;
    for p in &plans {
        p.write_tsv(&out.join(FoldPlan::file_name(p.fold_id)))?;
    }
    let mut s = StageOutput::new(out, vec![corpus_p.clone()], c.seed);
    s.summary = json!({ "folds": plans.len() });
    Ok(s)
}

fn embed(a: &EmbedArgs, c: &Common) -> Result<StageOutput> {
    let corpus_p = need("--corpus", &a.corpus)?;
    let corpus = corpus_at(corpus_p)?;
    let out = match (&c.out, cache_dir()) {
        (Some(p), _) => p.clone(),
        (None, Some(d)) => d.join("embeddings").join(format!(
            "{}-{}-d{}.cache",
            &crate::manifest::hash_path(corpus_p)?[..16],
            a.provider,
            a.dim
        )),
        (None, None) => bail!(Usage(format!("--out is required when {CACHE_ENV} is unset"))),
    };
    let mut provider = fixture(&a.provider, a.dim, a.lexical, c.seed)?;
    if a.plant {
        provider.plant_corpus(&corpus);
    }
    parent_dir(&out)?;
    let cache = build_cache(&provider, &corpus)?;
    cache.write(&out)?;
    let mut s = StageOutput::new(&out, vec![corpus_p.clone()], c.seed);
    s.summary = json!({ "rows": cache.rows.len(), "dim": cache.dim, "provider": cache.provider });
    Ok(s)
}

fn baseline(a: &BaselineArgs, c: &Common) -> Result<StageOutput> {
    let corpus_p = need("--corpus", &a.corpus)?;
    let which: Baseline = parse("which", &a.which)?;
    let out = out_path(c)?;
    let corpus = corpus_at(corpus_p)?;
    let emb = embeddings(&a.emb, &corpus, corpus_p)?;
    let mut inputs = vec![corpus_p.clone()];

    let jobs: Vec<(&Trial, Option<usize>, Option<Regime>)> = match &a.folds {
        Some(_) => {
            let dir = need("--folds", &a.folds)?;
            inputs.push(dir.clone());
            let plans = load_folds(dir, c.fold)?;
            let mut jobs = Vec::new();
            for p in &plans {
                jobs.extend(
                    partition_trials(&corpus, p, Partition::Test)?
                        .into_iter()
                        .map(|(t, r)| (t, Some(p.fold_id), r)),
                );
            }
            jobs
        }
        None => corpus.trials().iter().map(|t| (t, None, None)).collect(),
    };
    let preds = jobs
        .par_iter()
        .map(|&(t, fold, regime)| {
            let sel = baselines::select::<f64, _>(which, &corpus, t, &emb.provider)?;
            Ok(prediction(&corpus, t, fold, regime, sel.predicted, sel.scores, None))
        })
        .collect::<Result<Vec<_>>>()?;
    parent_dir(out)?;
    write_predictions(out, &preds)?;
    inputs.extend(emb.files);
    let mut s = StageOutput::new(out, inputs, c.seed);
    s.seeds.extend(emb.seeds);
    s.summary = json!({ "baseline": which.as_str(), "predictions": preds.len() });
    Ok(s)
}

fn inputs_for(
    corpus: &Corpus,
    plan: &FoldPlan,
    part: Partition,
    provider: &CachedProvider,
    fc: &FeatureConfig,
) -> Result<Vec<(TrialInput<f64>, Option<Regime>)>> {
    partition_trials(corpus, plan, part)?
        .par_iter()
        .map(|&(t, r)| Ok((assemble_candidate_inputs::<f64, _>(corpus, t, provider, fc)?, r)))
        .collect()
}

fn model_spec(a: &TrainArgs, arch: Architecture, emb_dim: usize, feat_dim: usize, seed: u64) -> ModelSpec {
    match arch {
        Architecture::Rnn => {
            let d = RnnConfig::new(emb_dim, feat_dim);
            ModelSpec::Rnn(RnnConfig {
                hidden: a.hidden.unwrap_or(d.hidden),
                dropout: a.dropout.unwrap_or(d.dropout),
                frozen: a.frozen.unwrap_or(d.frozen),
                seed,
                ..d
            })
        }
        Architecture::Fusion => {
            let d = FusionConfig::new(emb_dim, feat_dim);
            ModelSpec::Fusion(FusionConfig {
                dropout: a.dropout.unwrap_or(d.dropout),
                frozen: a.frozen.unwrap_or(d.frozen),
                seed,
                ..d
            })
        }
    }
}

fn ckpt_path(out: &Path, fold: usize, single: bool) -> PathBuf {
    if single {
        out.to_path_buf()
    } else {
        out.join(format!("fold_{fold}.ckpt"))
    }
}

fn train(a: &TrainArgs, c: &Common) -> Result<StageOutput> {
    let corpus_p = need("--corpus", &a.corpus)?;
    let folds_p = need("--folds", &a.folds)?;
    let arch: Architecture = parse("arch", &a.arch)?;
    let out = out_path(c)?;
    let grid: Option<GridSpec> = match &a.grid {
        None => None,
        Some(_) => {
            let p = need("--grid", &a.grid)?;
            let text = std::fs::read_to_string(p)?;
            Some(toml::from_str(&text).with_context(|| format!("parsing grid {}", p.display()))?)
        }
    };
    let mut fc = match &a.features {
        Some(list) => FeatureConfig::from_list(list)?,
        None => FeatureConfig::default(),
    };
    fc.max_fixations = a.max_fixations;
    let corpus = corpus_at(corpus_p)?;
    let emb = embeddings(&a.emb, &corpus, corpus_p)?;
    let plans = load_folds(folds_p, c.fold)?;
    let single = c.fold.is_some();
    if !single {
        std::fs::create_dir_all(out)?;
    } else {
        parent_dir(out)?;
    }
    let base = TrainConfig {
        lr: a.lr,
        weight_decay: a.weight_decay,
        batch_size: a.batch_size,
        max_epochs: a.epochs,
        patience: a.patience,
        seed: c.seed,
        ..TrainConfig::default()
    };
    let emb_dim = EmbeddingProvider::<f64>::dim(&emb.provider);

    // folds are independent; each trains sequentially inside its own task
    let results = plans
        .par_iter()
        .map(|plan| -> Result<serde_json::Value> {
            let strip = |v: Vec<(TrialInput<f64>, Option<Regime>)>| v.into_iter().map(|(i, _)| i).collect::<Vec<_>>();
            let mut tr = strip(inputs_for(&corpus, plan, Partition::Train, &emb.provider, &fc)?);
            let mut val = strip(inputs_for(&corpus, plan, Partition::Val, &emb.provider, &fc)?);
            let stats = standardize_features(plan.fold_id, &fc, &mut tr, &mut [&mut val[..]])?;
            let (model, spec, cfg, report) = match &grid {
                Some(g) => {
                    let runs = g.expand(arch, emb_dim, fc.dim(), c.seed);
                    let res = train_grid(&runs, &tr, &val, &base)?;
                    let (run, report) = res.runs[res.best].clone();
                    let cfg = TrainConfig {
                        lr: run.lr,
                        ..base.clone()
                    };
                    (res.model, run.model, cfg, report)
                }
                None => {
                    let spec = model_spec(a, arch, emb_dim, fc.dim(), c.seed);
                    let mut model = spec.build::<f64>();
                    let report = train_scorer(model.as_mut(), &tr, &val, &base, None)?;
                    (model, spec, base.clone(), report)
                }
            };
            let summary = json!({
                "fold": plan.fold_id,
                "best_epoch": report.best_epoch,
                "best_val_accuracy": report.best_val_accuracy,
                "best_val_loss": report.best_val_loss,
            });
            let manifest = CheckpointManifest {
                format_version: CHECKPOINT_VERSION,
                model: spec,
                feature_config: fc.clone(),
                fold_id: plan.fold_id,
                stats_hash: stats.hash(),
                embedding_provider: EmbeddingProvider::<f64>::name(&emb.provider).to_string(),
                embedding_version: EmbeddingProvider::<f64>::version(&emb.provider).to_string(),
                train_config: cfg,
                report: Some(report),
            };
            save_checkpoint(&ckpt_path(out, plan.fold_id, single), model.as_ref(), &stats, &manifest)?;
            Ok(summary)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut inputs = vec![corpus_p.clone(), folds_p.clone()];
    inputs.extend(a.grid.clone());
    inputs.extend(emb.files);
    let mut s = StageOutput::new(out, inputs, c.seed);
    if single {
        s.outputs.push(gazegoal::scorers::checkpoint::manifest_path(out));
    }
    s.seeds.extend(emb.seeds);
    s.summary = json!({ "architecture": arch.as_str(), "folds": results });
    Ok(s)
}

fn select(a: &SelectArgs, c: &Common) -> Result<StageOutput> {
    let corpus_p = need("--corpus", &a.corpus)?;
    let folds_p = need("--folds", &a.folds)?;
    let scorer_p = need("--scorer", &a.scorer)?;
    let part: Partition = parse("partition", &a.partition)?;
    let out = out_path(c)?;
    let corpus = corpus_at(corpus_p)?;
    let emb = embeddings(&a.emb, &corpus, corpus_p)?;
    let single = c.fold.is_some();
    let plans = load_folds(folds_p, c.fold)?;

    let per_fold = plans
        .par_iter()
        .map(|plan| -> Result<Vec<Prediction>> {
            let path = ckpt_path(scorer_p, plan.fold_id, single);
            if !path.is_file() {
                return Err(MissingDependency {
                    flag: "--scorer",
                    path: Some(path),
                }
                .into());
            }
            let ck = load_checkpoint::<f64>(&path).with_context(|| format!("loading {}", path.display()))?;
            if ck.manifest.fold_id != plan.fold_id {
                bail!(
                    "{} was trained on fold {}, not {}",
                    path.display(),
                    ck.manifest.fold_id,
                    plan.fold_id
                );
            }
            let provider_name = EmbeddingProvider::<f64>::name(&emb.provider);
            if ck.manifest.embedding_provider != provider_name {
                log::warn!(
                    "{} was trained with {} embeddings, scoring with {provider_name}",
                    path.display(),
                    ck.manifest.embedding_provider
                );
            }
            let rows = inputs_for(&corpus, plan, part, &emb.provider, &ck.manifest.feature_config)?;
            let (mut inputs, regimes): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
            ck.stats.apply(plan.fold_id, &mut inputs)?;
            let model: &dyn NeuralScorer<f64> = ck.model.as_ref();
            inputs
                .par_iter()
                .zip(regimes.par_iter())
                .map(|(input, &regime)| {
                    let o = model.score(input)?;
                    let (scores, probs) = o.by_type(input.candidates.each_ref().map(|c| c.qtype));
                    let trial = corpus.trial(&input.trial_key).expect("assembled from the corpus");
                    Ok(prediction(
                        &corpus,
                        trial,
                        Some(plan.fold_id),
                        regime,
                        o.predicted,
                        scores,
                        Some(probs),
                    ))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let preds: Vec<Prediction> = per_fold.into_iter().flatten().collect();
    parent_dir(out)?;
    write_predictions(out, &preds)?;
    let mut inputs = vec![corpus_p.clone(), folds_p.clone(), scorer_p.clone()];
    inputs.extend(emb.files);
    let mut s = StageOutput::new(out, inputs, c.seed);
    s.seeds.extend(emb.seeds);
    s.summary = json!({ "predictions": preds.len(), "partition": part.as_str() });
    Ok(s)
}

#[derive(Serialize)]
struct FoldPrompt<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    fold: Option<usize>,
    #[serde(flatten)]
    record: &'a PromptRecord,
}

fn prompts(a: &PromptsArgs, c: &Common) -> Result<StageOutput> {
    let corpus_p = need("--corpus", &a.corpus)?;
    let kind: PromptKind = parse("kind", &a.kind)?;
    let format: ScanpathFormat = parse("format", &a.format)?;
    let out = out_path(c)?;
    let corpus = corpus_at(corpus_p)?;
    let mut inputs = vec![corpus_p.clone()];

    let jobs: Vec<(&Trial, Option<&FoldPlan>)>;
    let plans;
    match &a.folds {
        Some(_) => {
            let dir = need("--folds", &a.folds)?;
            inputs.push(dir.clone());
            plans = load_folds(dir, c.fold)?;
            let mut j = Vec::new();
            for p in &plans {
                j.extend(
                    partition_trials(&corpus, p, Partition::Test)?
                        .into_iter()
                        .map(|(t, _)| (t, Some(p))),
                );
            }
            jobs = j;
        }
        None if kind == PromptKind::Fewshot => {
            return Err(MissingDependency {
                flag: "--folds",
                path: None,
            }
            .into())
        }
        None => jobs = corpus.trials().iter().map(|t| (t, None)).collect(),
    }
    let records = jobs
        .par_iter()
        .map(|&(t, plan)| {
            let bundle = match (kind, plan) {
                (PromptKind::Fewshot, Some(p)) => build_fewshot_prompt(&corpus, t, p, format, c.seed, a.with_target)?,
                _ => build_prompt(&corpus, t, kind, format, a.with_target)?,
            };
            Ok((plan.map(|p| p.fold_id), PromptRecord::from(&bundle)))
        })
        .collect::<Result<Vec<_>>>()?;
    parent_dir(out)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(out)?);
    for (fold, record) in &records {
        serde_json::to_writer(&mut f, &FoldPrompt { fold: *fold, record })?;
        writeln!(f)?;
    }
    f.flush()?;
    let mut s = StageOutput::new(out, inputs, c.seed);
    s.summary = json!({ "records": records.len(), "kind": kind.as_str() });
    Ok(s)
}

fn eval_selection(a: &EvalSelectionArgs, c: &Common) -> Result<StageOutput> {
    let preds_p = need("--preds", &a.preds)?;
    let mode: SameSpanMode = parse("same-span", &a.same_span)?;
    let out = out_path(c)?;
    let mut preds = read_predictions(preds_p)?;
    if let Some(k) = c.fold {
        preds.retain(|p| p.fold == Some(k));
    }
    let bootstrap = BootstrapConfig {
        replicates: a.replicates,
        seed: c.seed,
        level: a.level,
    };
    let rows = selection_report(&preds, mode, &bootstrap)?;
    parent_dir(out)?;
    write_report(out, &rows)?;
    let mut s = StageOutput::new(out, vec![preds_p.clone()], c.seed);
    s.summary = json!({
        "predictions": preds.len(),
        "pooled": rows.iter().filter(|r| r.regime.is_none()).map(|r| json!({
            "condition": r.condition.as_str(),
            "n": r.n,
            "accuracy": r.accuracy,
        })).collect::<Vec<_>>(),
    });
    Ok(s)
}

fn eval_reconstruction(a: &EvalReconstructionArgs, c: &Common) -> Result<StageOutput> {
    let corpus_p = need("--corpus", &a.corpus)?;
    let gen_p = need("--generated", &a.generated)?;
    let out = out_path(c)?;
    let corpus = corpus_at(corpus_p)?;
    let mut records = read_generated(gen_p)?;
    let mut inputs = vec![corpus_p.clone(), gen_p.clone()];

    if a.human_baselines {
        let mut seen = std::collections::HashSet::new();
        let trials: Vec<&Trial> = records
            .iter()
            .filter(|r| seen.insert(r.trial_key.clone()))
            .map(|r| {
                corpus
                    .trial(&r.trial_key)
                    .ok_or_else(|| anyhow!("record for unknown trial {}", r.trial_key))
            })
            .collect::<Result<_>>()?;
        let extra = human_baseline_records(&corpus, trials);
        records.extend(extra);
    }

    let plan = match &a.folds {
        None => None,
        Some(_) => {
            let dir = need("--folds", &a.folds)?;
            inputs.push(dir.clone());
            let mut plans = load_folds(dir, c.fold)?;
            if plans.len() != 1 {
                bail!(Usage("--fold is required with a multi-fold --folds directory".into()));
            }
            plans.pop()
        }
    };

    let emb = if a.emb.embeddings.is_some() || a.emb.provider.is_some() {
        let e = embeddings(&a.emb, &corpus, corpus_p)?;
        inputs.extend(e.files.clone());
        Some(e)
    } else {
        None
    };
    // generated questions contain words no cache has seen, so similarity
    // uses the fixture provider directly when one is named
    let live = match (&a.emb.provider, &a.emb.embeddings) {
        (Some(name), None) => Some(fixture(name, a.emb.dim, a.emb.lexical, a.emb.provider_seed)?),
        _ => None,
    };
    let provider: Option<&dyn EmbeddingProvider<f64>> = match (&live, &emb) {
        (Some(f), _) => Some(f),
        (None, Some(e)) => Some(&e.provider),
        _ => None,
    };
    let provider_name = provider.map(|p| p.name().to_string());

    let uiuc_client = a
        .uiuc_command
        .as_deref()
        .map(|s| CommandClient::parse(s).ok_or_else(|| Usage("--uiuc-command is empty".into())))
        .transpose()?;
    let qa_client = a
        .qa_command
        .as_deref()
        .map(|s| CommandClient::parse(s).ok_or_else(|| Usage("--qa-command is empty".into())))
        .transpose()?;
    let cache_path = a
        .uiuc_cache
        .clone()
        .or_else(|| cache_dir().map(|d| d.join("uiuc.json")));
    let uiuc_cache = match &cache_path {
        Some(p) if uiuc_client.is_some() || p.is_file() => {
            parent_dir(p)?;
            Some(UiucCache::open(p)?)
        }
        _ => uiuc_client.as_ref().map(|_| UiucCache::in_memory()),
    };

    let ctx = MetricContext {
        provider,
        uiuc_cache: uiuc_cache.as_ref(),
        uiuc_client: uiuc_client.as_ref().map(|c| c as &dyn CompletionClient),
        uiuc_batch: a.uiuc_batch,
        qa: qa_client.as_ref().map(|c| c as &dyn QaClient),
        plan: plan.as_ref(),
    };
    let rows = evaluate_records(&corpus, &records, &ctx)?;
    let report = reconstruction_report(
        &rows,
        &BootstrapConfig {
            replicates: a.replicates,
            seed: c.seed,
            ..BootstrapConfig::default()
        },
    );
    parent_dir(out)?;
    write_reconstruction_report(out, &report, provider_name.as_deref())?;
    let mut s = StageOutput::new(out, inputs, c.seed);
    if let Some(p) = &a.rows {
        parent_dir(p)?;
        write_metric_rows(p, &rows)?;
        s.outputs.push(p.clone());
    }
    if let Some(e) = emb {
        s.seeds.extend(e.seeds);
    }
    s.summary = json!({ "records": records.len(), "report_rows": report.len() });
    Ok(s)
}

fn overlap_report(a: &OverlapArgs, c: &Common) -> Result<StageOutput> {
    let corpus_p = need("--corpus", &a.corpus)?;
    let out = out_path(c)?;
    let level = match a.level.as_str() {
        "all" => None,
        s => Some(parse::<DifficultyLevel>("level", s)?),
    };
    let corpus = corpus_at(corpus_p)?;
    let report = ngram_overlap_report(&corpus, &OverlapConfig { level });
    parent_dir(out)?;
    write_overlap_report(out, &report)?;
    let mut s = StageOutput::new(out, vec![corpus_p.clone()], c.seed);
    s.summary = json!({ "level": a.level, "cells": report.cells.len() });
    Ok(s)
}

fn trial_features(a: &TrialFeaturesArgs, c: &Common) -> Result<StageOutput> {
    let corpus_p = need("--corpus", &a.corpus)?;
    let preds_p = need("--preds", &a.preds)?;
    let out = out_path(c)?;
    let corpus = corpus_at(corpus_p)?;
    let preds = read_predictions(preds_p)?;
    let rows = trial_feature_table(&corpus, &preds)?;
    parent_dir(out)?;
    write_trial_features(out, &rows)?;
    let mut s = StageOutput::new(out, vec![corpus_p.clone(), preds_p.clone()], c.seed);
    s.summary = json!({ "rows": rows.len() });
    Ok(s)
}
