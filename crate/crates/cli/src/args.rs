use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "gazegoal", version, about = "Reading-goal decoding pipeline")]
pub struct Cli {
    /// TOML file supplying defaults; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Restrict fold-aware stages to one fold; all folds run when omitted.
    #[arg(long, global = true)]
    pub fold: Option<usize>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Read stimulus and gaze tables into a binary corpus.
    Ingest(IngestArgs),
    /// Write participant x article cross-validation folds.
    Split(SplitArgs),
    /// Embed every word and question of a corpus.
    Embed(EmbedArgs),
    /// Zero-training reading-time baselines.
    Baseline(BaselineArgs),
    /// Train a neural scorer.
    Train(TrainArgs),
    /// Score trials with a trained checkpoint.
    Select(SelectArgs),
    /// Build question-generation prompts.
    Prompts(PromptsArgs),
    /// Selection accuracy with bootstrap intervals.
    EvalSelection(EvalSelectionArgs),
    /// Score generated questions against the true ones.
    EvalReconstruction(EvalReconstructionArgs),
    /// Question/text n-gram overlap table.
    OverlapReport(OverlapArgs),
    /// Per-trial predictors for mixed-effects analysis.
    TrialFeatures(TrialFeaturesArgs),
    /// Run the stages listed under [run] in the config file.
    Run,
    /// Re-execute the invocation recorded in a run manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Ingest(_) => "ingest",
            Command::Split(_) => "split",
            Command::Embed(_) => "embed",
            Command::Baseline(_) => "baseline",
            Command::Train(_) => "train",
            Command::Select(_) => "select",
            Command::Prompts(_) => "prompts",
            Command::EvalSelection(_) => "eval-selection",
            Command::EvalReconstruction(_) => "eval-reconstruction",
            Command::OverlapReport(_) => "overlap-report",
            Command::TrialFeatures(_) => "trial-features",
            Command::Run => "run",
            Command::Replay(_) => "replay",
        }
    }
}

/// How scorers and baselines obtain embeddings.
#[derive(Debug, Clone, Args)]
pub struct EmbeddingArgs {
    /// Embedding cache written by `embed`.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Embed on the fly instead of reading a cache.
    #[arg(long)]
    pub provider: Option<String>,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Surface-form weight of the fixture provider.
    #[arg(long, default_value_t = 0.5)]
    pub lexical: f64,
    /// Seed of the fixture provider.
    #[arg(long, default_value_t = 0)]
    pub provider_seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    pub articles: usize,
    #[arg(long, default_value_t = 3)]
    pub paragraphs: usize,
    #[arg(long, default_value_t = 30)]
    pub words: usize,
    #[arg(long, default_value_t = 40)]
    pub participants: usize,
    #[arg(long, default_value_t = 4)]
    pub batches: usize,
    #[arg(long, default_value_t = 1.8)]
    pub goal_strength: f64,
    #[arg(long, default_value = "synthetic")]
    pub name: String,
    /// Also write the corpus as TSV tables under DIR/stimuli and DIR/gaze.
    #[arg(long)]
    pub tables: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub stimuli: Option<PathBuf>,
    #[arg(long)]
    pub gaze: Option<PathBuf>,
    #[arg(long, default_value = "corpus")]
    pub name: String,
    /// bits or nats.
    #[arg(long, default_value = "bits")]
    pub surprisal_units: String,
    /// TSV listing rejected trials.
    #[arg(long)]
    pub rejected: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub n_folds: usize,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "fixture")]
    pub provider: String,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lexical: f64,
    /// Plant span means so questions resemble their critical spans.
    #[arg(long)]
    pub plant: bool,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Directory of fold files; without it every trial is scored.
    #[arg(long)]
    pub folds: Option<PathBuf>,
    /// rt-weighted or rt-profile.
    #[arg(long, default_value = "rt-weighted")]
    pub which: String,
    #[command(flatten)]
    pub emb: EmbeddingArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub folds: Option<PathBuf>,
    /// rnn or fusion.
    #[arg(long, default_value = "rnn")]
    pub arch: String,
    /// Comma-separated feature groups; all groups by default.
    #[arg(long)]
    pub features: Option<String>,
    #[arg(long)]
    pub max_fixations: Option<usize>,
    /// Hyperparameter grid (TOML); a single run otherwise.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub frozen: Option<bool>,
    #[arg(long, default_value_t = 40)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 8)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.1)]
    pub weight_decay: f64,
    #[command(flatten)]
    pub emb: EmbeddingArgs,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub folds: Option<PathBuf>,
    /// Checkpoint file, or a directory of fold_k.ckpt when no fold is given.
    #[arg(long)]
    pub scorer: Option<PathBuf>,
    /// train, val or test.
    #[arg(long, default_value = "test")]
    pub partition: String,
    #[command(flatten)]
    pub emb: EmbeddingArgs,
}

#[derive(Debug, Args)]
pub struct PromptsArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub folds: Option<PathBuf>,
    #[arg(long, default_value = "main")]
    pub kind: String,
    #[arg(long, default_value = "fixation_level")]
    pub format: String,
    /// Attach the true question to each record.
    #[arg(long)]
    pub with_target: bool,
}

#[derive(Debug, Args)]
pub struct EvalSelectionArgs {
    #[arg(long)]
    pub preds: Option<PathBuf>,
    /// restricted or raw.
    #[arg(long, default_value = "restricted")]
    pub same_span: String,
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

#[derive(Debug, Args)]
pub struct EvalReconstructionArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub generated: Option<PathBuf>,
    /// Fold files; regimes are reported when given.
    #[arg(long)]
    pub folds: Option<PathBuf>,
    /// Add the unseen human questions of each evaluated trial.
    #[arg(long)]
    pub human_baselines: bool,
    /// Command answering categorization prompts on stdin.
    #[arg(long)]
    pub uiuc_command: Option<String>,
    /// Category cache (JSON); defaults to $GAZEGOAL_CACHE_DIR/uiuc.json.
    #[arg(long)]
    pub uiuc_cache: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub uiuc_batch: usize,
    /// Command answering one JSON QA request on stdin.
    #[arg(long)]
    pub qa_command: Option<String>,
    /// Per-record metric table.
    #[arg(long)]
    pub rows: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
    #[command(flatten)]
    pub emb: EmbeddingArgs,
}

#[derive(Debug, Args)]
pub struct OverlapArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// original, simplified or all.
    #[arg(long, default_value = "original")]
    pub level: String,
}

#[derive(Debug, Args)]
pub struct TrialFeaturesArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub preds: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}
