//! Minibatch AdamW training with warmup, linear decay and early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::autodiff::Tape;
use super::features::TrialInput;
use super::fusion::FusionConfig;
use super::rnn::RnnConfig;
use super::{Architecture, ModelSpec, NeuralScorer, ScorerError};
use crate::matrix::Matrix;
use crate::scalar::{argmax_first, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub warmup_ratio: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm clip.
    pub grad_clip: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            weight_decay: 0.1,
            warmup_ratio: 0.06,
            batch_size: 16,
            max_epochs: 40,
            patience: 8,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            grad_clip: Some(1.0),
            seed: 0,
        }
    }
}

/// Learning rate at optimizer step `step` (0-based) of `total`.
pub fn lr_at(cfg: &TrainConfig, step: usize, total: usize) -> f64 {
    let warmup = ((cfg.warmup_ratio * total as f64).ceil() as usize).max(1);
    if step < warmup {
        cfg.lr * (step + 1) as f64 / warmup as f64
    } else {
        let rest = (total - warmup).max(1) as f64;
        cfg.lr * ((total - step) as f64 / rest).clamp(0.0, 1.0)
    }
}

/// Patience rule on a lower-is-better validation metric; epochs are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best_epoch: Option<usize>,
    pub best: f64,
    since: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best_epoch: None,
            best: f64::INFINITY,
            since: 0,
        }
    }

    /// Records an epoch; returns `(improved, stop)`.
    pub fn observe(&mut self, epoch: usize, metric: f64) -> (bool, bool) {
        if metric < self.best {
            self.best = metric;
            self.best_epoch = Some(epoch);
            self.since = 0;
            (true, false)
        } else {
            self.since += 1;
            (false, self.since >= self.patience)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    /// Epoch whose weights were kept.
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub best_val_loss: Option<f64>,
    pub best_val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    pub loss: f64,
    pub accuracy: f64,
    pub n: usize,
}

fn trial_seed(seed: u64, epoch: usize, step: usize, k: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (step as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ (k as u64).wrapping_mul(0x94D0_49BB_1331_11EB)
}

/// Mean cross-entropy and accuracy against each input's true type.
pub fn evaluate<T: Scalar>(model: &dyn NeuralScorer<T>, inputs: &[TrialInput<T>]) -> EvalSummary {
    let per: Vec<(f64, bool)> = inputs
        .par_iter()
        .map(|input| {
            let mut t = Tape::new();
            let logits = model.forward(&mut t, input, None);
            let target = input.target();
            let loss = t.cross_entropy(logits, target);
            let pred = argmax_first(t.value(logits).row(0));
            (t.value(loss)[(0, 0)].f64(), pred == target)
        })
        .collect();
    let n = per.len();
    let d = n.max(1) as f64;
    EvalSummary {
        loss: per.iter().map(|p| p.0).sum::<f64>() / d,
        accuracy: per.iter().filter(|p| p.1).count() as f64 / d,
        n,
    }
}

struct AdamW<T> {
    m: Vec<Matrix<T>>,
    v: Vec<Matrix<T>>,
    t: i32,
}

impl<T: Scalar> AdamW<T> {
    fn new(model: &dyn NeuralScorer<T>) -> Self {
        let m: Vec<Matrix<T>> = model
            .params()
            .values
            .iter()
            .map(|p| Matrix::zeros(p.rows(), p.cols()))
            .collect();
        AdamW { v: m.clone(), m, t: 0 }
    }

    fn step(&mut self, model: &mut dyn NeuralScorer<T>, grads: &[Option<Matrix<T>>], lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let store = model.params_mut();
        for (id, g) in grads.iter().enumerate() {
            let Some(g) = g else { continue };
            if !store.trainable[id] {
                continue;
            }
            let decay = if store.decay[id] { cfg.weight_decay } else { 0.0 };
            let p = store.values[id].data_mut();
            let m = self.m[id].data_mut();
            let v = self.v[id].data_mut();
            for k in 0..p.len() {
                let gk = g.data()[k].f64();
                let mk = b1 * m[k].f64() + (1.0 - b1) * gk;
                let vk = b2 * v[k].f64() + (1.0 - b2) * gk * gk;
                m[k] = T::of(mk);
                v[k] = T::of(vk);
                let update = (mk / c1) / ((vk / c2).sqrt() + cfg.eps) + decay * p[k].f64();
                p[k] = T::of(p[k].f64() - lr * update);
            }
        }
    }
}

/// Summed gradients and loss of one minibatch.
fn batch_gradients<T: Scalar>(
    model: &dyn NeuralScorer<T>,
    batch: &[(&TrialInput<T>, usize, u64)],
) -> (Vec<Option<Matrix<T>>>, f64) {
    let n_params = model.params().len();
    batch
        .par_iter()
        .map(|(input, target, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut t = Tape::new();
            let logits = model.forward(&mut t, input, Some(&mut rng));
            let loss = t.cross_entropy(logits, *target);
            let l = t.value(loss)[(0, 0)].f64();
            let grads = t.backward(loss);
            let mut out: Vec<Option<Matrix<T>>> = vec![None; n_params];
            for (id, g) in t.param_grads(&grads) {
                match &mut out[id] {
                    Some(e) => e.add_assign(&g),
                    slot => *slot = Some(g),
                }
            }
            (out, l)
        })
        .reduce(
            || (vec![None; n_params], 0.0),
            |(mut a, la), (b, lb)| {
                for (x, y) in a.iter_mut().zip(b) {
                    match (x.as_mut(), y) {
                        (Some(e), Some(g)) => e.add_assign(&g),
                        (None, Some(g)) => *x = Some(g),
                        _ => {}
                    }
                }
                (a, la + lb)
            },
        )
}

/// Trains in place and restores the weights of the best validation epoch.
/// `labels` overrides the target slot of each training input.
pub fn train_scorer<T: Scalar>(
    model: &mut dyn NeuralScorer<T>,
    train: &[TrialInput<T>],
    val: &[TrialInput<T>],
    cfg: &TrainConfig,
    labels: Option<&[usize]>,
) -> Result<TrainReport, ScorerError> {
    if train.is_empty() {
        return Err(ScorerError::EmptyTrain);
    }
    let targets: Vec<usize> = match labels {
        Some(l) => {
            assert_eq!(l.len(), train.len(), "one label per training input");
            l.to_vec()
        }
        None => train.iter().map(TrialInput::target).collect(),
    };
    let bs = cfg.batch_size.max(1);
    let steps_per_epoch = train.len().div_ceil(bs);
    let total = steps_per_epoch * cfg.max_epochs.max(1);
    let mut opt = AdamW::new(&*model);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best_params = model.params().values.clone();
    let mut logs = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut step = 0;
    let mut last_loss = None;
    let mut stopped = cfg.max_epochs;
    let mut best_val = (None, None);
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(bs) {
            let batch: Vec<_> = chunk
                .iter()
                .enumerate()
                .map(|(k, &i)| (&train[i], targets[i], trial_seed(cfg.seed, epoch, step, k)))
                .collect();
            let (mut grads, loss) = batch_gradients(&*model, &batch);
            let lr = lr_at(cfg, step, total);
            let finite = loss.is_finite() && grads.iter().flatten().all(Matrix::is_finite);
            if !finite {
                return Err(ScorerError::NonFinite {
                    epoch,
                    step,
                    lr,
                    last_loss,
                });
            }
            let scale = 1.0 / chunk.len() as f64;
            let mut sq = 0.0;
            for g in grads.iter_mut().flatten() {
                *g = g.scale(T::of(scale));
                sq += g.data().iter().map(|x| x.f64() * x.f64()).sum::<f64>();
            }
            if let Some(clip) = cfg.grad_clip {
                let norm = sq.sqrt();
                if norm > clip {
                    for g in grads.iter_mut().flatten() {
                        *g = g.scale(T::of(clip / norm));
                    }
                }
            }
            opt.step(model, &grads, lr, cfg);
            last_loss = Some(loss * scale);
            epoch_loss += loss;
            step += 1;
        }
        let train_loss = epoch_loss / train.len() as f64;
        let (val_loss, val_accuracy) = if val.is_empty() {
            (None, None)
        } else {
            let e = evaluate(&*model, val);
            (Some(e.loss), Some(e.accuracy))
        };
        log::debug!("epoch {epoch}: train loss {train_loss:.4} val {val_loss:?} acc {val_accuracy:?}");
        logs.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
        });
        // without validation data the final weights are kept
        let metric = val_loss.unwrap_or(-(epoch as f64));
        let (improved, stop) = stopper.observe(epoch, metric);
        if improved {
            best_params = model.params().values.clone();
            best_val = (val_loss, val_accuracy);
        }
        if stop {
            stopped = epoch;
            break;
        }
    }
    model.params_mut().values = best_params;
    Ok(TrainReport {
        epochs: logs,
        best_epoch: stopper.best_epoch.unwrap_or(0),
        stopped_epoch: stopped,
        best_val_loss: best_val.0,
        best_val_accuracy: best_val.1,
    })
}

/// Hyperparameter grid; axes that do not apply to an architecture are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub dropouts: Vec<f64>,
    pub hidden_sizes: Vec<usize>,
    pub frozen: Vec<bool>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            learning_rates: vec![1e-5, 3e-5, 1e-4, 2e-4],
            dropouts: vec![0.1, 0.3, 0.5],
            hidden_sizes: vec![10, 40, 70, 140],
            frozen: vec![true, false],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub model: ModelSpec,
    pub lr: f64,
}

impl GridSpec {
    /// Fusion runs cross learning rate, dropout and freezing; recurrent runs
    /// cross learning rate, hidden size and freezing at the first dropout.
    pub fn expand(&self, arch: Architecture, emb_dim: usize, feat_dim: usize, seed: u64) -> Vec<RunSpec> {
        let mut out = Vec::new();
        for &lr in &self.learning_rates {
            for &frozen in &self.frozen {
                match arch {
                    Architecture::Fusion => {
                        for &dropout in &self.dropouts {
                            out.push(RunSpec {
                                model: ModelSpec::Fusion(FusionConfig {
                                    dropout,
                                    frozen,
                                    seed,
                                    ..FusionConfig::new(emb_dim, feat_dim)
                                }),
                                lr,
                            });
                        }
                    }
                    Architecture::Rnn => {
                        for &hidden in &self.hidden_sizes {
                            out.push(RunSpec {
                                model: ModelSpec::Rnn(RnnConfig {
                                    hidden,
                                    dropout: self.dropouts.first().copied().unwrap_or(0.1),
                                    frozen,
                                    seed,
                                    ..RnnConfig::new(emb_dim, feat_dim)
                                }),
                                lr,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

pub struct GridResult<T: Scalar> {
    pub best: usize,
    pub runs: Vec<(RunSpec, TrainReport)>,
    pub model: Box<dyn NeuralScorer<T>>,
}

/// Trains every run and keeps the one with the best pooled validation
/// accuracy (lower validation loss breaks ties).
pub fn train_grid<T: Scalar>(
    runs: &[RunSpec],
    train: &[TrialInput<T>],
    val: &[TrialInput<T>],
    base: &TrainConfig,
) -> Result<GridResult<T>, ScorerError> {
    let mut best: Option<(usize, f64, f64, Box<dyn NeuralScorer<T>>)> = None;
    let mut done = Vec::with_capacity(runs.len());
    for (i, run) in runs.iter().enumerate() {
        let cfg = TrainConfig {
            lr: run.lr,
            ..base.clone()
        };
        let mut model = run.model.build::<T>();
        let report = train_scorer(model.as_mut(), train, val, &cfg, None)?;
        let acc = report.best_val_accuracy.unwrap_or(0.0);
        let loss = report.best_val_loss.unwrap_or(f64::INFINITY);
        log::info!(
            "run {}/{} ({:?}, lr {:e}): val acc {acc:.4}",
            i + 1,
            runs.len(),
            run.model.architecture(),
            run.lr
        );
        let better = match &best {
            None => true,
            Some((_, a, l, _)) => acc > *a || (acc == *a && loss < *l),
        };
        if better {
            best = Some((i, acc, loss, model));
        }
        done.push((run.clone(), report));
    }
    let (best, _, _, model) = best.ok_or_else(|| ScorerError::Config("empty hyperparameter grid".into()))?;
    Ok(GridResult {
        best,
        runs: done,
        model,
    })
}
