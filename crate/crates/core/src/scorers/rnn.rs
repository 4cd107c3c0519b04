//! Recurrent scorer over the fixation sequence.
//!
//! Each fixation contributes the embedding of the fixated word concatenated
//! with its feature row. The candidate question (aggregate vector then its
//! tokens) is projected to the same width and appended, an LSTM reads the
//! whole sequence and a linear head maps the last hidden state to a score.
//! The fixation prefix is shared by the three candidates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::autodiff::{Tape, Var};
use super::features::TrialInput;
use super::{dropout_mask, glorot, Architecture, ModelSpec, NeuralScorer, ParamStore, Scorer};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnConfig {
    pub emb_dim: usize,
    pub feat_dim: usize,
    pub hidden: usize,
    pub dropout: f64,
    /// Keeps the embedding adapter at identity.
    pub frozen: bool,
    pub seed: u64,
}

impl RnnConfig {
    pub fn new(emb_dim: usize, feat_dim: usize) -> Self {
        RnnConfig {
            emb_dim,
            feat_dim,
            hidden: 40,
            dropout: 0.1,
            frozen: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Ids {
    adapter: usize,
    adapter_b: usize,
    q_proj: usize,
    q_proj_b: usize,
    w_x: usize,
    w_h: usize,
    b: usize,
    head: usize,
    head_b: usize,
}

#[derive(Debug, Clone)]
pub struct RnnScorer<T> {
    config: RnnConfig,
    params: ParamStore<T>,
    ids: Ids,
}

struct Lstm {
    w_h: Var,
    hidden: usize,
}

impl Lstm {
    /// One step from precomputed input gates `gx` (1 x 4H).
    fn step<T: Scalar>(&self, t: &mut Tape<T>, gx: Var, h: Var, c: Var) -> (Var, Var) {
        let hh = self.hidden;
        let gh = t.matmul(h, self.w_h);
        let g = t.add(gx, gh);
        let i = t.slice_cols(g, 0, hh);
        let i = t.sigmoid(i);
        let f = t.slice_cols(g, hh, 2 * hh);
        let f = t.sigmoid(f);
        let u = t.slice_cols(g, 2 * hh, 3 * hh);
        let u = t.tanh(u);
        let o = t.slice_cols(g, 3 * hh, 4 * hh);
        let o = t.sigmoid(o);
        let fc = t.mul(f, c);
        let iu = t.mul(i, u);
        let c = t.add(fc, iu);
        let tc = t.tanh(c);
        let h = t.mul(o, tc);
        (h, c)
    }

    fn run<T: Scalar>(&self, t: &mut Tape<T>, gates: Var, rows: usize, mut h: Var, mut c: Var) -> (Var, Var) {
        for r in 0..rows {
            let gx = t.gather_rows(gates, &[r]);
            (h, c) = self.step(t, gx, h, c);
        }
        (h, c)
    }
}

impl<T: Scalar> RnnScorer<T> {
    pub fn new(config: RnnConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (d, f, h) = (config.emb_dim, config.feat_dim, config.hidden);
        let width = d + f;
        let mut p = ParamStore::default();
        let tune = !config.frozen;
        let adapter = p.add("adapter", Matrix::identity(d), tune, false);
        let adapter_b = p.add("adapter.b", Matrix::zeros(1, d), tune, false);
        let q_proj = p.add("question_proj", glorot(d, width, &mut rng), true, true);
        let q_proj_b = p.add("question_proj.b", Matrix::zeros(1, width), true, false);
        let w_x = p.add("lstm.w_x", glorot(width, 4 * h, &mut rng), true, true);
        let w_h = p.add("lstm.w_h", glorot(h, 4 * h, &mut rng), true, true);
        let mut bias = Matrix::zeros(1, 4 * h);
        for j in h..2 * h {
            bias[(0, j)] = T::one();
        }
        let b = p.add("lstm.b", bias, true, false);
        let head = p.add("head", glorot(h, 1, &mut rng), true, true);
        let head_b = p.add("head.b", Matrix::zeros(1, 1), true, false);
        RnnScorer {
            config,
            params: p,
            ids: Ids {
                adapter,
                adapter_b,
                q_proj,
                q_proj_b,
                w_x,
                w_h,
                b,
                head,
                head_b,
            },
        }
    }

    pub fn config(&self) -> &RnnConfig {
        &self.config
    }
}

impl<T: Scalar> Scorer<T> for RnnScorer<T> {
    fn name(&self) -> &str {
        "rnn"
    }
    fn feature_dim(&self) -> Option<usize> {
        Some(self.config.feat_dim)
    }
    fn embedding_dim(&self) -> Option<usize> {
        Some(self.config.emb_dim)
    }
    fn raw_scores(&self, input: &TrialInput<T>) -> [T; 3] {
        let mut t = Tape::new();
        let out = self.forward(&mut t, input, None);
        let v = t.value(out).row(0);
        [v[0], v[1], v[2]]
    }
}

impl<T: Scalar> NeuralScorer<T> for RnnScorer<T> {
    fn params(&self) -> &ParamStore<T> {
        &self.params
    }
    fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }
    fn architecture(&self) -> Architecture {
        Architecture::Rnn
    }
    fn spec(&self) -> ModelSpec {
        ModelSpec::Rnn(self.config.clone())
    }

    fn forward(&self, t: &mut Tape<T>, input: &TrialInput<T>, mut rng: Option<&mut ChaCha8Rng>) -> Var {
        let p = &self.params;
        let ids = self.ids;
        let h = self.config.hidden;
        let adapter = p.leaf(t, ids.adapter);
        let adapter_b = p.leaf(t, ids.adapter_b);
        let w_x = p.leaf(t, ids.w_x);
        let b = p.leaf(t, ids.b);
        let lstm = Lstm {
            w_h: p.leaf(t, ids.w_h),
            hidden: h,
        };
        let zero = t.constant(Matrix::zeros(1, h));
        let (mut hs, mut cs) = (zero, zero);

        let n_fix = input.fix_words.len();
        if n_fix > 0 {
            let words = t.constant(input.word_emb.clone());
            let fixated = t.gather_rows(words, &input.fix_words);
            let e = t.matmul(fixated, adapter);
            let e = t.add_row(e, adapter_b);
            let feats = t.constant(input.features.clone());
            let mut x = t.concat_cols(&[e, feats]);
            if let Some(mask) = dropout_mask(
                n_fix,
                self.config.emb_dim + self.config.feat_dim,
                self.config.dropout,
                rng.as_deref_mut(),
            ) {
                x = t.dropout(x, mask);
            }
            let g = t.matmul(x, w_x);
            let g = t.add_row(g, b);
            (hs, cs) = lstm.run(t, g, n_fix, hs, cs);
        }

        let q_proj = p.leaf(t, ids.q_proj);
        let q_proj_b = p.leaf(t, ids.q_proj_b);
        let head = p.leaf(t, ids.head);
        let head_b = p.leaf(t, ids.head_b);
        let mut scores = Vec::with_capacity(3);
        for cand in &input.candidates {
            let mut rows = Matrix::zeros(1 + cand.tokens.rows(), self.config.emb_dim);
            rows.row_mut(0).copy_from_slice(&cand.embedding);
            for r in 0..cand.tokens.rows() {
                rows.row_mut(r + 1).copy_from_slice(cand.tokens.row(r));
            }
            let n = rows.rows();
            let q = t.constant(rows);
            let q = t.matmul(q, adapter);
            let q = t.add_row(q, adapter_b);
            let q = t.matmul(q, q_proj);
            let q = t.add_row(q, q_proj_b);
            let g = t.matmul(q, w_x);
            let g = t.add_row(g, b);
            let (hq, _) = lstm.run(t, g, n, hs, cs);
            let s = t.matmul(hq, head);
            scores.push(t.add(s, head_b));
        }
        t.concat_cols(&scores)
    }
}
