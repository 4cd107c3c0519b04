//! Fusion scorer: fixation tokens joined to the text and question tokens in
//! one attention encoder.
//!
//! Input sequence: `[fixations; SEP_E; CLS; words; SEP; question; SEP]`.
//! A fixation token is its projected feature row plus the position embedding
//! of the fixated word plus a learned eye-modality vector. Only the CLS output
//! of the single encoder layer feeds the head, so attention is computed for
//! the CLS query alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::autodiff::{Tape, Var};
use super::features::TrialInput;
use super::{dropout_mask, glorot, small_normal, Architecture, ModelSpec, NeuralScorer, ParamStore, Scorer};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub emb_dim: usize,
    pub feat_dim: usize,
    pub ffn_dim: usize,
    pub max_positions: usize,
    /// Dropout on the projected fixation features.
    pub dropout: f64,
    /// Freezes the text encoder; only the eye projection and head train.
    pub frozen: bool,
    pub seed: u64,
}

impl FusionConfig {
    pub fn new(emb_dim: usize, feat_dim: usize) -> Self {
        FusionConfig {
            emb_dim,
            feat_dim,
            ffn_dim: 2 * emb_dim,
            max_positions: 512,
            dropout: 0.1,
            frozen: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Ids {
    adapter: usize,
    adapter_b: usize,
    pos: usize,
    cls: usize,
    sep: usize,
    sep_e: usize,
    eye: usize,
    fc: usize,
    fc_b: usize,
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
    ln1_g: usize,
    ln1_b: usize,
    ff1: usize,
    ff1_b: usize,
    ff2: usize,
    ff2_b: usize,
    ln2_g: usize,
    ln2_b: usize,
    h1: usize,
    h1_b: usize,
    h2: usize,
    h2_b: usize,
}

#[derive(Debug, Clone)]
pub struct FusionScorer<T> {
    config: FusionConfig,
    params: ParamStore<T>,
    ids: Ids,
}

impl<T: Scalar> FusionScorer<T> {
    pub fn new(config: FusionConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (d, f, ff) = (config.emb_dim, config.feat_dim, config.ffn_dim);
        let enc = !config.frozen;
        let mut p = ParamStore::default();
        let adapter = p.add("adapter", Matrix::identity(d), enc, false);
        let adapter_b = p.add("adapter.b", Matrix::zeros(1, d), enc, false);
        let pos = p.add("pos", small_normal(config.max_positions, d, 0.1, &mut rng), enc, false);
        let cls = p.add("cls", small_normal(1, d, 0.1, &mut rng), enc, false);
        let sep_v: Matrix<T> = small_normal(1, d, 0.1, &mut rng);
        let sep = p.add("sep", sep_v.clone(), enc, false);
        // starts as a copy of the text separator
        let sep_e = p.add("sep_e", sep_v, true, false);
        let eye = p.add("eye", small_normal(1, d, 0.1, &mut rng), true, false);
        let fc = p.add("eye_proj", glorot(f, d, &mut rng), true, true);
        let fc_b = p.add("eye_proj.b", Matrix::zeros(1, d), true, false);
        let wq = p.add("attn.q", glorot(d, d, &mut rng), enc, true);
        let wk = p.add("attn.k", glorot(d, d, &mut rng), enc, true);
        let wv = p.add("attn.v", glorot(d, d, &mut rng), enc, true);
        let wo = p.add("attn.o", glorot(d, d, &mut rng), enc, true);
        let ln1_g = p.add("ln1.g", Matrix::filled(1, d, T::one()), enc, false);
        let ln1_b = p.add("ln1.b", Matrix::zeros(1, d), enc, false);
        let ff1 = p.add("ffn.1", glorot(d, ff, &mut rng), enc, true);
        let ff1_b = p.add("ffn.1.b", Matrix::zeros(1, ff), enc, false);
        let ff2 = p.add("ffn.2", glorot(ff, d, &mut rng), enc, true);
        let ff2_b = p.add("ffn.2.b", Matrix::zeros(1, d), enc, false);
        let ln2_g = p.add("ln2.g", Matrix::filled(1, d, T::one()), enc, false);
        let ln2_b = p.add("ln2.b", Matrix::zeros(1, d), enc, false);
        let h1 = p.add("head.1", glorot(d, d, &mut rng), true, true);
        let h1_b = p.add("head.1.b", Matrix::zeros(1, d), true, false);
        let h2 = p.add("head.2", glorot(d, 1, &mut rng), true, true);
        let h2_b = p.add("head.2.b", Matrix::zeros(1, 1), true, false);
        FusionScorer {
            config,
            params: p,
            ids: Ids {
                adapter,
                adapter_b,
                pos,
                cls,
                sep,
                sep_e,
                eye,
                fc,
                fc_b,
                wq,
                wk,
                wv,
                wo,
                ln1_g,
                ln1_b,
                ff1,
                ff1_b,
                ff2,
                ff2_b,
                ln2_g,
                ln2_b,
                h1,
                h1_b,
                h2,
                h2_b,
            },
        }
    }

    pub fn config(&self) -> &FusionConfig {
        &self.config
    }

    fn positions(&self, range: impl Iterator<Item = usize>) -> Vec<usize> {
        range.map(|i| i.min(self.config.max_positions - 1)).collect()
    }
}

impl<T: Scalar> Scorer<T> for FusionScorer<T> {
    fn name(&self) -> &str {
        "fusion"
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

impl<T: Scalar> NeuralScorer<T> for FusionScorer<T> {
    fn params(&self) -> &ParamStore<T> {
        &self.params
    }
    fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }
    fn architecture(&self) -> Architecture {
        Architecture::Fusion
    }
    fn spec(&self) -> ModelSpec {
        ModelSpec::Fusion(self.config.clone())
    }

    fn forward(&self, t: &mut Tape<T>, input: &TrialInput<T>, rng: Option<&mut ChaCha8Rng>) -> Var {
        let p = &self.params;
        let ids = self.ids;
        let d = self.config.emb_dim;
        let leaf = |t: &mut Tape<T>, id: usize| p.leaf(t, id);
        let adapter = leaf(t, ids.adapter);
        let adapter_b = leaf(t, ids.adapter_b);
        let pos = leaf(t, ids.pos);
        let sep = leaf(t, ids.sep);
        let wk = leaf(t, ids.wk);
        let wv = leaf(t, ids.wv);
        let n_words = input.word_emb.rows();

        // CLS sits at position 0, word i at position i + 1
        let mut shared = Vec::new();
        let n_fix = input.fix_words.len();
        if n_fix > 0 {
            let feats = t.constant(input.features.clone());
            let fc = leaf(t, ids.fc);
            let fc_b = leaf(t, ids.fc_b);
            let z = t.matmul(feats, fc);
            let mut z = t.add_row(z, fc_b);
            if let Some(mask) = dropout_mask(n_fix, d, self.config.dropout, rng) {
                z = t.dropout(z, mask);
            }
            let fp = self.positions(input.fix_words.iter().map(|w| w + 1));
            let pe = t.gather_rows(pos, &fp);
            let z = t.add(z, pe);
            let eye = leaf(t, ids.eye);
            let z = t.add_row(z, eye);
            shared.push(z);
        }
        shared.push(leaf(t, ids.sep_e));
        let p0 = t.gather_rows(pos, &[0]);
        let cls0 = leaf(t, ids.cls);
        let cls = t.add(cls0, p0);
        shared.push(cls);
        let words = t.constant(input.word_emb.clone());
        let w = t.matmul(words, adapter);
        let w = t.add_row(w, adapter_b);
        let wp = self.positions(1..=n_words);
        let wpe = t.gather_rows(pos, &wp);
        shared.push(t.add(w, wpe));
        let sp = self.positions(std::iter::once(n_words + 1));
        let spe = t.gather_rows(pos, &sp);
        shared.push(t.add(sep, spe));
        let xs = t.concat_rows(&shared);
        let ks = t.matmul(xs, wk);
        let vs = t.matmul(xs, wv);

        let wq = leaf(t, ids.wq);
        let q_cls = t.matmul(cls, wq);
        let scale = T::of(1.0 / (d as f64).sqrt());
        let wo = leaf(t, ids.wo);
        let (ln1_g, ln1_b, ln2_g, ln2_b) = (
            leaf(t, ids.ln1_g),
            leaf(t, ids.ln1_b),
            leaf(t, ids.ln2_g),
            leaf(t, ids.ln2_b),
        );
        let (ff1, ff1_b, ff2, ff2_b) = (
            leaf(t, ids.ff1),
            leaf(t, ids.ff1_b),
            leaf(t, ids.ff2),
            leaf(t, ids.ff2_b),
        );
        let (h1, h1_b, h2, h2_b) = (leaf(t, ids.h1), leaf(t, ids.h1_b), leaf(t, ids.h2), leaf(t, ids.h2_b));

        let mut scores = Vec::with_capacity(3);
        for cand in &input.candidates {
            let nq = cand.tokens.rows();
            let qt = t.constant(cand.tokens.clone());
            let q = t.matmul(qt, adapter);
            let q = t.add_row(q, adapter_b);
            let qp = self.positions(n_words + 2..n_words + 2 + nq);
            let qpe = t.gather_rows(pos, &qp);
            let q = t.add(q, qpe);
            let ep = self.positions(std::iter::once(n_words + 2 + nq));
            let epe = t.gather_rows(pos, &ep);
            let end = t.add(sep, epe);
            let xq = t.concat_rows(&[q, end]);
            let kq = t.matmul(xq, wk);
            let vq = t.matmul(xq, wv);
            let k = t.concat_rows(&[ks, kq]);
            let v = t.concat_rows(&[vs, vq]);

            let kt = t.transpose(k);
            let logits = t.matmul(q_cls, kt);
            let logits = t.scale(logits, scale);
            let a = t.softmax_rows(logits);
            let ctx = t.matmul(a, v);
            let ctx = t.matmul(ctx, wo);
            let r = t.add(cls, ctx);
            let r = t.layer_norm(r);
            let r = t.mul_row(r, ln1_g);
            let r = t.add_row(r, ln1_b);
            let f = t.matmul(r, ff1);
            let f = t.add_row(f, ff1_b);
            let f = t.relu(f);
            let f = t.matmul(f, ff2);
            let f = t.add_row(f, ff2_b);
            let r = t.add(r, f);
            let r = t.layer_norm(r);
            let r = t.mul_row(r, ln2_g);
            let r = t.add_row(r, ln2_b);
            let o = t.matmul(r, h1);
            let o = t.add_row(o, h1_b);
            let o = t.tanh(o);
            let o = t.matmul(o, h2);
            scores.push(t.add(o, h2_b));
        }
        t.concat_cols(&scores)
    }
}
