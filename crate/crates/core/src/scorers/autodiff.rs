//! Tape-based reverse-mode differentiation over dense matrices.

use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf { param: Option<usize> },
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    SoftmaxRows(Var),
    Transpose(Var),
    Dropout(Var, Matrix<T>),
    LayerNorm(Var, Vec<T>),
    SumAll(Var),
    CrossEntropy(Var, usize),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
}

#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

const LN_EPS: f64 = 1e-5;

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    /// A constant input.
    pub fn constant(&mut self, m: Matrix<T>) -> Var {
        self.push(m, Op::Leaf { param: None })
    }

    /// A leaf whose gradient is reported under parameter index `id`.
    pub fn param(&mut self, id: usize, m: &Matrix<T>) -> Var {
        self.push(m.clone(), Op::Leaf { param: Some(id) })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    /// Adds a 1 x n row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!((r.rows(), r.cols()), (1, self.value(a).cols()), "add_row shape");
        let r = r.row(0).to_vec();
        let mut v = self.value(a).clone();
        for i in 0..v.rows() {
            for (x, &b) in v.row_mut(i).iter_mut().zip(&r) {
                *x += b;
            }
        }
        self.push(v, Op::AddRow(a, row))
    }

    /// Multiplies every row of `a` elementwise by a 1 x n row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!((r.rows(), r.cols()), (1, self.value(a).cols()), "mul_row shape");
        let r = r.row(0).to_vec();
        let mut v = self.value(a).clone();
        for i in 0..v.rows() {
            for (x, &g) in v.row_mut(i).iter_mut().zip(&r) {
                *x *= g;
            }
        }
        self.push(v, Op::MulRow(a, row))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let v = self.value(a).scale(s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.tanh());
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| T::one() / (T::one() + (-x).exp()));
        self.push(v, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(T::zero()));
        self.push(v, Op::Relu(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut v = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let mut at = 0;
            for &p in parts {
                let src = self.value(p);
                assert_eq!(src.rows(), rows, "concat_cols rows");
                v.row_mut(i)[at..at + src.cols()].copy_from_slice(src.row(i));
                at += src.cols();
            }
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let src = self.value(p);
            assert_eq!(src.cols(), cols, "concat_rows cols");
            data.extend_from_slice(src.data());
            rows += src.rows();
        }
        self.push(Matrix::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let src = self.value(a);
        let mut v = Matrix::zeros(src.rows(), end - start);
        for i in 0..src.rows() {
            v.row_mut(i).copy_from_slice(&src.row(i)[start..end]);
        }
        self.push(v, Op::SliceCols(a, start))
    }

    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Var {
        let src = self.value(a);
        let mut v = Matrix::zeros(idx.len(), src.cols());
        for (r, &i) in idx.iter().enumerate() {
            v.row_mut(r).copy_from_slice(src.row(i));
        }
        self.push(v, Op::GatherRows(a, idx.to_vec()))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let mut v = Matrix::zeros(src.rows(), src.cols());
        for i in 0..src.rows() {
            v.row_mut(i).copy_from_slice(&crate::scalar::softmax(src.row(i)));
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    /// Elementwise product with a fixed mask (already scaled by 1/keep).
    pub fn dropout(&mut self, a: Var, mask: Matrix<T>) -> Var {
        let v = self.value(a).zip_map(&mask, |x, m| x * m);
        self.push(v, Op::Dropout(a, mask))
    }

    /// Normalizes each row to zero mean and unit variance.
    pub fn layer_norm(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let n = T::of(src.cols() as f64);
        let mut v = Matrix::zeros(src.rows(), src.cols());
        let mut inv_sd = Vec::with_capacity(src.rows());
        for i in 0..src.rows() {
            let row = src.row(i);
            let mu = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&x| (x - mu) * (x - mu)).sum::<T>() / n;
            let s = T::one() / (var + T::of(LN_EPS)).sqrt();
            for (d, &x) in v.row_mut(i).iter_mut().zip(row) {
                *d = (x - mu) * s;
            }
            inv_sd.push(s);
        }
        self.push(v, Op::LayerNorm(a, inv_sd))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().copied().sum();
        self.push(Matrix::from_vec(1, 1, vec![s]), Op::SumAll(a))
    }

    /// Cross-entropy of a 1 x k logit row against class `target`.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Var {
        let z = self.value(logits).row(0);
        let max = z.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + z.iter().map(|&x| (x - max).exp()).sum::<T>().ln();
        self.push(
            Matrix::from_vec(1, 1, vec![lse - z[target]]),
            Op::CrossEntropy(logits, target),
        )
    }

    /// Gradients of the scalar `root` with respect to every node.
    pub fn backward(&self, root: Var) -> Vec<Option<Matrix<T>>> {
        let mut grads: Vec<Option<Matrix<T>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Matrix::filled(1, 1, T::one()));
        for id in (0..=root.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            let acc = |grads: &mut Vec<Option<Matrix<T>>>, v: Var, d: Matrix<T>| match &mut grads[v.0] {
                Some(e) => e.add_assign(&d),
                slot => *slot = Some(d),
            };
            match &node.op {
                Op::Leaf { .. } => {}
                Op::MatMul(a, b) => {
                    let da = g.matmul(&self.value(*b).transpose());
                    let db = self.value(*a).transpose().matmul(&g);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.clone());
                }
                Op::AddRow(a, r) => {
                    acc(&mut grads, *r, col_sums(&g));
                    acc(&mut grads, *a, g.clone());
                }
                Op::MulRow(a, r) => {
                    let row = self.value(*r).row(0).to_vec();
                    let av = self.value(*a);
                    let mut da = g.clone();
                    let mut dr = Matrix::zeros(1, row.len());
                    for i in 0..g.rows() {
                        for j in 0..row.len() {
                            da[(i, j)] = g[(i, j)] * row[j];
                            dr[(0, j)] += g[(i, j)] * av[(i, j)];
                        }
                    }
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *r, dr);
                }
                Op::Mul(a, b) => {
                    let da = g.zip_map(self.value(*b), |x, y| x * y);
                    let db = g.zip_map(self.value(*a), |x, y| x * y);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Scale(a, s) => acc(&mut grads, *a, g.scale(*s)),
                Op::Tanh(a) => acc(&mut grads, *a, g.zip_map(&node.value, |d, y| d * (T::one() - y * y))),
                Op::Sigmoid(a) => acc(&mut grads, *a, g.zip_map(&node.value, |d, y| d * y * (T::one() - y))),
                Op::Relu(a) => acc(
                    &mut grads,
                    *a,
                    g.zip_map(&node.value, |d, y| if y > T::zero() { d } else { T::zero() }),
                ),
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let c = self.value(p).cols();
                        let mut d = Matrix::zeros(g.rows(), c);
                        for i in 0..g.rows() {
                            d.row_mut(i).copy_from_slice(&g.row(i)[at..at + c]);
                        }
                        at += c;
                        acc(&mut grads, p, d);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let (r, c) = self.value(p).shape();
                        let d = Matrix::from_vec(r, c, g.data()[at * c..(at + r) * c].to_vec());
                        at += r;
                        acc(&mut grads, p, d);
                    }
                }
                Op::SliceCols(a, start) => {
                    let (r, c) = self.value(*a).shape();
                    let mut d = Matrix::zeros(r, c);
                    for i in 0..r {
                        d.row_mut(i)[*start..*start + g.cols()].copy_from_slice(g.row(i));
                    }
                    acc(&mut grads, *a, d);
                }
                Op::GatherRows(a, idx) => {
                    let (r, c) = self.value(*a).shape();
                    let mut d = Matrix::zeros(r, c);
                    for (k, &i) in idx.iter().enumerate() {
                        for (x, &y) in d.row_mut(i).iter_mut().zip(g.row(k)) {
                            *x += y;
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut d = Matrix::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let dot: T = g.row(i).iter().zip(y.row(i)).map(|(&a, &b)| a * b).sum();
                        for j in 0..y.cols() {
                            d[(i, j)] = y[(i, j)] * (g[(i, j)] - dot);
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Transpose(a) => acc(&mut grads, *a, g.transpose()),
                Op::Dropout(a, mask) => acc(&mut grads, *a, g.zip_map(mask, |x, m| x * m)),
                Op::LayerNorm(a, inv_sd) => {
                    let y = &node.value;
                    let n = T::of(y.cols() as f64);
                    let mut d = Matrix::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let gr = g.row(i);
                        let yr = y.row(i);
                        let mg = gr.iter().copied().sum::<T>() / n;
                        let mgy = gr.iter().zip(yr).map(|(&a, &b)| a * b).sum::<T>() / n;
                        for j in 0..y.cols() {
                            d[(i, j)] = inv_sd[i] * (gr[j] - mg - yr[j] * mgy);
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::SumAll(a) => {
                    let (r, c) = self.value(*a).shape();
                    acc(&mut grads, *a, Matrix::filled(r, c, g[(0, 0)]));
                }
                Op::CrossEntropy(a, target) => {
                    let p = crate::scalar::softmax(self.value(*a).row(0));
                    let mut d = Matrix::from_vec(1, p.len(), p);
                    d[(0, *target)] -= T::one();
                    acc(&mut grads, *a, d.scale(g[(0, 0)]));
                }
            }
            grads[id] = Some(g);
        }
        grads
    }

    /// `(parameter id, gradient)` for every parameter leaf reached by backward.
    pub fn param_grads(&self, grads: &[Option<Matrix<T>>]) -> Vec<(usize, Matrix<T>)> {
        self.nodes
            .iter()
            .zip(grads)
            .filter_map(|(n, g)| match (&n.op, g) {
                (Op::Leaf { param: Some(id) }, Some(g)) => Some((*id, g.clone())),
                _ => None,
            })
            .collect()
    }
}

fn col_sums<T: Scalar>(g: &Matrix<T>) -> Matrix<T> {
    let mut out = Matrix::zeros(1, g.cols());
    for i in 0..g.rows() {
        for (o, &x) in out.row_mut(0).iter_mut().zip(g.row(i)) {
            *o += x;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
    }

    /// Compares analytic gradients of `f` against central differences.
    fn check(inputs: Vec<Matrix<f64>>, f: impl Fn(&mut Tape<f64>, &[Var]) -> Var) {
        let run = |ms: &[Matrix<f64>]| {
            let mut t = Tape::new();
            let vars: Vec<Var> = ms.iter().enumerate().map(|(i, m)| t.param(i, m)).collect();
            let out = f(&mut t, &vars);
            (t, out)
        };
        let (tape, out) = run(&inputs);
        let grads = tape.backward(out);
        let by_param = tape.param_grads(&grads);
        for (pid, g) in by_param {
            for k in 0..inputs[pid].data().len() {
                let h = 1e-6;
                let mut plus = inputs.clone();
                plus[pid].data_mut()[k] += h;
                let mut minus = inputs.clone();
                minus[pid].data_mut()[k] -= h;
                let (tp, op) = run(&plus);
                let (tm, om) = run(&minus);
                let num = (tp.value(op)[(0, 0)] - tm.value(om)[(0, 0)]) / (2.0 * h);
                let ana = g.data()[k];
                assert!(
                    (num - ana).abs() < 1e-5 * (1.0 + num.abs()),
                    "param {pid}[{k}]: {num} vs {ana}"
                );
            }
        }
    }

    #[test]
    fn gradients_of_dense_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ins = vec![
            random(3, 4, &mut rng),
            random(4, 5, &mut rng),
            random(1, 5, &mut rng),
            random(3, 5, &mut rng),
        ];
        check(ins, |t, v| {
            let m = t.matmul(v[0], v[1]);
            let a = t.add_row(m, v[2]);
            let b = t.mul(a, v[3]);
            let c = t.tanh(b);
            let d = t.mul_row(c, v[2]);
            let e = t.sigmoid(d);
            let f = t.relu(a);
            let g = t.add(e, f);
            let s = t.scale(g, 0.7);
            t.sum_all(s)
        });
    }

    #[test]
    fn gradients_of_structural_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ins = vec![random(2, 3, &mut rng), random(2, 2, &mut rng), random(4, 5, &mut rng)];
        check(ins, |t, v| {
            let c = t.concat_cols(&[v[0], v[1]]);
            let r = t.concat_rows(&[c, c]);
            let s = t.slice_cols(r, 1, 4);
            let tr = t.transpose(s);
            let g = t.gather_rows(v[2], &[3, 0, 3]);
            let sm = t.softmax_rows(g);
            let p = t.matmul(tr, r);
            let q = t.slice_cols(p, 0, 3);
            let x = t.matmul(q, sm);
            let l = t.layer_norm(x);
            let l2 = t.mul(l, l);
            t.sum_all(l2)
        });
    }

    #[test]
    fn gradient_of_cross_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ins = vec![random(1, 3, &mut rng)];
        check(ins, |t, v| t.cross_entropy(v[0], 2));
        let mut t = Tape::new();
        let z = t.constant(Matrix::from_rows(&[[0.0f64, 0.0, 0.0]]));
        let l = t.cross_entropy(z, 1);
        assert!((t.value(l)[(0, 0)] - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn dropout_mask_gradient() {
        let mask = Matrix::from_rows(&[[2.0f64, 0.0, 2.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ins = vec![random(1, 3, &mut rng)];
        check(ins, move |t, v| {
            let d = t.dropout(v[0], mask.clone());
            let s = t.tanh(d);
            t.sum_all(s)
        });
    }
}
