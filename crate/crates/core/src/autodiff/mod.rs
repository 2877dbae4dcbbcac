//! Dense `f64` tensors with tape-based reverse-mode differentiation.
//!
//! Only the operations the path model needs are provided. Every tensor is a
//! 2-D [`Array2`]; vectors are `1 x n` and scalars `1 x 1`. A stack of `k`
//! items per row (for example `N` path encodings per node) is stored as an
//! `(n * k) x h` matrix whose row `i * k + j` is item `j` of row `i`.
//!
//! Each forward op checks its output for NaN/Inf and returns
//! [`Error::NonFinite`] rather than propagating it.
//!
//! ```
//! use ndarray::array;
//! use pathmlp::autodiff::{ParamStore, Tape};
//!
//! let mut store = ParamStore::new();
//! let w = store.add("w", array![[2.0], [3.0]]);
//! let mut tape = Tape::new();
//! let x = tape.input(array![[1.0, 1.0]]);
//! let wv = tape.param(&store, w);
//! let y = tape.linear(x, wv, None).unwrap();
//! let loss = tape.sum(y).unwrap();
//! tape.backward(loss, &mut store).unwrap();
//! assert_eq!(tape.value(loss)[[0, 0]], 5.0);
//! assert_eq!(store.get(w).grad, array![[1.0], [1.0]]);
//! ```

mod gradcheck;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use ndarray::{s, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

pub use gradcheck::{finite_difference_check, FdReport};

/// Clamp applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable tensor with its most recent gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
    pub trainable: bool,
    /// Whether L2 weight decay applies during optimization.
    pub decay: bool,
}

/// Owns every parameter of a model. Names are unique.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a trainable, decayed parameter.
    ///
    /// Panics if `name` is already taken.
    pub fn add(&mut self, name: &str, value: Array2<f64>) -> ParamId {
        self.add_with(name, value, true, true)
    }

    pub fn add_with(&mut self, name: &str, value: Array2<f64>, trainable: bool, decay: bool) -> ParamId {
        assert!(
            self.find(name).is_none(),
            "duplicate parameter name '{name}'"
        );
        let grad = Array2::zeros(value.raw_dim());
        self.params.push(Parameter {
            name: name.to_string(),
            value,
            grad,
            trainable,
            decay,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Total number of scalar entries.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Row-sparse 0/1 matrix used as a left operand (`A · X`).
#[derive(Debug, Clone)]
pub struct SparseRows {
    pub offsets: Vec<usize>,
    pub cols: Vec<usize>,
    pub ncols: usize,
}

impl SparseRows {
    pub fn nrows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.cols[self.offsets[r]..self.offsets[r + 1]]
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    Linear { x: Var, w: Var, b: Option<Var> },
    Relu(Var),
    Concat(Vec<Var>),
    SoftmaxRows(Var),
    WeightedSum { weights: Var, items: Var },
    Add(Var, Var),
    AddBias { x: Var, b: Var },
    Scale(Var, f64),
    AffineMix { x: Var, y: Var, beta: f64 },
    Dropout { x: Var, mask: Array2<f64> },
    CrossEntropy { probs: Var, rows: Vec<usize>, labels: Vec<usize> },
    Gather { x: Var, index: Vec<usize> },
    SparseMatmul { a: std::sync::Arc<SparseRows>, x: Var },
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

/// Ordered record of one forward pass. Build a fresh tape per step.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn finite(op: &'static str, value: Array2<f64>) -> Result<Array2<f64>> {
    if value.iter().all(|v| v.is_finite()) {
        Ok(value)
    } else {
        Err(Error::NonFinite(op))
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        let needs_grad = match &op {
            Op::Leaf => false,
            Op::Param(_) => true,
            Op::Linear { x, w, b } => {
                self.needs(*x) || self.needs(*w) || b.is_some_and(|b| self.needs(b))
            }
            Op::Relu(x)
            | Op::SoftmaxRows(x)
            | Op::Scale(x, _)
            | Op::Dropout { x, .. }
            | Op::Gather { x, .. }
            | Op::SparseMatmul { x, .. }
            | Op::Sum(x) => self.needs(*x),
            Op::CrossEntropy { probs, .. } => self.needs(*probs),
            Op::Concat(xs) => xs.iter().any(|&x| self.needs(x)),
            Op::WeightedSum { weights: x, items: y }
            | Op::Add(x, y)
            | Op::AddBias { x, b: y }
            | Op::AffineMix { x, y, .. } => self.needs(*x) || self.needs(*y),
        };
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    #[inline]
    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Constant input; receives no gradient.
    pub fn input(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Leaf bound to a parameter; gradients flow back into the store.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.get(id).value.clone(), Op::Param(id))
    }

    /// `x · w (+ b)` with the bias broadcast over rows.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (n, a) = self.shape(x);
        let (wa, wb) = self.shape(w);
        if a != wa {
            return Err(Error::shape("linear", format!("{n}x{a} times {wa}x{wb}")));
        }
        let mut out = self.value(x).dot(self.value(w));
        if let Some(b) = b {
            let bias = self.value(b);
            if bias.dim() != (1, wb) {
                return Err(Error::shape(
                    "linear",
                    format!("bias {:?} for {wb} outputs", bias.dim()),
                ));
            }
            out += bias;
        }
        let out = finite("linear", out)?;
        Ok(self.push(out, Op::Linear { x, w, b }))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).mapv(|v| v.max(0.0));
        Ok(self.push(out, Op::Relu(x)))
    }

    /// Concatenation along the feature (column) axis.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        if xs.is_empty() {
            return Err(Error::shape("concat", "no inputs"));
        }
        let rows = self.shape(xs[0]).0;
        if let Some(bad) = xs.iter().find(|&&v| self.shape(v).0 != rows) {
            return Err(Error::shape(
                "concat",
                format!("{} rows vs {rows}", self.shape(*bad).0),
            ));
        }
        let views: Vec<_> = xs.iter().map(|&v| self.value(v).view()).collect();
        let out = ndarray::concatenate(Axis(1), &views)
            .map_err(|e| Error::shape("concat", e.to_string()))?;
        Ok(self.push(out, Op::Concat(xs.to_vec())))
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let mut out = self.value(x).clone();
        for mut row in out.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            row.mapv_inplace(|v| (v - max).exp());
            let z = row.sum();
            row /= z;
        }
        let out = finite("softmax_rows", out)?;
        Ok(self.push(out, Op::SoftmaxRows(x)))
    }

    /// `out[i] = sum_k weights[i, k] * items[i * K + k]` for an `n x K`
    /// weight matrix and an `(n * K) x h` item stack.
    pub fn weighted_sum(&mut self, weights: Var, items: Var) -> Result<Var> {
        let (n, k) = self.shape(weights);
        let (rows, h) = self.shape(items);
        if rows != n * k {
            return Err(Error::shape(
                "weighted_sum",
                format!("{n}x{k} weights for {rows} item rows"),
            ));
        }
        let w = self.value(weights);
        let it = self.value(items);
        let mut out = Array2::zeros((n, h));
        for i in 0..n {
            let mut acc = out.row_mut(i);
            for j in 0..k {
                acc.scaled_add(w[[i, j]], &it.row(i * k + j));
            }
        }
        let out = finite("weighted_sum", out)?;
        Ok(self.push(out, Op::WeightedSum { weights, items }))
    }

    pub fn add(&mut self, x: Var, y: Var) -> Result<Var> {
        if self.shape(x) != self.shape(y) {
            return Err(Error::shape(
                "add",
                format!("{:?} + {:?}", self.shape(x), self.shape(y)),
            ));
        }
        let out = finite("add", self.value(x) + self.value(y))?;
        Ok(self.push(out, Op::Add(x, y)))
    }

    /// `x + b` with a `1 x h` bias broadcast over rows.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (_, h) = self.shape(x);
        if self.shape(b) != (1, h) {
            return Err(Error::shape(
                "add_bias",
                format!("bias {:?} for width {h}", self.shape(b)),
            ));
        }
        let out = finite("add_bias", self.value(x) + self.value(b))?;
        Ok(self.push(out, Op::AddBias { x, b }))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let out = finite("scale", self.value(x) * c)?;
        Ok(self.push(out, Op::Scale(x, c)))
    }

    /// `beta * x + (1 - beta) * y`.
    pub fn affine_mix(&mut self, x: Var, y: Var, beta: f64) -> Result<Var> {
        if self.shape(x) != self.shape(y) {
            return Err(Error::shape(
                "affine_mix",
                format!("{:?} vs {:?}", self.shape(x), self.shape(y)),
            ));
        }
        let mut out = self.value(y) * (1.0 - beta);
        out.scaled_add(beta, self.value(x));
        let out = finite("affine_mix", out)?;
        Ok(self.push(out, Op::AffineMix { x, y, beta }))
    }

    /// Inverted dropout. In evaluation mode, or with `p == 0`, returns `x`
    /// itself without recording anything.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, training: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must lie in [0, 1), got {p}"
            )));
        }
        if !training || p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let mask = Array2::from_shape_simple_fn(self.value(x).raw_dim(), || {
            if rng.random::<f64>() < p {
                0.0
            } else {
                keep
            }
        });
        let out = self.value(x) * &mask;
        Ok(self.push(out, Op::Dropout { x, mask }))
    }

    /// Mean negative log-likelihood of `labels[t]` under row `rows[t]` of a
    /// probability matrix. Probabilities are clamped at [`PROB_FLOOR`].
    pub fn cross_entropy_mean(&mut self, probs: Var, rows: &[usize], labels: &[usize]) -> Result<Var> {
        let (n, c) = self.shape(probs);
        if rows.len() != labels.len() || rows.is_empty() {
            return Err(Error::shape(
                "cross_entropy_mean",
                format!("{} rows with {} labels", rows.len(), labels.len()),
            ));
        }
        if let Some(&r) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::shape("cross_entropy_mean", format!("row {r} of {n}")));
        }
        if let Some(&label) = labels.iter().find(|&&y| y >= c) {
            return Err(Error::LabelOutOfRange { label, classes: c });
        }
        let p = self.value(probs);
        let total: f64 = rows
            .iter()
            .zip(labels)
            .map(|(&r, &y)| p[[r, y]].max(PROB_FLOOR).ln())
            .sum();
        let loss = -total / rows.len() as f64;
        let out = finite("cross_entropy_mean", Array2::from_elem((1, 1), loss))?;
        Ok(self.push(
            out,
            Op::CrossEntropy {
                probs,
                rows: rows.to_vec(),
                labels: labels.to_vec(),
            },
        ))
    }

    /// Rows of `x` selected (with repetition) by `index`.
    pub fn gather_rows(&mut self, x: Var, index: &[usize]) -> Result<Var> {
        let (n, _) = self.shape(x);
        if let Some(&bad) = index.iter().find(|&&i| i >= n) {
            return Err(Error::shape("gather_rows", format!("row {bad} of {n}")));
        }
        let out = self.value(x).select(Axis(0), index);
        Ok(self.push(
            out,
            Op::Gather {
                x,
                index: index.to_vec(),
            },
        ))
    }

    /// `A · x` for a row-sparse 0/1 matrix `A`.
    pub fn sparse_matmul(&mut self, a: std::sync::Arc<SparseRows>, x: Var) -> Result<Var> {
        let (n, h) = self.shape(x);
        if a.ncols != n {
            return Err(Error::shape(
                "sparse_matmul",
                format!("{}x{} times {n}x{h}", a.nrows(), a.ncols),
            ));
        }
        let xv = self.value(x);
        let mut out = Array2::zeros((a.nrows(), h));
        for r in 0..a.nrows() {
            let mut acc = out.row_mut(r);
            for &c in a.row(r) {
                acc += &xv.row(c);
            }
        }
        let out = finite("sparse_matmul", out)?;
        Ok(self.push(out, Op::SparseMatmul { a, x }))
    }

    /// Sum of all entries, as a `1 x 1` tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let out = finite("sum", Array2::from_elem((1, 1), self.value(x).sum()))?;
        Ok(self.push(out, Op::Sum(x)))
    }

    /// Fingerprint of every rectifier's active set; two forward passes with
    /// equal signatures are on the same linear piece.
    pub fn relu_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for node in &self.nodes {
            if let Op::Relu(x) = node.op {
                for &v in self.value(x).iter() {
                    (v > 0.0).hash(&mut h);
                }
            }
        }
        h.finish()
    }

    /// Reverse sweep from a scalar `loss`. Every parameter's `grad` is
    /// overwritten; parameters not reached get zeros.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let (rows, cols) = self.shape(loss);
        if (rows, cols) != (1, 1) {
            return Err(Error::NonScalarLoss { rows, cols });
        }
        store.zero_grads();
        let mut grads: Vec<Option<Array2<f64>>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Array2::ones((1, 1)));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => store.get_mut(*id).grad += &g,
                Op::Linear { x, w, b } => {
                    let xv = self.value(*x);
                    let wv = self.value(*w);
                    if self.needs(*w) {
                        accumulate(&mut grads[w.0], xv.t().dot(&g));
                    }
                    if let Some(b) = b {
                        accumulate(&mut grads[b.0], g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if self.needs(*x) {
                        accumulate(&mut grads[x.0], g.dot(&wv.t()));
                    }
                }
                Op::Relu(x) => {
                    let mut gx = g;
                    gx.zip_mut_with(self.value(*x), |gv, &xv| {
                        if xv <= 0.0 {
                            *gv = 0.0;
                        }
                    });
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Concat(xs) => {
                    let mut start = 0;
                    for &x in xs {
                        let w = self.shape(x).1;
                        accumulate(&mut grads[x.0], g.slice(s![.., start..start + w]).to_owned());
                        start += w;
                    }
                }
                Op::SoftmaxRows(x) => {
                    let p = &node.value;
                    let mut gx = g;
                    for (mut grow, prow) in gx.rows_mut().into_iter().zip(p.rows()) {
                        let dotp = grow.dot(&prow);
                        grow.zip_mut_with(&prow, |gv, &pv| *gv = pv * (*gv - dotp));
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::WeightedSum { weights, items } => {
                    let w = self.value(*weights);
                    let it = self.value(*items);
                    let (n, k) = w.dim();
                    let mut gw = Array2::zeros((n, k));
                    let mut gi = Array2::zeros(it.raw_dim());
                    for i in 0..n {
                        let gr = g.row(i);
                        for j in 0..k {
                            gw[[i, j]] = gr.dot(&it.row(i * k + j));
                            gi.row_mut(i * k + j).scaled_add(w[[i, j]], &gr);
                        }
                    }
                    accumulate(&mut grads[weights.0], gw);
                    accumulate(&mut grads[items.0], gi);
                }
                Op::Add(x, y) => {
                    accumulate(&mut grads[y.0], g.clone());
                    accumulate(&mut grads[x.0], g);
                }
                Op::AddBias { x, b } => {
                    accumulate(&mut grads[b.0], g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    accumulate(&mut grads[x.0], g);
                }
                Op::Scale(x, c) => accumulate(&mut grads[x.0], g * *c),
                Op::AffineMix { x, y, beta } => {
                    accumulate(&mut grads[y.0], &g * (1.0 - beta));
                    accumulate(&mut grads[x.0], g * *beta);
                }
                Op::Dropout { x, mask } => accumulate(&mut grads[x.0], g * mask),
                Op::CrossEntropy {
                    probs,
                    rows,
                    labels,
                } => {
                    let p = self.value(*probs);
                    let scale = g[[0, 0]] / rows.len() as f64;
                    let mut gp = Array2::zeros(p.raw_dim());
                    for (&r, &y) in rows.iter().zip(labels) {
                        let pv = p[[r, y]];
                        if pv >= PROB_FLOOR {
                            gp[[r, y]] -= scale / pv;
                        }
                    }
                    accumulate(&mut grads[probs.0], gp);
                }
                Op::Gather { x, index } => {
                    let mut gx = Array2::zeros(self.value(*x).raw_dim());
                    for (r, &src) in index.iter().enumerate() {
                        let mut dst = gx.row_mut(src);
                        dst += &g.row(r);
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::SparseMatmul { a, x } => {
                    let mut gx = Array2::zeros(self.value(*x).raw_dim());
                    for r in 0..a.nrows() {
                        let gr = g.row(r);
                        for &c in a.row(r) {
                            let mut dst = gx.row_mut(c);
                            dst += &gr;
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Sum(x) => {
                    let gx = Array2::from_elem(self.value(*x).raw_dim(), g[[0, 0]]);
                    accumulate(&mut grads[x.0], gx);
                }
            }
        }
        Ok(())
    }
}

/// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` initialization.
pub fn init_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let bound = 1.0 / (rows.max(1) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &Array2<f64>, b: &Array2<f64>, tol: f64) -> bool {
        a.dim() == b.dim() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn linear_identity_and_hand_product() {
        let mut t = Tape::new();
        let x = t.input(Array2::eye(2));
        let w = t.input(array![[1.0, 2.0], [3.0, 4.0]]);
        let y = t.linear(x, w, None).unwrap();
        assert_eq!(t.value(y), &array![[1.0, 2.0], [3.0, 4.0]]);

        let x = t.input(array![[1.0, 2.0]]);
        let w = t.input(array![[1.0], [1.0]]);
        let y = t.linear(x, w, None).unwrap();
        assert_eq!(t.value(y), &array![[3.0]]);

        let bad = t.input(array![[1.0, 2.0, 3.0]]);
        assert!(matches!(t.linear(bad, w, None), Err(Error::Shape { .. })));
    }

    #[test]
    fn linear_weight_gradient_is_column_sums() {
        let mut store = ParamStore::new();
        let w = store.add("w", array![[0.5, -1.0], [2.0, 0.0], [1.0, 1.0]]);
        let mut t = Tape::new();
        let x = t.input(array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        let wv = t.param(&store, w);
        let y = t.linear(x, wv, None).unwrap();
        let l = t.sum(y).unwrap();
        t.backward(l, &mut store).unwrap();
        assert_eq!(store.get(w).grad, array![[5.0, 5.0], [7.0, 7.0], [9.0, 9.0]]);
    }

    #[test]
    fn relu_values_and_gradient() {
        let mut store = ParamStore::new();
        let p = store.add("x", array![[-1.0, 2.0]]);
        let mut t = Tape::new();
        let x = t.param(&store, p);
        let r = t.relu(x).unwrap();
        assert_eq!(t.value(r), &array![[0.0, 2.0]]);
        let rr = t.relu(r).unwrap();
        assert_eq!(t.value(rr), t.value(r));
        let l = t.sum(r).unwrap();
        t.backward(l, &mut store).unwrap();
        assert_eq!(store.get(p).grad, array![[0.0, 1.0]]);
    }

    #[test]
    fn relu_linear_chain_one_by_one() {
        // d/dw relu(w * x + b) at w = 2, x = 3, b = -1 is x = 3.
        let mut store = ParamStore::new();
        let w = store.add("w", array![[2.0]]);
        let b = store.add("b", array![[-1.0]]);
        let mut t = Tape::new();
        let x = t.input(array![[3.0]]);
        let (wv, bv) = (t.param(&store, w), t.param(&store, b));
        let y = t.linear(x, wv, Some(bv)).unwrap();
        let r = t.relu(y).unwrap();
        t.backward(r, &mut store).unwrap();
        assert_eq!(store.get(w).grad, array![[3.0]]);
        assert_eq!(store.get(b).grad, array![[1.0]]);
    }

    #[test]
    fn concat_shapes() {
        let mut t = Tape::new();
        let a = t.input(array![[1.0, 2.0]]);
        let b = t.input(array![[3.0, 4.0, 5.0]]);
        let c = t.concat(&[a, b]).unwrap();
        assert_eq!(t.shape(c), (1, 5));
        let single = t.concat(&[a]).unwrap();
        assert_eq!(t.value(single), t.value(a));
        let tall = t.input(array![[1.0], [2.0]]);
        assert!(t.concat(&[a, tall]).is_err());
    }

    #[test]
    fn softmax_examples() {
        let mut t = Tape::new();
        let x = t.input(array![[0.0, 0.0], [1.0f64.ln(), 3.0f64.ln()]]);
        let p = t.softmax_rows(x).unwrap();
        assert!(close(t.value(p), &array![[0.5, 0.5], [0.25, 0.75]], 1e-15));

        let y = t.input(array![[0.3, -2.0, 7.0]]);
        let shifted = t.input(array![[100.3, 98.0, 107.0]]);
        let py = t.softmax_rows(y).unwrap();
        let ps = t.softmax_rows(shifted).unwrap();
        assert!(close(t.value(py), t.value(ps), 1e-12));
    }

    #[test]
    fn weighted_sum_examples() {
        let mut t = Tape::new();
        let w = t.input(array![[0.25, 0.75]]);
        let items = t.input(array![[4.0, 0.0], [0.0, 8.0]]);
        let out = t.weighted_sum(w, items).unwrap();
        assert_eq!(t.value(out), &array![[1.0, 6.0]]);

        let uniform = t.input(array![[1.0 / 3.0; 3]]);
        let same = t.input(array![[1.5, -2.0], [1.5, -2.0], [1.5, -2.0]]);
        let out = t.weighted_sum(uniform, same).unwrap();
        assert!(close(t.value(out), &array![[1.5, -2.0]], 1e-15));

        let onehot = t.input(array![[0.0, 1.0, 0.0]]);
        let distinct = t.input(array![[1.0], [2.0], [3.0]]);
        let out = t.weighted_sum(onehot, distinct).unwrap();
        assert_eq!(t.value(out), &array![[2.0]]);
    }

    #[test]
    fn affine_mix_examples() {
        let mut t = Tape::new();
        let x = t.input(array![[2.0]]);
        let y = t.input(array![[4.0]]);
        let m0 = t.affine_mix(x, y, 0.0).unwrap();
        let m1 = t.affine_mix(x, y, 1.0).unwrap();
        let mh = t.affine_mix(x, y, 0.5).unwrap();
        assert_eq!(t.value(m0), &array![[4.0]]);
        assert_eq!(t.value(m1), &array![[2.0]]);
        assert_eq!(t.value(mh), &array![[3.0]]);
    }

    #[test]
    fn dropout_identity_cases_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut t = Tape::new();
        let x = t.input(Array2::from_elem((100, 100), 1.0));
        assert_eq!(t.dropout(x, 0.0, true, &mut rng).unwrap(), x);
        assert_eq!(t.dropout(x, 0.5, false, &mut rng).unwrap(), x);
        let d = t.dropout(x, 0.3, true, &mut rng).unwrap();
        let mean = t.value(d).mean().unwrap();
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
        assert!(t.dropout(x, 1.0, true, &mut rng).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let mut t = Tape::new();
        let p = t.input(array![[0.5, 0.5], [0.25, 0.75]]);
        let l = t.cross_entropy_mean(p, &[0, 1], &[0, 1]).unwrap();
        let want = (2.0f64.ln() + (4.0f64 / 3.0).ln()) / 2.0;
        assert!((t.value(l)[[0, 0]] - want).abs() < 1e-15);

        let perfect = t.input(array![[1.0, 0.0], [0.0, 1.0]]);
        let l = t.cross_entropy_mean(perfect, &[0, 1], &[0, 1]).unwrap();
        assert!(t.value(l)[[0, 0]] <= 1e-11);

        let uniform = t.input(Array2::from_elem((3, 4), 0.25));
        let l = t.cross_entropy_mean(uniform, &[0, 1, 2], &[3, 0, 2]).unwrap();
        assert!((t.value(l)[[0, 0]] - 4.0f64.ln()).abs() < 1e-15);

        assert!(matches!(
            t.cross_entropy_mean(uniform, &[0], &[4]),
            Err(Error::LabelOutOfRange { label: 4, classes: 4 })
        ));
    }

    #[test]
    fn backward_rejects_non_scalar_and_zeros_unused() {
        let mut store = ParamStore::new();
        let used = store.add("used", array![[1.0, 2.0]]);
        let unused = store.add("unused", array![[7.0]]);
        store.get_mut(unused).grad.fill(3.0);
        let mut t = Tape::new();
        let x = t.param(&store, used);
        assert!(matches!(
            t.backward(x, &mut store),
            Err(Error::NonScalarLoss { rows: 1, cols: 2 })
        ));
        let l = t.sum(x).unwrap();
        t.backward(l, &mut store).unwrap();
        assert_eq!(store.get(used).grad, array![[1.0, 1.0]]);
        assert_eq!(store.get(unused).grad, array![[0.0]]);
    }

    #[test]
    fn non_finite_forward_is_an_error() {
        let mut t = Tape::new();
        let x = t.input(array![[1e300]]);
        let w = t.input(array![[1e300]]);
        assert!(matches!(t.linear(x, w, None), Err(Error::NonFinite("linear"))));
    }

    #[test]
    fn gather_and_sparse_matmul_backward() {
        let mut store = ParamStore::new();
        let p = store.add("x", array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        let mut t = Tape::new();
        let x = t.param(&store, p);
        let g = t.gather_rows(x, &[2, 0, 2]).unwrap();
        assert_eq!(t.value(g), &array![[5.0, 6.0], [1.0, 2.0], [5.0, 6.0]]);
        let a = std::sync::Arc::new(SparseRows {
            offsets: vec![0, 2, 2],
            cols: vec![0, 1],
            ncols: 3,
        });
        let ax = t.sparse_matmul(a, x).unwrap();
        assert_eq!(t.value(ax), &array![[4.0, 6.0], [0.0, 0.0]]);
        let sg = t.sum(g).unwrap();
        let sa = t.sum(ax).unwrap();
        let total = t.add(sg, sa).unwrap();
        t.backward(total, &mut store).unwrap();
        assert_eq!(store.get(p).grad, array![[2.0, 2.0], [1.0, 1.0], [2.0, 2.0]]);
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut store = ParamStore::new();
        let p = store.add("x", array![[1.0, -2.0], [0.0, 3.0]]);
        let mut t = Tape::new();
        let x = t.param(&store, p);
        let s = t.sum(x).unwrap();
        t.backward(s, &mut store).unwrap();
        assert_eq!(store.get(p).grad, Array2::ones((2, 2)));
    }

    #[test]
    #[should_panic(expected = "duplicate parameter name")]
    fn duplicate_names_panic() {
        let mut store = ParamStore::new();
        store.add("w", array![[1.0]]);
        store.add("w", array![[2.0]]);
    }
}
