//! Tape-based reverse-mode differentiation over [`Tensor`]s.
//!
//! A [`Tape`] is rebuilt for every forward pass. Trainable values live in a
//! [`ParamStore`]; the tape reads them by reference and [`Tape::backward`]
//! returns a [`Gradients`] table that the caller folds back into the store
//! with [`ParamStore::accumulate`].
//!
//! ```
//! use condrum::autodiff::{ParamStore, Tape};
//! use condrum::tensor::Tensor;
//!
//! let mut store = ParamStore::new();
//! let x = store.add("x", Tensor::vector(&[1.0, 2.0, 3.0]));
//! let grads = {
//!     let mut tape = Tape::new(&store);
//!     let xv = tape.param(x);
//!     let sq = tape.hadamard(xv, xv).unwrap();
//!     let loss = tape.sum(sq);
//!     tape.backward(loss).unwrap()
//! };
//! store.accumulate(&grads).unwrap();
//! assert_eq!(store.get(x).grad.data(), &[2.0, 4.0, 6.0]);
//! ```

use crate::error::{Error, Result};
use crate::tensor::{sigmoid, softmax_in_place, Tensor};

/// Lower clamp applied to probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Parameter {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Named, ordered collection of trainable parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.params.push(Parameter::new(value));
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Parameter)> {
        self.names.iter().map(String::as_str).zip(&self.params)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn zero_grads(&mut self) {
        self.params.iter_mut().for_each(Parameter::zero_grad);
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Adds every gradient in `grads` onto the matching parameter's `grad`.
    pub fn accumulate(&mut self, grads: &Gradients) -> Result<()> {
        for (idx, g) in grads.by_param.iter().enumerate() {
            if let Some(g) = g {
                self.params[idx].grad.add_assign(g)?;
            }
        }
        Ok(())
    }
}

/// Gradients of one loss with respect to the parameters it reached.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    by_param: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.by_param.get(id.0).and_then(Option::as_ref)
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseOp {
    Add,
    Sub,
    Hadamard,
    Sigmoid,
    Tanh,
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Concat(Vec<Var>),
    SliceCols(Var, usize),
    SoftmaxRows(Var),
    Nll {
        probs: Var,
        targets: Vec<usize>,
        weights: Vec<f64>,
    },
    Sum(Var),
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Constant | Op::Param(_) => vec![],
            Op::MatMul(a, b)
            | Op::MatMulNt(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Hadamard(a, b)
            | Op::AddRow(a, b) => vec![*a, *b],
            Op::Scale(a, _)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::SliceCols(a, _)
            | Op::SoftmaxRows(a)
            | Op::Sum(a) => vec![*a],
            Op::Concat(parts) => parts.clone(),
            Op::Nll { probs, .. } => vec![*probs],
        }
    }
}

#[derive(Debug)]
struct Node {
    // `None` for parameter leaves, whose value lives in the store.
    value: Option<Tensor>,
    op: Op,
    needs_grad: bool,
}

/// Dynamic record of differentiable operations.
pub struct Tape<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
    bound: Vec<Option<Var>>,
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            bound: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => &self.store.get(*id).value,
            (None, _) => unreachable!("non-parameter node without a value"),
        }
    }

    fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let needs_grad = op.inputs().iter().any(|&v| self.needs_grad(v));
        self.nodes.push(Node {
            value: Some(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op: Op::Constant,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Binds a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.bound[id.0] {
            return v;
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            needs_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.bound[id.0] = Some(v);
        v
    }

    /// `a [m×k] · b [k×n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2()?;
        let (k2, n) = self.value(b).dims2()?;
        if k != k2 {
            return Err(Error::shape("matmul", self.value(a).shape(), self.value(b).shape()));
        }
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for kk in 0..k {
                axpy(av[i * k + kk], &bv[kk * n..(kk + 1) * n], row);
            }
        }
        let value = Tensor::matrix(m, n, out)?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    /// `a [m×k] · bᵀ` for `b [n×k]`; the layout used by layer weights.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2()?;
        let (n, k2) = self.value(b).dims2()?;
        if k != k2 {
            return Err(Error::shape("matmul_nt", self.value(a).shape(), self.value(b).shape()));
        }
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let ar = &av[i * k..(i + 1) * k];
            for j in 0..n {
                out[i * n + j] = dot(ar, &bv[j * k..(j + 1) * k]);
            }
        }
        let value = Tensor::matrix(m, n, out)?;
        Ok(self.push(value, Op::MatMulNt(a, b)))
    }

    pub fn elementwise(&mut self, op: ElementwiseOp, a: Var, b: Option<Var>) -> Result<Var> {
        let binary = |b: Option<Var>| {
            b.ok_or_else(|| Error::InvalidArgument(format!("{op:?} needs two operands")))
        };
        match op {
            ElementwiseOp::Add => self.add(a, binary(b)?),
            ElementwiseOp::Sub => self.sub(a, binary(b)?),
            ElementwiseOp::Hadamard => self.hadamard(a, binary(b)?),
            ElementwiseOp::Sigmoid => Ok(self.sigmoid(a)),
            ElementwiseOp::Tanh => Ok(self.tanh(a)),
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), "sub", |x, y| x - y)?;
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), "hadamard", |x, y| x * y)?;
        Ok(self.push(value, Op::Hadamard(a, b)))
    }

    /// Adds the vector `row` to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (_, n) = self.value(a).dims2()?;
        if self.value(row).len() != n {
            return Err(Error::shape("add_row", self.value(a).shape(), self.value(row).shape()));
        }
        let r = self.value(row).data();
        let mut value = self.value(a).clone();
        for chunk in value.data_mut().chunks_mut(n) {
            for (x, b) in chunk.iter_mut().zip(r) {
                *x += b;
            }
        }
        Ok(self.push(value, Op::AddRow(a, row)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|x| x * factor);
        self.push(value, Op::Scale(a, factor))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    /// Column-wise concatenation. Vectors concatenate to a vector.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::Empty("concat parts"))?;
        let (rows, _) = self.value(first).dims2()?;
        let all_vectors = parts.iter().all(|&p| self.value(p).shape().len() == 1);
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.value(p).dims2()?;
            if r != rows {
                return Err(Error::shape("concat", self.value(first).shape(), self.value(p).shape()));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let shape = if all_vectors { vec![total] } else { vec![rows, total] };
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::Concat(parts.to_vec())))
    }

    /// Columns `[start, end)` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let src = self.value(a);
        let (rows, cols) = src.dims2()?;
        if start >= end || end > cols {
            return Err(Error::InvalidArgument(format!(
                "column slice {start}..{end} of width {cols}"
            )));
        }
        let mut out = Vec::with_capacity(rows * (end - start));
        for r in 0..rows {
            out.extend_from_slice(&src.row(r)[start..end]);
        }
        let shape = if src.shape().len() == 1 {
            vec![end - start]
        } else {
            vec![rows, end - start]
        };
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::SliceCols(a, start)))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let (_, n) = self.value(a).dims2()?;
        let mut value = self.value(a).clone();
        for row in value.data_mut().chunks_mut(n) {
            softmax_in_place(row);
        }
        Ok(self.push(value, Op::SoftmaxRows(a)))
    }

    /// Weighted negative log-likelihood `Σ_r w_r · −ln(max(p[r, t_r], 1e-12))`.
    pub fn nll(&mut self, probs: Var, targets: &[usize], weights: &[f64]) -> Result<Var> {
        let (m, n) = self.value(probs).dims2()?;
        if targets.len() != m || weights.len() != m {
            return Err(Error::shape("nll", &[m, n], &[targets.len(), weights.len()]));
        }
        let p = self.value(probs);
        let mut total = 0.0;
        for (r, (&t, &w)) in targets.iter().zip(weights).enumerate() {
            if t >= n {
                return Err(Error::IndexOutOfRange { index: t, len: n });
            }
            if w != 0.0 {
                total += -w * p.get(r, t).max(PROB_FLOOR).ln();
            }
        }
        Ok(self.push(
            Tensor::scalar(total),
            Op::Nll {
                probs,
                targets: targets.to_vec(),
                weights: weights.to_vec(),
            },
        ))
    }

    /// Mean over rows of `−ln(probs[row, target])`.
    pub fn cross_entropy(&mut self, probs: Var, targets: &[usize]) -> Result<Var> {
        let m = targets.len();
        if m == 0 {
            return Err(Error::Empty("cross_entropy targets"));
        }
        let w = vec![1.0 / m as f64; m];
        self.nll(probs, targets, &w)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        self.push(value, Op::Sum(a))
    }

    /// Reverse sweep from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));
        let mut by_param: Vec<Option<Tensor>> = vec![None; self.store.len()];

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, g, &mut grads, &mut by_param)?;
        }
        Ok(Gradients { by_param })
    }

    fn propagate(
        &self,
        idx: usize,
        g: Tensor,
        grads: &mut [Option<Tensor>],
        by_param: &mut [Option<Tensor>],
    ) -> Result<()> {
        let node = &self.nodes[idx];
        let out = self.value(Var(idx));
        match &node.op {
            Op::Constant => {}
            Op::Param(id) => accumulate(&mut by_param[id.0], g)?,
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k) = av.dims2()?;
                let (_, n) = bv.dims2()?;
                let gd = g.data();
                if self.needs_grad(*a) {
                    let mut da = vec![0.0; m * k];
                    for i in 0..m {
                        for kk in 0..k {
                            da[i * k + kk] = dot(&gd[i * n..(i + 1) * n], bv.row(kk));
                        }
                    }
                    self.send(grads, *a, Tensor::new(av.shape().to_vec(), da)?)?;
                }
                if self.needs_grad(*b) {
                    let mut db = vec![0.0; k * n];
                    for i in 0..m {
                        for kk in 0..k {
                            axpy(av.data()[i * k + kk], &gd[i * n..(i + 1) * n], &mut db[kk * n..(kk + 1) * n]);
                        }
                    }
                    self.send(grads, *b, Tensor::new(bv.shape().to_vec(), db)?)?;
                }
            }
            Op::MatMulNt(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k) = av.dims2()?;
                let (n, _) = bv.dims2()?;
                let gd = g.data();
                if self.needs_grad(*a) {
                    let mut da = vec![0.0; m * k];
                    for i in 0..m {
                        let row = &mut da[i * k..(i + 1) * k];
                        for j in 0..n {
                            axpy(gd[i * n + j], bv.row(j), row);
                        }
                    }
                    self.send(grads, *a, Tensor::new(av.shape().to_vec(), da)?)?;
                }
                if self.needs_grad(*b) {
                    let mut db = vec![0.0; n * k];
                    for i in 0..m {
                        let ar = av.row(i);
                        for j in 0..n {
                            axpy(gd[i * n + j], ar, &mut db[j * k..(j + 1) * k]);
                        }
                    }
                    self.send(grads, *b, Tensor::new(bv.shape().to_vec(), db)?)?;
                }
            }
            Op::Add(a, b) => {
                if self.needs_grad(*b) {
                    self.send(grads, *b, g.clone())?;
                }
                self.send(grads, *a, g)?;
            }
            Op::Sub(a, b) => {
                if self.needs_grad(*b) {
                    self.send(grads, *b, g.map(|x| -x))?;
                }
                self.send(grads, *a, g)?;
            }
            Op::Hadamard(a, b) => {
                if self.needs_grad(*a) {
                    self.send(grads, *a, g.zip_map(self.value(*b), "hadamard", |x, y| x * y)?)?;
                }
                if self.needs_grad(*b) {
                    self.send(grads, *b, g.zip_map(self.value(*a), "hadamard", |x, y| x * y)?)?;
                }
            }
            Op::AddRow(a, row) => {
                if self.needs_grad(*row) {
                    let rv = self.value(*row);
                    let n = rv.len();
                    let mut dr = vec![0.0; n];
                    for chunk in g.data().chunks(n) {
                        for (d, x) in dr.iter_mut().zip(chunk) {
                            *d += x;
                        }
                    }
                    self.send(grads, *row, Tensor::new(rv.shape().to_vec(), dr)?)?;
                }
                self.send(grads, *a, g)?;
            }
            Op::Scale(a, factor) => {
                let f = *factor;
                self.send(grads, *a, g.map(|x| x * f))?;
            }
            Op::Sigmoid(a) => {
                let d = g.zip_map(out, "sigmoid", |gx, y| gx * y * (1.0 - y))?;
                self.send(grads, *a, d)?;
            }
            Op::Tanh(a) => {
                let d = g.zip_map(out, "tanh", |gx, y| gx * (1.0 - y * y))?;
                self.send(grads, *a, d)?;
            }
            Op::Concat(parts) => {
                let (rows, total) = out.dims2()?;
                let mut offset = 0;
                for &p in parts {
                    let pv = self.value(p);
                    let (_, c) = pv.dims2()?;
                    if self.needs_grad(p) {
                        let mut dp = Vec::with_capacity(rows * c);
                        for r in 0..rows {
                            dp.extend_from_slice(&g.data()[r * total + offset..r * total + offset + c]);
                        }
                        self.send(grads, p, Tensor::new(pv.shape().to_vec(), dp)?)?;
                    }
                    offset += c;
                }
            }
            Op::SliceCols(a, start) => {
                let av = self.value(*a);
                let (rows, cols) = av.dims2()?;
                let (_, w) = out.dims2()?;
                let mut da = vec![0.0; rows * cols];
                for r in 0..rows {
                    da[r * cols + start..r * cols + start + w].copy_from_slice(&g.data()[r * w..(r + 1) * w]);
                }
                self.send(grads, *a, Tensor::new(av.shape().to_vec(), da)?)?;
            }
            Op::SoftmaxRows(a) => {
                let (_, n) = out.dims2()?;
                let mut dx = vec![0.0; out.len()];
                for ((dxr, gr), pr) in dx.chunks_mut(n).zip(g.data().chunks(n)).zip(out.data().chunks(n)) {
                    let inner = dot(gr, pr);
                    for j in 0..n {
                        dxr[j] = pr[j] * (gr[j] - inner);
                    }
                }
                self.send(grads, *a, Tensor::new(out.shape().to_vec(), dx)?)?;
            }
            Op::Nll {
                probs,
                targets,
                weights,
            } => {
                let pv = self.value(*probs);
                let (_, n) = pv.dims2()?;
                let upstream = g.data()[0];
                let mut dp = vec![0.0; pv.len()];
                for (r, (&t, &w)) in targets.iter().zip(weights).enumerate() {
                    let p = pv.get(r, t);
                    if w != 0.0 && p > PROB_FLOOR {
                        dp[r * n + t] = -upstream * w / p;
                    }
                }
                self.send(grads, *probs, Tensor::new(pv.shape().to_vec(), dp)?)?;
            }
            Op::Sum(a) => {
                let upstream = g.data()[0];
                let shape = self.value(*a).shape().to_vec();
                self.send(grads, *a, Tensor::full(&shape, upstream))?;
            }
        }
        Ok(())
    }

    fn send(&self, grads: &mut [Option<Tensor>], to: Var, g: Tensor) -> Result<()> {
        if self.needs_grad(to) {
            accumulate(&mut grads[to.0], g)?;
        }
        Ok(())
    }

    #[cfg(test)]
    fn inputs_precede_outputs(&self) -> bool {
        self.nodes
            .iter()
            .enumerate()
            .all(|(i, n)| n.op.inputs().iter().all(|v| v.0 < i))
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) -> Result<()> {
    match slot {
        Some(existing) => existing.add_assign(&g),
        None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    if alpha == 0.0 {
        return;
    }
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Outcome of a central-difference gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub scalars_checked: usize,
}

/// Compares tape gradients of `loss_fn` against central differences with
/// step `h`, returning the largest `|analytic − numeric| / max(1, |analytic|, |numeric|)`.
pub fn finite_diff_check<F>(store: &mut ParamStore, h: f64, mut loss_fn: F) -> Result<GradCheckReport>
where
    F: for<'a> FnMut(&mut Tape<'a>) -> Result<Var>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let grads = {
        let mut tape = Tape::new(store);
        let loss = loss_fn(&mut tape)?;
        tape.backward(loss)?
    };
    let mut eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new(store);
        let loss = loss_fn(&mut tape)?;
        Ok(tape.value(loss).data()[0])
    };

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        scalars_checked: 0,
    };
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        for k in 0..store.get(id).value.len() {
            let original = store.get(id).value.data()[k];
            store.get_mut(id).value.data_mut()[k] = original + h;
            let plus = eval(store)?;
            store.get_mut(id).value.data_mut()[k] = original - h;
            let minus = eval(store)?;
            store.get_mut(id).value.data_mut()[k] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let analytic = grads.get(id).map_or(0.0, |g| g.data()[k]);
            let err = (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs());
            report.scalars_checked += 1;
            if report.worst.is_none() || err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some((store.name(id).to_string(), k));
            }
        }
    }
    Ok(report)
}
