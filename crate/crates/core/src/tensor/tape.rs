//! Append-only operation tape. Nodes are pushed after their inputs, so the
//! index order is a topological order and backward is a single reverse sweep.

use std::sync::Arc;

use rand::Rng;

use super::{Mask, Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Unary {
    Identity,
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
    Exp,
}

impl Unary {
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Unary::Identity => x,
            Unary::Relu => {
                if x > T::zero() {
                    x
                } else {
                    T::zero()
                }
            }
            Unary::LeakyRelu(slope) => {
                if x > T::zero() {
                    x
                } else {
                    x * T::lit(slope)
                }
            }
            Unary::Tanh => x.tanh(),
            Unary::Sigmoid => sigmoid(x),
            Unary::Exp => x.exp(),
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    fn derivative<T: Real>(self, x: T, y: T) -> T {
        match self {
            Unary::Identity => T::one(),
            Unary::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Unary::LeakyRelu(slope) => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::lit(slope)
                }
            }
            Unary::Tanh => T::one() - y * y,
            Unary::Sigmoid => y * (T::one() - y),
            Unary::Exp => y,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Unary::Identity => "identity",
            Unary::Relu => "relu",
            Unary::LeakyRelu(_) => "leaky_relu",
            Unary::Tanh => "tanh",
            Unary::Sigmoid => "sigmoid",
            Unary::Exp => "exp",
        }
    }
}

fn sigmoid<T: Real>(x: T) -> T {
    // Branch on sign so exp never overflows.
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Deliberately wrong adjoints, for checking that the gradient checker fails.
#[cfg(feature = "fault-injection")]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdjointFault {
    /// Leaky-ReLU backward passes the gradient through unchanged.
    LeakyReluIdentity,
    /// Masked softmax backward omits the row-sum correction term.
    SoftmaxNoCorrection,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    ScaleBy(Var, Var),
    Unary(Var, Unary),
    MaskedSoftmax(Var, Arc<Mask>),
    Dropout(Var, Vec<T>),
    SliceRows(Var, usize),
    ConcatCols(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    SumCols(Var),
    SumAll(Var),
    PairwiseSum(Var, Var),
    Select(Var, usize),
    Bce(Var, Vec<T>, T),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    trainable: bool,
}

/// Records forward values and the operations that produced them.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    #[cfg(feature = "fault-injection")]
    fault: Option<AdjointFault>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient for `var`; zeros when it did not influence the loss.
    pub fn wrt(&self, var: Var) -> Tensor<T> {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => {
                let shape = self.shapes[var.0].clone();
                let n = shape.iter().product();
                Tensor::from_parts(shape, vec![T::zero(); n])
            }
        }
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            #[cfg(feature = "fault-injection")]
            fault: None,
        }
    }

    #[cfg(feature = "fault-injection")]
    pub fn inject_fault(&mut self, fault: AdjointFault) {
        self.fault = Some(fault);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    /// Records a constant input.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push_leaf(value, false)
    }

    /// Records a trainable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push_leaf(value, true)
    }

    fn push_leaf(&mut self, value: Tensor<T>, trainable: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            trainable,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &'static str, value: Tensor<T>, op: Op<T>) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(Node {
            value,
            op,
            trainable: false,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push("matmul", out, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose();
        self.push("transpose", out, Op::Transpose(a))
    }

    fn zip_same(
        &self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
    ) -> Result<Tensor<T>> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::shape(op, x.shape(), y.shape()));
        }
        let data = x
            .data()
            .iter()
            .zip(y.data())
            .map(|(&p, &q)| f(p, q))
            .collect();
        Ok(Tensor::from_parts(x.shape().to_vec(), data))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same("add", a, b, |p, q| p + q)?;
        self.push("add", out, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same("mul", a, b, |p, q| p * q)?;
        self.push("mul", out, Op::Mul(a, b))
    }

    /// `a[i, :] + row[0, :]` for every row `i`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, r) = (self.value(a), self.value(row));
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(Error::shape("add_row", x.shape(), r.shape()));
        }
        let cols = x.cols();
        let data = x
            .data()
            .iter()
            .enumerate()
            .map(|(idx, &v)| v + r.data()[idx % cols])
            .collect();
        let out = Tensor::from_parts(x.shape().to_vec(), data);
        self.push("add_row", out, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, factor: T) -> Result<Var> {
        let out = self.value(a).map(|v| v * factor);
        self.push("scale", out, Op::Scale(a, factor))
    }

    /// Multiplies every element of `a` by the `1×1` value `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        let factor = self
            .value(s)
            .item()
            .ok_or_else(|| Error::shape("scale_by", self.shape(a), self.shape(s)))?;
        let out = self.value(a).map(|v| v * factor);
        self.push("scale_by", out, Op::ScaleBy(a, s))
    }

    pub fn unary(&mut self, kind: Unary, a: Var) -> Result<Var> {
        let out = self.value(a).map(|v| kind.apply(v));
        self.push(kind.name(), out, Op::Unary(a, kind))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Relu, a)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        self.unary(Unary::LeakyRelu(slope), a)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Tanh, a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Sigmoid, a)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Exp, a)
    }

    /// Row-wise softmax restricted to `mask`; masked-out entries are zero.
    /// Every row must keep at least one entry.
    pub fn masked_row_softmax(&mut self, scores: Var, mask: Arc<Mask>) -> Result<Var> {
        let out = masked_softmax_values(self.value(scores), &mask)?;
        self.push("masked_row_softmax", out, Op::MaskedSoftmax(scores, mask))
    }

    /// Inverted dropout. In eval mode, or with rate 0, returns `a` unchanged
    /// without recording a node.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        a: Var,
        rate: f64,
        rng: &mut R,
        training: bool,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Parameter(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        if !training || rate == 0.0 {
            return Ok(a);
        }
        let keep = T::lit(1.0 / (1.0 - rate));
        let x = self.value(a);
        let multipliers: Vec<T> = (0..x.len())
            .map(|_| {
                if rng.gen::<f64>() < rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        let data = x
            .data()
            .iter()
            .zip(&multipliers)
            .map(|(&v, &m)| v * m)
            .collect();
        let out = Tensor::from_parts(x.shape().to_vec(), data);
        self.push("dropout", out, Op::Dropout(a, multipliers))
    }

    /// Rows `start..start + len`.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        if len == 0 || start + len > x.rows() {
            return Err(Error::Contract(format!(
                "row slice {start}..{} out of range for shape {:?}",
                start + len,
                x.shape()
            )));
        }
        let cols = x.cols();
        let data = x.data()[start * cols..(start + len) * cols].to_vec();
        let out = Tensor::from_parts(vec![len, cols], data);
        self.push("slice_rows", out, Op::SliceRows(a, start))
    }

    /// Horizontal concatenation in argument order.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("concat_cols of nothing".into()))?;
        let rows = self.value(first).rows();
        for &p in parts {
            if self.value(p).rows() != rows {
                return Err(Error::shape(
                    "concat_cols",
                    self.shape(first),
                    self.shape(p),
                ));
            }
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(i));
            }
        }
        let out = Tensor::from_parts(vec![rows, total], data);
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let x = self.value(a);
        if rows.is_empty() {
            return Err(Error::Contract("gather_rows with no indices".into()));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= x.rows()) {
            return Err(Error::Contract(format!(
                "row index {bad} out of range for {} rows",
                x.rows()
            )));
        }
        let mut data = Vec::with_capacity(rows.len() * x.cols());
        for &r in rows {
            data.extend_from_slice(x.row(r));
        }
        let out = Tensor::from_parts(vec![rows.len(), x.cols()], data);
        self.push("gather_rows", out, Op::GatherRows(a, rows.to_vec()))
    }

    /// Row sums as an `n×1` column.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let data = (0..x.rows())
            .map(|i| x.row(i).iter().copied().sum())
            .collect();
        let out = Tensor::from_parts(vec![x.rows(), 1], data);
        self.push("sum_cols", out, Op::SumCols(a))
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(a).sum());
        self.push("sum_all", out, Op::SumAll(a))
    }

    /// `out[i, j] = left[i] + right[j]` for column vectors `left`, `right`.
    pub fn pairwise_sum(&mut self, left: Var, right: Var) -> Result<Var> {
        let (l, r) = (self.value(left), self.value(right));
        if l.cols() != 1 || r.cols() != 1 {
            return Err(Error::shape("pairwise_sum", l.shape(), r.shape()));
        }
        let (n, m) = (l.rows(), r.rows());
        let mut data = Vec::with_capacity(n * m);
        for &li in l.data() {
            data.extend(r.data().iter().map(|&rj| li + rj));
        }
        let out = Tensor::from_parts(vec![n, m], data);
        self.push("pairwise_sum", out, Op::PairwiseSum(left, right))
    }

    /// Flat element `index` as a `1×1` value.
    pub fn select(&mut self, a: Var, index: usize) -> Result<Var> {
        let x = self.value(a);
        let v = *x.data().get(index).ok_or_else(|| {
            Error::Contract(format!(
                "select index {index} out of range for {:?}",
                x.shape()
            ))
        })?;
        self.push("select", Tensor::scalar(v), Op::Select(a, index))
    }

    /// Summed binary cross-entropy. Predictions are clamped to
    /// `[clamp, 1 - clamp]`; labels must be 0 or 1.
    pub fn bce(&mut self, predictions: Var, labels: &[T], clamp: T) -> Result<Var> {
        let p = self.value(predictions);
        if p.len() != labels.len() {
            return Err(Error::shape("bce", p.shape(), &[labels.len()]));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != T::zero() && y != T::one()) {
            return Err(Error::Parameter(format!("label {bad} outside {{0, 1}}")));
        }
        let loss = bce_sum(p.data(), labels, clamp);
        self.push(
            "bce",
            Tensor::scalar(loss),
            Op::Bce(predictions, labels.to_vec(), clamp),
        )
    }

    /// Reverse sweep from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(T::one()));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        // Only leaves keep gradients; intermediate adjoints are scratch.
        for (idx, node) in self.nodes.iter().enumerate() {
            if !(matches!(node.op, Op::Leaf) && node.trainable) {
                grads[idx] = None;
            }
        }
        let shapes = self
            .nodes
            .iter()
            .map(|n| n.value.shape().to_vec())
            .collect();
        Ok(Gradients { grads, shapes })
    }

    fn propagate(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let da = g.matmul(&val(*b).transpose()).expect("matmul adjoint");
                let db = val(*a).transpose().matmul(g).expect("matmul adjoint");
                accumulate(grads, *a, da);
                accumulate(grads, *b, db);
            }
            Op::Transpose(a) => accumulate(grads, *a, g.transpose()),
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::AddRow(a, row) => {
                accumulate(grads, *a, g.clone());
                let cols = g.cols();
                let mut dr = vec![T::zero(); cols];
                for i in 0..g.rows() {
                    for (d, &v) in dr.iter_mut().zip(g.row(i)) {
                        *d = *d + v;
                    }
                }
                accumulate(grads, *row, Tensor::from_parts(vec![1, cols], dr));
            }
            Op::Mul(a, b) => {
                let (x, y) = (val(*a), val(*b));
                let da = zip_map(g, y, |gv, yv| gv * yv);
                let db = zip_map(g, x, |gv, xv| gv * xv);
                accumulate(grads, *a, da);
                accumulate(grads, *b, db);
            }
            Op::Scale(a, factor) => accumulate(grads, *a, g.map(|v| v * *factor)),
            Op::ScaleBy(a, s) => {
                let factor = val(*s).data()[0];
                accumulate(grads, *a, g.map(|v| v * factor));
                let ds: T = g
                    .data()
                    .iter()
                    .zip(val(*a).data())
                    .map(|(&gv, &xv)| gv * xv)
                    .sum();
                accumulate(grads, *s, Tensor::scalar(ds));
            }
            Op::Unary(a, kind) => {
                let x = val(*a);
                let y = &node.value;
                let data = g
                    .data()
                    .iter()
                    .zip(x.data().iter().zip(y.data()))
                    .map(|(&gv, (&xv, &yv))| gv * self.unary_derivative(*kind, xv, yv))
                    .collect();
                accumulate(grads, *a, Tensor::from_parts(x.shape().to_vec(), data));
            }
            Op::MaskedSoftmax(a, mask) => {
                let y = &node.value;
                let cols = y.cols();
                let mut data = vec![T::zero(); y.len()];
                let correct = !self.softmax_fault();
                for i in 0..y.rows() {
                    let (yr, gr) = (y.row(i), g.row(i));
                    let dot: T = if correct {
                        yr.iter().zip(gr).map(|(&p, &q)| p * q).sum()
                    } else {
                        T::zero()
                    };
                    for j in 0..cols {
                        if mask.get(i, j) {
                            data[i * cols + j] = yr[j] * (gr[j] - dot);
                        }
                    }
                }
                accumulate(grads, *a, Tensor::from_parts(y.shape().to_vec(), data));
            }
            Op::Dropout(a, multipliers) => {
                let data = g
                    .data()
                    .iter()
                    .zip(multipliers)
                    .map(|(&gv, &m)| gv * m)
                    .collect();
                accumulate(grads, *a, Tensor::from_parts(g.shape().to_vec(), data));
            }
            Op::SliceRows(a, start) => {
                let x = val(*a);
                let cols = x.cols();
                let mut data = vec![T::zero(); x.len()];
                data[start * cols..start * cols + g.len()].copy_from_slice(g.data());
                accumulate(grads, *a, Tensor::from_parts(x.shape().to_vec(), data));
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let x = val(p);
                    let width = x.cols();
                    let mut data = Vec::with_capacity(x.len());
                    for i in 0..g.rows() {
                        data.extend_from_slice(&g.row(i)[offset..offset + width]);
                    }
                    accumulate(grads, p, Tensor::from_parts(x.shape().to_vec(), data));
                    offset += width;
                }
            }
            Op::GatherRows(a, rows) => {
                let x = val(*a);
                let cols = x.cols();
                let mut data = vec![T::zero(); x.len()];
                for (k, &r) in rows.iter().enumerate() {
                    for (d, &v) in data[r * cols..(r + 1) * cols].iter_mut().zip(g.row(k)) {
                        *d = *d + v;
                    }
                }
                accumulate(grads, *a, Tensor::from_parts(x.shape().to_vec(), data));
            }
            Op::SumCols(a) => {
                let x = val(*a);
                let cols = x.cols();
                let data = (0..x.len()).map(|idx| g.data()[idx / cols]).collect();
                accumulate(grads, *a, Tensor::from_parts(x.shape().to_vec(), data));
            }
            Op::SumAll(a) => {
                let x = val(*a);
                let gv = g.data()[0];
                accumulate(
                    grads,
                    *a,
                    Tensor::from_parts(x.shape().to_vec(), vec![gv; x.len()]),
                );
            }
            Op::PairwiseSum(left, right) => {
                let (n, m) = (g.rows(), g.cols());
                let dl = (0..n).map(|i| g.row(i).iter().copied().sum()).collect();
                let mut dr = vec![T::zero(); m];
                for i in 0..n {
                    for (d, &v) in dr.iter_mut().zip(g.row(i)) {
                        *d = *d + v;
                    }
                }
                accumulate(grads, *left, Tensor::from_parts(vec![n, 1], dl));
                accumulate(grads, *right, Tensor::from_parts(vec![m, 1], dr));
            }
            Op::Select(a, index) => {
                let x = val(*a);
                let mut data = vec![T::zero(); x.len()];
                data[*index] = g.data()[0];
                accumulate(grads, *a, Tensor::from_parts(x.shape().to_vec(), data));
            }
            Op::Bce(p, labels, clamp) => {
                let x = val(*p);
                let gv = g.data()[0];
                let hi = T::one() - *clamp;
                let data = x
                    .data()
                    .iter()
                    .zip(labels)
                    .map(|(&pv, &y)| {
                        if pv <= *clamp || pv >= hi {
                            T::zero()
                        } else {
                            gv * (-(y / pv) + (T::one() - y) / (T::one() - pv))
                        }
                    })
                    .collect();
                accumulate(grads, *p, Tensor::from_parts(x.shape().to_vec(), data));
            }
        }
    }

    #[cfg(feature = "fault-injection")]
    fn unary_derivative(&self, kind: Unary, x: T, y: T) -> T {
        if matches!(kind, Unary::LeakyRelu(_))
            && self.fault == Some(AdjointFault::LeakyReluIdentity)
        {
            return T::one();
        }
        kind.derivative(x, y)
    }

    #[cfg(not(feature = "fault-injection"))]
    fn unary_derivative(&self, kind: Unary, x: T, y: T) -> T {
        kind.derivative(x, y)
    }

    #[cfg(feature = "fault-injection")]
    fn softmax_fault(&self) -> bool {
        self.fault == Some(AdjointFault::SoftmaxNoCorrection)
    }

    #[cfg(not(feature = "fault-injection"))]
    fn softmax_fault(&self) -> bool {
        false
    }
}

fn zip_map<T: Real>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::from_parts(a.shape().to_vec(), data)
}

fn accumulate<T: Real>(grads: &mut [Option<Tensor<T>>], var: Var, delta: Tensor<T>) {
    match &mut grads[var.0] {
        Some(existing) => {
            for (e, d) in existing.data_mut().iter_mut().zip(delta.data()) {
                *e = *e + *d;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}

pub(crate) fn masked_softmax_values<T: Real>(scores: &Tensor<T>, mask: &Mask) -> Result<Tensor<T>> {
    let (rows, cols) = (scores.rows(), scores.cols());
    if mask.rows() != rows || mask.cols() != cols {
        return Err(Error::shape(
            "masked_row_softmax",
            scores.shape(),
            &[mask.rows(), mask.cols()],
        ));
    }
    let mut out = vec![T::zero(); rows * cols];
    for i in 0..rows {
        let s = scores.row(i);
        let m = mask.row(i);
        let max = s
            .iter()
            .zip(m)
            .filter(|(_, &keep)| keep)
            .map(|(&v, _)| v)
            .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.max(v))))
            .ok_or_else(|| Error::Contract(format!("masked softmax row {i} has no entries")))?;
        let row = &mut out[i * cols..(i + 1) * cols];
        let mut total = T::zero();
        for j in 0..cols {
            if m[j] {
                let e = (s[j] - max).exp();
                row[j] = e;
                total = total + e;
            }
        }
        for v in row.iter_mut() {
            *v = *v / total;
        }
    }
    Ok(Tensor::from_parts(vec![rows, cols], out))
}

/// `−Σ [y·ln p + (1−y)·ln(1−p)]` with `p` clamped to `[clamp, 1 − clamp]`.
pub fn bce_sum<T: Real>(predictions: &[T], labels: &[T], clamp: T) -> T {
    let hi = T::one() - clamp;
    predictions
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.max(clamp).min(hi);
            -(y * p.ln() + (T::one() - y) * (T::one() - p).ln())
        })
        .sum()
}
