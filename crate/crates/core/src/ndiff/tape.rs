//! Reverse-mode differentiation over whole tensors.
//!
//! Operations are appended to a [`Tape`] in execution order, so the tape is
//! already a topological order. [`Tape::backward`] walks it once in reverse,
//! accumulating gradients additively where a value fans out.

use std::fmt;
use std::sync::Arc;

use super::complex::{self, bcast_row, check_broadcast, ComplexView};
use super::kernels;
use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// A fixed linear operator `x -> M x` together with its adjoint `g -> Mᵀ g`.
///
/// Sparse graph propagation enters the tape through this trait, which keeps
/// the differentiation layer free of graph types.
pub trait LinearMap: Send + Sync {
    fn apply(&self, x: &Tensor) -> Result<Tensor>;
    fn apply_adjoint(&self, g: &Tensor) -> Result<Tensor>;
}

/// Handle to a value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Mul(Var, Var),
    ScaleByEntry { x: Var, weights: Var, index: usize },
    Concat(Vec<Var>),
    SumRows(Var),
    Mean(Var),
    Tanh(Var),
    Relu(Var),
    GatherRows(Var, Vec<usize>),
    ComplexMul(Var, Var),
    Conj(Var),
    UnitNormalize(Var, f64),
    Softmax(Var),
    CrossEntropy { logits: Var, labels: Vec<usize> },
    Linear(Var, Arc<dyn LinearMap>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::AddRow(..) => "add_row",
            Op::Scale(..) => "scale",
            Op::Mul(..) => "mul",
            Op::ScaleByEntry { .. } => "scale_by_entry",
            Op::Concat(..) => "concat",
            Op::SumRows(..) => "sum_rows",
            Op::Mean(..) => "mean",
            Op::Tanh(..) => "tanh",
            Op::Relu(..) => "relu",
            Op::GatherRows(..) => "gather_rows",
            Op::ComplexMul(..) => "complex_hadamard",
            Op::Conj(..) => "complex_conjugate",
            Op::UnitNormalize(..) => "complex_unit_normalize",
            Op::Softmax(..) => "softmax",
            Op::CrossEntropy { .. } => "cross_entropy",
            Op::Linear(..) => "linear_map",
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

pub struct Tape {
    nodes: Vec<Node>,
    check_finite: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("nodes", &self.nodes.len())
            .field("check_finite", &self.check_finite)
            .finish()
    }
}

impl Tape {
    /// Finite-value checks are on in debug builds and off in release builds.
    pub fn new() -> Self {
        Self::with_finite_checks(cfg!(debug_assertions))
    }

    pub fn with_finite_checks(check_finite: bool) -> Self {
        Self {
            nodes: Vec::new(),
            check_finite,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A leaf that receives a gradient.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// A leaf that does not receive a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op) -> Result<Var> {
        if self.check_finite && !value.is_finite() {
            return Err(Error::NonFinite(op.name()));
        }
        let requires_grad = match &op {
            Op::Leaf => false,
            Op::MatMul(a, b) | Op::Add(a, b) | Op::AddRow(a, b) | Op::Mul(a, b) => self.needs(*a) || self.needs(*b),
            Op::ComplexMul(a, b) => self.needs(*a) || self.needs(*b),
            Op::ScaleByEntry { x, weights, .. } => self.needs(*x) || self.needs(*weights),
            Op::Concat(vs) => vs.iter().any(|v| self.needs(*v)),
            Op::Scale(a, _)
            | Op::SumRows(a)
            | Op::Mean(a)
            | Op::Tanh(a)
            | Op::Relu(a)
            | Op::GatherRows(a, _)
            | Op::Conj(a)
            | Op::UnitNormalize(a, _)
            | Op::Softmax(a)
            | Op::Linear(a, _) => self.needs(*a),
            Op::CrossEntropy { logits, .. } => self.needs(*logits),
        };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = gemm(self.value(a), false, self.value(b), false)?;
        self.push(out, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b))?;
        self.push(out, Op::Add(a, b))
    }

    /// `a + b` with `b` a single row added to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, bias) = (self.value(a), self.value(b));
        if bias.rows() != 1 || bias.cols() != x.cols() {
            return Err(Error::Shape {
                op: "add_row",
                left: x.shape(),
                right: bias.shape(),
            });
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (o, bv) in out.row_mut(r).iter_mut().zip(bias.data()) {
                *o += bv;
            }
        }
        self.push(out, Op::AddRow(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.value(a).map(|v| v * c);
        self.push(out, Op::Scale(a, c))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        x.same_shape("mul", y)?;
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect();
        let out = Tensor::new(x.rows(), x.cols(), data)?;
        self.push(out, Op::Mul(a, b))
    }

    /// `x * weights[index]`, where `weights` is a row vector.
    pub fn scale_by_entry(&mut self, x: Var, weights: Var, index: usize) -> Result<Var> {
        let w = self.value(weights);
        if w.rows() != 1 || index >= w.cols() {
            return Err(Error::invalid(format!(
                "scale_by_entry index {index} out of range for shape {:?}",
                w.shape()
            )));
        }
        let s = w.get(0, index);
        let out = self.value(x).map(|v| v * s);
        self.push(out, Op::ScaleByEntry { x, weights, index })
    }

    /// Concatenation along the last dimension.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| Error::invalid("concat of zero tensors"))?;
        let rows = self.value(first).rows();
        for p in parts {
            if self.value(*p).rows() != rows {
                return Err(Error::Shape {
                    op: "concat",
                    left: self.shape(first),
                    right: self.shape(*p),
                });
            }
        }
        let cols: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for p in parts {
                let src = self.value(*p).row(r);
                out.row_mut(r)[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        self.push(out, Op::Concat(parts.to_vec()))
    }

    /// Column sums, as a `1 x cols` row.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let out = kernels::column_sums(self.value(a));
        self.push(out, Op::SumRows(a))
    }

    /// Mean of all entries, as a `1 x 1` scalar.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(Error::invalid("mean of an empty tensor"));
        }
        let out = Tensor::scalar(x.data().iter().sum::<f64>() / x.len() as f64);
        self.push(out, Op::Mean(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|v| v.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let x = self.value(a);
        if let Some(&bad) = indices.iter().find(|&&i| i >= x.rows()) {
            return Err(Error::invalid(format!(
                "gather_rows index {bad} out of range for {} rows",
                x.rows()
            )));
        }
        let mut out = Tensor::zeros(indices.len(), x.cols());
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r).copy_from_slice(x.row(i));
        }
        self.push(out, Op::GatherRows(a, indices.to_vec()))
    }

    /// Complex element-wise product; `y` may be a broadcast row.
    pub fn complex_mul(&mut self, x: Var, y: Var) -> Result<Var> {
        let out = complex::complex_hadamard(self.value(x), self.value(y))?;
        self.push(out, Op::ComplexMul(x, y))
    }

    pub fn conj(&mut self, x: Var) -> Result<Var> {
        let out = complex::complex_conjugate(self.value(x))?;
        self.push(out, Op::Conj(x))
    }

    pub fn unit_normalize(&mut self, x: Var, eps: f64) -> Result<Var> {
        let out = complex::complex_unit_normalize(self.value(x), eps)?;
        self.push(out, Op::UnitNormalize(x, eps))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let mut out = v.clone();
        for r in 0..v.rows() {
            let s = kernels::softmax(v.row(r));
            out.row_mut(r).copy_from_slice(&s);
        }
        self.push(out, Op::Softmax(x))
    }

    /// Mean cross-entropy of row-wise softmax(logits) against class ids.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let loss = kernels::cross_entropy(self.value(logits), labels)?;
        self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
            },
        )
    }

    pub fn linear_map(&mut self, x: Var, map: Arc<dyn LinearMap>) -> Result<Var> {
        let out = map.apply(self.value(x))?;
        self.push(out, Op::Linear(x, map))
    }

    /// Gradients of the scalar `loss` with respect to every leaf.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.shape(loss);
        if shape != [1, 1] {
            return Err(Error::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
        }

        let grads = self
            .nodes
            .iter()
            .zip(grads)
            .map(|(node, g)| match (&node.op, node.requires_grad) {
                (Op::Leaf, true) => Some(g.unwrap_or_else(|| Tensor::zeros(node.value.rows(), node.value.cols()))),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let mut acc = |v: Var, t: Tensor| -> Result<()> {
            if !self.needs(v) {
                return Ok(());
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&t),
                slot @ None => {
                    *slot = Some(t);
                    Ok(())
                }
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.needs(*a) {
                    acc(*a, gemm(g, false, self.value(*b), true)?)?;
                }
                if self.needs(*b) {
                    acc(*b, gemm(self.value(*a), true, g, false)?)?;
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone())?;
                acc(*b, g.clone())?;
            }
            Op::AddRow(a, b) => {
                acc(*a, g.clone())?;
                if self.needs(*b) {
                    acc(*b, kernels::column_sums(g))?;
                }
            }
            Op::Scale(a, c) => acc(*a, g.map(|v| v * c))?,
            Op::Mul(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    acc(*a, hadamard(g, y))?;
                }
                if self.needs(*b) {
                    acc(*b, hadamard(g, x))?;
                }
            }
            Op::ScaleByEntry { x, weights, index } => {
                let w = self.value(*weights);
                let s = w.get(0, *index);
                if self.needs(*x) {
                    acc(*x, g.map(|v| v * s))?;
                }
                if self.needs(*weights) {
                    let dot: f64 = g.data().iter().zip(self.value(*x).data()).map(|(p, q)| p * q).sum();
                    let mut gw = Tensor::zeros(w.rows(), w.cols());
                    gw.set(0, *index, dot);
                    acc(*weights, gw)?;
                }
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for p in parts {
                    let cols = self.value(*p).cols();
                    if self.needs(*p) {
                        let piece = Tensor::from_fn(g.rows(), cols, |r, c| g.get(r, off + c));
                        acc(*p, piece)?;
                    }
                    off += cols;
                }
            }
            Op::SumRows(a) => {
                let x = self.value(*a);
                acc(*a, Tensor::from_fn(x.rows(), x.cols(), |_, c| g.get(0, c)))?;
            }
            Op::Mean(a) => {
                let x = self.value(*a);
                let v = g.item() / x.len() as f64;
                acc(*a, Tensor::filled(x.rows(), x.cols(), v))?;
            }
            Op::Tanh(a) => {
                let data = g
                    .data()
                    .iter()
                    .zip(node.value.data())
                    .map(|(gv, y)| gv * (1.0 - y * y))
                    .collect();
                acc(*a, Tensor::new(g.rows(), g.cols(), data)?)?;
            }
            Op::Relu(a) => {
                let data = g
                    .data()
                    .iter()
                    .zip(self.value(*a).data())
                    .map(|(gv, x)| if *x > 0.0 { *gv } else { 0.0 })
                    .collect();
                acc(*a, Tensor::new(g.rows(), g.cols(), data)?)?;
            }
            Op::GatherRows(a, indices) => {
                let x = self.value(*a);
                let mut ga = Tensor::zeros(x.rows(), x.cols());
                for (r, &i) in indices.iter().enumerate() {
                    for (d, s) in ga.row_mut(i).iter_mut().zip(g.row(r)) {
                        *d += s;
                    }
                }
                acc(*a, ga)?;
            }
            Op::ComplexMul(x, y) => {
                let (xv, yv) = (self.value(*x), self.value(*y));
                if self.needs(*x) {
                    acc(*x, mul_conj(g, yv)?)?;
                }
                if self.needs(*y) {
                    let full = mul_conj(g, xv)?;
                    let gy = if yv.rows() == 1 && xv.rows() != 1 {
                        kernels::column_sums(&full)
                    } else {
                        full
                    };
                    acc(*y, gy)?;
                }
            }
            Op::Conj(x) => acc(*x, complex::complex_conjugate(g)?)?,
            Op::UnitNormalize(x, eps) => {
                let xv = self.value(*x);
                let half = ComplexView::new(xv)?.width();
                let mut gx = Tensor::zeros(xv.rows(), xv.cols());
                for r in 0..xv.rows() {
                    let (xr, gr) = (xv.row(r), g.row(r));
                    let out = gx.row_mut(r);
                    for k in 0..half {
                        let (a, b) = (xr[k], xr[half + k]);
                        let (ga, gb) = (gr[k], gr[half + k]);
                        let m = a.hypot(b);
                        if m > *eps {
                            let m3 = m * m * m;
                            let cross = ga * b - gb * a;
                            out[k] = b * cross / m3;
                            out[half + k] = -a * cross / m3;
                        } else {
                            out[k] = ga / eps;
                            out[half + k] = gb / eps;
                        }
                    }
                }
                acc(*x, gx)?;
            }
            Op::Softmax(x) => {
                let y = &node.value;
                let mut gx = Tensor::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for (o, (yv, gv)) in gx.row_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                        *o = yv * (gv - dot);
                    }
                }
                acc(*x, gx)?;
            }
            Op::CrossEntropy { logits, labels } => {
                let l = self.value(*logits);
                let n = l.rows() as f64;
                let scale = g.item() / n;
                let mut gl = Tensor::zeros(l.rows(), l.cols());
                for (r, &label) in labels.iter().enumerate() {
                    let p = kernels::softmax(l.row(r));
                    let out = gl.row_mut(r);
                    for (c, pv) in p.into_iter().enumerate() {
                        let target = if c == label { 1.0 } else { 0.0 };
                        out[c] = scale * (pv - target);
                    }
                }
                acc(*logits, gl)?;
            }
            Op::Linear(x, map) => acc(*x, map.apply_adjoint(g)?)?,
        }
        Ok(())
    }
}

fn hadamard(a: &Tensor, b: &Tensor) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(p, q)| p * q).collect();
    Tensor::new(a.rows(), a.cols(), data).expect("same shape")
}

/// `g ∘ conj(y)` with `y` possibly a broadcast row.
fn mul_conj(g: &Tensor, y: &Tensor) -> Result<Tensor> {
    check_broadcast("complex_hadamard_backward", g, y)?;
    let half = g.cols() / 2;
    let mut out = Tensor::zeros(g.rows(), g.cols());
    for r in 0..g.rows() {
        let gr = g.row(r);
        let yr = y.row(bcast_row(y, r));
        let o = out.row_mut(r);
        for k in 0..half {
            let (gre, gim) = (gr[k], gr[half + k]);
            let (c, d) = (yr[k], yr[half + k]);
            o[k] = gre * c + gim * d;
            o[half + k] = gim * c - gre * d;
        }
    }
    Ok(out)
}

/// Leaf gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of a trainable leaf; `None` for constants and interior nodes.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::zeros(2, 2));
        assert!(matches!(tape.backward(x), Err(Error::NonScalarLoss([2, 2]))));
    }

    #[test]
    fn unreachable_leaf_gets_zero_gradient() {
        let mut tape = Tape::new();
        let used = tape.param(Tensor::row_vector(vec![1.0, 2.0]));
        let unused = tape.param(Tensor::row_vector(vec![3.0, 4.0, 5.0]));
        let loss = tape.mean(used).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(unused).unwrap(), &Tensor::zeros(1, 3));
        assert_eq!(grads.get(used).unwrap().data(), &[0.5, 0.5]);
    }

    #[test]
    fn fan_out_accumulates() {
        // loss = mean(x * x) for x = 3 -> d/dx = 2x = 6
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(3.0));
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.mean(sq).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().item(), 6.0);
    }

    #[test]
    fn sum_of_matvec_gradient_is_outer_structure() {
        // loss = sum(W x) with W 2x3, x 3x1: dW[i][j] = x[j]
        let mut tape = Tape::new();
        let w = tape.param(Tensor::from_fn(2, 3, |r, c| (r * 3 + c) as f64 * 0.1));
        let x = tape.constant(Tensor::new(3, 1, vec![1.0, -2.0, 0.5]).unwrap());
        let y = tape.matmul(w, x).unwrap();
        let s = tape.sum_rows(y).unwrap();
        let grads = tape.backward(s).unwrap();
        let gw = grads.get(w).unwrap();
        for r in 0..2 {
            assert_eq!(gw.row(r), &[1.0, -2.0, 0.5]);
        }
        assert!(grads.get(x).is_none());
    }

    #[test]
    fn finite_checks_catch_nan() {
        let mut tape = Tape::with_finite_checks(true);
        let x = tape.param(Tensor::scalar(f64::NAN));
        assert!(matches!(tape.tanh(x), Err(Error::NonFinite("tanh"))));
    }

    #[test]
    fn cross_entropy_rejects_out_of_range_label() {
        let mut tape = Tape::new();
        let l = tape.param(Tensor::zeros(1, 4));
        assert!(tape.cross_entropy(l, &[4]).is_err());
    }
}
