//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records every operation in creation order, so the node list is
//! already topologically sorted and a backward pass is a single reverse sweep.
//! Only row-vector bias addition broadcasts; every other binary op requires
//! identical shapes.

use std::sync::Arc;

use ndarray::{Array2, Axis, Zip};

use crate::error::{Error, Result};
use crate::sparse::Csr;

pub type Matrix = Array2<f64>;

/// Floor applied inside `log` and cross-entropy.
pub const LOG_FLOOR: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    SparseMatMul(Arc<Csr>, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Mul(Var, Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    RowSoftmax(Var),
    CrossEntropy {
        probs: Var,
        targets: Vec<usize>,
        weights: Vec<f64>,
    },
    GatherRows(Var, Vec<usize>),
    ConcatRows(Vec<Var>),
    Sum(Var),
    Reshape(Var),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

/// Operation record for one forward computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by a backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Matrix> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }

    /// Gradient of `v`, or zeros of `shape` if nothing flowed into it.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Matrix {
        self.get(v).cloned().unwrap_or_else(|| Matrix::zeros(shape))
    }
}

fn dims(m: &Matrix) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Scalar value of a `1×1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.dim(), (1, 1));
        m[[0, 0]]
    }

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn grad_any(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that receives no gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.ncols() != vb.nrows() {
            return Err(Error::shape("matmul", format!("{} times {}", dims(va), dims(vb))));
        }
        let out = va.dot(vb);
        let g = self.grad_any(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), g))
    }

    /// `sparse · dense`; the sparse operand is a constant.
    pub fn sparse_matmul(&mut self, s: &Arc<Csr>, x: Var) -> Result<Var> {
        let out = s.mul_dense(self.value(x).view())?;
        let g = self.grad_any(&[x]);
        Ok(self.push(out, Op::SparseMatMul(Arc::clone(s), x), g))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.dim() != vb.dim() {
            return Err(Error::shape(op, format!("{} vs {}", dims(va), dims(vb))));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a) + self.value(b);
        let g = self.grad_any(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), g))
    }

    /// `a - b`.
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let nb = self.scale(b, -1.0);
        self.add(a, nb)
    }

    /// Adds the `1×m` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(bias));
        if vb.nrows() != 1 || vb.ncols() != va.ncols() {
            return Err(Error::shape("add_row", format!("{} plus bias {}", dims(va), dims(vb))));
        }
        let out = va + &vb.row(0);
        let g = self.grad_any(&[a, bias]);
        Ok(self.push(out, Op::AddRow(a, bias), g))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a) * s;
        let g = self.grad_any(&[a]);
        self.push(out, Op::Scale(a, s), g)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("elementwise_mul", a, b)?;
        let out = self.value(a) * self.value(b);
        let g = self.grad_any(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), g))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out = self.value(a).mapv(f);
        let g = self.grad_any(&[a]);
        self.push(out, op, g)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    /// `ln(max(x, LOG_FLOOR))`.
    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(LOG_FLOOR).ln(), Op::Log(a))
    }

    pub fn row_softmax(&mut self, a: Var) -> Var {
        let out = softmax_rows(self.value(a));
        let g = self.grad_any(&[a]);
        self.push(out, Op::RowSoftmax(a), g)
    }

    /// `Σ_i w_i · (−ln max(p[i, t_i], LOG_FLOOR))` as a `1×1` node.
    ///
    /// Rows with zero weight are ignored, including their targets.
    pub fn cross_entropy(&mut self, probs: Var, targets: &[usize], weights: &[f64]) -> Result<Var> {
        let p = self.value(probs);
        if targets.len() != p.nrows() || weights.len() != p.nrows() {
            return Err(Error::shape(
                "masked_cross_entropy",
                format!(
                    "{} probabilities, {} targets, {} weights",
                    dims(p),
                    targets.len(),
                    weights.len()
                ),
            ));
        }
        let mut loss = 0.0;
        for (i, (&t, &w)) in targets.iter().zip(weights).enumerate() {
            if w == 0.0 {
                continue;
            }
            if t >= p.ncols() {
                return Err(Error::shape(
                    "masked_cross_entropy",
                    format!("target {t} at row {i} with {} classes", p.ncols()),
                ));
            }
            loss -= w * p[[i, t]].max(LOG_FLOOR).ln();
        }
        let g = self.grad_any(&[probs]);
        Ok(self.push(
            Matrix::from_elem((1, 1), loss),
            Op::CrossEntropy {
                probs,
                targets: targets.to_vec(),
                weights: weights.to_vec(),
            },
            g,
        ))
    }

    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let va = self.value(a);
        if let Some(&bad) = rows.iter().find(|&&r| r >= va.nrows()) {
            return Err(Error::shape("gather_rows", format!("row {bad} of {}", dims(va))));
        }
        let out = va.select(Axis(0), rows);
        let g = self.grad_any(&[a]);
        Ok(self.push(out, Op::GatherRows(a, rows.to_vec()), g))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("concat_rows", "no inputs"))?;
        let cols = self.value(*first).ncols();
        if let Some(bad) = parts.iter().find(|v| self.value(**v).ncols() != cols) {
            return Err(Error::shape(
                "concat_rows",
                format!("{} columns vs {cols}", self.value(*bad).ncols()),
            ));
        }
        let views: Vec<_> = parts.iter().map(|v| self.value(*v).view()).collect();
        let out = ndarray::concatenate(Axis(0), &views).map_err(|e| Error::shape("concat_rows", e.to_string()))?;
        let g = self.grad_any(parts);
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), g))
    }

    /// Sum of all entries as a `1×1` node.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        let g = self.grad_any(&[a]);
        self.push(Matrix::from_elem((1, 1), s), Op::Sum(a), g)
    }

    /// Row-major reinterpretation with the same element count.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let va = self.value(a);
        if va.len() != rows * cols {
            return Err(Error::shape("reshape", format!("{} into {rows}x{cols}", dims(va))));
        }
        let flat: Vec<f64> = va.iter().copied().collect();
        let out = Matrix::from_shape_vec((rows, cols), flat).expect("length checked");
        let g = self.grad_any(&[a]);
        Ok(self.push(out, Op::Reshape(a), g))
    }

    /// Gradients of a scalar `loss` with respect to every node that needs one.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got {}x{}",
                shape.0, shape.1
            )));
        }
        self.backward_with_cotangent(loss, Matrix::ones((1, 1)))
    }

    /// Vector-Jacobian product: propagates `cotangent` from `output` back to
    /// the leaves.
    pub fn backward_with_cotangent(&self, output: Var, cotangent: Matrix) -> Result<Gradients> {
        if cotangent.dim() != self.shape(output) {
            return Err(Error::shape(
                "backward",
                format!("cotangent {} for output {}", dims(&cotangent), dims(self.value(output))),
            ));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; output.0 + 1];
        grads[output.0] = Some(cotangent);
        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                grads[i] = None;
                continue;
            }
            let is_leaf = matches!(node.op, Op::Leaf);
            let g = match if is_leaf { grads[i].as_ref().cloned() } else { grads[i].take() } {
                Some(g) => g,
                None => continue,
            };
            self.propagate(i, g, &mut grads)?;
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Matrix>], v: Var, contribution: Matrix) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => *existing += &contribution,
            slot @ None => *slot = Some(contribution),
        }
    }

    fn propagate(&self, i: usize, g: Matrix, grads: &mut [Option<Matrix>]) -> Result<()> {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.nodes[a.0].needs_grad {
                    self.accumulate(grads, *a, g.dot(&self.value(*b).t()));
                }
                if self.nodes[b.0].needs_grad {
                    self.accumulate(grads, *b, self.value(*a).t().dot(&g));
                }
            }
            Op::SparseMatMul(s, x) => {
                self.accumulate(grads, *x, s.transpose_mul_dense(g.view())?);
            }
            Op::Add(a, b) => {
                if a == b {
                    self.accumulate(grads, *a, &g * 2.0);
                } else {
                    self.accumulate(grads, *a, g.clone());
                    self.accumulate(grads, *b, g);
                }
            }
            Op::AddRow(a, bias) => {
                let colsum = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                self.accumulate(grads, *bias, colsum);
                self.accumulate(grads, *a, g);
            }
            Op::Scale(a, s) => self.accumulate(grads, *a, g * *s),
            Op::Mul(a, b) => {
                let ga = &g * self.value(*b);
                let gb = &g * self.value(*a);
                self.accumulate(grads, *a, ga);
                self.accumulate(grads, *b, gb);
            }
            Op::Relu(a) => {
                let mut d = g;
                Zip::from(&mut d)
                    .and(self.value(*a))
                    .for_each(|d, &x| {
                        if x <= 0.0 {
                            *d = 0.0;
                        }
                    });
                self.accumulate(grads, *a, d);
            }
            Op::Tanh(a) => {
                let mut d = g;
                Zip::from(&mut d).and(&node.value).for_each(|d, &y| *d *= 1.0 - y * y);
                self.accumulate(grads, *a, d);
            }
            Op::Sigmoid(a) => {
                let mut d = g;
                Zip::from(&mut d).and(&node.value).for_each(|d, &y| *d *= y * (1.0 - y));
                self.accumulate(grads, *a, d);
            }
            Op::Exp(a) => {
                let d = g * &node.value;
                self.accumulate(grads, *a, d);
            }
            Op::Log(a) => {
                let mut d = g;
                Zip::from(&mut d).and(self.value(*a)).for_each(|d, &x| {
                    *d = if x > LOG_FLOOR { *d / x } else { 0.0 };
                });
                self.accumulate(grads, *a, d);
            }
            Op::RowSoftmax(a) => {
                let y = &node.value;
                let mut d = Matrix::zeros(y.dim());
                for ((mut drow, grow), yrow) in d.rows_mut().into_iter().zip(g.rows()).zip(y.rows()) {
                    let dot = grow.dot(&yrow);
                    Zip::from(&mut drow)
                        .and(&grow)
                        .and(&yrow)
                        .for_each(|d, &gv, &yv| *d = yv * (gv - dot));
                }
                self.accumulate(grads, *a, d);
            }
            Op::CrossEntropy {
                probs,
                targets,
                weights,
            } => {
                let scale = g[[0, 0]];
                let p = self.value(*probs);
                let mut d = Matrix::zeros(p.dim());
                for (r, (&t, &w)) in targets.iter().zip(weights).enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let pv = p[[r, t]];
                    if pv > LOG_FLOOR {
                        d[[r, t]] = -scale * w / pv;
                    }
                }
                self.accumulate(grads, *probs, d);
            }
            Op::GatherRows(a, rows) => {
                let mut d = Matrix::zeros(self.value(*a).dim());
                for (k, &r) in rows.iter().enumerate() {
                    let mut dst = d.row_mut(r);
                    dst += &g.row(k);
                }
                self.accumulate(grads, *a, d);
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for p in parts {
                    let n = self.value(*p).nrows();
                    let piece = g.slice(ndarray::s![start..start + n, ..]).to_owned();
                    self.accumulate(grads, *p, piece);
                    start += n;
                }
            }
            Op::Sum(a) => {
                let d = Matrix::from_elem(self.value(*a).dim(), g[[0, 0]]);
                self.accumulate(grads, *a, d);
            }
            Op::Reshape(a) => {
                let shape = self.value(*a).dim();
                let flat: Vec<f64> = g.iter().copied().collect();
                let d = Matrix::from_shape_vec(shape, flat).expect("same element count");
                self.accumulate(grads, *a, d);
            }
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable row-wise softmax.
pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|x| (x - max).exp());
        let s = row.sum();
        row /= s;
    }
    out
}
