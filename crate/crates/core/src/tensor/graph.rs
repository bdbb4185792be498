use std::collections::HashMap;

use super::kernels;
use super::params::ParamRegistry;
use super::Tensor;
use crate::error::{shape_err, Error, Result};

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `x[.., n] + b[n]`, bias broadcast over every leading index.
    AddBias(Var, Var),
    Scale(Var, f32),
    Relu(Var),
    Square(Var),
    Softmax {
        x: Var,
        axis: usize,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f32>,
        rstd: Vec<f32>,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
    Sum(Var),
    Mean(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    param: Option<usize>,
}

/// Tape of recorded tensor ops.
///
/// Every op appends one node; [`Graph::backward`] walks the nodes in reverse
/// order, so a graph is only ever extended, never edited.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    bound: HashMap<usize, Var>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn data(&self, v: Var) -> &[f32] {
        &self.nodes[v.0].value.data
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    /// Accumulated gradient of a leaf that requires grad.
    pub fn grad(&self, v: Var) -> Option<&[f32]> {
        self.nodes[v.0].value.grad.as_deref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].value.requires_grad
    }

    /// Which inputs of every recorded `relu` were positive, in tape order.
    ///
    /// Two evaluations with equal patterns lie in the same linear piece of
    /// every relu, which is what a finite-difference check needs to know.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(x) => Some(x),
                _ => None,
            })
            .flat_map(|x| self.data(x).iter().map(|&v| v > 0.0))
            .collect()
    }

    /// Records a leaf. Its `requires_grad` flag is taken from the tensor.
    pub fn leaf(&mut self, tensor: Tensor) -> Var {
        self.push_raw(tensor, Op::Leaf, None)
    }

    /// Records a constant leaf (no gradient).
    pub fn constant(&mut self, shape: &[usize], data: Vec<f32>) -> Result<Var> {
        Ok(self.leaf(Tensor::new(shape.to_vec(), data)?))
    }

    /// Binds a registry parameter as a leaf. Binding the same name twice
    /// returns the same handle.
    pub fn param(&mut self, params: &ParamRegistry, name: &str) -> Result<Var> {
        let index = params
            .index_of(name)
            .ok_or_else(|| Error::Usage(format!("unknown parameter '{name}'")))?;
        if let Some(&v) = self.bound.get(&index) {
            return Ok(v);
        }
        let src = params.get_index(index);
        let tensor = Tensor {
            shape: src.shape.clone(),
            data: src.data.clone(),
            requires_grad: true,
            grad: None,
        };
        let v = self.push_raw(tensor, Op::Leaf, Some(index));
        self.bound.insert(index, v);
        Ok(v)
    }

    fn push_raw(&mut self, value: Tensor, op: Op, param: Option<usize>) -> Var {
        self.nodes.push(Node { value, op, param });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f32>, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|&v| self.requires_grad(v));
        let value = Tensor {
            shape,
            data,
            requires_grad,
            grad: None,
        };
        self.push_raw(value, op, None)
    }

    // ---- forward ops -------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2("matmul")?;
        let (k2, n) = self.value(b).dims2("matmul")?;
        if k != k2 {
            return shape_err("matmul", format!("[{m}×{k}] · [{k2}×{n}]"));
        }
        let out = kernels::matmul(self.data(a), self.data(b), m, k, n);
        Ok(self.push(vec![m, n], out, Op::MatMul(a, b), &[a, b]))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.value(x).dims2("transpose")?;
        let out = kernels::transpose(self.data(x), r, c);
        Ok(self.push(vec![c, r], out, Op::Transpose(x), &[x]))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return shape_err(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn zip_op(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f32, f32) -> f32,
    ) -> Result<Vec<f32>> {
        self.same_shape(op, a, b)?;
        Ok(self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| f(x, y))
            .collect())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_op("add", a, b, |x, y| x + y)?;
        Ok(self.push(self.shape(a).to_vec(), out, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_op("sub", a, b, |x, y| x - y)?;
        Ok(self.push(self.shape(a).to_vec(), out, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_op("mul", a, b, |x, y| x * y)?;
        Ok(self.push(self.shape(a).to_vec(), out, Op::Mul(a, b), &[a, b]))
    }

    /// Adds a bias vector along the last axis.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let width = *self.shape(x).last().unwrap_or(&0);
        if self.value(b).numel() != width {
            return shape_err(
                "add_bias",
                format!(
                    "bias of {} values for last axis {width}",
                    self.value(b).numel()
                ),
            );
        }
        let bias = self.data(b);
        let out = self
            .data(x)
            .chunks(width.max(1))
            .flat_map(|row| row.iter().zip(bias).map(|(&v, &bv)| v + bv))
            .collect();
        Ok(self.push(self.shape(x).to_vec(), out, Op::AddBias(x, b), &[x, b]))
    }

    pub fn scale(&mut self, x: Var, factor: f32) -> Var {
        let out = self.data(x).iter().map(|&v| v * factor).collect();
        self.push(self.shape(x).to_vec(), out, Op::Scale(x, factor), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.data(x).iter().map(|&v| v.max(0.0)).collect();
        self.push(self.shape(x).to_vec(), out, Op::Relu(x), &[x])
    }

    pub fn square(&mut self, x: Var) -> Var {
        let out = self.data(x).iter().map(|&v| v * v).collect();
        self.push(self.shape(x).to_vec(), out, Op::Square(x), &[x])
    }

    /// Softmax along `axis`, computed after subtracting the slice maximum.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        if axis >= self.shape(x).len() {
            return shape_err(
                "softmax",
                format!("axis {axis} for shape {:?}", self.shape(x)),
            );
        }
        let out = kernels::softmax(self.data(x), self.shape(x), axis, false);
        Ok(self.push(self.shape(x).to_vec(), out, Op::Softmax { x, axis }, &[x]))
    }

    /// Row softmax of a 2-D score matrix where row `i` only sees columns `0..=i`.
    pub fn causal_softmax(&mut self, x: Var) -> Result<Var> {
        self.value(x).dims2("causal_softmax")?;
        let out = kernels::softmax(self.data(x), self.shape(x), 1, true);
        // Masked entries are exactly zero, so the plain softmax backward is exact.
        Ok(self.push(
            self.shape(x).to_vec(),
            out,
            Op::Softmax { x, axis: 1 },
            &[x],
        ))
    }

    /// `gamma ⊙ (x − μ) / √(σ² + eps) + beta` over the last axis.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f32) -> Result<Var> {
        let width = *self.shape(x).last().unwrap_or(&0);
        if self.value(gamma).numel() != width || self.value(beta).numel() != width {
            return shape_err(
                "layer_norm",
                format!(
                    "gamma/beta of {}/{} values for last axis {width}",
                    self.value(gamma).numel(),
                    self.value(beta).numel()
                ),
            );
        }
        let (xhat, rstd) = kernels::normalize_rows(self.data(x), width, eps);
        let g = self.data(gamma);
        let b = self.data(beta);
        let out = xhat
            .chunks(width.max(1))
            .flat_map(|row| {
                row.iter()
                    .zip(g.iter().zip(b))
                    .map(|(&h, (&gv, &bv))| gv * h + bv)
            })
            .collect();
        let op = Op::LayerNorm {
            x,
            gamma,
            beta,
            xhat,
            rstd,
        };
        Ok(self.push(self.shape(x).to_vec(), out, op, &[x, gamma, beta]))
    }

    /// Columns `start..start + len` of a 2-D tensor.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.value(x).dims2("slice_cols")?;
        if start + len > c {
            return shape_err(
                "slice_cols",
                format!("columns {start}..{} of {c}", start + len),
            );
        }
        let src = self.data(x);
        let out = (0..r)
            .flat_map(|i| src[i * c + start..i * c + start + len].iter().copied())
            .collect();
        Ok(self.push(vec![r, len], out, Op::SliceCols { x, start }, &[x]))
    }

    /// Concatenates 2-D tensors with equal row counts along the column axis.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return shape_err("concat_cols", "no inputs");
        };
        let (rows, _) = self.value(first).dims2("concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.value(p).dims2("concat_cols")?;
            if r != rows {
                return shape_err("concat_cols", format!("{r} rows vs {rows}"));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.data(p)[i * w..(i + 1) * w]);
            }
        }
        Ok(self.push(
            vec![rows, total],
            out,
            Op::ConcatCols(parts.to_vec()),
            parts,
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.data(x).iter().map(|&v| v as f64).sum::<f64>() as f32;
        self.push(vec![1], vec![s], Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).numel().max(1);
        let s = self.data(x).iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        self.push(vec![1], vec![s as f32], Op::Mean(x), &[x])
    }

    /// `x · w + b` for `x[rows×in]`, `w[in×out]`, `b[out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = self.matmul(x, w)?;
        self.add_bias(xw, b)
    }

    // ---- reverse pass ------------------------------------------------

    /// Propagates d(loss)/d(·) to every leaf that requires grad.
    /// Leaf gradients accumulate across calls.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let adjoints = self.reverse(loss)?;
        self.store_leaf_grads(adjoints, None);
        Ok(())
    }

    /// Like [`Graph::backward`], and also adds each bound parameter's
    /// gradient from this pass into `params`.
    pub fn backward_into(&mut self, loss: Var, params: &mut ParamRegistry) -> Result<()> {
        let adjoints = self.reverse(loss)?;
        self.store_leaf_grads(adjoints, Some(params));
        Ok(())
    }

    fn store_leaf_grads(
        &mut self,
        adjoints: Vec<Option<Vec<f32>>>,
        mut params: Option<&mut ParamRegistry>,
    ) {
        for (node, adj) in self.nodes.iter_mut().zip(adjoints) {
            let (Op::Leaf, Some(adj)) = (&node.op, adj) else {
                continue;
            };
            if !node.value.requires_grad {
                continue;
            }
            if let (Some(index), Some(params)) = (node.param, params.as_deref_mut()) {
                params.accumulate_grad(index, &adj);
            }
            match &mut node.value.grad {
                Some(g) => g.iter_mut().zip(&adj).for_each(|(a, b)| *a += b),
                slot @ None => *slot = Some(adj),
            }
        }
    }

    fn reverse(&self, loss: Var) -> Result<Vec<Option<Vec<f32>>>> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut adj: Vec<Option<Vec<f32>>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(dy) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                adj[i] = Some(dy);
                continue;
            }
            self.propagate(node, &dy, &mut adj);
        }
        Ok(adj)
    }

    fn grad_slot<'a>(&self, adj: &'a mut [Option<Vec<f32>>], v: Var) -> Option<&'a mut Vec<f32>> {
        if !self.requires_grad(v) {
            return None;
        }
        let n = self.value(v).numel();
        Some(adj[v.0].get_or_insert_with(|| vec![0.0; n]))
    }

    fn propagate(&self, node: &Node, dy: &[f32], adj: &mut [Option<Vec<f32>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                let n = self.shape(*b)[1];
                if let Some(ga) = self.grad_slot(adj, *a) {
                    kernels::matmul_a_bt_acc(dy, self.data(*b), m, k, n, ga);
                }
                if let Some(gb) = self.grad_slot(adj, *b) {
                    kernels::matmul_at_b_acc(self.data(*a), dy, m, k, n, gb);
                }
            }
            Op::Transpose(x) => {
                let (r, c) = (self.shape(*x)[0], self.shape(*x)[1]);
                if let Some(gx) = self.grad_slot(adj, *x) {
                    let t = kernels::transpose(dy, c, r);
                    gx.iter_mut().zip(t).for_each(|(g, d)| *g += d);
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(g) = self.grad_slot(adj, v) {
                        g.iter_mut().zip(dy).for_each(|(g, d)| *g += d);
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(g) = self.grad_slot(adj, *a) {
                    g.iter_mut().zip(dy).for_each(|(g, d)| *g += d);
                }
                if let Some(g) = self.grad_slot(adj, *b) {
                    g.iter_mut().zip(dy).for_each(|(g, d)| *g -= d);
                }
            }
            Op::Mul(a, b) => {
                if let Some(g) = self.grad_slot(adj, *a) {
                    let bv = self.data(*b);
                    g.iter_mut()
                        .zip(dy.iter().zip(bv))
                        .for_each(|(g, (d, y))| *g += d * y);
                }
                if let Some(g) = self.grad_slot(adj, *b) {
                    let av = self.data(*a);
                    g.iter_mut()
                        .zip(dy.iter().zip(av))
                        .for_each(|(g, (d, x))| *g += d * x);
                }
            }
            Op::AddBias(x, b) => {
                if let Some(g) = self.grad_slot(adj, *x) {
                    g.iter_mut().zip(dy).for_each(|(g, d)| *g += d);
                }
                if let Some(g) = self.grad_slot(adj, *b) {
                    let width = g.len().max(1);
                    for row in dy.chunks(width) {
                        g.iter_mut().zip(row).for_each(|(g, d)| *g += d);
                    }
                }
            }
            Op::Scale(x, f) => {
                if let Some(g) = self.grad_slot(adj, *x) {
                    g.iter_mut().zip(dy).for_each(|(g, d)| *g += d * f);
                }
            }
            Op::Relu(x) => {
                if let Some(g) = self.grad_slot(adj, *x) {
                    let xv = self.data(*x);
                    g.iter_mut()
                        .zip(dy.iter().zip(xv))
                        .for_each(|(g, (d, &v))| {
                            if v > 0.0 {
                                *g += d
                            }
                        });
                }
            }
            Op::Square(x) => {
                if let Some(g) = self.grad_slot(adj, *x) {
                    let xv = self.data(*x);
                    g.iter_mut()
                        .zip(dy.iter().zip(xv))
                        .for_each(|(g, (d, v))| *g += 2.0 * d * v);
                }
            }
            Op::Softmax { x, axis } => {
                if let Some(g) = self.grad_slot(adj, *x) {
                    kernels::softmax_backward(&node.value.data, dy, &node.value.shape, *axis, g);
                }
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            } => {
                let width = self.value(*gamma).numel().max(1);
                let gv = self.data(*gamma);
                if let Some(g) = self.grad_slot(adj, *gamma) {
                    for (drow, hrow) in dy.chunks(width).zip(xhat.chunks(width)) {
                        for ((g, d), h) in g.iter_mut().zip(drow).zip(hrow) {
                            *g += d * h;
                        }
                    }
                }
                if let Some(g) = self.grad_slot(adj, *beta) {
                    for drow in dy.chunks(width) {
                        g.iter_mut().zip(drow).for_each(|(g, d)| *g += d);
                    }
                }
                if let Some(g) = self.grad_slot(adj, *x) {
                    let inv_w = 1.0 / width as f32;
                    for (r, (drow, hrow)) in dy.chunks(width).zip(xhat.chunks(width)).enumerate() {
                        let dxhat: Vec<f32> = drow.iter().zip(gv).map(|(d, g)| d * g).collect();
                        let mean_d: f32 = dxhat.iter().sum::<f32>() * inv_w;
                        let mean_dh: f32 =
                            dxhat.iter().zip(hrow).map(|(a, b)| a * b).sum::<f32>() * inv_w;
                        let out = &mut g[r * width..(r + 1) * width];
                        for ((o, dh), h) in out.iter_mut().zip(&dxhat).zip(hrow) {
                            *o += rstd[r] * (dh - mean_d - h * mean_dh);
                        }
                    }
                }
            }
            Op::SliceCols { x, start } => {
                let c = self.shape(*x)[1];
                let len = node.value.shape[1];
                if let Some(g) = self.grad_slot(adj, *x) {
                    for (i, drow) in dy.chunks(len.max(1)).enumerate() {
                        let dst = &mut g[i * c + start..i * c + start + len];
                        dst.iter_mut().zip(drow).for_each(|(g, d)| *g += d);
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let total = node.value.shape[1];
                let mut offset = 0;
                for &p in parts {
                    let w = self.shape(p)[1];
                    if let Some(g) = self.grad_slot(adj, p) {
                        for (i, grow) in g.chunks_mut(w.max(1)).enumerate() {
                            let src = &dy[i * total + offset..i * total + offset + w];
                            grow.iter_mut().zip(src).for_each(|(g, d)| *g += d);
                        }
                    }
                    offset += w;
                }
            }
            Op::Sum(x) => {
                if let Some(g) = self.grad_slot(adj, *x) {
                    g.iter_mut().for_each(|g| *g += dy[0]);
                }
            }
            Op::Mean(x) => {
                if let Some(g) = self.grad_slot(adj, *x) {
                    let n = g.len().max(1) as f32;
                    g.iter_mut().for_each(|g| *g += dy[0] / n);
                }
            }
        }
    }
}
