//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation appends a node holding its forward value. Nodes are
//! topologically ordered by construction, so `backward` is a single reverse
//! sweep. Gradients for a node used several times accumulate additively.

use std::collections::HashMap;

use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
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
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Transpose(Var),
    Softmax(Var),
    LogSoftmax(Var),
    LeakyRelu(Var, f64),
    Elu(Var),
    Sigmoid(Var),
    Tanh(Var),
    MaskedFill(Var, Vec<bool>),
    Sum(Var),
    Mean(Var),
    Reshape(Var),
    SelectRows(Var, Vec<usize>),
    SliceCols(Var, usize, usize),
    Pick(Var, Vec<usize>),
    GatherPairs(Var, Vec<(usize, usize)>),
    LayerNorm(Var, f64),
    Biaffine {
        head: Var,
        dep: Var,
        weight: Var,
        bias: Var,
    },
    PairAttention {
        left: Var,
        right: Var,
        att: Var,
        slope: f64,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// A computation graph for one forward pass.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

/// Gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }
}

fn dim_err(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Error {
    Error::Dimension {
        op,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
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

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn unary(&mut self, x: Var, value: Tensor, op: Op) -> Var {
        let ng = self.nodes[x.0].needs_grad;
        self.push(value, op, ng)
    }

    fn binary(&mut self, a: Var, b: Var, value: Tensor, op: Op) -> Var {
        let ng = self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad;
        self.push(value, op, ng)
    }

    /// A leaf that never receives gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A leaf that receives gradient.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Registers a parameter as a leaf. Repeated calls return the same node,
    /// so every use contributes to one accumulated gradient.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.input(store.value(id).clone());
        self.params.insert(id, v);
        v
    }

    pub fn param_vars(&self) -> impl Iterator<Item = (ParamId, Var)> + '_ {
        self.params.iter().map(|(&p, &v)| (p, v))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn require_2d(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        let s = self.shape(v);
        if s.len() != 2 {
            return Err(dim_err(op, s, &[0, 0]));
        }
        Ok((s[0], s[1]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.require_2d("matmul", a)?;
        let (k2, n) = self.require_2d("matmul", b)?;
        if k != k2 {
            return Err(dim_err("matmul", self.shape(a), self.shape(b)));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            View::rows(self.value(a).data(), k),
            View::rows(self.value(b).data(), n),
            0.0,
            ViewMut::rows(&mut out, n),
        );
        Ok(self.binary(a, b, Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(dim_err(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::from_parts(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let t = self.zip_with(a, b, |x, y| x + y);
        Ok(self.binary(a, b, t, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let t = self.zip_with(a, b, |x, y| x - y);
        Ok(self.binary(a, b, t, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let t = self.zip_with(a, b, |x, y| x * y);
        Ok(self.binary(a, b, t, Op::Mul(a, b)))
    }

    /// Adds a row vector (length = last dim of `a`) to every lane of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let d = self.value(a).last_dim();
        if self.value(row).len() != d {
            return Err(dim_err("add_row", self.shape(a), self.shape(row)));
        }
        let r = self.value(row).data().to_vec();
        let ta = self.value(a);
        let data = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + r[i % d])
            .collect();
        let t = Tensor::from_parts(ta.shape().to_vec(), data);
        Ok(self.binary(a, row, t, Op::AddRow(a, row)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = self.value(a).map(|x| x * c);
        self.unary(a, t, Op::Scale(a, c))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::usage("concat_cols of nothing"));
        }
        let (rows, _) = self.require_2d("concat_cols", parts[0])?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.require_2d("concat_cols", p)?;
            if r != rows {
                return Err(dim_err("concat_cols", self.shape(parts[0]), self.shape(p)));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let ng = parts.iter().any(|p| self.nodes[p.0].needs_grad);
        Ok(self.push(
            Tensor::from_parts(vec![rows, total], out),
            Op::ConcatCols(parts.to_vec()),
            ng,
        ))
    }

    /// Stacks 2-D blocks (or vectors, as single rows) vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::usage("concat_rows of nothing"));
        }
        let cols = self.value(parts[0]).last_dim();
        let mut out = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.last_dim() != cols || t.shape().len() > 2 {
                return Err(dim_err("concat_rows", self.shape(parts[0]), t.shape()));
            }
            out.extend_from_slice(t.data());
        }
        let rows = out.len() / cols;
        let ng = parts.iter().any(|p| self.nodes[p.0].needs_grad);
        Ok(self.push(
            Tensor::from_parts(vec![rows, cols], out),
            Op::ConcatRows(parts.to_vec()),
            ng,
        ))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.require_2d("transpose", a)?;
        let src = self.value(a).data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = src[i * n + j];
            }
        }
        Ok(self.unary(a, Tensor::from_parts(vec![n, m], out), Op::Transpose(a)))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Var {
        let t = softmax_last(self.value(a));
        self.unary(a, t, Op::Softmax(a))
    }

    /// Log-softmax over the last axis.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let t = log_softmax_last(self.value(a));
        self.unary(a, t, Op::LogSoftmax(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let t = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.unary(a, t, Op::LeakyRelu(a, slope))
    }

    /// ELU with alpha = 1.
    pub fn elu(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|x| if x > 0.0 { x } else { x.exp_m1() });
        self.unary(a, t, Op::Elu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = self.value(a).map(sigmoid);
        self.unary(a, t, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).map(f64::tanh);
        self.unary(a, t, Op::Tanh(a))
    }

    /// Replaces entries where `mask` is true with `fill`; those entries get
    /// no gradient.
    pub fn masked_fill(&mut self, a: Var, mask: &[bool], fill: f64) -> Result<Var> {
        if mask.len() != self.value(a).len() {
            return Err(dim_err("masked_fill", self.shape(a), &[mask.len()]));
        }
        let ta = self.value(a);
        let data = ta
            .data()
            .iter()
            .zip(mask)
            .map(|(&x, &m)| if m { fill } else { x })
            .collect();
        let t = Tensor::from_parts(ta.shape().to_vec(), data);
        Ok(self.unary(a, t, Op::MaskedFill(a, mask.to_vec())))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.unary(a, Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        self.unary(a, Tensor::scalar(s), Op::Mean(a))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a).clone().reshaped(shape.to_vec())?;
        Ok(self.unary(a, t, Op::Reshape(a)))
    }

    pub fn select_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let (m, n) = self.require_2d("select_rows", a)?;
        if let Some(&bad) = rows.iter().find(|&&r| r >= m) {
            return Err(dim_err("select_rows", self.shape(a), &[bad]));
        }
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            out.extend_from_slice(&src[r * n..(r + 1) * n]);
        }
        let t = Tensor::new(vec![rows.len(), n], out)?;
        Ok(self.unary(a, t, Op::SelectRows(a, rows.to_vec())))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = self.require_2d("slice_cols", a)?;
        if start >= end || end > n {
            return Err(dim_err("slice_cols", self.shape(a), &[start, end]));
        }
        let src = self.value(a).data();
        let w = end - start;
        let mut out = Vec::with_capacity(m * w);
        for i in 0..m {
            out.extend_from_slice(&src[i * n + start..i * n + end]);
        }
        Ok(self.unary(a, Tensor::from_parts(vec![m, w], out), Op::SliceCols(a, start, end)))
    }

    /// `out[i] = a[i][index[i]]`.
    pub fn pick(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        let (m, n) = self.require_2d("pick", a)?;
        if index.len() != m || index.iter().any(|&c| c >= n) {
            return Err(dim_err("pick", self.shape(a), &[index.len()]));
        }
        let t = self.value(a);
        let out = index.iter().enumerate().map(|(i, &c)| t.at(i, c)).collect();
        Ok(self.unary(a, Tensor::vector(out), Op::Pick(a, index.to_vec())))
    }

    /// From an `[n1, n2, m]` tensor, gathers the `m`-lanes at the given
    /// `(i, j)` pairs into a `[pairs, m]` matrix.
    pub fn gather_pairs(&mut self, a: Var, pairs: &[(usize, usize)]) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if s.len() != 3 || pairs.iter().any(|&(i, j)| i >= s[0] || j >= s[1]) || pairs.is_empty() {
            return Err(dim_err("gather_pairs", &s, &[pairs.len()]));
        }
        let t = self.value(a);
        let mut out = Vec::with_capacity(pairs.len() * s[2]);
        for &(i, j) in pairs {
            out.extend_from_slice(t.lane(i * s[1] + j));
        }
        let t = Tensor::from_parts(vec![pairs.len(), s[2]], out);
        Ok(self.unary(a, t, Op::GatherPairs(a, pairs.to_vec())))
    }

    /// Normalizes each lane of the last axis to zero mean and unit variance.
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Var {
        let ta = self.value(a);
        let d = ta.last_dim();
        let mut out = Vec::with_capacity(ta.len());
        for o in 0..ta.outer() {
            let lane = ta.lane(o);
            let mu = lane.iter().sum::<f64>() / d as f64;
            let var = lane.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + eps).sqrt();
            out.extend(lane.iter().map(|x| (x - mu) * inv));
        }
        let t = Tensor::from_parts(ta.shape().to_vec(), out);
        self.unary(a, t, Op::LayerNorm(a, eps))
    }

    /// Batched biaffine scoring.
    ///
    /// `head` is `[nh, d1]`, `dep` is `[nd, d2]`, `weight` is `[d1, m, d2]`
    /// and `bias` is `[d1, m]`. The result is `[nd, nh, m]` with
    /// `out[i][j][r] = head[j]ᵀ weight[·,r,·] dep[i] + head[j]ᵀ bias[·,r]`.
    pub fn biaffine(&mut self, head: Var, dep: Var, weight: Var, bias: Var) -> Result<Var> {
        let (nh, d1) = self.require_2d("biaffine", head)?;
        let (nd, d2) = self.require_2d("biaffine", dep)?;
        let ws = self.shape(weight).to_vec();
        if ws.len() != 3 || ws[0] != d1 || ws[2] != d2 {
            return Err(dim_err("biaffine", &[d1, d2], &ws));
        }
        let m = ws[1];
        if self.shape(bias) != [d1, m] {
            return Err(dim_err("biaffine", &[d1, m], self.shape(bias)));
        }
        let (h, d, w, b) = (
            self.value(head).data(),
            self.value(dep).data(),
            self.value(weight).data(),
            self.value(bias).data(),
        );
        let mut out = vec![0.0; nd * nh * m];
        let mut t = vec![0.0; nh * d2];
        for r in 0..m {
            // t = head · W_r
            gemm(
                nh,
                d1,
                d2,
                View::rows(h, d1),
                View::strided(w, r * d2, m * d2, 1),
                0.0,
                ViewMut::rows(&mut t, d2),
            );
            // out_r = dep · tᵀ
            gemm(
                nd,
                d2,
                nh,
                View::rows(d, d2),
                View::strided(&t, 0, 1, d2),
                0.0,
                ViewMut::strided(&mut out, r, nh * m, m),
            );
            for j in 0..nh {
                let u: f64 = (0..d1).map(|a| h[j * d1 + a] * b[a * m + r]).sum();
                for i in 0..nd {
                    out[(i * nh + j) * m + r] += u;
                }
            }
        }
        let t = Tensor::from_parts(vec![nd, nh, m], out);
        let ng = [head, dep, weight, bias].iter().any(|v| self.nodes[v.0].needs_grad);
        Ok(self.push(
            t,
            Op::Biaffine {
                head,
                dep,
                weight,
                bias,
            },
            ng,
        ))
    }

    /// Additive pairwise attention logits:
    /// `out[i][j] = Σ_c att[c] · leaky_relu(left[i][c] + right[j][c])`.
    pub fn pair_attention(&mut self, left: Var, right: Var, att: Var, slope: f64) -> Result<Var> {
        let (n1, d) = self.require_2d("pair_attention", left)?;
        let (n2, d2) = self.require_2d("pair_attention", right)?;
        if d != d2 || self.value(att).len() != d {
            return Err(dim_err("pair_attention", self.shape(left), self.shape(right)));
        }
        let (l, r, a) = (
            self.value(left).data(),
            self.value(right).data(),
            self.value(att).data(),
        );
        let mut out = vec![0.0; n1 * n2];
        for i in 0..n1 {
            for j in 0..n2 {
                let mut s = 0.0;
                for c in 0..d {
                    let z = l[i * d + c] + r[j * d + c];
                    s += a[c] * if z > 0.0 { z } else { slope * z };
                }
                out[i * n2 + j] = s;
            }
        }
        let ng = [left, right, att].iter().any(|v| self.nodes[v.0].needs_grad);
        Ok(self.push(
            Tensor::from_parts(vec![n1, n2], out),
            Op::PairAttention {
                left,
                right,
                att,
                slope,
            },
            ng,
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::usage(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.shape(loss), 1.0));
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.backprop_node(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        let out = &node.value;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| Tensor::zeros(self.shape(v)));
            f(slot.data_mut());
        };
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                let n = self.shape(*b)[1];
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |ga| {
                    gemm(m, n, k, View::rows(gd, n), View::strided(bv, 0, 1, n), 1.0, ViewMut::rows(ga, k))
                });
                acc(*b, &mut |gb| {
                    gemm(k, m, n, View::strided(av, 0, 1, k), View::rows(gd, n), 1.0, ViewMut::rows(gb, n))
                });
            }
            Op::Add(a, b) => {
                acc(*a, &mut |ga| axpy(ga, gd, 1.0));
                acc(*b, &mut |gb| axpy(gb, gd, 1.0));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |ga| axpy(ga, gd, 1.0));
                acc(*b, &mut |gb| axpy(gb, gd, -1.0));
            }
            Op::AddRow(a, row) => {
                acc(*a, &mut |ga| axpy(ga, gd, 1.0));
                acc(*row, &mut |gr| {
                    let d = gr.len();
                    for (i, &x) in gd.iter().enumerate() {
                        gr[i % d] += x;
                    }
                });
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |ga| {
                    for i in 0..ga.len() {
                        ga[i] += gd[i] * bv[i];
                    }
                });
                acc(*b, &mut |gb| {
                    for i in 0..gb.len() {
                        gb[i] += gd[i] * av[i];
                    }
                });
            }
            Op::Scale(a, c) => acc(*a, &mut |ga| axpy(ga, gd, *c)),
            Op::ConcatCols(parts) => {
                let rows = out.rows();
                let total = out.cols();
                let mut offset = 0;
                for p in parts {
                    let w = self.shape(*p)[1];
                    acc(*p, &mut |gp| {
                        for i in 0..rows {
                            for c in 0..w {
                                gp[i * w + c] += gd[i * total + offset + c];
                            }
                        }
                    });
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let len = self.value(*p).len();
                    acc(*p, &mut |gp| axpy(gp, &gd[offset..offset + len], 1.0));
                    offset += len;
                }
            }
            Op::Transpose(a) => {
                let (m, n) = (self.shape(*a)[0], self.shape(*a)[1]);
                acc(*a, &mut |ga| {
                    for i in 0..m {
                        for j in 0..n {
                            ga[i * n + j] += gd[j * m + i];
                        }
                    }
                });
            }
            Op::Softmax(a) => {
                let d = out.last_dim();
                let y = out.data();
                acc(*a, &mut |ga| {
                    for o in 0..ga.len() / d {
                        let r = o * d..(o + 1) * d;
                        let dot: f64 = y[r.clone()].iter().zip(&gd[r.clone()]).map(|(a, b)| a * b).sum();
                        for i in r {
                            ga[i] += y[i] * (gd[i] - dot);
                        }
                    }
                });
            }
            Op::LogSoftmax(a) => {
                let d = out.last_dim();
                let y = out.data();
                acc(*a, &mut |ga| {
                    for o in 0..ga.len() / d {
                        let r = o * d..(o + 1) * d;
                        let gsum: f64 = gd[r.clone()].iter().sum();
                        for i in r {
                            ga[i] += gd[i] - y[i].exp() * gsum;
                        }
                    }
                });
            }
            Op::LeakyRelu(a, slope) => {
                let x = self.value(*a).data();
                acc(*a, &mut |ga| {
                    for i in 0..ga.len() {
                        ga[i] += gd[i] * if x[i] > 0.0 { 1.0 } else { *slope };
                    }
                });
            }
            Op::Elu(a) => {
                let x = self.value(*a).data();
                let y = out.data();
                acc(*a, &mut |ga| {
                    for i in 0..ga.len() {
                        ga[i] += gd[i] * if x[i] > 0.0 { 1.0 } else { y[i] + 1.0 };
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = out.data();
                acc(*a, &mut |ga| {
                    for i in 0..ga.len() {
                        ga[i] += gd[i] * y[i] * (1.0 - y[i]);
                    }
                });
            }
            Op::Tanh(a) => {
                let y = out.data();
                acc(*a, &mut |ga| {
                    for i in 0..ga.len() {
                        ga[i] += gd[i] * (1.0 - y[i] * y[i]);
                    }
                });
            }
            Op::MaskedFill(a, mask) => acc(*a, &mut |ga| {
                for i in 0..ga.len() {
                    if !mask[i] {
                        ga[i] += gd[i];
                    }
                }
            }),
            Op::Sum(a) => acc(*a, &mut |ga| ga.iter_mut().for_each(|x| *x += gd[0])),
            Op::Mean(a) => acc(*a, &mut |ga| {
                let s = gd[0] / ga.len() as f64;
                ga.iter_mut().for_each(|x| *x += s)
            }),
            Op::Reshape(a) => acc(*a, &mut |ga| axpy(ga, gd, 1.0)),
            Op::SelectRows(a, rows) => {
                let n = self.shape(*a)[1];
                acc(*a, &mut |ga| {
                    for (k, &r) in rows.iter().enumerate() {
                        axpy(&mut ga[r * n..(r + 1) * n], &gd[k * n..(k + 1) * n], 1.0);
                    }
                });
            }
            Op::SliceCols(a, start, end) => {
                let n = self.shape(*a)[1];
                let w = end - start;
                acc(*a, &mut |ga| {
                    for i in 0..ga.len() / n {
                        axpy(&mut ga[i * n + start..i * n + end], &gd[i * w..(i + 1) * w], 1.0);
                    }
                });
            }
            Op::Pick(a, index) => {
                let n = self.shape(*a)[1];
                acc(*a, &mut |ga| {
                    for (i, &c) in index.iter().enumerate() {
                        ga[i * n + c] += gd[i];
                    }
                });
            }
            Op::GatherPairs(a, pairs) => {
                let s = self.shape(*a);
                let (n2, m) = (s[1], s[2]);
                acc(*a, &mut |ga| {
                    for (k, &(i, j)) in pairs.iter().enumerate() {
                        let base = (i * n2 + j) * m;
                        axpy(&mut ga[base..base + m], &gd[k * m..(k + 1) * m], 1.0);
                    }
                });
            }
            Op::LayerNorm(a, eps) => {
                let x = self.value(*a);
                let d = x.last_dim();
                let y = out.data();
                acc(*a, &mut |ga| {
                    for o in 0..x.outer() {
                        let lane = x.lane(o);
                        let mu = lane.iter().sum::<f64>() / d as f64;
                        let var = lane.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d as f64;
                        let inv = 1.0 / (var + eps).sqrt();
                        let r = o * d..(o + 1) * d;
                        let gmean = gd[r.clone()].iter().sum::<f64>() / d as f64;
                        let gy = gd[r.clone()]
                            .iter()
                            .zip(&y[r.clone()])
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                            / d as f64;
                        for i in r {
                            ga[i] += inv * (gd[i] - gmean - y[i] * gy);
                        }
                    }
                });
            }
            Op::Biaffine {
                head,
                dep,
                weight,
                bias,
            } => self.biaffine_backward(*head, *dep, *weight, *bias, gd, grads),
            Op::PairAttention {
                left,
                right,
                att,
                slope,
            } => {
                let (n1, d) = (self.shape(*left)[0], self.shape(*left)[1]);
                let n2 = self.shape(*right)[0];
                let (l, r, a) = (
                    self.value(*left).data(),
                    self.value(*right).data(),
                    self.value(*att).data(),
                );
                let mut gl = vec![0.0; n1 * d];
                let mut gr = vec![0.0; n2 * d];
                let mut gatt = vec![0.0; d];
                for i in 0..n1 {
                    for j in 0..n2 {
                        let gij = gd[i * n2 + j];
                        if gij == 0.0 {
                            continue;
                        }
                        for c in 0..d {
                            let z = l[i * d + c] + r[j * d + c];
                            let (act, slope_c) = if z > 0.0 { (z, 1.0) } else { (slope * z, *slope) };
                            let dz = gij * a[c] * slope_c;
                            gl[i * d + c] += dz;
                            gr[j * d + c] += dz;
                            gatt[c] += gij * act;
                        }
                    }
                }
                acc(*left, &mut |g| axpy(g, &gl, 1.0));
                acc(*right, &mut |g| axpy(g, &gr, 1.0));
                acc(*att, &mut |g| axpy(g, &gatt, 1.0));
            }
        }
    }

    fn biaffine_backward(
        &self,
        head: Var,
        dep: Var,
        weight: Var,
        bias: Var,
        gd: &[f64],
        grads: &mut [Option<Tensor>],
    ) {
        let (nh, d1) = (self.shape(head)[0], self.shape(head)[1]);
        let (nd, d2) = (self.shape(dep)[0], self.shape(dep)[1]);
        let m = self.shape(weight)[1];
        let (h, d, w, b) = (
            self.value(head).data(),
            self.value(dep).data(),
            self.value(weight).data(),
            self.value(bias).data(),
        );
        let mut gh = vec![0.0; nh * d1];
        let mut gdep = vec![0.0; nd * d2];
        let mut gw = vec![0.0; d1 * m * d2];
        let mut gb = vec![0.0; d1 * m];
        let mut t = vec![0.0; nh * d2];
        let mut gt = vec![0.0; nh * d2];
        for r in 0..m {
            let wr = View::strided(w, r * d2, m * d2, 1);
            let g_r = View::strided(gd, r, nh * m, m);
            gemm(nh, d1, d2, View::rows(h, d1), wr, 0.0, ViewMut::rows(&mut t, d2));
            // d dep += G_r · t
            gemm(nd, nh, d2, g_r, View::rows(&t, d2), 1.0, ViewMut::rows(&mut gdep, d2));
            // d t = G_rᵀ · dep
            gemm(
                nh,
                nd,
                d2,
                View::strided(gd, r, m, nh * m),
                View::rows(d, d2),
                0.0,
                ViewMut::rows(&mut gt, d2),
            );
            // d head += d t · W_rᵀ
            gemm(
                nh,
                d2,
                d1,
                View::rows(&gt, d2),
                View::strided(w, r * d2, 1, m * d2),
                1.0,
                ViewMut::rows(&mut gh, d1),
            );
            // d W_r += headᵀ · d t
            gemm(
                d1,
                nh,
                d2,
                View::strided(h, 0, 1, d1),
                View::rows(&gt, d2),
                1.0,
                ViewMut::strided(&mut gw, r * d2, m * d2, 1),
            );
            for j in 0..nh {
                let colsum: f64 = (0..nd).map(|i| gd[(i * nh + j) * m + r]).sum();
                if colsum == 0.0 {
                    continue;
                }
                for a in 0..d1 {
                    gh[j * d1 + a] += colsum * b[a * m + r];
                    gb[a * m + r] += colsum * h[j * d1 + a];
                }
            }
        }
        for (v, g) in [(head, gh), (dep, gdep), (weight, gw), (bias, gb)] {
            if !self.nodes[v.0].needs_grad {
                continue;
            }
            let slot = grads[v.0].get_or_insert_with(|| Tensor::zeros(self.shape(v)));
            axpy(slot.data_mut(), &g, 1.0);
        }
    }
}

fn axpy(y: &mut [f64], x: &[f64], alpha: f64) {
    for (a, b) in y.iter_mut().zip(x) {
        *a += alpha * b;
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn log_softmax_slice(lane: &[f64], out: &mut Vec<f64>) {
    let max = lane.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + lane.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    out.extend(lane.iter().map(|x| x - lse));
}

pub(crate) fn softmax_last(t: &Tensor) -> Tensor {
    let mut out = Vec::with_capacity(t.len());
    for o in 0..t.outer() {
        let lane = t.lane(o);
        let max = lane.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        out.extend(lane.iter().map(|x| (x - max).exp()));
        let s: f64 = out[start..].iter().sum();
        out[start..].iter_mut().for_each(|x| *x /= s);
    }
    Tensor::from_parts(t.shape().to_vec(), out)
}

pub(crate) fn log_softmax_last(t: &Tensor) -> Tensor {
    let mut out = Vec::with_capacity(t.len());
    for o in 0..t.outer() {
        log_softmax_slice(t.lane(o), &mut out);
    }
    Tensor::from_parts(t.shape().to_vec(), out)
}

#[derive(Clone, Copy)]
struct View<'a> {
    data: &'a [f64],
    offset: usize,
    rs: usize,
    cs: usize,
}

impl<'a> View<'a> {
    fn rows(data: &'a [f64], cols: usize) -> Self {
        View {
            data,
            offset: 0,
            rs: cols,
            cs: 1,
        }
    }

    fn strided(data: &'a [f64], offset: usize, rs: usize, cs: usize) -> Self {
        View { data, offset, rs, cs }
    }

    fn check(&self, rows: usize, cols: usize) {
        if rows > 0 && cols > 0 {
            assert!(self.offset + (rows - 1) * self.rs + (cols - 1) * self.cs < self.data.len());
        }
    }
}

struct ViewMut<'a> {
    data: &'a mut [f64],
    offset: usize,
    rs: usize,
    cs: usize,
}

impl<'a> ViewMut<'a> {
    fn rows(data: &'a mut [f64], cols: usize) -> Self {
        ViewMut {
            data,
            offset: 0,
            rs: cols,
            cs: 1,
        }
    }

    fn strided(data: &'a mut [f64], offset: usize, rs: usize, cs: usize) -> Self {
        ViewMut { data, offset, rs, cs }
    }
}

/// `c = a · b + beta · c` with `a: m×k`, `b: k×n`, arbitrary strides.
fn gemm(m: usize, k: usize, n: usize, a: View, b: View, beta: f64, c: ViewMut) {
    if m == 0 || n == 0 {
        return;
    }
    a.check(m, k);
    b.check(k, n);
    assert!(c.offset + (m - 1) * c.rs + (n - 1) * c.cs < c.data.len());
    if k == 0 {
        for i in 0..m {
            for j in 0..n {
                c.data[c.offset + i * c.rs + j * c.cs] *= beta;
            }
        }
        return;
    }
    // SAFETY: every view was bounds-checked for its full extent above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr().add(a.offset),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr().add(b.offset),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.data.as_mut_ptr().add(c.offset),
            c.rs as isize,
            c.cs as isize,
        );
    }
}
