//! Reverse-mode tape over whole-tensor operations.
//!
//! A [`Tape`] borrows the parameter store read-only; `backward` returns a
//! flat gradient buffer laid out like the store, so independent samples can
//! be differentiated concurrently and summed afterwards.

use std::rc::Rc;

use super::params::{ParamId, ParamStore};
use super::tensor::{gemm, MatRef, Tensor};
use crate::error::{BenoError, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Const,
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulT(Var, Var),
    Linear { x: Var, w: Var, b: Option<Var> },
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Silu(Var),
    SoftmaxRows(Var),
    LayerNorm { x: Var, gain: Var, bias: Var, mean: Vec<f64>, rstd: Vec<f64> },
    MeanRows(Var),
    Gather(Var, Rc<[usize]>),
    ScatterAdd(Var, Rc<[usize]>),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Mse(Var, Rc<[f64]>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
    poisoned: Option<&'static str>,
}

fn mismatch(op: &str, a: [usize; 2], b: [usize; 2]) -> BenoError {
    BenoError::ShapeMismatch(format!("{op}: {}x{} vs {}x{}", a[0], a[1], b[0], b[1]))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Tape<'p> {
        Tape {
            params,
            nodes: Vec::new(),
            param_vars: vec![None; params.specs().len()],
            poisoned: None,
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str) -> Var {
        if self.poisoned.is_none() && !value.is_finite() {
            self.poisoned = Some(name);
        }
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Fails if any recorded value was NaN or infinite.
    pub fn check_finite(&self) -> Result<()> {
        match self.poisoned {
            Some(op) => Err(BenoError::NonFinite(op.to_string())),
            None => Ok(()),
        }
    }

    /// Constant input (no gradient).
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Const, "constant")
    }

    /// Input whose gradient is reported by [`Gradients::input`].
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input, "input")
    }

    /// Parameter leaf; repeated calls reuse one node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let spec = self.params.spec(id);
        let t = Tensor::new(spec.rows, spec.cols, self.params.value(id).to_vec())
            .expect("parameter layout is consistent");
        let v = self.push(t, Op::Param(id), "param");
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa[1] != sb[0] {
            return Err(mismatch("matmul", sa, sb));
        }
        let mut out = Tensor::zeros(sa[0], sb[1]);
        gemm(
            MatRef::new(sa[0], sa[1], self.value(a).data()),
            MatRef::new(sb[0], sb[1], self.value(b).data()),
            0.0,
            out.data_mut(),
        );
        Ok(self.push(out, Op::MatMul(a, b), "matmul"))
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa[1] != sb[1] {
            return Err(mismatch("matmul_t", sa, sb));
        }
        let mut out = Tensor::zeros(sa[0], sb[0]);
        gemm(
            MatRef::new(sa[0], sa[1], self.value(a).data()),
            MatRef::new(sb[0], sb[1], self.value(b).data()).t(),
            0.0,
            out.data_mut(),
        );
        Ok(self.push(out, Op::MatMulT(a, b), "matmul_t"))
    }

    /// `x·W + b`
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (sx, sw) = (self.shape(x), self.shape(w));
        if sx[1] != sw[0] {
            return Err(mismatch("linear", sx, sw));
        }
        let mut out = Tensor::zeros(sx[0], sw[1]);
        if let Some(b) = b {
            let sb = self.shape(b);
            if sb != [1, sw[1]] {
                return Err(mismatch("linear bias", sb, [1, sw[1]]));
            }
            let bias = self.value(b).data();
            for row in out.data_mut().chunks_mut(sw[1]) {
                row.copy_from_slice(bias);
            }
        }
        gemm(
            MatRef::new(sx[0], sx[1], self.value(x).data()),
            MatRef::new(sw[0], sw[1], self.value(w).data()),
            if b.is_some() { 1.0 } else { 0.0 },
            out.data_mut(),
        );
        Ok(self.push(out, Op::Linear { x, w, b }, "linear"))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(mismatch("add", sa, sb));
        }
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x + y).collect();
        let t = Tensor::new(sa[0], sa[1], data)?;
        Ok(self.push(t, Op::Add(a, b), "add"))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(mismatch("sub", sa, sb));
        }
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x - y).collect();
        let t = Tensor::new(sa[0], sa[1], data)?;
        Ok(self.push(t, Op::Sub(a, b), "sub"))
    }

    /// Adds a `1 × m` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (sa, sr) = (self.shape(a), self.shape(row));
        if sr != [1, sa[1]] {
            return Err(mismatch("add_row", sa, sr));
        }
        let mut out = self.value(a).clone();
        let r = self.value(row).data();
        for chunk in out.data_mut().chunks_mut(sa[1]) {
            for (o, x) in chunk.iter_mut().zip(r) {
                *o += x;
            }
        }
        Ok(self.push(out, Op::AddRow(a, row), "add_row"))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let mut out = self.value(a).clone();
        out.data_mut().iter_mut().for_each(|v| *v *= s);
        self.push(out, Op::Scale(a, s), "scale")
    }

    /// `x·σ(x)`
    pub fn silu(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        out.data_mut().iter_mut().for_each(|v| *v *= sigmoid(*v));
        self.push(out, Op::Silu(a), "silu")
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        let cols = out.cols();
        if cols > 0 {
            for row in out.data_mut().chunks_mut(cols) {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                row.iter_mut().for_each(|v| *v /= sum);
            }
        }
        self.push(out, Op::SoftmaxRows(a), "softmax_rows")
    }

    /// Per-row standardization (`ε = 1e-5`) followed by `gain ⊙ · + bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let sx = self.shape(x);
        for p in [gain, bias] {
            if self.shape(p) != [1, sx[1]] {
                return Err(mismatch("layer_norm", sx, self.shape(p)));
            }
        }
        let d = sx[1];
        let mut out = self.value(x).clone();
        let g = self.value(gain).data().to_vec();
        let b = self.value(bias).data().to_vec();
        let mut means = Vec::with_capacity(sx[0]);
        let mut rstds = Vec::with_capacity(sx[0]);
        for row in out.data_mut().chunks_mut(d) {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let rstd = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for (k, v) in row.iter_mut().enumerate() {
                *v = (*v - mean) * rstd * g[k] + b[k];
            }
            means.push(mean);
            rstds.push(rstd);
        }
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                mean: means,
                rstd: rstds,
            },
            "layer_norm",
        ))
    }

    /// Column means, `1 × m`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let (n, m) = (t.rows(), t.cols());
        let mut out = Tensor::zeros(1, m);
        for row in t.data().chunks(m.max(1)) {
            for (o, v) in out.data_mut().iter_mut().zip(row) {
                *o += v;
            }
        }
        let inv = 1.0 / n.max(1) as f64;
        out.data_mut().iter_mut().for_each(|v| *v *= inv);
        self.push(out, Op::MeanRows(a), "mean_rows")
    }

    /// `out[r] = a[index[r]]`
    pub fn gather(&mut self, a: Var, index: Rc<[usize]>) -> Result<Var> {
        let t = self.value(a);
        let (n, m) = (t.rows(), t.cols());
        if let Some(&bad) = index.iter().find(|&&i| i >= n) {
            return Err(BenoError::ShapeMismatch(format!("gather index {bad} out of {n} rows")));
        }
        let mut data = Vec::with_capacity(index.len() * m);
        for &i in index.iter() {
            data.extend_from_slice(t.row(i));
        }
        let out = Tensor::new(index.len(), m, data)?;
        Ok(self.push(out, Op::Gather(a, index), "gather"))
    }

    /// `out[index[r]] += a[r]`, summed in row order, output has `rows` rows.
    pub fn scatter_add(&mut self, a: Var, index: Rc<[usize]>, rows: usize) -> Result<Var> {
        let t = self.value(a);
        if index.len() != t.rows() {
            return Err(BenoError::ShapeMismatch(format!(
                "scatter_add: {} indices for {} rows",
                index.len(),
                t.rows()
            )));
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= rows) {
            return Err(BenoError::ShapeMismatch(format!("scatter index {bad} out of {rows} rows")));
        }
        let m = t.cols();
        let mut out = Tensor::zeros(rows, m);
        for (r, &i) in index.iter().enumerate() {
            let src = t.row(r);
            for (o, v) in out.data_mut()[i * m..(i + 1) * m].iter_mut().zip(src) {
                *o += v;
            }
        }
        Ok(self.push(out, Op::ScatterAdd(a, index), "scatter_add"))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.shape(parts[0])[0];
        let mut cols = 0;
        for &p in parts {
            let s = self.shape(p);
            if s[0] != rows {
                return Err(mismatch("concat_cols", [rows, cols], s));
            }
            cols += s[1];
        }
        let mut out = Tensor::zeros(rows, cols);
        let mut at = 0;
        for &p in parts {
            let t = &self.nodes[p.0].value;
            let w = t.cols();
            for r in 0..rows {
                out.data_mut()[r * cols + at..r * cols + at + w].copy_from_slice(t.row(r));
            }
            at += w;
        }
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), "concat_cols"))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(a);
        if start + len > s[1] {
            return Err(mismatch("slice_cols", s, [s[0], start + len]));
        }
        let t = self.value(a);
        let mut data = Vec::with_capacity(s[0] * len);
        for r in 0..s[0] {
            data.extend_from_slice(&t.row(r)[start..start + len]);
        }
        let out = Tensor::new(s[0], len, data)?;
        Ok(self.push(out, Op::SliceCols(a, start), "slice_cols"))
    }

    /// Mean squared error against a fixed target, `1 × 1`.
    pub fn mse(&mut self, pred: Var, target: Rc<[f64]>) -> Result<Var> {
        let p = self.value(pred);
        if p.len() != target.len() {
            return Err(BenoError::ShapeMismatch(format!(
                "mse: {} predictions for {} targets",
                p.len(),
                target.len()
            )));
        }
        let n = p.len().max(1) as f64;
        let loss = p.data().iter().zip(target.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
        Ok(self.push(Tensor::filled(1, 1, loss), Op::Mse(pred, target), "mse"))
    }

    /// Reverse sweep from a `1 × 1` output.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        self.check_finite()?;
        if self.shape(loss) != [1, 1] {
            return Err(BenoError::ShapeMismatch("backward needs a scalar output".into()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        let mut param_grad = vec![0.0; self.params.len()];

        fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
            grads[v.0].get_or_insert_with(|| vec![0.0; len])
        }

        for idx in (0..=loss.0).rev() {
            let Some(gy) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let [rows, cols] = node.value.shape();
            match &node.op {
                Op::Const => {}
                Op::Input => {
                    grads[idx] = Some(gy);
                }
                Op::Param(id) => {
                    let off = self.params.spec(*id).offset;
                    for (p, g) in param_grad[off..off + gy.len()].iter_mut().zip(&gy) {
                        *p += g;
                    }
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (n, k, m) = (ta.rows(), ta.cols(), tb.cols());
                    let gya = MatRef::new(n, m, &gy);
                    let ga = acc(&mut grads, *a, n * k);
                    gemm(gya, MatRef::new(k, m, tb.data()).t(), 1.0, ga);
                    let gb = acc(&mut grads, *b, k * m);
                    gemm(MatRef::new(n, k, ta.data()).t(), gya, 1.0, gb);
                }
                Op::MatMulT(a, b) => {
                    // y = a bᵀ: da = gy b, db = gyᵀ a
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (n, k, m) = (ta.rows(), ta.cols(), tb.rows());
                    let gya = MatRef::new(n, m, &gy);
                    let ga = acc(&mut grads, *a, n * k);
                    gemm(gya, MatRef::new(m, k, tb.data()), 1.0, ga);
                    let gb = acc(&mut grads, *b, m * k);
                    gemm(gya.t(), MatRef::new(n, k, ta.data()), 1.0, gb);
                }
                Op::Linear { x, w, b } => {
                    let (tx, tw) = (self.value(*x), self.value(*w));
                    let (n, k, m) = (tx.rows(), tx.cols(), tw.cols());
                    let gya = MatRef::new(n, m, &gy);
                    if !matches!(self.nodes[x.0].op, Op::Const) {
                        let gx = acc(&mut grads, *x, n * k);
                        gemm(gya, MatRef::new(k, m, tw.data()).t(), 1.0, gx);
                    }
                    let gw = acc(&mut grads, *w, k * m);
                    gemm(MatRef::new(n, k, tx.data()).t(), gya, 1.0, gw);
                    if let Some(b) = b {
                        let gb = acc(&mut grads, *b, m);
                        for row in gy.chunks(m) {
                            for (o, g) in gb.iter_mut().zip(row) {
                                *o += g;
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    for v in [*a, *b] {
                        let g = acc(&mut grads, v, gy.len());
                        g.iter_mut().zip(&gy).for_each(|(o, x)| *o += x);
                    }
                }
                Op::Sub(a, b) => {
                    let g = acc(&mut grads, *a, gy.len());
                    g.iter_mut().zip(&gy).for_each(|(o, x)| *o += x);
                    let g = acc(&mut grads, *b, gy.len());
                    g.iter_mut().zip(&gy).for_each(|(o, x)| *o -= x);
                }
                Op::AddRow(a, r) => {
                    let g = acc(&mut grads, *a, gy.len());
                    g.iter_mut().zip(&gy).for_each(|(o, x)| *o += x);
                    let gr = acc(&mut grads, *r, cols);
                    for row in gy.chunks(cols) {
                        gr.iter_mut().zip(row).for_each(|(o, x)| *o += x);
                    }
                }
                Op::Scale(a, s) => {
                    let g = acc(&mut grads, *a, gy.len());
                    g.iter_mut().zip(&gy).for_each(|(o, x)| *o += s * x);
                }
                Op::Silu(a) => {
                    let x = self.value(*a).data();
                    let g = acc(&mut grads, *a, gy.len());
                    for ((o, &xi), gi) in g.iter_mut().zip(x).zip(&gy) {
                        let s = sigmoid(xi);
                        *o += gi * s * (1.0 + xi * (1.0 - s));
                    }
                }
                Op::SoftmaxRows(a) => {
                    let y = node.value.data();
                    let g = acc(&mut grads, *a, gy.len());
                    for r in 0..rows {
                        let yr = &y[r * cols..(r + 1) * cols];
                        let gr = &gy[r * cols..(r + 1) * cols];
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for k in 0..cols {
                            g[r * cols + k] += yr[k] * (gr[k] - dot);
                        }
                    }
                }
                Op::LayerNorm { x, gain, bias, mean, rstd } => {
                    let xv = self.value(*x).data();
                    let gv = self.value(*gain).data().to_vec();
                    let d = cols as f64;
                    let mut ggain = vec![0.0; cols];
                    let mut gbias = vec![0.0; cols];
                    let mut gx = vec![0.0; gy.len()];
                    for r in 0..rows {
                        let xr = &xv[r * cols..(r + 1) * cols];
                        let gr = &gy[r * cols..(r + 1) * cols];
                        let (mu, rs) = (mean[r], rstd[r]);
                        let mut sum_g = 0.0;
                        let mut sum_gx = 0.0;
                        for k in 0..cols {
                            let xhat = (xr[k] - mu) * rs;
                            ggain[k] += gr[k] * xhat;
                            gbias[k] += gr[k];
                            let gh = gr[k] * gv[k];
                            sum_g += gh;
                            sum_gx += gh * xhat;
                        }
                        for k in 0..cols {
                            let xhat = (xr[k] - mu) * rs;
                            let gh = gr[k] * gv[k];
                            gx[r * cols + k] = rs * (gh - sum_g / d - xhat * sum_gx / d);
                        }
                    }
                    let g = acc(&mut grads, *x, gy.len());
                    g.iter_mut().zip(&gx).for_each(|(o, v)| *o += v);
                    let g = acc(&mut grads, *gain, cols);
                    g.iter_mut().zip(&ggain).for_each(|(o, v)| *o += v);
                    let g = acc(&mut grads, *bias, cols);
                    g.iter_mut().zip(&gbias).for_each(|(o, v)| *o += v);
                }
                Op::MeanRows(a) => {
                    let [n, m] = self.shape(*a);
                    let inv = 1.0 / n.max(1) as f64;
                    let g = acc(&mut grads, *a, n * m);
                    for row in g.chunks_mut(m.max(1)) {
                        row.iter_mut().zip(&gy).for_each(|(o, x)| *o += x * inv);
                    }
                }
                Op::Gather(a, index) => {
                    let [n, m] = self.shape(*a);
                    let g = acc(&mut grads, *a, n * m);
                    for (r, &i) in index.iter().enumerate() {
                        for (o, x) in g[i * m..(i + 1) * m].iter_mut().zip(&gy[r * m..(r + 1) * m]) {
                            *o += x;
                        }
                    }
                }
                Op::ScatterAdd(a, index) => {
                    let [n, m] = self.shape(*a);
                    let g = acc(&mut grads, *a, n * m);
                    for (r, &i) in index.iter().enumerate() {
                        for (o, x) in g[r * m..(r + 1) * m].iter_mut().zip(&gy[i * m..(i + 1) * m]) {
                            *o += x;
                        }
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let [n, w] = self.shape(p);
                        let g = acc(&mut grads, p, n * w);
                        for r in 0..n {
                            for k in 0..w {
                                g[r * w + k] += gy[r * cols + at + k];
                            }
                        }
                        at += w;
                    }
                }
                Op::SliceCols(a, start) => {
                    let [n, m] = self.shape(*a);
                    let g = acc(&mut grads, *a, n * m);
                    for r in 0..n {
                        for k in 0..cols {
                            g[r * m + start + k] += gy[r * cols + k];
                        }
                    }
                }
                Op::Mse(p, target) => {
                    let pv = self.value(*p).data();
                    let scale = 2.0 * gy[0] / pv.len().max(1) as f64;
                    let g = acc(&mut grads, *p, pv.len());
                    for ((o, a), b) in g.iter_mut().zip(pv).zip(target.iter()) {
                        *o += scale * (a - b);
                    }
                }
            }
        }
        let inputs = grads
            .into_iter()
            .enumerate()
            .filter(|(i, _)| matches!(self.nodes[*i].op, Op::Input))
            .map(|(i, g)| (Var(i), g.unwrap_or_else(|| vec![0.0; self.nodes[i].value.len()])))
            .collect();
        Ok(Gradients {
            params: param_grad,
            inputs,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Gradients {
    /// Flat, laid out like the parameter store.
    pub params: Vec<f64>,
    inputs: Vec<(Var, Vec<f64>)>,
}

impl Gradients {
    pub fn input(&self, v: Var) -> Option<&[f64]> {
        self.inputs.iter().find(|(k, _)| *k == v).map(|(_, g)| g.as_slice())
    }
}
