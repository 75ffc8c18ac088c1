//! Tape-based reverse-mode differentiation over [`Tensor`]s.
//!
//! Nodes are appended in evaluation order, so the tape is already a
//! topological order and [`Graph::backward`] walks it once in reverse.

use super::conv::{self, ConvGeom};
use super::{ParamId, ParamSet, Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Leaf,
    Param(ParamId),
    Conv {
        input: Var,
        weight: Var,
        bias: Var,
        geom: ConvGeom,
        cols: Vec<T>,
    },
    Dense {
        input: Var,
        weight: Var,
        bias: Var,
    },
    LeakyRelu {
        input: Var,
        slope: T,
    },
    Reshape(Var),
    SwapLast2(Var),
    SoftmaxCols(Var),
    LogSoftmaxCols(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale {
        input: Var,
        factor: T,
    },
    Shift(Var),
    Square(Var),
    Sqrt(Var),
    Exp(Var),
    Sum(Var),
    SumLast(Var),
    WeightedSum {
        input: Var,
        weights: Vec<T>,
    },
    Gather {
        input: Var,
        indices: Vec<usize>,
    },
    Rows {
        input: Var,
        start: usize,
    },
}

struct Node<T> {
    op: Op<T>,
    value: Option<Tensor<T>>,
    needs_grad: bool,
}

/// A single forward computation and its tape.
pub struct Graph<'p, T: Real> {
    params: Option<&'p ParamSet<T>>,
    track_params: bool,
    nodes: Vec<Node<T>>,
    param_vars: Vec<Option<Var>>,
}

/// Result of [`Graph::backward`].
pub struct Gradients<T> {
    params: Vec<Tensor<T>>,
    leaves: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient for every parameter of the graph's set, in set order.
    /// Unreachable parameters get zeros.
    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn param(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.index()]
    }

    pub fn into_params(self) -> Vec<Tensor<T>> {
        self.params
    }

    /// Gradient with respect to a leaf created by [`Graph::input_with_grad`].
    pub fn wrt(&self, leaf: Var) -> Option<&Tensor<T>> {
        self.leaves.get(leaf.0).and_then(Option::as_ref)
    }
}

impl<'p, T: Real> Default for Graph<'p, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p, T: Real> Graph<'p, T> {
    /// A graph without parameters (inputs and constants only).
    pub fn new() -> Self {
        Graph {
            params: None,
            track_params: false,
            nodes: Vec::new(),
            param_vars: Vec::new(),
        }
    }

    pub fn with_params(params: &'p ParamSet<T>) -> Self {
        Graph {
            params: Some(params),
            track_params: true,
            nodes: Vec::new(),
            param_vars: vec![None; params.len()],
        }
    }

    /// Parameters are readable but receive no gradient; backward then only
    /// produces input gradients, which skips the weight-gradient products.
    pub fn frozen(params: &'p ParamSet<T>) -> Self {
        Graph {
            track_params: false,
            ..Self::with_params(params)
        }
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value: Some(value),
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        let node = &self.nodes[v.0];
        match (&node.op, &node.value) {
            (Op::Param(id), _) => self.params.expect("param node without params").get(*id),
            (_, Some(t)) => t,
            (_, None) => unreachable!("node value released"),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    /// Constant input.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(Op::Leaf, t, false)
    }

    /// Input whose gradient is reported by [`Gradients::wrt`].
    pub fn input_with_grad(&mut self, t: Tensor<T>) -> Var {
        self.push(Op::Leaf, t, true)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.index()] {
            return v;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
            needs_grad: self.track_params,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.index()] = Some(v);
        v
    }

    /// 2D cross-correlation with zero "same" padding.
    /// `input` is `[N, C, H, W]`, `weight` is `[C', C, kh, kw]`, `bias` is `[C']`.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var, stride: usize) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(input), self.shape(weight), self.shape(bias));
        if xs.len() != 4 || ws.len() != 4 || ws[1] != xs[1] {
            return Err(Error::shape("conv2d", xs, ws));
        }
        if bs != [ws[0]] {
            return Err(Error::shape("conv2d bias", bs, &ws[..1]));
        }
        if stride == 0 {
            return Err(Error::invalid("conv2d stride must be positive"));
        }
        let geom = ConvGeom::same(xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], ws[3], stride);
        let out_shape = [geom.batch, geom.c_out, geom.out_h, geom.out_w];
        self.conv(input, weight, bias, geom, &out_shape)
    }

    /// 1D cross-correlation without padding: `[N, C, L]` -> `[N, C', L-k+1]`.
    /// `weight` is `[C', C, k]`.
    pub fn conv1d_valid(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(input), self.shape(weight), self.shape(bias));
        if xs.len() != 3 || ws.len() != 3 || ws[1] != xs[1] {
            return Err(Error::shape("conv1d", xs, ws));
        }
        if bs != [ws[0]] {
            return Err(Error::shape("conv1d bias", bs, &ws[..1]));
        }
        if xs[2] < ws[2] {
            return Err(Error::invalid(format!(
                "conv1d input length {} is shorter than kernel {}",
                xs[2], ws[2]
            )));
        }
        let geom = ConvGeom::valid_1d(xs[0], xs[1], xs[2], ws[0], ws[2]);
        let out_shape = [geom.batch, geom.c_out, geom.out_w];
        self.conv(input, weight, bias, geom, &out_shape)
    }

    fn conv(&mut self, input: Var, weight: Var, bias: Var, geom: ConvGeom, out_shape: &[usize]) -> Result<Var> {
        let (out, cols) = conv::forward(
            self.value(input).data(),
            self.value(weight).data(),
            self.value(bias).data(),
            &geom,
        );
        let needs = self.needs(input) || self.needs(weight) || self.needs(bias);
        let value = Tensor::new(out_shape, out)?;
        // Columns are only needed again for the weight gradient.
        let cols = if self.needs(weight) { cols } else { Vec::new() };
        Ok(self.push(
            Op::Conv {
                input,
                weight,
                bias,
                geom,
                cols,
            },
            value,
            needs,
        ))
    }

    /// `[N, F]` x `[F', F]^T + [F']`.
    pub fn dense(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(input), self.shape(weight), self.shape(bias));
        if xs.len() != 2 || ws.len() != 2 || ws[1] != xs[1] {
            return Err(Error::shape("dense", xs, ws));
        }
        if bs != [ws[0]] {
            return Err(Error::shape("dense bias", bs, &ws[..1]));
        }
        let (n, f_in, f_out) = (xs[0], xs[1], ws[0]);
        let mut out = vec![T::zero(); n * f_out];
        T::gemm(
            false,
            true,
            n,
            f_out,
            f_in,
            T::one(),
            self.value(input).data(),
            self.value(weight).data(),
            T::zero(),
            &mut out,
        );
        let b = self.value(bias).data();
        for row in out.chunks_mut(f_out) {
            for (o, &bv) in row.iter_mut().zip(b) {
                *o += bv;
            }
        }
        let needs = self.needs(input) || self.needs(weight) || self.needs(bias);
        let value = Tensor::new(&[n, f_out], out)?;
        Ok(self.push(Op::Dense { input, weight, bias }, value, needs))
    }

    pub fn leaky_relu(&mut self, input: Var, slope: f64) -> Var {
        let slope = T::of(slope);
        let x = self.value(input);
        let data = x
            .data()
            .iter()
            .map(|&v| if v > T::zero() { v } else { v * slope })
            .collect();
        let value = Tensor::new(x.shape(), data).expect("same shape");
        let needs = self.needs(input);
        self.push(Op::LeakyRelu { input, slope }, value, needs)
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(input).clone().reshaped(shape)?;
        let needs = self.needs(input);
        Ok(self.push(Op::Reshape(input), value, needs))
    }

    /// `[..., A, B]` -> `[..., B, A]`.
    pub fn swap_last2(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        let (batch, a, b) = split_last2(x.shape(), "swap_last2")?;
        let src = x.data();
        let mut out = vec![T::zero(); src.len()];
        for n in 0..batch {
            let s = &src[n * a * b..][..a * b];
            let d = &mut out[n * a * b..][..a * b];
            for i in 0..a {
                for j in 0..b {
                    d[j * a + i] = s[i * b + j];
                }
            }
        }
        let mut shape = x.shape().to_vec();
        let r = shape.len();
        shape.swap(r - 1, r - 2);
        let value = Tensor::new(&shape, out)?;
        let needs = self.needs(input);
        Ok(self.push(Op::SwapLast2(input), value, needs))
    }

    /// Softmax over the second-to-last axis of `[..., L, K]`: each of the
    /// `K` columns becomes a distribution over `L` entries.
    pub fn softmax_columns(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        let (batch, l, k) = split_last2(x.shape(), "softmax_columns")?;
        let mut out = x.data().to_vec();
        for_each_column(&mut out, batch, l, k, |col| {
            let max = col.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            let mut total = T::zero();
            for v in col.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in col.iter_mut() {
                *v = *v / total;
            }
        });
        let value = Tensor::new(x.shape(), out)?;
        let needs = self.needs(input);
        Ok(self.push(Op::SoftmaxCols(input), value, needs))
    }

    /// Column-wise log-softmax with the same layout as [`Graph::softmax_columns`].
    pub fn log_softmax_columns(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        let (batch, l, k) = split_last2(x.shape(), "log_softmax_columns")?;
        let mut out = x.data().to_vec();
        for_each_column(&mut out, batch, l, k, |col| {
            let max = col.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            let total: T = col.iter().map(|&v| (v - max).exp()).sum();
            let log_norm = max + total.ln();
            for v in col.iter_mut() {
                *v -= log_norm;
            }
        });
        let value = Tensor::new(x.shape(), out)?;
        let needs = self.needs(input);
        Ok(self.push(Op::LogSoftmaxCols(input), value, needs))
    }

    fn zip(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::shape(name, x.shape(), y.shape()));
        }
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        Tensor::new(x.shape(), data)
    }

    fn map(&self, input: Var, f: impl Fn(T) -> T) -> Tensor<T> {
        let x = self.value(input);
        Tensor::new(x.shape(), x.data().iter().map(|&v| f(v)).collect()).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip(a, b, "add", |p, q| p + q)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Add(a, b), value, needs))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip(a, b, "sub", |p, q| p - q)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Sub(a, b), value, needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip(a, b, "mul", |p, q| p * q)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Mul(a, b), value, needs))
    }

    pub fn scale(&mut self, input: Var, factor: f64) -> Var {
        let factor = T::of(factor);
        let value = self.map(input, |v| v * factor);
        let needs = self.needs(input);
        self.push(Op::Scale { input, factor }, value, needs)
    }

    /// Add a constant to every element.
    pub fn shift(&mut self, input: Var, offset: f64) -> Var {
        let offset = T::of(offset);
        let value = self.map(input, |v| v + offset);
        let needs = self.needs(input);
        self.push(Op::Shift(input), value, needs)
    }

    pub fn square(&mut self, input: Var) -> Var {
        let value = self.map(input, |v| v * v);
        let needs = self.needs(input);
        self.push(Op::Square(input), value, needs)
    }

    pub fn sqrt(&mut self, input: Var) -> Var {
        let value = self.map(input, |v| v.sqrt());
        let needs = self.needs(input);
        self.push(Op::Sqrt(input), value, needs)
    }

    pub fn exp(&mut self, input: Var) -> Var {
        let value = self.map(input, |v| v.exp());
        let needs = self.needs(input);
        self.push(Op::Exp(input), value, needs)
    }

    /// Sum of all elements, shape `[1]`.
    pub fn sum(&mut self, input: Var) -> Var {
        let total = self.value(input).data().iter().copied().sum();
        let needs = self.needs(input);
        self.push(Op::Sum(input), Tensor::scalar(total), needs)
    }

    /// Sum over the last axis.
    pub fn sum_last(&mut self, input: Var) -> Var {
        let x = self.value(input);
        let shape = x.shape();
        let last = *shape.last().expect("non-empty shape");
        let data: Vec<T> = x.data().chunks(last).map(|c| c.iter().copied().sum()).collect();
        let out_shape = if shape.len() > 1 {
            shape[..shape.len() - 1].to_vec()
        } else {
            vec![1]
        };
        let value = Tensor::new(&out_shape, data).expect("consistent shape");
        let needs = self.needs(input);
        self.push(Op::SumLast(input), value, needs)
    }

    /// `sum_i weights[i] * input[i]`, shape `[1]`.
    pub fn weighted_sum(&mut self, input: Var, weights: &[f64]) -> Result<Var> {
        let x = self.value(input);
        if x.len() != weights.len() {
            return Err(Error::shape("weighted_sum", x.shape(), &[weights.len()]));
        }
        let weights: Vec<T> = weights.iter().map(|&w| T::of(w)).collect();
        let total = x.data().iter().zip(&weights).map(|(&v, &w)| v * w).sum();
        let needs = self.needs(input);
        Ok(self.push(Op::WeightedSum { input, weights }, Tensor::scalar(total), needs))
    }

    /// Pick elements by flat index; result has shape `[indices.len()]`.
    pub fn gather(&mut self, input: Var, indices: &[usize]) -> Result<Var> {
        let x = self.value(input);
        if indices.is_empty() {
            return Err(Error::invalid("gather needs at least one index"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= x.len()) {
            return Err(Error::invalid(format!("gather index {bad} out of range for {:?}", x.shape())));
        }
        let data = indices.iter().map(|&i| x.data()[i]).collect();
        let value = Tensor::new(&[indices.len()], data)?;
        let needs = self.needs(input);
        Ok(self.push(
            Op::Gather {
                input,
                indices: indices.to_vec(),
            },
            value,
            needs,
        ))
    }

    /// Rows `start..start+count` along the leading axis.
    pub fn rows(&mut self, input: Var, start: usize, count: usize) -> Result<Var> {
        let x = self.value(input);
        let shape = x.shape();
        if count == 0 || start + count > shape[0] {
            return Err(Error::invalid(format!(
                "rows {start}..{} out of range for {shape:?}",
                start + count
            )));
        }
        let row: usize = shape[1..].iter().product();
        let data = x.data()[start * row..(start + count) * row].to_vec();
        let mut out_shape = shape.to_vec();
        out_shape[0] = count;
        let value = Tensor::new(&out_shape, data)?;
        let needs = self.needs(input);
        Ok(self.push(Op::Rows { input, start }, value, needs))
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        if !lv.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(lv.shape(), T::one()));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad || matches!(node.op, Op::Leaf | Op::Param(_)) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g, &mut grads)?;
        }

        let n_params = self.params.map_or(0, ParamSet::len);
        let mut params = Vec::with_capacity(n_params);
        for i in 0..n_params {
            let shape = self.params.expect("params").values()[i].shape();
            let g = self.param_vars[i]
                .and_then(|v| grads[v.0].take())
                .unwrap_or_else(|| Tensor::zeros(shape));
            if !g.is_finite() {
                let name = self.params.expect("params").name(ParamId(i));
                return Err(Error::NonFinite(format!("gradient of parameter {name}")));
            }
            params.push(g);
        }
        let leaves = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, n)| if matches!(n.op, Op::Leaf) { g } else { None })
            .collect();
        Ok(Gradients { params, leaves })
    }

    fn propagate(&self, idx: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<()> {
        let out = self.value(Var(idx));
        let mut send = |v: Var, data: Vec<T>| {
            if !self.needs(v) {
                return;
            }
            let t = Tensor::new(self.shape(v), data).expect("gradient shape");
            match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&t),
                slot @ None => *slot = Some(t),
            }
        };
        let gd = g.data();
        match &self.nodes[idx].op {
            Op::Leaf | Op::Param(_) => {}
            Op::Conv {
                input,
                weight,
                bias,
                geom,
                cols,
            } => {
                let want = [self.needs(*input), self.needs(*weight), self.needs(*bias)];
                let cg = conv::backward(gd, cols, self.value(*weight).data(), geom, want);
                if let Some(dx) = cg.input {
                    send(*input, dx);
                }
                if let Some(dw) = cg.weight {
                    send(*weight, dw);
                }
                if let Some(db) = cg.bias {
                    send(*bias, db);
                }
            }
            Op::Dense { input, weight, bias } => {
                let x = self.value(*input);
                let w = self.value(*weight);
                let (n, f_in) = (x.shape()[0], x.shape()[1]);
                let f_out = w.shape()[0];
                if self.needs(*input) {
                    let mut dx = vec![T::zero(); n * f_in];
                    T::gemm(false, false, n, f_in, f_out, T::one(), gd, w.data(), T::zero(), &mut dx);
                    send(*input, dx);
                }
                if self.needs(*weight) {
                    let mut dw = vec![T::zero(); f_out * f_in];
                    T::gemm(true, false, f_out, f_in, n, T::one(), gd, x.data(), T::zero(), &mut dw);
                    send(*weight, dw);
                }
                if self.needs(*bias) {
                    let mut db = vec![T::zero(); f_out];
                    for row in gd.chunks(f_out) {
                        for (d, &v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    send(*bias, db);
                }
            }
            Op::LeakyRelu { input, slope } => {
                let x = self.value(*input).data();
                let dx = x
                    .iter()
                    .zip(gd)
                    .map(|(&v, &gv)| if v > T::zero() { gv } else { gv * *slope })
                    .collect();
                send(*input, dx);
            }
            Op::Reshape(input) => send(*input, gd.to_vec()),
            Op::SwapLast2(input) => {
                // Swapping back is the adjoint.
                let (batch, b, a) = split_last2(out.shape(), "swap_last2")?;
                let mut dx = vec![T::zero(); gd.len()];
                for n in 0..batch {
                    let s = &gd[n * a * b..][..a * b];
                    let d = &mut dx[n * a * b..][..a * b];
                    for j in 0..b {
                        for i in 0..a {
                            d[i * b + j] = s[j * a + i];
                        }
                    }
                }
                send(*input, dx);
            }
            Op::SoftmaxCols(input) => {
                let (batch, l, k) = split_last2(out.shape(), "softmax_columns")?;
                let q = out.data();
                let mut dx = vec![T::zero(); q.len()];
                for n in 0..batch {
                    for c in 0..k {
                        let at = |r: usize| n * l * k + r * k + c;
                        let dot: T = (0..l).map(|r| gd[at(r)] * q[at(r)]).sum();
                        for r in 0..l {
                            dx[at(r)] = q[at(r)] * (gd[at(r)] - dot);
                        }
                    }
                }
                send(*input, dx);
            }
            Op::LogSoftmaxCols(input) => {
                let (batch, l, k) = split_last2(out.shape(), "log_softmax_columns")?;
                let lq = out.data();
                let mut dx = vec![T::zero(); lq.len()];
                for n in 0..batch {
                    for c in 0..k {
                        let at = |r: usize| n * l * k + r * k + c;
                        let total: T = (0..l).map(|r| gd[at(r)]).sum();
                        for r in 0..l {
                            dx[at(r)] = gd[at(r)] - lq[at(r)].exp() * total;
                        }
                    }
                }
                send(*input, dx);
            }
            Op::Add(a, b) => {
                send(*a, gd.to_vec());
                send(*b, gd.to_vec());
            }
            Op::Sub(a, b) => {
                send(*a, gd.to_vec());
                send(*b, gd.iter().map(|&v| -v).collect());
            }
            Op::Mul(a, b) => {
                let (x, y) = (self.value(*a).data(), self.value(*b).data());
                send(*a, gd.iter().zip(y).map(|(&gv, &yv)| gv * yv).collect());
                send(*b, gd.iter().zip(x).map(|(&gv, &xv)| gv * xv).collect());
            }
            Op::Scale { input, factor } => send(*input, gd.iter().map(|&v| v * *factor).collect()),
            Op::Shift(input) => send(*input, gd.to_vec()),
            Op::Square(input) => {
                let x = self.value(*input).data();
                let two = T::of(2.0);
                send(*input, gd.iter().zip(x).map(|(&gv, &xv)| two * xv * gv).collect());
            }
            Op::Sqrt(input) => {
                let two = T::of(2.0);
                send(
                    *input,
                    gd.iter().zip(out.data()).map(|(&gv, &s)| gv / (two * s)).collect(),
                );
            }
            Op::Exp(input) => {
                send(*input, gd.iter().zip(out.data()).map(|(&gv, &e)| gv * e).collect());
            }
            Op::Sum(input) => {
                let n = self.value(*input).len();
                send(*input, vec![gd[0]; n]);
            }
            Op::SumLast(input) => {
                let x = self.value(*input);
                let last = *x.shape().last().expect("non-empty shape");
                let dx = gd.iter().flat_map(|&v| std::iter::repeat_n(v, last)).collect();
                send(*input, dx);
            }
            Op::WeightedSum { input, weights } => {
                send(*input, weights.iter().map(|&w| w * gd[0]).collect());
            }
            Op::Gather { input, indices } => {
                let mut dx = vec![T::zero(); self.value(*input).len()];
                for (&i, &v) in indices.iter().zip(gd) {
                    dx[i] += v;
                }
                send(*input, dx);
            }
            Op::Rows { input, start } => {
                let x = self.value(*input);
                let row: usize = x.shape()[1..].iter().product();
                let mut dx = vec![T::zero(); x.len()];
                dx[start * row..start * row + gd.len()].copy_from_slice(gd);
                send(*input, dx);
            }
        }
        Ok(())
    }
}

fn split_last2(shape: &[usize], op: &'static str) -> Result<(usize, usize, usize)> {
    if shape.len() < 2 {
        return Err(Error::shape(op, shape, &[0, 0]));
    }
    let r = shape.len();
    let batch = shape[..r - 2].iter().product();
    Ok((batch, shape[r - 2], shape[r - 1]))
}

/// Apply `f` to every length-`l` column of a `[batch, l, k]` buffer.
fn for_each_column<T: Real>(data: &mut [T], batch: usize, l: usize, k: usize, mut f: impl FnMut(&mut [T])) {
    let mut col = vec![T::zero(); l];
    for n in 0..batch {
        let block = &mut data[n * l * k..][..l * k];
        for c in 0..k {
            for r in 0..l {
                col[r] = block[r * k + c];
            }
            f(&mut col);
            for r in 0..l {
                block[r * k + c] = col[r];
            }
        }
    }
}
