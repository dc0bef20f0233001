//! Tape-based reverse-mode differentiation. Every operation records its
//! inputs and whatever it needs for the backward pass; `backward` walks the
//! tape from the end.

use super::tensor::{mm, mm_nt, mm_tn, softmax_in_place, Tensor};
use super::NnError;

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

const LN_EPS: f64 = 1e-5;

enum Op {
    Leaf,
    MatMul { a: usize, b: usize },
    Bmm { a: usize, b: usize },
    TransposeLast2 { x: usize },
    AddBias { x: usize, b: usize },
    Add { a: usize, b: usize },
    AddBroadcast { x: usize, p: usize },
    Scale { x: usize, s: f64 },
    Relu { x: usize },
    Softmax { x: usize },
    LayerNorm { x: usize, gamma: usize, beta: usize, xhat: Vec<f64>, rstd: Vec<f64> },
    Embedding { table: usize, ids: Vec<usize> },
    Conv1d { x: usize, w: usize, b: usize },
    MaxPool1d { x: usize, argmax: Vec<usize> },
    MeanPool { x: usize },
    Reshape { x: usize },
    SplitHeads { x: usize, heads: usize },
    MergeHeads { x: usize, heads: usize },
    SoftmaxCrossEntropy { logits: usize, labels: Vec<usize>, probs: Vec<f64> },
    WeightedSum { x: usize, w: Vec<f64> },
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to every node that reached it.
pub struct Grads(Vec<Option<Vec<f64>>>);

impl Grads {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.0[v.0].as_deref()
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<f64>> {
        self.0[v.0].take()
    }
}

fn shape_err(msg: impl Into<String>) -> NnError {
    NnError::Shape(msg.into())
}

fn acc(grads: &mut [Option<Vec<f64>>], i: usize, g: Vec<f64>) {
    match &mut grads[i] {
        Some(existing) => {
            for (e, v) in existing.iter_mut().zip(g) {
                *e += v;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    /// `x[..., k] · w[k, m]`, applied to every row of `x`.
    pub fn matmul(&mut self, x: Var, w: Var) -> Result<Var, NnError> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        let k = *xs.last().ok_or_else(|| shape_err("matmul on a scalar"))?;
        if ws.len() != 2 || ws[0] != k {
            return Err(shape_err(format!("matmul {xs:?} · {ws:?}")));
        }
        let m = ws[1];
        let r = self.value(x).len() / k.max(1);
        let data = mm(&self.value(x).data, &self.value(w).data, r, k, m);
        let mut shape = xs;
        *shape.last_mut().unwrap() = m;
        Ok(self.push(Tensor { shape, data }, Op::MatMul { a: x.0, b: w.0 }))
    }

    /// Batched `a[B, n, k] · b[B, k, m]`.
    pub fn bmm(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (as_, bs) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if as_.len() != 3 || bs.len() != 3 || as_[0] != bs[0] || as_[2] != bs[1] {
            return Err(shape_err(format!("bmm {as_:?} · {bs:?}")));
        }
        let (bt, n, k, m) = (as_[0], as_[1], as_[2], bs[2]);
        let (av, bv) = (&self.value(a).data, &self.value(b).data);
        let mut data = Vec::with_capacity(bt * n * m);
        for i in 0..bt {
            data.extend(mm(&av[i * n * k..(i + 1) * n * k], &bv[i * k * m..(i + 1) * k * m], n, k, m));
        }
        Ok(self.push(Tensor { shape: vec![bt, n, m], data }, Op::Bmm { a: a.0, b: b.0 }))
    }

    pub fn transpose_last2(&mut self, x: Var) -> Result<Var, NnError> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 {
            return Err(shape_err(format!("transpose needs rank 3, got {s:?}")));
        }
        let data = transpose_batched(&self.value(x).data, s[0], s[1], s[2]);
        Ok(self.push(Tensor { shape: vec![s[0], s[2], s[1]], data }, Op::TransposeLast2 { x: x.0 }))
    }

    /// Adds `b[m]` to every row of `x[..., m]`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var, NnError> {
        let m = self.value(x).last_dim();
        if self.shape(b) != [m] {
            return Err(shape_err(format!("bias {:?} for rows of {m}", self.shape(b))));
        }
        let bv = self.value(b).data.clone();
        let mut out = self.value(x).clone();
        for row in out.data.chunks_mut(m) {
            for (o, v) in row.iter_mut().zip(&bv) {
                *o += v;
            }
        }
        Ok(self.push(out, Op::AddBias { x: x.0, b: b.0 }))
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var, NnError> {
        let y = self.matmul(x, w)?;
        self.add_bias(y, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(format!("add {:?} + {:?}", self.shape(a), self.shape(b))));
        }
        let data = self.value(a).data.iter().zip(&self.value(b).data).map(|(x, y)| x + y).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor { shape, data }, Op::Add { a: a.0, b: b.0 }))
    }

    /// `x[B, ...] + p[...]`, broadcasting `p` over the leading axis.
    pub fn add_broadcast(&mut self, x: Var, p: Var) -> Result<Var, NnError> {
        let (xs, ps) = (self.shape(x).to_vec(), self.shape(p).to_vec());
        if xs.len() != ps.len() + 1 || xs[1..] != ps[..] {
            return Err(shape_err(format!("broadcast {ps:?} over {xs:?}")));
        }
        let pv = self.value(p).data.clone();
        let mut out = self.value(x).clone();
        for chunk in out.data.chunks_mut(pv.len()) {
            for (o, v) in chunk.iter_mut().zip(&pv) {
                *o += v;
            }
        }
        Ok(self.push(out, Op::AddBroadcast { x: x.0, p: p.0 }))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let mut out = self.value(x).clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        self.push(out, Op::Scale { x: x.0, s })
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        out.data.iter_mut().for_each(|v| *v = v.max(0.0));
        self.push(out, Op::Relu { x: x.0 })
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        let d = out.last_dim();
        for row in out.data.chunks_mut(d) {
            softmax_in_place(row);
        }
        self.push(out, Op::Softmax { x: x.0 })
    }

    /// Normalizes the last axis, then applies `gamma` and `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var, NnError> {
        let d = self.value(x).last_dim();
        if self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return Err(shape_err(format!("layer norm params for width {d}")));
        }
        let xv = &self.value(x).data;
        let (g, b) = (&self.value(gamma).data, &self.value(beta).data);
        let rows = xv.len() / d;
        let mut xhat = vec![0.0; xv.len()];
        let mut rstd = vec![0.0; rows];
        let mut out = vec![0.0; xv.len()];
        for r in 0..rows {
            let row = &xv[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            let rs = 1.0 / (var + LN_EPS).sqrt();
            rstd[r] = rs;
            for c in 0..d {
                let h = (row[c] - mean) * rs;
                xhat[r * d + c] = h;
                out[r * d + c] = g[c] * h + b[c];
            }
        }
        let shape = self.shape(x).to_vec();
        Ok(self.push(
            Tensor { shape, data: out },
            Op::LayerNorm { x: x.0, gamma: gamma.0, beta: beta.0, xhat, rstd },
        ))
    }

    /// Gathers rows of `table[V, D]`; output shape is `lead ++ [D]`.
    pub fn embedding(&mut self, table: Var, ids: &[usize], lead: &[usize]) -> Result<Var, NnError> {
        let ts = self.shape(table).to_vec();
        if ts.len() != 2 {
            return Err(shape_err("embedding table must be rank 2"));
        }
        if lead.iter().product::<usize>() != ids.len() {
            return Err(shape_err(format!("{} ids for lead shape {lead:?}", ids.len())));
        }
        let (v, d) = (ts[0], ts[1]);
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(NnError::IdOutOfRange { id: bad, vocab: v });
        }
        let tv = &self.value(table).data;
        let mut data = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            data.extend_from_slice(&tv[i * d..(i + 1) * d]);
        }
        let mut shape = lead.to_vec();
        shape.push(d);
        Ok(self.push(Tensor { shape, data }, Op::Embedding { table: table.0, ids: ids.to_vec() }))
    }

    /// Valid 1-D convolution along axis 1: `x[B, T, C]`, `w[K, C, O]`, `b[O]`.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var) -> Result<Var, NnError> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 3 || ws.len() != 3 || ws[1] != xs[2] || self.shape(b) != [ws[2]] {
            return Err(shape_err(format!("conv1d x {xs:?} w {ws:?}")));
        }
        let (bt, t, c) = (xs[0], xs[1], xs[2]);
        let (k, o) = (ws[0], ws[2]);
        if t < k {
            return Err(NnError::TooShort { len: t, need: k });
        }
        let to = t - k + 1;
        let (xv, wv, bv) = (&self.value(x).data, &self.value(w).data, &self.value(b).data);
        let mut out = vec![0.0; bt * to * o];
        for bi in 0..bt {
            for ti in 0..to {
                let orow = &mut out[(bi * to + ti) * o..(bi * to + ti + 1) * o];
                orow.copy_from_slice(bv);
                for ki in 0..k {
                    let xrow = &xv[(bi * t + ti + ki) * c..(bi * t + ti + ki + 1) * c];
                    let wk = &wv[ki * c * o..(ki + 1) * c * o];
                    for (ci, &xval) in xrow.iter().enumerate() {
                        if xval == 0.0 {
                            continue;
                        }
                        for (ov, &wval) in orow.iter_mut().zip(&wk[ci * o..(ci + 1) * o]) {
                            *ov += xval * wval;
                        }
                    }
                }
            }
        }
        Ok(self.push(Tensor { shape: vec![bt, to, o], data: out }, Op::Conv1d { x: x.0, w: w.0, b: b.0 }))
    }

    /// Non-overlapping max pooling along axis 1 of `x[B, T, C]`; a trailing
    /// partial window is dropped.
    pub fn maxpool1d(&mut self, x: Var, width: usize) -> Result<Var, NnError> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 3 || width == 0 {
            return Err(shape_err(format!("maxpool1d on {xs:?} width {width}")));
        }
        let (bt, t, c) = (xs[0], xs[1], xs[2]);
        if t < width {
            return Err(NnError::TooShort { len: t, need: width });
        }
        let to = t / width;
        let xv = &self.value(x).data;
        let mut out = vec![0.0; bt * to * c];
        let mut argmax = vec![0usize; bt * to * c];
        for bi in 0..bt {
            for ti in 0..to {
                for ci in 0..c {
                    let mut best = (bi * t + ti * width) * c + ci;
                    for wi in 1..width {
                        let at = (bi * t + ti * width + wi) * c + ci;
                        if xv[at] > xv[best] {
                            best = at;
                        }
                    }
                    let o = (bi * to + ti) * c + ci;
                    out[o] = xv[best];
                    argmax[o] = best;
                }
            }
        }
        Ok(self.push(Tensor { shape: vec![bt, to, c], data: out }, Op::MaxPool1d { x: x.0, argmax }))
    }

    /// Mean over axis 1 of `x[B, T, D]`.
    pub fn mean_pool(&mut self, x: Var) -> Result<Var, NnError> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 3 {
            return Err(shape_err(format!("mean_pool on {xs:?}")));
        }
        let (bt, t, d) = (xs[0], xs[1], xs[2]);
        let xv = &self.value(x).data;
        let mut out = vec![0.0; bt * d];
        for bi in 0..bt {
            for ti in 0..t {
                for di in 0..d {
                    out[bi * d + di] += xv[(bi * t + ti) * d + di];
                }
            }
        }
        out.iter_mut().for_each(|v| *v /= t as f64);
        Ok(self.push(Tensor { shape: vec![bt, d], data: out }, Op::MeanPool { x: x.0 }))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, NnError> {
        let t = Tensor::new(shape, self.value(x).data.clone())?;
        Ok(self.push(t, Op::Reshape { x: x.0 }))
    }

    /// `[B, T, H·dh]` → `[B·H, T, dh]`.
    pub fn split_heads(&mut self, x: Var, heads: usize) -> Result<Var, NnError> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 3 || heads == 0 || xs[2] % heads != 0 {
            return Err(NnError::HeadDivisibility { dim: xs.last().copied().unwrap_or(0), heads });
        }
        let (bt, t, d) = (xs[0], xs[1], xs[2]);
        let dh = d / heads;
        let xv = &self.value(x).data;
        let mut out = vec![0.0; xv.len()];
        for bi in 0..bt {
            for h in 0..heads {
                for ti in 0..t {
                    let src = (bi * t + ti) * d + h * dh;
                    let dst = ((bi * heads + h) * t + ti) * dh;
                    out[dst..dst + dh].copy_from_slice(&xv[src..src + dh]);
                }
            }
        }
        Ok(self.push(Tensor { shape: vec![bt * heads, t, dh], data: out }, Op::SplitHeads { x: x.0, heads }))
    }

    /// `[B·H, T, dh]` → `[B, T, H·dh]`.
    pub fn merge_heads(&mut self, x: Var, heads: usize) -> Result<Var, NnError> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 3 || heads == 0 || xs[0] % heads != 0 {
            return Err(shape_err(format!("merge_heads on {xs:?} with {heads} heads")));
        }
        let (bh, t, dh) = (xs[0], xs[1], xs[2]);
        let bt = bh / heads;
        let d = dh * heads;
        let xv = &self.value(x).data;
        let mut out = vec![0.0; xv.len()];
        for bi in 0..bt {
            for h in 0..heads {
                for ti in 0..t {
                    let src = ((bi * heads + h) * t + ti) * dh;
                    let dst = (bi * t + ti) * d + h * dh;
                    out[dst..dst + dh].copy_from_slice(&xv[src..src + dh]);
                }
            }
        }
        Ok(self.push(Tensor { shape: vec![bt, t, d], data: out }, Op::MergeHeads { x: x.0, heads }))
    }

    /// Mean negative log-likelihood of `labels` under softmax(`logits[B, C]`).
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var, NnError> {
        let ls = self.shape(logits).to_vec();
        if ls.len() != 2 || ls[0] != labels.len() {
            return Err(shape_err(format!("logits {ls:?} for {} labels", labels.len())));
        }
        let c = ls[1];
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(NnError::LabelOutOfRange { label: bad, classes: c });
        }
        let mut probs = self.value(logits).data.clone();
        let mut loss = 0.0;
        for (row, &y) in probs.chunks_mut(c).zip(labels) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[y];
            softmax_in_place(row);
        }
        loss /= labels.len() as f64;
        Ok(self.push(
            Tensor { shape: vec![1], data: vec![loss] },
            Op::SoftmaxCrossEntropy { logits: logits.0, labels: labels.to_vec(), probs },
        ))
    }

    /// Σ x ⊙ w for a constant `w` of the same size.
    pub fn weighted_sum(&mut self, x: Var, w: &[f64]) -> Result<Var, NnError> {
        if w.len() != self.value(x).len() {
            return Err(shape_err("weighted_sum weight size"));
        }
        let s = self.value(x).data.iter().zip(w).map(|(a, b)| a * b).sum();
        Ok(self.push(Tensor { shape: vec![1], data: vec![s] }, Op::WeightedSum { x: x.0, w: w.to_vec() }))
    }

    /// softmax(Q·Kᵀ/√d_k)·V on `[B, T, d]` inputs.
    pub fn attention(&mut self, q: Var, k: Var, v: Var) -> Result<Var, NnError> {
        let (qs, ks, vs) = (self.shape(q).to_vec(), self.shape(k).to_vec(), self.shape(v).to_vec());
        if qs.len() != 3 || ks.len() != 3 || vs.len() != 3 || qs[2] != ks[2] || ks[1] != vs[1] || qs[0] != ks[0] || ks[0] != vs[0] {
            return Err(shape_err(format!("attention q {qs:?} k {ks:?} v {vs:?}")));
        }
        let kt = self.transpose_last2(k)?;
        let scores = self.bmm(q, kt)?;
        let scaled = self.scale(scores, 1.0 / (qs[2] as f64).sqrt());
        let weights = self.softmax(scaled);
        self.bmm(weights, v)
    }

    /// Reverse pass from `root`, seeded with ones.
    pub fn backward(&self, root: Var) -> Grads {
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![1.0; self.nodes[root.0].value.len()]);
        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(gy) = grads[i].take() else { continue };
            self.backprop(node, &gy, &mut grads);
        }
        Grads(grads)
    }

    fn backprop(&self, node: &Node, gy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |i: usize| &self.nodes[i].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (av, bv) = (val(*a), val(*b));
                let (k, m) = (bv.shape[0], bv.shape[1]);
                let r = av.len() / k.max(1);
                acc(grads, *a, mm_nt(gy, &bv.data, r, m, k));
                acc(grads, *b, mm_tn(&av.data, gy, r, k, m));
            }
            Op::Bmm { a, b } => {
                let (av, bv) = (val(*a), val(*b));
                let (bt, n, k, m) = (av.shape[0], av.shape[1], av.shape[2], bv.shape[2]);
                let mut ga = Vec::with_capacity(av.len());
                let mut gb = Vec::with_capacity(bv.len());
                for i in 0..bt {
                    let g = &gy[i * n * m..(i + 1) * n * m];
                    ga.extend(mm_nt(g, &bv.data[i * k * m..(i + 1) * k * m], n, m, k));
                    gb.extend(mm_tn(&av.data[i * n * k..(i + 1) * n * k], g, n, k, m));
                }
                acc(grads, *a, ga);
                acc(grads, *b, gb);
            }
            Op::TransposeLast2 { x } => {
                let s = &val(*x).shape;
                acc(grads, *x, transpose_batched(gy, s[0], s[2], s[1]));
            }
            Op::AddBias { x, b } => {
                let m = val(*b).len();
                let mut gb = vec![0.0; m];
                for row in gy.chunks(m) {
                    for (g, v) in gb.iter_mut().zip(row) {
                        *g += v;
                    }
                }
                acc(grads, *x, gy.to_vec());
                acc(grads, *b, gb);
            }
            Op::Add { a, b } => {
                acc(grads, *a, gy.to_vec());
                acc(grads, *b, gy.to_vec());
            }
            Op::AddBroadcast { x, p } => {
                let n = val(*p).len();
                let mut gp = vec![0.0; n];
                for chunk in gy.chunks(n) {
                    for (g, v) in gp.iter_mut().zip(chunk) {
                        *g += v;
                    }
                }
                acc(grads, *x, gy.to_vec());
                acc(grads, *p, gp);
            }
            Op::Scale { x, s } => acc(grads, *x, gy.iter().map(|g| g * s).collect()),
            Op::Relu { x } => {
                let g = gy.iter().zip(&val(*x).data).map(|(g, &v)| if v > 0.0 { *g } else { 0.0 }).collect();
                acc(grads, *x, g);
            }
            Op::Softmax { x } => {
                let y = &node.value;
                let d = y.last_dim();
                let mut g = vec![0.0; gy.len()];
                for ((grow, yrow), orow) in gy.chunks(d).zip(y.data.chunks(d)).zip(g.chunks_mut(d)) {
                    let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                    for ((o, gv), yv) in orow.iter_mut().zip(grow).zip(yrow) {
                        *o = yv * (gv - dot);
                    }
                }
                acc(grads, *x, g);
            }
            Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                let gv = &val(*gamma).data;
                let d = gv.len();
                let mut gg = vec![0.0; d];
                let mut gb = vec![0.0; d];
                let mut gx = vec![0.0; gy.len()];
                for (r, rs) in rstd.iter().enumerate() {
                    let gyr = &gy[r * d..(r + 1) * d];
                    let xh = &xhat[r * d..(r + 1) * d];
                    let mut sum_g = 0.0;
                    let mut sum_gx = 0.0;
                    for c in 0..d {
                        gg[c] += gyr[c] * xh[c];
                        gb[c] += gyr[c];
                        let gh = gyr[c] * gv[c];
                        sum_g += gh;
                        sum_gx += gh * xh[c];
                    }
                    for c in 0..d {
                        let gh = gyr[c] * gv[c];
                        gx[r * d + c] = rs / d as f64 * (d as f64 * gh - sum_g - xh[c] * sum_gx);
                    }
                }
                acc(grads, *x, gx);
                acc(grads, *gamma, gg);
                acc(grads, *beta, gb);
            }
            Op::Embedding { table, ids } => {
                let tv = val(*table);
                let d = tv.shape[1];
                let mut gt = vec![0.0; tv.len()];
                for (row, &id) in gy.chunks(d).zip(ids) {
                    for (g, v) in gt[id * d..(id + 1) * d].iter_mut().zip(row) {
                        *g += v;
                    }
                }
                acc(grads, *table, gt);
            }
            Op::Conv1d { x, w, b } => {
                let (xv, wv) = (val(*x), val(*w));
                let (bt, t, c) = (xv.shape[0], xv.shape[1], xv.shape[2]);
                let (k, o) = (wv.shape[0], wv.shape[2]);
                let to = t - k + 1;
                let mut gx = vec![0.0; xv.len()];
                let mut gw = vec![0.0; wv.len()];
                let mut gb = vec![0.0; o];
                for bi in 0..bt {
                    for ti in 0..to {
                        let grow = &gy[(bi * to + ti) * o..(bi * to + ti + 1) * o];
                        for (g, v) in gb.iter_mut().zip(grow) {
                            *g += v;
                        }
                        for ki in 0..k {
                            let xo = (bi * t + ti + ki) * c;
                            for ci in 0..c {
                                let wo = (ki * c + ci) * o;
                                let xval = xv.data[xo + ci];
                                let mut s = 0.0;
                                for oi in 0..o {
                                    s += grow[oi] * wv.data[wo + oi];
                                    gw[wo + oi] += xval * grow[oi];
                                }
                                gx[xo + ci] += s;
                            }
                        }
                    }
                }
                acc(grads, *x, gx);
                acc(grads, *w, gw);
                acc(grads, *b, gb);
            }
            Op::MaxPool1d { x, argmax } => {
                let mut gx = vec![0.0; val(*x).len()];
                for (g, &at) in gy.iter().zip(argmax) {
                    gx[at] += g;
                }
                acc(grads, *x, gx);
            }
            Op::MeanPool { x } => {
                let s = &val(*x).shape;
                let (bt, t, d) = (s[0], s[1], s[2]);
                let mut gx = vec![0.0; bt * t * d];
                for bi in 0..bt {
                    for ti in 0..t {
                        for di in 0..d {
                            gx[(bi * t + ti) * d + di] = gy[bi * d + di] / t as f64;
                        }
                    }
                }
                acc(grads, *x, gx);
            }
            Op::Reshape { x } => acc(grads, *x, gy.to_vec()),
            Op::SplitHeads { x, heads } => {
                let s = &val(*x).shape;
                let (bt, t, d) = (s[0], s[1], s[2]);
                let dh = d / heads;
                let mut gx = vec![0.0; gy.len()];
                for bi in 0..bt {
                    for h in 0..*heads {
                        for ti in 0..t {
                            let dst = (bi * t + ti) * d + h * dh;
                            let src = ((bi * heads + h) * t + ti) * dh;
                            gx[dst..dst + dh].copy_from_slice(&gy[src..src + dh]);
                        }
                    }
                }
                acc(grads, *x, gx);
            }
            Op::MergeHeads { x, heads } => {
                let s = &val(*x).shape;
                let (bh, t, dh) = (s[0], s[1], s[2]);
                let bt = bh / heads;
                let d = dh * heads;
                let mut gx = vec![0.0; gy.len()];
                for bi in 0..bt {
                    for h in 0..*heads {
                        for ti in 0..t {
                            let dst = ((bi * heads + h) * t + ti) * dh;
                            let src = (bi * t + ti) * d + h * dh;
                            gx[dst..dst + dh].copy_from_slice(&gy[src..src + dh]);
                        }
                    }
                }
                acc(grads, *x, gx);
            }
            Op::SoftmaxCrossEntropy { logits, labels, probs } => {
                let c = val(*logits).shape[1];
                let scale = gy[0] / labels.len() as f64;
                let mut g = probs.clone();
                for (row, &y) in g.chunks_mut(c).zip(labels) {
                    row[y] -= 1.0;
                    row.iter_mut().for_each(|v| *v *= scale);
                }
                acc(grads, *logits, g);
            }
            Op::WeightedSum { x, w } => acc(grads, *x, w.iter().map(|v| v * gy[0]).collect()),
        }
    }
}

fn transpose_batched(x: &[f64], b: usize, n: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for bi in 0..b {
        let base = bi * n * m;
        for i in 0..n {
            for j in 0..m {
                out[base + j * n + i] = x[base + i * m + j];
            }
        }
    }
    out
}

/// Projection weights for one multi-head attention layer; all matrices are
/// `[D, D]`, biases `[D]`.
#[derive(Debug, Clone, Copy)]
pub struct MhaParams {
    pub wq: Var,
    pub bq: Var,
    pub wk: Var,
    pub bk: Var,
    pub wv: Var,
    pub bv: Var,
    pub wo: Var,
    pub bo: Var,
}

impl Graph {
    /// Self-attention over `x[B, T, D]` split into `heads` heads of width
    /// `D / heads`, concatenated and projected back to `D`.
    pub fn multi_head_attention(&mut self, x: Var, p: &MhaParams, heads: usize) -> Result<Var, NnError> {
        let d = self.value(x).last_dim();
        if heads == 0 || d % heads != 0 {
            return Err(NnError::HeadDivisibility { dim: d, heads });
        }
        let q = self.linear(x, p.wq, p.bq)?;
        let k = self.linear(x, p.wk, p.bk)?;
        let v = self.linear(x, p.wv, p.bv)?;
        let (q, k, v) = (self.split_heads(q, heads)?, self.split_heads(k, heads)?, self.split_heads(v, heads)?);
        let a = self.attention(q, k, v)?;
        let merged = self.merge_heads(a, heads)?;
        self.linear(merged, p.wo, p.bo)
    }
}
