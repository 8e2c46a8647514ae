//! Reverse-mode differentiation over the fixed set of operations the Q
//! network is built from. Forward values are computed eagerly as the tape is
//! built; `backward` runs one reverse sweep and accumulates parameter
//! gradients into a [`GradBuf`].

use super::params::{GradBuf, ParamSet};
use super::tensor::Mat;
use std::sync::Arc;

pub const LEAKY_SLOPE: f64 = 0.2;

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct NodeId(usize);

enum Op {
    Input,
    Param { block: usize },
    MatMul { a: NodeId, b: NodeId },
    AddBias { a: NodeId, bias: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Scale { a: NodeId, c: f64 },
    AddConst { a: NodeId },
    Elu { a: NodeId },
    EluPlusOne { a: NodeId },
    Square { a: NodeId },
    SumRows { a: NodeId, rows: Arc<Vec<u32>> },
    SumList { parts: Vec<NodeId> },
    ConcatCols { parts: Vec<NodeId> },
    Conv1d { a: NodeId, w: NodeId, b: NodeId },
    MaxElem { a: NodeId, b: NodeId },
    /// Single-head graph-attention aggregation over closed neighborhoods:
    /// out_i = sum_j alpha_ij z_j with alpha = softmax_j of
    /// LeakyReLU(s_src[i] + s_dst[j]) over j in adj[i].
    GatAttn { z: NodeId, s_src: NodeId, s_dst: NodeId, adj: Arc<Vec<Vec<u32>>> },
}

struct Node {
    op: Op,
    value: Arc<Mat>,
}

pub struct Tape {
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape { nodes: Vec::new() }
    }

    pub fn value(&self, id: NodeId) -> &Arc<Mat> {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value.scalar()
    }

    fn push(&mut self, op: Op, value: Mat) -> NodeId {
        self.push_arc(op, Arc::new(value))
    }

    fn push_arc(&mut self, op: Op, value: Arc<Mat>) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Mat) -> NodeId {
        self.push(Op::Input, value)
    }

    pub fn input_shared(&mut self, value: Arc<Mat>) -> NodeId {
        self.push_arc(Op::Input, value)
    }

    pub fn param(&mut self, params: &ParamSet, block: usize) -> NodeId {
        self.push_arc(Op::Param { block }, params.value(block))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.matmul(&self.nodes[b.0].value);
        self.push(Op::MatMul { a, b }, v)
    }

    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> NodeId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[bias.0].value);
        assert_eq!(bv.rows, 1);
        assert_eq!(av.cols, bv.cols);
        let mut out = (**av).clone();
        for i in 0..out.rows {
            for (o, &b) in out.row_mut(i).iter_mut().zip(bv.data.iter()) {
                *o += b;
            }
        }
        self.push(Op::AddBias { a, bias }, out)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut out = (*self.nodes[a.0].value).clone();
        out.add_assign(&self.nodes[b.0].value);
        self.push(Op::Add { a, b }, out)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut out = (*self.nodes[a.0].value).clone();
        for (o, &x) in out.data.iter_mut().zip(self.nodes[b.0].value.data.iter()) {
            *o -= x;
        }
        self.push(Op::Sub { a, b }, out)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let mut out = (*self.nodes[a.0].value).clone();
        out.data.iter_mut().for_each(|x| *x *= c);
        self.push(Op::Scale { a, c }, out)
    }

    pub fn add_const(&mut self, a: NodeId, c: f64) -> NodeId {
        let mut out = (*self.nodes[a.0].value).clone();
        out.data.iter_mut().for_each(|x| *x += c);
        self.push(Op::AddConst { a }, out)
    }

    pub fn elu(&mut self, a: NodeId) -> NodeId {
        let mut out = (*self.nodes[a.0].value).clone();
        out.data.iter_mut().for_each(|x| *x = elu(*x));
        self.push(Op::Elu { a }, out)
    }

    pub fn elu_plus_one(&mut self, a: NodeId) -> NodeId {
        let mut out = (*self.nodes[a.0].value).clone();
        out.data.iter_mut().for_each(|x| *x = elu(*x) + 1.0);
        self.push(Op::EluPlusOne { a }, out)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let mut out = (*self.nodes[a.0].value).clone();
        out.data.iter_mut().for_each(|x| *x *= *x);
        self.push(Op::Square { a }, out)
    }

    /// Sum of the given rows of `a` as a 1 x cols vector; the empty subset
    /// yields the zero vector.
    pub fn sum_rows(&mut self, a: NodeId, rows: Arc<Vec<u32>>) -> NodeId {
        let av = &self.nodes[a.0].value;
        let mut out = Mat::zeros(1, av.cols);
        for &r in rows.iter() {
            for (o, &x) in out.data.iter_mut().zip(av.row(r as usize).iter()) {
                *o += x;
            }
        }
        self.push(Op::SumRows { a, rows }, out)
    }

    /// Elementwise sum of same-shaped nodes.
    pub fn sum_list(&mut self, parts: Vec<NodeId>) -> NodeId {
        assert!(!parts.is_empty());
        let mut out = (*self.nodes[parts[0].0].value).clone();
        for p in &parts[1..] {
            out.add_assign(&self.nodes[p.0].value);
        }
        self.push(Op::SumList { parts }, out)
    }

    pub fn concat_cols(&mut self, parts: Vec<NodeId>) -> NodeId {
        let mut data = Vec::new();
        for p in &parts {
            let v = &self.nodes[p.0].value;
            assert_eq!(v.rows, 1, "concat expects row vectors");
            data.extend_from_slice(&v.data);
        }
        let out = Mat::row_vec(data);
        self.push(Op::ConcatCols { parts }, out)
    }

    /// Valid 1-d convolution of a row vector with a width-3 stride-1 filter
    /// plus scalar bias: output length cols-2.
    pub fn conv1d(&mut self, a: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let av = &self.nodes[a.0].value;
        let wv = &self.nodes[w.0].value;
        let bv = self.nodes[b.0].value.scalar();
        assert_eq!(av.rows, 1);
        assert_eq!(wv.data.len(), 3);
        assert!(av.cols >= 3, "conv input too short");
        let out_len = av.cols - 2;
        let mut out = Mat::zeros(1, out_len);
        for k in 0..out_len {
            out.data[k] =
                bv + wv.data[0] * av.data[k] + wv.data[1] * av.data[k + 1] + wv.data[2] * av.data[k + 2];
        }
        self.push(Op::Conv1d { a, w, b }, out)
    }

    pub fn max_elem(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        debug_assert_eq!(av.data.len(), bv.data.len());
        let data = av.data.iter().zip(bv.data.iter()).map(|(&x, &y)| x.max(y)).collect();
        let out = Mat { rows: av.rows, cols: av.cols, data };
        self.push(Op::MaxElem { a, b }, out)
    }

    pub fn gat_attn(
        &mut self,
        z: NodeId,
        s_src: NodeId,
        s_dst: NodeId,
        adj: Arc<Vec<Vec<u32>>>,
    ) -> NodeId {
        let zv = &self.nodes[z.0].value;
        let src = &self.nodes[s_src.0].value;
        let dst = &self.nodes[s_dst.0].value;
        let n = zv.rows;
        let d = zv.cols;
        let mut out = Mat::zeros(n, d);
        for i in 0..n {
            let alphas = attention_row(src, dst, &adj[i], i);
            let out_row = out.row_mut(i);
            for (&j, &a) in adj[i].iter().zip(alphas.iter()) {
                for (o, &zj) in out_row.iter_mut().zip(zv.row(j as usize).iter()) {
                    *o += a * zj;
                }
            }
        }
        self.push(Op::GatAttn { z, s_src, s_dst, adj }, out)
    }

    /// Reverse sweep from scalar output seeds; parameter gradients accumulate
    /// into `grads`.
    pub fn backward(&self, seeds: &[(NodeId, f64)], grads: &mut GradBuf) {
        let mut adj: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        for &(id, seed) in seeds {
            let v = &self.nodes[id.0].value;
            assert_eq!(v.data.len(), 1, "backward seeds must be scalars");
            let g = adj[id.0].get_or_insert_with(|| Mat::zeros(v.rows, v.cols));
            g.data[0] += seed;
        }
        for idx in (0..self.nodes.len()).rev() {
            let Some(g_out) = adj[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Input => {}
                Op::Param { block } => grads.accumulate(*block, &g_out),
                Op::MatMul { a, b } => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let da = g_out.matmul_nt(bv);
                    let db = av.matmul_tn(&g_out);
                    add_grad(&mut adj, *a, da);
                    add_grad(&mut adj, *b, db);
                }
                Op::AddBias { a, bias } => {
                    let bv = &self.nodes[bias.0].value;
                    let mut db = Mat::zeros(1, bv.cols);
                    for i in 0..g_out.rows {
                        for (o, &x) in db.data.iter_mut().zip(g_out.row(i).iter()) {
                            *o += x;
                        }
                    }
                    add_grad(&mut adj, *bias, db);
                    add_grad(&mut adj, *a, g_out);
                }
                Op::Add { a, b } => {
                    add_grad(&mut adj, *a, g_out.clone());
                    add_grad(&mut adj, *b, g_out);
                }
                Op::Sub { a, b } => {
                    let mut neg = g_out.clone();
                    neg.data.iter_mut().for_each(|x| *x = -*x);
                    add_grad(&mut adj, *a, g_out);
                    add_grad(&mut adj, *b, neg);
                }
                Op::Scale { a, c } => {
                    let mut da = g_out;
                    da.data.iter_mut().for_each(|x| *x *= c);
                    add_grad(&mut adj, *a, da);
                }
                Op::AddConst { a } => add_grad(&mut adj, *a, g_out),
                Op::Elu { a } | Op::EluPlusOne { a } => {
                    let av = &self.nodes[a.0].value;
                    let mut da = g_out;
                    for (g, &x) in da.data.iter_mut().zip(av.data.iter()) {
                        *g *= elu_grad(x);
                    }
                    add_grad(&mut adj, *a, da);
                }
                Op::Square { a } => {
                    let av = &self.nodes[a.0].value;
                    let mut da = g_out;
                    for (g, &x) in da.data.iter_mut().zip(av.data.iter()) {
                        *g *= 2.0 * x;
                    }
                    add_grad(&mut adj, *a, da);
                }
                Op::SumRows { a, rows } => {
                    let av = &self.nodes[a.0].value;
                    let mut da = Mat::zeros(av.rows, av.cols);
                    for &r in rows.iter() {
                        for (o, &x) in da.row_mut(r as usize).iter_mut().zip(g_out.data.iter()) {
                            *o += x;
                        }
                    }
                    add_grad(&mut adj, *a, da);
                }
                Op::SumList { parts } => {
                    for p in parts {
                        add_grad(&mut adj, *p, g_out.clone());
                    }
                }
                Op::ConcatCols { parts } => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.nodes[p.0].value.cols;
                        let da = Mat::row_vec(g_out.data[off..off + w].to_vec());
                        add_grad(&mut adj, *p, da);
                        off += w;
                    }
                }
                Op::Conv1d { a, w, b } => {
                    let av = &self.nodes[a.0].value;
                    let wv = &self.nodes[w.0].value;
                    let mut da = Mat::zeros(1, av.cols);
                    let mut dw = Mat::zeros(wv.rows, wv.cols);
                    let mut db = 0.0;
                    for (k, &g) in g_out.data.iter().enumerate() {
                        db += g;
                        for t in 0..3 {
                            da.data[k + t] += wv.data[t] * g;
                            dw.data[t] += av.data[k + t] * g;
                        }
                    }
                    add_grad(&mut adj, *a, da);
                    add_grad(&mut adj, *w, dw);
                    add_grad(&mut adj, *b, Mat::from_vec(1, 1, vec![db]));
                }
                Op::MaxElem { a, b } => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let mut da = Mat::zeros(av.rows, av.cols);
                    let mut db = Mat::zeros(bv.rows, bv.cols);
                    for k in 0..g_out.data.len() {
                        if av.data[k] >= bv.data[k] {
                            da.data[k] = g_out.data[k];
                        } else {
                            db.data[k] = g_out.data[k];
                        }
                    }
                    add_grad(&mut adj, *a, da);
                    add_grad(&mut adj, *b, db);
                }
                Op::GatAttn { z, s_src, s_dst, adj: neigh } => {
                    let zv = &self.nodes[z.0].value;
                    let src = &self.nodes[s_src.0].value;
                    let dst = &self.nodes[s_dst.0].value;
                    let n = zv.rows;
                    let mut dz = Mat::zeros(n, zv.cols);
                    let mut dsrc = Mat::zeros(n, 1);
                    let mut ddst = Mat::zeros(n, 1);
                    for i in 0..n {
                        let js = &neigh[i];
                        let alphas = attention_row(src, dst, js, i);
                        let g_row = g_out.row(i);
                        // d(alpha) and accumulation into z.
                        let mut dalpha = vec![0.0; js.len()];
                        for (t, &j) in js.iter().enumerate() {
                            let zj = zv.row(j as usize);
                            let mut dot = 0.0;
                            for (g, &zval) in g_row.iter().zip(zj.iter()) {
                                dot += g * zval;
                            }
                            dalpha[t] = dot;
                            let a = alphas[t];
                            for (o, &g) in dz.row_mut(j as usize).iter_mut().zip(g_row.iter()) {
                                *o += a * g;
                            }
                        }
                        // Softmax backward then the LeakyReLU logit.
                        let inner: f64 =
                            alphas.iter().zip(dalpha.iter()).map(|(&a, &d)| a * d).sum();
                        for (t, &j) in js.iter().enumerate() {
                            let de = alphas[t] * (dalpha[t] - inner);
                            let pre = src.data[i] + dst.data[j as usize];
                            let slope = if pre > 0.0 { 1.0 } else { LEAKY_SLOPE };
                            let dpre = de * slope;
                            dsrc.data[i] += dpre;
                            ddst.data[j as usize] += dpre;
                        }
                    }
                    add_grad(&mut adj, *z, dz);
                    add_grad(&mut adj, *s_src, dsrc);
                    add_grad(&mut adj, *s_dst, ddst);
                }
            }
        }
    }
}

fn add_grad(adj: &mut [Option<Mat>], id: NodeId, g: Mat) {
    match &mut adj[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot => *slot = Some(g),
    }
}

/// Softmax over LeakyReLU(s_src[i] + s_dst[j]) for j in the closed
/// neighborhood of i.
fn attention_row(src: &Mat, dst: &Mat, js: &[u32], i: usize) -> Vec<f64> {
    let logits: Vec<f64> = js
        .iter()
        .map(|&j| {
            let pre = src.data[i] + dst.data[j as usize];
            if pre > 0.0 {
                pre
            } else {
                LEAKY_SLOPE * pre
            }
        })
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&e| (e - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / total).collect()
}
