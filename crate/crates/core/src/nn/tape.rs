use alloc::vec;
use alloc::vec::Vec;

use super::backend::{affine_forward, bilinear_forward, col_max_forward, Backend};
use super::kernels;
use super::params::{Gradients, ParamId, ParamStore};
use crate::error::{check_len, Error, Result};
use crate::training::loss::{focal_grad_logit, focal_term, FocalWeights};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Affine { w: ParamId, b: Option<ParamId>, x: NodeId },
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Concat(Vec<NodeId>),
    Bilinear { h: NodeId, x: NodeId, rows: usize },
    ColMax { parts: Vec<NodeId>, argmax: Vec<usize> },
    Mask { x: NodeId, mask: Vec<f64> },
    Focal { logits: NodeId, positive: bool, weights: FocalWeights },
    WeightedSum(Vec<(NodeId, f64)>),
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

/// Reverse-mode tape over vector-valued nodes.
///
/// Nodes are appended in forward order; [`Tape::backward`] walks them in
/// exact reverse order and accumulates gradients additively, so a node used
/// twice receives the sum of both contributions.
///
/// The tape also keeps a fingerprint of every piecewise branch taken
/// (relu signs, max-pool winners, loss clamps). Two evaluations with the same
/// fingerprint lie on the same smooth piece, which is what the
/// finite-difference checker needs to know.
#[derive(Debug)]
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    signature: u64,
}

const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            signature: 0xcbf2_9ce4_8422_2325,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value[0]
    }

    /// Fingerprint of the piecewise-linear branches taken so far.
    pub fn signature(&self) -> u64 {
        self.signature
    }

    fn mix(&mut self, v: u64) {
        self.signature = (self.signature ^ v).wrapping_mul(FNV_PRIME);
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, data: Vec<f64>) -> NodeId {
        self.push(data, Op::Leaf)
    }

    /// Gradients of a scalar node with respect to every parameter.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        self.backward_seeded(root, &[1.0])
    }

    /// Vector-Jacobian product: gradients of `seed . value(root)`.
    pub fn backward_seeded(&self, root: NodeId, seed: &[f64]) -> Result<Gradients> {
        if self.nodes.is_empty() || root.0 >= self.nodes.len() {
            return Err(Error::State("backward called before any forward pass"));
        }
        check_len("backward seed", self.nodes[root.0].value.len(), seed.len())?;
        let mut grads = Gradients::zeros_like(self.params);
        let mut adj: Vec<Vec<f64>> = (0..=root.0).map(|_| Vec::new()).collect();
        adj[root.0] = seed.to_vec();

        for i in (0..=root.0).rev() {
            let g = core::mem::take(&mut adj[i]);
            if g.is_empty() {
                continue;
            }
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Affine { w, b, x } => {
                    let wt = self.params.get(*w);
                    let (rows, cols) = wt.dims2();
                    let xv = &self.nodes[x.0].value;
                    kernels::outer_acc(&g, xv, grads.get_mut(*w));
                    if let Some(b) = b {
                        for (gb, gv) in grads.get_mut(*b).iter_mut().zip(&g) {
                            *gb += gv;
                        }
                    }
                    let dx = acc(&mut adj, *x, cols);
                    kernels::matvec_t_acc(wt.data(), rows, cols, &g, dx);
                }
                Op::Add(a, b) => {
                    add_into(acc(&mut adj, *a, g.len()), &g);
                    add_into(acc(&mut adj, *b, g.len()), &g);
                }
                Op::Mul(a, b) => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let da: Vec<f64> = g.iter().zip(bv).map(|(g, b)| g * b).collect();
                    let db: Vec<f64> = g.iter().zip(av).map(|(g, a)| g * a).collect();
                    add_into(acc(&mut adj, *a, g.len()), &da);
                    add_into(acc(&mut adj, *b, g.len()), &db);
                }
                Op::Relu(a) => {
                    let av = &self.nodes[a.0].value;
                    let d = acc(&mut adj, *a, g.len());
                    for ((d, gv), x) in d.iter_mut().zip(&g).zip(av) {
                        if *x > 0.0 {
                            *d += gv;
                        }
                    }
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let d = acc(&mut adj, *a, g.len());
                    for ((d, gv), y) in d.iter_mut().zip(&g).zip(y) {
                        *d += gv * y * (1.0 - y);
                    }
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    let d = acc(&mut adj, *a, g.len());
                    for ((d, gv), y) in d.iter_mut().zip(&g).zip(y) {
                        *d += gv * (1.0 - y * y);
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.nodes[p.0].value.len();
                        add_into(acc(&mut adj, *p, n), &g[off..off + n]);
                        off += n;
                    }
                }
                Op::Bilinear { h, x, rows } => {
                    let hv = &self.nodes[h.0].value;
                    let xv = &self.nodes[x.0].value;
                    let cols = xv.len();
                    let mut dh = vec![0.0; hv.len()];
                    kernels::outer_acc(&g, xv, &mut dh);
                    add_into(acc(&mut adj, *h, hv.len()), &dh);
                    let dx = acc(&mut adj, *x, cols);
                    kernels::matvec_t_acc(hv, *rows, cols, &g, dx);
                }
                Op::ColMax { parts, argmax } => {
                    for (j, (&k, gv)) in argmax.iter().zip(&g).enumerate() {
                        let n = g.len();
                        acc(&mut adj, parts[k], n)[j] += gv;
                    }
                }
                Op::Mask { x, mask } => {
                    let d = acc(&mut adj, *x, g.len());
                    for ((d, gv), m) in d.iter_mut().zip(&g).zip(mask) {
                        *d += gv * m;
                    }
                }
                Op::Focal {
                    logits,
                    positive,
                    weights,
                } => {
                    let z = &self.nodes[logits.0].value;
                    let p = kernels::softmax2_positive(z);
                    let du = g[0] * focal_grad_logit(p, *positive, *weights);
                    let d = acc(&mut adj, *logits, 2);
                    d[0] -= du;
                    d[1] += du;
                }
                Op::WeightedSum(terms) => {
                    for &(id, w) in terms {
                        acc(&mut adj, id, 1)[0] += g[0] * w;
                    }
                }
            }
        }
        Ok(grads)
    }
}

fn acc(adj: &mut [Vec<f64>], id: NodeId, len: usize) -> &mut [f64] {
    let slot = &mut adj[id.0];
    if slot.is_empty() {
        *slot = vec![0.0; len];
    }
    slot
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl Backend for Tape<'_> {
    type Value = NodeId;

    fn params(&self) -> &ParamStore {
        self.params
    }

    fn constant(&mut self, data: Vec<f64>) -> NodeId {
        self.leaf(data)
    }

    fn data<'a>(&'a self, v: &'a NodeId) -> &'a [f64] {
        self.value(*v)
    }

    fn affine(&mut self, w: ParamId, b: Option<ParamId>, x: &NodeId) -> Result<NodeId> {
        let out = affine_forward(self.params, w, b, self.value(*x))?;
        Ok(self.push(out, Op::Affine { w, b, x: *x }))
    }

    fn add(&mut self, a: &NodeId, b: &NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(*a), self.value(*b));
        check_len("add", av.len(), bv.len())?;
        let out = av.iter().zip(bv).map(|(x, y)| x + y).collect();
        Ok(self.push(out, Op::Add(*a, *b)))
    }

    fn mul(&mut self, a: &NodeId, b: &NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(*a), self.value(*b));
        check_len("mul", av.len(), bv.len())?;
        let out = av.iter().zip(bv).map(|(x, y)| x * y).collect();
        Ok(self.push(out, Op::Mul(*a, *b)))
    }

    fn relu(&mut self, a: &NodeId) -> NodeId {
        let out: Vec<f64> = self.value(*a).iter().map(|&v| kernels::relu(v)).collect();
        for i in 0..out.len() {
            let active = self.nodes[a.0].value[i] > 0.0;
            self.mix(u64::from(active));
        }
        self.push(out, Op::Relu(*a))
    }

    fn sigmoid(&mut self, a: &NodeId) -> NodeId {
        let out = self.value(*a).iter().map(|&v| kernels::sigmoid(v)).collect();
        self.push(out, Op::Sigmoid(*a))
    }

    fn tanh(&mut self, a: &NodeId) -> NodeId {
        let out = self.value(*a).iter().map(|&v| kernels::tanh(v)).collect();
        self.push(out, Op::Tanh(*a))
    }

    fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut out = Vec::new();
        for p in parts {
            out.extend_from_slice(self.value(*p));
        }
        self.push(out, Op::Concat(parts.to_vec()))
    }

    fn bilinear(&mut self, h: &NodeId, x: &NodeId, rows: usize) -> Result<NodeId> {
        let out = bilinear_forward(self.value(*h), self.value(*x), rows)?;
        Ok(self.push(
            out,
            Op::Bilinear {
                h: *h,
                x: *x,
                rows,
            },
        ))
    }

    fn col_max(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let views: Vec<&[f64]> = parts.iter().map(|p| self.value(*p)).collect();
        let (out, argmax) = col_max_forward(&views)?;
        for &k in &argmax {
            self.mix(k as u64);
        }
        Ok(self.push(
            out,
            Op::ColMax {
                parts: parts.to_vec(),
                argmax,
            },
        ))
    }

    fn mask(&mut self, x: &NodeId, mask: Vec<f64>) -> Result<NodeId> {
        let xv = self.value(*x);
        check_len("mask", xv.len(), mask.len())?;
        let out = xv.iter().zip(&mask).map(|(a, m)| a * m).collect();
        Ok(self.push(out, Op::Mask { x: *x, mask }))
    }

    fn focal(&mut self, logits: &NodeId, positive: bool, weights: FocalWeights) -> Result<NodeId> {
        let logits = *logits;
        let z = &self.nodes[logits.0].value;
        check_len("focal logits", 2, z.len())?;
        let p = kernels::softmax2_positive(z);
        let (loss, clamped) = focal_term(p, positive, weights);
        if !loss.is_finite() {
            return Err(Error::NonFinite("focal loss"));
        }
        self.mix(u64::from(clamped));
        Ok(self.push(
            vec![loss],
            Op::Focal {
                logits,
                positive,
                weights,
            },
        ))
    }

    fn weighted_sum(&mut self, terms: &[(NodeId, f64)]) -> Result<NodeId> {
        let mut total = 0.0;
        for &(id, w) in terms {
            let v = &self.nodes[id.0].value;
            check_len("weighted_sum term", 1, v.len())?;
            total += w * v[0];
        }
        Ok(self.push(vec![total], Op::WeightedSum(terms.to_vec())))
    }
}
