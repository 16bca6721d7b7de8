//! Toy differentiable architecture search.
//!
//! A cell is a small DAG: nodes 0 and 1 are inputs, the last node is the
//! output, and every node `j ≥ 2` sums gated candidate operations over all
//! its predecessors, `x_j = Σ_{i<j} ō_{i,j}(x_i)`. The gate for each
//! `(edge, op)` pair is either an independent sigmoid of its architecture
//! weight or a softmax across the edge's ops.
//!
//! The network stacks two cells that share this topology but carry disjoint
//! weight groups, "normal" then "reduction":
//!
//! ```text
//! h = normal(u, u)
//! r = reduction(u, h)
//! ŷ = mean(r)
//! ```
//!
//! Losses are mean squared errors over a training and a validation split of
//! a synthetic regression task whose targets come from a hidden teacher
//! network of the same shape.

mod search;

pub use search::{
    run_search, BilevelConfig, Checkpoint, GroupMeans, SearchOptimizer, SearchResult,
};

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng_from_seed;
use crate::scalar::Scalar;

pub const DEFAULT_THRESHOLD: f64 = 0.85;
/// Central-difference step for the `ξ > 0` architecture gradient.
pub const ARCH_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    /// `x ↦ W x` with a learnable square matrix.
    Linear,
    /// Identity.
    Skip,
    /// Constant zero.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mixing {
    #[default]
    Sigmoid,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Normal,
    Reduction,
}

impl Group {
    pub const ALL: [Group; 2] = [Group::Normal, Group::Reduction];

    pub fn name(self) -> &'static str {
        match self {
            Group::Normal => "normal",
            Group::Reduction => "reduction",
        }
    }

    fn index(self) -> usize {
        match self {
            Group::Normal => 0,
            Group::Reduction => 1,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn sigmoid<S: Scalar>(a: S) -> S {
    if a >= S::zero() {
        S::one() / (S::one() + (-a).exp())
    } else {
        let e = a.exp();
        e / (S::one() + e)
    }
}

fn softmax<S: Scalar>(alpha: &[S]) -> Vec<S> {
    let max = alpha.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = alpha.iter().map(|&a| (a - max).exp()).collect();
    let total: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Gate values for one edge's ops.
pub fn gates<S: Scalar>(alpha_edge: &[S], mixing: Mixing) -> Vec<S> {
    match mixing {
        Mixing::Sigmoid => alpha_edge.iter().map(|&a| sigmoid(a)).collect(),
        Mixing::Softmax => softmax(alpha_edge),
    }
}

fn mix<S: Scalar>(weights: &[S], op_outputs: &[Vec<S>]) -> Result<Vec<S>> {
    if weights.len() != op_outputs.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            got: op_outputs.len(),
        });
    }
    let width = op_outputs.first().map_or(0, Vec::len);
    if op_outputs.iter().any(|o| o.len() != width) {
        return Err(invalid("op outputs differ in length"));
    }
    let mut out = vec![S::zero(); width];
    for (&g, o) in weights.iter().zip(op_outputs) {
        for (acc, &v) in out.iter_mut().zip(o) {
            *acc = *acc + g * v;
        }
    }
    Ok(out)
}

/// `Σ_o σ(α_o)·o(x)`.
pub fn mixed_edge_sigmoid<S: Scalar>(alpha_edge: &[S], op_outputs: &[Vec<S>]) -> Result<Vec<S>> {
    mix(&gates(alpha_edge, Mixing::Sigmoid), op_outputs)
}

/// `Σ_o softmax(α)_o·o(x)`.
pub fn mixed_edge_softmax<S: Scalar>(alpha_edge: &[S], op_outputs: &[Vec<S>]) -> Result<Vec<S>> {
    if alpha_edge.len() != op_outputs.len() {
        return Err(Error::DimensionMismatch {
            expected: alpha_edge.len(),
            got: op_outputs.len(),
        });
    }
    mix(&gates(alpha_edge, Mixing::Softmax), op_outputs)
}

/// Topology and parameter layout shared by both weight groups.
///
/// `alpha` is laid out as `[group][edge][op]`; `w` holds one `m×m`
/// row-major matrix per `(group, edge, linear op)` in the same order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellStructure {
    nodes: usize,
    edges: Vec<(usize, usize)>,
    ops: Vec<OpKind>,
    feature_dim: usize,
}

impl CellStructure {
    /// All edges `(i, j)` with `i < j` into non-input nodes.
    pub fn new(nodes: usize, ops: Vec<OpKind>, feature_dim: usize) -> Result<Self> {
        if nodes < 3 {
            return Err(invalid("a cell needs two inputs and an output node"));
        }
        if ops.is_empty() {
            return Err(invalid("candidate op set is empty"));
        }
        if feature_dim == 0 {
            return Err(invalid("feature dimension must be positive"));
        }
        let edges = (2..nodes)
            .flat_map(|j| (0..j).map(move |i| (i, j)))
            .collect();
        Ok(Self {
            nodes,
            edges,
            ops,
            feature_dim,
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn ops(&self) -> &[OpKind] {
        &self.ops
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn alpha_per_group(&self) -> usize {
        self.edges.len() * self.ops.len()
    }

    pub fn alpha_len(&self) -> usize {
        2 * self.alpha_per_group()
    }

    fn linear_ops(&self) -> usize {
        self.ops.iter().filter(|&&o| o == OpKind::Linear).count()
    }

    fn matrix_len(&self) -> usize {
        self.feature_dim * self.feature_dim
    }

    fn w_per_group(&self) -> usize {
        self.edges.len() * self.linear_ops() * self.matrix_len()
    }

    pub fn w_len(&self) -> usize {
        2 * self.w_per_group()
    }

    pub fn alpha_index(&self, group: Group, edge: usize, op: usize) -> usize {
        group.index() * self.alpha_per_group() + edge * self.ops.len() + op
    }

    pub fn group_range(&self, group: Group) -> std::ops::Range<usize> {
        let n = self.alpha_per_group();
        group.index() * n..(group.index() + 1) * n
    }

    /// Start of the matrix for `(group, edge, op)`, if `op` is linear.
    fn w_offset(&self, group: Group, edge: usize, op: usize) -> Option<usize> {
        if self.ops[op] != OpKind::Linear {
            return None;
        }
        let slot = self.ops[..op]
            .iter()
            .filter(|&&o| o == OpKind::Linear)
            .count();
        Some(
            group.index() * self.w_per_group()
                + (edge * self.linear_ops() + slot) * self.matrix_len(),
        )
    }

    fn check(&self, alpha_len: usize, w_len: usize) -> Result<()> {
        if alpha_len != self.alpha_len() {
            return Err(Error::DimensionMismatch {
                expected: self.alpha_len(),
                got: alpha_len,
            });
        }
        if w_len != self.w_len() {
            return Err(Error::DimensionMismatch {
                expected: self.w_len(),
                got: w_len,
            });
        }
        Ok(())
    }
}

/// `(input, target)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample<S> {
    pub input: Vec<S>,
    pub target: S,
}

/// Disjoint training and validation splits from the seeded teacher.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitData<S> {
    pub train: Vec<Sample<S>>,
    pub val: Vec<Sample<S>>,
}

impl<S: Scalar> SplitData<S> {
    /// Inputs are standard normal; targets are the teacher's prediction plus
    /// Gaussian noise of standard deviation `noise`.
    pub fn generate(
        teacher: &ToyCell<S>,
        n_train: usize,
        n_val: usize,
        noise: f64,
        seed: u64,
    ) -> Result<Self> {
        if n_train == 0 || n_val == 0 {
            return Err(invalid("both splits need at least one sample"));
        }
        let mut rng = rng_from_seed(seed);
        let noise = Normal::new(0.0, noise.max(0.0)).map_err(|e| invalid(e.to_string()))?;
        let m = teacher.structure.feature_dim;
        let mut draw = |n: usize| -> Vec<Sample<S>> {
            (0..n)
                .map(|_| {
                    let input: Vec<S> = (0..m)
                        .map(|_| S::lit(rand_distr::StandardNormal.sample(&mut rng)))
                        .collect();
                    let target = teacher.predict(&input) + S::lit(noise.sample(&mut rng));
                    Sample { input, target }
                })
                .collect()
        };
        let train = draw(n_train);
        let val = draw(n_val);
        Ok(Self { train, val })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyCell<S> {
    pub structure: CellStructure,
    pub mixing: Mixing,
    pub alpha: Vec<S>,
    pub w: Vec<S>,
}

/// Loss with gradients for both parameter vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad<S> {
    pub loss: S,
    pub alpha: Vec<S>,
    pub w: Vec<S>,
}

struct CellPass<S> {
    nodes: Vec<Vec<S>>,
}

impl<S: Scalar> ToyCell<S> {
    pub fn new(structure: CellStructure, mixing: Mixing, alpha: Vec<S>, w: Vec<S>) -> Result<Self> {
        structure.check(alpha.len(), w.len())?;
        Ok(Self {
            structure,
            mixing,
            alpha,
            w,
        })
    }

    /// All architecture weights at `alpha0`, linear maps drawn from N(0, w_scale²).
    pub fn random<R: Rng + ?Sized>(
        structure: CellStructure,
        mixing: Mixing,
        alpha0: S,
        w_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let normal = Normal::new(0.0, w_scale).map_err(|e| invalid(e.to_string()))?;
        let alpha = vec![alpha0; structure.alpha_len()];
        let w = (0..structure.w_len())
            .map(|_| S::lit(normal.sample(rng)))
            .collect();
        Self::new(structure, mixing, alpha, w)
    }

    /// Teacher network for synthetic targets: linear ops on, skips on only
    /// along the `0 → output` edge, every other gate off.
    pub fn teacher(structure: CellStructure, mixing: Mixing, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let mut cell = Self::random(structure, mixing, S::lit(-4.0), 0.6, &mut rng)?;
        let out = cell.structure.nodes - 1;
        for group in Group::ALL {
            for (e, &(i, j)) in cell.structure.edges.clone().iter().enumerate() {
                for (k, &op) in cell.structure.ops.clone().iter().enumerate() {
                    let on = match op {
                        OpKind::Linear => true,
                        OpKind::Skip => i == 0 && j == out,
                        OpKind::Zero => false,
                    };
                    if on {
                        let idx = cell.structure.alpha_index(group, e, k);
                        cell.alpha[idx] = S::lit(4.0);
                    }
                }
            }
        }
        Ok(cell)
    }

    fn edge_gates(&self, alpha: &[S], group: Group, edge: usize) -> Vec<S> {
        let start = self.structure.alpha_index(group, edge, 0);
        gates(&alpha[start..start + self.structure.ops.len()], self.mixing)
    }

    fn apply_op(&self, w: &[S], group: Group, edge: usize, op: usize, x: &[S]) -> Vec<S> {
        let m = self.structure.feature_dim;
        match self.structure.ops[op] {
            OpKind::Linear => {
                let off = self.structure.w_offset(group, edge, op).unwrap();
                let mat = &w[off..off + m * m];
                (0..m)
                    .map(|r| (0..m).map(|c| mat[r * m + c] * x[c]).sum())
                    .collect()
            }
            OpKind::Skip => x.to_vec(),
            OpKind::Zero => vec![S::zero(); m],
        }
    }

    fn cell_forward(&self, alpha: &[S], w: &[S], group: Group, a: &[S], b: &[S]) -> CellPass<S> {
        let m = self.structure.feature_dim;
        let mut nodes = vec![vec![S::zero(); m]; self.structure.nodes];
        nodes[0] = a.to_vec();
        nodes[1] = b.to_vec();
        for (e, &(i, j)) in self.structure.edges.iter().enumerate() {
            let g = self.edge_gates(alpha, group, e);
            for (k, &gk) in g.iter().enumerate() {
                let out = self.apply_op(w, group, e, k, &nodes[i]);
                for (acc, v) in nodes[j].iter_mut().zip(out) {
                    *acc = *acc + gk * v;
                }
            }
        }
        CellPass { nodes }
    }

    /// Backpropagates `upstream = ∂L/∂output` through one cell, accumulating
    /// into the gradient buffers; returns `∂L/∂` of the two inputs.
    #[allow(clippy::too_many_arguments)]
    fn cell_backward(
        &self,
        alpha: &[S],
        w: &[S],
        group: Group,
        pass: &CellPass<S>,
        upstream: Vec<S>,
        g_alpha: &mut [S],
        g_w: &mut [S],
    ) -> (Vec<S>, Vec<S>) {
        let m = self.structure.feature_dim;
        let n_ops = self.structure.ops.len();
        let mut gx = vec![vec![S::zero(); m]; self.structure.nodes];
        gx[self.structure.nodes - 1] = upstream;
        for (e, &(i, j)) in self.structure.edges.iter().enumerate().rev() {
            let g = self.edge_gates(alpha, group, e);
            let mut d_gate = vec![S::zero(); n_ops];
            let gj = gx[j].clone();
            for k in 0..n_ops {
                let out = self.apply_op(w, group, e, k, &pass.nodes[i]);
                d_gate[k] = gj.iter().zip(&out).map(|(&a, &b)| a * b).sum();
                match self.structure.ops[k] {
                    OpKind::Linear => {
                        let off = self.structure.w_offset(group, e, k).unwrap();
                        for r in 0..m {
                            for c in 0..m {
                                g_w[off + r * m + c] =
                                    g_w[off + r * m + c] + g[k] * gj[r] * pass.nodes[i][c];
                                gx[i][c] = gx[i][c] + g[k] * w[off + r * m + c] * gj[r];
                            }
                        }
                    }
                    OpKind::Skip => {
                        for c in 0..m {
                            gx[i][c] = gx[i][c] + g[k] * gj[c];
                        }
                    }
                    OpKind::Zero => {}
                }
            }
            let start = self.structure.alpha_index(group, e, 0);
            match self.mixing {
                Mixing::Sigmoid => {
                    for k in 0..n_ops {
                        g_alpha[start + k] =
                            g_alpha[start + k] + d_gate[k] * g[k] * (S::one() - g[k]);
                    }
                }
                Mixing::Softmax => {
                    let dot: S = g.iter().zip(&d_gate).map(|(&a, &b)| a * b).sum();
                    for k in 0..n_ops {
                        g_alpha[start + k] = g_alpha[start + k] + g[k] * (d_gate[k] - dot);
                    }
                }
            }
        }
        let mut it = gx.into_iter();
        let ga = it.next().unwrap();
        let gb = it.next().unwrap();
        (ga, gb)
    }

    /// Node values of one cell evaluated on inputs `(a, b)` with this cell's parameters.
    pub fn cell_nodes(&self, group: Group, a: &[S], b: &[S]) -> Vec<Vec<S>> {
        self.cell_forward(&self.alpha, &self.w, group, a, b).nodes
    }

    fn predict_with(&self, alpha: &[S], w: &[S], u: &[S]) -> S {
        let out = self.structure.nodes - 1;
        let normal = self.cell_forward(alpha, w, Group::Normal, u, u);
        let red = self.cell_forward(alpha, w, Group::Reduction, u, &normal.nodes[out]);
        let r = &red.nodes[out];
        r.iter().copied().sum::<S>() / S::from_usize(r.len()).unwrap()
    }

    pub fn predict(&self, u: &[S]) -> S {
        self.predict_with(&self.alpha, &self.w, u)
    }

    /// Mean squared error on `samples` at arbitrary parameters.
    pub fn loss_at(&self, alpha: &[S], w: &[S], samples: &[Sample<S>]) -> S {
        let n = S::from_usize(samples.len()).unwrap();
        samples
            .iter()
            .map(|s| {
                let d = self.predict_with(alpha, w, &s.input) - s.target;
                d * d
            })
            .sum::<S>()
            / n
    }

    /// Mean squared error and its analytic gradients at arbitrary parameters.
    pub fn loss_grad_at(&self, alpha: &[S], w: &[S], samples: &[Sample<S>]) -> LossGrad<S> {
        let out = self.structure.nodes - 1;
        let m = S::from_usize(self.structure.feature_dim).unwrap();
        let n = S::from_usize(samples.len()).unwrap();
        let mut g_alpha = vec![S::zero(); alpha.len()];
        let mut g_w = vec![S::zero(); w.len()];
        let mut loss = S::zero();
        for s in samples {
            let u = &s.input;
            let normal = self.cell_forward(alpha, w, Group::Normal, u, u);
            let red = self.cell_forward(alpha, w, Group::Reduction, u, &normal.nodes[out]);
            let r = &red.nodes[out];
            let pred = r.iter().copied().sum::<S>() / m;
            let diff = pred - s.target;
            loss = loss + diff * diff;
            let d_pred = S::lit(2.0) * diff / n;
            let upstream = vec![d_pred / m; r.len()];
            let (_, g_h) = self.cell_backward(
                alpha,
                w,
                Group::Reduction,
                &red,
                upstream,
                &mut g_alpha,
                &mut g_w,
            );
            self.cell_backward(
                alpha,
                w,
                Group::Normal,
                &normal,
                g_h,
                &mut g_alpha,
                &mut g_w,
            );
        }
        LossGrad {
            loss: loss / n,
            alpha: g_alpha,
            w: g_w,
        }
    }

    pub fn train_loss(&self, data: &SplitData<S>) -> S {
        self.loss_at(&self.alpha, &self.w, &data.train)
    }

    pub fn val_loss(&self, data: &SplitData<S>) -> S {
        self.loss_at(&self.alpha, &self.w, &data.val)
    }

    /// `∇_w L_train(α, w)`.
    pub fn grad_w_train(&self, data: &SplitData<S>) -> Vec<S> {
        self.loss_grad_at(&self.alpha, &self.w, &data.train).w
    }

    /// `∇_α L_val(α, w)`.
    pub fn grad_alpha_val(&self, data: &SplitData<S>) -> Vec<S> {
        self.loss_grad_at(&self.alpha, &self.w, &data.val).alpha
    }

    /// Approximate architecture gradient `∇_α L_val(α, w − ξ∇_w L_train(α, w))`.
    ///
    /// `ξ = 0` uses the analytic gradient; otherwise the composed map is
    /// differentiated by central differences over `α`.
    pub fn architecture_gradient(&self, data: &SplitData<S>, xi: S) -> Result<Vec<S>> {
        architecture_gradient_at(self, &self.alpha, &self.w, data, xi)
    }

    pub fn group_means(&self) -> GroupMeans {
        self.structure.group_means(&self.alpha)
    }
}

/// Architecture gradient at explicit parameters; see [`ToyCell::architecture_gradient`].
pub fn architecture_gradient_at<S: Scalar>(
    cell: &ToyCell<S>,
    alpha: &[S],
    w: &[S],
    data: &SplitData<S>,
    xi: S,
) -> Result<Vec<S>> {
    if !(xi >= S::zero()) {
        return Err(invalid("xi must be non-negative"));
    }
    if xi == S::zero() {
        return Ok(cell.loss_grad_at(alpha, w, &data.val).alpha);
    }
    let unrolled = |a: &[S]| -> S {
        let gw = cell.loss_grad_at(a, w, &data.train).w;
        let w1: Vec<S> = w.iter().zip(&gw).map(|(&wi, &gi)| wi - xi * gi).collect();
        cell.loss_at(a, &w1, &data.val)
    };
    let h = S::lit(ARCH_FD_STEP);
    let mut probe = alpha.to_vec();
    let mut grad = Vec::with_capacity(alpha.len());
    for i in 0..alpha.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = unrolled(&probe);
        probe[i] = orig - h;
        let down = unrolled(&probe);
        probe[i] = orig;
        grad.push((up - down) / (h + h));
    }
    Ok(grad)
}

fn ensure_finite<S: Scalar>(what: &'static str, v: &[S]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// One alternating search iteration: a gradient step on `α` using the
/// approximate architecture gradient at `(α_t, w_t)`, then a gradient step on
/// `w` using `∇_w L_train(α_{t+1}, w_t)`.
pub fn darts_alternating_step<S: Scalar>(
    cell: &ToyCell<S>,
    data: &SplitData<S>,
    lr_alpha: S,
    lr_w: S,
    xi: S,
) -> Result<ToyCell<S>> {
    ensure_finite("architecture weights", &cell.alpha)?;
    ensure_finite("operation weights", &cell.w)?;
    let g_alpha = cell.architecture_gradient(data, xi)?;
    ensure_finite("architecture gradient", &g_alpha)?;
    let alpha: Vec<S> = cell
        .alpha
        .iter()
        .zip(&g_alpha)
        .map(|(&a, &g)| a - lr_alpha * g)
        .collect();
    ensure_finite("updated architecture weights", &alpha)?;
    let g_w = cell.loss_grad_at(&alpha, &cell.w, &data.train).w;
    ensure_finite("weight gradient", &g_w)?;
    let w: Vec<S> = cell
        .w
        .iter()
        .zip(&g_w)
        .map(|(&wi, &g)| wi - lr_w * g)
        .collect();
    ensure_finite("updated operation weights", &w)?;
    Ok(ToyCell {
        structure: cell.structure.clone(),
        mixing: cell.mixing,
        alpha,
        w,
    })
}

/// Keep mask: entry `i` is kept iff `σ(α_i) > threshold`.
pub fn discretize<S: Scalar>(alpha: &[S], threshold: S) -> Vec<bool> {
    alpha.iter().map(|&a| sigmoid(a) > threshold).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Validity {
    Valid,
    Invalid { groups: Vec<Group> },
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }

    /// Names of the groups that cannot propagate activations.
    pub fn reason(&self) -> Option<String> {
        match self {
            Validity::Valid => None,
            Validity::Invalid { groups } => Some(
                groups
                    .iter()
                    .map(|g| g.name())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
        }
    }
}

/// A group is invalid when no chain of kept, non-zero ops connects an input
/// node to the output node.
pub fn validity_check(mask: &[bool], structure: &CellStructure) -> Result<Validity> {
    if mask.len() != structure.alpha_len() {
        return Err(Error::DimensionMismatch {
            expected: structure.alpha_len(),
            got: mask.len(),
        });
    }
    let mut bad = Vec::new();
    for group in Group::ALL {
        let mut reach = vec![false; structure.nodes];
        reach[0] = true;
        reach[1] = true;
        // edges are ordered by destination, so one pass settles reachability
        for (e, &(i, j)) in structure.edges.iter().enumerate() {
            let active = structure
                .ops
                .iter()
                .enumerate()
                .any(|(k, &op)| op != OpKind::Zero && mask[structure.alpha_index(group, e, k)]);
            if active && reach[i] {
                reach[j] = true;
            }
        }
        if !reach[structure.nodes - 1] {
            bad.push(group);
        }
    }
    Ok(if bad.is_empty() {
        Validity::Valid
    } else {
        Validity::Invalid { groups: bad }
    })
}

/// Arithmetic mean of `σ(α)` over each index range.
pub fn mean_group_weights<S: Scalar>(alpha: &[S], groups: &[std::ops::Range<usize>]) -> Vec<S> {
    groups
        .iter()
        .map(|r| {
            let n = S::from_usize(r.len()).unwrap();
            alpha[r.clone()].iter().map(|&a| sigmoid(a)).sum::<S>() / n
        })
        .collect()
}

impl CellStructure {
    pub fn group_means<S: Scalar>(&self, alpha: &[S]) -> GroupMeans {
        let ranges = [
            self.group_range(Group::Normal),
            self.group_range(Group::Reduction),
        ];
        let m = mean_group_weights(alpha, &ranges);
        GroupMeans {
            normal: m[0].to_f64_lossy(),
            reduction: m[1].to_f64_lossy(),
        }
    }
}
