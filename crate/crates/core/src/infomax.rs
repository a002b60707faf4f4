//! Per-partition unsupervised encoder: a GCN trained to tell real node
//! embeddings from embeddings of an edge-corrupted copy of the same
//! partition, scored against a mean-pooled partition summary.
//!
//! Gradients are exact reverse-mode derivatives of the loss below, written
//! out by hand for the three pieces (encoder, readout, discriminator).

use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashSet;
use rand::distributions::{Distribution, Uniform};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxBuildHasher;

use crate::error::{Error, Result};
use crate::ids::{NodeId, PartitionId};
use crate::linalg::{dot, sigmoid, softplus, Matrix};
use crate::subnet::{Partition, SparseAdjacency};

pub const PRELU_INIT: f64 = 0.25;
/// Minimum loss decrease that resets the early-stopping counter.
pub const EARLY_STOP_DELTA: f64 = 1e-4;
pub const SCORE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkerConfig {
    pub dim: usize,
    pub layers: usize,
    pub epochs: usize,
    pub lr: f64,
    pub corruption_rate: f64,
    pub patience: usize,
    pub seed: u64,
}

impl Default for WorkerConfig {
    fn default() -> Self {
        WorkerConfig {
            dim: 32,
            layers: 1,
            epochs: 100,
            lr: 0.01,
            corruption_rate: 0.1,
            patience: 20,
            seed: 0,
        }
    }
}

impl WorkerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be >= 1"));
        }
        if self.layers == 0 {
            return Err(Error::InvalidConfig("GCN needs at least one layer"));
        }
        if !(0.0..=1.0).contains(&self.corruption_rate) {
            return Err(Error::InvalidConfig("corruption rate must be in [0, 1]"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be positive"));
        }
        Ok(())
    }
}

/// Trainable state of one worker. Never shared between partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerParams {
    /// `d0×d` for the first layer, `d×d` after.
    pub weights: Vec<Matrix>,
    /// PReLU slope per encoder layer.
    pub slopes: Vec<f64>,
    /// `2d×d`; the top half multiplies the node embedding, the bottom half the summary.
    pub disc_weight: Matrix,
    pub disc_bias: Vec<f64>,
    pub disc_proj: Vec<f64>,
    pub disc_slope: f64,
}

impl WorkerParams {
    /// Uniform `±1/sqrt(fan_in)` weights, zero bias, PReLU slopes at 0.25.
    pub fn init<R: Rng>(input_dim: usize, dim: usize, layers: usize, rng: &mut R) -> Self {
        let mut uniform = |rows: usize, cols: usize, fan_in: usize| {
            let bound = 1.0 / libm::sqrt(fan_in.max(1) as f64);
            let u = Uniform::new_inclusive(-bound, bound);
            let data = (0..rows * cols).map(|_| u.sample(rng)).collect();
            Matrix::from_vec(rows, cols, data).unwrap()
        };
        let weights = (0..layers)
            .map(|k| {
                let fan_in = if k == 0 { input_dim } else { dim };
                uniform(fan_in, dim, fan_in)
            })
            .collect();
        let disc_weight = uniform(2 * dim, dim, 2 * dim);
        let disc_proj = uniform(1, dim, dim).as_slice().to_vec();
        WorkerParams {
            weights,
            slopes: vec![PRELU_INIT; layers],
            disc_weight,
            disc_bias: vec![0.0; dim],
            disc_proj,
            disc_slope: PRELU_INIT,
        }
    }

    fn zeros_like(&self) -> Self {
        WorkerParams {
            weights: self.weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect(),
            slopes: vec![0.0; self.slopes.len()],
            disc_weight: Matrix::zeros(self.disc_weight.rows(), self.disc_weight.cols()),
            disc_bias: vec![0.0; self.disc_bias.len()],
            disc_proj: vec![0.0; self.disc_proj.len()],
            disc_slope: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.disc_bias.len()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.first().map_or(0, Matrix::rows)
    }

    /// All scalars in a fixed order.
    pub fn values_mut(&mut self) -> Vec<&mut f64> {
        let mut out: Vec<&mut f64> = Vec::new();
        for w in &mut self.weights {
            out.extend(w.as_mut_slice().iter_mut());
        }
        out.extend(self.slopes.iter_mut());
        out.extend(self.disc_weight.as_mut_slice().iter_mut());
        out.extend(self.disc_bias.iter_mut());
        out.extend(self.disc_proj.iter_mut());
        out.push(&mut self.disc_slope);
        out
    }

    pub fn values(&self) -> Vec<f64> {
        self.clone().values_mut().into_iter().map(|x| *x).collect()
    }

    fn axpy(&mut self, alpha: f64, g: &WorkerParams) {
        let gv = g.values();
        for (p, gi) in self.values_mut().into_iter().zip(gv) {
            *p += alpha * gi;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|x| x.is_finite())
    }
}

/// Embeddings of one partition; row `i` belongs to `node_ids[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub partition_id: PartitionId,
    pub node_ids: Vec<NodeId>,
    pub z: Matrix,
}

impl EmbeddingMatrix {
    pub fn row_of(&self, v: NodeId) -> Option<&[f64]> {
        self.node_ids.binary_search(&v).ok().map(|i| self.z.row(i))
    }

    pub fn dim(&self) -> usize {
        self.z.cols()
    }
}

/// `D^{-1/2} A D^{-1/2}` applied without materializing it.
struct Propagator<'a> {
    adj: &'a SparseAdjacency,
    inv_sqrt_deg: Vec<f64>,
}

impl<'a> Propagator<'a> {
    fn new(adj: &'a SparseAdjacency) -> Self {
        let inv_sqrt_deg = (0..adj.n()).map(|i| 1.0 / libm::sqrt(adj.degree(i) as f64)).collect();
        Propagator { adj, inv_sqrt_deg }
    }

    fn apply(&self, h: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(h.rows(), h.cols());
        for i in 0..self.adj.n() {
            let di = self.inv_sqrt_deg[i];
            for &j in self.adj.row(i) {
                let w = di * self.inv_sqrt_deg[j as usize];
                let src = h.row(j as usize);
                for (o, x) in out.row_mut(i).iter_mut().zip(src) {
                    *o += w * x;
                }
            }
        }
        out
    }
}

#[inline]
fn prelu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

struct EncoderTrace {
    propagated: Vec<Matrix>,
    pre_activation: Vec<Matrix>,
    out: Matrix,
}

fn check_inputs(x: &Matrix, adj: &SparseAdjacency, params: &WorkerParams) -> Result<()> {
    if x.rows() != adj.n() {
        return Err(Error::ShapeMismatch("feature rows != adjacency size"));
    }
    if x.cols() != params.input_dim() {
        return Err(Error::ShapeMismatch("feature width != first layer input"));
    }
    if params.weights.len() != params.slopes.len() {
        return Err(Error::ShapeMismatch("one PReLU slope per layer"));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("features"));
    }
    if !params.is_finite() {
        return Err(Error::NonFinite("parameters"));
    }
    Ok(())
}

fn encode(x: &Matrix, prop: &Propagator<'_>, params: &WorkerParams) -> Result<EncoderTrace> {
    let mut h = x.clone();
    let mut propagated = Vec::with_capacity(params.weights.len());
    let mut pre_activation = Vec::with_capacity(params.weights.len());
    for (w, &a) in params.weights.iter().zip(&params.slopes) {
        let p = prop.apply(&h);
        let u = p.matmul(w)?;
        let mut next = u.clone();
        next.as_mut_slice().iter_mut().for_each(|v| *v = prelu(*v, a));
        propagated.push(p);
        pre_activation.push(u);
        h = next;
    }
    Ok(EncoderTrace { propagated, pre_activation, out: h })
}

fn encode_backward(
    trace: &EncoderTrace,
    mut d_out: Matrix,
    prop: &Propagator<'_>,
    params: &WorkerParams,
    grads: &mut WorkerParams,
) -> Result<()> {
    for k in (0..params.weights.len()).rev() {
        let u = &trace.pre_activation[k];
        let a = params.slopes[k];
        let mut d_slope = 0.0;
        for (g, &uv) in d_out.as_mut_slice().iter_mut().zip(u.as_slice()) {
            if uv <= 0.0 {
                d_slope += *g * uv;
                *g *= a;
            }
        }
        grads.slopes[k] += d_slope;
        let dw = trace.propagated[k].t_matmul(&d_out)?;
        grads.weights[k].as_mut_slice().iter_mut().zip(dw.as_slice()).for_each(|(g, d)| *g += d);
        if k > 0 {
            let dp = d_out.matmul_t(&params.weights[k])?;
            d_out = prop.apply(&dp);
        }
    }
    Ok(())
}

/// Encoder output `Z` for features `x` over adjacency `adj` (self-loops included).
pub fn gcn_forward(x: &Matrix, adj: &SparseAdjacency, params: &WorkerParams) -> Result<Matrix> {
    check_inputs(x, adj, params)?;
    let z = encode(x, &Propagator::new(adj), params)?.out;
    if !z.is_finite() {
        return Err(Error::NonFinite("encoder output"));
    }
    Ok(z)
}

/// Logistic sigmoid of the column means.
pub fn readout(z: &Matrix) -> Vec<f64> {
    z.column_means().into_iter().map(sigmoid).collect()
}

fn summary_bias(s: &[f64], params: &WorkerParams) -> Vec<f64> {
    let d = params.dim();
    let mut c = params.disc_bias.clone();
    for (i, &si) in s.iter().enumerate() {
        for (cj, w) in c.iter_mut().zip(params.disc_weight.row(d + i)) {
            *cj += si * w;
        }
    }
    c
}

fn disc_logit(z: &[f64], c: &[f64], params: &WorkerParams) -> f64 {
    let d = params.dim();
    let mut q = c.to_vec();
    for (i, &zi) in z.iter().enumerate().take(d) {
        for (qj, w) in q.iter_mut().zip(params.disc_weight.row(i)) {
            *qj += zi * w;
        }
    }
    q.iter().zip(&params.disc_proj).map(|(&qj, &wj)| prelu(qj, params.disc_slope) * wj).sum()
}

/// `sigmoid(PReLU([z, s] W_D + b) · w)`.
pub fn discriminator(z: &[f64], s: &[f64], params: &WorkerParams) -> Result<f64> {
    let d = params.dim();
    if z.len() != d || s.len() != d || params.disc_weight.rows() != 2 * d || params.disc_weight.cols() != d {
        return Err(Error::ShapeMismatch("discriminator inputs"));
    }
    Ok(sigmoid(disc_logit(z, &summary_bias(s, params), params)))
}

/// Binary cross-entropy: `-(Σ ln pos + Σ ln(1 - neg)) / (N + Ñ)` with
/// scores clamped to `[1e-7, 1 - 1e-7]`.
pub fn dgi_loss(pos_scores: &[f64], neg_scores: &[f64]) -> f64 {
    let n = pos_scores.len() + neg_scores.len();
    if n == 0 {
        return 0.0;
    }
    let clamp = |p: f64| p.clamp(SCORE_EPS, 1.0 - SCORE_EPS);
    let pos: f64 = pos_scores.iter().map(|&p| libm::log(clamp(p))).sum();
    let neg: f64 = neg_scores.iter().map(|&p| libm::log(1.0 - clamp(p))).sum();
    -(pos + neg) / n as f64
}

/// An edge-corrupted copy of a partition.
#[derive(Debug, Clone)]
pub struct Corrupted {
    pub adjacency: SparseAdjacency,
    pub features: Matrix,
    /// Original local index of each surviving row.
    pub kept: Vec<usize>,
}

/// Deletes `ceil(rate·m)` of the `m` off-diagonal edges and inserts as many
/// pairs absent from `adj` (fewer when not enough exist). Nodes that had
/// edges and lost all of them are dropped along with their feature rows.
pub fn corrupt<R: Rng>(adj: &SparseAdjacency, x: &Matrix, rate: f64, rng: &mut R) -> Corrupted {
    let n = adj.n();
    let edges = adj.off_diagonal_pairs();
    let m = edges.len();
    let k = libm::ceil(rate * m as f64) as usize;
    if k == 0 {
        return Corrupted { adjacency: adj.clone(), features: x.clone(), kept: (0..n).collect() };
    }
    let k = k.min(m);
    let mut deleted = vec![false; m];
    for i in index::sample(rng, m, k).into_iter() {
        deleted[i] = true;
    }
    let mut pairs: Vec<(usize, usize)> =
        edges.iter().zip(&deleted).filter(|(_, &d)| !d).map(|(e, _)| *e).collect();

    let total_pairs = n * n.saturating_sub(1) / 2;
    let absent = total_pairs - m;
    let inserts = k.min(absent);
    if inserts > 0 {
        if absent <= 4 * inserts {
            let candidates: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|&(i, j)| !adj.contains(i, j))
                .collect();
            pairs.extend(index::sample(rng, candidates.len(), inserts).into_iter().map(|i| candidates[i]));
        } else {
            let mut chosen: HashSet<(usize, usize), FxBuildHasher> = HashSet::default();
            let mut order = Vec::with_capacity(inserts);
            while order.len() < inserts {
                let a = rng.gen_range(0..n);
                let b = rng.gen_range(0..n);
                if a == b {
                    continue;
                }
                let e = (a.min(b), a.max(b));
                if !adj.contains(e.0, e.1) && chosen.insert(e) {
                    order.push(e);
                }
            }
            pairs.extend(order);
        }
    }

    let mut had = vec![false; n];
    for &(i, j) in &edges {
        had[i] = true;
        had[j] = true;
    }
    let mut has = vec![false; n];
    for &(i, j) in &pairs {
        has[i] = true;
        has[j] = true;
    }
    let kept: Vec<usize> = (0..n).filter(|&i| has[i] || !had[i]).collect();
    let mut remap = vec![usize::MAX; n];
    for (new, &old) in kept.iter().enumerate() {
        remap[old] = new;
    }
    let adjacency = SparseAdjacency::from_pairs(kept.len(), pairs.iter().map(|&(i, j)| (remap[i], remap[j])));
    Corrupted { adjacency, features: x.select_rows(&kept), kept }
}

/// Loss on one (clean, corrupted) pair of inputs, via stable logits.
pub fn loss(
    params: &WorkerParams,
    x: &Matrix,
    adj: &SparseAdjacency,
    neg: &Corrupted,
) -> Result<f64> {
    Ok(loss_and_gradient_inner(params, x, adj, neg, false)?.0)
}

/// Loss and its exact gradient with respect to every parameter.
pub fn loss_and_gradient(
    params: &WorkerParams,
    x: &Matrix,
    adj: &SparseAdjacency,
    neg: &Corrupted,
) -> Result<(f64, WorkerParams)> {
    let (l, g) = loss_and_gradient_inner(params, x, adj, neg, true)?;
    Ok((l, g.unwrap()))
}

struct DiscBatch {
    logits: Vec<f64>,
    q: Matrix,
}

fn disc_batch(z: &Matrix, c: &[f64], params: &WorkerParams) -> Result<DiscBatch> {
    let d = params.dim();
    let top = Matrix::from_vec(d, d, params.disc_weight.as_slice()[..d * d].to_vec())?;
    let mut q = z.matmul(&top)?;
    for i in 0..q.rows() {
        q.row_mut(i).iter_mut().zip(c).for_each(|(qv, cv)| *qv += cv);
    }
    let logits = q
        .iter_rows()
        .map(|r| r.iter().zip(&params.disc_proj).map(|(&v, &w)| prelu(v, params.disc_slope) * w).sum())
        .collect();
    Ok(DiscBatch { logits, q })
}

/// Backward through the discriminator for one batch given `d loss / d logit`.
/// Returns `d loss / d z` and accumulates `d loss / d c` into `dc`.
fn disc_backward(
    z: &Matrix,
    batch: &DiscBatch,
    dlogit: &[f64],
    params: &WorkerParams,
    grads: &mut WorkerParams,
    dc: &mut [f64],
) -> Result<Matrix> {
    let d = params.dim();
    let a = params.disc_slope;
    let mut dq = Matrix::zeros(batch.q.rows(), d);
    for i in 0..batch.q.rows() {
        let dx = dlogit[i];
        let q = batch.q.row(i);
        let row = dq.row_mut(i);
        for j in 0..d {
            let h = prelu(q[j], a);
            grads.disc_proj[j] += dx * h;
            let dh = dx * params.disc_proj[j];
            if q[j] > 0.0 {
                row[j] = dh;
            } else {
                grads.disc_slope += dh * q[j];
                row[j] = dh * a;
            }
        }
    }
    let dtop = z.t_matmul(&dq)?;
    for (g, v) in grads.disc_weight.as_mut_slice()[..d * d].iter_mut().zip(dtop.as_slice()) {
        *g += v;
    }
    for r in dq.iter_rows() {
        dc.iter_mut().zip(r).for_each(|(c, v)| *c += v);
    }
    let top = Matrix::from_vec(d, d, params.disc_weight.as_slice()[..d * d].to_vec())?;
    dq.matmul_t(&top)
}

fn loss_and_gradient_inner(
    params: &WorkerParams,
    x: &Matrix,
    adj: &SparseAdjacency,
    neg: &Corrupted,
    want_grad: bool,
) -> Result<(f64, Option<WorkerParams>)> {
    check_inputs(x, adj, params)?;
    check_inputs(&neg.features, &neg.adjacency, params)?;
    let d = params.dim();
    let prop_pos = Propagator::new(adj);
    let prop_neg = Propagator::new(&neg.adjacency);
    let pos = encode(x, &prop_pos, params)?;
    let negt = encode(&neg.features, &prop_neg, params)?;
    let n = pos.out.rows();
    let total = (n + negt.out.rows()) as f64;

    let s = readout(&pos.out);
    let c = summary_bias(&s, params);
    let bp = disc_batch(&pos.out, &c, params)?;
    let bn = disc_batch(&negt.out, &c, params)?;
    let l = (bp.logits.iter().map(|&x| softplus(-x)).sum::<f64>()
        + bn.logits.iter().map(|&x| softplus(x)).sum::<f64>())
        / total;
    if !want_grad {
        return Ok((l, None));
    }

    let mut grads = params.zeros_like();
    let mut dc = vec![0.0; d];
    let dpos: Vec<f64> = bp.logits.iter().map(|&x| (sigmoid(x) - 1.0) / total).collect();
    let dneg: Vec<f64> = bn.logits.iter().map(|&x| sigmoid(x) / total).collect();
    let mut dz_pos = disc_backward(&pos.out, &bp, &dpos, params, &mut grads, &mut dc)?;
    let dz_neg = disc_backward(&negt.out, &bn, &dneg, params, &mut grads, &mut dc)?;

    // c = s W_bottom + b
    grads.disc_bias.iter_mut().zip(&dc).for_each(|(g, v)| *g += v);
    let mut ds = vec![0.0; d];
    for i in 0..d {
        let wrow = params.disc_weight.row(d + i);
        ds[i] = dot(wrow, &dc);
        let grow = grads.disc_weight.row_mut(d + i);
        grow.iter_mut().zip(&dc).for_each(|(g, v)| *g += s[i] * v);
    }
    // s = sigmoid(mean(Z))
    if n > 0 {
        let dm: Vec<f64> = ds.iter().zip(&s).map(|(g, sv)| g * sv * (1.0 - sv) / n as f64).collect();
        for i in 0..n {
            dz_pos.row_mut(i).iter_mut().zip(&dm).for_each(|(g, v)| *g += v);
        }
    }

    encode_backward(&pos, dz_pos, &prop_pos, params, &mut grads)?;
    encode_backward(&negt, dz_neg, &prop_neg, params, &mut grads)?;
    Ok((l, Some(grads)))
}

/// Result of training one partition.
#[derive(Debug, Clone)]
pub struct WorkerOutput {
    pub embedding: EmbeddingMatrix,
    /// Loss recorded at each epoch, before that epoch's update.
    pub losses: Vec<f64>,
    pub params: WorkerParams,
}

/// Seed of the worker-local stream for partition `id`.
pub fn worker_seed(seed: u64, id: PartitionId) -> u64 {
    seed ^ u64::from(id.0)
}

/// Full-batch gradient descent on one partition with early stopping; the
/// returned embedding is the encoder output on the uncorrupted partition.
pub fn train_worker(p: &Partition, cfg: &WorkerConfig) -> Result<WorkerOutput> {
    cfg.validate()?;
    let seed = worker_seed(cfg.seed, p.id);
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corrupt_rng = ChaCha8Rng::seed_from_u64(seed);
    corrupt_rng.set_stream(1);

    let mut params = WorkerParams::init(p.features.cols(), cfg.dim, cfg.layers, &mut init_rng);
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for epoch in 0..cfg.epochs {
        let neg = corrupt(&p.adjacency, &p.features, cfg.corruption_rate, &mut corrupt_rng);
        let (l, grads) = loss_and_gradient(&params, &p.features, &p.adjacency, &neg)?;
        if !l.is_finite() || !grads.is_finite() {
            return Err(Error::NonFiniteLoss {
                partition: p.id,
                epoch,
                last_loss: losses.last().copied().unwrap_or(f64::NAN),
            });
        }
        losses.push(l);
        params.axpy(-cfg.lr, &grads);
        if l < best - EARLY_STOP_DELTA {
            best = l;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    let z = gcn_forward(&p.features, &p.adjacency, &params)?;
    Ok(WorkerOutput {
        embedding: EmbeddingMatrix { partition_id: p.id, node_ids: p.node_ids.clone(), z },
        losses,
        params,
    })
}
