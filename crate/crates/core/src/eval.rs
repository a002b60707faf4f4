//! Downstream evaluation: node classification (macro/micro F1) and link
//! prediction (AUC) on learned embeddings.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::HinGraph;
use crate::ids::{LabelId, NodeId};
use crate::linalg::{sigmoid, Matrix};

/// Every reported metric is the mean over this many seeded runs.
pub const EVAL_RUNS: u64 = 5;
/// L2 penalty on logistic weights, keeps separable problems bounded.
pub const CLASSIFIER_L2: f64 = 1e-4;
/// Fewest edges link prediction accepts.
pub const MIN_LINK_EDGES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub train_fraction: f64,
    pub hidden_link_fraction: f64,
    pub classifier_epochs: usize,
    pub classifier_lr: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { train_fraction: 0.7, hidden_link_fraction: 0.2, classifier_epochs: 300, classifier_lr: 0.5 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(self.train_fraction) {
            return Err(Error::InvalidConfig("train_fraction must lie in (0, 1)"));
        }
        if !open_unit(self.hidden_link_fraction) {
            return Err(Error::InvalidConfig("hidden_link_fraction must lie in (0, 1)"));
        }
        if self.classifier_epochs == 0 {
            return Err(Error::InvalidConfig("classifier_epochs must be >= 1"));
        }
        if !(self.classifier_lr > 0.0 && self.classifier_lr.is_finite()) {
            return Err(Error::InvalidConfig("classifier_lr must be positive"));
        }
        Ok(())
    }
}

fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Per-column standardization fitted on training rows.
#[derive(Debug, Clone)]
struct Standardizer {
    mean: Vec<f64>,
    inv_std: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &Matrix) -> Self {
        let mean = x.column_means();
        let mut var = vec![0.0; x.cols()];
        for row in x.iter_rows() {
            for ((v, a), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (a - m) * (a - m);
            }
        }
        let n = x.rows().max(1) as f64;
        let inv_std = var
            .into_iter()
            .map(|v| {
                let s = libm::sqrt(v / n);
                if s > 1e-12 { 1.0 / s } else { 1.0 }
            })
            .collect();
        Standardizer { mean, inv_std }
    }

    fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.center_by(&self.mean);
        for i in 0..out.rows() {
            out.row_mut(i).iter_mut().zip(&self.inv_std).for_each(|(a, s)| *a *= s);
        }
        out
    }
}

/// Independent per-column logistic regressions (one-vs-rest) trained by
/// full-batch gradient descent from zero weights.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    scaler: Standardizer,
    weights: Matrix,
    bias: Vec<f64>,
}

impl LogisticModel {
    /// `targets` is `n × c` with entries in {0, 1}.
    pub fn fit(x: &Matrix, targets: &Matrix, epochs: usize, lr: f64) -> Result<Self> {
        if x.rows() != targets.rows() || x.rows() == 0 {
            return Err(Error::ShapeMismatch("classifier inputs and targets differ in rows"));
        }
        let scaler = Standardizer::fit(x);
        let xs = scaler.apply(x);
        let (n, c) = (x.rows() as f64, targets.cols());
        let mut weights = Matrix::zeros(x.cols(), c);
        let mut bias = vec![0.0; c];
        for _ in 0..epochs {
            let mut resid = xs.matmul(&weights)?;
            for i in 0..resid.rows() {
                let t = targets.row(i);
                for (j, r) in resid.row_mut(i).iter_mut().enumerate() {
                    *r = (sigmoid(*r + bias[j]) - t[j]) / n;
                }
            }
            let gw = xs.t_matmul(&resid)?;
            for (w, g) in weights.as_mut_slice().iter_mut().zip(gw.as_slice()) {
                *w -= lr * (g + CLASSIFIER_L2 * *w);
            }
            for row in resid.iter_rows() {
                bias.iter_mut().zip(row).for_each(|(b, r)| *b -= lr * r);
            }
        }
        if !weights.is_finite() {
            return Err(Error::NonFinite("classifier weights"));
        }
        Ok(LogisticModel { scaler, weights, bias })
    }

    /// Per-column probabilities.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let mut p = self.scaler.apply(x).matmul(&self.weights)?;
        for i in 0..p.rows() {
            p.row_mut(i).iter_mut().zip(&self.bias).for_each(|(v, b)| *v = sigmoid(*v + b));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Scores {
    pub macro_f1: f64,
    pub micro_f1: f64,
}

/// Macro and micro F1 over `classes` classes for set-valued truths and
/// predictions. A class with no true and no predicted member scores 0.
pub fn f1_scores(truth: &[BTreeSet<usize>], pred: &[BTreeSet<usize>], classes: usize) -> F1Scores {
    let (mut tp, mut fp, mut fne) = (vec![0usize; classes], vec![0usize; classes], vec![0usize; classes]);
    for (t, p) in truth.iter().zip(pred) {
        for &c in p {
            if t.contains(&c) { tp[c] += 1 } else { fp[c] += 1 }
        }
        for &c in t.difference(p) {
            fne[c] += 1;
        }
    }
    let f1 = |tp: usize, fp: usize, fne: usize| {
        let denom = 2 * tp + fp + fne;
        if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 }
    };
    let macro_f1 = (0..classes).map(|c| f1(tp[c], fp[c], fne[c])).sum::<f64>() / classes.max(1) as f64;
    let micro_f1 = f1(tp.iter().sum(), fp.iter().sum(), fne.iter().sum());
    F1Scores { macro_f1, micro_f1 }
}

fn embedding_dim(embeddings: &BTreeMap<NodeId, Vec<f64>>) -> Result<usize> {
    let d = embeddings.values().next().map(Vec::len).ok_or(Error::ShapeMismatch("no embeddings"))?;
    if embeddings.values().any(|e| e.len() != d) {
        return Err(Error::ShapeMismatch("embedding rows differ in width"));
    }
    Ok(d)
}

/// Stratified split by each node's smallest label. Every stratum with two or
/// more nodes contributes at least one node to each side.
pub fn stratified_split<R: Rng>(
    labeled: &[(NodeId, BTreeSet<LabelId>)],
    train_fraction: f64,
    rng: &mut R,
) -> (Vec<usize>, Vec<usize>) {
    let mut strata: BTreeMap<LabelId, Vec<usize>> = BTreeMap::new();
    for (i, (_, ls)) in labeled.iter().enumerate() {
        if let Some(&first) = ls.iter().next() {
            strata.entry(first).or_default().push(i);
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (_, mut members) in strata {
        members.shuffle(rng);
        let n = members.len();
        let k = if n == 1 { 1 } else { (libm::round(train_fraction * n as f64) as usize).clamp(1, n - 1) };
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Mean macro/micro F1 of a one-vs-rest logistic classifier over seeded
/// stratified splits. Single-label data predicts the arg-max class;
/// multi-label data predicts every class with probability at least 0.5.
/// Labeled nodes without an embedding are skipped.
pub fn node_classification_eval(
    embeddings: &BTreeMap<NodeId, Vec<f64>>,
    labels: &BTreeMap<NodeId, BTreeSet<LabelId>>,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<F1Scores> {
    cfg.validate()?;
    let labeled: Vec<(NodeId, BTreeSet<LabelId>)> = labels
        .iter()
        .filter(|(v, ls)| !ls.is_empty() && embeddings.contains_key(v))
        .map(|(v, ls)| (*v, ls.clone()))
        .collect();
    let mut counts: BTreeMap<LabelId, usize> = BTreeMap::new();
    for (_, ls) in &labeled {
        ls.iter().for_each(|l| *counts.entry(*l).or_default() += 1);
    }
    if counts.len() < 2 {
        return Err(Error::InsufficientLabels("fewer than two classes"));
    }
    if counts.values().any(|&c| c < 2) {
        return Err(Error::InsufficientLabels("a class has fewer than two labeled nodes"));
    }
    let d = embedding_dim(embeddings)?;
    let class_of: BTreeMap<LabelId, usize> = counts.keys().enumerate().map(|(i, l)| (*l, i)).collect();
    let classes = class_of.len();
    let multi = labeled.iter().any(|(_, ls)| ls.len() > 1);
    let truth: Vec<BTreeSet<usize>> = labeled.iter().map(|(_, ls)| ls.iter().map(|l| class_of[l]).collect()).collect();

    let rows = |idx: &[usize]| -> Result<Matrix> {
        let data = idx.iter().flat_map(|&i| embeddings[&labeled[i].0].iter().copied()).collect();
        Matrix::from_vec(idx.len(), d, data)
    };
    let (mut macro_sum, mut micro_sum) = (0.0, 0.0);
    for run in 0..EVAL_RUNS {
        let (train, test) = stratified_split(&labeled, cfg.train_fraction, &mut run_rng(seed, run));
        let mut targets = Matrix::zeros(train.len(), classes);
        for (r, &i) in train.iter().enumerate() {
            truth[i].iter().for_each(|&c| targets[(r, c)] = 1.0);
        }
        let model = LogisticModel::fit(&rows(&train)?, &targets, cfg.classifier_epochs, cfg.classifier_lr)?;
        let proba = model.predict_proba(&rows(&test)?)?;
        let pred: Vec<BTreeSet<usize>> = proba
            .iter_rows()
            .map(|p| {
                if multi {
                    (0..classes).filter(|&c| p[c] >= 0.5).collect()
                } else {
                    let best = (0..classes).fold(0, |b, c| if p[c] > p[b] { c } else { b });
                    BTreeSet::from([best])
                }
            })
            .collect();
        let test_truth: Vec<BTreeSet<usize>> = test.iter().map(|&i| truth[i].clone()).collect();
        let s = f1_scores(&test_truth, &pred, classes);
        macro_sum += s.macro_f1;
        micro_sum += s.micro_f1;
    }
    let runs = EVAL_RUNS as f64;
    Ok(F1Scores { macro_f1: macro_sum / runs, micro_f1: micro_sum / runs })
}

/// Area under the ROC curve by the rank-sum statistic; tied scores count
/// one half. NaN when either side is empty.
pub fn auc(pos: &[f64], neg: &[f64]) -> f64 {
    if pos.is_empty() || neg.is_empty() {
        return f64::NAN;
    }
    let mut all: Vec<(f64, bool)> = pos.iter().map(|&s| (s, true)).chain(neg.iter().map(|&s| (s, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid_rank * all[i..=j].iter().filter(|x| x.1).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos.len() as f64, neg.len() as f64);
    (rank_sum - p * (p + 1.0) / 2.0) / (p * n)
}

/// Edges held out for link prediction. Whole node pairs are hidden, so a
/// pair linked under several relations disappears from `observed` entirely.
#[derive(Debug, Clone)]
pub struct LinkSplit {
    pub observed: HinGraph,
    /// Indices into the full graph's edge list.
    pub hidden_edges: BTreeSet<usize>,
    /// Hidden unordered pairs, `(small, large)`.
    pub hidden_pairs: Vec<(NodeId, NodeId)>,
}

fn distinct_pairs(g: &HinGraph) -> BTreeMap<(NodeId, NodeId), Vec<usize>> {
    let mut pairs: BTreeMap<(NodeId, NodeId), Vec<usize>> = BTreeMap::new();
    for (i, e) in g.edges().iter().enumerate() {
        if e.src != e.dst {
            pairs.entry(e.pair()).or_default().push(i);
        }
    }
    pairs
}

/// Hides `round(fraction · pairs)` distinct linked pairs, at least one and
/// leaving at least one.
pub fn split_links(g: &HinGraph, fraction: f64, seed: u64) -> Result<LinkSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig("hidden_link_fraction must lie in (0, 1)"));
    }
    let pairs = distinct_pairs(g);
    if g.edge_count() < MIN_LINK_EDGES || pairs.len() < 2 {
        return Err(Error::TooFewEdges(g.edge_count()));
    }
    let mut keys: Vec<(NodeId, NodeId)> = pairs.keys().copied().collect();
    keys.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = (libm::round(fraction * keys.len() as f64) as usize).clamp(1, keys.len() - 1);
    let mut hidden_pairs = keys[..k].to_vec();
    hidden_pairs.sort_unstable();
    let hidden_edges: BTreeSet<usize> = hidden_pairs.iter().flat_map(|p| pairs[p].iter().copied()).collect();
    Ok(LinkSplit { observed: g.without_edges(&hidden_edges), hidden_edges, hidden_pairs })
}

/// Uniform unordered node pairs that are not linked in `g`, not self pairs
/// and not in `exclude`. Returns fewer than `count` only if the graph has
/// fewer such pairs.
pub fn sample_non_edges<R: Rng>(
    g: &HinGraph,
    count: usize,
    exclude: &BTreeSet<(NodeId, NodeId)>,
    rng: &mut R,
) -> Vec<(NodeId, NodeId)> {
    let n = g.node_count();
    let linked = |a: NodeId, b: NodeId| g.neighbors(a).binary_search(&b).is_ok();
    let total = n * n.saturating_sub(1) / 2;
    let linked_pairs: usize = g.nodes().map(|v| g.neighbors(v).len()).sum::<usize>() / 2;
    let available = total - linked_pairs;
    if available <= 4 * count {
        let mut all: Vec<(NodeId, NodeId)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (NodeId(a as u32), NodeId(b as u32))))
            .filter(|&(a, b)| !linked(a, b) && !exclude.contains(&(a, b)))
            .collect();
        all.shuffle(rng);
        all.truncate(count);
        return all;
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = NodeId(rng.gen_range(0..n as u32));
        let b = NodeId(rng.gen_range(0..n as u32));
        if a == b {
            continue;
        }
        let p = if a < b { (a, b) } else { (b, a) };
        if linked(p.0, p.1) || exclude.contains(&p) || !seen.insert(p) {
            continue;
        }
        out.push(p);
    }
    out
}

/// Elementwise product of the endpoint embeddings; a node without an
/// embedding contributes zeros.
pub fn hadamard_features(pairs: &[(NodeId, NodeId)], embeddings: &BTreeMap<NodeId, Vec<f64>>, d: usize) -> Matrix {
    let zero = vec![0.0; d];
    let mut m = Matrix::zeros(pairs.len(), d);
    for (i, (a, b)) in pairs.iter().enumerate() {
        let ea = embeddings.get(a).unwrap_or(&zero);
        let eb = embeddings.get(b).unwrap_or(&zero);
        m.row_mut(i).iter_mut().zip(ea.iter().zip(eb)).for_each(|(o, (x, y))| *o = x * y);
    }
    m
}

/// Mean AUC over seeded runs for a fixed split. Each run samples negatives
/// for training (as many as observed pairs) and for testing (as many as
/// hidden pairs) from pairs unlinked in the full graph `g`, fits a logistic
/// scorer on observed-versus-negative Hadamard features and ranks the
/// hidden pairs against the test negatives.
pub fn link_prediction_eval_split(
    g: &HinGraph,
    split: &LinkSplit,
    embeddings: &BTreeMap<NodeId, Vec<f64>>,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<f64> {
    cfg.validate()?;
    let d = embedding_dim(embeddings)?;
    let train_pos: Vec<(NodeId, NodeId)> = distinct_pairs(&split.observed).into_keys().collect();
    let mut total = 0.0;
    for run in 0..EVAL_RUNS {
        let mut rng = run_rng(seed, run);
        let train_neg = sample_non_edges(g, train_pos.len(), &BTreeSet::new(), &mut rng);
        let used: BTreeSet<(NodeId, NodeId)> = train_neg.iter().copied().collect();
        let test_neg = sample_non_edges(g, split.hidden_pairs.len(), &used, &mut rng);
        if train_neg.is_empty() || test_neg.is_empty() {
            return Err(Error::InsufficientLabels("graph has no unlinked pairs to sample"));
        }
        let train_pairs: Vec<(NodeId, NodeId)> = train_pos.iter().chain(&train_neg).copied().collect();
        let mut targets = Matrix::zeros(train_pairs.len(), 1);
        (0..train_pos.len()).for_each(|i| targets[(i, 0)] = 1.0);
        let model = LogisticModel::fit(
            &hadamard_features(&train_pairs, embeddings, d),
            &targets,
            cfg.classifier_epochs,
            cfg.classifier_lr,
        )?;
        let score = |pairs: &[(NodeId, NodeId)]| -> Result<Vec<f64>> {
            Ok(model.predict_proba(&hadamard_features(pairs, embeddings, d))?.as_slice().to_vec())
        };
        total += auc(&score(&split.hidden_pairs)?, &score(&test_neg)?);
    }
    Ok(total / EVAL_RUNS as f64)
}

/// Link prediction with a split drawn from `seed`. The embeddings should
/// come from `split_links(g, cfg.hidden_link_fraction, seed).observed`;
/// otherwise hidden links have leaked into them.
pub fn link_prediction_eval(
    g: &HinGraph,
    embeddings: &BTreeMap<NodeId, Vec<f64>>,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<f64> {
    let split = split_links(g, cfg.hidden_link_fraction, seed)?;
    link_prediction_eval_split(g, &split, embeddings, cfg, seed)
}
