//! Bucket contraction, final partition assembly, anchor-network extraction
//! and the neighborhood-loss quality metric.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxBuildHasher;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::graph::HinGraph;
use crate::hypergraph::{Bucket, Hyperedge};
use crate::ids::{HyperedgeId, NodeId, PartitionId, RelationId};
use crate::subnet::{induce_partition, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionBounds {
    pub lower: usize,
    pub upper: usize,
}

impl PartitionBounds {
    /// Defaults sized for a single workstation.
    pub const DESK: PartitionBounds = PartitionBounds { lower: 200, upper: 800 };
    /// Bounds for million-node graphs.
    pub const MILLION_NODE: PartitionBounds = PartitionBounds { lower: 10_000, upper: 40_000 };

    pub fn new(lower: usize, upper: usize) -> Result<Self> {
        let b = PartitionBounds { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower == 0 || self.lower > self.upper {
            return Err(Error::InvalidConfig("partition bounds need 0 < lower <= upper"));
        }
        Ok(())
    }
}

impl Default for PartitionBounds {
    fn default() -> Self {
        Self::DESK
    }
}

/// Finds the active hyperedge in `target` sharing the most nodes with `h`.
///
/// Overlaps are counted through the target's node index. Ties prefer the
/// smaller hyperedge, then the smaller id. `None` when nothing overlaps.
pub fn score_and_match(h: &Hyperedge, target: &Bucket) -> Option<HyperedgeId> {
    best_match(h, target).map(|(id, _)| id)
}

fn best_match(h: &Hyperedge, target: &Bucket) -> Option<(HyperedgeId, usize)> {
    let mut hits: HashMap<HyperedgeId, usize, FxBuildHasher> = HashMap::default();
    for &v in &h.node_ids {
        for &id in target.hyperedges_of(v) {
            *hits.entry(id).or_insert(0) += 1;
        }
    }
    let mut best: Option<(usize, usize, HyperedgeId)> = None;
    for (id, common) in hits {
        let cand = &target.get(id).expect("indexed hyperedge exists");
        if !cand.active {
            continue;
        }
        let key = (common, cand.len(), id);
        best = match best {
            None => Some(key),
            Some(b) => {
                let better = key.0 > b.0 || (key.0 == b.0 && (key.1, key.2) < (b.1, b.2));
                Some(if better { key } else { b })
            }
        };
    }
    best.map(|(common, _, id)| (id, common))
}

/// Contracts `b1` into `b2`.
///
/// `b1`'s active hyperedges are visited smallest first; each is merged into
/// its best-overlapping active hyperedge of `b2` when the union stays within
/// `bounds.upper`, and passes through unchanged otherwise. Hyperedges larger
/// than the upper bound are deactivated. The result holds every node set of
/// both inputs and carries the smaller bucket id.
pub fn contract_buckets(b1: Bucket, b2: Bucket, bounds: PartitionBounds) -> Bucket {
    let id = b1.id.min(b2.id);
    let mut out = b2;
    out.id = id;
    for hid in out.ids_in_order() {
        if out.get(hid).is_some_and(|h| h.len() > bounds.upper) {
            out.set_active(hid, false);
        }
    }
    let mut passed = Vec::new();
    for mut h in b1.into_hyperedges() {
        if h.len() > bounds.upper {
            h.active = false;
        }
        if !h.active {
            passed.push(h);
            continue;
        }
        match best_match(&h, &out) {
            Some((target, common)) => {
                let merged_len = h.len() + out.get(target).unwrap().len() - common;
                if merged_len <= bounds.upper {
                    out.merge_into(target, h);
                } else {
                    passed.push(h);
                }
            }
            None => passed.push(h),
        }
    }
    for h in passed {
        out.insert(h);
    }
    out
}

/// Partitions plus bookkeeping from the contraction rounds.
#[derive(Debug, Clone)]
pub struct PartitionOutcome {
    pub partitions: Vec<Partition>,
    /// Bucket count before the first round and after each round.
    pub bucket_counts: Vec<usize>,
    /// Node sets that came out of contraction before packing, in final bucket order.
    pub contracted: Vec<Hyperedge>,
    pub isolated: Vec<NodeId>,
}

/// Pairwise bucket contraction until one bucket is left, then seeded greedy
/// packing of hyperedges below `bounds.lower`. Each resulting node set is
/// induced over the full graph; isolated nodes join the smallest partition.
pub fn partition<E: Executor>(
    g: &HinGraph,
    buckets: Vec<Bucket>,
    bounds: PartitionBounds,
    seed: u64,
    fallback_dim: usize,
    exec: &E,
) -> Result<PartitionOutcome> {
    bounds.validate()?;
    let mut buckets: Vec<Bucket> = buckets.into_iter().filter(|b| !b.is_empty()).collect();
    if buckets.is_empty() {
        return Err(Error::NoBuckets);
    }
    buckets.sort_by_key(|b| b.id);
    let mut bucket_counts = vec![buckets.len()];
    while buckets.len() > 1 {
        let mut pairs = Vec::with_capacity(buckets.len() / 2);
        let mut odd = None;
        let mut it = buckets.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => pairs.push((a, b)),
                None => odd = Some(a),
            }
        }
        buckets = exec.map(pairs, |(a, b)| contract_buckets(a, b, bounds));
        buckets.extend(odd);
        bucket_counts.push(buckets.len());
    }
    let contracted = buckets.pop().unwrap().into_hyperedges();

    let mut groups: Vec<Group> = Vec::new();
    let mut small = Vec::new();
    for h in &contracted {
        if h.len() >= bounds.lower {
            groups.push(Group::from(h));
        } else {
            small.push(h);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    small.shuffle(&mut rng);
    let first_packed = groups.len();
    let mut current: Option<Group> = None;
    for h in small {
        current = match current.take() {
            None => Some(Group::from(h)),
            Some(mut c) => {
                if c.union_len(&h.node_ids) > bounds.upper {
                    groups.push(c);
                    Some(Group::from(h))
                } else {
                    c.absorb(h);
                    Some(c)
                }
            }
        };
        if current.as_ref().is_some_and(|c| c.nodes.len() >= bounds.lower) {
            groups.extend(current.take());
        }
    }
    if let Some(c) = current {
        // an undersized leftover folds into the previous packed group when it fits
        let packed_before = groups.len() > first_packed;
        match groups.last_mut() {
            Some(last) if packed_before && last.union_len(&c.nodes) <= bounds.upper => last.absorb_group(c),
            _ => groups.push(c),
        }
    }

    let isolated = g.isolated_nodes();
    if !isolated.is_empty() {
        let smallest = (0..groups.len()).min_by_key(|&i| (groups[i].nodes.len(), i)).unwrap();
        let mut nodes = core::mem::take(&mut groups[smallest].nodes);
        nodes.extend(isolated.iter().copied());
        nodes.sort_unstable();
        nodes.dedup();
        groups[smallest].nodes = nodes;
    }

    let jobs: Vec<(usize, Group)> = groups.into_iter().enumerate().collect();
    let partitions = exec
        .map(jobs, |(i, grp)| {
            let mut p = induce_partition(g, grp.nodes, PartitionId(i as u32), fallback_dim)?;
            p.origin_relations = grp.tags;
            p.origin_hyperedges = grp.origins;
            Ok(p)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(PartitionOutcome { partitions, bucket_counts, contracted, isolated })
}

#[derive(Debug, Clone)]
struct Group {
    nodes: Vec<NodeId>,
    tags: BTreeSet<RelationId>,
    origins: Vec<HyperedgeId>,
}

impl From<&Hyperedge> for Group {
    fn from(h: &Hyperedge) -> Self {
        Group { nodes: h.node_ids.clone(), tags: h.relation_tags.clone(), origins: h.origins.clone() }
    }
}

impl Group {
    fn union_len(&self, other: &[NodeId]) -> usize {
        self.nodes.len() + other.iter().filter(|v| self.nodes.binary_search(v).is_err()).count()
    }

    fn absorb(&mut self, h: &Hyperedge) {
        self.nodes.extend_from_slice(&h.node_ids);
        self.nodes.sort_unstable();
        self.nodes.dedup();
        self.tags.extend(h.relation_tags.iter().copied());
        self.origins.extend_from_slice(&h.origins);
        self.origins.sort_unstable();
    }

    fn absorb_group(&mut self, other: Group) {
        self.nodes.extend(other.nodes);
        self.nodes.sort_unstable();
        self.nodes.dedup();
        self.tags.extend(other.tags);
        self.origins.extend(other.origins);
        self.origins.sort_unstable();
    }
}

/// Shared-context subnetwork whose embedding space is the alignment target.
#[derive(Debug, Clone)]
pub struct AnchorNetwork {
    /// Top-ranked cross-partition nodes chosen from each partition.
    pub anchors: BTreeSet<NodeId>,
    /// Anchors plus their first-order neighbors, induced over the graph.
    pub network: Partition,
    /// Partitions containing each node of the anchor network.
    pub membership: BTreeMap<NodeId, BTreeSet<PartitionId>>,
    /// Anchors taken per partition.
    pub k: usize,
}

impl AnchorNetwork {
    pub fn node_ids(&self) -> &[NodeId] {
        &self.network.node_ids
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.network.contains(v)
    }
}

/// Partition ids containing each node (empty for uncovered nodes).
pub fn memberships(g: &HinGraph, partitions: &[Partition]) -> Vec<Vec<PartitionId>> {
    let mut m = vec![Vec::new(); g.node_count()];
    for p in partitions {
        for v in &p.node_ids {
            m[v.index()].push(p.id);
        }
    }
    m
}

/// Cross-partition candidates of `p`, best first.
///
/// A node qualifies when it sits in at least two partitions or has a
/// neighbor outside `p`. Its rank score is the number of distinct neighbors
/// outside `p` plus the number of other partitions that also hold it.
pub fn anchor_candidates(g: &HinGraph, p: &Partition, membership: &[Vec<PartitionId>]) -> Vec<(NodeId, usize)> {
    let mut out: Vec<(NodeId, usize)> = p
        .node_ids
        .iter()
        .filter_map(|&v| {
            let outside = g.neighbors(v).iter().filter(|u| !p.contains(**u)).count();
            let shared = membership[v.index()].len().saturating_sub(1);
            (outside > 0 || shared > 0).then_some((v, outside + shared))
        })
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

/// Picks the top-k cross-partition nodes of every partition, with `k` the
/// largest value (at least 1) keeping anchors plus their neighbors within
/// `bounds.upper`, and induces the anchor network over `g`.
pub fn extract_anchor_network(
    g: &HinGraph,
    partitions: &[Partition],
    bounds: PartitionBounds,
    fallback_dim: usize,
) -> Result<AnchorNetwork> {
    let membership = memberships(g, partitions);
    let candidates: Vec<Vec<(NodeId, usize)>> =
        partitions.iter().map(|p| anchor_candidates(g, p, &membership)).collect();
    let longest = candidates.iter().map(Vec::len).max().unwrap_or(0);
    if longest == 0 {
        return Err(Error::NoCrossPartitionNodes);
    }

    let mut anchors = BTreeSet::new();
    let mut nodes = BTreeSet::new();
    let mut k = 0;
    for rank in 0..longest {
        let mut add_anchors = Vec::new();
        let mut add_nodes = BTreeSet::new();
        for c in &candidates {
            if let Some(&(v, _)) = c.get(rank) {
                if anchors.contains(&v) {
                    continue;
                }
                add_anchors.push(v);
                for u in core::iter::once(&v).chain(g.neighbors(v)) {
                    if !nodes.contains(u) {
                        add_nodes.insert(*u);
                    }
                }
            }
        }
        if rank > 0 && nodes.len() + add_nodes.len() > bounds.upper {
            break;
        }
        anchors.extend(add_anchors);
        nodes.extend(add_nodes);
        k = rank + 1;
    }

    let network = induce_partition(g, nodes.iter().copied(), PartitionId::ANCHOR, fallback_dim)?;
    let membership = network
        .node_ids
        .iter()
        .map(|v| (*v, membership[v.index()].iter().copied().collect()))
        .collect();
    Ok(AnchorNetwork { anchors, network, membership, k })
}

/// Percentage of first-order neighbor relations lost by partitioning:
/// missing `r`-neighbors summed over every (partition, node, relation),
/// divided by the total `r`-neighborhood size minus `|V|`, times 100.
pub fn avg_neighborhood_loss(g: &HinGraph, partitions: &[Partition]) -> Result<f64> {
    let mut total: i64 = 0;
    for v in g.nodes() {
        for r in g.relations() {
            total += g.relation_neighbors(v, r).len() as i64;
        }
    }
    let denominator = total - g.node_count() as i64;
    if denominator <= 0 {
        return Err(Error::DegenerateDenominator(denominator));
    }
    let mut missing: u64 = 0;
    for p in partitions {
        for &v in &p.node_ids {
            for r in g.relations() {
                missing += g.relation_neighbors(v, r).iter().filter(|u| !p.contains(**u)).count() as u64;
            }
        }
    }
    Ok(missing as f64 / denominator as f64 * 100.0)
}
