//! Per-relation hyperedges: every connected component of a single relation's
//! subgraph becomes one hyperedge, and each relation's hyperedges live in
//! their own bucket.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::iter::FromIterator;

use hashbrown::HashMap;
use rustc_hash::FxBuildHasher;

use crate::exec::Executor;
use crate::graph::HinGraph;
use crate::ids::{BucketId, HyperedgeId, NodeId, RelationId};

/// Connected components of an undirected edge list.
///
/// Each component is sorted ascending; components come in discovery order,
/// which is ascending smallest member. BFS visits neighbors in ascending id
/// order so the traversal itself is reproducible.
pub fn connected_components(edges: &[(NodeId, NodeId)]) -> Vec<Vec<NodeId>> {
    let mut nodes: Vec<NodeId> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let local = |v: NodeId| nodes.binary_search(&v).unwrap();

    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for &(a, b) in edges {
        let (i, j) = (local(a), local(b));
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }

    let mut seen = vec![false; nodes.len()];
    let mut components = Vec::new();
    let mut queue = alloc::collections::VecDeque::new();
    for start in 0..nodes.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(i) = queue.pop_front() {
            comp.push(nodes[i]);
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hyperedge {
    pub id: HyperedgeId,
    pub relation_tags: BTreeSet<RelationId>,
    /// Sorted ascending, non-empty.
    pub node_ids: Vec<NodeId>,
    /// Inactive hyperedges no longer take part in contraction.
    pub active: bool,
    /// Ids of the original components merged into this hyperedge.
    pub origins: Vec<HyperedgeId>,
}

impl Hyperedge {
    pub fn new(id: HyperedgeId, relation: RelationId, node_ids: Vec<NodeId>) -> Self {
        debug_assert!(!node_ids.is_empty());
        debug_assert!(node_ids.windows(2).all(|w| w[0] < w[1]));
        Hyperedge {
            id,
            relation_tags: BTreeSet::from_iter([relation]),
            node_ids,
            active: true,
            origins: vec![id],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.node_ids.binary_search(&v).is_ok()
    }

    #[inline]
    fn order_key(&self) -> (usize, HyperedgeId) {
        (self.len(), self.id)
    }
}

/// Size-ordered hyperedge collection plus the node → hyperedge index.
#[derive(Debug, Clone)]
pub struct Bucket {
    pub id: BucketId,
    order: BTreeSet<(usize, HyperedgeId)>,
    edges: BTreeMap<HyperedgeId, Hyperedge>,
    node_index: HashMap<NodeId, Vec<HyperedgeId>, FxBuildHasher>,
}

impl Bucket {
    pub fn new(id: BucketId) -> Self {
        Bucket {
            id,
            order: BTreeSet::new(),
            edges: BTreeMap::new(),
            node_index: HashMap::default(),
        }
    }

    pub fn from_hyperedges(id: BucketId, edges: impl IntoIterator<Item = Hyperedge>) -> Self {
        let mut b = Bucket::new(id);
        for h in edges {
            b.insert(h);
        }
        b
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn get(&self, id: HyperedgeId) -> Option<&Hyperedge> {
        self.edges.get(&id)
    }

    /// Hyperedges ascending by size, ties by id.
    pub fn iter(&self) -> impl Iterator<Item = &Hyperedge> {
        self.order.iter().map(move |(_, id)| &self.edges[id])
    }

    pub fn ids_in_order(&self) -> Vec<HyperedgeId> {
        self.order.iter().map(|&(_, id)| id).collect()
    }

    /// Hyperedges that contain `v`, ascending by id.
    pub fn hyperedges_of(&self, v: NodeId) -> &[HyperedgeId] {
        self.node_index.get(&v).map_or(&[], Vec::as_slice)
    }

    pub fn insert(&mut self, h: Hyperedge) {
        for &v in &h.node_ids {
            index_add(&mut self.node_index, v, h.id);
        }
        self.order.insert(h.order_key());
        let prev = self.edges.insert(h.id, h);
        debug_assert!(prev.is_none(), "duplicate hyperedge id in bucket");
    }

    pub fn remove(&mut self, id: HyperedgeId) -> Option<Hyperedge> {
        let h = self.edges.remove(&id)?;
        self.order.remove(&h.order_key());
        for &v in &h.node_ids {
            index_remove(&mut self.node_index, v, id);
        }
        Some(h)
    }

    pub fn set_active(&mut self, id: HyperedgeId, active: bool) {
        if let Some(h) = self.edges.get_mut(&id) {
            h.active = active;
        }
    }

    /// Unions `incoming` into the resident hyperedge `target`; the merged
    /// hyperedge takes the smaller of the two ids. The index is patched
    /// in place: only `incoming`'s nodes are added, and the resident's
    /// entries are renamed only when the id changes.
    pub fn merge_into(&mut self, target: HyperedgeId, incoming: Hyperedge) -> HyperedgeId {
        let mut resident = self.edges.remove(&target).expect("merge target missing");
        self.order.remove(&resident.order_key());
        let new_id = resident.id.min(incoming.id);
        if new_id != resident.id {
            for &v in &resident.node_ids {
                index_remove(&mut self.node_index, v, resident.id);
                index_add(&mut self.node_index, v, new_id);
            }
        }
        let mut merged = Vec::with_capacity(resident.len() + incoming.len());
        let (a, b) = (&resident.node_ids, &incoming.node_ids);
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i] < b[j]) {
                merged.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j] < a[i] {
                index_add(&mut self.node_index, b[j], new_id);
                merged.push(b[j]);
                j += 1;
            } else {
                merged.push(a[i]);
                i += 1;
                j += 1;
            }
        }
        resident.id = new_id;
        resident.node_ids = merged;
        resident.relation_tags.extend(incoming.relation_tags);
        resident.origins.extend(incoming.origins);
        resident.origins.sort_unstable();
        self.order.insert(resident.order_key());
        self.edges.insert(new_id, resident);
        new_id
    }

    pub fn into_hyperedges(self) -> Vec<Hyperedge> {
        let Bucket { order, mut edges, .. } = self;
        order.into_iter().map(|(_, id)| edges.remove(&id).unwrap()).collect()
    }

    /// True when the node index is exactly the inverse incidence relation.
    pub fn index_is_consistent(&self) -> bool {
        let mut expected: BTreeMap<NodeId, Vec<HyperedgeId>> = BTreeMap::new();
        for h in self.edges.values() {
            for &v in &h.node_ids {
                expected.entry(v).or_default().push(h.id);
            }
        }
        if expected.len() != self.node_index.len() {
            return false;
        }
        let order_ok = self.order.len() == self.edges.len()
            && self.order.iter().all(|(s, id)| self.edges.get(id).is_some_and(|h| h.len() == *s));
        order_ok
            && expected.iter_mut().all(|(v, ids)| {
                ids.sort_unstable();
                self.node_index.get(v) == Some(ids)
            })
    }
}

fn index_add(index: &mut HashMap<NodeId, Vec<HyperedgeId>, FxBuildHasher>, v: NodeId, id: HyperedgeId) {
    let list = index.entry(v).or_default();
    if let Err(pos) = list.binary_search(&id) {
        list.insert(pos, id);
    }
}

fn index_remove(index: &mut HashMap<NodeId, Vec<HyperedgeId>, FxBuildHasher>, v: NodeId, id: HyperedgeId) {
    if let Some(list) = index.get_mut(&v) {
        if let Ok(pos) = list.binary_search(&id) {
            list.remove(pos);
        }
        if list.is_empty() {
            index.remove(&v);
        }
    }
}

/// One bucket per relation that has edges, ordered by relation id.
///
/// Components are computed per relation on the executor; ids are assigned
/// afterwards, relation-major and in component order.
pub fn generate_hyperedges<E: Executor>(g: &HinGraph, exec: &E) -> Vec<Bucket> {
    let relations: Vec<RelationId> = g.relations().collect();
    let per_relation = exec.map(relations, |r| {
        let edges = g.relation_subgraph(r).expect("relation id from graph");
        (r, connected_components(&edges))
    });
    let mut next = 0u32;
    let mut buckets = Vec::new();
    for (r, comps) in per_relation {
        if comps.is_empty() {
            continue;
        }
        let mut b = Bucket::new(BucketId(r.0));
        for c in comps {
            b.insert(Hyperedge::new(HyperedgeId(next), r, c));
            next += 1;
        }
        buckets.push(b);
    }
    buckets
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketStats {
    /// Total hyperedges (connected components) over all buckets.
    pub count: usize,
    pub largest: usize,
    pub mean_nodes: f64,
}

pub fn bucket_stats(buckets: &[Bucket]) -> BucketStats {
    let sizes = buckets.iter().flat_map(|b| b.iter().map(Hyperedge::len));
    let (mut count, mut largest, mut total) = (0usize, 0usize, 0usize);
    for s in sizes {
        count += 1;
        largest = largest.max(s);
        total += s;
    }
    BucketStats {
        count,
        largest,
        mean_nodes: if count == 0 { 0.0 } else { total as f64 / count as f64 },
    }
}
