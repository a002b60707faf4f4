//! In-memory heterogeneous information network.
//!
//! Nodes, node types, relation types and labels are interned to dense ids in
//! first-appearance order. Edges keep the direction they were loaded with but
//! every structural query treats them as undirected.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
use rustc_hash::FxBuildHasher;

use crate::error::{Error, Result};
use crate::ids::{LabelId, NodeId, NodeTypeId, RelationId};
use crate::linalg::Matrix;

type FxMap<K, V> = HashMap<K, V, FxBuildHasher>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub rel: RelationId,
}

impl Edge {
    pub fn new(src: NodeId, dst: NodeId, rel: RelationId) -> Self {
        Edge { src, dst, rel }
    }

    /// Endpoints in ascending order.
    #[inline]
    pub fn pair(&self) -> (NodeId, NodeId) {
        if self.src <= self.dst {
            (self.src, self.dst)
        } else {
            (self.dst, self.src)
        }
    }

    fn undirected_key(&self) -> (NodeId, NodeId, RelationId) {
        let (a, b) = self.pair();
        (a, b, self.rel)
    }
}

/// Compressed neighbor lists, sorted and deduplicated, self excluded.
#[derive(Debug, Clone, Default)]
struct NeighborLists {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
}

impl NeighborLists {
    fn build(n: usize, pairs: impl Iterator<Item = (NodeId, NodeId)>) -> Self {
        let mut lists: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for (a, b) in pairs {
            if a != b {
                lists[a.index()].push(b);
                lists[b.index()].push(a);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for mut l in lists {
            l.sort_unstable();
            l.dedup();
            targets.extend(l);
            offsets.push(targets.len());
        }
        NeighborLists { offsets, targets }
    }

    #[inline]
    fn get(&self, v: NodeId) -> &[NodeId] {
        &self.targets[self.offsets[v.index()]..self.offsets[v.index() + 1]]
    }
}

/// First-order neighborhood of one node under one relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodSet {
    pub node: NodeId,
    pub relation: RelationId,
    pub neighbors: BTreeSet<NodeId>,
}

#[derive(Debug, Clone)]
pub struct HinGraph {
    node_names: Vec<String>,
    node_index: FxMap<String, NodeId>,
    node_types: Vec<NodeTypeId>,
    node_type_names: Vec<String>,
    relation_names: Vec<String>,
    label_names: Vec<String>,
    edges: Vec<Edge>,
    features: Option<Matrix>,
    labels: Option<BTreeMap<NodeId, BTreeSet<LabelId>>>,
    by_relation: Vec<NeighborLists>,
    merged: NeighborLists,
}

impl HinGraph {
    pub fn node_count(&self) -> usize {
        self.node_types.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relation_names.len()
    }

    pub fn node_type_count(&self) -> usize {
        self.node_type_names.len()
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = NodeId> {
        (0..self.node_count()).map(NodeId::from)
    }

    pub fn relations(&self) -> impl ExactSizeIterator<Item = RelationId> {
        (0..self.relation_count()).map(RelationId::from)
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v.index() < self.node_count()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_name(&self, v: NodeId) -> &str {
        &self.node_names[v.index()]
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.node_index.get(name).copied()
    }

    pub fn node_type(&self, v: NodeId) -> NodeTypeId {
        self.node_types[v.index()]
    }

    pub fn node_type_name(&self, t: NodeTypeId) -> &str {
        &self.node_type_names[t.index()]
    }

    pub fn relation_name(&self, r: RelationId) -> &str {
        &self.relation_names[r.index()]
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_names.iter().position(|n| n == name).map(RelationId::from)
    }

    pub fn label_name(&self, l: LabelId) -> &str {
        &self.label_names[l.index()]
    }

    pub fn label_count(&self) -> usize {
        self.label_names.len()
    }

    pub fn features(&self) -> Option<&Matrix> {
        self.features.as_ref()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.features.as_ref().map(Matrix::cols)
    }

    pub fn labels(&self) -> Option<&BTreeMap<NodeId, BTreeSet<LabelId>>> {
        self.labels.as_ref()
    }

    /// Distinct neighbors of `v` across all relations.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        self.merged.get(v)
    }

    /// Distinct `r`-neighbors of `v`, excluding `v`. Ids must be valid.
    pub fn relation_neighbors(&self, v: NodeId, r: RelationId) -> &[NodeId] {
        self.by_relation[r.index()].get(v)
    }

    /// Nodes with no edge in any relation.
    pub fn isolated_nodes(&self) -> Vec<NodeId> {
        let mut touched = vec![false; self.node_count()];
        for e in &self.edges {
            touched[e.src.index()] = true;
            touched[e.dst.index()] = true;
        }
        self.nodes().filter(|v| !touched[v.index()]).collect()
    }

    fn check_relation(&self, r: RelationId) -> Result<()> {
        if r.index() < self.relation_count() {
            Ok(())
        } else {
            Err(Error::UnknownRelation(r))
        }
    }

    fn check_node(&self, v: NodeId) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::UnknownNode(v.to_string()))
        }
    }

    /// The edges of relation `r` as endpoint pairs, in storage order.
    pub fn relation_subgraph(&self, r: RelationId) -> Result<Vec<(NodeId, NodeId)>> {
        self.check_relation(r)?;
        Ok(self.edges.iter().filter(|e| e.rel == r).map(|e| (e.src, e.dst)).collect())
    }

    pub fn neighborhood(&self, v: NodeId, r: RelationId) -> Result<NeighborhoodSet> {
        self.check_node(v)?;
        self.check_relation(r)?;
        Ok(NeighborhoodSet {
            node: v,
            relation: r,
            neighbors: self.relation_neighbors(v, r).iter().copied().collect(),
        })
    }

    /// Same nodes, features and labels with the edges at `removed` (indices
    /// into [`HinGraph::edges`]) dropped.
    pub fn without_edges(&self, removed: &BTreeSet<usize>) -> HinGraph {
        let edges: Vec<Edge> = self
            .edges
            .iter()
            .enumerate()
            .filter(|(i, _)| !removed.contains(i))
            .map(|(_, e)| *e)
            .collect();
        let (by_relation, merged) = index_edges(self.node_count(), self.relation_count(), &edges);
        HinGraph { edges, by_relation, merged, ..self.clone() }
    }
}

fn index_edges(n: usize, relations: usize, edges: &[Edge]) -> (Vec<NeighborLists>, NeighborLists) {
    let by_relation = (0..relations)
        .map(|r| {
            NeighborLists::build(
                n,
                edges.iter().filter(|e| e.rel.index() == r).map(|e| (e.src, e.dst)),
            )
        })
        .collect();
    let merged = NeighborLists::build(n, edges.iter().map(|e| (e.src, e.dst)));
    (by_relation, merged)
}

#[derive(Debug, Default)]
struct Interner {
    names: Vec<String>,
    index: FxMap<String, u32>,
}

impl Interner {
    fn intern(&mut self, name: &str) -> (u32, bool) {
        if let Some(&i) = self.index.get(name) {
            return (i, false);
        }
        let i = self.names.len() as u32;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        (i, true)
    }

    fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }
}

/// Incrementally assembles a [`HinGraph`] from string-keyed records.
#[derive(Debug, Default)]
pub struct HinBuilder {
    nodes: Interner,
    node_types: Vec<NodeTypeId>,
    types: Interner,
    relations: Interner,
    labels: Interner,
    edges: Vec<Edge>,
    seen: hashbrown::HashSet<(NodeId, NodeId, RelationId), FxBuildHasher>,
    features: FxMap<NodeId, Vec<f64>>,
    feature_dim: Option<usize>,
    node_labels: BTreeMap<NodeId, BTreeSet<LabelId>>,
    has_labels: bool,
}

impl HinBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a node (idempotent). A node keeps the type it was first seen with.
    pub fn add_node(&mut self, name: &str, node_type: &str) -> Result<NodeId> {
        let (t, _) = self.types.intern(node_type);
        let (i, fresh) = self.nodes.intern(name);
        if fresh {
            self.node_types.push(NodeTypeId(t));
        } else if self.node_types[i as usize].0 != t {
            return Err(Error::NodeTypeConflict {
                node: name.to_string(),
                first: self.types.names[self.node_types[i as usize].index()].clone(),
                second: node_type.to_string(),
            });
        }
        Ok(NodeId(i))
    }

    pub fn add_relation(&mut self, name: &str) -> RelationId {
        RelationId(self.relations.intern(name).0)
    }

    /// Adds an edge; returns `false` when it duplicates an existing
    /// `(src, dst, rel)` triple in either direction.
    pub fn add_edge(
        &mut self,
        src: &str,
        src_type: &str,
        rel: &str,
        dst: &str,
        dst_type: &str,
    ) -> Result<bool> {
        let s = self.add_node(src, src_type)?;
        let r = self.add_relation(rel);
        let d = self.add_node(dst, dst_type)?;
        Ok(self.push_edge(Edge::new(s, d, r)))
    }

    /// Adds an edge between registered ids.
    pub fn add_edge_ids(&mut self, src: NodeId, dst: NodeId, rel: RelationId) -> Result<bool> {
        for v in [src, dst] {
            if v.index() >= self.node_types.len() {
                return Err(Error::DanglingEdge(v));
            }
        }
        if rel.index() >= self.relations.names.len() {
            return Err(Error::UnknownRelation(rel));
        }
        Ok(self.push_edge(Edge::new(src, dst, rel)))
    }

    fn push_edge(&mut self, e: Edge) -> bool {
        if self.seen.insert(e.undirected_key()) {
            self.edges.push(e);
            true
        } else {
            false
        }
    }

    pub fn set_features(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        let v = self
            .nodes
            .get(name)
            .ok_or_else(|| Error::DanglingFeature(name.to_string()))?;
        match self.feature_dim {
            Some(d) if d != values.len() => {
                return Err(Error::FeatureDimMismatch { expected: d, got: values.len() })
            }
            _ => self.feature_dim = Some(values.len()),
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("node features"));
        }
        self.features.insert(NodeId(v), values);
        Ok(())
    }

    pub fn add_label(&mut self, name: &str, label: &str) -> Result<()> {
        let v = self
            .nodes
            .get(name)
            .ok_or_else(|| Error::DanglingLabel(name.to_string()))?;
        let (l, _) = self.labels.intern(label);
        self.node_labels.entry(NodeId(v)).or_default().insert(LabelId(l));
        self.has_labels = true;
        Ok(())
    }

    pub fn build(self) -> Result<HinGraph> {
        let n = self.node_types.len();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let features = match self.feature_dim {
            None => None,
            Some(d) => {
                let missing = n - self.features.len();
                if missing > 0 {
                    log::warn!("{missing} nodes have no feature row; using zeros");
                }
                let mut m = Matrix::zeros(n, d);
                for (v, row) in self.features {
                    m.row_mut(v.index()).copy_from_slice(&row);
                }
                Some(m)
            }
        };
        let (by_relation, merged) = index_edges(n, self.relations.names.len(), &self.edges);
        let node_index = self
            .nodes
            .index
            .into_iter()
            .map(|(k, v)| (k, NodeId(v)))
            .collect();
        Ok(HinGraph {
            node_names: self.nodes.names,
            node_index,
            node_types: self.node_types,
            node_type_names: self.types.names,
            relation_names: self.relations.names,
            label_names: self.labels.names,
            edges: self.edges,
            features,
            labels: self.has_labels.then_some(self.node_labels),
            by_relation,
            merged,
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// `1 A r0 2 B; 2 B r0 3 A; 4 A r1 5 B`
    pub(crate) fn example_graph() -> HinGraph {
        let mut b = HinBuilder::new();
        b.add_edge("1", "A", "r0", "2", "B").unwrap();
        b.add_edge("2", "B", "r0", "3", "A").unwrap();
        b.add_edge("4", "A", "r1", "5", "B").unwrap();
        b.build().unwrap()
    }

    fn id(g: &HinGraph, name: &str) -> NodeId {
        g.node_id(name).unwrap()
    }

    #[test]
    fn parses_example() {
        let g = example_graph();
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.relation_count(), 2);
        assert_eq!(g.node_type_count(), 2);
        assert_eq!(g.relation_name(RelationId(1)), "r1");
    }

    #[test]
    fn duplicates_are_dropped() {
        let mut b = HinBuilder::new();
        assert!(b.add_edge("1", "A", "r0", "2", "B").unwrap());
        assert!(b.add_edge("2", "B", "r0", "3", "A").unwrap());
        assert!(!b.add_edge("2", "B", "r0", "3", "A").unwrap());
        assert!(!b.add_edge("3", "A", "r0", "2", "B").unwrap());
        assert!(b.add_edge("4", "A", "r1", "5", "B").unwrap());
        let g = b.build().unwrap();
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn relation_subgraph_filters() {
        let g = example_graph();
        assert_eq!(g.relation_subgraph(RelationId(1)).unwrap(), vec![(id(&g, "4"), id(&g, "5"))]);
        assert_eq!(
            g.relation_subgraph(RelationId(0)).unwrap(),
            vec![(id(&g, "1"), id(&g, "2")), (id(&g, "2"), id(&g, "3"))]
        );
        assert_eq!(g.relation_subgraph(RelationId(2)), Err(Error::UnknownRelation(RelationId(2))));
    }

    #[test]
    fn relation_with_no_edges_is_empty() {
        let mut b = HinBuilder::new();
        b.add_edge("1", "A", "r0", "2", "A").unwrap();
        let r_empty = b.add_relation("unused");
        let g = b.build().unwrap();
        assert!(g.relation_subgraph(r_empty).unwrap().is_empty());
    }

    #[test]
    fn neighborhoods() {
        let g = example_graph();
        let n = g.neighborhood(id(&g, "2"), RelationId(0)).unwrap();
        assert_eq!(n.neighbors, [id(&g, "1"), id(&g, "3")].into_iter().collect());
        assert!(g.neighborhood(id(&g, "4"), RelationId(0)).unwrap().neighbors.is_empty());
        assert!(matches!(g.neighborhood(NodeId(99), RelationId(0)), Err(Error::UnknownNode(_))));
        assert!(matches!(
            g.neighborhood(NodeId(0), RelationId(7)),
            Err(Error::UnknownRelation(_))
        ));
    }

    #[test]
    fn self_loop_is_not_a_neighbor() {
        let mut b = HinBuilder::new();
        b.add_edge("a", "T", "r", "a", "T").unwrap();
        b.add_edge("a", "T", "r", "b", "T").unwrap();
        let g = b.build().unwrap();
        let n = g.neighborhood(NodeId(0), RelationId(0)).unwrap();
        assert_eq!(n.neighbors.len(), 1);
    }

    #[test]
    fn dangling_feature_and_label() {
        let mut b = HinBuilder::new();
        b.add_edge("1", "A", "r0", "2", "B").unwrap();
        assert_eq!(b.set_features("9", vec![1.0]), Err(Error::DanglingFeature("9".into())));
        assert_eq!(b.add_label("9", "x"), Err(Error::DanglingLabel("9".into())));
        b.set_features("1", vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            b.set_features("2", vec![1.0]),
            Err(Error::FeatureDimMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn empty_graph_is_an_error() {
        assert!(matches!(HinBuilder::new().build(), Err(Error::EmptyGraph)));
    }

    #[test]
    fn type_conflict_is_an_error() {
        let mut b = HinBuilder::new();
        b.add_edge("1", "A", "r0", "2", "B").unwrap();
        assert!(matches!(
            b.add_edge("1", "B", "r0", "3", "B"),
            Err(Error::NodeTypeConflict { .. })
        ));
    }

    #[test]
    fn removing_edges_keeps_nodes() {
        let g = example_graph();
        let h = g.without_edges(&[2usize].into_iter().collect());
        assert_eq!(h.node_count(), 5);
        assert_eq!(h.edge_count(), 2);
        assert_eq!(h.isolated_nodes(), vec![id(&g, "4"), id(&g, "5")]);
    }

    #[test]
    fn multi_labels() {
        let mut b = HinBuilder::new();
        b.add_edge("1", "A", "r0", "2", "B").unwrap();
        b.add_label("1", "x").unwrap();
        b.add_label("1", "y").unwrap();
        let g = b.build().unwrap();
        assert_eq!(g.labels().unwrap()[&NodeId(0)].len(), 2);
        assert_eq!(g.label_count(), 2);
    }
}
