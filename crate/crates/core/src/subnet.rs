//! Induced subnetworks: the unit of work handed to an embedding worker.

use alloc::collections::BTreeSet;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::HinGraph;
use crate::ids::{HyperedgeId, NodeId, PartitionId, RelationId};
use crate::linalg::Matrix;

/// Feature width used when the network carries no node features.
pub const DEFAULT_FALLBACK_DIM: usize = 64;

/// Symmetric 0/1 matrix with every diagonal entry set, stored as sorted rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseAdjacency {
    offsets: Vec<usize>,
    cols: Vec<u32>,
}

impl SparseAdjacency {
    /// Symmetrizes `pairs`, drops duplicates and adds self-loops.
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut rows: Vec<Vec<u32>> = (0..n).map(|i| alloc::vec![i as u32]).collect();
        for (a, b) in pairs {
            if a != b {
                rows[a].push(b as u32);
                rows[b].push(a as u32);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        offsets.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            cols.extend(r);
            offsets.push(cols.len());
        }
        SparseAdjacency { offsets, cols }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Column indices of row `i`, including `i` itself.
    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.cols[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Row sum, self-loop included.
    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.row(i).binary_search(&(j as u32)).is_ok()
    }

    /// Undirected off-diagonal edges as `(i, j)` with `i < j`.
    pub fn off_diagonal_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n() {
            out.extend(self.row(i).iter().map(|&j| j as usize).filter(|&j| j > i).map(|j| (i, j)));
        }
        out
    }

    pub fn off_diagonal_count(&self) -> usize {
        (self.cols.len() - self.n()) / 2
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.n();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for &j in self.row(i) {
                m[(i, j as usize)] = 1.0;
            }
        }
        m
    }
}

/// A node subset with its induced multi-relational structure.
#[derive(Debug, Clone)]
pub struct Partition {
    pub id: PartitionId,
    /// Ascending; row `i` of `adjacency` and `features` is `node_ids[i]`.
    pub node_ids: Vec<NodeId>,
    pub adjacency: SparseAdjacency,
    pub features: Matrix,
    pub origin_relations: BTreeSet<RelationId>,
    /// Source connected components whose union forms this partition.
    pub origin_hyperedges: Vec<HyperedgeId>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn local_index(&self, v: NodeId) -> Option<usize> {
        self.node_ids.binary_search(&v).ok()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.local_index(v).is_some()
    }
}

/// Induces the subnetwork over `node_ids` using edges of every relation.
///
/// Features are copied from `g` when present; otherwise row `i` is a one-hot
/// at column `i mod fallback_dim`.
pub fn induce_partition<I>(
    g: &HinGraph,
    node_ids: I,
    id: PartitionId,
    fallback_dim: usize,
) -> Result<Partition>
where
    I: IntoIterator<Item = NodeId>,
{
    let mut nodes: Vec<NodeId> = node_ids.into_iter().collect();
    nodes.sort_unstable();
    nodes.dedup();
    if let Some(bad) = nodes.iter().find(|v| !g.contains(**v)) {
        return Err(Error::UnknownNode(bad.to_string()));
    }
    let mut pairs = Vec::new();
    for (i, &v) in nodes.iter().enumerate() {
        for u in g.neighbors(v) {
            if *u > v {
                if let Ok(j) = nodes.binary_search(u) {
                    pairs.push((i, j));
                }
            }
        }
    }
    let adjacency = SparseAdjacency::from_pairs(nodes.len(), pairs);
    let features = match g.features() {
        Some(x) => x.select_rows(&nodes.iter().map(|v| v.index()).collect::<Vec<_>>()),
        None => {
            if fallback_dim == 0 {
                return Err(Error::InvalidConfig("fallback feature dimension must be >= 1"));
            }
            let mut m = Matrix::zeros(nodes.len(), fallback_dim);
            for i in 0..nodes.len() {
                m[(i, i % fallback_dim)] = 1.0;
            }
            m
        }
    };
    Ok(Partition {
        id,
        node_ids: nodes,
        adjacency,
        features,
        origin_relations: BTreeSet::new(),
        origin_hyperedges: Vec::new(),
    })
}
