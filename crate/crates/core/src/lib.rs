//! Decentralized embedding of heterogeneous information networks.
//!
//! The network is cut into context-preserving subnetworks by contracting
//! per-relation connected components, each subnetwork is embedded by an
//! independent mutual-information worker, and all embeddings are mapped into
//! one space with a rotation + scale + translation fitted on shared anchor
//! nodes.
//!
//! This crate is `no_std` (it needs `alloc`). File formats, threads and the
//! command line live in the `hin-embed` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod align;
pub mod error;
pub mod eval;
pub mod exec;
pub mod graph;
pub mod hypergraph;
pub mod ids;
pub mod infomax;
pub mod linalg;
pub mod partitioner;
pub mod pipeline;
pub mod subnet;
pub mod synthetic;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use graph::{Edge, HinBuilder, HinGraph, NeighborhoodSet};
pub use ids::{BucketId, HyperedgeId, LabelId, NodeId, NodeTypeId, PartitionId, RelationId};
pub use linalg::Matrix;
pub use partitioner::{AnchorNetwork, PartitionBounds};
pub use subnet::{induce_partition, Partition, SparseAdjacency};
