use alloc::boxed::Box;
use alloc::string::String;

use crate::ids::{NodeId, PartitionId, RelationId};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("edge endpoint {0} is not a known node")]
    DanglingEdge(NodeId),
    #[error("relation id {0} out of range")]
    UnknownRelation(RelationId),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("feature row for unknown node `{0}`")]
    DanglingFeature(String),
    #[error("label for unknown node `{0}`")]
    DanglingLabel(String),
    #[error("node `{node}` declared with type `{first}` and later `{second}`")]
    NodeTypeConflict { node: String, first: String, second: String },
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    FeatureDimMismatch { expected: usize, got: usize },
    #[error("no non-empty buckets to partition")]
    NoBuckets,
    #[error("partitions share no nodes and no edges cross between them")]
    NoCrossPartitionNodes,
    #[error("neighborhood-loss denominator is {0}, must be positive")]
    DegenerateDenominator(i64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("non-finite loss in partition {partition} at epoch {epoch} (last finite loss {last_loss})")]
    NonFiniteLoss { partition: PartitionId, epoch: usize, last_loss: f64 },
    #[error("no anchor pairs to fit an alignment")]
    TooFewAnchors,
    #[error("node {0} has no embedding contexts")]
    EmptyContextList(NodeId),
    #[error("insufficient labels: {0}")]
    InsufficientLabels(&'static str),
    #[error("link prediction needs at least 10 edges, graph has {0}")]
    TooFewEdges(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("{stage} stage: {cause}")]
    Stage { stage: &'static str, cause: Box<Error> },
}

impl Error {
    /// Wraps `self` with the pipeline stage it came from, once.
    pub fn in_stage(self, stage: &'static str) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage { stage, cause: Box::new(e) },
        }
    }

    /// The error with any stage tag removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { cause, .. } => cause.root(),
            e => e,
        }
    }
}
