//! Dense integer identifiers. Every external string id is interned to one of
//! these on load so downstream code can index plain vectors.

use core::fmt;

macro_rules! dense_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl From<usize> for $name {
            #[inline]
            fn from(i: usize) -> Self {
                $name(i as u32)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

dense_id!(
    /// Interned node.
    NodeId
);
dense_id!(
    /// Interned relation (edge) type, dense in `[0, |R|)`.
    RelationId
);
dense_id!(NodeTypeId);
dense_id!(LabelId);
dense_id!(HyperedgeId);
dense_id!(BucketId);
dense_id!(
    /// Partition index. [`PartitionId::ANCHOR`] is reserved for the anchor network.
    PartitionId
);

impl PartitionId {
    pub const ANCHOR: PartitionId = PartitionId(u32::MAX);

    pub fn is_anchor(self) -> bool {
        self == Self::ANCHOR
    }
}
