//! Exact combinatorics of monotonically ordered non-crossing partitions.

pub mod closed_forms;
pub mod harness;
pub mod cumulants;
pub mod laplace;
pub mod oracle;
pub mod partition;
pub mod poly;
pub mod stats;
pub mod tree;

pub use partition::{validate_noncrossing, BlockRef, NcPartition, PartitionError};
pub use poly::ExactPolynomial;
pub use stats::{StatisticId, FirstKindInput, SecondKindInput};
pub use tree::{OrderedNcPartition, TreeCode, TreeError, TreeKind};
