//! Least-cost electrification planning on radial distribution networks.
//!
//! The reference network that would connect every consumer to the grid is
//! loaded as a tree ([`netmodel`]). The greedy [`partitioner`] walks it
//! bottom-up and prunes subtrees whose off-grid supply is cheaper than
//! keeping them on the grid, using the annual cost terms of [`costmodel`].
//! Pruned subtrees become microgrids or isolated systems ([`offgrid`]). A
//! bottom-up agglomerative comparator lives in [`baseline`], synthetic test
//! networks in [`synthgen`], and batch runs and sweeps in [`harness`].

pub mod baseline;
pub mod costmodel;
pub mod delaunay;
pub mod error;
pub mod geojson;
pub mod harness;
pub mod netmodel;
pub mod offgrid;
pub mod partitioner;
pub mod synthgen;

pub use costmodel::{Catalog, CostConfig, DeltaBreakdown};
pub use error::{Error, Result};
pub use netmodel::{build_tree, NetworkDoc, NetworkTree, NodeId, NodeKind};
pub use offgrid::{form_systems, summarize, OffgridSystem, Summary};
pub use partitioner::{run_partitioner, Method, PartitionResult};
