//! Starting partitions for the clustering loop.

mod som;
mod ward;

pub use crate::clustering::random_partition;
pub use som::{
    batch_som, partition_from_som, topology_statistic, topology_test, RadiusSchedule, SomConfig,
    SomGrid, SomStart, TopologyTest,
};
pub use ward::{partition_from_dendrogram, ward_cluster, Dendrogram, Merge};
