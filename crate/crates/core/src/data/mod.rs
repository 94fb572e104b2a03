//! Federated datasets: the synthetic generator and Non-IID partitioners.

mod dataset;
mod partition;
mod synthetic;

pub use dataset::{split_train_test, Dataset};
pub use partition::{
    dirichlet_sample, largest_remainder, partition, partition_dirichlet,
    partition_quantity_lognormal, partition_uniform, DirichletPartition, PartitionConfig,
    PartitionScheme,
};
pub use synthetic::{generate_synthetic, ClientSplit, FederatedData, SyntheticConfig, SIZE_LOGNORMAL_SIGMA};
