//! Training, sampling and diagnosis of binary restricted Boltzmann machines.

pub mod data;
pub mod dynamics;
pub mod error;
pub mod likelihood;
pub mod math;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod trainer;

pub use data::{BinaryDataset, Format, Split};
pub use error::{RbmError, Result};
pub use model::{Configuration, RbmModel};
pub use rng::SeedSpec;
pub use sampler::{ChainEnsemble, Snapshot};
pub use trainer::{Checkpoint, Scheme, TrainConfig};
