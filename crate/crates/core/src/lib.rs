//! Semi-supervised classification with alpha-divergence consistency
//! regularization and a closed-form coordinate-descent update of the target
//! label distribution, plus UDA, FixMatch and supervised baselines.

pub mod augment;
pub mod data;
pub mod error;
pub mod gamma;
pub mod harness;
pub mod model;
pub mod simplex;
pub mod trainers;
pub mod verify;

pub use error::{Error, Result};
pub use model::{Arch, ModelParams};
pub use simplex::ProbVector;
pub use trainers::{Method, RunMetrics, TrainerConfig};
