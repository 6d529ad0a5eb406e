pub mod baselines;
pub mod cli;
pub mod data;
pub mod error;
pub mod experiments;
pub mod glm;
pub mod loss;
pub mod metrics;
pub mod mlp;
pub mod model;
pub mod oim;
pub mod predictor;
pub mod synthdata;
pub mod tabular;

pub use data::{Dataset, OutcomeFamily};
pub use error::{Error, Result};
