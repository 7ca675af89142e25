pub mod cli;
pub mod config;
pub mod covariance;
pub mod error;
pub mod montecarlo;
pub mod normal;
pub mod packing;
pub mod rates;
pub mod report;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
