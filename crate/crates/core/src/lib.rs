//! Open ADMM for networks whose agents and links change between ticks.

pub mod admm;
pub mod analysis;
pub mod churn;
pub mod config;
pub mod costs;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod labeled_space;
pub mod oracles;
pub mod simulation;

pub use error::{Error, Result};
