//! Sticky reflected Brownian motion (the rescaled gap of a left-right
//! Brownian net pair), its exact laws and samplers, a lattice
//! branching-coalescing walk, and the Monte Carlo estimators built on them.

pub mod analytic;
pub mod error;
pub mod fractal;
pub mod net_grid;
pub mod quad;
pub mod sampler;
pub mod seed;
pub mod special;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use seed::SeedSpec;
