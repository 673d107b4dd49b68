//! Generative design workbench core.
//!
//! - [`sim`]: agent-based differential-growth simulator producing layer stacks
//! - [`metrics`]: printability, relative coverage and formal complexity
//! - [`cma`] and [`evolution`]: CMA-ES over normalized genomes, run orchestration
//! - [`interp`]: linear interpolation between two evolved genomes
//! - [`export`]: G-code toolpaths and OBJ meshes
//!
//! Evaluations fan out over rayon when the `parallel` feature is enabled
//! (the default); results never depend on the feature.

pub mod cma;
pub mod error;
pub mod evolution;
pub mod export;
pub mod genome;
pub mod geometry;
pub mod interp;
pub mod metrics;
pub mod parallel;
pub mod sim;

pub use error::{Error, Result};
pub use genome::{decode_genome, Genome};
pub use geometry::Point;
pub use metrics::{evaluate, FitnessVector, MetricsConfig};
pub use sim::{grow, LayerSnapshot, LayerStack, SimConfig};
