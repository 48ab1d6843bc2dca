//! Convex monotone maps on R^n: tangentially stable fixed points, critical
//! graphs, non-expansiveness certificates and periodic orbits.

pub mod config;
pub mod corpus;
pub mod dynamics;
pub mod error;
pub mod fixed_points;
pub mod homogeneous;
pub mod io;
pub mod map_model;
pub mod nonneg_matrix;
pub mod suites;

pub use config::{AnalysisConfig, Caps, Tolerances};
pub use error::{Error, Result};
