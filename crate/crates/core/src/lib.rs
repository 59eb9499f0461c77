//! Simulation and verification tools for singular holomorphic foliations by curves.

pub mod brownian;
pub mod cocycle;
pub mod config;
pub mod ergodic;
pub mod error;
pub mod foliation;
pub mod heat;
pub mod integrate;
pub mod metric;
pub mod pesin;
pub mod poly;
pub mod projection;
pub mod stats;
pub mod validate;

pub use error::{Error, Result};
pub use foliation::{AmbientKind, AmbientPoint, CMat, CVec, Classification, Foliation, LinearModel, SingularPoint, Tolerances};
pub use brownian::{LeafPath, RefDomain, SamplerConfig};
pub use config::RunConfig;
pub use ergodic::{Binning, OccupationHistogram, Seeding};
pub use num_complex::Complex64;
pub use poly::Poly;
pub use projection::{IftConfig, ProjectionConfig};
