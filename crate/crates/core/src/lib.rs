//! Simulation of the skew product `T(x, y) = (A x, y g_{f(x)})` over a hyperbolic toral
//! automorphism, with the geodesic flow of a compact hyperbolic surface as fiber, and
//! the estimators used to check its anomalous `n^{3/4}` limit behaviour.

pub mod checks;
pub mod error;
pub mod fiber;
pub mod mc;
pub mod scenery;
pub mod skew;
pub mod stats;
pub mod torus;

pub use error::{Error, Result};
pub use mc::Estimate;
