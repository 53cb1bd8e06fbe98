//! Geodesic flow on the unit tangent bundle of the genus-2 octagon surface.

pub mod correlation;
pub mod frame;
pub mod group;
pub mod line;
pub mod observable;

pub use correlation::{fiber_autocorrelation, sigma2_capital, Sigma2Config, Sigma2Report};
pub use frame::{flow, FlowTime, Frame};
pub use group::{FuchsianGroup, ReducedFrame};
pub use line::FlowLine;
pub use observable::{evaluate_observable, BumpObservable, BumpParams};
