//! Motion planning for vehicles in strong planar incompressible flows.

pub mod flowfield;
pub mod geometry;

pub use flowfield::{FlowError, FlowField, FlowKind, GridField, Interpolation};
pub use geometry::{Rect, Vec2};
pub mod metricspace;
pub mod planner;
pub mod propagate;
pub mod sampling;
pub mod streamctl;
