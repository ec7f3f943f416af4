//! Independent reference computations used to check the engine: analytic
//! bounds, ODE trajectories, fair fixed points and discrete-to-ODE gaps.

pub mod bounds;
pub mod fixed_point;
pub mod limiting;
pub mod ode;
pub mod tracking;

pub use bounds::{bounds, safe_epsilon, BoundSet};
pub use fixed_point::{efficient_fair_fixed_point, fair_fixed_point, FixedPointResult};
pub use limiting::{integrate_limiting_ode, limit_points, LimitCluster};
pub use ode::{integrate_full_ode, integrate_full_ode_sampled, OdeTrajectory};
pub use tracking::{tracking_gap, TrackingReport};
