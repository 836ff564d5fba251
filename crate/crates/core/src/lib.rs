//! Reactive obstacle avoidance by dynamical-system modulation.
//!
//! A nominal velocity command is deflected around obstacles described
//! analytically ([`obstacle::StarObstacle`]), as raw sampled surface points
//! ([`sampled::ScanPointSet`]), or as a fusion of both ([`fusion`]). Every
//! path evaluates a single modulation matrix, so the cost grows linearly in
//! the number of obstacles or points.
//!
//! The crate is `no_std` and only needs `alloc`.
#![cfg_attr(not(test), no_std)]
// `!(a > b)` is used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analytic;
pub mod config;
pub mod error;
pub mod frame;
pub mod fusion;
pub mod kinematics;
pub mod linalg;
pub mod obstacle;
pub mod sampled;

pub use analytic::{modulate_analytic, ObstacleWeights};
pub use config::{AgentConfig, TailOptions};
pub use error::{AvoidError, Result};
pub use frame::ModulationFrame;
pub use fusion::{modulate_mixed, MixedFrame};
pub use kinematics::{ControlPointJacobian, Pose};
pub use linalg::{vec2, Vec2, VecN};
pub use obstacle::{classify, GammaRegion, Shape, StarObstacle, StarShape};
pub use sampled::{modulate_sampled, ScanPointSet};
