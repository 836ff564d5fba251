//! Reactive obstacle avoidance by dynamical-system modulation: simulation,
//! file formats, benchmarks and a live WebSocket bridge on top of
//! [`dsavoid_core`].
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod bridge;
pub mod experiment;
pub mod field;
pub mod io;
pub mod runtime;
pub mod scenario;
pub mod scenes;
pub mod sim;
pub mod world;

pub use dsavoid_core as core;
