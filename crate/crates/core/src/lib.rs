//! Mission orchestration and desk-scale simulation for a cooperative
//! surface-vessel / aerial-drone port inspection system.

// `!(x > 0.0)` style checks reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod clients;
pub mod coordinator;
pub mod depgraph;
pub mod executor;
pub mod geometry;
pub mod mission;
pub mod nav;
pub mod plan;
pub mod vehicles;
pub mod world;
