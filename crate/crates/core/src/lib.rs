//! Co-simulation of a roadside-LiDAR "mirror" of an intersection.
//!
//! The real-world side simulates traffic ([`scenario`]) and a roadside LiDAR
//! ([`lidar`]), runs perception ([`perception`]) and ships the detections
//! over an impaired channel ([`protocol`]). The mirror side rebuilds the
//! objects ([`mirror`]) for applications such as the CACC follower in
//! [`cacc`]. [`dataset`] records KITTI-style training data and
//! [`orchestrator`] wires everything together for the `cmm` binary.
// Validation uses `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cacc;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod lidar;
pub mod mirror;
pub mod orchestrator;
pub mod perception;
pub mod protocol;
pub mod rng;
pub mod scenario;

pub use error::{ConfigError, Error};
