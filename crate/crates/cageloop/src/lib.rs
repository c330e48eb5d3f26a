//! Caging-loop and grasp-pose synthesis for point-cloud shapes.
//!
//! The pipeline turns an oriented point cloud into ranked closed curves that
//! topologically cage the object, plus gripper poses that realize them:
//!
//! 1. fit a signed implicit surface to the cloud ([`rbf`]),
//! 2. voxelize the offset object and its grasping shell ([`grid`]),
//! 3. grow geodesic distance fields inside the shell ([`dfield`]),
//! 4. read caging loops off saddle/maximum points of those fields ([`morse`]),
//! 5. shorten, filter, dedup and rank the loops ([`refine`]),
//! 6. derive a gripper frame per loop ([`pose`]).
//!
//! [`pipeline::run`] wires the stages together; the `cageloop` binary wraps it
//! in a CLI. All randomness is seeded and all stages iterate in fixed order,
//! so a given (input, config, seed) triple reproduces byte-identical loop and
//! pose files.

pub mod config;
pub mod dfield;
pub mod error;
pub mod grid;
pub mod pipeline;
pub mod gripper;
pub mod hull;
pub mod knn;
pub mod morse;
pub mod pose;
pub mod rbf;
pub mod refine;
pub mod shape;

pub use error::{Error, Result};
pub use gripper::GripperSpec;

/// 3D point in meters.
pub type Point = nalgebra::Point3<f64>;
/// 3D vector (directions, normals, offsets).
pub type Vec3 = nalgebra::Vector3<f64>;
