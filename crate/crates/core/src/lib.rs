//! Reconstruction of solids from planar cross-sections and orthographic
//! silhouettes.
//!
//! A cut policy repeatedly separates a cuboid-bounded part from the
//! remaining region of the shape; each part is surfaced by lofting its
//! slice contours. The policy is an actor-critic pair trained with DDPG,
//! warm-started from a corner-based heuristic through behavioral cloning
//! with a Q-filter.
//!
//! Module map:
//! - [`geom`]: voxel grids, slices, projections, meshes, metrics
//! - [`corners`]: Harris corner detection on silhouettes
//! - [`surfacer`]: contour tracing, correspondence, lofting, caps
//! - [`env`]: the sequential-cut environment
//! - [`expert`]: the heuristic demonstration policy
//! - [`neural`]: actor and critic networks with exact gradients
//! - [`trainer`]: replay buffers, pre-training and DDPG training
//! - [`shapes`]: synthetic test solids
//! - [`cli`]: the command implementations behind the `sliceparse` binary

pub mod cli;
pub mod corners;
pub mod env;
pub mod error;
pub mod expert;
pub mod geom;
pub mod neural;
pub mod shapes;
pub mod surfacer;
pub mod trainer;

pub use error::{Error, Result};
