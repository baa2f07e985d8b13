//! Voxel shape model, slicing, projections, connected components and the
//! evaluation metrics.
//!
//! All types are plain values; every operation here is a pure function.

pub mod components;
pub mod dump;
pub mod grid;
pub mod image;
pub mod mesh;
pub mod metrics;
pub mod voxelize;

pub use components::{bresenham, connected_components, count_components, Component};
pub use grid::{
    clip, extract_slices, project, slice_layers, Axis, CrossSection, Cuboid, GridFrame,
    ProjectionImage, View, VoxelGrid,
};
pub use image::Mask2D;
pub use mesh::{Point3, TriMesh};
pub use metrics::{chamfer_l1, chamfer_l1_seeded, surface_iou, volume_iou, CHAMFER_SEED};
pub use voxelize::{voxelize, voxelize_into};
