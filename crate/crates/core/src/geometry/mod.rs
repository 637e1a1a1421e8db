//! Surface sampling, projection, iso-surface extraction and integral oracles.

mod marching;
mod mesh;
mod project;
mod region;
mod sampling;
mod volume;

pub use marching::marching_cubes;
pub use mesh::{triangle_area, Mesh, ScalarChannel};
pub use project::{project_to_surface, ray_root, ProjectOptions};
pub use region::Region;
pub use sampling::{
    area_weights, nearest_area_weights, sampling_point, assign_area_weights, has_zero_crossing, sample_surface, sample_surface_with,
    SamplingOptions,
};
pub use volume::{estimate_volume, grid_values, Grid};

use crate::math::Vec3;

/// Default surface residual tolerance `|f| ≤ τ`.
pub const SURFACE_TOL: f64 = 1e-5;

/// A boundary point with its differential data.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurfaceSample {
    pub position: Vec3,
    pub normal: Vec3,
    pub curvature: Option<f64>,
    /// Surface measure carried by this sample (length²).
    pub area_weight: Option<f64>,
}
