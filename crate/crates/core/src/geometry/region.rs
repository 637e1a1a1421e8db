use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::math::{dist, dot, Vec3};

/// Spatial predicate selecting part of the boundary.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "type", deny_unknown_fields))]
pub enum Region {
    #[default]
    All,
    Sphere { center: Vec3, radius: f64 },
    Box { min: Vec3, max: Vec3 },
    /// `normal · x ≥ offset`
    HalfSpace { normal: Vec3, offset: f64 },
    And { regions: Vec<Region> },
    Or { regions: Vec<Region> },
    Not { region: Box<Region> },
}

impl Region {
    pub fn contains(&self, x: Vec3) -> bool {
        match self {
            Region::All => true,
            Region::Sphere { center, radius } => dist(x, *center) <= *radius,
            Region::Box { min, max } => (0..3).all(|i| x[i] >= min[i] && x[i] <= max[i]),
            Region::HalfSpace { normal, offset } => dot(*normal, x) >= *offset,
            Region::And { regions } => regions.iter().all(|r| r.contains(x)),
            Region::Or { regions } => regions.iter().any(|r| r.contains(x)),
            Region::Not { region } => !region.contains(x),
        }
    }

    pub fn and(self, other: Region) -> Region {
        Region::And { regions: alloc::vec![self, other] }
    }

    pub fn not(self) -> Region {
        Region::Not { region: Box::new(self) }
    }

    /// `z ≥ height`
    pub fn above(height: f64) -> Region {
        Region::HalfSpace { normal: [0.0, 0.0, 1.0], offset: height }
    }

    /// `z ≤ height`
    pub fn below(height: f64) -> Region {
        Region::HalfSpace { normal: [0.0, 0.0, -1.0], offset: -height }
    }
}
