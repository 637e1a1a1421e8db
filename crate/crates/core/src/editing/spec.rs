use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::field::ParamMask;
use crate::geometry::Region;
use crate::math::{self, Mat3, Vec3};
use crate::sensitivity::Functional;

/// Prescribed boundary displacement.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "type", deny_unknown_fields))]
pub enum Displacement {
    /// Signed distance along the outward normal.
    Normal { value: f64 },
    Vector { value: Vec3 },
    /// `x ↦ R(x − c) + c + t − x`, `R` given as a rotation vector (axis · angle).
    Rigid { center: Vec3, rotation: Vec3, translation: Vec3 },
    /// One normal distance per listed point.
    NormalPerPoint { values: Vec<f64> },
    /// One vector per listed point.
    VectorPerPoint { values: Vec<Vec3> },
}

/// Displacement attached to a single sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetValue {
    Normal(f64),
    Vector(Vec3),
}

impl TargetValue {
    pub fn scaled(self, s: f64) -> TargetValue {
        match self {
            TargetValue::Normal(d) => TargetValue::Normal(s * d),
            TargetValue::Vector(v) => TargetValue::Vector(math::scale(v, s)),
        }
    }

    /// Goal position for a point at `x` with normal `n`.
    pub fn goal(self, x: Vec3, n: Vec3) -> Vec3 {
        match self {
            TargetValue::Normal(d) => math::add(x, math::scale(n, d)),
            TargetValue::Vector(v) => math::add(x, v),
        }
    }
}

impl Displacement {
    /// Value at the `index`-th point located at `x`.
    pub fn at(&self, index: usize, x: Vec3) -> TargetValue {
        match self {
            Displacement::Normal { value } => TargetValue::Normal(*value),
            Displacement::Vector { value } => TargetValue::Vector(*value),
            Displacement::Rigid { center, rotation, translation } => {
                let r = rotation_matrix(*rotation);
                let rel = math::sub(x, *center);
                let moved = math::add(math::add(math::mat_vec(&r, rel), *center), *translation);
                TargetValue::Vector(math::sub(moved, x))
            }
            Displacement::NormalPerPoint { values } => TargetValue::Normal(values[index]),
            Displacement::VectorPerPoint { values } => TargetValue::Vector(values[index]),
        }
    }

    pub fn is_vector(&self) -> bool {
        !matches!(self, Displacement::Normal { .. } | Displacement::NormalPerPoint { .. })
    }

    fn per_point_len(&self) -> Option<usize> {
        match self {
            Displacement::NormalPerPoint { values } => Some(values.len()),
            Displacement::VectorPerPoint { values } => Some(values.len()),
            _ => None,
        }
    }

    fn is_finite(&self) -> bool {
        let v3 = |v: &Vec3| v.iter().all(|c| c.is_finite());
        match self {
            Displacement::Normal { value } => value.is_finite(),
            Displacement::Vector { value } => v3(value),
            Displacement::Rigid { center, rotation, translation } => {
                v3(center) && v3(rotation) && v3(translation)
            }
            Displacement::NormalPerPoint { values } => math::all_finite(values),
            Displacement::VectorPerPoint { values } => values.iter().all(v3),
        }
    }
}

/// Rodrigues formula for a rotation vector.
pub fn rotation_matrix(w: Vec3) -> Mat3 {
    let theta = math::norm(w);
    let mut r = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    if theta == 0.0 {
        return r;
    }
    let k = math::scale(w, 1.0 / theta);
    let kx = [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]];
    let (s, c) = (libm::sin(theta), 1.0 - libm::cos(theta));
    for i in 0..3 {
        for j in 0..3 {
            let kk: f64 = (0..3).map(|m| kx[i][m] * kx[m][j]).sum();
            r[i][j] += s * kx[i][j] + c * kk;
        }
    }
    r
}

/// Where the targeted samples come from.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Target {
    /// Boundary region sampled for this target.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub region: Option<Region>,
    /// Explicit points, projected onto the surface. Takes precedence over `region`.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub points: Option<Vec<Vec3>>,
    pub displacement: Displacement,
}

impl Target {
    pub fn region(region: Region, displacement: Displacement) -> Self {
        Target { region: Some(region), points: None, displacement }
    }

    pub fn points(points: Vec<Vec3>, displacement: Displacement) -> Self {
        Target { region: None, points: Some(points), displacement }
    }
}

/// How the iteration schedule is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields))]
pub enum EditMode {
    /// `splits` equal increments of the prescribed displacement.
    Split,
    /// Repeatedly target the remaining displacement until the mean target
    /// deviation drops below `tolerance` times its initial value, or the
    /// residual changes by less than `stall` between iterations.
    Converge { tolerance: f64, max_iterations: usize, stall: f64 },
}

impl EditMode {
    pub fn converge(tolerance: f64, max_iterations: usize) -> Self {
        EditMode::Converge { tolerance, max_iterations, stall: 1e-6 }
    }
}

/// A complete edit request.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EditSpec {
    pub targets: Vec<Target>,
    /// Region held in place (target 0). Target regions win where they overlap.
    pub fixed: Option<Region>,
    pub target_samples: usize,
    pub fixed_samples: usize,
    /// Tikhonov weight.
    pub lambda: f64,
    pub splits: usize,
    pub mode: EditMode,
    /// Minimum `|nᵀd|/‖d‖` for vector targets; `None` disables filtering.
    pub alignment_filter: Option<f64>,
    pub constraints: Vec<Functional>,
    /// Row weight for fixed samples.
    pub fixed_weight: f64,
    pub mask: ParamMask,
    /// Samples and mesh resolution for constraint quadrature.
    pub constraint_samples: usize,
    pub constraint_resolution: usize,
    pub seed: u64,
}

impl Default for EditSpec {
    fn default() -> Self {
        EditSpec {
            targets: Vec::new(),
            fixed: None,
            target_samples: 100,
            fixed_samples: 200,
            lambda: 0.1,
            splits: 8,
            mode: EditMode::Split,
            alignment_filter: Some(0.2),
            constraints: Vec::new(),
            fixed_weight: 1.0,
            mask: ParamMask::All,
            constraint_samples: 400,
            constraint_resolution: 64,
            seed: 0,
        }
    }
}

impl EditSpec {
    pub fn new(targets: Vec<Target>) -> Self {
        EditSpec { targets, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(invalid("targets", "at least one target is required"));
        }
        for t in &self.targets {
            if !t.displacement.is_finite() {
                return Err(invalid("targets.displacement", "values must be finite"));
            }
            match (&t.points, t.displacement.per_point_len()) {
                (Some(p), Some(n)) if p.len() != n => {
                    return Err(invalid("targets.displacement", "one value per point is required"));
                }
                (None, Some(_)) => {
                    return Err(invalid("targets.points", "per-point displacements need points"));
                }
                (Some(p), _) if p.is_empty() => {
                    return Err(invalid("targets.points", "must not be empty"));
                }
                _ => {}
            }
            if t.points.as_ref().is_some_and(|p| p.iter().flatten().any(|c| !c.is_finite())) {
                return Err(invalid("targets.points", "coordinates must be finite"));
            }
        }
        let region_targets = self.targets.iter().filter(|t| t.points.is_none()).count();
        if region_targets > self.target_samples {
            return Err(invalid("target_samples", "fewer samples than region targets"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda", "must be finite and non-negative"));
        }
        if self.splits == 0 {
            return Err(invalid("splits", "must be at least 1"));
        }
        if let EditMode::Converge { tolerance, max_iterations, stall } = self.mode {
            if !(tolerance > 0.0) || max_iterations == 0 || !(stall >= 0.0) {
                return Err(invalid("mode", "tolerance must be positive and max_iterations ≥ 1"));
            }
        }
        if let Some(c) = self.alignment_filter {
            if !(0.0..=1.0).contains(&c) {
                return Err(invalid("alignment_filter", "must lie in [0, 1]"));
            }
        }
        if !(self.fixed_weight >= 0.0 && self.fixed_weight.is_finite()) {
            return Err(invalid("fixed_weight", "must be finite and non-negative"));
        }
        if !self.constraints.is_empty() {
            if self.constraint_samples < 4 {
                return Err(invalid("constraint_samples", "at least 4 samples are required"));
            }
            if self.constraint_resolution < 8 {
                return Err(invalid("constraint_resolution", "must be at least 8"));
            }
            if self.constraints.contains(&Functional::Custom) {
                return Err(invalid("constraints", "only volume and area are supported here"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rodrigues_quarter_turn() {
        let r = rotation_matrix([0.0, 0.0, core::f64::consts::FRAC_PI_2]);
        let v = math::mat_vec(&r, [1.0, 0.0, 0.0]);
        assert!(math::dist(v, [0.0, 1.0, 0.0]) < 1e-15);
        let d = Displacement::Rigid { center: [1.0, 0.0, 0.0], rotation: [0.0; 3], translation: [0.0, 0.0, 0.5] };
        assert_eq!(d.at(0, [3.0, 2.0, 1.0]), TargetValue::Vector([0.0, 0.0, 0.5]));
    }

    #[test]
    fn validation_names_the_field() {
        let ok = EditSpec::new(alloc::vec![Target::region(Region::All, Displacement::Normal { value: 0.1 })]);
        ok.validate().unwrap();
        let field_of = |s: EditSpec| match s.validate().unwrap_err() {
            crate::Error::InvalidArgument { field, .. } => field,
            e => panic!("{e}"),
        };
        assert_eq!(field_of(EditSpec::default()), "targets");
        assert_eq!(field_of(EditSpec { lambda: -1.0, ..ok.clone() }), "lambda");
        assert_eq!(field_of(EditSpec { splits: 0, ..ok.clone() }), "splits");
        let bad = Target::points(alloc::vec![[0.0; 3]], Displacement::NormalPerPoint { values: alloc::vec![] });
        assert_eq!(field_of(EditSpec::new(alloc::vec![bad])), "targets.displacement");
    }
}
