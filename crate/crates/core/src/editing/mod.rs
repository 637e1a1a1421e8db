//! Boundary displacement to parameter update.
//!
//! Each iteration samples (or advects) boundary points, projects the
//! prescribed displacement onto their normals, solves the regularized
//! least-squares system against the sensitivity basis, optionally removes
//! the first-order change of volume/area, and applies the update.

mod solve;
mod spec;

pub use solve::{
    filter_by_alignment, project_constrained, project_out, project_targets, residual, solve_update,
};
pub use spec::{rotation_matrix, Displacement, EditMode, EditSpec, Target, TargetValue};

use alloc::vec::Vec;
use core::ops::ControlFlow;

use crate::error::{invalid, Error, Result};
use crate::field::{mask_range, ImplicitField, Request, GRAD_EPS};
use crate::geometry::{
    marching_cubes, nearest_area_weights, project_to_surface, sample_surface, sample_surface_with, Region,
    SamplingOptions, SurfaceSample,
};
use crate::geometry::ProjectOptions;
use crate::linalg::Matrix;
use crate::math::{self, mix_seed, Vec3};
use crate::sensitivity::{
    area_constraint_basis, assemble_system, volume_constraint_basis, ConstraintBasis, Functional,
};

/// First-order change of a constrained functional in one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConstraintDrift {
    pub functional: Functional,
    /// `bᵀδΘ` before projection.
    pub unconstrained: f64,
    /// `bᵀδΘ'` after projection.
    pub predicted: f64,
    /// `|bᵀδΘ'| / (‖b‖ ‖δΘ‖)`
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    pub iteration: usize,
    /// `‖BδΘ − δȳ‖²` of the applied update.
    pub residual: f64,
    pub delta_norm: f64,
    /// Mean distance from target goal points to the updated surface.
    pub target_deviation: f64,
    pub drift: Vec<ConstraintDrift>,
    pub rows: usize,
    /// Samples lost because re-projection after advection failed.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EditReport {
    pub iterations: Vec<IterationRecord>,
    pub initial_deviation: f64,
    pub converged: bool,
    /// Fingerprint of the final parameters.
    pub snapshot: u64,
}

impl EditReport {
    pub fn residuals(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.residual).collect()
    }

    pub fn final_deviation(&self) -> f64 {
        self.iterations.last().map_or(self.initial_deviation, |r| r.target_deviation)
    }
}

#[derive(Debug, Clone)]
struct Tracked {
    sample: SurfaceSample,
    total: TargetValue,
    goal: Vec3,
    fixed: bool,
}

pub fn edit<F: ImplicitField + Clone>(field: &F, spec: &EditSpec) -> Result<(F, EditReport)> {
    edit_with(field, spec, &mut |_, _| ControlFlow::Continue(()))
}

/// [`edit`] with a per-iteration observer that also sees the updated field;
/// returning `Break` stops after the current iteration has been applied.
pub fn edit_with<F: ImplicitField + Clone>(
    field: &F,
    spec: &EditSpec,
    observer: &mut dyn FnMut(&IterationRecord, &F) -> ControlFlow<()>,
) -> Result<(F, EditReport)> {
    spec.validate()?;
    let range = mask_range(field, &spec.mask)?;
    let mut tracked = gather(field, spec)?;
    let mut current = field.clone();
    let mut report = EditReport { initial_deviation: deviation(&current, &tracked)?, ..Default::default() };

    let (max_iter, split) = match spec.mode {
        EditMode::Split => (spec.splits, Some(spec.splits as f64)),
        EditMode::Converge { max_iterations, .. } => (max_iterations, None),
    };
    let mut predicted: Vec<f64> = Vec::new();
    for k in 0..max_iter {
        let step = |e: Error| e.at_iteration(k);
        let dropped = if k > 0 { advect(&current, &mut tracked, &predicted) } else { 0 };
        if tracked.iter().all(|t| t.fixed) {
            return Err(step(Error::EmptyTarget));
        }
        let samples: Vec<SurfaceSample> = tracked.iter().map(|t| t.sample).collect();
        let values: Vec<TargetValue> = tracked
            .iter()
            .map(|t| match split {
                Some(s) => t.total.scaled(1.0 / s),
                None => TargetValue::Vector(math::sub(t.goal, t.sample.position)),
            })
            .collect();
        let mut y = project_targets(&samples, &values).map_err(step)?;
        let basis = assemble_system(&current, &samples, &spec.mask).map_err(step)?;
        let weighted = weight_rows(&basis.matrix, &tracked, spec.fixed_weight, &mut y);
        let b = weighted.as_ref().unwrap_or(&basis.matrix);

        let mut delta = solve_update(b, &y, spec.lambda).map_err(step)?;
        let mut drift = Vec::new();
        if !spec.constraints.is_empty() {
            let bases = constraint_bases(&current, spec, k).map_err(step)?;
            let raw: Vec<f64> = bases.iter().map(|c| math::dot_slice(&c.vector, &delta)).collect();
            let dn = math::norm_slice(&delta);
            delta = project_constrained(&delta, &bases).map_err(step)?;
            for (c, u) in bases.iter().zip(raw) {
                let p = math::dot_slice(&c.vector, &delta);
                let scale = math::norm_slice(&c.vector) * dn;
                drift.push(ConstraintDrift {
                    functional: c.functional,
                    unconstrained: u,
                    predicted: p,
                    relative: if scale > 0.0 { p.abs() / scale } else { 0.0 },
                });
            }
        }
        let res = residual(b, &delta, &y).map_err(step)?;
        predicted = basis.matrix.mul_vec(&delta).map_err(step)?;
        let params = current.params().add_masked(&delta, range.clone()).map_err(step)?;
        if !params.is_finite() {
            return Err(step(Error::NumericFailure("parameter update".into())));
        }
        current = current.with_params(params).map_err(step)?;

        let record = IterationRecord {
            iteration: k,
            residual: res,
            delta_norm: math::norm_slice(&delta),
            target_deviation: deviation(&current, &tracked).map_err(step)?,
            drift,
            rows: samples.len(),
            dropped,
        };
        let prev = report.iterations.last().map(|r| r.residual);
        let stop = observer(&record, &current).is_break();
        report.iterations.push(record);
        if let EditMode::Converge { tolerance, stall, .. } = spec.mode {
            let last = report.iterations.last().unwrap();
            let reached = last.target_deviation <= tolerance * report.initial_deviation;
            let stalled = prev.is_some_and(|p| (p - last.residual).abs() < stall);
            if reached || stalled {
                report.converged = true;
                break;
            }
        }
        if stop {
            break;
        }
    }
    if matches!(spec.mode, EditMode::Split) {
        report.converged = report.iterations.len() == spec.splits;
    }
    report.snapshot = current.params().fingerprint();
    Ok((current, report))
}

fn gather<F: ImplicitField>(field: &F, spec: &EditSpec) -> Result<Vec<Tracked>> {
    let domain = *field.domain();
    let region_targets = spec.targets.iter().filter(|t| t.points.is_none()).count();
    let mut tracked = Vec::new();
    let mut slot = 0;
    for (ti, t) in spec.targets.iter().enumerate() {
        let samples = match &t.points {
            Some(points) => points
                .iter()
                .map(|&p| {
                    let x = project_to_surface(field, p, ProjectOptions::default())?;
                    crate::geometry::sampling_point(field, x)
                })
                .collect::<Result<Vec<_>>>()?,
            None => {
                let share = spec.target_samples / region_targets
                    + usize::from(slot < spec.target_samples % region_targets);
                slot += 1;
                sample_surface(field, share, t.region.as_ref(), mix_seed(spec.seed, ti as u64))?
            }
        };
        let values: Vec<TargetValue> =
            samples.iter().enumerate().map(|(i, s)| t.displacement.at(i, s.position)).collect();
        let kept: Vec<usize> = match spec.alignment_filter {
            Some(c) if t.displacement.is_vector() => filter_by_alignment(&samples, &values, c)?,
            _ => (0..samples.len()).collect(),
        };
        for i in kept {
            let s = samples[i];
            let goal = values[i].goal(s.position, s.normal);
            if !domain.contains(goal) {
                return Err(invalid("targets.displacement", "moves the boundary outside the domain"));
            }
            tracked.push(Tracked { sample: s, total: values[i], goal, fixed: false });
        }
    }
    if let (Some(fixed), true) = (&spec.fixed, spec.fixed_samples > 0) {
        let claimed: Vec<Region> = spec.targets.iter().filter_map(|t| t.region.clone()).collect();
        let region = if claimed.is_empty() {
            fixed.clone()
        } else {
            fixed.clone().and(Region::Or { regions: claimed }.not())
        };
        let samples =
            sample_surface(field, spec.fixed_samples, Some(&region), mix_seed(spec.seed, u64::MAX))?;
        tracked.extend(samples.into_iter().map(|s| Tracked {
            sample: s,
            total: TargetValue::Normal(0.0),
            goal: s.position,
            fixed: true,
        }));
    }
    Ok(tracked)
}

fn weight_rows(b: &Matrix, tracked: &[Tracked], w: f64, y: &mut [f64]) -> Option<Matrix> {
    if w == 1.0 || !tracked.iter().any(|t| t.fixed) {
        return None;
    }
    let mut m = b.clone();
    for (i, t) in tracked.iter().enumerate() {
        if t.fixed {
            m.row_mut(i).iter_mut().for_each(|v| *v *= w);
            y[i] *= w;
        }
    }
    Some(m)
}

/// Move samples by their predicted normal displacement and re-project.
fn advect<F: ImplicitField>(field: &F, tracked: &mut Vec<Tracked>, moved: &[f64]) -> usize {
    let before = tracked.len();
    let mut i = 0;
    tracked.retain_mut(|t| {
        let d = moved[i];
        i += 1;
        let x = math::add(t.sample.position, math::scale(t.sample.normal, d));
        let Ok(p) = project_to_surface(field, x, ProjectOptions::default()) else { return false };
        match crate::geometry::sampling_point(field, p) {
            Ok(s) => {
                t.sample = s;
                true
            }
            Err(_) => false,
        }
    });
    before - tracked.len()
}

/// Mean `|f(goal)| / ‖∇f(goal)‖` over target (non-fixed) samples.
fn deviation<F: ImplicitField>(field: &F, tracked: &[Tracked]) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for t in tracked.iter().filter(|t| !t.fixed) {
        let q = field.query(t.goal, Request::GRAD)?;
        sum += q.value.abs() / math::norm(q.grad()).max(GRAD_EPS);
        n += 1;
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

fn constraint_bases<F: ImplicitField>(
    field: &F,
    spec: &EditSpec,
    k: usize,
) -> Result<Vec<ConstraintBasis>> {
    let needs_curvature = spec.constraints.contains(&Functional::Area);
    let opts = SamplingOptions {
        seed: mix_seed(spec.seed, 0x5eed_0000 + k as u64),
        curvature: needs_curvature,
        ..Default::default()
    };
    let mut samples = sample_surface_with(field, spec.constraint_samples, None, &opts)?;
    let mesh = marching_cubes(field, spec.constraint_resolution)?;
    nearest_area_weights(&mut samples, &mesh)?;
    spec.constraints
        .iter()
        .map(|c| match c {
            Functional::Volume => volume_constraint_basis(field, &samples, &spec.mask),
            Functional::Area => area_constraint_basis(field, &samples, &spec.mask),
            Functional::Custom => Err(invalid("constraints", "custom functionals need a callback")),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::AnalyticField;

    fn inflate(d: f64) -> EditSpec {
        EditSpec::new(alloc::vec![Target::region(Region::All, Displacement::Normal { value: d })])
    }

    #[test]
    fn analytic_inflate_in_five_splits() {
        let s = AnalyticField::sphere(1.0);
        let (out, report) = edit(&s, &EditSpec { splits: 5, ..inflate(0.5) }).unwrap();
        assert!((out.params()[0] - 1.5).abs() < 1e-3, "{}", out.params()[0]);
        assert_eq!(report.iterations.len(), 5);
        assert!(report.converged);
        assert_eq!(report.snapshot, out.params().fingerprint());
    }

    #[test]
    fn single_step_matches_closed_form() {
        let s = AnalyticField::sphere(1.0);
        let (out, _) = edit(&s, &EditSpec { splits: 1, ..inflate(0.1) }).unwrap();
        assert!((out.params()[0] - 1.0 - 10.0 / 100.1).abs() < 1e-9);
    }

    #[test]
    fn converge_mode_counts_depend_on_lambda() {
        let s = AnalyticField::sphere(1.0);
        let counts: Vec<usize> = [1e-3, 1e-1, 1e1]
            .iter()
            .map(|&lambda| {
                let spec = EditSpec { lambda, mode: EditMode::converge(1e-4, 100), ..inflate(0.1) };
                edit(&s, &spec).unwrap().1.iterations.len()
            })
            .collect();
        assert!(counts[0] < counts[1] && counts[1] < counts[2], "{counts:?}");
    }

    #[test]
    fn fixed_region_and_volume_constraint() {
        // pushing the cap up while holding the rest should barely change r;
        // the volume constraint cancels the mean radial motion exactly
        let s = AnalyticField::ellipsoid(0.8, 0.8, 0.8);
        let spec = EditSpec {
            fixed: Some(Region::All),
            constraints: alloc::vec![Functional::Volume],
            constraint_samples: 100,
            constraint_resolution: 32,
            splits: 2,
            ..EditSpec::new(alloc::vec![Target::region(
                Region::above(0.5),
                Displacement::Vector { value: [0.0, 0.0, 0.1] },
            )])
        };
        let (_, report) = edit(&s, &spec).unwrap();
        for r in &report.iterations {
            assert!(r.drift[0].relative < 1e-10);
            assert!(r.drift[0].unconstrained.abs() > 1e3 * r.drift[0].predicted.abs());
        }
    }

    #[test]
    fn deterministic_and_observed() {
        let s = AnalyticField::torus(0.7, 0.3);
        let spec = EditSpec { splits: 3, ..inflate(0.05) };
        let mut seen = 0;
        let (_, a) = edit_with(&s, &spec, &mut |_, _| {
            seen += 1;
            ControlFlow::Continue(())
        })
        .unwrap();
        let (_, b) = edit(&s, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(seen, 3);
        let (_, c) = edit_with(&s, &spec, &mut |_, _| ControlFlow::Break(())).unwrap();
        assert_eq!(c.iterations.len(), 1);
        assert!(!c.converged);
    }

    #[test]
    fn target_outside_domain_is_rejected() {
        let s = AnalyticField::sphere(1.0);
        assert!(matches!(
            edit(&s, &inflate(1.5)).unwrap_err(),
            Error::InvalidArgument { field: "targets.displacement", .. }
        ));
    }
}
