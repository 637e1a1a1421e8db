use alloc::vec::Vec;

use super::spec::TargetValue;
use crate::error::{invalid, Error, Result};
use crate::geometry::SurfaceSample;
use crate::linalg::{Cholesky, Matrix};
use crate::math::{self, axpy, dot_slice, norm_slice};
use crate::sensitivity::ConstraintBasis;

/// Normal components `δȳ_i` of per-sample targets.
pub fn project_targets(samples: &[SurfaceSample], targets: &[TargetValue]) -> Result<Vec<f64>> {
    if samples.len() != targets.len() {
        return Err(Error::Shape { expected: samples.len(), actual: targets.len() });
    }
    Ok(samples
        .iter()
        .zip(targets)
        .map(|(s, t)| match *t {
            TargetValue::Normal(d) => d,
            TargetValue::Vector(v) => math::dot(s.normal, v),
        })
        .collect())
}

/// Indices of samples whose normal is aligned with their vector target,
/// `|nᵀd|/‖d‖ ≥ cos_min`. Zero displacements and normal targets are kept.
pub fn filter_by_alignment(
    samples: &[SurfaceSample],
    targets: &[TargetValue],
    cos_min: f64,
) -> Result<Vec<usize>> {
    if samples.len() != targets.len() {
        return Err(Error::Shape { expected: samples.len(), actual: targets.len() });
    }
    let kept: Vec<usize> = (0..samples.len())
        .filter(|&i| match targets[i] {
            TargetValue::Normal(_) => true,
            TargetValue::Vector(v) => {
                let l = math::norm(v);
                l == 0.0 || math::dot(samples[i].normal, v).abs() >= cos_min * l
            }
        })
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyTarget);
    }
    Ok(kept)
}

/// Minimizer of `‖Bδ − y‖² + λ‖δ‖²` through whichever normal-equation form
/// is smaller: `(BᵀB + λI)δ = Bᵀy` for `P ≤ I`, else `δ = Bᵀ(BBᵀ + λI)⁻¹y`.
pub fn solve_update(b: &Matrix, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if y.len() != b.rows {
        return Err(Error::Shape { expected: b.rows, actual: y.len() });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", "must be finite and non-negative"));
    }
    let delta = if b.cols <= b.rows {
        let rhs = b.tr_mul_vec(y)?;
        Cholesky::factor(&b.gram_cols(lambda))?.solve(&rhs)?
    } else {
        let z = Cholesky::factor(&b.gram_rows(lambda))?.solve(y)?;
        b.tr_mul_vec(&z)?
    };
    if !math::all_finite(&delta) {
        return Err(Error::NumericFailure("least-squares solution".into()));
    }
    Ok(delta)
}

/// `‖Bδ − y‖²`
pub fn residual(b: &Matrix, delta: &[f64], y: &[f64]) -> Result<f64> {
    let r = b.mul_vec(delta)?;
    Ok(r.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Orthogonal projection of `delta` onto the common null space of the
/// constraint vectors (Gram–Schmidt on the normalized vectors).
pub fn project_constrained(delta: &[f64], bases: &[ConstraintBasis]) -> Result<Vec<f64>> {
    let vectors: Vec<&[f64]> = bases.iter().map(|b| b.vector.as_slice()).collect();
    project_out(delta, &vectors)
}

pub fn project_out(delta: &[f64], vectors: &[&[f64]]) -> Result<Vec<f64>> {
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        if v.len() != delta.len() {
            return Err(Error::Shape { expected: delta.len(), actual: v.len() });
        }
        let n0 = norm_slice(v);
        if !(n0 > 0.0) || !n0.is_finite() {
            return Err(Error::DegenerateConstraint);
        }
        let mut u: Vec<f64> = v.iter().map(|x| x / n0).collect();
        // two passes keep the basis orthogonal to working precision
        for _ in 0..2 {
            for q in &ortho {
                let c = dot_slice(q, &u);
                axpy(-c, q, &mut u);
            }
        }
        let n = norm_slice(&u);
        if n < 1e-10 {
            return Err(Error::DegenerateConstraint);
        }
        u.iter_mut().for_each(|x| *x /= n);
        ortho.push(u);
    }
    let mut out = delta.to_vec();
    for _ in 0..2 {
        for q in &ortho {
            let c = dot_slice(q, &out);
            axpy(-c, q, &mut out);
        }
    }
    Ok(out)
}
