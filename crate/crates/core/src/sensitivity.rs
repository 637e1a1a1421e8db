//! Boundary sensitivity basis `b = −∇_Θf / ‖∇_x f‖` and the linear maps
//! built from it.
//!
//! A parameter change `δΘ` moves the zero set along its normal by
//! `δx_n = bᵀδΘ` to first order; positive `∂f/∂Θ_p` therefore pulls the
//! boundary inward.

use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::field::{mask_range, ImplicitField, ParamMask, Request, GRAD_EPS};
use crate::geometry::{ray_root, SurfaceSample};
use crate::linalg::Matrix;
use crate::math::{self, Vec3};

/// Rows `bᵀ(x_i)` restricted to a parameter mask.
#[derive(Debug, Clone)]
pub struct SensitivityBasis {
    pub matrix: Matrix,
    pub mask: ParamMask,
    pub range: Range<usize>,
    pub samples: Vec<SurfaceSample>,
}

impl SensitivityBasis {
    pub fn rows(&self) -> usize {
        self.matrix.rows
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols
    }
}

/// Which integral a constraint basis linearizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Functional {
    /// `∫_Ω 1`
    Volume,
    /// `∫_Γ 1`
    Area,
    /// user supplied `h` or `g`
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintBasis {
    pub vector: Vec<f64>,
    pub functional: Functional,
    pub range: Range<usize>,
    /// Sum of the quadrature weights used.
    pub total_weight: f64,
    pub sample_count: usize,
}

impl ConstraintBasis {
    /// First-order change of the functional, `bᵀδΘ`.
    pub fn predict(&self, delta: &[f64]) -> Result<f64> {
        if delta.len() != self.vector.len() {
            return Err(Error::Shape { expected: self.vector.len(), actual: delta.len() });
        }
        Ok(math::dot_slice(&self.vector, delta))
    }
}

/// Basis row over all parameters.
pub fn basis_row<F: ImplicitField + ?Sized>(field: &F, x: Vec3) -> Result<Vec<f64>> {
    basis_row_masked(field, x, 0..field.param_count())
}

pub fn basis_row_masked<F: ImplicitField + ?Sized>(
    field: &F,
    x: Vec3,
    range: Range<usize>,
) -> Result<Vec<f64>> {
    let q = field.query(x, Request::BASIS)?;
    let n = math::norm(q.grad());
    if n <= GRAD_EPS {
        return Err(Error::SingularGradient { norm: n });
    }
    let gt = q.grad_theta.as_deref().unwrap_or_default();
    let row: Vec<f64> = gt[range].iter().map(|g| -g / n).collect();
    if !math::all_finite(&row) {
        return Err(Error::NumericFailure("basis row".into()));
    }
    Ok(row)
}

pub fn assemble_system<F: ImplicitField + ?Sized>(
    field: &F,
    samples: &[SurfaceSample],
    mask: &ParamMask,
) -> Result<SensitivityBasis> {
    if samples.is_empty() {
        return Err(Error::EmptyTarget);
    }
    let range = mask_range(field, mask)?;
    let cols = range.len();
    let mut matrix = Matrix::zeros(samples.len(), cols);
    for (i, s) in samples.iter().enumerate() {
        let row = basis_row_masked(field, s.position, range.clone()).map_err(|e| match e {
            Error::SingularGradient { norm } => Error::SingularSample { index: i, norm },
            e => e,
        })?;
        matrix.row_mut(i).copy_from_slice(&row);
    }
    Ok(SensitivityBasis { matrix, mask: mask.clone(), range, samples: samples.to_vec() })
}

/// `B δΘ`
pub fn predicted_normal_displacement(basis: &SensitivityBasis, delta: &[f64]) -> Result<Vec<f64>> {
    basis.matrix.mul_vec(delta)
}

/// `b_H = Σ w_i b(x_i)`: linearized enclosed volume.
pub fn volume_constraint_basis<F: ImplicitField + ?Sized>(
    field: &F,
    samples: &[SurfaceSample],
    mask: &ParamMask,
) -> Result<ConstraintBasis> {
    weighted_basis(field, samples, mask, Functional::Volume, |_| Ok(1.0))
}

/// `b_G = Σ w_i (∂g/∂n + κ_i g_i) b(x_i)` for a surface integral of `g`.
///
/// `g` returns `(g, ∂g/∂n)` at a sample. With `g = 1` this is the area
/// derivative `Σ w_i κ_i b(x_i)`.
pub fn surface_constraint_basis<F, G>(
    field: &F,
    samples: &[SurfaceSample],
    mask: &ParamMask,
    g: G,
) -> Result<ConstraintBasis>
where
    F: ImplicitField + ?Sized,
    G: Fn(&SurfaceSample) -> (f64, f64),
{
    weighted_basis(field, samples, mask, Functional::Custom, |s| {
        let (g, dg) = g(s);
        let k = s.curvature.ok_or(Error::MissingCurvature)?;
        Ok(dg + k * g)
    })
}

pub fn area_constraint_basis<F: ImplicitField + ?Sized>(
    field: &F,
    samples: &[SurfaceSample],
    mask: &ParamMask,
) -> Result<ConstraintBasis> {
    let mut c = surface_constraint_basis(field, samples, mask, |_| (1.0, 0.0))?;
    c.functional = Functional::Area;
    Ok(c)
}

fn weighted_basis<F, H>(
    field: &F,
    samples: &[SurfaceSample],
    mask: &ParamMask,
    functional: Functional,
    h: H,
) -> Result<ConstraintBasis>
where
    F: ImplicitField + ?Sized,
    H: Fn(&SurfaceSample) -> Result<f64>,
{
    if samples.is_empty() {
        return Err(Error::EmptyTarget);
    }
    let range = mask_range(field, mask)?;
    let mut vector = alloc::vec![0.0; range.len()];
    let mut total_weight = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let w = s.area_weight.ok_or(Error::MissingWeights)?;
        let c = w * h(s)?;
        total_weight += w;
        if c == 0.0 {
            continue;
        }
        let row = basis_row_masked(field, s.position, range.clone()).map_err(|e| match e {
            Error::SingularGradient { norm } => Error::SingularSample { index: i, norm },
            e => e,
        })?;
        math::axpy(c, &row, &mut vector);
    }
    Ok(ConstraintBasis { vector, functional, range, total_weight, sample_count: samples.len() })
}

/// Normal motion of each sample between two fields, measured by root
/// finding along the sample's normal (within `±max_dist`) on both fields.
/// Measuring on the old field too cancels the sample's projection residual.
pub fn measured_normal_motion<F: ImplicitField + ?Sized>(
    old: &F,
    new: &F,
    samples: &[SurfaceSample],
    max_dist: f64,
) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| {
            let t0 = ray_root(old, s.position, s.normal, max_dist)?;
            let t1 = ray_root(new, s.position, s.normal, max_dist)?;
            Ok(t1 - t0)
        })
        .collect()
}
