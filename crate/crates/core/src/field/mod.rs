//! Implicit-field contract and concrete fields.
//!
//! Every field exposes five derivative blocks through [`FieldQuery`]:
//! the value, `∇_x f`, `∇_Θ f`, `∇²_x f` and the mixed block `∂(∇_x f)/∂Θ`.

mod analytic;
mod jet;
mod latent;
mod mlp;
mod model;
mod siren;

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::math::{self, Mat3, Vec3};

pub use analytic::{AnalyticField, AnalyticShape};
pub use jet::Jet;
pub use latent::LatentField;
pub use mlp::{MlpArch, MlpTape, Seeds};
pub use model::FieldModel;
pub use siren::SirenMlp;

/// Gradient norms below this are treated as critical points.
pub const GRAD_EPS: f64 = 1e-8;

/// Axis-aligned box the field is defined on.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Domain {
    pub lower: Vec3,
    pub upper: Vec3,
}

impl Default for Domain {
    fn default() -> Self {
        Domain::cube(2.0)
    }
}

impl Domain {
    pub fn new(lower: Vec3, upper: Vec3) -> Result<Self> {
        if (0..3).any(|i| !(lower[i] < upper[i])) {
            return Err(Error::invalid("domain", "lower must be < upper componentwise"));
        }
        Ok(Domain { lower, upper })
    }

    /// `[-half, half]³`
    pub fn cube(half: f64) -> Self {
        Domain { lower: [-half; 3], upper: [half; 3] }
    }

    pub fn extent(&self) -> Vec3 {
        math::sub(self.upper, self.lower)
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e[0] * e[1] * e[2]
    }

    pub fn contains(&self, x: Vec3) -> bool {
        (0..3).all(|i| {
            let tol = 1e-12 * (self.upper[i] - self.lower[i]);
            x[i] >= self.lower[i] - tol && x[i] <= self.upper[i] + tol
        })
    }

    /// Map `t ∈ [0,1]³` into the box.
    pub fn lerp(&self, t: Vec3) -> Vec3 {
        core::array::from_fn(|i| self.lower[i] + t[i] * (self.upper[i] - self.lower[i]))
    }

    pub fn check(&self, x: Vec3) -> Result<()> {
        if x.iter().all(|v| v.is_finite()) && self.contains(x) {
            Ok(())
        } else {
            Err(Error::DomainViolation { point: x })
        }
    }
}

/// Immutable parameter snapshot. Cloning shares storage; updates build a new snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Arc<[f64]>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector(values.into())
    }

    pub fn zeros(len: usize) -> Self {
        ParamVector::new(alloc::vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.to_vec()
    }

    pub fn is_finite(&self) -> bool {
        math::all_finite(&self.0)
    }

    /// FNV-1a hash of the bit patterns; identifies a parameter snapshot.
    pub fn fingerprint(&self) -> u64 {
        self.0.iter().flat_map(|v| v.to_bits().to_le_bytes()).fold(0xcbf2_9ce4_8422_2325, |h, b| {
            (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
        })
    }

    /// New snapshot `self + delta` restricted to the masked entries.
    pub fn add_masked(&self, delta: &[f64], range: Range<usize>) -> Result<ParamVector> {
        if range.end > self.len() {
            return Err(Error::Shape { expected: self.len(), actual: range.end });
        }
        if delta.len() != range.len() {
            return Err(Error::Shape { expected: range.len(), actual: delta.len() });
        }
        let mut v = self.to_vec();
        for (dst, d) in v[range].iter_mut().zip(delta) {
            *dst += d;
        }
        Ok(ParamVector::new(v))
    }
}

impl core::ops::Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Which parameters participate in the basis.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum ParamMask {
    #[default]
    All,
    /// The trailing latent code of an auto-decoder field.
    Latent,
    Range { start: usize, end: usize },
}

impl ParamMask {
    pub fn range(&self, param_count: usize) -> Result<Range<usize>> {
        match *self {
            ParamMask::All => Ok(0..param_count),
            ParamMask::Latent => {
                Err(Error::invalid("mask", "latent mask must be resolved against a field"))
            }
            ParamMask::Range { start, end } => {
                if start >= end || end > param_count {
                    Err(Error::invalid("mask", "empty or out-of-range parameter mask"))
                } else {
                    Ok(start..end)
                }
            }
        }
    }

    pub fn len(&self, param_count: usize) -> Result<usize> {
        self.range(param_count).map(|r| r.len())
    }
}

/// Derivative blocks requested from [`ImplicitField::query`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Request {
    pub grad_x: bool,
    pub grad_theta: bool,
    pub hessian_x: bool,
    pub mixed: bool,
}

impl Request {
    pub const VALUE: Request =
        Request { grad_x: false, grad_theta: false, hessian_x: false, mixed: false };
    pub const GRAD: Request =
        Request { grad_x: true, grad_theta: false, hessian_x: false, mixed: false };
    pub const CURVATURE: Request =
        Request { grad_x: true, grad_theta: false, hessian_x: true, mixed: false };
    pub const BASIS: Request =
        Request { grad_x: true, grad_theta: true, hessian_x: false, mixed: false };
    pub const ALL: Request =
        Request { grad_x: true, grad_theta: true, hessian_x: true, mixed: true };

    pub(crate) fn order(&self) -> u8 {
        if self.hessian_x {
            2
        } else if self.grad_x || self.mixed {
            1
        } else {
            0
        }
    }
}

/// Result of a field evaluation. Requested blocks are always populated.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldQuery {
    pub value: f64,
    pub grad_x: Option<Vec3>,
    pub grad_theta: Option<Vec<f64>>,
    pub hessian_x: Option<Mat3>,
    /// `mixed[p] = ∂(∇_x f)/∂Θ_p`, i.e. the 3×P block stored column by column.
    pub mixed: Option<Vec<Vec3>>,
}

impl FieldQuery {
    pub fn grad(&self) -> Vec3 {
        self.grad_x.expect("grad_x not requested")
    }

    pub fn hessian(&self) -> &Mat3 {
        self.hessian_x.as_ref().expect("hessian_x not requested")
    }

    fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad_x.is_none_or(|g| g.iter().all(|v| v.is_finite()))
            && self.grad_theta.as_ref().is_none_or(|g| math::all_finite(g))
            && self.hessian_x.is_none_or(|h| h.iter().flatten().all(|v| v.is_finite()))
            && self
                .mixed
                .as_ref()
                .is_none_or(|m| m.iter().flatten().all(|v| v.is_finite()))
    }
}

/// A scalar field `f(x; Θ)` whose sub-zero set is the shape.
///
/// Implementations are pure: identical inputs give bit-identical outputs.
pub trait ImplicitField {
    fn domain(&self) -> &Domain;

    fn params(&self) -> &ParamVector;

    fn param_count(&self) -> usize {
        self.params().len()
    }

    /// Same architecture with a new parameter snapshot.
    fn with_params(&self, params: ParamVector) -> Result<Self>
    where
        Self: Sized;

    /// Parameters that the latent-only mask selects, if the field has any.
    fn latent_range(&self) -> Option<Range<usize>> {
        None
    }

    /// Evaluation without domain or finiteness checks.
    fn query_unchecked(&self, x: Vec3, req: Request) -> FieldQuery;

    fn value_unchecked(&self, x: Vec3) -> f64 {
        self.query_unchecked(x, Request::VALUE).value
    }

    /// Values at many points; overridden where buffers can be reused.
    fn values_unchecked(&self, xs: &[Vec3], out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(xs) {
            *o = self.value_unchecked(x);
        }
    }

    fn query(&self, x: Vec3, req: Request) -> Result<FieldQuery> {
        self.domain().check(x)?;
        let q = self.query_unchecked(x, req);
        if q.is_finite() {
            Ok(q)
        } else {
            Err(Error::NumericFailure(alloc::format!("field query at {x:?}")))
        }
    }

    fn value(&self, x: Vec3) -> Result<f64> {
        self.domain().check(x)?;
        let v = self.value_unchecked(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NumericFailure(alloc::format!("field value at {x:?}")))
        }
    }
}

/// Resolve a parameter mask against a field.
pub fn mask_range<F: ImplicitField + ?Sized>(field: &F, mask: &ParamMask) -> Result<Range<usize>> {
    match mask {
        ParamMask::Latent => field
            .latent_range()
            .ok_or_else(|| Error::invalid("mask", "field has no latent parameters")),
        m => m.range(field.param_count()),
    }
}

/// Outward unit normal `∇f/‖∇f‖`.
pub fn normal<F: ImplicitField + ?Sized>(field: &F, x: Vec3) -> Result<Vec3> {
    let g = field.query(x, Request::GRAD)?.grad();
    unit_normal(g)
}

pub(crate) fn unit_normal(g: Vec3) -> Result<Vec3> {
    let n = math::norm(g);
    if n <= GRAD_EPS {
        return Err(Error::SingularGradient { norm: n });
    }
    Ok(math::scale(g, 1.0 / n))
}

/// Mean curvature `div(∇f/‖∇f‖)`, sum of principal curvatures.
pub fn mean_curvature<F: ImplicitField + ?Sized>(field: &F, x: Vec3) -> Result<f64> {
    let q = field.query(x, Request::CURVATURE)?;
    curvature_from_blocks(q.grad(), q.hessian())
}

pub(crate) fn curvature_from_blocks(g: Vec3, h: &Mat3) -> Result<f64> {
    let n2 = math::dot(g, g);
    let n = math::sqrt(n2);
    if n <= GRAD_EPS {
        return Err(Error::SingularGradient { norm: n });
    }
    let hg = math::mat_vec(h, g);
    Ok((math::trace(h) * n2 - math::dot(g, hg)) / (n2 * n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_rejects_inverted_bounds() {
        assert!(Domain::new([0.0; 3], [1.0, -1.0, 1.0]).is_err());
        let d = Domain::cube(1.0);
        assert!(d.contains([1.0, -1.0, 0.0]));
        assert!(!d.contains([1.01, 0.0, 0.0]));
        assert_eq!(d.volume(), 8.0);
    }

    #[test]
    fn sphere_normals_and_curvature() {
        let s = AnalyticField::sphere(1.0);
        assert_eq!(normal(&s, [0.0, 1.0, 0.0]).unwrap(), [0.0, 1.0, 0.0]);
        assert_eq!(normal(&s, [0.0, 0.0, -1.0]).unwrap(), [0.0, 0.0, -1.0]);
        let n = normal(&s, [0.3, -0.5, 0.2]).unwrap();
        assert!((math::norm(n) - 1.0).abs() < 1e-12);
        assert!((mean_curvature(&s, [1.0, 0.0, 0.0]).unwrap() - 2.0).abs() < 1e-12);
        let s2 = AnalyticField::sphere(2.0);
        assert!((mean_curvature(&s2, [0.0, 2.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_gradient_is_an_error() {
        let s = AnalyticField::sphere(1.0);
        // ‖x‖ has no usable gradient at the centre
        assert!(matches!(normal(&s, [0.0, 0.0, 0.0]), Err(Error::SingularGradient { .. })));
    }

    #[test]
    fn mask_ranges() {
        assert_eq!(ParamMask::All.range(5).unwrap(), 0..5);
        assert_eq!(ParamMask::Range { start: 3, end: 5 }.range(5).unwrap(), 3..5);
        assert!(ParamMask::Range { start: 3, end: 6 }.range(5).is_err());
        let p = ParamVector::new(alloc::vec![1.0, 2.0, 3.0]);
        let q = p.add_masked(&[1.0], 2..3).unwrap();
        assert_eq!(q.as_slice(), &[1.0, 2.0, 4.0]);
        assert_eq!(p.as_slice(), &[1.0, 2.0, 3.0]);
        assert!(p.add_masked(&[1.0, 1.0], 2..4).is_err());
        assert!(mask_range(&crate::AnalyticField::sphere(1.0), &ParamMask::Latent).is_err());
    }
}
