//! Closed-form fields with analytically known sensitivities.
//!
//! The shape parameters (radii, half extents, ...) form the parameter
//! vector, so `∂f/∂Θ` is exact. Used as test oracles and as fitting targets.

use alloc::vec::Vec;

use super::jet::{Jet, Scalar};
use super::{Domain, FieldQuery, ImplicitField, ParamVector, Request};
use crate::error::{Error, Result};
use crate::math::Vec3;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum AnalyticShape {
    /// params `[radius]`; exact SDF
    Sphere,
    /// params `[a, b, c]`; `‖(x/a, y/b, z/c)‖ - 1`
    Ellipsoid,
    /// params `[major, minor]`, axis z; exact SDF
    Torus,
    /// params: half extents per box; union by `min`
    BoxUnion { centers: Vec<Vec3>, rounding: f64 },
    /// params `[hx, hy, hz]`
    RoundedBox { rounding: f64 },
    /// params `[radius, half_height]`, axis z
    Cylinder { rounding: f64 },
    /// params `[half_length, radius]`, axis z
    Capsule,
    /// params: one radius per centre; union by `min`
    SphereUnion { centers: Vec<Vec3> },
}

impl AnalyticShape {
    pub fn param_count(&self) -> usize {
        match self {
            AnalyticShape::Sphere => 1,
            AnalyticShape::Ellipsoid => 3,
            AnalyticShape::Torus => 2,
            AnalyticShape::BoxUnion { centers, .. } => 3 * centers.len(),
            AnalyticShape::RoundedBox { .. } => 3,
            AnalyticShape::Cylinder { .. } => 2,
            AnalyticShape::Capsule => 2,
            AnalyticShape::SphereUnion { centers } => centers.len(),
        }
    }

    /// Signed value at `p` (relative to the shape centre).
    pub fn eval<S: Scalar>(&self, p: &[S; 3], params: &[S]) -> S {
        let len2 = |a: &S, b: &S, c: &S| (a.clone() * a.clone() + b.clone() * b.clone() + c.clone() * c.clone()).sqrt();
        match self {
            AnalyticShape::Sphere => len2(&p[0], &p[1], &p[2]) - params[0].clone(),
            AnalyticShape::Ellipsoid => {
                let u: [S; 3] = core::array::from_fn(|i| p[i].clone() / params[i].clone());
                len2(&u[0], &u[1], &u[2]).add_c(-1.0)
            }
            AnalyticShape::Torus => {
                let rho = (p[0].clone() * p[0].clone() + p[1].clone() * p[1].clone()).sqrt();
                let q = rho - params[0].clone();
                (q.clone() * q + p[2].clone() * p[2].clone()).sqrt() - params[1].clone()
            }
            AnalyticShape::BoxUnion { centers, rounding } => {
                let mut best: Option<S> = None;
                for (b, c) in centers.iter().enumerate() {
                    let local: [S; 3] = core::array::from_fn(|i| p[i].add_c(-c[i]));
                    let d = rounded_box(&local, &params[3 * b..3 * b + 3], *rounding);
                    best = Some(match best {
                        None => d,
                        Some(cur) => cur.min(&d),
                    });
                }
                best.expect("box union needs at least one box")
            }
            AnalyticShape::RoundedBox { rounding } => rounded_box(p, params, *rounding),
            AnalyticShape::Cylinder { rounding } => {
                let rho = (p[0].clone() * p[0].clone() + p[1].clone() * p[1].clone()).sqrt();
                let d0 = rho - params[0].clone() + p[0].lift(*rounding);
                let d1 = p[2].abs() - params[1].clone() + p[0].lift(*rounding);
                let zero = p[0].lift(0.0);
                let inside = d0.max(&d1).min(&zero);
                let e0 = d0.max(&zero);
                let e1 = d1.max(&zero);
                inside + (e0.clone() * e0 + e1.clone() * e1).sqrt() - p[0].lift(*rounding)
            }
            AnalyticShape::Capsule => {
                let half = params[0].clone();
                let clamped = p[2].min(&half).max(&(-half));
                let dz = p[2].clone() - clamped;
                len2(&p[0], &p[1], &dz) - params[1].clone()
            }
            AnalyticShape::SphereUnion { centers } => {
                let mut best: Option<S> = None;
                for (i, c) in centers.iter().enumerate() {
                    let q: [S; 3] = core::array::from_fn(|k| p[k].add_c(-c[k]));
                    let d = len2(&q[0], &q[1], &q[2]) - params[i].clone();
                    best = Some(match best {
                        None => d,
                        Some(cur) => cur.min(&d),
                    });
                }
                best.expect("sphere union needs at least one sphere")
            }
        }
    }
}

fn rounded_box<S: Scalar>(p: &[S; 3], half: &[S], rounding: f64) -> S {
    let zero = p[0].lift(0.0);
    let q: [S; 3] = core::array::from_fn(|i| p[i].abs() - half[i].clone() + p[0].lift(rounding));
    let e: [S; 3] = core::array::from_fn(|i| q[i].max(&zero));
    let outside = (e[0].clone() * e[0].clone() + e[1].clone() * e[1].clone() + e[2].clone() * e[2].clone()).sqrt();
    let inside = q[0].max(&q[1]).max(&q[2]).min(&zero);
    outside + inside - p[0].lift(rounding)
}

/// A closed-form field: `scale · shape(x - center; Θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticField {
    shape: AnalyticShape,
    params: ParamVector,
    center: Vec3,
    scale: f64,
    domain: Domain,
}

impl AnalyticField {
    pub fn new(shape: AnalyticShape, params: Vec<f64>) -> Result<Self> {
        if params.len() != shape.param_count() {
            return Err(Error::Shape { expected: shape.param_count(), actual: params.len() });
        }
        Ok(AnalyticField {
            shape,
            params: ParamVector::new(params),
            center: [0.0; 3],
            scale: 1.0,
            domain: Domain::default(),
        })
    }

    pub fn sphere(radius: f64) -> Self {
        Self::new(AnalyticShape::Sphere, alloc::vec![radius]).unwrap()
    }

    pub fn ellipsoid(a: f64, b: f64, c: f64) -> Self {
        Self::new(AnalyticShape::Ellipsoid, alloc::vec![a, b, c]).unwrap()
    }

    pub fn torus(major: f64, minor: f64) -> Self {
        Self::new(AnalyticShape::Torus, alloc::vec![major, minor]).unwrap()
    }

    pub fn with_center(mut self, center: Vec3) -> Self {
        self.center = center;
        self
    }

    /// Multiply the field by `scale > 0`; the zero set is unchanged.
    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn shape(&self) -> &AnalyticShape {
        &self.shape
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl ImplicitField for AnalyticField {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn params(&self) -> &ParamVector {
        &self.params
    }

    fn with_params(&self, params: ParamVector) -> Result<Self> {
        if params.len() != self.params.len() {
            return Err(Error::Shape { expected: self.params.len(), actual: params.len() });
        }
        Ok(AnalyticField { params, ..self.clone() })
    }

    fn value_unchecked(&self, x: Vec3) -> f64 {
        let p: [f64; 3] = core::array::from_fn(|i| x[i] - self.center[i]);
        self.scale * self.shape.eval(&p, &self.params)
    }

    fn query_unchecked(&self, x: Vec3, req: Request) -> FieldQuery {
        if req == Request::VALUE {
            return FieldQuery { value: self.value_unchecked(x), ..Default::default() };
        }
        let k = self.params.len();
        let n = 3 + k;
        let p: [Jet; 3] = core::array::from_fn(|i| Jet::variable(x[i] - self.center[i], i, n));
        let theta: Vec<Jet> =
            self.params.iter().enumerate().map(|(i, &v)| Jet::variable(v, 3 + i, n)).collect();
        let j = self.shape.eval(&p, &theta);
        let s = self.scale;
        FieldQuery {
            value: s * j.v,
            grad_x: req.grad_x.then(|| core::array::from_fn(|i| s * j.g[i])),
            grad_theta: req.grad_theta.then(|| j.g[3..].iter().map(|g| s * g).collect()),
            hessian_x: req
                .hessian_x
                .then(|| core::array::from_fn(|a| core::array::from_fn(|b| s * j.hess(a, b)))),
            mixed: req.mixed.then(|| {
                (0..k).map(|q| core::array::from_fn(|d| s * j.hess(d, 3 + q))).collect()
            }),
        }
    }
}
