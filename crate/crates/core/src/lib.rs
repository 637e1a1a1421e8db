//! Boundary-sensitivity editing of neural implicit shapes.
//!
//! A shape is the sub-zero level set of a scalar field `f(x; Θ)`. Perturbing
//! the parameters by `δΘ` moves the boundary along its normal by
//! `δx_n = bᵀ δΘ` with `b = -∇_Θ f / ‖∇_x f‖`. This crate computes that basis
//! and builds editing, smoothing, constraint and rigidity-regularized
//! deformation on top of it.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and the
//! HTTP service live in the `isoedit` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod editing;
pub mod error;
pub mod field;
pub mod flows;
pub mod geometry;
pub mod linalg;
pub mod math;
pub mod optim;
pub mod rigid;
pub mod sensitivity;
pub mod training;

pub use error::{Error, Result};
pub use field::{
    AnalyticField, AnalyticShape, Domain, FieldModel, FieldQuery, ImplicitField, LatentField,
    MlpArch, ParamMask, ParamVector, Request, SirenMlp,
};
pub use math::{Mat3, Vec3};
