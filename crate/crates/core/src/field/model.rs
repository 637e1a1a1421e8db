use core::ops::Range;

use super::{
    AnalyticField, Domain, FieldQuery, ImplicitField, LatentField, ParamVector, Request, SirenMlp,
};
use crate::error::Result;
use crate::math::Vec3;

/// Any field the tools can load from a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldModel {
    Siren(SirenMlp),
    Latent(LatentField),
    Analytic(AnalyticField),
}

macro_rules! each {
    ($self:ident, $f:ident => $e:expr) => {
        match $self {
            FieldModel::Siren($f) => $e,
            FieldModel::Latent($f) => $e,
            FieldModel::Analytic($f) => $e,
        }
    };
}

impl ImplicitField for FieldModel {
    fn domain(&self) -> &Domain {
        each!(self, f => f.domain())
    }

    fn params(&self) -> &ParamVector {
        each!(self, f => f.params())
    }

    fn with_params(&self, params: ParamVector) -> Result<Self> {
        Ok(match self {
            FieldModel::Siren(f) => FieldModel::Siren(f.with_params(params)?),
            FieldModel::Latent(f) => FieldModel::Latent(f.with_params(params)?),
            FieldModel::Analytic(f) => FieldModel::Analytic(f.with_params(params)?),
        })
    }

    fn latent_range(&self) -> Option<Range<usize>> {
        each!(self, f => f.latent_range())
    }

    fn query_unchecked(&self, x: Vec3, req: Request) -> FieldQuery {
        each!(self, f => f.query_unchecked(x, req))
    }

    fn value_unchecked(&self, x: Vec3) -> f64 {
        each!(self, f => f.value_unchecked(x))
    }

    fn values_unchecked(&self, xs: &[Vec3], out: &mut [f64]) {
        each!(self, f => f.values_unchecked(xs, out))
    }
}

impl From<SirenMlp> for FieldModel {
    fn from(f: SirenMlp) -> Self {
        FieldModel::Siren(f)
    }
}

impl From<LatentField> for FieldModel {
    fn from(f: LatentField) -> Self {
        FieldModel::Latent(f)
    }
}

impl From<AnalyticField> for FieldModel {
    fn from(f: AnalyticField) -> Self {
        FieldModel::Analytic(f)
    }
}
