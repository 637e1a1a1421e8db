use alloc::vec::Vec;
use core::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::mlp::MlpArch;
use super::siren::network_query;
use super::{Domain, FieldQuery, ImplicitField, ParamVector, Request};
use crate::error::{Error, Result};
use crate::math::Vec3;

/// Decoder `f(x, l; Θ)` with a latent code `l`.
///
/// The parameter vector is the decoder weights followed by the `L` latent
/// entries, so the latent-only mask is the trailing range.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentField {
    arch: MlpArch,
    params: ParamVector,
    latent_dim: usize,
    domain: Domain,
}

impl LatentField {
    pub fn new(arch: MlpArch, params: ParamVector, latent_dim: usize, domain: Domain) -> Result<Self> {
        if latent_dim == 0 {
            return Err(Error::invalid("latent_dim", "must be at least 1"));
        }
        if arch.n_in() != 3 + latent_dim || arch.n_out() != 1 {
            return Err(Error::invalid("widths", "decoder must be (3 + L) → … → 1"));
        }
        let expected = arch.param_count() + latent_dim;
        if params.len() != expected {
            return Err(Error::Shape { expected, actual: params.len() });
        }
        Ok(LatentField { arch, params, latent_dim, domain })
    }

    /// Decoder with random weights and a small random latent code.
    pub fn random(arch: MlpArch, latent_dim: usize, domain: Domain, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = arch.init_params(&mut rng, false);
        let normal = Normal::new(0.0, 0.01).unwrap();
        p.extend((0..latent_dim).map(|_| normal.sample(&mut rng)));
        Self::new(arch, ParamVector::new(p), latent_dim, domain)
    }

    pub fn arch(&self) -> &MlpArch {
        &self.arch
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn decoder_params(&self) -> &[f64] {
        &self.params[..self.arch.param_count()]
    }

    pub fn latent(&self) -> &[f64] {
        &self.params[self.arch.param_count()..]
    }

    /// Same decoder with another latent code.
    pub fn with_latent(&self, latent: &[f64]) -> Result<Self> {
        if latent.len() != self.latent_dim {
            return Err(Error::Shape { expected: self.latent_dim, actual: latent.len() });
        }
        let mut p: Vec<f64> = self.decoder_params().to_vec();
        p.extend_from_slice(latent);
        self.with_params(ParamVector::new(p))
    }

    fn input(&self, x: Vec3) -> Vec<f64> {
        let mut u = Vec::with_capacity(3 + self.latent_dim);
        u.extend_from_slice(&x);
        u.extend_from_slice(self.latent());
        u
    }
}

impl ImplicitField for LatentField {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn params(&self) -> &ParamVector {
        &self.params
    }

    fn with_params(&self, params: ParamVector) -> Result<Self> {
        LatentField::new(self.arch.clone(), params, self.latent_dim, self.domain)
    }

    fn latent_range(&self) -> Option<Range<usize>> {
        let pw = self.arch.param_count();
        Some(pw..pw + self.latent_dim)
    }

    fn query_unchecked(&self, x: Vec3, req: Request) -> FieldQuery {
        let u = self.input(x);
        network_query(&self.arch, self.decoder_params(), &u, req, self.latent_dim)
    }

    fn values_unchecked(&self, xs: &[Vec3], out: &mut [f64]) {
        let mut t = self.arch.tape();
        let mut u = self.input([0.0; 3]);
        for (o, x) in out.iter_mut().zip(xs) {
            u[..3].copy_from_slice(x);
            self.arch.forward(self.decoder_params(), &u, 0, &mut t);
            *o = t.output()[0];
        }
    }

    fn value_unchecked(&self, x: Vec3) -> f64 {
        let mut out = [0.0];
        self.values_unchecked(&[x], &mut out);
        out[0]
    }
}
