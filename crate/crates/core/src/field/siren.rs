use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mlp::{MlpArch, MlpTape, Seeds};
use super::{Domain, FieldQuery, ImplicitField, ParamVector, Request};
use crate::error::{Error, Result};
use crate::math::Vec3;

/// Scalar sine network `ℝ³ → ℝ` (default 3→32→32→32→1, `ω₀ = 30`, P = 2273).
#[derive(Debug, Clone, PartialEq)]
pub struct SirenMlp {
    arch: MlpArch,
    params: ParamVector,
    domain: Domain,
}

impl SirenMlp {
    pub fn default_arch() -> MlpArch {
        MlpArch { widths: vec![3, 32, 32, 32, 1], omega0: 30.0 }
    }

    pub fn new(arch: MlpArch, params: ParamVector, domain: Domain) -> Result<Self> {
        if arch.n_in() != 3 || arch.n_out() != 1 {
            return Err(Error::invalid("widths", "scalar field network must be 3 → … → 1"));
        }
        if params.len() != arch.param_count() {
            return Err(Error::Shape { expected: arch.param_count(), actual: params.len() });
        }
        if !params.is_finite() {
            return Err(Error::NumericFailure("non-finite parameters".into()));
        }
        Ok(SirenMlp { arch, params, domain })
    }

    /// Freshly initialised network.
    pub fn random(arch: MlpArch, domain: Domain, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = arch.init_params(&mut rng, false);
        Self::new(arch, ParamVector::new(p), domain)
    }

    pub fn arch(&self) -> &MlpArch {
        &self.arch
    }
}

impl ImplicitField for SirenMlp {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn params(&self) -> &ParamVector {
        &self.params
    }

    fn with_params(&self, params: ParamVector) -> Result<Self> {
        SirenMlp::new(self.arch.clone(), params, self.domain)
    }

    fn query_unchecked(&self, x: Vec3, req: Request) -> FieldQuery {
        network_query(&self.arch, &self.params, &x, req, 0)
    }

    fn value_unchecked(&self, x: Vec3) -> f64 {
        let mut t = self.arch.tape();
        self.arch.forward(&self.params, &x, 0, &mut t);
        t.output()[0]
    }

    fn values_unchecked(&self, xs: &[Vec3], out: &mut [f64]) {
        let mut t = self.arch.tape();
        for (o, x) in out.iter_mut().zip(xs) {
            self.arch.forward(&self.params, x, 0, &mut t);
            *o = t.output()[0];
        }
    }
}

/// Evaluate a scalar network at `input` (spatial coordinates first). The
/// trailing `latent_inputs` entries of the input are treated as parameters
/// appended after the network weights.
pub(crate) fn network_query(
    arch: &MlpArch,
    weights: &[f64],
    input: &[f64],
    req: Request,
    latent_inputs: usize,
) -> FieldQuery {
    let mut t: MlpTape = arch.tape();
    arch.forward(weights, input, req.order(), &mut t);
    let value = t.output()[0];
    let grad_x = req.grad_x.then(|| core::array::from_fn(|d| t.tangent(0, d)));
    let hessian_x =
        req.hessian_x.then(|| core::array::from_fn(|a| core::array::from_fn(|b| t.second(0, a, b))));
    let pw = arch.param_count();
    let n_in = arch.n_in();
    let mut run = |tangent: Option<&[f64]>, value_seed: f64| -> Vec<f64> {
        let mut g = vec![0.0; pw + latent_inputs];
        let mut ig = vec![0.0; n_in];
        let seed_v = [value_seed];
        let (gw, _) = g.split_at_mut(pw);
        arch.backward(
            weights,
            &mut t,
            Seeds { value: &seed_v, tangent },
            1.0,
            gw,
            if latent_inputs > 0 { Some(&mut ig) } else { None },
        );
        g[pw..].copy_from_slice(&ig[n_in - latent_inputs..]);
        g
    };
    let grad_theta = req.grad_theta.then(|| run(None, 1.0));
    let mixed = req.mixed.then(|| {
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|d| {
                let mut seed = [0.0; 3];
                seed[d] = 1.0;
                run(Some(&seed), 0.0)
            })
            .collect();
        (0..pw + latent_inputs).map(|p| [cols[0][p], cols[1][p], cols[2][p]]).collect()
    });
    FieldQuery { value, grad_x, grad_theta, hessian_x, mixed }
}
