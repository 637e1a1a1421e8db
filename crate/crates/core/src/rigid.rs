//! Near-isometric editing with an approximately Killing displacement field.
//!
//! The displacement is `δx = δx_n + δx_t` with the normal part coming from
//! the parameter update (`δx_n = −∇f (∇_Θf·δΘ)/‖∇f‖²`) and the tangential
//! part from a separate network, `δx_t = (I − nnᵀ) f_t(x)`. Following the
//! method, the Jacobian of the tangential part is taken as the raw Jacobian
//! of `f_t` (the projection is not differentiated).

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::editing::{solve_update, Target, TargetValue};
use crate::error::{invalid, Error, Result};
use crate::field::{unit_normal, ImplicitField, MlpArch, MlpTape, ParamVector, Request, Seeds};
use crate::geometry::{
    marching_cubes, nearest_area_weights, project_to_surface, sample_surface, sampling_point,
    Region, SurfaceSample,
};
use crate::linalg::Matrix;
use crate::math::{self, dot_slice, mix_seed, Mat3, Vec3};
use crate::optim::Adam;
use crate::sensitivity::basis_row;

/// A vector field with its spatial Jacobian `J[o][d] = ∂v_o/∂x_d`.
pub trait VectorField {
    fn eval(&self, x: Vec3) -> (Vec3, Mat3);
}

/// `x ↦ A x + t`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineField {
    pub linear: Mat3,
    pub offset: Vec3,
}

impl AffineField {
    pub fn zero() -> Self {
        AffineField { linear: [[0.0; 3]; 3], offset: [0.0; 3] }
    }

    pub fn scaling(s: f64) -> Self {
        let mut a = Self::zero();
        (0..3).for_each(|i| a.linear[i][i] = s);
        a
    }

    /// Infinitesimal rigid motion `ω × x + t`.
    pub fn rigid(omega: Vec3, translation: Vec3) -> Self {
        let [a, b, c] = omega;
        AffineField { linear: [[0.0, -c, b], [c, 0.0, -a], [-b, a, 0.0]], offset: translation }
    }

    pub fn plus(&self, other: &AffineField) -> AffineField {
        AffineField {
            linear: core::array::from_fn(|i| math::add(self.linear[i], other.linear[i])),
            offset: math::add(self.offset, other.offset),
        }
    }
}

impl VectorField for AffineField {
    fn eval(&self, x: Vec3) -> (Vec3, Mat3) {
        (math::add(math::mat_vec(&self.linear, x), self.offset), self.linear)
    }
}

/// Sine MLP `ℝ³ → ℝ³` providing the tangential displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentialField {
    arch: MlpArch,
    params: Vec<f64>,
}

impl TangentialField {
    pub fn default_arch() -> MlpArch {
        MlpArch::new(vec![3, 64, 64, 3], 2.0).expect("valid architecture")
    }

    /// Random hidden layers and a zero output layer, so `f_t ≡ 0` initially.
    pub fn new(arch: MlpArch, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = arch.init_params(&mut rng, true);
        Self::from_params(arch, params)
    }

    pub fn from_params(arch: MlpArch, params: Vec<f64>) -> Result<Self> {
        if arch.n_in() != 3 || arch.n_out() != 3 {
            return Err(invalid("tangent_arch", "must map 3 inputs to 3 outputs"));
        }
        if params.len() != arch.param_count() {
            return Err(Error::Shape { expected: arch.param_count(), actual: params.len() });
        }
        Ok(TangentialField { arch, params })
    }

    pub fn arch(&self) -> &MlpArch {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn eval_tape(&self, x: Vec3, tape: &mut MlpTape) -> (Vec3, Mat3) {
        self.arch.forward(&self.params, &x, 1, tape);
        let y = tape.output();
        ([y[0], y[1], y[2]], tape.jacobian3())
    }
}

impl VectorField for TangentialField {
    fn eval(&self, x: Vec3) -> (Vec3, Mat3) {
        self.eval_tape(x, &mut self.arch.tape())
    }
}

fn tangent_project(n: Vec3, v: Vec3) -> Vec3 {
    math::sub(v, math::scale(n, math::dot(n, v)))
}

/// `(I − nnᵀ) f_t(x)`
pub fn tangential_displacement<F: ImplicitField + ?Sized>(
    field: &F,
    ft: &dyn VectorField,
    x: Vec3,
) -> Result<Vec3> {
    let n = unit_normal(field.query(x, Request::GRAD)?.grad())?;
    Ok(tangent_project(n, ft.eval(x).0))
}

/// Jacobian of `−g s / q` given `s = g_θ·δΘ`, `m = ∂s/∂x`, `q = ‖g‖²`.
fn normal_jacobian(g: Vec3, h: &Mat3, s: f64, m: Vec3) -> Mat3 {
    let q = math::dot(g, g);
    let hg = math::mat_vec(h, g);
    core::array::from_fn(|a| {
        core::array::from_fn(|b| -(h[a][b] * s + g[a] * m[b]) / q + 2.0 * s * g[a] * hg[b] / (q * q))
    })
}

fn check_delta<F: ImplicitField + ?Sized>(field: &F, delta: &[f64]) -> Result<()> {
    if delta.len() != field.param_count() {
        return Err(Error::Shape { expected: field.param_count(), actual: delta.len() });
    }
    Ok(())
}

/// `J(δx_n) + J(f_t)` at `x` for a full-length parameter update.
pub fn displacement_jacobian<F: ImplicitField + ?Sized>(
    field: &F,
    ft: &dyn VectorField,
    delta: &[f64],
    x: Vec3,
) -> Result<Mat3> {
    check_delta(field, delta)?;
    let q = field.query(x, Request::ALL)?;
    let g = q.grad();
    let gn = math::norm(g);
    if gn <= crate::field::GRAD_EPS {
        return Err(Error::SingularGradient { norm: gn });
    }
    let s = dot_slice(q.grad_theta.as_deref().unwrap_or_default(), delta);
    let mut m = [0.0; 3];
    for (col, d) in q.mixed.as_deref().unwrap_or_default().iter().zip(delta) {
        m = math::add(m, math::scale(*col, *d));
    }
    let jn = normal_jacobian(g, q.hessian(), s, m);
    let jt = ft.eval(x).1;
    Ok(core::array::from_fn(|a| math::add(jn[a], jt[a])))
}

/// The field whose Jacobian [`displacement_jacobian`] returns:
/// `−∇f (∇_Θf·δΘ)/‖∇f‖² + f_t(x)`, with `f_t` unprojected.
pub fn unprojected_displacement<F: ImplicitField + ?Sized>(
    field: &F,
    ft: &dyn VectorField,
    delta: &[f64],
    x: Vec3,
) -> Result<Vec3> {
    check_delta(field, delta)?;
    let q = field.query(x, Request::BASIS)?;
    let g = q.grad();
    let s = dot_slice(q.grad_theta.as_deref().unwrap_or_default(), delta);
    Ok(math::add(math::scale(g, -s / math::dot(g, g)), ft.eval(x).0))
}

/// Total displacement `n (bᵀδΘ) + (I − nnᵀ) f_t(x)`.
pub fn displacement<F: ImplicitField + ?Sized>(
    field: &F,
    ft: &dyn VectorField,
    delta: &[f64],
    x: Vec3,
) -> Result<Vec3> {
    check_delta(field, delta)?;
    let q = field.query(x, Request::BASIS)?;
    let g = q.grad();
    let n = unit_normal(g)?;
    let s = dot_slice(q.grad_theta.as_deref().unwrap_or_default(), delta);
    let dn = -s / math::norm(g);
    Ok(math::add(math::scale(n, dn), tangent_project(n, ft.eval(x).0)))
}

fn sym_frobenius_sq(j: &Mat3) -> f64 {
    let mut e = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            let s = j[a][b] + j[b][a];
            e += s * s;
        }
    }
    e
}

/// `E_K = Σ w_i ‖J_i + J_iᵀ‖²_F`
pub fn killing_energy<F: ImplicitField + ?Sized>(
    field: &F,
    samples: &[SurfaceSample],
    ft: &dyn VectorField,
    delta: &[f64],
) -> Result<f64> {
    let mut e = 0.0;
    for s in samples {
        let w = s.area_weight.ok_or(Error::MissingWeights)?;
        e += w * sym_frobenius_sq(&displacement_jacobian(field, ft, delta, s.position)?);
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RigidConfig {
    /// Weight of the displacement-matching term.
    pub alpha: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub beta1: f64,
    pub beta2: f64,
    /// Quadrature samples for the Killing energy.
    pub samples: usize,
    pub target: Target,
    pub target_samples: usize,
    /// Region held in place; the target region wins where they overlap.
    pub anchor: Option<Region>,
    pub anchor_samples: usize,
    pub tangent_arch: MlpArch,
    pub area_resolution: usize,
    /// Abort when the objective exceeds this multiple of its initial value.
    pub divergence_factor: f64,
    pub seed: u64,
}

impl Default for RigidConfig {
    fn default() -> Self {
        RigidConfig {
            alpha: 0.01,
            learning_rate: 1e-3,
            iterations: 2000,
            beta1: 0.9,
            beta2: 0.999,
            samples: 1000,
            target: Target::region(Region::All, crate::editing::Displacement::Normal { value: 0.0 }),
            target_samples: 100,
            anchor: None,
            anchor_samples: 100,
            tangent_arch: TangentialField::default_arch(),
            area_resolution: 48,
            divergence_factor: 1e6,
            seed: 0,
        }
    }
}

impl RigidConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", "must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(invalid("learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(invalid("beta1", "moment decays must lie in [0, 1)"));
        }
        if self.samples < 4 {
            return Err(invalid("samples", "at least 4 samples are required"));
        }
        if self.target_samples == 0 && self.target.points.is_none() {
            return Err(invalid("target_samples", "must be positive"));
        }
        if self.anchor.is_some() && self.anchor_samples == 0 {
            return Err(invalid("anchor_samples", "must be positive with an anchor region"));
        }
        if self.tangent_arch.n_in() != 3 || self.tangent_arch.n_out() != 3 {
            return Err(invalid("tangent_arch", "must map 3 inputs to 3 outputs"));
        }
        Ok(())
    }
}

/// Objective terms at one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Energies {
    pub killing: f64,
    /// Unweighted `Σ w ‖δx̄ − δx‖²`.
    pub constraint: f64,
    /// `killing + α·constraint`
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnergyRecord {
    pub step: usize,
    pub energies: Energies,
}

#[derive(Debug, Clone)]
struct KillingSample {
    w: f64,
    position: Vec3,
    g: Vec3,
    h: Mat3,
    grad_theta: Vec<f64>,
    /// `[p][d]` flattened
    mixed: Vec<f64>,
}

#[derive(Debug, Clone)]
struct MatchSample {
    w: f64,
    position: Vec3,
    normal: Vec3,
    basis: Vec<f64>,
    target: Vec3,
}

/// Precomputed per-sample field data for the joint optimization over the
/// parameter update and the tangential network.
#[derive(Debug, Clone)]
pub struct RigidProblem {
    params: usize,
    alpha: f64,
    killing: Vec<KillingSample>,
    matching: Vec<MatchSample>,
}

impl RigidProblem {
    pub fn new<F: ImplicitField + ?Sized>(field: &F, config: &RigidConfig) -> Result<Self> {
        config.validate()?;
        let p = field.param_count();
        let mut surface = sample_surface(field, config.samples, None, mix_seed(config.seed, 1))?;
        let mesh = marching_cubes(field, config.area_resolution)?;
        nearest_area_weights(&mut surface, &mesh)?;
        let share = mesh.area() / config.samples as f64;

        let mut killing = Vec::with_capacity(surface.len());
        for s in &surface {
            let q = field.query(s.position, Request::ALL)?;
            let mut mixed = Vec::with_capacity(3 * p);
            q.mixed.as_deref().unwrap_or_default().iter().for_each(|c| mixed.extend_from_slice(c));
            killing.push(KillingSample {
                w: s.area_weight.unwrap_or(share),
                position: s.position,
                g: q.grad(),
                h: *q.hessian(),
                grad_theta: q.grad_theta.unwrap_or_default(),
                mixed,
            });
        }

        let mut matching = Vec::new();
        let targets = match &config.target.points {
            Some(points) => points
                .iter()
                .map(|&x| sampling_point(field, project_to_surface(field, x, Default::default())?))
                .collect::<Result<Vec<_>>>()?,
            None => sample_surface(
                field,
                config.target_samples,
                config.target.region.as_ref(),
                mix_seed(config.seed, 2),
            )?,
        };
        for (i, s) in targets.iter().enumerate() {
            let target = match config.target.displacement.at(i, s.position) {
                TargetValue::Normal(d) => math::scale(s.normal, d),
                TargetValue::Vector(v) => v,
            };
            matching.push(Self::match_sample(field, s, share, target)?);
        }
        if let Some(anchor) = &config.anchor {
            let region = match &config.target.region {
                Some(r) => anchor.clone().and(r.clone().not()),
                None => anchor.clone(),
            };
            for s in sample_surface(field, config.anchor_samples, Some(&region), mix_seed(config.seed, 3))? {
                matching.push(Self::match_sample(field, &s, share, [0.0; 3])?);
            }
        }
        Ok(RigidProblem { params: p, alpha: config.alpha, killing, matching })
    }

    fn match_sample<F: ImplicitField + ?Sized>(
        field: &F,
        s: &SurfaceSample,
        w: f64,
        target: Vec3,
    ) -> Result<MatchSample> {
        Ok(MatchSample {
            w,
            position: s.position,
            normal: s.normal,
            basis: basis_row(field, s.position)?,
            target,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params
    }

    pub fn killing_samples(&self) -> usize {
        self.killing.len()
    }

    pub fn matching_samples(&self) -> usize {
        self.matching.len()
    }

    /// Killing-energy quadrature samples with their weights.
    pub fn quadrature(&self) -> Vec<SurfaceSample> {
        self.killing
            .iter()
            .map(|k| SurfaceSample {
                position: k.position,
                normal: math::scale(k.g, 1.0 / math::norm(k.g)),
                curvature: None,
                area_weight: Some(k.w),
            })
            .collect()
    }

    /// Regularized least-squares fit of the normal target components alone,
    /// as plain editing would compute it on the same samples.
    pub fn normal_solution(&self, lambda: f64) -> Result<Vec<f64>> {
        let mut b = Matrix::zeros(self.matching.len(), self.params);
        let mut y = Vec::with_capacity(self.matching.len());
        for (i, m) in self.matching.iter().enumerate() {
            b.row_mut(i).copy_from_slice(&m.basis);
            y.push(math::dot(m.normal, m.target));
        }
        solve_update(&b, &y, lambda)
    }

    pub fn objective(&self, delta: &[f64], ft: &TangentialField) -> Result<Energies> {
        self.evaluate(delta, ft, None)
    }

    /// Objective and its gradients with respect to `δΘ` and the tangential
    /// network parameters.
    pub fn gradient(&self, delta: &[f64], ft: &TangentialField) -> Result<(Energies, Vec<f64>, Vec<f64>)> {
        let mut gd = vec![0.0; self.params];
        let mut gx = vec![0.0; ft.params.len()];
        let e = self.evaluate(delta, ft, Some((&mut gd, &mut gx)))?;
        Ok((e, gd, gx))
    }

    fn evaluate(
        &self,
        delta: &[f64],
        ft: &TangentialField,
        mut grads: Option<(&mut [f64], &mut [f64])>,
    ) -> Result<Energies> {
        if delta.len() != self.params {
            return Err(Error::Shape { expected: self.params, actual: delta.len() });
        }
        let mut tape = ft.arch.tape();
        let mut killing = 0.0;
        for k in &self.killing {
            let s = dot_slice(&k.grad_theta, delta);
            let mut m = [0.0; 3];
            for (p, d) in delta.iter().enumerate() {
                if *d != 0.0 {
                    m = math::add(m, math::scale([k.mixed[3 * p], k.mixed[3 * p + 1], k.mixed[3 * p + 2]], *d));
                }
            }
            let jn = normal_jacobian(k.g, &k.h, s, m);
            let jt = ft.eval_tape(k.position, &mut tape).1;
            let j: Mat3 = core::array::from_fn(|a| math::add(jn[a], jt[a]));
            killing += k.w * sym_frobenius_sq(&j);
            let Some((gd, gx)) = grads.as_mut() else { continue };
            // ∂E/∂J = 4w (J + Jᵀ)
            let gj: Mat3 = core::array::from_fn(|a| core::array::from_fn(|b| 4.0 * k.w * (j[a][b] + j[b][a])));
            let q = math::dot(k.g, k.g);
            let hg = math::mat_vec(&k.h, k.g);
            let mut ds = 0.0;
            let mut dm = [0.0; 3];
            for a in 0..3 {
                for b in 0..3 {
                    ds += gj[a][b] * (-k.h[a][b] / q + 2.0 * k.g[a] * hg[b] / (q * q));
                    dm[b] -= gj[a][b] * k.g[a] / q;
                }
            }
            for p in 0..self.params {
                gd[p] += ds * k.grad_theta[p]
                    + dm[0] * k.mixed[3 * p]
                    + dm[1] * k.mixed[3 * p + 1]
                    + dm[2] * k.mixed[3 * p + 2];
            }
            let seed: [f64; 9] = core::array::from_fn(|i| gj[i % 3][i / 3]);
            ft.arch.backward(&ft.params, &mut tape, Seeds { value: &[0.0; 3], tangent: Some(&seed) }, 1.0, gx, None);
        }

        let mut constraint = 0.0;
        for c in &self.matching {
            ft.arch.forward(&ft.params, &c.position, 0, &mut tape);
            let y = tape.output();
            let vt = tangent_project(c.normal, [y[0], y[1], y[2]]);
            let dn = dot_slice(&c.basis, delta);
            let r = math::sub(c.target, math::add(math::scale(c.normal, dn), vt));
            constraint += c.w * math::dot(r, r);
            let Some((gd, gx)) = grads.as_mut() else { continue };
            let scale = -2.0 * self.alpha * c.w;
            math::axpy(scale * math::dot(r, c.normal), &c.basis, gd);
            let seed = tangent_project(c.normal, math::scale(r, scale));
            ft.arch.backward(&ft.params, &mut tape, Seeds { value: &seed, tangent: None }, 1.0, gx, None);
        }
        let total = killing + self.alpha * constraint;
        if !total.is_finite() {
            return Err(Error::NumericFailure("rigid objective".into()));
        }
        Ok(Energies { killing, constraint, total })
    }
}

/// Result of [`rigid_edit`].
#[derive(Debug, Clone)]
pub struct RigidOutcome<F> {
    pub field: F,
    pub tangent: TangentialField,
    pub delta: Vec<f64>,
    pub trace: Vec<EnergyRecord>,
}

pub fn rigid_edit<F: ImplicitField>(field: &F, config: &RigidConfig) -> Result<RigidOutcome<F>> {
    rigid_edit_with(field, config, &mut |_| {})
}

/// Jointly minimizes `E_K + α E_C` over `δΘ` and the tangential network with
/// Adam, then applies `δΘ`.
pub fn rigid_edit_with<F: ImplicitField>(
    field: &F,
    config: &RigidConfig,
    observer: &mut dyn FnMut(&EnergyRecord),
) -> Result<RigidOutcome<F>> {
    let problem = RigidProblem::new(field, config)?;
    let mut ft = TangentialField::new(config.tangent_arch.clone(), mix_seed(config.seed, 4))?;
    let p = problem.param_count();
    let mut z: Vec<f64> = vec![0.0; p];
    z.extend_from_slice(ft.params());
    let mut adam = Adam::new(z.len(), config.learning_rate).with_betas(config.beta1, config.beta2);
    let mut trace = Vec::with_capacity(config.iterations + 1);
    let mut initial = None;
    let mut grad = vec![0.0; z.len()];
    for step in 0..=config.iterations {
        ft.params_mut().copy_from_slice(&z[p..]);
        let (e, gd, gx) = problem.gradient(&z[..p], &ft).map_err(|e| e.at_iteration(step))?;
        let first = *initial.get_or_insert(e.total);
        if e.total > config.divergence_factor * first.max(f64::MIN_POSITIVE) {
            return Err(Error::OptimizationFailure { step, objective: e.total });
        }
        let record = EnergyRecord { step, energies: e };
        observer(&record);
        trace.push(record);
        if step == config.iterations {
            break;
        }
        grad[..p].copy_from_slice(&gd);
        grad[p..].copy_from_slice(&gx);
        adam.step(&mut z, &grad);
    }
    let delta = z[..p].to_vec();
    let params = ParamVector::new(
        field.params().iter().zip(&delta).map(|(a, d)| a + d).collect::<Vec<f64>>(),
    );
    Ok(RigidOutcome { field: field.with_params(params)?, tangent: ft, delta, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::AnalyticField;
    use crate::geometry::{area_weights, sample_surface};

    fn sphere_samples(n: usize) -> (AnalyticField, Vec<SurfaceSample>) {
        let s = AnalyticField::sphere(1.0);
        let mut pts = sample_surface(&s, n, None, 3).unwrap();
        area_weights(&mut pts, 4.0 * core::f64::consts::PI).unwrap();
        (s, pts)
    }

    #[test]
    fn tangential_projection() {
        let s = AnalyticField::sphere(1.0);
        let up = AffineField { linear: [[0.0; 3]; 3], offset: [0.0, 0.0, 1.0] };
        assert_eq!(tangential_displacement(&s, &up, [0.0, 0.0, 1.0]).unwrap(), [0.0; 3]);
        let side = AffineField { linear: [[0.0; 3]; 3], offset: [1.0, 0.0, 0.0] };
        assert_eq!(tangential_displacement(&s, &side, [0.0, 0.0, 1.0]).unwrap(), [1.0, 0.0, 0.0]);
        let mut ft = TangentialField::new(MlpArch::new(vec![3, 16, 3], 2.0).unwrap(), 1).unwrap();
        ft.params_mut().iter_mut().enumerate().for_each(|(i, p)| *p += 0.01 * (i % 7) as f64);
        for p in sample_surface(&s, 100, None, 0).unwrap() {
            let v = tangential_displacement(&s, &ft, p.position).unwrap();
            assert!(math::dot(v, p.normal).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_jacobian_closed_form() {
        let s = AnalyticField::sphere(1.0);
        let dr = 0.3;
        for p in sample_surface(&s, 20, None, 1).unwrap() {
            let x = p.position;
            let j = displacement_jacobian(&s, &AffineField::zero(), &[dr], x).unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    let want = dr * (f64::from(u8::from(a == b)) - x[a] * x[b]);
                    assert!((j[a][b] - want).abs() < 1e-8);
                }
            }
            let z = displacement_jacobian(&s, &AffineField::zero(), &[0.0], x).unwrap();
            assert_eq!(z, [[0.0; 3]; 3]);
        }
    }

    #[test]
    fn killing_fields_of_the_sphere() {
        let (s, pts) = sphere_samples(100);
        let rot = AffineField::rigid([0.3, -0.2, 0.5], [0.1, 0.0, -0.4]);
        assert!(killing_energy(&s, &pts, &rot, &[0.0]).unwrap() < 1e-8);
        let area: f64 = pts.iter().map(|p| p.area_weight.unwrap()).sum();
        let e = killing_energy(&s, &pts, &AffineField::scaling(1.0), &[0.0]).unwrap();
        assert!((e / area - 12.0).abs() < 1e-9);
        let shifted = AffineField::scaling(1.0).plus(&rot);
        let e2 = killing_energy(&s, &pts, &shifted, &[0.0]).unwrap();
        assert!((e - e2).abs() <= 1e-12 * e);
    }

    #[test]
    fn zero_target_stays_at_rest() {
        let s = AnalyticField::ellipsoid(0.9, 0.7, 0.6);
        let cfg = RigidConfig {
            samples: 40,
            target_samples: 10,
            iterations: 20,
            tangent_arch: MlpArch::new(vec![3, 8, 3], 2.0).unwrap(),
            area_resolution: 16,
            ..Default::default()
        };
        let out = rigid_edit(&s, &cfg).unwrap();
        assert!(out.delta.iter().all(|d| *d == 0.0));
        assert!(out.trace.iter().all(|r| r.energies.total == 0.0));
        assert_eq!(out.trace.len(), 21);
    }

    #[test]
    fn config_validation() {
        assert!(RigidConfig { alpha: 0.0, ..Default::default() }.validate().is_err());
        let bad = MlpArch::new(vec![3, 8, 1], 2.0).unwrap();
        assert!(RigidConfig { tangent_arch: bad, ..Default::default() }.validate().is_err());
    }
}
