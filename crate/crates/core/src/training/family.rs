use alloc::vec;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{surface_error, AnalyticTarget, LossWeights, PointLoss, SamplePool, SdfTarget, FIT_FAILURE_RESIDUAL, LOG_EVERY};
use crate::editing::{edit_with, EditReport, EditSpec, IterationRecord};
use crate::error::{Error, Result};
use crate::field::{AnalyticField, AnalyticShape, Domain, LatentField, MlpArch, ParamMask, ParamVector};
use crate::math;
use crate::optim::Adam;

/// Which analytic shape the family members are.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum FamilyKind {
    /// members `[hx, hy, hz]`
    RoundedBoxes { rounding: f64 },
    /// members `[radius]`
    Spheres,
    /// members `[half_length, radius]`
    Capsules,
    /// members `[a, b, c]`
    Ellipsoids,
}

impl FamilyKind {
    fn shape(&self) -> AnalyticShape {
        match self {
            FamilyKind::RoundedBoxes { rounding } => AnalyticShape::RoundedBox { rounding: *rounding },
            FamilyKind::Spheres => AnalyticShape::Sphere,
            FamilyKind::Capsules => AnalyticShape::Capsule,
            FamilyKind::Ellipsoids => AnalyticShape::Ellipsoid,
        }
    }
}

/// A finite set of analytic shapes centred at the origin.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShapeFamily {
    pub kind: FamilyKind,
    pub members: Vec<Vec<f64>>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub domain: Domain,
}

impl ShapeFamily {
    pub fn new(kind: FamilyKind, members: Vec<Vec<f64>>) -> Result<Self> {
        let fam = ShapeFamily { kind, members, domain: Domain::default() };
        fam.validate()?;
        Ok(fam)
    }

    /// Boxes with independent half extents in `[0.35, 0.8]` and rounding 0.1.
    pub fn rounded_boxes(count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let members = (0..count).map(|_| (0..3).map(|_| rng.random_range(0.35..0.8)).collect()).collect();
        ShapeFamily { kind: FamilyKind::RoundedBoxes { rounding: 0.1 }, members, domain: Domain::default() }
    }

    /// Spheres with evenly spaced radii in `[lo, hi]`.
    pub fn spheres(count: usize, lo: f64, hi: f64) -> Self {
        let step = if count > 1 { (hi - lo) / (count - 1) as f64 } else { 0.0 };
        let members = (0..count).map(|k| vec![lo + step * k as f64]).collect();
        ShapeFamily { kind: FamilyKind::Spheres, members, domain: Domain::default() }
    }

    pub fn capsules(count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let members =
            (0..count).map(|_| vec![rng.random_range(0.2..0.6), rng.random_range(0.2..0.45)]).collect();
        ShapeFamily { kind: FamilyKind::Capsules, members, domain: Domain::default() }
    }

    pub fn ellipsoids(count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let members = (0..count).map(|_| (0..3).map(|_| rng.random_range(0.4..0.9)).collect()).collect();
        ShapeFamily { kind: FamilyKind::Ellipsoids, members, domain: Domain::default() }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, k: usize) -> Result<AnalyticField> {
        let p = self.members.get(k).ok_or(Error::invalid("members", "index out of range"))?;
        Ok(AnalyticField::new(self.kind.shape(), p.clone())?.with_domain(self.domain))
    }

    pub fn validate(&self) -> Result<()> {
        let want = self.kind.shape().param_count();
        for p in &self.members {
            if p.len() != want {
                return Err(Error::Shape { expected: want, actual: p.len() });
            }
            if !p.iter().all(|v| *v > 0.0 && v.is_finite()) {
                return Err(Error::invalid("members", "shape parameters must be positive"));
            }
        }
        if let FamilyKind::RoundedBoxes { rounding } = self.kind {
            if !(rounding >= 0.0) || self.members.iter().any(|p| p.iter().any(|h| *h <= rounding)) {
                return Err(Error::invalid("members", "half extents must exceed the rounding"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    /// Hidden layer widths of the decoder; input and output sizes follow from `L`.
    pub hidden: Vec<usize>,
    pub omega0: f64,
    pub shapes_per_batch: usize,
    pub surface_batch: usize,
    pub free_batch: usize,
    pub pool_size: usize,
    pub weights: LossWeights,
    pub learning_rate: f64,
    pub latent_learning_rate: f64,
    pub final_lr_fraction: f64,
    /// Weight of the `‖l‖²` penalty per shape.
    pub latent_regularization: f64,
    pub latent_init_sigma: f64,
    pub iterations: usize,
    pub near_sigma: f64,
    pub holdout: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![64, 64, 64],
            omega0: 10.0,
            shapes_per_batch: 8,
            surface_batch: 32,
            free_batch: 32,
            pool_size: 4000,
            weights: LossWeights::default(),
            learning_rate: 2e-3,
            latent_learning_rate: 2e-2,
            final_lr_fraction: 0.05,
            latent_regularization: 1e-4,
            latent_init_sigma: 0.01,
            iterations: 40_000,
            near_sigma: 0.1,
            holdout: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::invalid("hidden", "need at least one non-empty hidden layer"));
        }
        if !(self.omega0 > 0.0) {
            return Err(Error::invalid("omega0", "must be positive"));
        }
        if self.shapes_per_batch == 0 || self.surface_batch == 0 || self.free_batch == 0 || self.pool_size == 0 {
            return Err(Error::invalid("shapes_per_batch", "batch and pool sizes must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.latent_learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate", "must be positive"));
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return Err(Error::invalid("final_lr_fraction", "must lie in (0, 1]"));
        }
        if !(self.latent_regularization >= 0.0 && self.latent_init_sigma >= 0.0 && self.near_sigma > 0.0) {
            return Err(Error::invalid("latent_regularization", "must be non-negative"));
        }
        if self.iterations == 0 || self.holdout == 0 {
            return Err(Error::invalid("iterations", "must be at least 1"));
        }
        Ok(())
    }

    pub fn arch(&self, latent_dim: usize) -> MlpArch {
        let mut widths = vec![3 + latent_dim];
        widths.extend_from_slice(&self.hidden);
        widths.push(1);
        MlpArch { widths, omega0: self.omega0 }
    }
}

/// A trained decoder with one latent code per family member.
#[derive(Debug, Clone)]
pub struct AutoDecoder {
    pub family: ShapeFamily,
    pub latents: Vec<Vec<f64>>,
    /// Held-out mean surface `|f|` per member.
    pub residuals: Vec<f64>,
    pub loss_trace: Vec<(usize, f64)>,
    field: LatentField,
}

impl AutoDecoder {
    /// The decoder with member `k`'s latent code.
    pub fn field(&self, k: usize) -> Result<LatentField> {
        let l = self.latents.get(k).ok_or(Error::invalid("member", "index out of range"))?;
        self.field.with_latent(l)
    }

    /// Decoder at `(1 − t)·l_a + t·l_b`.
    pub fn interpolate(&self, a: usize, b: usize, t: f64) -> Result<LatentField> {
        let (la, lb) = (
            self.latents.get(a).ok_or(Error::invalid("member", "index out of range"))?,
            self.latents.get(b).ok_or(Error::invalid("member", "index out of range"))?,
        );
        let l: Vec<f64> = la.iter().zip(lb).map(|(x, y)| (1.0 - t) * x + t * y).collect();
        self.field.with_latent(&l)
    }

    pub fn latent_dim(&self) -> usize {
        self.field.latent_dim()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Jointly optimize a decoder and per-member latent codes.
pub fn train_auto_decoder(family: &ShapeFamily, latent_dim: usize, config: &TrainConfig) -> Result<AutoDecoder> {
    train_auto_decoder_with(family, latent_dim, config, &mut |_, _| ControlFlow::Continue(()))
}

pub fn train_auto_decoder_with(
    family: &ShapeFamily,
    latent_dim: usize,
    config: &TrainConfig,
    observer: &mut dyn FnMut(usize, f64) -> ControlFlow<()>,
) -> Result<AutoDecoder> {
    config.validate()?;
    family.validate()?;
    if latent_dim == 0 {
        return Err(Error::invalid("latent_dim", "must be at least 1"));
    }
    if family.len() < 2 * latent_dim {
        return Err(Error::invalid("family", "needs at least twice as many members as latent dimensions"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let targets: Vec<AnalyticTarget> =
        (0..family.len()).map(|k| family.member(k).map(AnalyticTarget)).collect::<Result<_>>()?;
    let pools: Vec<SamplePool> = targets
        .iter()
        .map(|t| SamplePool::draw(t, config.pool_size, config.near_sigma, &mut rng))
        .collect::<Result<_>>()?;

    let arch = config.arch(latent_dim);
    let mut params = arch.init_params(&mut rng, false);
    let init = Normal::new(0.0, config.latent_init_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let mut latents: Vec<Vec<f64>> =
        (0..family.len()).map(|_| (0..latent_dim).map(|_| init.sample(&mut rng)).collect()).collect();

    let mut adam = Adam::new(params.len(), config.learning_rate);
    let mut latent_adam: Vec<Adam> =
        (0..family.len()).map(|_| Adam::new(latent_dim, config.latent_learning_rate)).collect();
    let mut grad = vec![0.0; params.len()];
    let mut input = vec![0.0; 3 + latent_dim];
    let mut input_grad = vec![0.0; 3 + latent_dim];
    let mut loss_fn = PointLoss::new(&arch, config.weights);
    let per_shape = config.shapes_per_batch.min(family.len());
    let (ws, wf) = (
        1.0 / (per_shape * config.surface_batch) as f64,
        1.0 / (per_shape * config.free_batch) as f64,
    );
    let mut trace = Vec::new();

    for k in 0..config.iterations {
        let decay = libm::pow(config.final_lr_fraction, k as f64 / config.iterations as f64);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for _ in 0..per_shape {
            let s = rng.random_range(0..family.len());
            input[3..].copy_from_slice(&latents[s]);
            input_grad.iter_mut().for_each(|g| *g = 0.0);
            let pool = &pools[s];
            for _ in 0..config.surface_batch {
                let (p, n) = pool.surface[rng.random_range(0..pool.surface.len())];
                input[..3].copy_from_slice(&p);
                loss += ws * loss_fn.surface(&params, &input, n, ws, &mut grad, Some(&mut input_grad));
            }
            for _ in 0..config.free_batch {
                let (p, d) = pool.free[rng.random_range(0..pool.free.len())];
                input[..3].copy_from_slice(&p);
                loss += wf * loss_fn.free(&params, &input, d, wf, &mut grad, Some(&mut input_grad));
            }
            let reg = config.latent_regularization / per_shape as f64;
            let mut lg: Vec<f64> = input_grad[3..].to_vec();
            for (g, l) in lg.iter_mut().zip(&latents[s]) {
                *g += 2.0 * reg * l;
                loss += reg * l * l;
            }
            latent_adam[s].learning_rate = config.latent_learning_rate * decay;
            latent_adam[s].step(&mut latents[s], &lg);
        }
        if !loss.is_finite() || !math::all_finite(&grad) {
            return Err(Error::OptimizationFailure { step: k, objective: loss });
        }
        adam.learning_rate = config.learning_rate * decay;
        adam.step(&mut params, &grad);
        if k % LOG_EVERY == 0 || k + 1 == config.iterations {
            trace.push((k, loss));
            if observer(k, loss).is_break() {
                break;
            }
        }
    }

    let mut full = params;
    full.extend_from_slice(&latents[0]);
    let field = LatentField::new(arch, ParamVector::new(full), latent_dim, family.domain)?;
    let mut residuals = Vec::with_capacity(family.len());
    for (s, t) in targets.iter().enumerate() {
        let holdout = t.surface_points(config.holdout, &mut rng)?;
        let (res, _, _) = surface_error(&field.with_latent(&latents[s])?, &holdout);
        residuals.push(res);
    }
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    if !(worst <= FIT_FAILURE_RESIDUAL) {
        return Err(Error::FitFailure { residual: worst, iterations: config.iterations });
    }
    Ok(AutoDecoder { family: family.clone(), latents, residuals, loss_trace: trace, field })
}

/// Edit through the latent code only; the decoder weights are left as is.
pub fn semantic_edit(field: &LatentField, spec: &EditSpec) -> Result<(LatentField, EditReport)> {
    semantic_edit_with(field, spec, &mut |_, _| ControlFlow::Continue(()))
}

pub fn semantic_edit_with(
    field: &LatentField,
    spec: &EditSpec,
    observer: &mut dyn FnMut(&IterationRecord, &LatentField) -> ControlFlow<()>,
) -> Result<(LatentField, EditReport)> {
    if spec.fixed.is_some() {
        return Err(Error::invalid("fixed", "semantic edits leave the rest of the boundary free"));
    }
    if !matches!(spec.mask, ParamMask::All | ParamMask::Latent) {
        return Err(Error::invalid("mask", "semantic edits act on the latent code"));
    }
    let spec = EditSpec { mask: ParamMask::Latent, ..spec.clone() };
    let (out, report) = edit_with(field, &spec, observer)?;
    // Guard against any drift in the frozen weights.
    let edited = field.with_latent(out.latent())?;
    Ok((edited, report))
}
