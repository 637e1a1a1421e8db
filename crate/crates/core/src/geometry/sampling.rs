use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitBall};

use super::project::{project_to_surface, ProjectOptions};
use super::volume::grid_values;
use super::mesh::triangle_area;
use super::{marching_cubes, Mesh, Region, SurfaceSample};
use crate::error::{invalid, Error, Result};
use crate::field::{curvature_from_blocks, unit_normal, ImplicitField, Request};
use crate::math::{self, Vec3};

#[derive(Debug, Clone, Copy)]
pub struct SamplingOptions {
    pub seed: u64,
    /// Radius of the ball used to perturb already accepted points.
    pub perturb_radius: f64,
    /// Candidate pool size as a multiple of the requested count.
    pub pool_factor: usize,
    pub trial_budget: usize,
    pub project: ProjectOptions,
    pub curvature: bool,
    /// Resolution of the sign-change pre-scan.
    pub scan_resolution: usize,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions {
            seed: 0,
            perturb_radius: 0.05,
            pool_factor: 4,
            trial_budget: 1_000_000,
            project: ProjectOptions::default(),
            curvature: false,
            scan_resolution: 24,
        }
    }
}

/// Coarse grid test for a nonempty zero level set.
pub fn has_zero_crossing<F: ImplicitField + ?Sized>(field: &F, resolution: usize) -> Result<bool> {
    Ok(grid_values(field, resolution)?.has_sign_change())
}

pub fn sample_surface<F: ImplicitField + ?Sized>(
    field: &F,
    count: usize,
    region: Option<&Region>,
    seed: u64,
) -> Result<Vec<SurfaceSample>> {
    sample_surface_with(field, count, region, &SamplingOptions { seed, ..Default::default() })
}

/// Rejection sampling of projected points followed by farthest-point
/// selection from the accepted pool.
///
/// Candidates are drawn uniformly in the domain or, half of the time, in a
/// small ball around a previously accepted point, then projected onto the
/// zero set and kept if they satisfy `region`.
pub fn sample_surface_with<F: ImplicitField + ?Sized>(
    field: &F,
    count: usize,
    region: Option<&Region>,
    opts: &SamplingOptions,
) -> Result<Vec<SurfaceSample>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if !has_zero_crossing(field, opts.scan_resolution)? {
        return Err(Error::EmptyZeroSet);
    }
    let domain = *field.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let target = count * opts.pool_factor.max(1);
    let mut pool: Vec<Vec3> = Vec::with_capacity(target);
    let mut trials = 0usize;
    while pool.len() < target {
        if trials >= opts.trial_budget {
            if pool.len() >= count {
                break;
            }
            return Err(Error::RegionUnreachable { requested: count, found: pool.len(), trials });
        }
        trials += 1;
        let x = if !pool.is_empty() && rng.random_bool(0.5) {
            let base = pool[rng.random_range(0..pool.len())];
            let d: [f64; 3] = UnitBall.sample(&mut rng);
            clamp(&domain, math::add(base, math::scale(d, opts.perturb_radius)))
        } else {
            domain.lerp([rng.random(), rng.random(), rng.random()])
        };
        let Ok(p) = project_to_surface(field, x, opts.project) else { continue };
        if domain.contains(p) && region.is_none_or(|r| r.contains(p)) {
            pool.push(p);
        }
    }

    farthest_points(&pool, count)
        .into_iter()
        .map(|i| surface_sample(field, pool[i], opts.curvature))
        .collect()
}

fn clamp(domain: &crate::field::Domain, x: Vec3) -> Vec3 {
    core::array::from_fn(|i| x[i].clamp(domain.lower[i], domain.upper[i]))
}

/// Indices of `count` greedily spread points, starting from the first.
fn farthest_points(pool: &[Vec3], count: usize) -> Vec<usize> {
    let mut chosen = Vec::with_capacity(count);
    let mut d2 = alloc::vec![f64::INFINITY; pool.len()];
    let mut next = 0;
    for _ in 0..count.min(pool.len()) {
        chosen.push(next);
        let p = pool[next];
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, q) in pool.iter().enumerate() {
            let s = math::sub(*q, p);
            d2[i] = d2[i].min(math::dot(s, s));
            if d2[i] > best.0 {
                best = (d2[i], i);
            }
        }
        next = best.1;
    }
    chosen
}

pub(crate) fn surface_sample<F: ImplicitField + ?Sized>(
    field: &F,
    p: Vec3,
    curvature: bool,
) -> Result<SurfaceSample> {
    let req = if curvature { Request::CURVATURE } else { Request::GRAD };
    let q = field.query(p, req)?;
    let g = q.grad();
    Ok(SurfaceSample {
        position: p,
        normal: unit_normal(g)?,
        curvature: if curvature { Some(curvature_from_blocks(g, q.hessian())?) } else { None },
        area_weight: None,
    })
}

/// Sample record (normal, no curvature) for a point already on the surface.
pub fn sampling_point<F: ImplicitField + ?Sized>(field: &F, p: Vec3) -> Result<SurfaceSample> {
    surface_sample(field, p, false)
}

/// Uniform Monte Carlo quadrature weights `total_area / I`.
pub fn area_weights(samples: &mut [SurfaceSample], total_area: f64) -> Result<()> {
    if samples.len() < 4 {
        return Err(invalid("samples", "at least 4 samples are required"));
    }
    if !(total_area.is_finite() && total_area >= 0.0) {
        return Err(invalid("total_area", "must be finite and non-negative"));
    }
    let w = total_area / samples.len() as f64;
    for s in samples {
        s.area_weight = Some(w);
    }
    Ok(())
}

/// Weights from the area of the mesh triangles whose centroid lies closest
/// to each sample. Sums to the mesh area and follows the local sample
/// density, unlike the uniform weights.
pub fn nearest_area_weights(samples: &mut [SurfaceSample], mesh: &Mesh) -> Result<()> {
    if samples.len() < 4 {
        return Err(invalid("samples", "at least 4 samples are required"));
    }
    let mut w = alloc::vec![0.0; samples.len()];
    for t in 0..mesh.triangles.len() {
        let tri = mesh.triangle(t);
        let c = math::scale(math::add(math::add(tri[0], tri[1]), tri[2]), 1.0 / 3.0);
        let mut best = (f64::INFINITY, 0);
        for (i, s) in samples.iter().enumerate() {
            let d = math::sub(s.position, c);
            let d2 = math::dot(d, d);
            if d2 < best.0 {
                best = (d2, i);
            }
        }
        w[best.1] += triangle_area(tri);
    }
    for (s, w) in samples.iter_mut().zip(w) {
        s.area_weight = Some(w);
    }
    Ok(())
}

/// [`area_weights`] with the total taken from an extracted mesh.
pub fn assign_area_weights<F: ImplicitField + ?Sized>(
    field: &F,
    samples: &mut [SurfaceSample],
    resolution: usize,
) -> Result<f64> {
    let area = marching_cubes(field, resolution)?.area();
    area_weights(samples, area)?;
    Ok(area)
}
