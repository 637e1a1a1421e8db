//! Fitting quality against analytic oracles.

use isoedit_core::geometry::{marching_cubes, sample_surface};
use isoedit_core::math;
use isoedit_core::training::{fit_sdf, train_auto_decoder, AnalyticTarget, FamilyKind, FitConfig, MeshTarget, ShapeFamily, TrainConfig};
use isoedit_core::editing::{Displacement, EditMode, EditSpec, Target};
use isoedit_core::geometry::Region;
use isoedit_core::training::semantic_edit;
use isoedit_core::{AnalyticField, Domain, ImplicitField, Request};

/// Mean |f| and the largest normal angle (degrees) at exact surface points.
fn against_oracle<F: ImplicitField>(fitted: &F, oracle: &AnalyticField, n: usize) -> (f64, f64, f64) {
    let pts = sample_surface(oracle, n, None, 99).unwrap();
    let (mut res, mut mean, mut worst) = (0.0, 0.0, 0.0f64);
    for s in &pts {
        let q = fitted.query(s.position, Request::GRAD).unwrap();
        res += q.value.abs();
        let g = q.grad();
        let c = (math::dot(g, s.normal) / math::norm(g)).clamp(-1.0, 1.0);
        let deg = c.acos().to_degrees();
        mean += deg;
        worst = worst.max(deg);
    }
    (res / n as f64, mean / n as f64, worst)
}

#[test]
fn sphere_fit_meets_thresholds() {
    let oracle = AnalyticField::sphere(1.0);
    let out = fit_sdf(&AnalyticTarget(oracle.clone()), &FitConfig::default()).unwrap();
    assert!(out.report.holdout_residual < 1e-3, "{:?}", out.report.holdout_residual);
    let (res, mean, worst) = against_oracle(&out.field, &oracle, 1000);
    assert!(res < 1e-3, "residual {res}");
    assert!(mean < 1.0, "mean normal error {mean}");
    assert!(worst < 0.5, "max normal error {worst}");
}

#[test]
fn torus_fit_meets_thresholds() {
    let oracle = AnalyticField::torus(0.6, 0.25);
    let out = fit_sdf(&AnalyticTarget(oracle.clone()), &FitConfig::default()).unwrap();
    let (res, mean, _) = against_oracle(&out.field, &oracle, 1000);
    assert!(res < 1e-3, "residual {res}");
    assert!(mean < 1.0, "mean normal error {mean}");
}

#[test]
fn mesh_target_fit_recovers_the_shape() {
    let oracle = AnalyticField::sphere(0.9);
    let target = MeshTarget::new(marching_cubes(&oracle, 32).unwrap(), Domain::default()).unwrap();
    let cfg = FitConfig { iterations: 3000, pool_size: 4000, holdout: 300, ..Default::default() };
    let out = fit_sdf(&target, &cfg).unwrap();
    // The mesh itself deviates from the sphere by its chord error, about 1e-3.
    let (res, mean, _) = against_oracle(&out.field, &oracle, 300);
    assert!(res < 1e-2, "residual {res}");
    assert!(mean < 5.0, "normal error {mean}");
}

/// Spearman rank correlation.
fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = k as f64;
        }
        r
    };
    let (ra, rb) = (rank(a), rank(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

fn sphere_decoder() -> (ShapeFamily, isoedit_core::training::AutoDecoder) {
    let fam = ShapeFamily::spheres(12, 0.4, 1.0);
    let cfg = TrainConfig {
        hidden: vec![32, 32],
        iterations: 3000,
        shapes_per_batch: 4,
        pool_size: 2000,
        holdout: 100,
        ..Default::default()
    };
    let ad = train_auto_decoder(&fam, 1, &cfg).unwrap();
    (fam, ad)
}

/// First sign change of `f` along +x, located by bisection.
fn radius_along_x<F: ImplicitField>(f: &F) -> Option<f64> {
    let at = |r: f64| f.value([r, 0.0, 0.0]).unwrap();
    let steps = 140;
    let mut lo = 0.0;
    for i in 1..=steps {
        let hi = 1.4 * i as f64 / steps as f64;
        if at(lo) < 0.0 && at(hi) >= 0.0 {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..50 {
                let m = 0.5 * (a + b);
                if at(m) < 0.0 { a = m } else { b = m }
            }
            return Some(0.5 * (a + b));
        }
        lo = hi;
    }
    None
}

#[test]
fn one_dimensional_latent_orders_sphere_radii() {
    let (fam, ad) = sphere_decoder();
    let radii: Vec<f64> = fam.members.iter().map(|m| m[0]).collect();
    let codes: Vec<f64> = ad.latents.iter().map(|l| l[0]).collect();
    let rho = spearman(&radii, &codes);
    assert!(rho.abs() > 0.95, "rank correlation {rho}, codes {codes:?}");
}

#[test]
fn latent_interpolation_keeps_a_surface() {
    let (fam, ad) = sphere_decoder();
    let last = fam.len() - 1;
    let mut prev = 0.0;
    for i in 0..5 {
        let t = i as f64 / 4.0;
        let r = radius_along_x(&ad.interpolate(0, last, t).unwrap())
            .unwrap_or_else(|| panic!("no surface at t = {t}"));
        assert!((0.3..=1.1).contains(&r), "radius {r} at t = {t}");
        assert!(r > prev, "radius {r} at t = {t} after {prev}");
        prev = r;
    }
}

/// Smallest and largest vertex `x` of the extracted surface.
fn x_extent<F: ImplicitField>(f: &F) -> (f64, f64) {
    let mesh = marching_cubes(f, 64).unwrap();
    mesh.vertices.iter().fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v[0]), hi.max(v[0])))
}

#[test]
fn pushing_one_face_moves_its_mirror_image() {
    let widths = (0..8).map(|i| vec![0.35 + 0.06 * i as f64, 0.5, 0.5]).collect();
    let fam = ShapeFamily::new(FamilyKind::RoundedBoxes { rounding: 0.25 }, widths).unwrap();
    let cfg = TrainConfig {
        hidden: vec![64, 64],
        iterations: 14_000,
        shapes_per_batch: 4,
        pool_size: 2000,
        holdout: 100,
        ..Default::default()
    };
    let ad = train_auto_decoder(&fam, 2, &cfg).unwrap();
    let k = (0..fam.len()).max_by(|&a, &b| fam.members[a][0].total_cmp(&fam.members[b][0])).unwrap();
    let hx = fam.members[k][0];
    let start = ad.field(k).unwrap();
    let face = Region::HalfSpace { normal: [1.0, 0.0, 0.0], offset: hx - 0.02 };
    let spec = EditSpec {
        mode: EditMode::converge(0.1, 15),
        target_samples: 100,
        lambda: 30.0,
        alignment_filter: None,
        ..EditSpec::new(vec![Target::region(face, Displacement::Vector { value: [-0.08, 0.0, 0.0] })])
    };
    let (out, rep) = semantic_edit(&start, &spec).unwrap();
    let dev: Vec<f64> = rep.iterations.iter().map(|r| r.target_deviation).collect();
    assert!(rep.iterations.len() <= 15);
    assert!(rep.final_deviation() < rep.initial_deviation, "deviations {dev:?}");

    let (lo0, hi0) = x_extent(&start);
    let (lo1, hi1) = x_extent(&out);
    assert!(hi1 < hi0 - 0.05, "pushed face {hi0} -> {hi1}");
    // the family only has symmetric widths, so the far face follows inward
    assert!(lo1 > lo0 + 0.04, "opposite face {lo0} -> {lo1}");
}
