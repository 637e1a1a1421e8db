use std::f64::consts::PI;

use isoedit_core::geometry::{marching_cubes, nearest_area_weights, sample_surface, sample_surface_with, SamplingOptions};
use isoedit_core::sensitivity::{area_constraint_basis, assemble_system, measured_normal_motion, volume_constraint_basis};
use isoedit_core::{AnalyticField, ImplicitField, ParamMask, ParamVector};

#[test]
fn ellipsoid_volume_basis_matches_closed_form() {
    let (a, b, c) = (0.9, 0.7, 0.5);
    let e = AnalyticField::ellipsoid(a, b, c);
    let mut pts = sample_surface(&e, 3000, None, 4).unwrap();
    nearest_area_weights(&mut pts, &marching_cubes(&e, 96).unwrap()).unwrap();
    let v = volume_constraint_basis(&e, &pts, &ParamMask::All).unwrap().vector;
    // d/d(a,b,c) of 4π/3·abc
    let want = [b * c, a * c, a * b].map(|x| 4.0 * PI / 3.0 * x);
    for (got, want) in v.iter().zip(want) {
        assert!((got - want).abs() < 0.02 * want, "{got} vs {want}");
    }
}

#[test]
fn sphere_area_basis_matches_closed_form() {
    let r = 0.8;
    let s = AnalyticField::sphere(r);
    let opts = SamplingOptions { curvature: true, seed: 2, ..Default::default() };
    let mut pts = sample_surface_with(&s, 2000, None, &opts).unwrap();
    nearest_area_weights(&mut pts, &marching_cubes(&s, 64).unwrap()).unwrap();
    let g = area_constraint_basis(&s, &pts, &ParamMask::All).unwrap().vector[0];
    assert!((g - 8.0 * PI * r).abs() < 0.02 * 8.0 * PI * r, "{g}");
}

#[test]
fn basis_predicts_boundary_motion_to_second_order() {
    // a sphere grows exactly along its normals
    let s = AnalyticField::sphere(0.7);
    let pts = sample_surface(&s, 50, None, 7).unwrap();
    let basis = assemble_system(&s, &pts, &ParamMask::All).unwrap();
    let grown = s.with_params(ParamVector::new(vec![0.85])).unwrap();
    let m = measured_normal_motion(&s, &grown, &pts, 0.3).unwrap();
    let pred = basis.matrix.mul_vec(&[0.15]).unwrap();
    assert!(m.iter().zip(&pred).all(|(a, b)| (a - b).abs() < 1e-8));

    let e = AnalyticField::ellipsoid(0.9, 0.6, 0.5);
    let pts = sample_surface(&e, 100, None, 8).unwrap();
    let basis = assemble_system(&e, &pts, &ParamMask::All).unwrap();
    let dir = [0.02, 0.03, -0.01];
    let err = |s: f64| {
        let delta = dir.map(|d| s * d);
        let p: Vec<f64> = e.params().iter().zip(delta).map(|(a, b)| a + b).collect();
        let moved = e.with_params(ParamVector::new(p)).unwrap();
        let m = measured_normal_motion(&e, &moved, &pts, 0.3).unwrap();
        let pred = basis.matrix.mul_vec(&delta).unwrap();
        m.iter().zip(&pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    };
    let ratio = err(1.0) / err(0.5);
    assert!((3.0..=5.0).contains(&ratio), "{ratio}");
}
