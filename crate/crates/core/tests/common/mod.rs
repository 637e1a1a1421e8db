//! Finite-difference oracles shared by the integration tests. They only use
//! field values (or lower-order blocks) so they stay independent of the
//! analytic derivative paths they check.
#![allow(dead_code)]

use isoedit_core::{ImplicitField, ParamVector, Request, Vec3};

pub fn rel_err(exact: &[f64], approx: &[f64]) -> f64 {
    let num: f64 = exact.iter().zip(approx).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den: f64 = exact.iter().map(|a| a * a).sum::<f64>().sqrt();
    num / den.max(1e-6)
}

fn shifted(x: Vec3, d: usize, h: f64) -> Vec3 {
    let mut y = x;
    y[d] += h;
    y
}

pub fn fd_grad_x<F: ImplicitField>(f: &F, x: Vec3, h: f64) -> Vec<f64> {
    (0..3)
        .map(|d| (f.value(shifted(x, d, h)).unwrap() - f.value(shifted(x, d, -h)).unwrap()) / (2.0 * h))
        .collect()
}

pub fn fd_hessian<F: ImplicitField>(f: &F, x: Vec3, h: f64) -> Vec<f64> {
    let mut out = vec![0.0; 9];
    for d in 0..3 {
        let gp = f.query(shifted(x, d, h), Request::GRAD).unwrap().grad();
        let gm = f.query(shifted(x, d, -h), Request::GRAD).unwrap().grad();
        for a in 0..3 {
            out[a * 3 + d] = (gp[a] - gm[a]) / (2.0 * h);
        }
    }
    out
}

pub fn perturbed<F: ImplicitField>(f: &F, p: usize, h: f64) -> F {
    let mut v = f.params().to_vec();
    v[p] += h;
    f.with_params(ParamVector::new(v)).unwrap()
}

pub fn fd_grad_theta<F: ImplicitField>(f: &F, x: Vec3, h: f64) -> Vec<f64> {
    (0..f.param_count())
        .map(|p| (perturbed(f, p, h).value(x).unwrap() - perturbed(f, p, -h).value(x).unwrap()) / (2.0 * h))
        .collect()
}

/// `∂(∇_x f)/∂Θ_p` by differencing the spatial gradient in parameter space.
pub fn fd_mixed_via_theta<F: ImplicitField>(f: &F, x: Vec3, params: &[usize], h: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for &p in params {
        let gp = perturbed(f, p, h).query(x, Request::GRAD).unwrap().grad();
        let gm = perturbed(f, p, -h).query(x, Request::GRAD).unwrap().grad();
        for d in 0..3 {
            out.push((gp[d] - gm[d]) / (2.0 * h));
        }
    }
    out
}

/// `∂(∇_Θ f)/∂x_d` with Richardson extrapolation (fourth order).
pub fn richardson_mixed_via_x<F: ImplicitField>(f: &F, x: Vec3, h: f64) -> Vec<Vec3> {
    let p = f.param_count();
    let central = |step: f64, d: usize| -> Vec<f64> {
        let gp = f.query(shifted(x, d, step), Request::BASIS).unwrap().grad_theta.unwrap();
        let gm = f.query(shifted(x, d, -step), Request::BASIS).unwrap().grad_theta.unwrap();
        gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * step)).collect()
    };
    let mut out = vec![[0.0; 3]; p];
    for d in 0..3 {
        let coarse = central(h, d);
        let fine = central(h / 2.0, d);
        for i in 0..p {
            out[i][d] = (4.0 * fine[i] - coarse[i]) / 3.0;
        }
    }
    out
}
