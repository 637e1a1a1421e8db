use crate::error::{Error, Result};
use crate::field::{ImplicitField, Request, GRAD_EPS};
use crate::math::{self, Vec3};

use super::SURFACE_TOL;

#[derive(Debug, Clone, Copy)]
pub struct ProjectOptions {
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        ProjectOptions { max_iters: 50, tolerance: SURFACE_TOL }
    }
}

/// Newton projection `x ← x − f ∇f/‖∇f‖²` onto the zero level set.
///
/// Once `|f| ≤ τ` up to two further steps are taken while they keep reducing
/// the residual, so returned points usually sit far below the tolerance.
pub fn project_to_surface<F: ImplicitField + ?Sized>(
    field: &F,
    x: Vec3,
    opts: ProjectOptions,
) -> Result<Vec3> {
    let mut x = x;
    for it in 0..opts.max_iters {
        let q = field.query(x, Request::GRAD)?;
        if q.value.abs() <= opts.tolerance {
            return Ok(polish(field, x, q.value.abs()));
        }
        let g = q.grad();
        let g2 = math::dot(g, g);
        if math::sqrt(g2) <= GRAD_EPS {
            return Err(Error::SingularGradient { norm: math::sqrt(g2) });
        }
        x = math::sub(x, math::scale(g, q.value / g2));
        if it + 1 == opts.max_iters {
            let r = field.value(x)?;
            if r.abs() <= opts.tolerance {
                return Ok(polish(field, x, r.abs()));
            }
            return Err(Error::ProjectionFailure { iterations: opts.max_iters, residual: r.abs() });
        }
    }
    Err(Error::ProjectionFailure { iterations: opts.max_iters, residual: f64::INFINITY })
}

fn polish<F: ImplicitField + ?Sized>(field: &F, mut x: Vec3, mut residual: f64) -> Vec3 {
    for _ in 0..2 {
        if residual == 0.0 {
            break;
        }
        let Ok(q) = field.query(x, Request::GRAD) else { break };
        let g = q.grad();
        let g2 = math::dot(g, g);
        if g2 <= GRAD_EPS * GRAD_EPS {
            break;
        }
        let y = math::sub(x, math::scale(g, q.value / g2));
        match field.value(y) {
            Ok(r) if r.abs() < residual => {
                x = y;
                residual = r.abs();
            }
            _ => break,
        }
    }
    x
}

/// Root of `t ↦ f(origin + t·dir)` nearest to `t = 0`, searched within
/// `|t| ≤ max_dist` by bracketing and bisection.
pub fn ray_root<F: ImplicitField + ?Sized>(
    field: &F,
    origin: Vec3,
    dir: Vec3,
    max_dist: f64,
) -> Result<f64> {
    let at = |t: f64| field.value(math::add(origin, math::scale(dir, t)));
    let f0 = at(0.0)?;
    if f0 == 0.0 {
        return Ok(0.0);
    }
    // step outward symmetrically until a sign change appears
    let mut step = max_dist / 1024.0;
    let mut bracket = None;
    let mut prev = (0.0, f0, 0.0, f0);
    while step <= max_dist * (1.0 + 1e-12) {
        let fp = at(step).ok();
        let fm = at(-step).ok();
        if let Some(fp) = fp {
            if fp.signum() != prev.1.signum() {
                bracket = Some((prev.0, prev.1, step));
                break;
            }
            prev.0 = step;
            prev.1 = fp;
        }
        if let Some(fm) = fm {
            if fm.signum() != prev.3.signum() {
                bracket = Some((prev.2, prev.3, -step));
                break;
            }
            prev.2 = -step;
            prev.3 = fm;
        }
        step *= 2.0;
    }
    let (mut a, mut fa, mut b) = bracket.ok_or(Error::ProjectionFailure {
        iterations: 0,
        residual: f0.abs(),
    })?;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let fm = at(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}
