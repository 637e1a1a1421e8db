use alloc::vec::Vec;

use rand::Rng;

use super::SdfTarget;
use crate::error::{Error, Result};
use crate::field::Domain;
use crate::geometry::Mesh;
use crate::math::{self, Vec3};

/// Signed distance to a closed triangle mesh: closest-point distance with
/// the sign of the generalized winding number (inside where it exceeds ½).
#[derive(Debug, Clone)]
pub struct MeshTarget {
    mesh: Mesh,
    domain: Domain,
    areas: Vec<f64>,
    total_area: f64,
}

impl MeshTarget {
    pub fn new(mesh: Mesh, domain: Domain) -> Result<Self> {
        mesh.validate()?;
        let areas: Vec<f64> = (0..mesh.triangles.len())
            .map(|t| crate::geometry::triangle_area(mesh.triangle(t)))
            .collect();
        let total_area = areas.iter().sum();
        Ok(MeshTarget { mesh, domain, areas, total_area })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn winding_number(&self, x: Vec3) -> f64 {
        let mut omega = 0.0;
        for t in 0..self.mesh.triangles.len() {
            let [a, b, c] = self.mesh.triangle(t);
            let (a, b, c) = (math::sub(a, x), math::sub(b, x), math::sub(c, x));
            let (la, lb, lc) = (math::norm(a), math::norm(b), math::norm(c));
            let num = math::dot(a, math::cross(b, c));
            let den = la * lb * lc + math::dot(a, b) * lc + math::dot(b, c) * la + math::dot(c, a) * lb;
            omega += 2.0 * libm::atan2(num, den);
        }
        omega / (4.0 * core::f64::consts::PI)
    }

    pub fn unsigned_distance(&self, x: Vec3) -> f64 {
        (0..self.mesh.triangles.len())
            .map(|t| math::dist(x, closest_point(self.mesh.triangle(t), x)))
            .fold(f64::INFINITY, f64::min)
    }
}

impl SdfTarget for MeshTarget {
    fn domain(&self) -> Domain {
        self.domain
    }

    fn signed_distance(&self, x: Vec3) -> f64 {
        let d = self.unsigned_distance(x);
        if self.winding_number(x) > 0.5 { -d } else { d }
    }

    fn surface_points(&self, count: usize, rng: &mut dyn rand::RngCore) -> Result<Vec<(Vec3, Vec3)>> {
        if !(self.total_area > 0.0) {
            return Err(Error::EmptyZeroSet);
        }
        let mut cdf = Vec::with_capacity(self.areas.len());
        let mut acc = 0.0;
        for a in &self.areas {
            acc += a;
            cdf.push(acc);
        }
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let r = rng.random::<f64>() * acc;
            let t = cdf.partition_point(|&c| c < r).min(cdf.len() - 1);
            let [a, b, c] = self.mesh.triangle(t);
            let n = math::cross(math::sub(b, a), math::sub(c, a));
            let l = math::norm(n);
            if l == 0.0 {
                continue;
            }
            let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            let p = math::add(a, math::add(math::scale(math::sub(b, a), u), math::scale(math::sub(c, a), v)));
            out.push((p, math::scale(n, 1.0 / l)));
        }
        Ok(out)
    }
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
fn closest_point([a, b, c]: [Vec3; 3], p: Vec3) -> Vec3 {
    let ab = math::sub(b, a);
    let ac = math::sub(c, a);
    let ap = math::sub(p, a);
    let d1 = math::dot(ab, ap);
    let d2 = math::dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = math::sub(p, b);
    let d3 = math::dot(ab, bp);
    let d4 = math::dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return math::add(a, math::scale(ab, d1 / (d1 - d3)));
    }
    let cp = math::sub(p, c);
    let d5 = math::dot(ab, cp);
    let d6 = math::dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return math::add(a, math::scale(ac, d2 / (d2 - d6)));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return math::add(b, math::scale(math::sub(c, b), w));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    math::add(a, math::add(math::scale(ab, v), math::scale(ac, w)))
}
