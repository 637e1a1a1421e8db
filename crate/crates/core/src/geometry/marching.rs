//! Iso-surface extraction by splitting every grid cell into six tetrahedra
//! sharing the main diagonal. The split is consistent between neighbouring
//! cells, so the output is watertight without case tables.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::mesh::triangle_area;
use super::volume::{grid_values, Grid};
use super::Mesh;
use crate::error::{invalid, Error, Result};
use crate::field::ImplicitField;
use crate::math::{self, Vec3};

const TETS: [[usize; 4]; 6] =
    [[0, 1, 3, 7], [0, 1, 5, 7], [0, 2, 3, 7], [0, 2, 6, 7], [0, 4, 5, 7], [0, 4, 6, 7]];

/// Triangles below this area are dropped.
const MIN_AREA: f64 = 1e-14;

pub fn marching_cubes<F: ImplicitField + ?Sized>(field: &F, resolution: usize) -> Result<Mesh> {
    if resolution < 8 {
        return Err(invalid("resolution", "must be at least 8"));
    }
    let grid = grid_values(field, resolution)?;
    if !grid.has_sign_change() {
        return Err(Error::EmptyZeroSet);
    }
    Ok(extract(&grid))
}

struct Builder<'a> {
    grid: &'a Grid,
    mesh: Mesh,
    // (a, b) with a < b for an edge crossing, (a, a) for a vertex on the surface
    keys: BTreeMap<(usize, usize), u32>,
}

impl Builder<'_> {
    fn vertex(&mut self, a: (usize, [usize; 3]), b: (usize, [usize; 3])) -> u32 {
        let (va, vb) = (self.grid.values[a.0], self.grid.values[b.0]);
        // a is inside (≤ 0), b strictly outside, so t ∈ [0, 1)
        let t = va / (va - vb);
        let key = if t <= 0.0 { (a.0, a.0) } else { (a.0.min(b.0), a.0.max(b.0)) };
        let grid = self.grid;
        let mesh = &mut self.mesh;
        *self.keys.entry(key).or_insert_with(|| {
            let pa = grid.point(a.1[0], a.1[1], a.1[2]);
            let pb = grid.point(b.1[0], b.1[1], b.1[2]);
            let p = if t <= 0.0 { pa } else { math::add(pa, math::scale(math::sub(pb, pa), t)) };
            mesh.vertices.push(p);
            (mesh.vertices.len() - 1) as u32
        })
    }

    fn emit(&mut self, tri: [u32; 3], outward: Vec3) {
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            return;
        }
        let p = tri.map(|i| self.mesh.vertices[i as usize]);
        if triangle_area(p) <= MIN_AREA {
            return;
        }
        let n = math::cross(math::sub(p[1], p[0]), math::sub(p[2], p[0]));
        let tri = if math::dot(n, outward) < 0.0 { [tri[0], tri[2], tri[1]] } else { tri };
        self.mesh.triangles.push(tri);
    }
}

fn extract(grid: &Grid) -> Mesh {
    let mut b = Builder { grid, mesh: Mesh::default(), keys: BTreeMap::new() };
    let r = grid.res;
    for k in 0..r {
        for j in 0..r {
            for i in 0..r {
                let corners: [(usize, [usize; 3]); 8] = core::array::from_fn(|c| {
                    let ijk = [i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)];
                    (grid.index(ijk[0], ijk[1], ijk[2]), ijk)
                });
                let inside = corners.map(|c| grid.values[c.0] <= 0.0);
                if inside.iter().all(|&s| s) || inside.iter().all(|&s| !s) {
                    continue;
                }
                for tet in TETS {
                    tetrahedron(&mut b, tet.map(|c| corners[c]), tet.map(|c| inside[c]));
                }
            }
        }
    }
    b.mesh
}

fn tetrahedron(b: &mut Builder, v: [(usize, [usize; 3]); 4], inside: [bool; 4]) {
    let ins: Vec<usize> = (0..4).filter(|&i| inside[i]).collect();
    let outs: Vec<usize> = (0..4).filter(|&i| !inside[i]).collect();
    if ins.is_empty() || outs.is_empty() {
        return;
    }
    let centroid = |ids: &[usize]| {
        let mut c = [0.0; 3];
        for &i in ids {
            c = math::add(c, b.grid.point(v[i].1[0], v[i].1[1], v[i].1[2]));
        }
        math::scale(c, 1.0 / ids.len() as f64)
    };
    let outward = math::sub(centroid(&outs), centroid(&ins));
    match ins.len() {
        1 => {
            let a = v[ins[0]];
            let tri = [b.vertex(a, v[outs[0]]), b.vertex(a, v[outs[1]]), b.vertex(a, v[outs[2]])];
            b.emit(tri, outward);
        }
        3 => {
            let o = v[outs[0]];
            let tri = [b.vertex(v[ins[0]], o), b.vertex(v[ins[1]], o), b.vertex(v[ins[2]], o)];
            b.emit(tri, outward);
        }
        _ => {
            let (p, q) = (v[ins[0]], v[ins[1]]);
            let (c, d) = (v[outs[0]], v[outs[1]]);
            let (pc, pd, qd, qc) = (b.vertex(p, c), b.vertex(p, d), b.vertex(q, d), b.vertex(q, c));
            b.emit([pc, pd, qd], outward);
            b.emit([pc, qd, qc], outward);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::AnalyticField;
    use core::f64::consts::PI;

    #[test]
    fn sphere_area_and_volume() {
        let m = marching_cubes(&AnalyticField::sphere(1.0), 64).unwrap();
        m.validate().unwrap();
        assert!((m.area() - 4.0 * PI).abs() / (4.0 * PI) < 0.02);
        let v = 4.0 * PI / 3.0;
        assert!((m.enclosed_volume() - v).abs() / v < 0.02);
        assert!(m.is_closed_manifold());
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn torus_has_genus_one() {
        let m = marching_cubes(&AnalyticField::torus(1.0, 0.35), 48).unwrap();
        assert!(m.is_closed_manifold());
        assert_eq!(m.euler_characteristic(), 0);
    }

    #[test]
    fn no_sign_change() {
        let e = marching_cubes(&AnalyticField::sphere(-1.0), 16).unwrap_err();
        assert_eq!(e, Error::EmptyZeroSet);
        assert!(marching_cubes(&AnalyticField::sphere(1.0), 4).is_err());
    }

    #[test]
    fn vertices_lie_on_surface_up_to_interpolation_error() {
        let m = marching_cubes(&AnalyticField::sphere(1.0), 32).unwrap();
        let h: f64 = 4.0 / 32.0;
        for p in &m.vertices {
            assert!((math::norm(*p) - 1.0).abs() < h * h);
        }
    }
}
