use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::math::{self, Vec3};

/// Named per-vertex scalar data, e.g. a basis function for visualization.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalarChannel {
    pub name: String,
    pub values: Vec<f64>,
}

/// Indexed triangle mesh, outward oriented when produced by extraction.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub channels: Vec<ScalarChannel>,
}

impl Mesh {
    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| triangle_area(self.triangle(t))).sum()
    }

    /// Signed enclosed volume by the divergence theorem.
    pub fn enclosed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                math::dot(a, math::cross(b, c)) / 6.0
            })
            .sum()
    }

    /// `V − E + F` over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut verts = BTreeSet::new();
        let mut edges = BTreeSet::new();
        for t in &self.triangles {
            for i in 0..3 {
                let (a, b) = (t[i], t[(i + 1) % 3]);
                verts.insert(a);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        verts.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }

    /// Every undirected edge is shared by exactly two triangles, traversed
    /// in opposite directions.
    pub fn is_closed_manifold(&self) -> bool {
        let mut directed = BTreeSet::new();
        for t in &self.triangles {
            for i in 0..3 {
                if !directed.insert((t[i], t[(i + 1) % 3])) {
                    return false;
                }
            }
        }
        directed.iter().all(|&(a, b)| directed.contains(&(b, a)))
    }

    /// Per-vertex unit normals from area-weighted face normals.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut n = alloc::vec![[0.0; 3]; self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = self.triangle(t);
            let fnrm = math::cross(math::sub(b, a), math::sub(c, a));
            for &v in tri {
                n[v as usize] = math::add(n[v as usize], fnrm);
            }
        }
        n.into_iter()
            .map(|v| {
                let l = math::norm(v);
                if l > 0.0 { math::scale(v, 1.0 / l) } else { v }
            })
            .collect()
    }

    pub fn add_channel(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.vertices.len() {
            return Err(invalid("channel", "length must equal the vertex count"));
        }
        self.channels.push(ScalarChannel { name: name.into(), values });
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        if self.triangles.iter().flatten().any(|&i| i >= n) {
            return Err(invalid("triangles", "vertex index out of range"));
        }
        if self.channels.iter().any(|c| c.values.len() != self.vertices.len()) {
            return Err(invalid("channels", "length must equal the vertex count"));
        }
        Ok(())
    }
}

pub fn triangle_area([a, b, c]: [Vec3; 3]) -> f64 {
    0.5 * math::norm(math::cross(math::sub(b, a), math::sub(c, a)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> Mesh {
        Mesh {
            vertices: alloc::vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            triangles: alloc::vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
            channels: Vec::new(),
        }
    }

    #[test]
    fn tetrahedron_integrals() {
        let m = tetra();
        assert!((m.enclosed_volume() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.euler_characteristic(), 2);
        assert!(m.is_closed_manifold());
        let area = 1.5 + 0.5 * libm::sqrt(3.0);
        assert!((m.area() - area).abs() < 1e-14);
    }

    #[test]
    fn validation() {
        let mut m = tetra();
        assert!(m.add_channel("b", alloc::vec![0.0; 3]).is_err());
        m.add_channel("b", alloc::vec![0.0; 4]).unwrap();
        m.validate().unwrap();
        m.triangles.push([0, 1, 9]);
        assert!(m.validate().is_err());
    }
}
