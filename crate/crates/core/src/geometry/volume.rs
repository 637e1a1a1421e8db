use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::field::{Domain, ImplicitField};
use crate::math::Vec3;

/// Field values sampled on the `(res+1)³` vertices of a regular grid.
#[derive(Debug, Clone)]
pub struct Grid {
    pub domain: Domain,
    pub res: usize,
    pub values: Vec<f64>,
}

impl Grid {
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let n = self.res + 1;
        i + n * (j + n * k)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let r = self.res as f64;
        self.domain.lerp([i as f64 / r, j as f64 / r, k as f64 / r])
    }

    pub fn cell_volume(&self) -> f64 {
        self.domain.volume() / (self.res * self.res * self.res) as f64
    }

    /// The eight corner values of cell `(i, j, k)`, corner `c` at offset
    /// `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
    pub fn corners(&self, i: usize, j: usize, k: usize) -> [f64; 8] {
        core::array::from_fn(|c| self.at(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)))
    }

    pub fn has_sign_change(&self) -> bool {
        let neg = self.values.iter().any(|&v| v <= 0.0);
        let pos = self.values.iter().any(|&v| v > 0.0);
        neg && pos
    }
}

/// Evaluates `field` on the grid vertices, one z-slab at a time.
pub fn grid_values<F: ImplicitField + ?Sized>(field: &F, res: usize) -> Result<Grid> {
    if res == 0 {
        return Err(invalid("resolution", "must be positive"));
    }
    let domain = *field.domain();
    let n = res + 1;
    let mut grid = Grid { domain, res, values: Vec::with_capacity(n * n * n) };
    let mut slab = Vec::with_capacity(n * n);
    let mut out = alloc::vec![0.0; n * n];
    for k in 0..n {
        slab.clear();
        for j in 0..n {
            for i in 0..n {
                slab.push(grid.point(i, j, k));
            }
        }
        field.values_unchecked(&slab, &mut out);
        grid.values.extend_from_slice(&out);
    }
    if !crate::math::all_finite(&grid.values) {
        return Err(crate::Error::NumericFailure("non-finite field value on grid".into()));
    }
    Ok(grid)
}

const SUBDIV: usize = 8;

/// Volume of `{f ≤ 0}`: whole cells are counted by corner sign, cells with a
/// sign change are refined into `8³` sub-cells using trilinear interpolation.
pub fn estimate_volume<F: ImplicitField + ?Sized>(field: &F, res: usize) -> Result<f64> {
    if res < 32 {
        return Err(invalid("resolution", "must be at least 32"));
    }
    Ok(volume_of_grid(&grid_values(field, res)?))
}

pub(crate) fn volume_of_grid(grid: &Grid) -> f64 {
    let r = grid.res;
    let mut full = 0usize;
    let mut partial = 0.0;
    for k in 0..r {
        for j in 0..r {
            for i in 0..r {
                let c = grid.corners(i, j, k);
                let inside = c.iter().filter(|&&v| v <= 0.0).count();
                match inside {
                    8 => full += 1,
                    0 => {}
                    _ => partial += sub_cell_fraction(&c),
                }
            }
        }
    }
    let total = (r * r * r) as f64;
    grid.domain.volume() * ((full as f64 + partial) / total)
}

fn sub_cell_fraction(c: &[f64; 8]) -> f64 {
    let m = SUBDIV;
    let mut hits = 0usize;
    for sz in 0..m {
        let z = (sz as f64 + 0.5) / m as f64;
        for sy in 0..m {
            let y = (sy as f64 + 0.5) / m as f64;
            // bilinear in (x) at this (y, z): lerp the four x-edges
            let e = |c0: f64, c1: f64, c2: f64, c3: f64| {
                let a = c0 + (c1 - c0) * y;
                let b = c2 + (c3 - c2) * y;
                a + (b - a) * z
            };
            let v0 = e(c[0], c[2], c[4], c[6]);
            let v1 = e(c[1], c[3], c[5], c[7]);
            for sx in 0..m {
                let x = (sx as f64 + 0.5) / m as f64;
                if v0 + (v1 - v0) * x <= 0.0 {
                    hits += 1;
                }
            }
        }
    }
    hits as f64 / (m * m * m) as f64
}
