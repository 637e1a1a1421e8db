//! Dense sine MLP with hand-written forward and backward passes.
//!
//! Parameter layout (stable): for each layer in order, the weight matrix
//! row-major `(out × in)` followed by the bias vector `(out)`.
//!
//! Hidden layers compute `a = sin(z)`; the first layer uses
//! `z = ω₀ (W u + b)`, later ones `z = W a + b`. The output layer is linear.
//! The forward pass carries tangents for the first three inputs (the spatial
//! coordinates) up to second order, which gives `∇_x` and `∇²_x` of every
//! output. The backward pass differentiates a weighted sum of outputs and
//! their spatial tangents with respect to all parameters and inputs, which
//! gives `∇_Θ f` and the mixed block `∂(∇_x f)/∂Θ` without third-order terms.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

/// Second-order index pairs `(a, b)` with `a ≤ b`.
pub const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MlpArch {
    /// `[n_in, hidden..., n_out]`
    pub widths: Vec<usize>,
    pub omega0: f64,
}

impl MlpArch {
    pub fn new(widths: Vec<usize>, omega0: f64) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::invalid("widths", "need input, at least one hidden layer and output"));
        }
        if widths[0] < 3 || widths.contains(&0) {
            return Err(Error::invalid("widths", "input must include 3 coordinates; widths > 0"));
        }
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::invalid("omega0", "must be positive"));
        }
        Ok(MlpArch { widths, omega0 })
    }

    pub fn n_in(&self) -> usize {
        self.widths[0]
    }

    pub fn n_out(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Offset of layer `l`'s weight block; its bias follows at `+ out × in`.
    pub fn layer_offset(&self, l: usize) -> usize {
        self.widths[..=l].windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.layers());
        let mut off = 0;
        for w in self.widths.windows(2) {
            out.push(off);
            off += w[0] * w[1] + w[1];
        }
        out
    }

    fn hidden_total(&self) -> usize {
        self.widths[1..self.widths.len() - 1].iter().sum()
    }

    /// SIREN-style uniform initialisation: first layer `U(±1/n_in)`, later
    /// layers `U(±√(6/n_in))` (the hidden-layer `ω₀` folded into the weights),
    /// biases `U(±1/√n_in)`. With `zero_output` the last layer starts at zero.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R, zero_output: bool) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for (l, w) in self.widths.windows(2).enumerate() {
            let (n_in, n_out) = (w[0] as f64, w[1]);
            let wb = if l == 0 { 1.0 / n_in } else { libm::sqrt(6.0 / n_in) };
            let bb = 1.0 / libm::sqrt(n_in);
            let last = l + 1 == self.layers();
            for _ in 0..w[0] * n_out {
                p.push(if last && zero_output { 0.0 } else { rng.random_range(-wb..wb) });
            }
            for _ in 0..n_out {
                p.push(if last && zero_output { 0.0 } else { rng.random_range(-bb..bb) });
            }
        }
        p
    }

    pub fn tape(&self) -> MlpTape {
        let h = self.hidden_total();
        let m = *self.widths.iter().max().unwrap();
        let o = self.n_out();
        MlpTape {
            order: 0,
            offsets: self.offsets(),
            hidden_offsets: {
                let mut v = Vec::new();
                let mut off = 0;
                for &w in &self.widths[1..self.widths.len() - 1] {
                    v.push(off);
                    off += w;
                }
                v
            },
            h,
            input: vec![0.0; self.n_in()],
            z: vec![0.0; h],
            sn: vec![0.0; h],
            cs: vec![0.0; h],
            dz: vec![0.0; 3 * h],
            da: vec![0.0; 3 * h],
            d2z: vec![0.0; 6 * h],
            d2a: vec![0.0; 6 * h],
            y: vec![0.0; o],
            dy: vec![0.0; 3 * o],
            d2y: vec![0.0; 6 * o],
            abar: vec![0.0; m],
            abar_d: vec![0.0; 3 * m],
            nbar: vec![0.0; m],
            nbar_d: vec![0.0; 3 * m],
            zbar: vec![0.0; m],
            dzbar: vec![0.0; 3 * m],
        }
    }

    /// Run the forward pass. `order` 0: values, 1: + spatial gradient, 2: + Hessian.
    pub fn forward(&self, params: &[f64], input: &[f64], order: u8, t: &mut MlpTape) {
        debug_assert_eq!(params.len(), self.param_count());
        debug_assert_eq!(input.len(), self.n_in());
        t.order = order;
        t.input.copy_from_slice(input);
        let h = t.h;
        let layers = self.layers();
        for l in 0..layers {
            let (n_i, n_o) = (self.widths[l], self.widths[l + 1]);
            let off = t.offsets[l];
            let w = &params[off..off + n_i * n_o];
            let b = &params[off + n_i * n_o..off + n_i * n_o + n_o];
            let last = l + 1 == layers;
            if !last {
                let ho = t.hidden_offsets[l];
                for j in 0..n_o {
                    let row = &w[j * n_i..(j + 1) * n_i];
                    let zj = if l == 0 {
                        self.omega0 * (crate::math::dot_slice(row, &t.input) + b[j])
                    } else {
                        let po = t.hidden_offsets[l - 1];
                        crate::math::dot_slice(row, &t.sn[po..po + n_i]) + b[j]
                    };
                    let (s, c) = (libm::sin(zj), libm::cos(zj));
                    t.z[ho + j] = zj;
                    t.sn[ho + j] = s;
                    t.cs[ho + j] = c;
                    if order >= 1 {
                        for d in 0..3 {
                            let dzj = if l == 0 {
                                self.omega0 * row[d]
                            } else {
                                let po = t.hidden_offsets[l - 1];
                                crate::math::dot_slice(row, &t.da[d * h + po..d * h + po + n_i])
                            };
                            t.dz[d * h + ho + j] = dzj;
                            t.da[d * h + ho + j] = c * dzj;
                        }
                    }
                    if order >= 2 {
                        for (k, &(a, bb)) in PAIRS.iter().enumerate() {
                            let d2zj = if l == 0 {
                                0.0
                            } else {
                                let po = t.hidden_offsets[l - 1];
                                crate::math::dot_slice(row, &t.d2a[k * h + po..k * h + po + n_i])
                            };
                            t.d2z[k * h + ho + j] = d2zj;
                            t.d2a[k * h + ho + j] =
                                c * d2zj - s * t.dz[a * h + ho + j] * t.dz[bb * h + ho + j];
                        }
                    }
                }
            } else {
                let po = t.hidden_offsets[l - 1];
                for o in 0..n_o {
                    let row = &w[o * n_i..(o + 1) * n_i];
                    t.y[o] = crate::math::dot_slice(row, &t.sn[po..po + n_i]) + b[o];
                    if order >= 1 {
                        for d in 0..3 {
                            t.dy[d * n_o + o] =
                                crate::math::dot_slice(row, &t.da[d * h + po..d * h + po + n_i]);
                        }
                    }
                    if order >= 2 {
                        for k in 0..6 {
                            t.d2y[k * n_o + o] =
                                crate::math::dot_slice(row, &t.d2a[k * h + po..k * h + po + n_i]);
                        }
                    }
                }
            }
        }
    }

    /// Accumulate `scale · ∂L/∂Θ` into `grad` (and `∂L/∂u` into `input_grad`)
    /// for `L = Σ_o seeds.value[o]·y_o + Σ_{d,o} seeds.tangent[d][o]·∂y_o/∂x_d`.
    ///
    /// Requires a forward pass of order ≥ 1 when tangent seeds are present.
    pub fn backward(
        &self,
        params: &[f64],
        t: &mut MlpTape,
        seeds: Seeds<'_>,
        scale: f64,
        grad: &mut [f64],
        mut input_grad: Option<&mut [f64]>,
    ) {
        let h = t.h;
        let layers = self.layers();
        let tangents = seeds.tangent.is_some();
        debug_assert!(!tangents || t.order >= 1);
        let n_out = self.n_out();

        // output layer
        {
            let l = layers - 1;
            let n_i = self.widths[l];
            let off = t.offsets[l];
            let po = t.hidden_offsets[l - 1];
            for k in 0..n_i {
                t.abar[k] = 0.0;
                for d in 0..3 {
                    t.abar_d[d * n_i + k] = 0.0;
                }
            }
            for o in 0..n_out {
                let sy = seeds.value[o];
                let row = off + o * n_i;
                for k in 0..n_i {
                    let mut gw = sy * t.sn[po + k];
                    if let Some(td) = seeds.tangent {
                        for d in 0..3 {
                            gw += td[d * n_out + o] * t.da[d * h + po + k];
                        }
                    }
                    grad[row + k] += scale * gw;
                    let wv = params[row + k];
                    t.abar[k] += wv * sy;
                    if let Some(td) = seeds.tangent {
                        for d in 0..3 {
                            t.abar_d[d * n_i + k] += wv * td[d * n_out + o];
                        }
                    }
                }
                grad[off + n_i * n_out + o] += scale * sy;
            }
        }

        for l in (0..layers - 1).rev() {
            let (n_i, n_o) = (self.widths[l], self.widths[l + 1]);
            let off = t.offsets[l];
            let ho = t.hidden_offsets[l];
            for j in 0..n_o {
                let (s, c) = (t.sn[ho + j], t.cs[ho + j]);
                let mut zb = t.abar[j] * c;
                if tangents {
                    for d in 0..3 {
                        let ad = t.abar_d[d * n_o + j];
                        zb -= ad * s * t.dz[d * h + ho + j];
                        t.dzbar[d * n_o + j] = ad * c;
                    }
                }
                t.zbar[j] = zb;
            }
            let bias = off + n_i * n_o;
            if l > 0 {
                let po = t.hidden_offsets[l - 1];
                for k in 0..n_i {
                    t.nbar[k] = 0.0;
                    if tangents {
                        for d in 0..3 {
                            t.nbar_d[d * n_i + k] = 0.0;
                        }
                    }
                }
                for j in 0..n_o {
                    let zb = t.zbar[j];
                    let row = off + j * n_i;
                    let a_prev = &t.sn[po..po + n_i];
                    let w = &params[row..row + n_i];
                    let g = &mut grad[row..row + n_i];
                    if tangents {
                        let db = [t.dzbar[j], t.dzbar[n_o + j], t.dzbar[2 * n_o + j]];
                        let (da0, rest) = t.da.split_at(h);
                        let (da1, da2) = rest.split_at(h);
                        let (da0, da1, da2) =
                            (&da0[po..po + n_i], &da1[po..po + n_i], &da2[po..po + n_i]);
                        for k in 0..n_i {
                            g[k] += scale * (zb * a_prev[k] + db[0] * da0[k] + db[1] * da1[k] + db[2] * da2[k]);
                            t.nbar[k] += w[k] * zb;
                            t.nbar_d[k] += w[k] * db[0];
                            t.nbar_d[n_i + k] += w[k] * db[1];
                            t.nbar_d[2 * n_i + k] += w[k] * db[2];
                        }
                    } else {
                        for k in 0..n_i {
                            g[k] += scale * zb * a_prev[k];
                            t.nbar[k] += w[k] * zb;
                        }
                    }
                    grad[bias + j] += scale * zb;
                }
                core::mem::swap(&mut t.abar, &mut t.nbar);
                core::mem::swap(&mut t.abar_d, &mut t.nbar_d);
            } else {
                let w0 = self.omega0;
                for j in 0..n_o {
                    let zb = t.zbar[j];
                    let row = off + j * n_i;
                    for k in 0..n_i {
                        let mut gw = zb * t.input[k];
                        if tangents && k < 3 {
                            gw += t.dzbar[k * n_o + j];
                        }
                        grad[row + k] += scale * w0 * gw;
                    }
                    grad[bias + j] += scale * w0 * zb;
                }
                if let Some(ig) = input_grad.as_deref_mut() {
                    for k in 0..n_i {
                        let mut acc = 0.0;
                        for j in 0..n_o {
                            acc += params[off + j * n_i + k] * t.zbar[j];
                        }
                        ig[k] += scale * w0 * acc;
                    }
                }
            }
        }
    }
}

/// Adjoint seeds for [`MlpArch::backward`].
#[derive(Debug, Clone, Copy)]
pub struct Seeds<'a> {
    /// One weight per output.
    pub value: &'a [f64],
    /// `3 × n_out`, layout `[d][o]`: weight on `∂y_o/∂x_d`.
    pub tangent: Option<&'a [f64]>,
}

/// Reusable forward/backward state.
#[derive(Debug, Clone)]
pub struct MlpTape {
    order: u8,
    offsets: Vec<usize>,
    hidden_offsets: Vec<usize>,
    h: usize,
    input: Vec<f64>,
    z: Vec<f64>,
    sn: Vec<f64>,
    cs: Vec<f64>,
    dz: Vec<f64>,
    da: Vec<f64>,
    d2z: Vec<f64>,
    d2a: Vec<f64>,
    y: Vec<f64>,
    dy: Vec<f64>,
    d2y: Vec<f64>,
    abar: Vec<f64>,
    abar_d: Vec<f64>,
    nbar: Vec<f64>,
    nbar_d: Vec<f64>,
    zbar: Vec<f64>,
    dzbar: Vec<f64>,
}

impl MlpTape {
    pub fn output(&self) -> &[f64] {
        &self.y
    }

    /// `∂y_o/∂x_d`
    pub fn tangent(&self, o: usize, d: usize) -> f64 {
        self.dy[d * self.y.len() + o]
    }

    /// `∂²y_o/∂x_a∂x_b`
    pub fn second(&self, o: usize, a: usize, b: usize) -> f64 {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let k = PAIRS.iter().position(|&p| p == (a, b)).unwrap();
        self.d2y[k * self.y.len() + o]
    }

    /// Spatial Jacobian `J[o][d] = ∂y_o/∂x_d` of a 3-output network.
    pub fn jacobian3(&self) -> [[f64; 3]; 3] {
        core::array::from_fn(|o| core::array::from_fn(|d| self.tangent(o, d)))
    }
}
