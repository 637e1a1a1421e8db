//! Second-order forward jets for closed-form analytic fields.
//!
//! A [`Jet`] carries a value, gradient and dense Hessian with respect to a
//! small set of seeded variables (three coordinates plus the shape
//! parameters). Shape formulas are written once against [`Scalar`] and run
//! either on plain `f64` or on jets.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn lift(&self, c: f64) -> Self;
    fn val(&self) -> f64;
    fn sqrt(&self) -> Self;
    fn abs(&self) -> Self {
        if self.val() < 0.0 {
            -self.clone()
        } else {
            self.clone()
        }
    }
    fn max(&self, other: &Self) -> Self {
        if self.val() >= other.val() {
            self.clone()
        } else {
            other.clone()
        }
    }
    fn min(&self, other: &Self) -> Self {
        if self.val() <= other.val() {
            self.clone()
        } else {
            other.clone()
        }
    }
    fn add_c(&self, c: f64) -> Self {
        self.clone() + self.lift(c)
    }
    fn mul_c(&self, c: f64) -> Self {
        self.clone() * self.lift(c)
    }
}

impl Scalar for f64 {
    fn lift(&self, c: f64) -> f64 {
        c
    }
    fn val(&self) -> f64 {
        *self
    }
    fn sqrt(&self) -> f64 {
        libm::sqrt(*self)
    }
    fn add_c(&self, c: f64) -> f64 {
        self + c
    }
    fn mul_c(&self, c: f64) -> f64 {
        self * c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: Vec<f64>,
    /// Row-major `n × n`.
    pub h: Vec<f64>,
}

impl Jet {
    pub fn constant(v: f64, n: usize) -> Jet {
        Jet { v, g: vec![0.0; n], h: vec![0.0; n * n] }
    }

    pub fn variable(v: f64, index: usize, n: usize) -> Jet {
        let mut j = Jet::constant(v, n);
        j.g[index] = 1.0;
        j
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.h[i * self.dim() + j]
    }

    /// `φ(self)` given `φ`, `φ'`, `φ''` at the current value.
    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Jet {
        let n = self.dim();
        let mut out = Jet { v: f0, g: vec![0.0; n], h: vec![0.0; n * n] };
        for i in 0..n {
            out.g[i] = f1 * self.g[i];
        }
        for i in 0..n {
            for j in 0..n {
                out.h[i * n + j] = f1 * self.h[i * n + j] + f2 * self.g[i] * self.g[j];
            }
        }
        out
    }

    fn recip(&self) -> Jet {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, o: Jet) -> Jet {
        self.v += o.v;
        self.g.iter_mut().zip(&o.g).for_each(|(a, b)| *a += b);
        self.h.iter_mut().zip(&o.h).for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, o: Jet) -> Jet {
        self.v -= o.v;
        self.g.iter_mut().zip(&o.g).for_each(|(a, b)| *a -= b);
        self.h.iter_mut().zip(&o.h).for_each(|(a, b)| *a -= b);
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        self.v = -self.v;
        self.g.iter_mut().for_each(|a| *a = -*a);
        self.h.iter_mut().for_each(|a| *a = -*a);
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let n = self.dim();
        let mut out = Jet::constant(self.v * o.v, n);
        for i in 0..n {
            out.g[i] = self.g[i] * o.v + o.g[i] * self.v;
        }
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                out.h[k] = self.h[k] * o.v
                    + o.h[k] * self.v
                    + self.g[i] * o.g[j]
                    + o.g[i] * self.g[j];
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Scalar for Jet {
    fn lift(&self, c: f64) -> Jet {
        Jet::constant(c, self.dim())
    }
    fn val(&self) -> f64 {
        self.v
    }
    fn sqrt(&self) -> Jet {
        let s = libm::sqrt(self.v);
        if s == 0.0 {
            // subgradient at the kink: report a flat jet
            return Jet::constant(0.0, self.dim());
        }
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }
    fn add_c(&self, c: f64) -> Jet {
        let mut j = self.clone();
        j.v += c;
        j
    }
    fn mul_c(&self, c: f64) -> Jet {
        let mut j = self.clone();
        j.v *= c;
        j.g.iter_mut().for_each(|a| *a *= c);
        j.h.iter_mut().for_each(|a| *a *= c);
        j
    }
}
