//! Second-order forward Taylor (jet) arithmetic in six variables.
//!
//! [`Jet2`] carries a value, a 6-gradient, and a symmetric 6x6 Hessian.
//! Pushing jets through tensor formulas differentiates them twice
//! automatically, which is exactly the order the curvature and
//! connection expressions downstream require.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};
use crate::multilinear::DIM;

/// Scalar interface shared by plain reals and 2-jets.
///
/// Tensor code is generic over this trait so every formula can run either
/// on pointwise data (`f64`, left-invariant backend) or on Taylor data
/// ([`Jet2`], flat chart backend).
pub trait Scalar:
    Copy
    + Send
    + Sync
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    fn scale(self, c: f64) -> Self;

    /// Value at the base point.
    fn value(&self) -> f64;

    /// Max absolute entry over every stored Taylor coefficient.
    fn max_abs(&self) -> f64;

    /// `acc += a * b` without materializing intermediates.
    fn mul_acc(acc: &mut Self, a: &Self, b: &Self);

    fn try_recip(self) -> Result<Self>;
    fn try_sqrt(self) -> Result<Self>;
    fn try_ln(self) -> Result<Self>;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn scale(self, c: f64) -> Self {
        self * c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn max_abs(&self) -> f64 {
        self.abs()
    }
    fn mul_acc(acc: &mut Self, a: &Self, b: &Self) {
        *acc += a * b;
    }
    fn try_recip(self) -> Result<Self> {
        if self == 0.0 {
            return Err(Error::Domain("reciprocal of zero"));
        }
        Ok(1.0 / self)
    }
    fn try_sqrt(self) -> Result<Self> {
        if self <= 0.0 {
            return Err(Error::Domain("sqrt of non-positive value"));
        }
        Ok(self.sqrt())
    }
    fn try_ln(self) -> Result<Self> {
        if self <= 0.0 {
            return Err(Error::Domain("log of non-positive value"));
        }
        Ok(self.ln())
    }
}

/// A scalar together with its first and second derivatives at a base
/// point of a 6-dimensional chart.
///
/// Invariants: `hess` is symmetric (enforced on construction), and
/// constants carry zero `grad`/`hess`.
#[derive(Clone, Copy, Debug)]
pub struct Jet2 {
    pub val: f64,
    pub grad: [f64; DIM],
    pub hess: [[f64; DIM]; DIM],
}

impl Jet2 {
    pub const ZERO: Jet2 = Jet2 {
        val: 0.0,
        grad: [0.0; DIM],
        hess: [[0.0; DIM]; DIM],
    };

    /// Constant jet: value only, no variation.
    pub fn constant(val: f64) -> Self {
        Jet2 { val, ..Jet2::ZERO }
    }

    /// Coordinate jet: the affine function `val + x_axis`.
    pub fn variable(val: f64, axis: usize) -> Self {
        let mut grad = [0.0; DIM];
        grad[axis] = 1.0;
        Jet2 {
            val,
            grad,
            hess: [[0.0; DIM]; DIM],
        }
    }

    /// Build from raw Taylor data; the Hessian is symmetrized.
    pub fn from_taylor(val: f64, grad: [f64; DIM], hess: [[f64; DIM]; DIM]) -> Self {
        let mut h = [[0.0; DIM]; DIM];
        for a in 0..DIM {
            for b in 0..DIM {
                h[a][b] = 0.5 * (hess[a][b] + hess[b][a]);
            }
        }
        Jet2 { val, grad, hess: h }
    }

    /// The partial derivative along `axis`, as a jet one order shorter:
    /// the returned Hessian is zero because third derivatives are not
    /// tracked. Valid as long as at most two derivatives are taken in
    /// total before reading `val`.
    pub fn partial(&self, axis: usize) -> Jet2 {
        Jet2 {
            val: self.grad[axis],
            grad: self.hess[axis],
            hess: [[0.0; DIM]; DIM],
        }
    }

    /// Univariate chain rule to second order: `f(self)` given
    /// `f(val)`, `f'(val)`, `f''(val)`.
    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Jet2 {
        let mut grad = [0.0; DIM];
        let mut hess = [[0.0; DIM]; DIM];
        for a in 0..DIM {
            grad[a] = f1 * self.grad[a];
            for b in 0..DIM {
                hess[a][b] = f1 * self.hess[a][b] + f2 * self.grad[a] * self.grad[b];
            }
        }
        Jet2 {
            val: f0,
            grad,
            hess,
        }
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        let mut r = self;
        r += o;
        r
    }
}

impl AddAssign for Jet2 {
    fn add_assign(&mut self, o: Jet2) {
        self.val += o.val;
        for a in 0..DIM {
            self.grad[a] += o.grad[a];
            for b in 0..DIM {
                self.hess[a][b] += o.hess[a][b];
            }
        }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        let mut r = self;
        r -= o;
        r
    }
}

impl SubAssign for Jet2 {
    fn sub_assign(&mut self, o: Jet2) {
        self.val -= o.val;
        for a in 0..DIM {
            self.grad[a] -= o.grad[a];
            for b in 0..DIM {
                self.hess[a][b] -= o.hess[a][b];
            }
        }
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        let mut r = Jet2::ZERO;
        Jet2::mul_acc(&mut r, &self, &o);
        r
    }
}

impl Scalar for Jet2 {
    fn zero() -> Self {
        Jet2::ZERO
    }
    fn one() -> Self {
        Jet2::constant(1.0)
    }
    fn from_f64(x: f64) -> Self {
        Jet2::constant(x)
    }

    fn scale(self, c: f64) -> Self {
        let mut r = self;
        r.val *= c;
        for a in 0..DIM {
            r.grad[a] *= c;
            for b in 0..DIM {
                r.hess[a][b] *= c;
            }
        }
        r
    }

    fn value(&self) -> f64 {
        self.val
    }

    fn max_abs(&self) -> f64 {
        let mut m = self.val.abs();
        for a in 0..DIM {
            m = m.max(self.grad[a].abs());
            for b in 0..DIM {
                m = m.max(self.hess[a][b].abs());
            }
        }
        m
    }

    // Product rule: (ab)'' = a''b + 2a'b' + ab''.
    fn mul_acc(acc: &mut Self, a: &Self, b: &Self) {
        acc.val += a.val * b.val;
        for i in 0..DIM {
            acc.grad[i] += a.val * b.grad[i] + b.val * a.grad[i];
            for j in 0..DIM {
                acc.hess[i][j] += a.val * b.hess[i][j]
                    + b.val * a.hess[i][j]
                    + a.grad[i] * b.grad[j]
                    + b.grad[i] * a.grad[j];
            }
        }
    }

    fn try_recip(self) -> Result<Self> {
        if self.val == 0.0 {
            return Err(Error::Domain("reciprocal of zero"));
        }
        let inv = 1.0 / self.val;
        Ok(self.chain(inv, -inv * inv, 2.0 * inv * inv * inv))
    }

    fn try_sqrt(self) -> Result<Self> {
        if self.val <= 0.0 {
            return Err(Error::Domain("sqrt of non-positive value"));
        }
        let s = self.val.sqrt();
        Ok(self.chain(s, 0.5 / s, -0.25 / (s * self.val)))
    }

    fn try_ln(self) -> Result<Self> {
        if self.val <= 0.0 {
            return Err(Error::Domain("log of non-positive value"));
        }
        let inv = 1.0 / self.val;
        Ok(self.chain(self.val.ln(), inv, -inv * inv))
    }
}
