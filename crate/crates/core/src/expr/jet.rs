//! Second-order forward-mode jets.
//!
//! A [`Jet`] carries the value, gradient and Hessian of a scalar field at a
//! point, with respect to `n` chart coordinates. Arithmetic on jets applies
//! the first- and second-order chain rules, so evaluating an expression tree
//! over jets yields derivatives exact to rounding.

use std::ops::{Add, Mul, Neg, Sub};

/// Value, gradient and Hessian of a field at a chart point.
///
/// The Hessian is stored as the packed upper triangle (row-major), so it is
/// symmetric by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

#[inline]
fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

#[inline]
fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // row i starts after rows of length n, n-1, ..., n-i+1
    i * (2 * n - i + 1) / 2 + (j - i)
}

impl Jet {
    /// Constant field: zero gradient and Hessian.
    pub fn constant(n: usize, value: f64) -> Self {
        Self {
            value,
            grad: vec![0.0; n],
            hess: vec![0.0; packed_len(n)],
        }
    }

    /// The `index`-th coordinate function evaluated at `value`.
    pub fn variable(n: usize, index: usize, value: f64) -> Self {
        let mut jet = Self::constant(n, value);
        jet.grad[index] = 1.0;
        jet
    }

    /// Builds a jet from explicit parts. `hess` is a full `n x n` matrix;
    /// only its upper triangle is read.
    pub fn from_parts(value: f64, grad: Vec<f64>, hess: &[Vec<f64>]) -> Self {
        let n = grad.len();
        let mut packed = vec![0.0; packed_len(n)];
        for i in 0..n {
            for j in i..n {
                packed[packed_index(n, i, j)] = hess[i][j];
            }
        }
        Self {
            value,
            grad,
            hess: packed,
        }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    /// Second partial derivative `d^2/dx_i dx_j`.
    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hess[packed_index(self.dim(), i, j)]
    }

    /// Full Hessian as a dense matrix.
    pub fn hess_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.hess(i, j)).collect())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|v| v.is_finite())
            && self.hess.iter().all(|v| v.is_finite())
    }

    /// True when the gradient and Hessian vanish identically.
    pub fn is_constant(&self) -> bool {
        self.grad.iter().all(|&v| v == 0.0) && self.hess.iter().all(|&v| v == 0.0)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            value: self.value * k,
            grad: self.grad.iter().map(|g| g * k).collect(),
            hess: self.hess.iter().map(|h| h * k).collect(),
        }
    }

    /// Applies a scalar function with derivatives `d1 = phi'(v)` and
    /// `d2 = phi''(v)` at the current value.
    pub fn chain(&self, value: f64, d1: f64, d2: f64) -> Self {
        let n = self.dim();
        let grad = self.grad.iter().map(|g| d1 * g).collect();
        let mut hess = vec![0.0; packed_len(n)];
        for i in 0..n {
            for j in i..n {
                let k = packed_index(n, i, j);
                hess[k] = d1 * self.hess[k] + d2 * self.grad[i] * self.grad[j];
            }
        }
        Self { value, grad, hess }
    }

    /// Multiplicative inverse. Caller guarantees a nonzero value.
    pub fn recip(&self) -> Self {
        let v = self.value;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    /// Integer power by square-and-multiply, so negative bases stay exact.
    /// Negative exponents require a nonzero value.
    pub fn powi(&self, exp: i64) -> Self {
        if exp < 0 {
            return self.powi(-exp).recip();
        }
        let mut result = Jet::constant(self.dim(), 1.0);
        let mut base = self.clone();
        let mut e = exp as u64;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Real power with a constant exponent; requires a positive value.
    pub fn powf(&self, p: f64) -> Self {
        let v = self.value;
        self.chain(
            v.powf(p),
            p * v.powf(p - 1.0),
            p * (p - 1.0) * v.powf(p - 2.0),
        )
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet {
            value: self.value + rhs.value,
            grad: self.grad.iter().zip(&rhs.grad).map(|(a, b)| a + b).collect(),
            hess: self.hess.iter().zip(&rhs.hess).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet {
            value: self.value - rhs.value,
            grad: self.grad.iter().zip(&rhs.grad).map(|(a, b)| a - b).collect(),
            hess: self.hess.iter().zip(&rhs.hess).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let n = self.dim();
        let (a, b) = (self.value, rhs.value);
        let grad = (0..n).map(|i| a * rhs.grad[i] + b * self.grad[i]).collect();
        let mut hess = vec![0.0; packed_len(n)];
        for i in 0..n {
            for j in i..n {
                let k = packed_index(n, i, j);
                hess[k] = a * rhs.hess[k]
                    + b * self.hess[k]
                    + self.grad[i] * rhs.grad[j]
                    + self.grad[j] * rhs.grad[i];
            }
        }
        Jet {
            value: a * b,
            grad,
            hess,
        }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
