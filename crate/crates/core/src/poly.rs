//! Scalar and matrix polynomials in the backshift operator.
//!
//! Coefficients are stored in ascending powers, so `Poly(vec![1.0, -1.0])`
//! is `1 - B`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Scalar polynomial with real coefficients, ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Poly(coeffs);
        p.trim();
        p
    }

    pub fn one() -> Self {
        Poly(vec![1.0])
    }

    /// `1 - B`
    pub fn difference() -> Self {
        Poly(vec![1.0, -1.0])
    }

    /// `1 + B + ... + B^(s-1)`
    pub fn seasonal_sum(s: usize) -> Self {
        Poly(vec![1.0; s.max(1)])
    }

    /// `1 - 2 cos(freq) B + B^2`
    pub fn unit_cycle(freq: f64) -> Self {
        Poly(vec![1.0, -2.0 * freq.cos(), 1.0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    fn trim(&mut self) {
        while self.0.len() > 1 && *self.0.last().unwrap() == 0.0 {
            self.0.pop();
        }
        if self.0.is_empty() {
            self.0.push(0.0);
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        Poly(convolve(&self.0, &other.0))
    }

    pub fn pow(&self, n: usize) -> Poly {
        let mut out = Poly::one();
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    pub fn product<'a>(polys: impl IntoIterator<Item = &'a Poly>) -> Poly {
        polys.into_iter().fold(Poly::one(), |acc, p| acc.mul(p))
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.0
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Value at `exp(-i lambda)`.
    pub fn frf(&self, lambda: f64) -> Complex64 {
        self.eval(Complex64::from_polar(1.0, -lambda))
    }

    /// Roots via companion-matrix eigenvalues.
    pub fn roots(&self) -> Vec<Complex64> {
        let deg = self.degree();
        if deg == 0 {
            return Vec::new();
        }
        let lead = self.0[deg];
        let mut comp = DMatrix::<f64>::zeros(deg, deg);
        for i in 0..deg {
            comp[(0, i)] = -self.0[deg - 1 - i] / lead;
        }
        for i in 1..deg {
            comp[(i, i - 1)] = 1.0;
        }
        comp.complex_eigenvalues().iter().copied().collect()
    }

    /// Multiplicity of the root at one, found by repeated division by `1 - B`.
    pub fn unit_root_multiplicity(&self, tol: f64) -> (usize, Poly) {
        let mut p = self.clone();
        let mut d = 0;
        while p.degree() > 0 && p.eval_real(1.0).abs() <= tol * p.l1_norm() {
            p = p.divide_by_difference();
            d += 1;
        }
        (d, p)
    }

    /// Quotient of division by `1 - B`, discarding the remainder.
    fn divide_by_difference(&self) -> Poly {
        // q(B)(1 - B) = p(B)  =>  q_k = sum_{j<=k} p_j
        let n = self.degree();
        let mut q = Vec::with_capacity(n);
        let mut acc = 0.0;
        for k in 0..n {
            acc += self.0[k];
            q.push(acc);
        }
        Poly(q)
    }

    /// Filter a sequence: `out[t] = sum_j p_j x[t + deg - j]`, valid part only.
    pub fn filter_valid(&self, x: &[f64]) -> Vec<f64> {
        let d = self.degree();
        if x.len() <= d {
            return Vec::new();
        }
        (d..x.len())
            .map(|t| self.0.iter().enumerate().map(|(j, c)| c * x[t - j]).sum())
            .collect()
    }

    /// Coefficients of `p(z) p(1/z)` at lags `0..=deg`.
    pub fn autocovariance(&self) -> Vec<f64> {
        let n = self.0.len();
        (0..n)
            .map(|h| (0..n - h).map(|k| self.0[k + h] * self.0[k]).sum())
            .collect()
    }
}

pub(crate) fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// True when the two polynomials share a root, judged by evaluating each
/// polynomial at the computed roots of the other.
pub fn share_root(a: &Poly, b: &Poly, tol: f64) -> Option<Complex64> {
    let close = |roots: Vec<Complex64>, other: &Poly| {
        let scale = other.l1_norm().max(f64::MIN_POSITIVE);
        roots.into_iter().find(|r| {
            let mag = r.norm().max(1.0).powi(other.degree() as i32);
            other.eval(*r).norm() <= tol * scale * mag
        })
    };
    close(a.roots(), b).or_else(|| close(b.roots(), a))
}

/// Matrix polynomial, ascending powers, square `n x n` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MatPoly(pub Vec<DMatrix<f64>>);

impl MatPoly {
    pub fn identity(n: usize) -> Self {
        MatPoly(vec![DMatrix::identity(n, n)])
    }

    pub fn dim(&self) -> usize {
        self.0[0].nrows()
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn mul(&self, other: &MatPoly) -> MatPoly {
        let n = self.dim();
        let mut out = vec![DMatrix::zeros(n, n); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        MatPoly(out)
    }

    /// `I - sum_j c_j B^j` from the coefficient list `c_1..c_p`.
    pub fn from_minus(coefs: &[DMatrix<f64>], n: usize) -> MatPoly {
        let mut out = vec![DMatrix::identity(n, n)];
        out.extend(coefs.iter().map(|c| -c));
        MatPoly(out)
    }

    /// Spread a polynomial in `B^s` onto the lag axis.
    pub fn seasonal(&self, s: usize) -> MatPoly {
        let n = self.dim();
        let mut out = vec![DMatrix::zeros(n, n); self.degree() * s + 1];
        for (j, c) in self.0.iter().enumerate() {
            out[j * s] = c.clone();
        }
        MatPoly(out)
    }

    pub fn eval(&self, z: Complex64) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut acc = DMatrix::<Complex64>::zeros(n, n);
        for c in self.0.iter().rev() {
            acc = acc * z + c.map(|x| Complex64::new(x, 0.0));
        }
        acc
    }
}

/// Polynomial `U(B)` of degree `2n` whose roots are `exp(+-i 2 pi k / s)`,
/// `k = 1..=n`. Works for non-integer `s` through cepstral exponentiation.
pub fn ub_generator(n: usize, s: f64) -> Result<Poly> {
    if !(s > 0.0) || !s.is_finite() {
        return invalid("seasonal period must be positive");
    }
    let len = 2 * n;
    let mut cep = vec![0.0; len + 1];
    for (l, c) in cep.iter_mut().enumerate().skip(1) {
        *c = (1..=n)
            .map(|k| -2.0 * (2.0 * std::f64::consts::PI * k as f64 * l as f64 / s).cos())
            .sum::<f64>()
            / l as f64;
    }
    let mut a = vec![0.0; len + 1];
    a[0] = 1.0;
    for m in 1..=len {
        a[m] = (1..=m).map(|k| k as f64 * cep[k] * a[m - k]).sum::<f64>() / m as f64;
    }
    Ok(Poly(a))
}
