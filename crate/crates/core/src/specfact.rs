//! Spectral factorization of finite autocovariance sequences into a moving
//! average polynomial and an innovation covariance.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::linalg::sym_pinv;
use crate::poly::{MatPoly, Poly};

#[derive(Debug, Clone, Copy)]
pub struct SpecFactOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SpecFactOptions {
    fn default() -> Self {
        SpecFactOptions { tol: 1e-12, max_iter: 500 }
    }
}

/// Density on a grid must not dip below this before factorizing.
const NONNEG_TOL: f64 = -1e-10;
const NONNEG_GRID: usize = 1024;

fn check_nonnegative(gamma: &[f64]) -> Result<()> {
    let top = gamma[0].abs().max(f64::MIN_POSITIVE);
    for m in 0..=NONNEG_GRID {
        let lam = std::f64::consts::PI * m as f64 / NONNEG_GRID as f64;
        let f = gamma[0]
            + 2.0 * gamma.iter().enumerate().skip(1).map(|(h, g)| g * (lam * h as f64).cos()).sum::<f64>();
        if f < NONNEG_TOL * top {
            return invalid(format!("autocovariance has negative spectral density {f:.3e}"));
        }
    }
    Ok(())
}

/// Factor `gamma[0..=q]` as `sigma2 * theta(z) theta(1/z)` with
/// `theta(0) = 1`.
///
/// The innovations recursion is run first. If it has not settled within
/// `max_iter` steps (typical when `theta` has roots on the unit circle) the
/// factor is recovered from the roots of the covariance generating function
/// instead.
pub fn spec_fact(gamma: &[f64], opts: SpecFactOptions) -> Result<(Poly, f64)> {
    if gamma.is_empty() {
        return invalid("empty autocovariance");
    }
    if gamma.iter().all(|&g| g == 0.0) {
        return Ok((Poly::one(), 0.0));
    }
    check_nonnegative(gamma)?;
    let q = gamma.len() - 1;
    if q == 0 {
        return Ok((Poly::one(), gamma[0]));
    }
    let mats: Vec<DMatrix<f64>> = gamma.iter().map(|&g| DMatrix::from_element(1, 1, g)).collect();
    match innovations(&mats, opts) {
        Ok((ma, v)) => Ok((Poly(ma.0.iter().map(|m| m[(0, 0)]).collect()), v[(0, 0)])),
        Err(Error::NonConvergence { .. }) => {
            let (p, s2) = from_roots(gamma)?;
            let recon = p.autocovariance();
            let err = recon
                .iter()
                .zip(gamma)
                .map(|(r, g)| (s2 * r - g).abs())
                .fold(0.0, f64::max);
            if err > 1e-6 * gamma[0].abs() {
                return Err(Error::NonConvergence {
                    what: "spectral factorization".into(),
                    iterations: opts.max_iter,
                });
            }
            Ok((p, s2))
        }
        Err(e) => Err(e),
    }
}

/// Multivariate factorization `Gamma(h) = sum_k Theta_{k+h} Sigma Theta_k'`.
pub fn spec_fact_mvar(gamma: &[DMatrix<f64>], opts: SpecFactOptions) -> Result<(MatPoly, DMatrix<f64>)> {
    if gamma.is_empty() {
        return invalid("empty autocovariance");
    }
    innovations(gamma, opts)
}

/// Banded innovations algorithm for an MA(q) autocovariance.
fn innovations(gamma: &[DMatrix<f64>], opts: SpecFactOptions) -> Result<(MatPoly, DMatrix<f64>)> {
    let n = gamma[0].nrows();
    let q = gamma.len() - 1;
    let g = |h: usize| -> &DMatrix<f64> { &gamma[h] };
    let scale = gamma[0].abs().max().max(f64::MIN_POSITIVE);
    // theta[m][j] = Theta_{m, j} for j = 1..=q (index j-1); v[m] = V_m
    let mut theta: Vec<Vec<DMatrix<f64>>> = vec![Vec::new()];
    let mut v: Vec<DMatrix<f64>> = vec![gamma[0].clone()];
    let mut vinv: Vec<DMatrix<f64>> = vec![sym_pinv(&gamma[0], 1e-13)];
    let zero = DMatrix::<f64>::zeros(n, n);
    for m in 1..=opts.max_iter.max(1) {
        let mut row = vec![zero.clone(); q];
        let k0 = m.saturating_sub(q);
        for k in k0..m {
            // Theta_{m, m-k}
            let mut acc = if m - k <= q { g(m - k).clone() } else { zero.clone() };
            for j in k0..k {
                let a = &row[m - j - 1];
                let lag_b = k - j;
                if lag_b == 0 || lag_b > q || k == 0 {
                    continue;
                }
                let b = &theta[k][lag_b - 1];
                acc -= a * &v[j] * b.transpose();
            }
            row[m - k - 1] = acc * &vinv[k];
        }
        let mut vm = gamma[0].clone();
        for j in k0..m {
            let a = &row[m - j - 1];
            vm -= a * &v[j] * a.transpose();
        }
        let vm = (&vm + vm.transpose()) * 0.5;
        // compare one full band back: sparse bands can stall for q - 1 steps
        let back = m.saturating_sub(q).max(1).min(m - 1);
        let dv = (&vm - &v[back]).abs().max();
        let dtheta = if m > q {
            row.iter()
                .zip(theta[back].iter())
                .map(|(a, b)| (a - b).abs().max())
                .fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        vinv.push(sym_pinv(&vm, 1e-13));
        v.push(vm);
        theta.push(row);
        if m > 2 * q && dv <= opts.tol * scale && dtheta <= opts.tol.sqrt() {
            let mut coefs = vec![DMatrix::identity(n, n)];
            coefs.extend(theta[m].iter().cloned());
            return Ok((MatPoly(coefs), v[m].clone()));
        }
    }
    Err(Error::NonConvergence { what: "innovations recursion".into(), iterations: opts.max_iter })
}

/// Root-based factorization for scalar sequences.
fn from_roots(gamma: &[f64]) -> Result<(Poly, f64)> {
    let q = gamma.len() - 1;
    let coeffs: Vec<f64> = (0..=2 * q).map(|j| gamma[(j as isize - q as isize).unsigned_abs()]).collect();
    let mut roots = Poly(coeffs).roots();
    if roots.len() != 2 * q {
        return invalid("degenerate covariance generating function");
    }
    roots.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
    let mut c = vec![num_complex::Complex64::new(1.0, 0.0)];
    for r in roots.iter().take(q) {
        let mut next = vec![num_complex::Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci / r;
        }
        c = next;
    }
    let p = Poly(c.iter().map(|z| z.re).collect());
    let s2 = gamma[0] / p.0.iter().map(|x| x * x).sum::<f64>();
    Ok((p, s2))
}
