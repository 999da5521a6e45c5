//! Autocovariances and spectral densities of latent components.
//!
//! Densities follow `f(lambda) = sum_h gamma_h exp(-i lambda h)`, so that
//! `gamma_0` is the average of `f` over `[-pi, pi]`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{ComponentClass, ModelSpec};
use crate::param::{Dynamics, ParamSet};
use crate::poly::{MatPoly, Poly};
use crate::specfact::{spec_fact, SpecFactOptions};

/// Whether `phi(z)` (full polynomial, `phi(0) = 1`) has all roots outside
/// the unit circle, checked by the step-down recursion.
pub fn is_stable(phi: &Poly) -> bool {
    let mut c: Vec<f64> = phi.0[1..].iter().map(|x| -x / phi.0[0]).collect();
    while let Some(&a) = c.last() {
        if !(a.abs() < 1.0) {
            return false;
        }
        let j = c.len() - 1;
        let cur = c.clone();
        for i in 0..j {
            c[i] = (cur[i] + a * cur[j - 1 - i]) / (1.0 - a * a);
        }
        c.truncate(j);
    }
    true
}

/// Autocovariances at lags `0..=max_lag` of `phi(B) x_t = theta(B) e_t`
/// with `Var(e_t) = sigma2`. Both polynomials are full, with unit constant.
pub fn arma_acvf(phi: &Poly, theta: &Poly, sigma2: f64, max_lag: usize) -> Result<Vec<f64>> {
    if !is_stable(phi) {
        return Err(Error::Unstable("autoregressive polynomial has a root on or inside the unit circle".into()));
    }
    let a = &phi.0;
    let b = &theta.0;
    let p = phi.degree();
    let q = theta.degree();
    let mut psi = vec![0.0; q + 1];
    for j in 0..=q {
        let mut v = b[j];
        for i in 1..=j.min(p) {
            v -= a[i] * psi[j - i];
        }
        psi[j] = v / a[0];
    }
    let rhs = |k: usize| -> f64 { (k..=q).map(|j| b[j] * psi[j - k]).sum::<f64>() * sigma2 };
    let mut m = DMatrix::<f64>::zeros(p + 1, p + 1);
    let mut r = nalgebra::DVector::<f64>::zeros(p + 1);
    for k in 0..=p {
        for (j, aj) in a.iter().enumerate() {
            let lag = (k as isize - j as isize).unsigned_abs();
            m[(k, lag)] += aj;
        }
        r[k] = rhs(k);
    }
    let sol = m.lu().solve(&r).ok_or_else(|| Error::Unstable("singular autocovariance system".into()))?;
    let mut g: Vec<f64> = sol.iter().copied().collect();
    g.truncate(max_lag + 1);
    for k in p + 1..=max_lag {
        let mut v = rhs(k);
        for j in 1..=p {
            v -= a[j] * g[k - j];
        }
        g.push(v / a[0]);
    }
    Ok(g)
}

/// Autocovariances `Gamma(h) = E[x_{t+h} x_t']`, `h = 0..=max_lag`, of
/// `Phi(B) x_t = Theta(B) e_t` with `Var(e_t) = sigma`.
pub fn varma_acvf(phi: &MatPoly, theta: &MatPoly, sigma: &DMatrix<f64>, max_lag: usize) -> Result<Vec<DMatrix<f64>>> {
    let n = phi.dim();
    let p = phi.degree();
    let q = theta.degree();
    if p > 0 {
        let coefs: Vec<DMatrix<f64>> = phi.0[1..].iter().map(|c| -c).collect();
        if !(crate::linalg::companion_radius(&coefs) < 1.0) {
            return Err(Error::Unstable("vector autoregression is not stable".into()));
        }
    }
    let a = &phi.0;
    let b = &theta.0;
    let mut psi: Vec<DMatrix<f64>> = Vec::with_capacity(q + 1);
    for j in 0..=q {
        let mut v = b[j].clone();
        for i in 1..=j.min(p) {
            v -= &a[i] * &psi[j - i];
        }
        psi.push(v);
    }
    let rhs = |k: usize| -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(n, n);
        for j in k..=q {
            acc += &b[j] * sigma * psi[j - k].transpose();
        }
        acc
    };
    let n2 = n * n;
    let dim = (p + 1) * n2;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    let mut r = nalgebra::DVector::<f64>::zeros(dim);
    for k in 0..=p {
        let rk = rhs(k);
        for row in 0..n {
            for col in 0..n {
                let eq = k * n2 + col * n + row;
                r[eq] = rk[(row, col)];
                for (j, aj) in a.iter().enumerate() {
                    let lag = k as isize - j as isize;
                    if lag >= 0 {
                        let mm = lag as usize;
                        for l in 0..n {
                            m[(eq, mm * n2 + col * n + l)] += aj[(row, l)];
                        }
                    } else {
                        let mm = (-lag) as usize;
                        for l in 0..n {
                            m[(eq, mm * n2 + l * n + col)] += aj[(row, l)];
                        }
                    }
                }
            }
        }
    }
    let sol = m.lu().solve(&r).ok_or_else(|| Error::Unstable("singular autocovariance system".into()))?;
    let mut g: Vec<DMatrix<f64>> =
        (0..=p).map(|k| DMatrix::from_column_slice(n, n, &sol.as_slice()[k * n2..(k + 1) * n2])).collect();
    g[0] = (&g[0] + g[0].transpose()) * 0.5;
    g.truncate(max_lag + 1);
    for k in p + 1..=max_lag {
        let mut v = rhs(k);
        for j in 1..=p {
            v -= &a[j] * &g[k - j];
        }
        g.push(v);
    }
    Ok(g)
}

/// Butterworth cycle polynomials `(AR, MA)` of order `n`.
pub fn butterworth_polys(rho: f64, omega: f64, n: usize) -> (Poly, Poly) {
    let ar = Poly(vec![1.0, -2.0 * rho * omega.cos(), rho * rho]).pow(n);
    let ma = Poly(vec![1.0, -rho * omega.cos()]).pow(n);
    (ar, ma)
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Closed-form autocovariances of the balanced cycle of order `n` with unit
/// innovation variance.
pub fn balanced_acvf(rho: f64, omega: f64, n: usize, max_lag: usize) -> Vec<f64> {
    let r2 = rho * rho;
    let alpha = |k: usize| -> f64 {
        (1.0 - r2).powi((n - k) as i32)
            * (0..k).map(|r| binom(k - 1, r) * binom(n - 1, r + n - k) * r2.powi(r as i32)).sum::<f64>()
    };
    let scale = (1.0 - r2).powi(1 - 2 * n as i32);
    (0..=max_lag)
        .map(|h| {
            let s: f64 = (0..n).map(|j| binom(h, j) * alpha(n - j)).sum();
            rho.powi(h as i32) * (h as f64 * omega).cos() * s * scale
        })
        .collect()
}

pub fn balanced_density(rho: f64, omega: f64, n: usize, lambda: f64) -> f64 {
    let a = 1.0 - 2.0 * rho * (omega - lambda).cos() + rho * rho;
    let b = 1.0 - 2.0 * rho * (omega + lambda).cos() + rho * rho;
    0.5 * (a.powi(-(n as i32)) + b.powi(-(n as i32)))
}

/// Autocovariances (lags `0..=n`) of the balanced cycle's moving-average part.
pub fn balanced_ma_acvf(rho: f64, omega: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|h| {
            (omega * h as f64).cos()
                * (0..=n - h).map(|k| binom(n, k + h) * binom(n, k) * (-rho).powi((2 * k + h) as i32)).sum::<f64>()
        })
        .collect()
}

/// Balanced cycle as an ARMA: AR polynomial and a spectrally factored MA.
pub fn balanced_polys(rho: f64, omega: f64, n: usize) -> Result<(Poly, Poly, f64)> {
    let ar = Poly(vec![1.0, -2.0 * rho * omega.cos(), rho * rho]).pow(n);
    let (ma, s2) = spec_fact(&balanced_ma_acvf(rho, omega, n), SpecFactOptions::default())?;
    Ok((ar, ma, s2))
}

/// `|theta(e^{-i lambda})|^2 / |phi(e^{-i lambda})|^2`
pub fn arma_density(phi: &Poly, theta: &Poly, lambda: f64) -> f64 {
    theta.frf(lambda).norm_sqr() / phi.frf(lambda).norm_sqr()
}

/// Minimum over frequency of the Butterworth density (unit variance).
pub fn butterworth_floor(rho: f64, omega: f64, n: usize) -> f64 {
    let (ar, ma) = butterworth_polys(rho, omega, n);
    let mut cands = vec![0.0, PI];
    let (c, s) = (omega.cos(), omega.sin());
    if (rho * c).abs() > 1e-14 {
        for sg in [1.0, -1.0] {
            let z = (1.0 + rho * rho * c * c + sg * s * (s * s + (1.0 - rho * rho).powi(2) * c * c).sqrt()) / (2.0 * rho * c);
            if z.abs() <= 1.0 {
                cands.push(z.acos());
            }
        }
    }
    cands.iter().map(|&l| arma_density(&ar, &ma, l)).fold(f64::INFINITY, f64::min)
}

/// Minimum over frequency of the balanced density (unit variance); it sits
/// at one of the endpoints.
pub fn balanced_floor(rho: f64, omega: f64, n: usize) -> f64 {
    balanced_density(rho, omega, n, 0.0).min(balanced_density(rho, omega, n, PI))
}

/// Result of removing the white-noise floor from an ARMA.
#[derive(Debug, Clone, PartialEq)]
pub struct Canonized {
    pub ma: Poly,
    pub sigma2: f64,
    /// Subtracted constant, in density units.
    pub floor: f64,
}

/// Minimum of a smooth function on `[0, pi]` by grid search and golden
/// section refinement.
pub(crate) fn min_on_half_circle(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let m = 2048;
    let step = PI / m as f64;
    let (mut best_l, mut best_v) = (0.0, f(0.0));
    for i in 1..=m {
        let l = i as f64 * step;
        let v = f(l);
        if v < best_v {
            best_v = v;
            best_l = l;
        }
    }
    let (mut lo, mut hi) = ((best_l - step).max(0.0), (best_l + step).min(PI));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let l = 0.5 * (lo + hi);
    let v = f(l);
    if v < best_v {
        (l, v)
    } else {
        (best_l, best_v)
    }
}

/// Subtract the minimum of the ARMA density and factor what remains.
pub fn canonize(phi: &Poly, theta: &Poly, sigma2: f64) -> Result<Canonized> {
    let (_, floor) = min_on_half_circle(|l| sigma2 * arma_density(phi, theta, l));
    let floor = floor.max(0.0);
    let ta = theta.autocovariance();
    let pa = phi.autocovariance();
    let len = ta.len().max(pa.len());
    let num: Vec<f64> = (0..len)
        .map(|h| sigma2 * ta.get(h).copied().unwrap_or(0.0) - floor * pa.get(h).copied().unwrap_or(0.0))
        .collect();
    let top = num[0].abs().max(f64::MIN_POSITIVE);
    let num: Vec<f64> = num.into_iter().map(|v| if v.abs() < 1e-14 * top { 0.0 } else { v }).collect();
    let (ma, s2) = spec_fact(&num, SpecFactOptions::default())?;
    Ok(Canonized { ma, sigma2: s2, floor })
}

/// Scalar autocovariance (unit innovation variance) of a scalar-driven class.
fn class_scalar_acvf(class: &ComponentClass, dy: &Dynamics, max_lag: usize) -> Result<Vec<f64>> {
    use ComponentClass::*;
    match (class, dy) {
        (Butterworth { order }, Dynamics::Cycle { rho, omega }) => {
            let (ar, ma) = butterworth_polys(*rho, *omega, *order);
            arma_acvf(&ar, &ma, 1.0, max_lag)
        }
        (ButterworthStable { order }, Dynamics::Cycle { rho, omega }) => {
            let (ar, ma) = butterworth_polys(*rho, *omega, *order);
            let mut g = arma_acvf(&ar, &ma, 1.0, max_lag)?;
            g[0] -= butterworth_floor(*rho, *omega, *order);
            Ok(g)
        }
        (Balanced { order }, Dynamics::Cycle { rho, omega }) => Ok(balanced_acvf(*rho, *omega, *order, max_lag)),
        (BalancedStable { order }, Dynamics::Cycle { rho, omega }) => {
            let mut g = balanced_acvf(*rho, *omega, *order, max_lag);
            g[0] -= balanced_floor(*rho, *omega, *order);
            Ok(g)
        }
        (_, d) => {
            let (ar, ma) = d.scalar_polys().ok_or_else(|| Error::InvalidInput("class and dynamics disagree".into()))?;
            arma_acvf(&ar, &ma, 1.0, max_lag)
        }
    }
}

/// Scalar density (unit innovation variance) of a scalar-driven class.
fn class_scalar_density(class: &ComponentClass, dy: &Dynamics, lambda: f64) -> Result<f64> {
    use ComponentClass::*;
    Ok(match (class, dy) {
        (Butterworth { order }, Dynamics::Cycle { rho, omega }) => {
            let (ar, ma) = butterworth_polys(*rho, *omega, *order);
            arma_density(&ar, &ma, lambda)
        }
        (ButterworthStable { order }, Dynamics::Cycle { rho, omega }) => {
            let (ar, ma) = butterworth_polys(*rho, *omega, *order);
            arma_density(&ar, &ma, lambda) - butterworth_floor(*rho, *omega, *order)
        }
        (Balanced { order }, Dynamics::Cycle { rho, omega }) => balanced_density(*rho, *omega, *order, lambda),
        (BalancedStable { order }, Dynamics::Cycle { rho, omega }) => {
            balanced_density(*rho, *omega, *order, lambda) - balanced_floor(*rho, *omega, *order)
        }
        (_, d) => {
            let (ar, ma) = d.scalar_polys().ok_or_else(|| Error::InvalidInput("class and dynamics disagree".into()))?;
            arma_density(&ar, &ma, lambda)
        }
    })
}

/// Autocovariances of the stationary core of component `k` (before any
/// differencing), lags `0..=max_lag`.
pub fn core_acvf(mdl: &ModelSpec, par: &ParamSet, k: usize, max_lag: usize) -> Result<Vec<DMatrix<f64>>> {
    core_acvf_with(mdl, par, k, &par.sigma(k), max_lag)
}

/// [`core_acvf`] with an arbitrary symmetric innovation matrix in place of
/// the component's covariance. The result is linear in `sigma`.
pub fn core_acvf_with(mdl: &ModelSpec, par: &ParamSet, k: usize, sigma: &DMatrix<f64>, max_lag: usize) -> Result<Vec<DMatrix<f64>>> {
    let class = &mdl.components[k].class;
    let dy = &par.dynamics[k];
    if class.is_vector() {
        let (ar, ma) = dy.matrix_polys(mdl.n).ok_or_else(|| Error::InvalidInput("class and dynamics disagree".into()))?;
        varma_acvf(&ar, &ma, sigma, max_lag)
    } else {
        let g = class_scalar_acvf(class, dy, max_lag)?;
        Ok(g.into_iter().map(|v| sigma * v).collect())
    }
}

/// Filter a matrix autocovariance sequence through a scalar polynomial.
pub fn filter_acvf(gamma: &[DMatrix<f64>], delta: &Poly, max_lag: usize) -> Vec<DMatrix<f64>> {
    let c = delta.autocovariance();
    let d = c.len() as isize - 1;
    let n = gamma[0].nrows();
    let get = |h: isize| -> DMatrix<f64> {
        let a = h.unsigned_abs();
        if a >= gamma.len() {
            DMatrix::zeros(n, n)
        } else if h >= 0 {
            gamma[a].clone()
        } else {
            gamma[a].transpose()
        }
    };
    (0..=max_lag as isize)
        .map(|h| {
            let mut acc = DMatrix::zeros(n, n);
            for m in -d..=d {
                acc += get(h + m) * c[m.unsigned_abs()];
            }
            acc
        })
        .collect()
}

/// Autocovariances of component `k` after differencing by every other
/// component's polynomial, lags `0..=max_lag`.
pub fn component_acvf(mdl: &ModelSpec, par: &ParamSet, k: usize, max_lag: usize) -> Result<Vec<DMatrix<f64>>> {
    component_acvf_with(mdl, par, k, &par.sigma(k), max_lag)
}

pub fn component_acvf_with(mdl: &ModelSpec, par: &ParamSet, k: usize, sigma: &DMatrix<f64>, max_lag: usize) -> Result<Vec<DMatrix<f64>>> {
    let delta = mdl.delta_omit(k);
    let core = core_acvf_with(mdl, par, k, sigma, max_lag + delta.degree())?;
    Ok(filter_acvf(&core, &delta, max_lag))
}

/// Autocovariances of the fully differenced latent sum.
pub fn total_acvf(mdl: &ModelSpec, par: &ParamSet, max_lag: usize) -> Result<Vec<DMatrix<f64>>> {
    let n = mdl.n;
    let mut acc = vec![DMatrix::zeros(n, n); max_lag + 1];
    for k in 0..mdl.components.len() {
        for (a, g) in acc.iter_mut().zip(component_acvf(mdl, par, k, max_lag)?) {
            *a += g;
        }
    }
    Ok(acc)
}

/// Spectral density matrix of component `k`'s stationary core at `lambda`.
pub fn core_density(mdl: &ModelSpec, par: &ParamSet, k: usize, lambda: f64) -> Result<DMatrix<Complex64>> {
    let class = &mdl.components[k].class;
    let dy = &par.dynamics[k];
    let sigma = par.sigma(k).map(|v| Complex64::new(v, 0.0));
    if class.is_vector() {
        let (ar, ma) = dy.matrix_polys(mdl.n).ok_or_else(|| Error::InvalidInput("class and dynamics disagree".into()))?;
        let z = Complex64::from_polar(1.0, -lambda);
        let a = ar.eval(z).try_inverse().ok_or_else(|| Error::Unstable("AR polynomial singular on unit circle".into()))?;
        let t = a * ma.eval(z);
        Ok(&t * sigma * t.adjoint())
    } else {
        Ok(sigma * Complex64::new(class_scalar_density(class, dy, lambda)?, 0.0))
    }
}

/// Density of component `k` differenced by the other components'
/// polynomials on the mesh `lambda_m = pi m / grid`, `m = 0..=grid`.
pub fn spectra(mdl: &ModelSpec, par: &ParamSet, k: usize, grid: usize) -> Result<Vec<DMatrix<Complex64>>> {
    let delta = mdl.delta_omit(k);
    (0..=grid)
        .map(|m| {
            let l = PI * m as f64 / grid as f64;
            Ok(core_density(mdl, par, k, l)? * Complex64::new(delta.frf(l).norm_sqr(), 0.0))
        })
        .collect()
}
