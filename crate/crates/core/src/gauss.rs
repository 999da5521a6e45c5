//! Gaussian likelihood, casting (imputation, forecasting, backcasting) and
//! simulation.
//!
//! The engine runs a multivariate Durbin-Levinson recursion over the
//! differenced process and applies the resulting prediction-error operator to
//! the data and to the columns of the differencing matrix that touch missing
//! level values. Missing values are then estimated by generalized least
//! squares, which gives the conditional expectation for stationary data and
//! the usual diffuse treatment of initial values for differenced data.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::acf::{self, balanced_polys, butterworth_polys, canonize};
use crate::error::{invalid, Error, Result};
use crate::model::{ComponentClass, ModelSpec};
use crate::param::{psi_to_par, Dynamics, ParamSet};
use crate::poly::Poly;

/// Casts over an (optionally extended) sample.
#[derive(Debug, Clone)]
pub struct CastResult {
    /// Sample with every missing entry replaced by its cast. Row `e`
    /// corresponds to original time `e - span`.
    pub filled: DMatrix<f64>,
    pub span: usize,
    /// `(row of filled, series)` for each cast coordinate, time-major.
    pub coords: Vec<(usize, usize)>,
    /// Error covariance between cast coordinates (empty on the fast path).
    pub cov: DMatrix<f64>,
}

impl CastResult {
    /// Error variance of the entry at row `e`, series `j` (zero when observed).
    pub fn variance(&self, e: usize, j: usize) -> f64 {
        self.position(e, j).map(|c| self.cov.get((c, c)).copied().unwrap_or(0.0)).unwrap_or(0.0)
    }

    pub fn position(&self, e: usize, j: usize) -> Option<usize> {
        self.coords.binary_search(&(e, j)).ok()
    }

    /// Error covariance between two entries, zero if either was observed.
    pub fn covariance(&self, e1: usize, j1: usize, e2: usize, j2: usize) -> f64 {
        match (self.position(e1, j1), self.position(e2, j2)) {
            (Some(a), Some(b)) if self.cov.nrows() > 0 => self.cov[(a, b)],
            _ => 0.0,
        }
    }

    /// Rows of `filled` containing at least one cast.
    pub fn cast_times(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.coords.iter().map(|c| c.0).collect();
        t.dedup();
        t
    }

    /// Dense `N x len x N x len` error covariance over [`Self::cast_times`],
    /// flattened with index `((a * len + s) * n + b) * len + u`.
    pub fn cov4(&self) -> (Vec<usize>, Vec<f64>) {
        let times = self.cast_times();
        let n = self.filled.ncols();
        let len = times.len();
        let mut out = vec![0.0; n * len * n * len];
        for (s, &e1) in times.iter().enumerate() {
            for (u, &e2) in times.iter().enumerate() {
                for a in 0..n {
                    for b in 0..n {
                        out[((a * len + s) * n + b) * len + u] = self.covariance(e1, a, e2, b);
                    }
                }
            }
        }
        (times, out)
    }
}

/// Gaussian divergence (minus twice the log likelihood without the
/// `2 pi` constant) and its ingredients.
#[derive(Debug, Clone)]
pub struct LikResult {
    pub divergence: f64,
    pub log_det: f64,
    pub quad: f64,
    /// Standardized one-step prediction errors of the differenced data with
    /// casts filled in, one row per differenced time.
    pub residuals: DMatrix<f64>,
}

// small row-major dense helpers for the recursion

fn mm(a: &[f64], b: &[f64], n: usize, out: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += a[i * n + k] * b[k * n + j];
            }
            out[i * n + j] = s;
        }
    }
}

fn transpose(a: &[f64], n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

fn chol_small(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Some(l)
}

fn forward_solve(l: &[f64], b: &mut [f64], n: usize) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

fn spd_inverse(l: &[f64], n: usize) -> Vec<f64> {
    let mut inv = vec![0.0; n * n];
    for c in 0..n {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        forward_solve(l, &mut e, n);
        // back substitution with l'
        for i in (0..n).rev() {
            let mut s = e[i];
            for k in i + 1..n {
                s -= l[k * n + i] * e[k];
            }
            e[i] = s / l[i * n + i];
        }
        for r in 0..n {
            inv[r * n + c] = e[r];
        }
    }
    inv
}

/// Multivariate Durbin-Levinson state: order-`t` forward and backward
/// predictor coefficients with their error covariances.
struct Levinson<'a> {
    gamma: Vec<Vec<f64>>,
    n: usize,
    fwd: Vec<f64>,
    bwd: Vec<f64>,
    v: Vec<f64>,
    vb: Vec<f64>,
    t: usize,
    _marker: std::marker::PhantomData<&'a ()>,
}

impl<'a> Levinson<'a> {
    fn new(acvf: &'a [DMatrix<f64>]) -> Self {
        let n = acvf[0].nrows();
        let gamma: Vec<Vec<f64>> =
            acvf.iter().map(|g| (0..n * n).map(|i| g[(i / n, i % n)]).collect()).collect();
        let v = gamma[0].clone();
        Levinson { gamma, n, fwd: Vec::new(), bwd: Vec::new(), vb: v.clone(), v, t: 0, _marker: Default::default() }
    }

    /// Forward coefficient `Phi_{t, k}`, `k = 1..=t`.
    fn phi(&self, k: usize) -> &[f64] {
        let nn = self.n * self.n;
        &self.fwd[(k - 1) * nn..k * nn]
    }

    fn advance(&mut self) -> Result<()> {
        let n = self.n;
        let nn = n * n;
        let t = self.t;
        let mut delta = self.gamma[t + 1].clone();
        let mut tmp = vec![0.0; nn];
        for k in 1..=t {
            mm(self.phi(k), &self.gamma[t + 1 - k], n, &mut tmp);
            for i in 0..nn {
                delta[i] -= tmp[i];
            }
        }
        let lv = chol_small(&self.v, n).ok_or_else(|| Error::Degenerate(format!("prediction error covariance at step {t}")))?;
        let lvb = chol_small(&self.vb, n).ok_or_else(|| Error::Degenerate(format!("backward error covariance at step {t}")))?;
        let vinv = spd_inverse(&lv, n);
        let vbinv = spd_inverse(&lvb, n);
        let mut a = vec![0.0; nn];
        mm(&delta, &vbinv, n, &mut a);
        let mut ab = vec![0.0; nn];
        mm(&transpose(&delta, n), &vinv, n, &mut ab);
        let mut nf = vec![0.0; (t + 1) * nn];
        let mut nb = vec![0.0; (t + 1) * nn];
        for k in 1..=t {
            mm(&a, &self.bwd[(t - k) * nn..(t - k + 1) * nn], n, &mut tmp);
            for i in 0..nn {
                nf[(k - 1) * nn + i] = self.fwd[(k - 1) * nn + i] - tmp[i];
            }
            mm(&ab, &self.fwd[(t - k) * nn..(t - k + 1) * nn], n, &mut tmp);
            for i in 0..nn {
                nb[(k - 1) * nn + i] = self.bwd[(k - 1) * nn + i] - tmp[i];
            }
        }
        nf[t * nn..].copy_from_slice(&a);
        nb[t * nn..].copy_from_slice(&ab);
        // V_{t+1} = V_t - A Delta',  Vb_{t+1} = Vb_t - Ab Delta
        let mut upd = vec![0.0; nn];
        mm(&a, &transpose(&delta, n), n, &mut upd);
        let mut updb = vec![0.0; nn];
        mm(&ab, &delta, n, &mut updb);
        for i in 0..n {
            for j in 0..n {
                let s = 0.5 * (upd[i * n + j] + upd[j * n + i]);
                let sb = 0.5 * (updb[i * n + j] + updb[j * n + i]);
                self.v[i * n + j] -= s;
                self.vb[i * n + j] -= sb;
            }
        }
        for i in 0..n {
            for j in 0..i {
                let s = 0.5 * (self.v[i * n + j] + self.v[j * n + i]);
                self.v[i * n + j] = s;
                self.v[j * n + i] = s;
                let sb = 0.5 * (self.vb[i * n + j] + self.vb[j * n + i]);
                self.vb[i * n + j] = sb;
                self.vb[j * n + i] = sb;
            }
        }
        self.fwd = nf;
        self.bwd = nb;
        self.t += 1;
        Ok(())
    }
}

/// Core engine on level data: `acvf` describes the process `delta(B) x_t`.
fn engine(acvf: &[DMatrix<f64>], delta: &Poly, levels: &DMatrix<f64>, want_cov: bool) -> Result<(DMatrix<f64>, Vec<(usize, usize)>, DMatrix<f64>, LikResult)> {
    let (tn, n) = levels.shape();
    let d = delta.degree();
    if tn <= d {
        return invalid("sample shorter than the differencing order");
    }
    let nd = tn - d;
    if acvf.len() < nd {
        return invalid(format!("need {nd} autocovariance lags, got {}", acvf.len()));
    }
    if acvf[0].nrows() != n {
        return invalid("autocovariance dimension differs from data");
    }
    let dc = &delta.0;
    let mut coords = Vec::new();
    for t in 0..tn {
        for j in 0..n {
            if levels[(t, j)].is_nan() {
                coords.push((t, j));
            }
        }
    }
    let m = coords.len();
    let mut w0 = vec![0.0; nd * n];
    for t in 0..nd {
        for j in 0..n {
            let mut s = 0.0;
            for (i, c) in dc.iter().enumerate() {
                let x = levels[(t + d - i, j)];
                if !x.is_nan() {
                    s += c * x;
                }
            }
            w0[t * n + j] = s;
        }
    }
    // support of each missing column on the differenced time axis
    let support: Vec<(usize, usize)> =
        coords.iter().map(|&(s, _)| (s.saturating_sub(d), s.min(nd - 1))).collect();
    let col_val = |c: usize, u: usize| -> f64 {
        let (s, _) = coords[c];
        dc[u + d - s]
    };
    let len = nd * n;
    let mut z0 = vec![0.0; len];
    let mut zbuf = vec![0.0; len * m];
    let mut lev = Levinson::new(&acvf[..nd]);
    let mut log_det = 0.0;
    let mut e = vec![0.0; n];
    for t in 0..nd {
        let lv = chol_small(&lev.v, n).ok_or_else(|| Error::Degenerate(format!("prediction error covariance at time {t}")))?;
        for j in 0..n {
            log_det += 2.0 * lv[j * n + j].ln();
        }
        // data column
        e.copy_from_slice(&w0[t * n..(t + 1) * n]);
        for k in 1..=t {
            let phi = lev.phi(k);
            let past = &w0[(t - k) * n..(t - k + 1) * n];
            for i in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += phi[i * n + l] * past[l];
                }
                e[i] -= s;
            }
        }
        forward_solve(&lv, &mut e, n);
        z0[t * n..(t + 1) * n].copy_from_slice(&e);
        // sparse columns
        for c in 0..m {
            let (a, b) = support[c];
            if t < a {
                continue;
            }
            let j = coords[c].1;
            e.iter_mut().for_each(|x| *x = 0.0);
            if t <= b {
                e[j] = col_val(c, t);
            }
            for u in a..=b.min(t.saturating_sub(1)) {
                if u >= t {
                    break;
                }
                let phi = lev.phi(t - u);
                let val = col_val(c, u);
                for i in 0..n {
                    e[i] -= phi[i * n + j] * val;
                }
            }
            forward_solve(&lv, &mut e, n);
            zbuf[c * len + t * n..c * len + (t + 1) * n].copy_from_slice(&e);
        }
        if t + 1 < nd {
            lev.advance()?;
        }
    }
    let z0v = DVector::from_vec(z0);
    let mut filled = levels.clone();
    let (resid, quad, logdet_g, cov) = if m == 0 {
        let q = z0v.norm_squared();
        (z0v, q, 0.0, DMatrix::zeros(0, 0))
    } else {
        let zm = DMatrix::from_vec(len, m, zbuf);
        let g = zm.tr_mul(&zm);
        let rhs = zm.tr_mul(&z0v);
        let ch = g.cholesky().ok_or_else(|| Error::Degenerate("missing values are not identified by the observed data".into()))?;
        let ldg = 2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let xhat = -ch.solve(&rhs);
        for (c, &(t, j)) in coords.iter().enumerate() {
            filled[(t, j)] = xhat[c];
        }
        let r = &z0v + &zm * &xhat;
        let q = r.norm_squared();
        let cov = if want_cov { ch.inverse() } else { DMatrix::zeros(0, 0) };
        (r, q, ldg, cov)
    };
    let residuals = DMatrix::from_row_slice(nd, n, resid.as_slice());
    let lik = LikResult { divergence: log_det + quad + logdet_g, log_det: log_det + logdet_g, quad, residuals };
    Ok((filled, coords, cov, lik))
}

fn extend(data: &DMatrix<f64>, span: usize) -> DMatrix<f64> {
    let (t, n) = data.shape();
    let mut out = DMatrix::from_element(t + 2 * span, n, f64::NAN);
    out.view_mut((span, 0), (t, n)).copy_from(data);
    out
}

/// Casts and likelihood for a stationary series with missing entries
/// (`NaN`), extended by `span` cast rows at each end.
pub fn dl_midcast(acvf: &[DMatrix<f64>], data: &DMatrix<f64>, span: usize) -> Result<(CastResult, LikResult)> {
    cast_levels(acvf, &Poly::one(), data, span)
}

/// Casts without error covariances.
pub fn cast(acvf: &[DMatrix<f64>], data: &DMatrix<f64>, span: usize) -> Result<DMatrix<f64>> {
    let ext = extend(data, span);
    Ok(engine(acvf, &Poly::one(), &ext, false)?.0)
}

/// Forecasts `horizon` steps past the end of a stationary series.
pub fn forecast(acvf: &[DMatrix<f64>], data: &DMatrix<f64>, horizon: usize) -> Result<DMatrix<f64>> {
    let (t, n) = data.shape();
    let mut ext = DMatrix::from_element(t + horizon, n, f64::NAN);
    ext.view_mut((0, 0), (t, n)).copy_from(data);
    let filled = engine(acvf, &Poly::one(), &ext, false)?.0;
    Ok(filled.rows(t, horizon).into_owned())
}

/// Casts and likelihood for level data whose `delta`-differences have
/// autocovariance `acvf`.
pub fn cast_levels(acvf: &[DMatrix<f64>], delta: &Poly, data: &DMatrix<f64>, span: usize) -> Result<(CastResult, LikResult)> {
    let ext = extend(data, span);
    let (filled, coords, cov, lik) = engine(acvf, delta, &ext, true)?;
    Ok((CastResult { filled, span, coords, cov }, lik))
}

/// Regression mean at original times `1 - span ..= T + span`.
pub fn regression_mean(mdl: &ModelSpec, beta: &[f64], span: usize) -> DMatrix<f64> {
    let rows = mdl.t + 2 * span;
    let mut out = DMatrix::zeros(rows, mdl.n);
    for j in 0..mdl.n {
        for (r, reg) in mdl.regressors[j].iter().enumerate() {
            let b = beta[mdl.beta_index(j, r)];
            for e in 0..rows {
                out[(e, j)] += b * reg.value_at(e as i64 + 1 - span as i64);
            }
        }
    }
    out
}

/// Sum of the fixed effects carrying `label` for one series, at original
/// times `1 - span ..= T + span`.
pub fn fixed_effect(mdl: &ModelSpec, beta: &[f64], series: usize, label: &str, span: usize) -> Vec<f64> {
    let rows = mdl.t + 2 * span;
    let mut out = vec![0.0; rows];
    for (r, reg) in mdl.regressors[series].iter().enumerate() {
        if reg.label == label {
            let b = beta[mdl.beta_index(series, r)];
            for (e, o) in out.iter_mut().enumerate() {
                *o += b * reg.value_at(e as i64 + 1 - span as i64);
            }
        }
    }
    out
}

fn check_data(mdl: &ModelSpec, data: &DMatrix<f64>) -> Result<()> {
    if data.shape() != (mdl.t, mdl.n) {
        return invalid(format!("data is {}x{} but model expects {}x{}", data.nrows(), data.ncols(), mdl.t, mdl.n));
    }
    Ok(())
}

/// Data with the regression mean removed (missing entries stay missing).
pub fn demean(mdl: &ModelSpec, par: &ParamSet, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_data(mdl, data)?;
    Ok(data - regression_mean(mdl, &par.beta, 0))
}

/// Casts of the de-meaned series over the sample extended by `span`.
pub fn midcast(mdl: &ModelSpec, par: &ParamSet, data: &DMatrix<f64>, span: usize) -> Result<(CastResult, LikResult)> {
    let y = demean(mdl, par, data)?;
    let delta = mdl.full_delta();
    let nd = mdl.t + 2 * span - delta.degree();
    let acvf = acf::total_acvf(mdl, par, nd.saturating_sub(1))?;
    cast_levels(&acvf, &delta, &y, span)
}

pub fn lik_par(mdl: &ModelSpec, par: &ParamSet, data: &DMatrix<f64>) -> Result<LikResult> {
    midcast_lik_only(mdl, par, data)
}

fn midcast_lik_only(mdl: &ModelSpec, par: &ParamSet, data: &DMatrix<f64>) -> Result<LikResult> {
    let y = demean(mdl, par, data)?;
    let delta = mdl.full_delta();
    let nd = mdl.t - delta.degree();
    let acvf = acf::total_acvf(mdl, par, nd.saturating_sub(1))?;
    Ok(engine(&acvf, &delta, &y, false)?.3)
}

/// Divergence at a pre-parameter vector.
pub fn lik(psi: &[f64], mdl: &ModelSpec, data: &DMatrix<f64>) -> Result<f64> {
    let par = psi_to_par(psi, mdl)?;
    Ok(midcast_lik_only(mdl, &par, data)?.divergence)
}

/// Standardized residuals of the differenced, de-meaned data and the model
/// autocovariances used to compute them.
pub fn resid(mdl: &ModelSpec, par: &ParamSet, data: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    let y = demean(mdl, par, data)?;
    let delta = mdl.full_delta();
    let nd = mdl.t - delta.degree();
    let acvf = acf::total_acvf(mdl, par, nd.saturating_sub(1))?;
    let lik = engine(&acvf, &delta, &y, false)?.3;
    Ok((lik.residuals, acvf))
}

/// Whittle approximation to the divergence over the Fourier frequencies of
/// the differenced, de-meaned data (which must be complete).
pub fn whittle(psi: &[f64], mdl: &ModelSpec, data: &DMatrix<f64>) -> Result<f64> {
    let par = psi_to_par(psi, mdl)?;
    let y = demean(mdl, &par, data)?;
    if y.iter().any(|v| v.is_nan()) {
        return invalid("Whittle approximation needs complete data");
    }
    let delta = mdl.full_delta();
    let n = mdl.n;
    let cols: Vec<Vec<f64>> = (0..n).map(|j| delta.filter_valid(y.column(j).as_slice())).collect();
    let nd = cols[0].len();
    let mut total = 0.0;
    for m in 0..nd {
        let lam = 2.0 * PI * m as f64 / nd as f64;
        let mut dft = DVector::<Complex64>::zeros(n);
        for (j, col) in cols.iter().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for (t, v) in col.iter().enumerate() {
                s += Complex64::from_polar(*v, -lam * t as f64);
            }
            dft[j] = s;
        }
        let per = &dft * dft.adjoint() / Complex64::new(nd as f64, 0.0);
        let mut f = DMatrix::<Complex64>::zeros(n, n);
        for k in 0..mdl.components.len() {
            let w = mdl.delta_omit(k).frf(lam).norm_sqr();
            f += acf::core_density(mdl, &par, k, lam)? * Complex64::new(w, 0.0);
        }
        let ch = f.clone().cholesky().ok_or_else(|| Error::Degenerate(format!("density singular at frequency {lam:.4}")))?;
        let ld: f64 = 2.0 * ch.l().diagonal().iter().map(|v| v.re.ln()).sum::<f64>();
        let tr = ch.solve(&per).trace().re;
        total += ld + tr;
    }
    Ok(total)
}

/// ARMA representation `(ar, ma, innovation scale)` used for simulation of
/// scalar-driven classes.
fn scalar_rep(class: &ComponentClass, dy: &Dynamics) -> Result<(Poly, Poly, f64)> {
    use ComponentClass::*;
    match (class, dy) {
        (Butterworth { order }, Dynamics::Cycle { rho, omega }) => {
            let (ar, ma) = butterworth_polys(*rho, *omega, *order);
            Ok((ar, ma, 1.0))
        }
        (ButterworthStable { order }, Dynamics::Cycle { rho, omega }) => {
            let (ar, ma) = butterworth_polys(*rho, *omega, *order);
            let c = canonize(&ar, &ma, 1.0)?;
            Ok((ar, c.ma, c.sigma2))
        }
        (Balanced { order }, Dynamics::Cycle { rho, omega }) => balanced_polys(*rho, *omega, *order),
        (BalancedStable { order }, Dynamics::Cycle { rho, omega }) => {
            let (ar, ma, s2) = balanced_polys(*rho, *omega, *order)?;
            let c = canonize(&ar, &ma, s2)?;
            Ok((ar, c.ma, c.sigma2))
        }
        (_, d) => {
            let (ar, ma) = d.scalar_polys().ok_or_else(|| Error::InvalidInput("class and dynamics disagree".into()))?;
            Ok((ar, ma, 1.0))
        }
    }
}

/// Simulate `t` observations: each component's stationary core is run
/// through its ARMA recursion from zero after `burn` discarded steps, then
/// integrated through its differencing polynomial from zero initial values.
/// The regression mean is added last.
pub fn simulate(mdl: &ModelSpec, par: &ParamSet, t: usize, burn: usize, seed: u64) -> Result<DMatrix<f64>> {
    let n = mdl.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = t + burn;
    let mut out = DMatrix::<f64>::zeros(t, n);
    for (k, comp) in mdl.components.iter().enumerate() {
        let g = &par.covs[k];
        let r = g.l.ncols();
        let load = &g.l * DMatrix::from_diagonal(&g.d.map(|v| v.max(0.0).sqrt()));
        let mut eps = DMatrix::<f64>::zeros(total, n);
        for s in 0..total {
            let z = DVector::from_iterator(r, (0..r).map(|_| StandardNormal.sample(&mut rng)));
            eps.set_row(s, &(&load * z).transpose());
        }
        let core = if comp.class.is_vector() {
            let (ar, ma) = par.dynamics[k]
                .matrix_polys(n)
                .ok_or_else(|| Error::InvalidInput("class and dynamics disagree".into()))?;
            let mut u = DMatrix::<f64>::zeros(total, n);
            for s in 0..total {
                let mut v = DVector::<f64>::zeros(n);
                for (i, b) in ma.0.iter().enumerate() {
                    if i <= s {
                        v += b * eps.row(s - i).transpose();
                    }
                }
                for (i, a) in ar.0.iter().enumerate().skip(1) {
                    if i <= s {
                        v -= a * u.row(s - i).transpose();
                    }
                }
                u.set_row(s, &v.transpose());
            }
            u
        } else {
            let (ar, ma, s2) = scalar_rep(&comp.class, &par.dynamics[k])?;
            let scale = s2.max(0.0).sqrt();
            let mut u = DMatrix::<f64>::zeros(total, n);
            for j in 0..n {
                for s in 0..total {
                    let mut v = 0.0;
                    for (i, b) in ma.0.iter().enumerate() {
                        if i <= s {
                            v += b * eps[(s - i, j)] * scale;
                        }
                    }
                    for (i, a) in ar.0.iter().enumerate().skip(1) {
                        if i <= s {
                            v -= a * u[(s - i, j)];
                        }
                    }
                    u[(s, j)] = v;
                }
            }
            u
        };
        let dc = &comp.delta.0;
        let mut sk = DMatrix::<f64>::zeros(t, n);
        for j in 0..n {
            for s in 0..t {
                let mut v = core[(s + burn, j)];
                for (i, c) in dc.iter().enumerate().skip(1) {
                    if i <= s {
                        v -= c * sk[(s - i, j)];
                    }
                }
                sk[(s, j)] = v;
            }
        }
        out += sk;
    }
    let reg = regression_mean(&ModelSpec { t, ..mdl.clone() }, &par.beta, 0);
    if mdl.t == t {
        out += reg;
    } else if mdl.num_regressors() > 0 {
        return invalid("regression mean needs the model's sample length");
    }
    Ok(out)
}

/// Point casts with plus and minus two standard error bands.
#[derive(Debug, Clone)]
pub struct ExtractionTriple {
    pub lower: DMatrix<f64>,
    pub point: DMatrix<f64>,
    pub upper: DMatrix<f64>,
}

/// Data with casts merged in and regression effects restored, over the
/// extended sample `1 - span ..= T + span`.
pub fn cast_extract(mdl: &ModelSpec, par: &ParamSet, data: &DMatrix<f64>, cast: &CastResult) -> Result<ExtractionTriple> {
    check_data(mdl, data)?;
    let span = cast.span;
    let reg = regression_mean(mdl, &par.beta, span);
    let rows = mdl.t + 2 * span;
    if cast.filled.nrows() != rows {
        return invalid("cast result does not match data length");
    }
    let mut point = &cast.filled + &reg;
    let mut lower = point.clone();
    let mut upper = point.clone();
    for e in 0..rows {
        for j in 0..mdl.n {
            let inside = e >= span && e < span + mdl.t;
            if inside && !data[(e - span, j)].is_nan() {
                point[(e, j)] = data[(e - span, j)];
                lower[(e, j)] = point[(e, j)];
                upper[(e, j)] = point[(e, j)];
            } else {
                let sd = cast.variance(e, j).max(0.0).sqrt();
                lower[(e, j)] = point[(e, j)] - 2.0 * sd;
                upper[(e, j)] = point[(e, j)] + 2.0 * sd;
            }
        }
    }
    Ok(ExtractionTriple { lower, point, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acf::arma_acvf;
    use crate::linalg::block_toeplitz;

    fn ar1_acvf(phi: f64, len: usize) -> Vec<DMatrix<f64>> {
        arma_acvf(&Poly(vec![1.0, -phi]), &Poly::one(), 1.0, len).unwrap().into_iter().map(|g| DMatrix::from_element(1, 1, g)).collect()
    }

    #[test]
    fn complete_data_matches_dense() {
        let acvf = ar1_acvf(0.6, 10);
        let data = DMatrix::from_column_slice(6, 1, &[0.3, -1.0, 0.5, 2.0, 0.1, -0.4]);
        let (_, lik) = dl_midcast(&acvf, &data, 0).unwrap();
        let g = block_toeplitz(&acvf, 6);
        let ch = g.clone().cholesky().unwrap();
        let x = DVector::from_column_slice(data.as_slice());
        let dense = 2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() + x.dot(&ch.solve(&x));
        assert!((lik.divergence - dense).abs() < 1e-10);
    }

    #[test]
    fn all_missing_returns_model() {
        let acvf = ar1_acvf(0.5, 5);
        let data = DMatrix::from_element(4, 1, f64::NAN);
        let (c, lik) = dl_midcast(&acvf, &data, 0).unwrap();
        assert!(c.filled.iter().all(|v| v.abs() < 1e-12));
        let g = block_toeplitz(&acvf, 4);
        assert!((&c.cov - g).abs().max() < 1e-10);
        assert!(lik.divergence.abs() < 1e-10);
    }

    #[test]
    fn ar1_one_step_forecast() {
        let acvf = ar1_acvf(0.7, 20);
        let data = DMatrix::from_column_slice(5, 1, &[0.1, 0.4, -0.3, 0.9, 1.5]);
        let f = forecast(&acvf, &data, 3).unwrap();
        assert!((f[(0, 0)] - 0.7 * 1.5).abs() < 1e-10);
        assert!((f[(2, 0)] - 0.343 * 1.5).abs() < 1e-10);
    }

    #[test]
    fn random_walk_midcast_interpolates() {
        let acvf = vec![DMatrix::from_element(1, 1, 1.0); 1]
            .into_iter()
            .chain(std::iter::repeat_n(DMatrix::zeros(1, 1), 10))
            .collect::<Vec<_>>();
        let data = DMatrix::from_column_slice(5, 1, &[1.0, 2.0, f64::NAN, 4.0, 3.0]);
        let (c, _) = cast_levels(&acvf, &Poly::difference(), &data, 0).unwrap();
        assert!((c.filled[(2, 0)] - 3.0).abs() < 1e-10);
        assert!((c.variance(2, 0) - 0.5).abs() < 1e-10);
    }
}
