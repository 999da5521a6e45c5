//! Model fitting and diagnostics: quasi-Newton maximum likelihood,
//! method-of-moments starting values, residual tests, t statistics,
//! likelihood comparisons and autoregressive spectrum estimates.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::acf::component_acvf_with;
use crate::error::{invalid, Error, Result};
use crate::gauss::lik;
use crate::linalg::gcd_decompose;
use crate::model::ModelSpec;
use crate::param::{par_to_psi, psi_to_par, Constraint, ConstraintMap, ParamSet};
use crate::poly::Poly;

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Stop when every gradient entry is below this.
    pub grad_tol: f64,
    /// Stop when an iteration improves the objective by less than this,
    /// relative to `1 + |f|`.
    pub f_tol: f64,
    pub max_evals: usize,
    /// Compute the finite-difference Hessian at the optimum.
    pub hessian: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { grad_tol: 1e-6, f_tol: 1e-12, max_evals: 10_000, hessian: true }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub grad_norm: f64,
}

fn fd_step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

fn gradient(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], fx: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = fd_step(x[i]);
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        g[i] = match (fp.is_finite(), fm.is_finite()) {
            (true, true) => (fp - fm) / (2.0 * h),
            (true, false) => (fp - fx) / h,
            (false, true) => (fx - fm) / h,
            _ => 0.0,
        };
    }
    g
}

/// Central-difference Hessian.
pub fn numerical_hessian(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let f0 = f(x);
    let mut h = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for i in 0..n {
        let hi = fd_step(x[i]);
        xp[i] = x[i] + hi;
        let fp = f(&xp);
        xp[i] = x[i] - hi;
        let fm = f(&xp);
        xp[i] = x[i];
        h[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in 0..i {
            let hj = fd_step(x[j]);
            let mut corner = |si: f64, sj: f64| {
                xp[i] = x[i] + si * hi;
                xp[j] = x[j] + sj * hj;
                let v = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// BFGS minimization with numerical gradients and backtracking line search.
/// Non-finite objective values are treated as `+inf`.
pub fn bfgs(f: &mut dyn FnMut(&[f64]) -> f64, x0: &[f64], opts: &FitOptions) -> OptimResult {
    let n = x0.len();
    let evals = std::cell::Cell::new(0usize);
    let mut obj = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut x = x0.to_vec();
    let mut fx = obj(&x);
    if n == 0 || !fx.is_finite() {
        return OptimResult { x, f: fx, evaluations: evals.get(), converged: n == 0, grad_norm: 0.0 };
    }
    let mut g = gradient(&mut obj, &x, fx);
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut converged = false;
    let mut stall = 0;
    let inf_norm = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    loop {
        if inf_norm(&g) <= opts.grad_tol {
            converged = true;
            break;
        }
        let gv = DVector::from_column_slice(&g);
        let mut p = -(&hinv * &gv);
        let mut slope = p.dot(&gv);
        if slope >= 0.0 {
            hinv = DMatrix::identity(n, n);
            fresh = true;
            p = -gv.clone();
            slope = p.dot(&gv);
        }
        if fresh {
            let pn = p.amax();
            if pn > 1.0 {
                p /= pn;
                slope /= pn;
            }
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let xt: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a + alpha * b).collect();
            let ft = obj(&xt);
            if ft <= fx + 1e-4 * alpha * slope {
                accepted = Some((xt, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            if fresh {
                break;
            }
            hinv = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };
        let gn = gradient(&mut obj, &xn, fnew);
        let s = DVector::from_iterator(n, xn.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(n, gn.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        if sy > 1e-10 * s.norm() * y.norm() {
            if fresh {
                hinv *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            fresh = false;
        }
        let improvement = fx - fnew;
        x = xn;
        fx = fnew;
        g = gn;
        if improvement <= opts.f_tol * (1.0 + fx.abs()) {
            stall += 1;
            if stall >= 2 {
                converged = true;
                break;
            }
        } else {
            stall = 0;
        }
        if evals.get() >= opts.max_evals {
            break;
        }
    }
    let gn = inf_norm(&g);
    OptimResult { x, f: fx, evaluations: evals.get(), converged, grad_norm: gn }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub eta: Vec<f64>,
    pub psi: Vec<f64>,
    pub par: ParamSet,
    pub divergence: f64,
    /// Hessian of the divergence over the free coordinates (empty if not
    /// requested).
    pub hessian: DMatrix<f64>,
    pub converged: bool,
    pub evaluations: usize,
    pub map: ConstraintMap,
}

/// Check `c psi = b`, naming the first violated row.
pub fn check_constraint(constraint: Option<&Constraint>, psi: &[f64]) -> Result<()> {
    let Some(con) = constraint else { return Ok(()) };
    if con.c.ncols() != psi.len() {
        return Err(Error::Constraint(format!("constraint has {} columns, parameter has {}", con.c.ncols(), psi.len())));
    }
    let r = &con.c * DVector::from_column_slice(psi) - &con.b;
    for (i, v) in r.iter().enumerate() {
        if v.abs() > 1e-8 {
            return Err(Error::Constraint(format!("row {} violated by {:.3e}", i + 1, v)));
        }
    }
    Ok(())
}

/// Maximum likelihood fit over the free coordinates of the constrained
/// pre-parameter. `checkpoint` sees every finite evaluation.
pub fn mle_fit(
    data: &DMatrix<f64>,
    init: &ParamSet,
    constraint: Option<&Constraint>,
    mdl: &ModelSpec,
    opts: &FitOptions,
    mut checkpoint: Option<&mut dyn FnMut(&[f64], f64)>,
) -> Result<FitResult> {
    let psi0 = par_to_psi(init, mdl)?;
    check_constraint(constraint, &psi0)?;
    let map = ConstraintMap::new(constraint, psi0.len())?;
    let eta0 = map.psi_to_eta(&psi0);
    let mut obj = |eta: &[f64]| -> f64 {
        let psi = map.eta_to_psi(eta);
        let v = lik(&psi, mdl, data).unwrap_or(f64::INFINITY);
        if v.is_finite() {
            if let Some(cb) = checkpoint.as_mut() {
                cb(eta, v);
            }
        }
        v
    };
    if !obj(&eta0).is_finite() {
        return Err(Error::NonFiniteStart);
    }
    let res = bfgs(&mut obj, &eta0, opts);
    let hessian = if opts.hessian { numerical_hessian(&mut obj, &res.x) } else { DMatrix::zeros(0, 0) };
    let psi = map.eta_to_psi(&res.x);
    let par = psi_to_par(&psi, mdl)?;
    Ok(FitResult { eta: res.x, psi, par, divergence: res.f, hessian, converged: res.converged, evaluations: res.evaluations, map })
}

/// Largest moment lag used by [`mom_fit`].
pub fn mom_lags(mdl: &ModelSpec) -> usize {
    mdl.full_delta().degree() + 5
}

/// Sample autocovariances `(1/n) sum_t w_{t+h} w_t'`, lags `0..=max_lag`.
pub fn sample_acvf(w: &DMatrix<f64>, max_lag: usize) -> Vec<DMatrix<f64>> {
    let (n, k) = w.shape();
    (0..=max_lag)
        .map(|h| {
            let mut g = DMatrix::zeros(k, k);
            for t in h..n {
                g += w.row(t).transpose() * w.row(t - h);
            }
            g / n as f64
        })
        .collect()
}

fn difference_columns(delta: &Poly, y: &DMatrix<f64>) -> DMatrix<f64> {
    let cols: Vec<Vec<f64>> = (0..y.ncols()).map(|j| delta.filter_valid(y.column(j).as_slice())).collect();
    let rows = cols[0].len();
    DMatrix::from_fn(rows, y.ncols(), |t, j| cols[j][t])
}

/// Method-of-moments covariances with serial parameters held at `init`.
///
/// Regression effects are removed by least squares on the differenced data;
/// each component's covariance is then solved from the linear system
/// matching model and sample autocovariances. The matrices are returned as
/// full-rank generalized Cholesky factors and may be indefinite; pass them
/// through [`crate::param::reduce`] before use.
pub fn mom_fit(data: &DMatrix<f64>, init: &ParamSet, mdl: &ModelSpec) -> Result<ParamSet> {
    if data.iter().any(|v| v.is_nan()) {
        return invalid("method of moments needs complete data");
    }
    if data.shape() != (mdl.t, mdl.n) {
        return invalid("data dimensions do not match the model");
    }
    let delta = mdl.full_delta();
    let n = mdl.n;
    let mut beta = vec![0.0; mdl.num_regressors()];
    let mut resid = data.clone();
    for j in 0..n {
        let regs = &mdl.regressors[j];
        if regs.is_empty() {
            continue;
        }
        let y = delta.filter_valid(data.column(j).as_slice());
        let xs: Vec<Vec<f64>> = regs
            .iter()
            .map(|r| delta.filter_valid(&(1..=mdl.t).map(|t| r.value_at(t as i64)).collect::<Vec<_>>()))
            .collect();
        let x = DMatrix::from_fn(y.len(), regs.len(), |t, r| xs[r][t]);
        let b = x
            .clone()
            .svd(true, true)
            .solve(&DVector::from_vec(y), 1e-12)
            .map_err(|e| Error::Degenerate(format!("regression design: {e}")))?;
        for (r, reg) in regs.iter().enumerate() {
            beta[mdl.beta_index(j, r)] = b[r];
            for t in 0..mdl.t {
                resid[(t, j)] -= b[r] * reg.value_at(t as i64 + 1);
            }
        }
    }
    let w = difference_columns(&delta, &resid);
    let lags = mom_lags(mdl).min(w.nrows().saturating_sub(1));
    let sample = sample_acvf(&w, lags);
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
    let ncomp = mdl.components.len();
    let cols = ncomp * pairs.len();
    let rows = (lags + 1) * n * n;
    let mut design = DMatrix::zeros(rows, cols);
    for k in 0..ncomp {
        for (pi, &(a, b)) in pairs.iter().enumerate() {
            let mut e = DMatrix::zeros(n, n);
            e[(a, b)] = 1.0;
            e[(b, a)] = 1.0;
            let g = component_acvf_with(mdl, init, k, &e, lags)?;
            for h in 0..=lags {
                for i in 0..n {
                    for l in 0..n {
                        design[(((h * n) + i) * n + l, k * pairs.len() + pi)] = g[h][(i, l)];
                    }
                }
            }
        }
    }
    let obs = DVector::from_fn(rows, |r, _| {
        let h = r / (n * n);
        let i = (r / n) % n;
        let l = r % n;
        sample[h][(i, l)]
    });
    let theta = design
        .svd(true, true)
        .solve(&obs, 1e-12)
        .map_err(|e| Error::Degenerate(format!("moment system: {e}")))?;
    let mut covs = Vec::with_capacity(ncomp);
    for k in 0..ncomp {
        let mut s = DMatrix::zeros(n, n);
        for (pi, &(a, b)) in pairs.iter().enumerate() {
            s[(a, b)] = theta[k * pairs.len() + pi];
            s[(b, a)] = theta[k * pairs.len() + pi];
        }
        covs.push(gcd_decompose(&s)?);
    }
    Ok(ParamSet { covs, dynamics: init.dynamics.clone(), beta })
}

/// Multivariate portmanteau test with the small-sample weights
/// `T^2 / (T - h)`. Returns the statistic and its chi-square p-value with
/// `N^2 lag - num_params` degrees of freedom (NaN when that is not positive).
pub fn portmanteau(resids: &DMatrix<f64>, lag: usize, num_params: usize) -> Result<(f64, f64)> {
    let (t, n) = resids.shape();
    if lag == 0 || t <= lag + 1 {
        return invalid("portmanteau lag must be positive and below the sample size");
    }
    let mean = resids.row_mean();
    let mut r = resids.clone();
    for mut row in r.row_iter_mut() {
        row -= &mean;
    }
    let c = sample_acvf(&r, lag);
    let c0inv = c[0].clone().try_inverse().ok_or_else(|| Error::Degenerate("residual covariance singular".into()))?;
    let tf = t as f64;
    let mut stat = 0.0;
    for h in 1..=lag {
        let m = c[h].transpose() * &c0inv * &c[h] * &c0inv;
        stat += m.trace() / (tf - h as f64);
    }
    stat *= tf * tf;
    let dof = (n * n * lag) as f64 - num_params as f64;
    let p = if dof > 0.0 {
        let chi = ChiSquared::new(dof).map_err(|e| Error::InvalidInput(e.to_string()))?;
        chi.sf(stat)
    } else {
        f64::NAN
    };
    Ok((stat, p))
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * x + v)
}

/// Shapiro-Wilk statistic and p-value (Royston's approximation). Samples
/// longer than 5000 are thinned to 5000 evenly spaced order statistics.
pub fn shapiro_wilk(x: &[f64]) -> Result<(f64, f64)> {
    let mut v: Vec<f64> = x.iter().copied().filter(|a| a.is_finite()).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if v.len() > 5000 {
        let len = v.len();
        v = (0..5000).map(|i| v[i * (len - 1) / 4999]).collect();
    }
    let n = v.len();
    if n < 3 {
        return invalid("Shapiro-Wilk needs at least three values");
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let ss: f64 = v.iter().map(|a| (a - mean).powi(2)).sum();
    if ss <= 0.0 {
        return invalid("Shapiro-Wilk sample is constant");
    }
    let norm = Normal::new(0.0, 1.0).unwrap();
    let nf = n as f64;
    let m: Vec<f64> = (1..=n).map(|i| norm.inverse_cdf((i as f64 - 0.375) / (nf + 0.25))).collect();
    let summ2: f64 = m.iter().map(|a| a * a).sum();
    let ssumm2 = summ2.sqrt();
    let u = 1.0 / nf.sqrt();
    let mut a = vec![0.0; n];
    if n == 3 {
        a[2] = 0.5f64.sqrt();
        a[0] = -a[2];
    } else {
        let an = m[n - 1] / ssumm2 + poly_eval(&[0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056], u);
        let (lo, fac) = if n > 5 {
            let an1 = m[n - 2] / ssumm2 + poly_eval(&[0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633], u);
            a[n - 2] = an1;
            a[1] = -an1;
            let fac = ((summ2 - 2.0 * m[n - 1].powi(2) - 2.0 * m[n - 2].powi(2)) / (1.0 - 2.0 * an * an - 2.0 * an1 * an1)).sqrt();
            (2, fac)
        } else {
            let fac = ((summ2 - 2.0 * m[n - 1].powi(2)) / (1.0 - 2.0 * an * an)).sqrt();
            (1, fac)
        };
        a[n - 1] = an;
        a[0] = -an;
        for i in lo..n - lo {
            a[i] = m[i] / fac;
        }
    }
    let num: f64 = a.iter().zip(&v).map(|(c, y)| c * y).sum();
    let w = (num * num / ss).min(1.0);
    if n == 3 {
        let p = (6.0 / PI) * (w.sqrt().asin() - 0.75f64.sqrt().asin());
        return Ok((w, p.max(0.0)));
    }
    let y = (1.0 - w).ln();
    let (z, mu, sd) = if n <= 11 {
        let gamma = -2.273 + 0.459 * nf;
        if y >= gamma {
            return Ok((w, 0.0));
        }
        let z = -(gamma - y).ln();
        let mu = poly_eval(&[0.5440, -0.39978, 0.025054, -6.714e-4], nf);
        let sd = poly_eval(&[1.3822, -0.77857, 0.062767, -0.0020322], nf).exp();
        (z, mu, sd)
    } else {
        let l = nf.ln();
        let mu = poly_eval(&[-1.5861, -0.31082, -0.083751, 0.0038915], l);
        let sd = poly_eval(&[-0.4803, -0.082676, 0.0030302], l).exp();
        (y, mu, sd)
    };
    Ok((w, 1.0 - norm.cdf((z - mu) / sd)))
}

/// Normality p-value for each residual series.
pub fn gauss_check(resids: &DMatrix<f64>) -> Result<Vec<f64>> {
    (0..resids.ncols()).map(|j| shapiro_wilk(resids.column(j).as_slice()).map(|r| r.1)).collect()
}

/// t statistics of the pre-parameter. The divergence is minus twice the log
/// likelihood, so the free-coordinate covariance is `2 H^{-1}`; it is carried
/// to the pre-parameter through the constraint's linear map. A Hessian that
/// is not positive definite yields signed infinities.
pub fn tstats(psi: &[f64], hessian: &DMatrix<f64>, map: &ConstraintMap) -> Vec<f64> {
    let signed_inf = |v: f64| if v < 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
    let Some(ch) = hessian.clone().cholesky() else {
        return psi.iter().map(|&v| signed_inf(v)).collect();
    };
    let v = ch.inverse() * 2.0;
    let cov = &map.a * v * map.a.transpose();
    psi.iter()
        .enumerate()
        .map(|(i, &p)| {
            let s2 = cov[(i, i)];
            if s2 > 0.0 {
                p / s2.sqrt()
            } else if p == 0.0 {
                0.0
            } else {
                signed_inf(p)
            }
        })
        .collect()
}

/// Standard errors of the pre-parameter, `NaN` when the Hessian is not
/// positive definite.
pub fn std_errors(hessian: &DMatrix<f64>, map: &ConstraintMap) -> Vec<f64> {
    match hessian.clone().cholesky() {
        Some(ch) => {
            let cov = &map.a * (ch.inverse() * 2.0) * map.a.transpose();
            (0..cov.nrows()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect()
        }
        None => vec![f64::NAN; map.a.nrows()],
    }
}

/// Likelihood comparison of a nested model against a nesting one:
/// divergence difference and pre-parameter count difference.
pub fn glr(
    data: &DMatrix<f64>,
    psi_nested: &[f64],
    psi_nesting: &[f64],
    mdl_nested: &ModelSpec,
    mdl_nesting: &ModelSpec,
) -> Result<(f64, i64)> {
    let a = lik(psi_nested, mdl_nested, data)?;
    let b = lik(psi_nesting, mdl_nesting, data)?;
    Ok((a - b, psi_nesting.len() as i64 - psi_nested.len() as i64))
}

#[derive(Debug, Clone)]
pub struct ArSpectrum {
    pub order: usize,
    /// Coefficients `c_j` of `1 - sum_j c_j B^j`.
    pub coefs: Vec<f64>,
    pub sigma2: f64,
    /// Frequencies `pi m / grid`, `m = 0..=grid`.
    pub freqs: Vec<f64>,
    pub density: Vec<f64>,
}

/// Autoregressive spectrum of one series: Yule-Walker fits up to a maximum
/// order, the order picked by AIC.
pub fn ar_spectrum(data: &DMatrix<f64>, series: usize, diff: bool, period: usize, grid: usize) -> Result<ArSpectrum> {
    if series >= data.ncols() {
        return invalid("series index out of range");
    }
    let col: Vec<f64> = data.column(series).iter().copied().collect();
    let first = col.iter().position(|v| !v.is_nan());
    let last = col.iter().rposition(|v| !v.is_nan());
    let (Some(first), Some(last)) = (first, last) else {
        return invalid("series has no observations");
    };
    let mut x = col[first..=last].to_vec();
    if x.iter().any(|v| v.is_nan()) {
        return invalid("AR spectrum needs a series without interior gaps");
    }
    if diff {
        x = Poly::difference().filter_valid(&x);
    }
    let n = x.len();
    if n < 4 {
        return invalid("series too short for an AR spectrum");
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    x.iter_mut().for_each(|v| *v -= mean);
    let max_order = ((10.0 * (n as f64).log10()) as usize).max(2 * period).min(n - 2);
    let g: Vec<f64> = (0..=max_order).map(|h| (h..n).map(|t| x[t] * x[t - h]).sum::<f64>() / n as f64).collect();
    if g[0] <= 0.0 {
        return invalid("series has zero variance");
    }
    let mut best = (n as f64 * g[0].ln(), 0usize, Vec::new(), g[0]);
    let mut phi: Vec<f64> = Vec::new();
    let mut v = g[0];
    for p in 1..=max_order {
        let k = (g[p] - phi.iter().enumerate().map(|(j, c)| c * g[p - 1 - j]).sum::<f64>()) / v;
        let prev = phi.clone();
        phi.push(k);
        for j in 0..p - 1 {
            phi[j] = prev[j] - k * prev[p - 2 - j];
        }
        v *= 1.0 - k * k;
        if v <= 0.0 {
            break;
        }
        let aic = n as f64 * v.ln() + 2.0 * p as f64;
        if aic < best.0 {
            best = (aic, p, phi.clone(), v);
        }
    }
    let (_, order, coefs, sigma2) = best;
    let ar = crate::param::minus_poly(&coefs);
    let freqs: Vec<f64> = (0..=grid).map(|m| PI * m as f64 / grid.max(1) as f64).collect();
    let density = freqs.iter().map(|&l| sigma2 / ar.frf(l).norm_sqr()).collect();
    Ok(ArSpectrum { order, coefs, sigma2, freqs, density })
}
