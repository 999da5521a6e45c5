//! Signal extraction: exact finite-sample filter matrices, truncated
//! Wiener-Kolmogorov filtering of cast-extended series, ad hoc filters,
//! frequency responses, filter embedding, X-11 style filters and additive
//! publication tables.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::acf::{core_acvf, core_density, filter_acvf, total_acvf};
use crate::error::{invalid, Error, Result};
use crate::gauss::{midcast, regression_mean, CastResult, ExtractionTriple};
use crate::linalg::{block_toeplitz, symmetrize};
use crate::model::{ModelSpec, TREND_LABEL};
use crate::param::ParamSet;
use crate::poly::{ub_generator, MatPoly, Poly};

/// Filter `sum_i coeffs[i] B^(i - shift)`: index `shift` holds the lag-zero
/// coefficient, lower indices weight future values.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterKernel {
    pub coeffs: Vec<DMatrix<f64>>,
    pub shift: usize,
}

impl FilterKernel {
    pub fn new(coeffs: Vec<DMatrix<f64>>, shift: usize) -> Result<Self> {
        if coeffs.is_empty() {
            return invalid("filter needs at least one coefficient");
        }
        if shift >= coeffs.len() {
            return invalid("filter shift must index a coefficient");
        }
        let n = coeffs[0].nrows();
        if coeffs.iter().any(|c| c.shape() != (n, n)) {
            return invalid("filter coefficients must be square and of equal size");
        }
        Ok(FilterKernel { coeffs, shift })
    }

    pub fn scalar(coeffs: &[f64], shift: usize) -> Result<Self> {
        FilterKernel::new(coeffs.iter().map(|&c| DMatrix::from_element(1, 1, c)).collect(), shift)
    }

    pub fn identity(n: usize) -> Self {
        FilterKernel { coeffs: vec![DMatrix::identity(n, n)], shift: 0 }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].nrows()
    }

    /// Number of future values used.
    pub fn lead(&self) -> usize {
        self.shift
    }

    /// Number of past values used.
    pub fn lag(&self) -> usize {
        self.len() - 1 - self.shift
    }

    /// Coefficient of `B^h`, zero outside the support.
    pub fn at(&self, h: i64) -> DMatrix<f64> {
        let i = h + self.shift as i64;
        if i < 0 || i >= self.len() as i64 {
            DMatrix::zeros(self.dim(), self.dim())
        } else {
            self.coeffs[i as usize].clone()
        }
    }

    /// Scalar coefficients of a one-dimensional kernel.
    pub fn scalar_coeffs(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c[(0, 0)]).collect()
    }

    /// Sum of the coefficients, the response at frequency zero.
    pub fn sum(&self) -> DMatrix<f64> {
        self.coeffs.iter().fold(DMatrix::zeros(self.dim(), self.dim()), |a, c| a + c)
    }

    pub fn frf(&self, lambda: f64) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut out = DMatrix::<Complex64>::zeros(n, n);
        for (i, c) in self.coeffs.iter().enumerate() {
            let h = i as f64 - self.shift as f64;
            let z = Complex64::from_polar(1.0, -lambda * h);
            out += c.map(|v| Complex64::new(v, 0.0)) * z;
        }
        out
    }

    /// Filter a `T x N` series; outputs lacking full support are `NaN`.
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (t, n) = x.shape();
        if n != self.dim() {
            return invalid("series dimension differs from the filter");
        }
        let mut out = DMatrix::from_element(t, n, f64::NAN);
        for s in self.lag()..t.saturating_sub(self.lead()) {
            let mut acc = DVector::zeros(n);
            for (i, c) in self.coeffs.iter().enumerate() {
                let src = s + self.shift - i;
                acc += c * x.row(src).transpose();
            }
            out.set_row(s, &acc.transpose());
        }
        Ok(out)
    }

    /// CSV with a `m,c,N` header line followed by `lag,row,col,value`
    /// records (1-based rows and columns, lag is the power of `B`).
    pub fn to_csv(&self) -> String {
        let mut s = format!("m,c,N\n{},{},{}\nlag,row,col,value\n", self.len(), self.shift, self.dim());
        for (i, c) in self.coeffs.iter().enumerate() {
            let lag = i as i64 - self.shift as i64;
            for r in 0..self.dim() {
                for k in 0..self.dim() {
                    s.push_str(&format!("{},{},{},{}\n", lag, r + 1, k + 1, crate::cli::fmt_num(c[(r, k)])));
                }
            }
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let bad = |m: &str| Error::Parse(format!("filter csv: {m}"));
        lines.next().ok_or_else(|| bad("missing header"))?;
        let dims: Vec<usize> = lines
            .next()
            .ok_or_else(|| bad("missing dimensions"))?
            .split(',')
            .map(|f| f.trim().parse::<usize>().map_err(|_| bad("dimensions")))
            .collect::<Result<_>>()?;
        if dims.len() != 3 {
            return Err(bad("dimension line needs m,c,N"));
        }
        let (m, c, n) = (dims[0], dims[1], dims[2]);
        lines.next().ok_or_else(|| bad("missing record header"))?;
        let mut coeffs = vec![DMatrix::zeros(n, n); m];
        for line in lines {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(bad(line));
            }
            let lag: i64 = f[0].parse().map_err(|_| bad(line))?;
            let r: usize = f[1].parse().map_err(|_| bad(line))?;
            let k: usize = f[2].parse().map_err(|_| bad(line))?;
            let v: f64 = f[3].parse().map_err(|_| bad(line))?;
            let i = lag + c as i64;
            if i < 0 || i as usize >= m || r == 0 || k == 0 || r > n || k > n {
                return Err(bad(line));
            }
            coeffs[i as usize][(r - 1, k - 1)] = v;
        }
        FilterKernel::new(coeffs, c)
    }
}

/// Row-stack a scalar series into blocks of `s` consecutive values. A
/// trailing partial block is dropped.
pub fn embed(x: &[f64], s: usize) -> DMatrix<f64> {
    let rows = x.len() / s.max(1);
    DMatrix::from_fn(rows, s, |r, j| x[r * s + j])
}

/// Inverse of [`embed`].
pub fn deembed(x: &DMatrix<f64>) -> Vec<f64> {
    x.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect()
}

/// Embed a scalar filter as a matrix filter acting on blocks of `s`.
/// Coefficient `(j, k)` of the lag-`h` matrix is the scalar coefficient of
/// lag `j - k + s h`.
pub fn hi_to_low(filter: &FilterKernel, s: usize) -> Result<FilterKernel> {
    if filter.dim() != 1 {
        return invalid("embedding needs a scalar filter");
    }
    if s == 0 {
        return invalid("embedding factor must be positive");
    }
    if s == 1 {
        return Ok(filter.clone());
    }
    let m = filter.len();
    let c = filter.shift;
    let left = (s - c % s) % s;
    let mut right = s;
    while !(m + left + right).is_multiple_of(s) {
        right += 1;
    }
    let big_m = (m + left + right) / s;
    let big_c = (left + c) / s;
    let psi = |k: i64| -> f64 {
        let i = k + c as i64;
        if i < 0 || i >= m as i64 {
            0.0
        } else {
            filter.coeffs[i as usize][(0, 0)]
        }
    };
    let coeffs = (0..big_m)
        .map(|idx| {
            let h = idx as i64 - big_c as i64;
            DMatrix::from_fn(s, s, |j, k| psi(j as i64 - k as i64 + s as i64 * h))
        })
        .collect();
    FilterKernel::new(coeffs, big_c)
}

/// Laurent polynomial with lowest power `lo`.
#[derive(Debug, Clone)]
struct Laurent {
    c: Vec<f64>,
    lo: i64,
}

impl Laurent {
    fn constant(v: f64) -> Self {
        Laurent { c: vec![v], lo: 0 }
    }

    fn from_poly(p: &Poly, lo: i64) -> Self {
        Laurent { c: p.0.clone(), lo }
    }

    /// `p(B^{-1})`
    fn reversed(p: &Poly) -> Self {
        let mut c = p.0.clone();
        c.reverse();
        Laurent { lo: -(p.degree() as i64), c }
    }

    fn hi(&self) -> i64 {
        self.lo + self.c.len() as i64 - 1
    }

    fn get(&self, k: i64) -> f64 {
        let i = k - self.lo;
        if i < 0 || i >= self.c.len() as i64 {
            0.0
        } else {
            self.c[i as usize]
        }
    }

    fn add(&self, o: &Laurent, scale: f64) -> Laurent {
        let lo = self.lo.min(o.lo);
        let hi = self.hi().max(o.hi());
        Laurent { c: (lo..=hi).map(|k| self.get(k) + scale * o.get(k)).collect(), lo }
    }

    fn mul(&self, o: &Laurent) -> Laurent {
        Laurent { c: crate::poly::convolve(&self.c, &o.c), lo: self.lo + o.lo }
    }

    fn scale(&self, v: f64) -> Laurent {
        Laurent { c: self.c.iter().map(|x| x * v).collect(), lo: self.lo }
    }

    /// Symmetric kernel over lags `-L..=L`.
    fn kernel(&self) -> Result<FilterKernel> {
        let l = self.lo.abs().max(self.hi().abs());
        let coeffs: Vec<f64> = (-l..=l).map(|k| self.get(k)).collect();
        FilterKernel::scalar(&coeffs, l as usize)
    }
}

/// Nonparametric trend, seasonal and seasonal-adjustment filters for a
/// possibly fractional period `s`, with a seasonal moving average of order
/// `p`. The seasonal filter returned is the complement of the adjustment
/// filter, so it sums to zero.
pub fn x11_filters(s: f64, p: usize) -> Result<(FilterKernel, FilterKernel, FilterKernel)> {
    if !(s > 2.0) {
        return invalid("seasonal period must exceed two");
    }
    if p == 0 {
        return invalid("seasonal order must be positive");
    }
    let n = (s / 2.0).floor() as usize;
    let u = ub_generator(n, s)?;
    let trend = Laurent::from_poly(&u, -(n as i64)).scale(1.0 / u.eval_real(1.0));
    let one_minus_b2 = Poly(vec![1.0, 0.0, -1.0]);
    let mut acc = Laurent::constant(0.0);
    for j in 1..=p {
        let nj = ((s * j as f64 - 2.0) / 2.0).floor().max(0.0) as usize;
        let uj = one_minus_b2.mul(&ub_generator(nj, s)?);
        acc = acc.add(&Laurent::from_poly(&uj, 0), 1.0).add(&Laurent::reversed(&uj), 1.0);
    }
    let seas_ma = Laurent::constant(1.0).add(&acc, -1.0 / (2 * p + 1) as f64);
    let detrend = Laurent::constant(1.0).add(&trend, -1.0);
    let seasonal = seas_ma.mul(&detrend);
    let sa = Laurent::constant(1.0).add(&seasonal, -1.0);
    Ok((trend.kernel()?, seasonal.kernel()?, sa.kernel()?))
}

fn check_sigcomps(mdl: &ModelSpec, sigcomps: &[usize]) -> Result<()> {
    if sigcomps.iter().any(|&k| k >= mdl.components.len()) {
        return invalid("signal component index out of range");
    }
    Ok(())
}

fn complement(mdl: &ModelSpec, sigcomps: &[usize]) -> Vec<usize> {
    (0..mdl.components.len()).filter(|k| !sigcomps.contains(k)).collect()
}

/// Autocovariances of `delta_group(B) sum_{k in group} S^(k)`.
fn group_acvf(mdl: &ModelSpec, par: &ParamSet, group: &[usize], max_lag: usize) -> Result<Vec<DMatrix<f64>>> {
    let n = mdl.n;
    let mut acc = vec![DMatrix::zeros(n, n); max_lag + 1];
    for &k in group {
        let others: Vec<usize> = group.iter().copied().filter(|&j| j != k).collect();
        let d = mdl.delta_of(&others);
        let core = core_acvf(mdl, par, k, max_lag + d.degree())?;
        for (a, g) in acc.iter_mut().zip(filter_acvf(&core, &d, max_lag)) {
            *a += g;
        }
    }
    Ok(acc)
}

/// Differencing matrix of `p` over `t` times for `n` series, time-major.
fn diff_matrix(p: &Poly, t: usize, n: usize) -> DMatrix<f64> {
    let d = p.degree();
    let rows = t.saturating_sub(d);
    let mut m = DMatrix::zeros(rows * n, t * n);
    for r in 0..rows {
        for (i, c) in p.0.iter().enumerate() {
            for j in 0..n {
                m[(r * n + j, (r + d - i) * n + j)] = *c;
            }
        }
    }
    m
}

fn acvf_matrix(acvf: &[DMatrix<f64>], len: usize, n: usize) -> DMatrix<f64> {
    if len == 0 {
        DMatrix::zeros(0, 0)
    } else if acvf.is_empty() {
        DMatrix::zeros(len * n, len * n)
    } else {
        block_toeplitz(acvf, len)
    }
}

/// Exact finite-sample filter matrix `F` and error covariance `V` for the
/// signal summing the listed components, both `NT x NT` with time-major
/// indexing `t N + j`.
///
/// Differenced signal and noise are estimated from the differenced data and
/// the signal is recovered from the stacked consistent system
/// `[D_S; D_N] S = [u; D_N Y - v]`, so no signal or noise covariance needs
/// to be inverted.
pub fn signal_matrix(mdl: &ModelSpec, par: &ParamSet, data: &DMatrix<f64>, sigcomps: &[usize]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_sigcomps(mdl, sigcomps)?;
    if data.iter().any(|v| v.is_nan()) {
        return invalid("exact filter matrices need complete data");
    }
    let (t, n) = (mdl.t, mdl.n);
    if data.shape() != (t, n) {
        return invalid("data dimensions do not match the model");
    }
    let noise = complement(mdl, sigcomps);
    let ds = mdl.delta_of(sigcomps);
    let dn = mdl.delta_of(&noise);
    let delta = ds.mul(&dn);
    let d = delta.degree();
    if t <= d {
        return invalid("sample shorter than the differencing order");
    }
    let (ls, ln, lw) = (t - ds.degree(), t - dn.degree(), t - d);
    let sig_u = acvf_matrix(&group_acvf(mdl, par, sigcomps, ls)?, ls, n);
    let sig_v = acvf_matrix(&group_acvf(mdl, par, &noise, ln)?, ln, n);
    let sig_w = block_toeplitz(&total_acvf(mdl, par, lw)?, lw);
    let chol = sig_w.cholesky().ok_or_else(|| Error::Degenerate("differenced data covariance".into()))?;
    let dm = diff_matrix(&delta, t, n);
    let dsm = diff_matrix(&ds, t, n);
    let dnm = diff_matrix(&dn, t, n);
    // apply delta_N to u (length ls) and delta_S to v (length ln)
    let dn_u = diff_matrix(&dn, ls, n);
    let ds_v = diff_matrix(&ds, ln, n);
    let a = &sig_u * dn_u.transpose();
    let b = &sig_v * ds_v.transpose();
    let winv_d = chol.solve(&dm);
    let u_map = &a * &winv_d;
    let v_map = &b * &winv_d;
    let stack = |top: &DMatrix<f64>, bot: &DMatrix<f64>| {
        let mut m = DMatrix::zeros(top.nrows() + bot.nrows(), top.ncols());
        m.view_mut((0, 0), top.shape()).copy_from(top);
        m.view_mut((top.nrows(), 0), bot.shape()).copy_from(bot);
        m
    };
    let sys = stack(&dsm, &dnm);
    let rhs = stack(&u_map, &(&dnm - &v_map));
    let qr = sys.clone().qr();
    let r = qr.r();
    let rinv = r.try_inverse().ok_or_else(|| Error::Degenerate("signal and noise differencing share roots".into()))?;
    let pinv = &rinv * qr.q().transpose();
    let f = &pinv * rhs;
    let winv_a = chol.solve(&a.transpose());
    let winv_b = chol.solve(&b.transpose());
    let cu = &sig_u - &a * &winv_a;
    let cv = &sig_v - &b * &winv_b;
    let cross = &a * &winv_b;
    let mut c = DMatrix::zeros(ls * n + ln * n, ls * n + ln * n);
    c.view_mut((0, 0), cu.shape()).copy_from(&cu);
    c.view_mut((ls * n, ls * n), cv.shape()).copy_from(&cv);
    c.view_mut((0, ls * n), cross.shape()).copy_from(&cross);
    c.view_mut((ls * n, 0), (ln * n, ls * n)).copy_from(&cross.transpose());
    let v = symmetrize(&(&pinv * c * pinv.transpose()));
    Ok((f, v))
}

/// Apply filter and error matrices from [`signal_matrix`] to the de-meaned
/// data.
pub fn extract(mdl: &ModelSpec, par: &ParamSet, data: &DMatrix<f64>, f: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<ExtractionTriple> {
    let (t, n) = (mdl.t, mdl.n);
    let y = crate::gauss::demean(mdl, par, data)?;
    if f.shape() != (t * n, t * n) || v.shape() != (t * n, t * n) {
        return invalid("filter matrices do not match the data");
    }
    let yv = DVector::from_iterator(t * n, (0..t).flat_map(|s| (0..n).map(move |j| (s, j))).map(|(s, j)| y[(s, j)]));
    let s = f * yv;
    let point = DMatrix::from_fn(t, n, |r, j| s[r * n + j]);
    let sd = DMatrix::from_fn(t, n, |r, j| v[(r * n + j, r * n + j)].max(0.0).sqrt());
    Ok(ExtractionTriple { lower: &point - &sd * 2.0, upper: &point + &sd * 2.0, point })
}

fn invert_density(f: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    f.clone().try_inverse().unwrap_or_else(|| f.clone().pseudo_inverse(1e-12).unwrap_or_else(|_| DMatrix::zeros(f.nrows(), f.ncols())))
}

fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// Differenced group densities `(f_u, f_v, f_w)` at one frequency.
fn group_densities(mdl: &ModelSpec, par: &ParamSet, sig: &[usize], noise: &[usize], lambda: f64) -> Result<[DMatrix<Complex64>; 3]> {
    let n = mdl.n;
    let mut fu = DMatrix::<Complex64>::zeros(n, n);
    let mut fv = DMatrix::<Complex64>::zeros(n, n);
    let mut fw = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..mdl.components.len() {
        let core = core_density(mdl, par, k, lambda)?;
        let whole = mdl.delta_omit(k).frf(lambda).norm_sqr();
        fw += &core * c(whole);
        if sig.contains(&k) {
            let others: Vec<usize> = sig.iter().copied().filter(|&j| j != k).collect();
            let w = mdl.delta_of(&others).frf(lambda).norm_sqr();
            fu += &core * c(w);
        } else {
            let others: Vec<usize> = noise.iter().copied().filter(|&j| j != k).collect();
            let w = mdl.delta_of(&others).frf(lambda).norm_sqr();
            fv += &core * c(w);
        }
    }
    Ok([fu, fv, fw])
}

/// Frequency response of the Wiener-Kolmogorov filter for the signal
/// summing `sigcomps`, on `lambda_m = pi m / grid`, `m = 0..=grid`.
/// Computed as `|delta_N|^2 f_u f_w^{-1}` from differenced densities, so it
/// stays finite at unit-root frequencies.
pub fn frf(mdl: &ModelSpec, par: &ParamSet, sigcomps: &[usize], grid: usize) -> Result<Vec<DMatrix<Complex64>>> {
    check_sigcomps(mdl, sigcomps)?;
    let noise = complement(mdl, sigcomps);
    let dn = mdl.delta_of(&noise);
    (0..=grid)
        .map(|m| {
            let l = PI * m as f64 / grid.max(1) as f64;
            let [fu, _, fw] = group_densities(mdl, par, sigcomps, &noise, l)?;
            Ok(fu * invert_density(&fw) * c(dn.frf(l).norm_sqr()))
        })
        .collect()
}

/// Truncated Wiener-Kolmogorov filter.
#[derive(Debug, Clone)]
pub struct WkFilter {
    pub kernel: FilterKernel,
    /// Error covariance of the bi-infinite filter.
    pub mse: DMatrix<f64>,
    /// Geometric estimate of the absolute coefficient mass beyond the
    /// truncation lag.
    pub tail: f64,
}

impl WkFilter {
    pub const TAIL_WARNING: f64 = 1e-4;

    pub fn tail_warning(&self) -> bool {
        !(self.tail <= Self::TAIL_WARNING)
    }
}

fn apply_target(target: Option<&MatPoly>, l: f64, m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    match target {
        Some(t) => t.eval(Complex64::from_polar(1.0, -l)) * m,
        None => m,
    }
}

/// Coefficients for lags `-len..=len` of the WK filter composed with an
/// optional target polynomial, by trapezoidal inversion of the frequency
/// response over `grid / 2` intervals of `[0, pi]`. The grid counts points on
/// the full circle.
pub fn wk_coeffs(mdl: &ModelSpec, par: &ParamSet, sigcomps: &[usize], target: Option<&MatPoly>, grid: usize, len: usize) -> Result<WkFilter> {
    check_sigcomps(mdl, sigcomps)?;
    let n = mdl.n;
    if let Some(t) = target {
        if t.dim() != n {
            return invalid("target dimension differs from the model");
        }
    }
    let g = (grid / 2).max(1);
    let noise = complement(mdl, sigcomps);
    let dn = mdl.delta_of(&noise);
    let mut resp = Vec::with_capacity(g + 1);
    let mut mse = DMatrix::<f64>::zeros(n, n);
    for m in 0..=g {
        let l = PI * m as f64 / g as f64;
        let w = if m == 0 || m == g { 0.5 } else { 1.0 };
        let [fu, fv, fw] = group_densities(mdl, par, sigcomps, &noise, l)?;
        let winv = invert_density(&fw);
        let ups = apply_target(target, l, &fu * &winv * c(dn.frf(l).norm_sqr()));
        let err = &fu * &winv * &fv;
        let err = match target {
            Some(t) => {
                let x = t.eval(Complex64::from_polar(1.0, -l));
                &x * err * x.adjoint()
            }
            None => err,
        };
        mse += err.map(|z| z.re) * (w / g as f64);
        resp.push(ups);
    }
    let coef = |h: i64| -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(n, n);
        for (m, u) in resp.iter().enumerate() {
            let l = PI * m as f64 / g as f64;
            let w = if m == 0 || m == g { 0.5 } else { 1.0 };
            let e = Complex64::from_polar(1.0, l * h as f64);
            acc += (u * e).map(|z| z.re) * (w / g as f64);
        }
        acc
    };
    let coeffs: Vec<DMatrix<f64>> = (-(len as i64)..=len as i64).map(coef).collect();
    let norm1 = |m: &DMatrix<f64>| m.iter().map(|v| v.abs()).sum::<f64>();
    let a = norm1(&coef(len as i64)) + norm1(&coef(-(len as i64)));
    let b = norm1(&coef(len as i64 + 1)) + norm1(&coef(-(len as i64) - 1));
    let tail = if b == 0.0 {
        0.0
    } else if a > b {
        let r = b / a;
        b / (1.0 - r)
    } else {
        f64::INFINITY
    };
    Ok(WkFilter { kernel: FilterKernel::new(coeffs, len)?, mse: symmetrize(&mse), tail })
}

/// Apply a kernel to the cast-extended de-meaned series. Returns the point
/// series over `1 - horizon ..= T + horizon` and, if requested, the error
/// variance propagated from the casts.
fn filter_casts(kernel: &FilterKernel, cast: &CastResult, t: usize, horizon: usize, need_mse: bool) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = cast.filled.ncols();
    let span = cast.span;
    let rows = t + 2 * horizon;
    let mut point = DMatrix::zeros(rows, n);
    let mut var = DMatrix::zeros(rows, n);
    for r in 0..rows {
        let e = r + span - horizon;
        let mut acc = DVector::zeros(n);
        for (i, cf) in kernel.coeffs.iter().enumerate() {
            let src = e + kernel.shift - i;
            acc += cf * cast.filled.row(src).transpose();
        }
        point.set_row(r, &acc.transpose());
        if need_mse && !cast.coords.is_empty() {
            // cast coordinates feeding this output
            let mut idx = Vec::new();
            let mut w = Vec::new();
            for (i, cf) in kernel.coeffs.iter().enumerate() {
                let src = e + kernel.shift - i;
                for k in 0..n {
                    if let Some(p) = cast.position(src, k) {
                        idx.push(p);
                        w.push(cf.column(k).into_owned());
                    }
                }
            }
            if idx.is_empty() {
                continue;
            }
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| cast.cov[(idx[a], idx[b])]);
            for j in 0..n {
                let a = DVector::from_iterator(idx.len(), w.iter().map(|col| col[j]));
                var[(r, j)] = a.dot(&(&sub * &a)).max(0.0);
            }
        }
    }
    (point, var)
}

fn triple(point: DMatrix<f64>, var: DMatrix<f64>) -> ExtractionTriple {
    let sd = var.map(|v| v.max(0.0).sqrt());
    ExtractionTriple { lower: &point - &sd * 2.0, upper: &point + &sd * 2.0, point }
}

/// Truncated WK extraction: the de-meaned series is patched with midcasts,
/// extended by casts on both sides, and filtered. The reported error
/// variance adds the bi-infinite WK error to the propagated casting error.
/// Rows cover times `1 - horizon ..= T + horizon`.
#[allow(clippy::too_many_arguments)]
pub fn wk_extract(
    mdl: &ModelSpec,
    par: &ParamSet,
    data: &DMatrix<f64>,
    sigcomps: &[usize],
    target: Option<&MatPoly>,
    grid: usize,
    window: usize,
    horizon: usize,
    need_mse: bool,
) -> Result<ExtractionTriple> {
    let wk = wk_coeffs(mdl, par, sigcomps, target, grid, window)?;
    let (cast, _) = midcast(mdl, par, data, window + horizon)?;
    let (point, mut var) = filter_casts(&wk.kernel, &cast, mdl.t, horizon, need_mse);
    if need_mse {
        for mut row in var.row_iter_mut() {
            for j in 0..mdl.n {
                row[j] += wk.mse[(j, j)].max(0.0);
            }
        }
    }
    Ok(triple(point, var))
}

/// Extraction with a user-supplied filter; uncertainty comes from casting
/// error only. Rows cover times `1 - horizon ..= T + horizon`.
pub fn adhoc_extract(mdl: &ModelSpec, par: &ParamSet, data: &DMatrix<f64>, kernel: &FilterKernel, horizon: usize, need_mse: bool) -> Result<ExtractionTriple> {
    if kernel.dim() != mdl.n {
        return invalid("filter dimension differs from the model");
    }
    let span = kernel.lead().max(kernel.lag()) + horizon;
    let (cast, _) = midcast(mdl, par, data, span)?;
    let (point, var) = filter_casts(kernel, &cast, mdl.t, horizon, need_mse);
    Ok(triple(point, var))
}

/// Which published table receives an additive piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Signal,
    Complement,
}

/// Assignment of casting error and fixed effects to the two published
/// tables.
#[derive(Debug, Clone)]
pub struct Routing {
    pub casting_error: Side,
    /// Per regressor label; labels not listed go to `default_fixed`.
    pub fixed: Vec<(String, Side)>,
    pub default_fixed: Side,
}

impl Routing {
    /// For a seasonal adjustment signal with the seasonal as complement:
    /// casting error and trend polynomial join the adjustment, all other
    /// fixed effects (holidays) join the seasonal.
    pub fn seasonal_adjustment() -> Self {
        Routing { casting_error: Side::Signal, fixed: vec![(TREND_LABEL.to_string(), Side::Signal)], default_fixed: Side::Complement }
    }

    fn side(&self, label: &str) -> Side {
        self.fixed.iter().find(|(l, _)| l == label).map(|x| x.1).unwrap_or(self.default_fixed)
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub signal: DMatrix<f64>,
    pub complement: DMatrix<f64>,
    /// Original value minus its imputation (zero at genuinely missing and
    /// at ordinary observed times).
    pub casting_error: DMatrix<f64>,
    /// Fixed effects by regressor label.
    pub fixed: Vec<(String, DMatrix<f64>)>,
}

impl Decomposition {
    pub fn total(&self) -> DMatrix<f64> {
        &self.signal + &self.complement
    }
}

/// Publishable additive tables from two complementary extractions of the
/// imputed de-meaned series `filled` (the sample rows of a cast result).
///
/// `original` carries every known value, including ones treated as missing
/// for estimation (outliers); genuinely unknown entries are `NaN`. At times
/// where `original` is known the two tables add up to it; elsewhere they add
/// up to the imputation.
pub fn publish_decomposition(
    original: &DMatrix<f64>,
    filled: &DMatrix<f64>,
    signal: &DMatrix<f64>,
    complement: &DMatrix<f64>,
    mdl: &ModelSpec,
    par: &ParamSet,
    routing: &Routing,
) -> Result<Decomposition> {
    let shape = (mdl.t, mdl.n);
    if original.shape() != shape || filled.shape() != shape || signal.shape() != shape || complement.shape() != shape {
        return invalid("decomposition inputs must all be T x N");
    }
    let mut sig = signal.clone();
    let mut comp = complement.clone();
    let mut fixed: Vec<(String, DMatrix<f64>)> = Vec::new();
    for j in 0..mdl.n {
        for (r, reg) in mdl.regressors[j].iter().enumerate() {
            let b = par.beta[mdl.beta_index(j, r)];
            let pos = match fixed.iter().position(|(l, _)| *l == reg.label) {
                Some(p) => p,
                None => {
                    fixed.push((reg.label.clone(), DMatrix::zeros(shape.0, shape.1)));
                    fixed.len() - 1
                }
            };
            for t in 0..mdl.t {
                fixed[pos].1[(t, j)] += b * reg.value_at(t as i64 + 1);
            }
        }
    }
    for (label, eff) in &fixed {
        match routing.side(label) {
            Side::Signal => sig += eff,
            Side::Complement => comp += eff,
        }
    }
    let mean = regression_mean(mdl, &par.beta, 0);
    let imputed = filled + &mean;
    let err = DMatrix::from_fn(shape.0, shape.1, |t, j| {
        let x = original[(t, j)];
        if x.is_nan() {
            0.0
        } else {
            x - imputed[(t, j)]
        }
    });
    match routing.casting_error {
        Side::Signal => sig += &err,
        Side::Complement => comp += &err,
    }
    // exact split: put the rounding residue on the complement side
    let target = &imputed + &err;
    let resid = &target - (&sig + &comp);
    comp += resid;
    Ok(Decomposition { signal: sig, complement: comp, casting_error: err, fixed })
}

/// Sample rows (`1..=T`) of a cast-extended matrix.
pub fn sample_rows(cast: &CastResult, t: usize) -> DMatrix<f64> {
    cast.filled.rows(cast.span, t).into_owned()
}
