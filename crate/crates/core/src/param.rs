//! Maps between the unconstrained pre-parameter vector and structured model
//! parameters, linear constraints, and covariance conditioning.
//!
//! The pre-parameter vector is laid out as the covariance entries of every
//! component, then the serial parameters of every component, then the
//! regression coefficients.

use nalgebra::{DMatrix, DVector};

use crate::acf::varma_acvf;
use crate::error::{invalid, Error, Result};
use crate::linalg::{cholesky, companion_radius, gcd_decompose, sym_fn, Gcd};
use crate::model::{ComponentClass, ModelSpec};
use crate::poly::{MatPoly, Poly};

/// Serial parameters of one component. AR and MA coefficient lists use the
/// convention `1 - sum_j c_j B^j`.
#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    None,
    Arma { ar: Vec<f64>, ma: Vec<f64> },
    Sarma { ar: Vec<f64>, ma: Vec<f64>, sar: Vec<f64>, sma: Vec<f64>, period: usize },
    Varma { ar: Vec<DMatrix<f64>>, ma: Vec<DMatrix<f64>> },
    Svarma {
        ar: Vec<DMatrix<f64>>,
        ma: Vec<DMatrix<f64>>,
        sar: Vec<DMatrix<f64>>,
        sma: Vec<DMatrix<f64>>,
        period: usize,
    },
    Cycle { rho: f64, omega: f64 },
    Damped { phi: f64 },
}

impl Dynamics {
    /// Full AR and MA polynomials for scalar-driven classes.
    pub fn scalar_polys(&self) -> Option<(Poly, Poly)> {
        match self {
            Dynamics::None => Some((Poly::one(), Poly::one())),
            Dynamics::Arma { ar, ma } => Some((minus_poly(ar), minus_poly(ma))),
            Dynamics::Sarma { ar, ma, sar, sma, period } => Some((
                minus_poly(ar).mul(&seasonal_minus_poly(sar, *period)),
                minus_poly(ma).mul(&seasonal_minus_poly(sma, *period)),
            )),
            Dynamics::Damped { phi } => Some((Poly(vec![1.0, -phi]), Poly::one())),
            _ => None,
        }
    }

    /// Full matrix AR and MA polynomials for vector classes.
    pub fn matrix_polys(&self, n: usize) -> Option<(MatPoly, MatPoly)> {
        match self {
            Dynamics::Varma { ar, ma } => Some((MatPoly::from_minus(ar, n), MatPoly::from_minus(ma, n))),
            Dynamics::Svarma { ar, ma, sar, sma, period } => Some((
                MatPoly::from_minus(ar, n).mul(&MatPoly::from_minus(sar, n).seasonal(*period)),
                MatPoly::from_minus(ma, n).mul(&MatPoly::from_minus(sma, n).seasonal(*period)),
            )),
            _ => None,
        }
    }
}

/// `1 - sum_j c_j B^j`
pub fn minus_poly(c: &[f64]) -> Poly {
    let mut v = vec![1.0];
    v.extend(c.iter().map(|x| -x));
    Poly(v)
}

fn seasonal_minus_poly(c: &[f64], s: usize) -> Poly {
    let mut v = vec![0.0; c.len() * s + 1];
    v[0] = 1.0;
    for (j, x) in c.iter().enumerate() {
        v[(j + 1) * s] = -x;
    }
    Poly(v)
}

/// Structured parameters: one covariance pair and one dynamics entry per
/// component, plus the flat regression coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub covs: Vec<Gcd>,
    pub dynamics: Vec<Dynamics>,
    pub beta: Vec<f64>,
}

impl ParamSet {
    /// Parameters at the origin of the pre-parameter space.
    pub fn default_for(mdl: &ModelSpec) -> ParamSet {
        psi_to_par(&vec![0.0; mdl.psi_len()], mdl).expect("zero vector has model length")
    }

    pub fn sigma(&self, k: usize) -> DMatrix<f64> {
        self.covs[k].matrix()
    }
}

/// Partial autocorrelation parameterization of a stable polynomial
/// `1 - sum_j c_j z^j`.
pub fn pacf_map(zeta: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(zeta.len());
    for (j, z) in zeta.iter().enumerate() {
        let a = (z / 2.0).tanh();
        let prev = phi.clone();
        for i in 0..j {
            phi[i] = prev[i] - a * prev[j - 1 - i];
        }
        phi.push(a);
    }
    phi
}

/// Inverse of [`pacf_map`]; fails when the polynomial is not stable.
pub fn pacf_inverse(coefs: &[f64]) -> Result<Vec<f64>> {
    let p = coefs.len();
    let mut zeta = vec![0.0; p];
    let mut phi = coefs.to_vec();
    for j in (0..p).rev() {
        let a = phi[j];
        if !(a.abs() < 1.0) {
            return Err(Error::Unstable(format!("partial autocorrelation {a} at lag {}", j + 1)));
        }
        zeta[j] = 2.0 * a.atanh();
        let cur = phi.clone();
        for i in 0..j {
            phi[i] = (cur[i] + a * cur[j - 1 - i]) / (1.0 - a * a);
        }
        phi.truncate(j);
    }
    Ok(zeta)
}

fn sqrt_ratio(x: f64, f: impl Fn(f64) -> f64, limit: f64) -> f64 {
    if x <= 1e-30 {
        limit
    } else {
        f(x.sqrt()) / x.sqrt()
    }
}

/// Square matrix with singular values shrunk through `tanh(s / 2)`.
fn to_partial(a: &DMatrix<f64>) -> DMatrix<f64> {
    a * sym_fn(&(a.transpose() * a), |x| sqrt_ratio(x.max(0.0), |s| (s / 2.0).tanh(), 0.5))
}

fn from_partial(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let g = p.transpose() * p;
    let top = g.clone().symmetric_eigen().eigenvalues.max();
    if !(top < 1.0) {
        return Err(Error::Unstable("partial autocorrelation matrix with singular value >= 1".into()));
    }
    Ok(p * sym_fn(&g, |x| sqrt_ratio(x.max(0.0), |s| 2.0 * s.atanh(), 2.0)))
}

/// Stable VAR(p) coefficients `Phi_1..Phi_p` of dimension `n` from `p n^2`
/// unconstrained values (column-major blocks).
pub fn var_map(zeta: &[f64], n: usize, p: usize) -> Result<Vec<DMatrix<f64>>> {
    if zeta.len() != p * n * n {
        return invalid("VAR parameter length mismatch");
    }
    if p == 0 {
        return Ok(Vec::new());
    }
    let parts: Vec<DMatrix<f64>> =
        (0..p).map(|j| to_partial(&DMatrix::from_column_slice(n, n, &zeta[j * n * n..(j + 1) * n * n]))).collect();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut fwd: Vec<DMatrix<f64>> = Vec::new();
    let mut bwd: Vec<DMatrix<f64>> = Vec::new();
    let mut v = eye.clone();
    let mut vb = eye.clone();
    for ps in &parts {
        let s = cholesky(&v, "forward innovation covariance")?;
        let sb = cholesky(&vb, "backward innovation covariance")?;
        let sinv = s.clone().try_inverse().ok_or_else(|| Error::Degenerate("forward factor".into()))?;
        let sbinv = sb.clone().try_inverse().ok_or_else(|| Error::Degenerate("backward factor".into()))?;
        let f_new = &s * ps * &sbinv;
        let b_new = &sb * ps.transpose() * &sinv;
        let m = fwd.len();
        let mut nf = Vec::with_capacity(m + 1);
        let mut nb = Vec::with_capacity(m + 1);
        for k in 0..m {
            nf.push(&fwd[k] - &f_new * &bwd[m - 1 - k]);
            nb.push(&bwd[k] - &b_new * &fwd[m - 1 - k]);
        }
        let v_next = &v - &f_new * &vb * f_new.transpose();
        let vb_next = &vb - &b_new * &v * b_new.transpose();
        nf.push(f_new);
        nb.push(b_new);
        fwd = nf;
        bwd = nb;
        v = (&v_next + v_next.transpose()) * 0.5;
        vb = (&vb_next + vb_next.transpose()) * 0.5;
    }
    let m = cholesky(&v, "innovation covariance")?
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("innovation factor".into()))?;
    let minv = m.clone().try_inverse().ok_or_else(|| Error::Degenerate("scaling".into()))?;
    Ok(fwd.iter().map(|f| &m * f * &minv).collect())
}

/// Inverse of [`var_map`]; fails when the VAR is not stable.
pub fn var_inverse(coefs: &[DMatrix<f64>], n: usize) -> Result<Vec<f64>> {
    let p = coefs.len();
    if p == 0 {
        return Ok(Vec::new());
    }
    let radius = companion_radius(coefs);
    if !(radius < 1.0) {
        return Err(Error::Unstable(format!("companion spectral radius {radius:.6}")));
    }
    let ar = MatPoly::from_minus(coefs, n);
    let gam = varma_acvf(&ar, &MatPoly::identity(n), &DMatrix::identity(n, n), p)?;
    let m = cholesky(&gam[0], "VAR autocovariance")?;
    let minv = m.try_inverse().ok_or_else(|| Error::Degenerate("VAR autocovariance".into()))?;
    let g: Vec<DMatrix<f64>> = gam.iter().map(|x| &minv * x * minv.transpose()).collect();
    let mut fwd: Vec<DMatrix<f64>> = Vec::new();
    let mut bwd: Vec<DMatrix<f64>> = Vec::new();
    let mut v = g[0].clone();
    let mut vb = g[0].clone();
    let mut zeta = Vec::with_capacity(p * n * n);
    for s_idx in 0..p {
        let mut delta = g[s_idx + 1].clone();
        for (k, f) in fwd.iter().enumerate() {
            delta -= f * &g[s_idx - k];
        }
        let s = cholesky(&v, "forward innovation covariance")?;
        let sb = cholesky(&vb, "backward innovation covariance")?;
        let vinv = v.clone().try_inverse().ok_or_else(|| Error::Degenerate("forward".into()))?;
        let vbinv = vb.clone().try_inverse().ok_or_else(|| Error::Degenerate("backward".into()))?;
        let f_new = &delta * &vbinv;
        let b_new = delta.transpose() * &vinv;
        let sinv = s.try_inverse().ok_or_else(|| Error::Degenerate("forward factor".into()))?;
        let part = &sinv * &f_new * &sb;
        zeta.extend(from_partial(&part)?.iter().copied());
        let m_len = fwd.len();
        let mut nf = Vec::with_capacity(m_len + 1);
        let mut nb = Vec::with_capacity(m_len + 1);
        for k in 0..m_len {
            nf.push(&fwd[k] - &f_new * &bwd[m_len - 1 - k]);
            nb.push(&bwd[k] - &b_new * &fwd[m_len - 1 - k]);
        }
        let v_next = &v - &f_new * &vb * f_new.transpose();
        let vb_next = &vb - &b_new * &v * b_new.transpose();
        nf.push(f_new);
        nb.push(b_new);
        fwd = nf;
        bwd = nb;
        v = (&v_next + v_next.transpose()) * 0.5;
        vb = (&vb_next + vb_next.transpose()) * 0.5;
    }
    Ok(zeta)
}

/// Logistic map of the real line onto `(lo, hi)`.
pub fn bounded_map(z: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) / (1.0 + (-z).exp())
}

pub fn bounded_inverse(x: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(x > lo && x < hi) {
        return Err(Error::Unstable(format!("{x} outside ({lo}, {hi})")));
    }
    let u = (x - lo) / (hi - lo);
    Ok((u / (1.0 - u)).ln())
}

/// Covariance pair from its unconstrained entries: free lower-triangular
/// entries of each retained column, then the log diagonal.
pub fn xi_map(xi: &[f64], n: usize, vrank: &[usize]) -> Result<Gcd> {
    let nl: usize = vrank.iter().map(|&j| n - 1 - j).sum();
    if xi.len() != nl + vrank.len() {
        return invalid("covariance parameter length mismatch");
    }
    let r = vrank.len();
    let mut l = DMatrix::zeros(n, r);
    let mut pos = 0;
    for (c, &j) in vrank.iter().enumerate() {
        l[(j, c)] = 1.0;
        for i in j + 1..n {
            l[(i, c)] = xi[pos];
            pos += 1;
        }
    }
    let d = DVector::from_iterator(r, xi[nl..].iter().map(|x| x.exp()));
    Ok(Gcd { l, d, vrank: vrank.to_vec() })
}

pub fn xi_inverse(g: &Gcd) -> Result<Vec<f64>> {
    let n = g.dim();
    let mut out = Vec::new();
    for (c, &j) in g.vrank.iter().enumerate() {
        for i in j + 1..n {
            out.push(g.l[(i, c)]);
        }
    }
    for &d in g.d.iter() {
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite(format!("diagonal entry {d} cannot be log-mapped")));
        }
        out.push(d.ln());
    }
    Ok(out)
}

fn zeta_to_dynamics(class: &ComponentClass, z: &[f64], n: usize, bounds: &crate::model::Bounds) -> Result<Dynamics> {
    use ComponentClass::*;
    let n2 = n * n;
    Ok(match *class {
        WhiteNoise => Dynamics::None,
        Arma { p, q } => Dynamics::Arma { ar: pacf_map(&z[..p]), ma: pacf_map(&z[p..p + q]) },
        Sarma { p, q, ps, qs, period } => Dynamics::Sarma {
            ar: pacf_map(&z[..p]),
            ma: pacf_map(&z[p..p + q]),
            sar: pacf_map(&z[p + q..p + q + ps]),
            sma: pacf_map(&z[p + q + ps..p + q + ps + qs]),
            period,
        },
        Varma { p, q } => Dynamics::Varma { ar: var_map(&z[..p * n2], n, p)?, ma: var_map(&z[p * n2..(p + q) * n2], n, q)? },
        Svarma { p, q, ps, qs, period } => {
            let (a, b, c) = (p * n2, (p + q) * n2, (p + q + ps) * n2);
            Dynamics::Svarma {
                ar: var_map(&z[..a], n, p)?,
                ma: var_map(&z[a..b], n, q)?,
                sar: var_map(&z[b..c], n, ps)?,
                sma: var_map(&z[c..c + qs * n2], n, qs)?,
                period,
            }
        }
        Butterworth { .. } | Balanced { .. } | ButterworthStable { .. } | BalancedStable { .. } => Dynamics::Cycle {
            rho: bounded_map(z[0], bounds.rho_lo, bounds.rho_hi),
            omega: bounded_map(z[1], bounds.omega_lo, bounds.omega_hi),
        },
        DampedTrend => Dynamics::Damped { phi: bounded_map(z[0], bounds.rho_lo, bounds.rho_hi) },
    })
}

fn dynamics_to_zeta(class: &ComponentClass, dy: &Dynamics, n: usize, bounds: &crate::model::Bounds) -> Result<Vec<f64>> {
    let mismatch = || Error::InvalidInput("dynamics do not match component class".into());
    let mut out = Vec::new();
    match (class, dy) {
        (ComponentClass::WhiteNoise, Dynamics::None) => {}
        (ComponentClass::Arma { p, q }, Dynamics::Arma { ar, ma }) if ar.len() == *p && ma.len() == *q => {
            out.extend(pacf_inverse(ar)?);
            out.extend(pacf_inverse(ma)?);
        }
        (ComponentClass::Sarma { .. }, Dynamics::Sarma { ar, ma, sar, sma, .. }) => {
            for c in [ar, ma, sar, sma] {
                out.extend(pacf_inverse(c)?);
            }
        }
        (ComponentClass::Varma { .. }, Dynamics::Varma { ar, ma }) => {
            out.extend(var_inverse(ar, n)?);
            out.extend(var_inverse(ma, n)?);
        }
        (ComponentClass::Svarma { .. }, Dynamics::Svarma { ar, ma, sar, sma, .. }) => {
            for c in [ar, ma, sar, sma] {
                out.extend(var_inverse(c, n)?);
            }
        }
        (c, Dynamics::Cycle { rho, omega }) if c.is_cycle() => {
            out.push(bounded_inverse(*rho, bounds.rho_lo, bounds.rho_hi)?);
            out.push(bounded_inverse(*omega, bounds.omega_lo, bounds.omega_hi)?);
        }
        (ComponentClass::DampedTrend, Dynamics::Damped { phi }) => {
            out.push(bounded_inverse(*phi, bounds.rho_lo, bounds.rho_hi)?);
        }
        _ => return Err(mismatch()),
    }
    if out.len() != class.zeta_len(n) {
        return Err(mismatch());
    }
    Ok(out)
}

/// Structured parameters from the pre-parameter vector.
pub fn psi_to_par(psi: &[f64], mdl: &ModelSpec) -> Result<ParamSet> {
    if psi.len() != mdl.psi_len() {
        return invalid(format!("pre-parameter has length {} but model needs {}", psi.len(), mdl.psi_len()));
    }
    let mut pos = 0;
    let mut covs = Vec::with_capacity(mdl.components.len());
    for (k, c) in mdl.components.iter().enumerate() {
        let len = mdl.xi_len(k);
        covs.push(xi_map(&psi[pos..pos + len], mdl.n, &c.vrank)?);
        pos += len;
    }
    let mut dynamics = Vec::with_capacity(mdl.components.len());
    for (k, c) in mdl.components.iter().enumerate() {
        let len = mdl.zeta_len(k);
        dynamics.push(zeta_to_dynamics(&c.class, &psi[pos..pos + len], mdl.n, &c.bounds)?);
        pos += len;
    }
    Ok(ParamSet { covs, dynamics, beta: psi[pos..].to_vec() })
}

/// Pre-parameter vector from structured parameters.
pub fn par_to_psi(par: &ParamSet, mdl: &ModelSpec) -> Result<Vec<f64>> {
    if par.covs.len() != mdl.components.len() || par.dynamics.len() != mdl.components.len() {
        return invalid("parameter set does not match model components");
    }
    if par.beta.len() != mdl.num_regressors() {
        return invalid("regression coefficient count does not match model");
    }
    let mut psi = Vec::with_capacity(mdl.psi_len());
    for (k, c) in mdl.components.iter().enumerate() {
        if par.covs[k].vrank != c.vrank {
            return invalid(format!("covariance rank of component '{}' differs from model", c.label));
        }
        psi.extend(xi_inverse(&par.covs[k])?);
    }
    for (k, c) in mdl.components.iter().enumerate() {
        psi.extend(dynamics_to_zeta(&c.class, &par.dynamics[k], mdl.n, &c.bounds)?);
    }
    psi.extend(&par.beta);
    Ok(psi)
}

/// Linear restrictions `c psi = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub b: DVector<f64>,
    pub c: DMatrix<f64>,
}

impl Constraint {
    /// Parse CSV rows `b, c_1, ..., c_len`.
    pub fn from_csv(text: &str) -> Result<Constraint> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            rows.push(row.map_err(|_| Error::Parse(format!("constraint row '{line}'")))?);
        }
        if rows.is_empty() {
            return Err(Error::Parse("constraint file has no rows".into()));
        }
        let w = rows[0].len();
        if w < 2 || rows.iter().any(|r| r.len() != w) {
            return Err(Error::Parse("constraint rows must have equal length of at least two".into()));
        }
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r[0]));
        let c = DMatrix::from_fn(rows.len(), w - 1, |i, j| rows[i][j + 1]);
        Ok(Constraint { b, c })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for i in 0..self.c.nrows() {
            let mut f = vec![crate::cli::fmt_num(self.b[i])];
            f.extend(self.c.row(i).iter().map(|v| crate::cli::fmt_num(*v)));
            s.push_str(&f.join(","));
            s.push('\n');
        }
        s
    }
}

/// Affine parameterization `psi = a eta + offset` of the constrained set.
#[derive(Debug, Clone)]
pub struct ConstraintMap {
    pub a: DMatrix<f64>,
    pub offset: DVector<f64>,
    /// Column order chosen by pivoting; the last entries index `eta`.
    pub perm: Vec<usize>,
    pub rank: usize,
}

/// Householder QR with column pivoting; ties go to the lowest column.
fn pivoted_qr(c: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, Vec<usize>) {
    let (k, len) = c.shape();
    let mut r = c.clone();
    let mut q = DMatrix::<f64>::identity(k, k);
    let mut perm: Vec<usize> = (0..len).collect();
    for j in 0..k.min(len) {
        let mut best = j;
        let mut best_norm = -1.0;
        for col in j..len {
            let nrm: f64 = (j..k).map(|i| r[(i, col)] * r[(i, col)]).sum();
            if nrm > best_norm {
                best_norm = nrm;
                best = col;
            }
        }
        r.swap_columns(j, best);
        perm.swap(j, best);
        let x: Vec<f64> = (j..k).map(|i| r[(i, j)]).collect();
        let alpha = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
        let mut v = x.clone();
        v[0] += sign * alpha;
        let vnorm2: f64 = v.iter().map(|e| e * e).sum();
        for col in j..len {
            let dot: f64 = (j..k).map(|i| v[i - j] * r[(i, col)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in j..k {
                r[(i, col)] -= f * v[i - j];
            }
        }
        for row in 0..k {
            let dot: f64 = (j..k).map(|i| q[(row, i)] * v[i - j]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in j..k {
                q[(row, i)] -= f * v[i - j];
            }
        }
    }
    (q, r, perm)
}

impl ConstraintMap {
    pub fn unconstrained(len: usize) -> ConstraintMap {
        ConstraintMap { a: DMatrix::identity(len, len), offset: DVector::zeros(len), perm: (0..len).collect(), rank: 0 }
    }

    pub fn new(constraint: Option<&Constraint>, len: usize) -> Result<ConstraintMap> {
        let Some(con) = constraint else {
            return Ok(ConstraintMap::unconstrained(len));
        };
        let (k, cols) = con.c.shape();
        if cols != len {
            return Err(Error::Constraint(format!("constraint has {cols} columns but parameter has {len}")));
        }
        if con.b.len() != k {
            return Err(Error::Constraint("constraint right-hand side length mismatch".into()));
        }
        if k >= len {
            return Err(Error::Constraint("at least as many constraints as parameters".into()));
        }
        let (q, r, perm) = pivoted_qr(&con.c);
        let top = r[(0, 0)].abs();
        for i in 0..k {
            if r[(i, i)].abs() <= 1e-12 * top.max(f64::MIN_POSITIVE) {
                return Err(Error::Constraint("constraint matrix is rank deficient".into()));
            }
        }
        let r1 = r.view((0, 0), (k, k)).into_owned();
        let r2 = r.view((0, k), (k, len - k)).into_owned();
        let r1inv = r1.try_inverse().ok_or_else(|| Error::Constraint("singular pivot block".into()))?;
        let nu_const = &r1inv * q.transpose() * &con.b;
        let nu_lin = -&r1inv * r2;
        let mut a = DMatrix::zeros(len, len - k);
        let mut offset = DVector::zeros(len);
        for i in 0..k {
            offset[perm[i]] = nu_const[i];
            for m in 0..len - k {
                a[(perm[i], m)] = nu_lin[(i, m)];
            }
        }
        for m in 0..len - k {
            a[(perm[k + m], m)] = 1.0;
        }
        Ok(ConstraintMap { a, offset, perm, rank: k })
    }

    pub fn eta_len(&self) -> usize {
        self.a.ncols()
    }

    pub fn eta_to_psi(&self, eta: &[f64]) -> Vec<f64> {
        (&self.a * DVector::from_column_slice(eta) + &self.offset).iter().copied().collect()
    }

    /// Free coordinates of a parameter vector (assumed to satisfy the constraint).
    pub fn psi_to_eta(&self, psi: &[f64]) -> Vec<f64> {
        self.perm[self.rank..].iter().map(|&i| psi[i]).collect()
    }
}

/// Condition numbers `log(d_j / sigma_jj)` of the GCD diagonal; non-positive
/// pivots give negative infinity.
pub fn conditions(sigma: &DMatrix<f64>) -> Result<Vec<f64>> {
    let g = gcd_decompose(sigma)?;
    Ok((0..sigma.nrows())
        .map(|j| {
            let d = g.d[j];
            let s = sigma[(j, j)];
            if d > 0.0 && s > 0.0 {
                (d / s).ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect())
}

/// Raise GCD diagonal entries so every condition number is at least
/// `alpha` (which must be negative). The unit-triangular factor is kept.
pub fn render_pd(sigma: &DMatrix<f64>, alpha: f64) -> Result<DMatrix<f64>> {
    let mut g = gcd_decompose(sigma)?;
    let all: Vec<usize> = (0..sigma.nrows()).collect();
    raise_pivots(&mut g, &all, alpha)?;
    Ok(g.matrix())
}

fn raise_pivots(g: &mut Gcd, which: &[usize], alpha: f64) -> Result<()> {
    if !(alpha < 0.0) {
        return invalid("condition threshold must be negative");
    }
    let ratio = (-alpha).exp() - 1.0;
    for &j in which {
        let q: f64 = (0..j).map(|k| g.l[(j, k)] * g.l[(j, k)] * g.d[k]).sum();
        let floor = q / ratio;
        if g.d[j] < floor {
            g.d[j] = floor;
        }
    }
    Ok(())
}

/// Repair covariances that are indefinite or badly conditioned.
///
/// With `model_flag` set, columns whose condition number falls below
/// `thresh` (or whose pivot is not positive) are dropped from the rank set,
/// changing the model. Otherwise pivots are raised in place and the model is
/// unchanged.
pub fn reduce(par: &ParamSet, mdl: &ModelSpec, thresh: f64, model_flag: bool) -> Result<(ParamSet, ModelSpec)> {
    let mut out = par.clone();
    let mut new_mdl = mdl.clone();
    for (k, comp) in mdl.components.iter().enumerate() {
        let sigma = par.sigma(k);
        let mut full = gcd_decompose(&sigma)?;
        if model_flag {
            let tau = conditions(&sigma)?;
            let keep: Vec<usize> = comp.vrank.iter().copied().filter(|&j| full.d[j] > 0.0 && tau[j] >= thresh).collect();
            out.covs[k] = full.restrict(&keep);
            new_mdl = new_mdl.with_vrank(k, keep);
        } else {
            raise_pivots(&mut full, &comp.vrank, thresh)?;
            out.covs[k] = full.restrict(&comp.vrank);
        }
    }
    Ok((out, new_mdl))
}

/// Constraint tying together selected regression coefficients.
///
/// `selected[j]` lists regressor indices of series `j`. Without `combos`,
/// consecutive selected coefficients are set equal. With `combos`, each row
/// `[b, c_1..c_m]` imposes `sum_i c_i beta_(selected i) = b`.
pub fn constrain_reg(mdl: &ModelSpec, selected: &[Vec<usize>], combos: Option<&DMatrix<f64>>) -> Result<Constraint> {
    if selected.len() != mdl.n {
        return invalid("one regressor index list per series is required");
    }
    let base = mdl.psi_len() - mdl.num_regressors();
    let mut coords = Vec::new();
    for (j, regs) in selected.iter().enumerate() {
        for &r in regs {
            if r >= mdl.regressors[j].len() {
                return invalid(format!("series {j} has no regressor {r}"));
            }
            coords.push(base + mdl.beta_index(j, r));
        }
    }
    let len = mdl.psi_len();
    match combos {
        None => {
            if coords.len() < 2 {
                return invalid("need at least two coefficients to tie");
            }
            let k = coords.len() - 1;
            let mut c = DMatrix::zeros(k, len);
            for i in 0..k {
                c[(i, coords[i])] = 1.0;
                c[(i, coords[i + 1])] = -1.0;
            }
            Ok(Constraint { b: DVector::zeros(k), c })
        }
        Some(rows) => {
            if rows.ncols() != coords.len() + 1 {
                return invalid("combination rows must have one entry per selected coefficient plus the bound");
            }
            let k = rows.nrows();
            let mut c = DMatrix::zeros(k, len);
            for i in 0..k {
                for (m, &col) in coords.iter().enumerate() {
                    c[(i, col)] = rows[(i, m + 1)];
                }
            }
            Ok(Constraint { b: DVector::from_iterator(k, rows.column(0).iter().copied()), c })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Bounds;

    #[test]
    fn pacf_single_lag() {
        let phi = pacf_map(&[1.0]);
        let e = 1f64.exp();
        assert!((phi[0] - (e - 1.0) / (e + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn pacf_two_lags_recursion() {
        let z = [0.4, -0.7];
        let a1 = (0.2f64).tanh();
        let a2 = (-0.35f64).tanh();
        let phi = pacf_map(&z);
        assert!((phi[1] - a2).abs() < 1e-15);
        assert!((phi[0] - (a1 - a2 * a1)).abs() < 1e-15);
        let back = pacf_inverse(&phi).unwrap();
        assert!((back[0] - z[0]).abs() < 1e-12 && (back[1] - z[1]).abs() < 1e-12);
    }

    #[test]
    fn pacf_inverse_rejects_unit_root() {
        assert!(pacf_inverse(&[1.0]).is_err());
        assert!(pacf_inverse(&[0.5, 0.6]).is_err());
    }

    #[test]
    fn var_map_scalar_matches_pacf() {
        let z = [0.3, -1.2, 0.8];
        let v = var_map(&z, 1, 3).unwrap();
        let p = pacf_map(&z);
        for j in 0..3 {
            assert!((v[j][(0, 0)] - p[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn var_round_trip_and_stability() {
        let z: Vec<f64> = (0..8).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.6).collect();
        let coefs = var_map(&z, 2, 2).unwrap();
        assert!(companion_radius(&coefs) < 1.0);
        let back = var_inverse(&coefs, 2).unwrap();
        for (a, b) in back.iter().zip(&z) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn var_inverse_rejects_unstable() {
        let c = vec![DMatrix::from_row_slice(2, 2, &[1.1, 0.0, 0.0, 0.2])];
        assert!(matches!(var_inverse(&c, 2), Err(Error::Unstable(_))));
    }

    #[test]
    fn bounded_round_trip() {
        let x = bounded_map(0.7, 0.2, 0.9);
        assert!(x > 0.2 && x < 0.9);
        assert!((bounded_inverse(x, 0.2, 0.9).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn xi_reduced_rank_count() {
        let g = xi_map(&[0.5, 0.0], 2, &[0]).unwrap();
        assert_eq!(g.l.shape(), (2, 1));
        assert_eq!(g.l[(1, 0)], 0.5);
        assert_eq!(g.d[0], 1.0);
    }

    #[test]
    fn correlation_condition_number() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]);
        let t = conditions(&s).unwrap();
        assert_eq!(t[0], 0.0);
        assert!((t[1] - (1.0f64 - 0.81).ln()).abs() < 1e-12);
        assert!((t[1] + 1.6607).abs() < 1e-3);
        let sing = DMatrix::from_element(2, 2, 1.0);
        assert_eq!(conditions(&sing).unwrap()[1], f64::NEG_INFINITY);
    }

    #[test]
    fn render_pd_rank_one() {
        let s = DMatrix::from_element(2, 2, 1.0);
        let r = render_pd(&s, -1.66).unwrap();
        let expect = 1.0 / (1.66f64.exp() - 1.0);
        assert!((r[(1, 1)] - 1.0 - expect).abs() < 1e-12);
        assert!((r[(0, 1)] - 1.0).abs() < 1e-15);
        assert!(conditions(&r).unwrap()[1] >= -1.66 - 1e-12);
    }

    #[test]
    fn constraint_map_identity_when_absent() {
        let m = ConstraintMap::new(None, 3).unwrap();
        assert_eq!(m.eta_to_psi(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn constraint_map_satisfies_constraint() {
        let c = Constraint {
            b: DVector::from_vec(vec![1.0, 0.0]),
            c: DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0]),
        };
        let map = ConstraintMap::new(Some(&c), 4).unwrap();
        assert_eq!(map.eta_len(), 2);
        let psi = map.eta_to_psi(&[0.3, -2.0]);
        let res = &c.c * DVector::from_vec(psi.clone()) - &c.b;
        assert!(res.abs().max() < 1e-12);
        let eta = map.psi_to_eta(&psi);
        let again = map.eta_to_psi(&eta);
        for (a, b) in again.iter().zip(&psi) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tied_coefficients() {
        let mut mdl = ModelSpec::new(3, 10)
            .add_component("i", ComponentClass::WhiteNoise, vec![0, 1, 2], Bounds::default(), Poly::one())
            .unwrap();
        for j in 0..3 {
            mdl = mdl
                .add_regressor(j, crate::model::Regressor::custom("a", (0..10).map(|t| t as f64).collect()))
                .unwrap();
        }
        let con = constrain_reg(&mdl, &[vec![0], vec![0], vec![0]], None).unwrap();
        assert_eq!(con.c.nrows(), 2);
        let base = mdl.psi_len() - 3;
        assert_eq!(con.c[(0, base)], 1.0);
        assert_eq!(con.c[(0, base + 1)], -1.0);
    }

    #[test]
    fn constraint_csv_round_trip() {
        let c = Constraint::from_csv("0, 1, -1, 0\n2.5, 0, 0, 1\n").unwrap();
        assert_eq!(c.c.shape(), (2, 3));
        let again = Constraint::from_csv(&c.to_csv()).unwrap();
        assert_eq!(again, c);
    }
}
