//! Dense linear-algebra helpers: the generalized Cholesky (LDL') pair,
//! block Toeplitz assembly and small symmetric-matrix utilities.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Unit lower-triangular `l` (columns restricted to `vrank`) and diagonal `d`
/// so that `l * diag(d) * l'` reproduces the covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Gcd {
    pub l: DMatrix<f64>,
    pub d: DVector<f64>,
    pub vrank: Vec<usize>,
}

/// Relative pivot size below which a diagonal entry counts as zero.
pub const GCD_PIVOT_TOL: f64 = 1e-14;

impl Gcd {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let ld = &self.l * DMatrix::from_diagonal(&self.d);
        &ld * self.l.transpose()
    }

    /// Full-rank identity pair of dimension `n`.
    pub fn identity(n: usize) -> Gcd {
        Gcd {
            l: DMatrix::identity(n, n),
            d: DVector::from_element(n, 1.0),
            vrank: (0..n).collect(),
        }
    }

    /// Keep only the listed columns (indices into the full decomposition).
    pub fn restrict(&self, keep: &[usize]) -> Gcd {
        let cols: Vec<usize> = keep
            .iter()
            .filter_map(|k| self.vrank.iter().position(|v| v == k))
            .collect();
        Gcd {
            l: self.l.select_columns(&cols),
            d: DVector::from_iterator(cols.len(), cols.iter().map(|&c| self.d[c])),
            vrank: cols.iter().map(|&c| self.vrank[c]).collect(),
        }
    }
}

/// LDL' factorization without pivoting. Negative pivots are kept as they are;
/// pivots below `1e-14 * trace` are set to zero and their column below the
/// diagonal is zeroed.
pub fn gcd_decompose(sigma: &DMatrix<f64>) -> Result<Gcd> {
    let n = sigma.nrows();
    if n != sigma.ncols() {
        return invalid("covariance must be square");
    }
    let scale = (0..n).map(|i| sigma[(i, i)].abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut l = DMatrix::<f64>::identity(n, n);
    let mut d = DVector::<f64>::zeros(n);
    for j in 0..n {
        let mut dj = sigma[(j, j)];
        for k in 0..j {
            dj -= l[(j, k)] * l[(j, k)] * d[k];
        }
        if dj.abs() < GCD_PIVOT_TOL * scale {
            dj = 0.0;
        }
        d[j] = dj;
        for i in j + 1..n {
            if dj == 0.0 {
                l[(i, j)] = 0.0;
                continue;
            }
            let mut v = sigma[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)] * d[k];
            }
            l[(i, j)] = v / dj;
        }
    }
    Ok(Gcd { l, d, vrank: (0..n).collect() })
}

/// Symmetric block Toeplitz matrix with block `(i, j)` equal to `gamma[i - j]`
/// for `i >= j` and its transpose otherwise. Lags at or beyond
/// `gamma.len()` are treated as zero.
pub fn block_toeplitz(gamma: &[DMatrix<f64>], t: usize) -> DMatrix<f64> {
    let n = gamma.first().map(|g| g.nrows()).unwrap_or(1);
    let mut out = DMatrix::zeros(n * t, n * t);
    for i in 0..t {
        for j in 0..=i {
            let h = i - j;
            if h >= gamma.len() {
                continue;
            }
            let g = &gamma[h];
            for a in 0..n {
                for b in 0..n {
                    out[(i * n + a, j * n + b)] = g[(a, b)];
                    out[(j * n + b, i * n + a)] = g[(a, b)];
                }
            }
        }
    }
    out
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Lower Cholesky factor or a `NotPositiveDefinite` error naming `what`.
pub fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

/// Apply a real function to the eigenvalues of a symmetric matrix.
pub fn sym_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = symmetrize(m).symmetric_eigen();
    let vals = eig.eigenvalues.map(f);
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Moore-Penrose inverse of a symmetric matrix, dropping eigenvalues below
/// `tol` relative to the largest.
pub fn sym_pinv(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let eig = symmetrize(m).symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let vals = eig
        .eigenvalues
        .map(|v| if v.abs() > tol * top && top > 0.0 { 1.0 / v } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

pub fn log_det_chol(l: &DMatrix<f64>) -> f64 {
    2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Spectral radius of the companion matrix of `x_t = sum_j a_j x_{t-j}`.
pub fn companion_radius(coefs: &[DMatrix<f64>]) -> f64 {
    if coefs.is_empty() {
        return 0.0;
    }
    let n = coefs[0].nrows();
    let p = coefs.len();
    let mut c = DMatrix::<f64>::zeros(n * p, n * p);
    for (j, a) in coefs.iter().enumerate() {
        c.view_mut((0, j * n), (n, n)).copy_from(a);
    }
    for i in n..n * p {
        c[(i, i - n)] = 1.0;
    }
    c.complex_eigenvalues().iter().fold(0.0, |a, z| a.max(z.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gcd_reconstructs_pd() {
        let s = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.4, 2.0, 3.0, 0.5, 0.4, 0.5, 2.0]);
        let g = gcd_decompose(&s).unwrap();
        assert!((g.matrix() - &s).abs().max() < 1e-12);
        assert!(g.d.iter().all(|&v| v > 0.0));
        for i in 0..3 {
            assert_eq!(g.l[(i, i)], 1.0);
        }
    }

    #[test]
    fn gcd_rank_one() {
        let s = DMatrix::from_element(2, 2, 1.0);
        let g = gcd_decompose(&s).unwrap();
        assert_eq!(g.d[0], 1.0);
        assert_eq!(g.d[1], 0.0);
        assert_eq!(g.l[(1, 0)], 1.0);
        let r = g.restrict(&[0]);
        assert_eq!(r.l.ncols(), 1);
        assert!((r.matrix() - s).abs().max() < 1e-15);
    }

    #[test]
    fn gcd_keeps_negative_pivots() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let g = gcd_decompose(&s).unwrap();
        assert!((g.d[1] + 3.0).abs() < 1e-12);
        assert!((g.matrix() - s).abs().max() < 1e-12);
    }

    #[test]
    fn toeplitz_layout() {
        let g = vec![DMatrix::from_element(1, 1, 2.0), DMatrix::from_element(1, 1, 0.5)];
        let m = block_toeplitz(&g, 3);
        assert_eq!(m[(0, 0)], 2.0);
        assert_eq!(m[(1, 0)], 0.5);
        assert_eq!(m[(0, 1)], 0.5);
        assert_eq!(m[(2, 0)], 0.0);
    }

    #[test]
    fn companion_of_ar1() {
        let r = companion_radius(&[DMatrix::from_element(1, 1, 0.7)]);
        assert!((r - 0.7).abs() < 1e-12);
    }
}
