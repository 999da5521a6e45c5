//! Model specification: latent components with their differencing
//! polynomials and covariance rank, plus per-series regressors.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::poly::{share_root, Poly};

/// Stationary model class of a latent component's differenced core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ComponentClass {
    WhiteNoise,
    Arma { p: usize, q: usize },
    Sarma { p: usize, q: usize, ps: usize, qs: usize, period: usize },
    Varma { p: usize, q: usize },
    Svarma { p: usize, q: usize, ps: usize, qs: usize, period: usize },
    Butterworth { order: usize },
    Balanced { order: usize },
    ButterworthStable { order: usize },
    BalancedStable { order: usize },
    DampedTrend,
}

impl ComponentClass {
    /// Number of serial parameters for a series of dimension `n`.
    pub fn zeta_len(&self, n: usize) -> usize {
        use ComponentClass::*;
        match *self {
            WhiteNoise => 0,
            Arma { p, q } => p + q,
            Sarma { p, q, ps, qs, .. } => p + q + ps + qs,
            Varma { p, q } => (p + q) * n * n,
            Svarma { p, q, ps, qs, .. } => (p + q + ps + qs) * n * n,
            Butterworth { .. } | Balanced { .. } | ButterworthStable { .. } | BalancedStable { .. } => 2,
            DampedTrend => 1,
        }
    }

    pub fn is_cycle(&self) -> bool {
        use ComponentClass::*;
        matches!(self, Butterworth { .. } | Balanced { .. } | ButterworthStable { .. } | BalancedStable { .. })
    }

    pub fn is_vector(&self) -> bool {
        matches!(self, ComponentClass::Varma { .. } | ComponentClass::Svarma { .. })
    }
}

/// Interval bounds for cycle persistence and frequency. A damped trend uses
/// the persistence pair as the bounds of its AR coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub omega_lo: f64,
    pub omega_hi: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { rho_lo: 0.0, rho_hi: 1.0, omega_lo: 0.0, omega_hi: std::f64::consts::PI }
    }
}

impl Bounds {
    pub fn damped(lo: f64, hi: f64) -> Self {
        Bounds { rho_lo: lo, rho_hi: hi, ..Bounds::default() }
    }

    pub fn cycle(rho_lo: f64, rho_hi: f64, omega_lo: f64, omega_hi: f64) -> Self {
        Bounds { rho_lo, rho_hi, omega_lo, omega_hi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentComponent {
    pub label: String,
    pub class: ComponentClass,
    /// Retained GCD columns (0-based); the covariance rank.
    pub vrank: Vec<usize>,
    pub bounds: Bounds,
    pub delta: Poly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorKind {
    /// `t^k` with `t = 1..=T`; can be extended outside the sample.
    Polynomial(u32),
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regressor {
    pub label: String,
    pub kind: RegressorKind,
    pub values: Vec<f64>,
}

impl Regressor {
    pub fn custom(label: impl Into<String>, values: Vec<f64>) -> Self {
        Regressor { label: label.into(), kind: RegressorKind::Custom, values }
    }

    pub fn polynomial(label: impl Into<String>, power: u32, t: usize) -> Self {
        let values = (1..=t).map(|i| (i as f64).powi(power as i32)).collect();
        Regressor { label: label.into(), kind: RegressorKind::Polynomial(power), values }
    }

    /// Value at time `t` (1-based, possibly outside the sample). Custom
    /// regressors are taken as zero outside the sample.
    pub fn value_at(&self, t: i64) -> f64 {
        match self.kind {
            RegressorKind::Polynomial(k) => (t as f64).powi(k as i32),
            RegressorKind::Custom => {
                if t >= 1 && (t as usize) <= self.values.len() {
                    self.values[t as usize - 1]
                } else {
                    0.0
                }
            }
        }
    }
}

pub const TREND_LABEL: &str = "Trend";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n: usize,
    pub t: usize,
    pub components: Vec<LatentComponent>,
    /// Regressors for each series.
    pub regressors: Vec<Vec<Regressor>>,
    /// Annihilation and root-sharing tolerance.
    pub null_tol: f64,
}

impl ModelSpec {
    pub fn new(n: usize, t: usize) -> Self {
        ModelSpec { n, t, components: Vec::new(), regressors: vec![Vec::new(); n], null_tol: 1e-8 }
    }

    pub fn with_null_tol(mut self, tol: f64) -> Self {
        self.null_tol = tol;
        self
    }

    /// Append a latent component. The differencing polynomial must share no
    /// root with any existing component's.
    pub fn add_component(
        mut self,
        label: impl Into<String>,
        class: ComponentClass,
        vrank: Vec<usize>,
        bounds: Bounds,
        delta: Poly,
    ) -> Result<Self> {
        if vrank.iter().any(|&v| v >= self.n) {
            return invalid("rank index exceeds series dimension");
        }
        let mut sorted = vrank.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted != vrank {
            return invalid("rank indices must be strictly increasing");
        }
        if delta.0.first().copied() != Some(1.0) {
            return invalid("differencing polynomial must have unit constant term");
        }
        if let ComponentClass::Sarma { period, .. } | ComponentClass::Svarma { period, .. } = class {
            if period < 2 {
                return invalid("seasonal period must be at least 2");
            }
        }
        for c in &self.components {
            if let Some(r) = share_root(&c.delta, &delta, self.null_tol) {
                return Err(Error::NotCoprime(format!("{r:.6} (with component '{}')", c.label)));
            }
        }
        self.components.push(LatentComponent { label: label.into(), class, vrank, bounds, delta });
        Ok(self)
    }

    /// Product of every component's differencing polynomial.
    pub fn full_delta(&self) -> Poly {
        Poly::product(self.components.iter().map(|c| &c.delta))
    }

    /// Product over all components except `k`.
    pub fn delta_omit(&self, k: usize) -> Poly {
        Poly::product(self.components.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, c)| &c.delta))
    }

    /// Product over the listed components.
    pub fn delta_of(&self, comps: &[usize]) -> Poly {
        Poly::product(comps.iter().map(|&k| &self.components[k].delta))
    }

    /// Add the default trend regressors to every series: `t^d` where `d` is
    /// the multiplicity of the unit root of the full differencing polynomial,
    /// or `t^0..=t^extra` when there is no unit root.
    pub fn mean_init(mut self, extra: u32) -> Self {
        let (d, _) = self.full_delta().unit_root_multiplicity(self.null_tol);
        let powers: Vec<u32> = if d > 0 { vec![d as u32] } else { (0..=extra).collect() };
        for j in 0..self.n {
            for &k in &powers {
                let reg = Regressor::polynomial(TREND_LABEL, k, self.t);
                self = self.add_regressor(j, reg).expect("trend regressor has sample length");
            }
        }
        self
    }

    /// Add a regressor for one series. A regressor annihilated by the full
    /// differencing polynomial is skipped without error.
    pub fn add_regressor(mut self, series: usize, reg: Regressor) -> Result<Self> {
        if series >= self.n {
            return invalid("series index out of range");
        }
        if reg.values.len() != self.t {
            return invalid(format!("regressor '{}' has length {} but sample has {}", reg.label, reg.values.len(), self.t));
        }
        if !self.annihilated(&reg.values) {
            self.regressors[series].push(reg);
        }
        Ok(self)
    }

    /// Whether the differencing polynomial maps the sequence to numerical zero.
    pub fn annihilated(&self, values: &[f64]) -> bool {
        let delta = self.full_delta();
        let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs())) * delta.l1_norm();
        if scale == 0.0 {
            return true;
        }
        let diffed = delta.filter_valid(values);
        diffed.iter().all(|v| v.abs() < self.null_tol * scale)
    }

    pub fn num_regressors(&self) -> usize {
        self.regressors.iter().map(|r| r.len()).sum()
    }

    /// Position of series `j`'s regressor `r` within the flat coefficient vector.
    pub fn beta_index(&self, series: usize, reg: usize) -> usize {
        self.regressors[..series].iter().map(|r| r.len()).sum::<usize>() + reg
    }

    pub fn xi_len(&self, k: usize) -> usize {
        let c = &self.components[k];
        c.vrank.iter().map(|&j| self.n - 1 - j).sum::<usize>() + c.vrank.len()
    }

    pub fn zeta_len(&self, k: usize) -> usize {
        self.components[k].class.zeta_len(self.n)
    }

    /// Total length of the pre-parameter vector.
    pub fn psi_len(&self) -> usize {
        (0..self.components.len()).map(|k| self.xi_len(k) + self.zeta_len(k)).sum::<usize>() + self.num_regressors()
    }

    pub fn max_delta_degree(&self) -> usize {
        self.full_delta().degree()
    }

    /// Replace the retained covariance columns of component `k`.
    pub fn with_vrank(mut self, k: usize, vrank: Vec<usize>) -> Self {
        self.components[k].vrank = vrank;
        self
    }
}
