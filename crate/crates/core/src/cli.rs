//! Configuration, bundles and file formats behind the command-line tool,
//! plus one function per command.
//!
//! A run is described by a TOML file with `[data]`, `[model]`, `[fit]`,
//! `[extract]`, `[cast]`, `[filters]` and `[simulate]` tables. Fitting
//! writes a JSON bundle holding the data (with a SHA-256 digest), the model,
//! the fitted pre-parameter and the configuration, which the other commands
//! read back.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calendar::{gethol, read_holiday_file, CalendarDate};
use crate::error::{invalid, Error, Result};
use crate::extract::{
    adhoc_extract, extract, frf, hi_to_low, publish_decomposition, signal_matrix, wk_coeffs, wk_extract,
    x11_filters, FilterKernel, Routing, Side,
};
use crate::fit::{check_constraint, gauss_check, mle_fit, mom_fit, portmanteau, tstats, FitOptions};
use crate::gauss::{cast_extract, fixed_effect, lik, midcast, resid, simulate, ExtractionTriple};
use crate::model::{Bounds, ComponentClass, ModelSpec, Regressor};
use crate::param::{conditions, par_to_psi, psi_to_par, reduce, Constraint, ParamSet};
use crate::poly::{MatPoly, Poly};

/// Format a number with 12 significant digits; missing values become `NA`.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        return "NA".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{}", format!("{:.11e}", v).parse::<f64>().unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    None,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Mle,
    Mom,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mle" => Ok(Method::Mle),
            "mom" => Ok(Method::Mom),
            _ => Err(Error::Parse(format!("unknown method '{s}' (expected mle or mom)"))),
        }
    }
}

fn default_na() -> String {
    "NA".into()
}
fn one() -> f64 {
    1.0
}
fn unit_poly() -> Vec<f64> {
    vec![1.0]
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    #[serde(default = "default_na")]
    pub na: String,
    /// ISO date of the first row; rows advance by `step_days`.
    pub start_date: Option<String>,
    pub step_days: Option<u32>,
    /// Year and period index of the first row (used without `start_date`).
    pub start_year: Option<i32>,
    pub start_period: Option<u32>,
    #[serde(default = "one")]
    pub period: f64,
    /// Column names to keep, in order.
    pub series: Option<Vec<String>>,
    /// First and last row to keep, 1-based inclusive.
    pub range: Option<[usize; 2]>,
    #[serde(default)]
    pub transform: Transform,
    /// Replace the selected series by their sum.
    #[serde(default)]
    pub aggregate: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentConfig {
    pub label: String,
    #[serde(flatten)]
    pub class: ComponentClass,
    #[serde(default = "unit_poly")]
    pub delta: Vec<f64>,
    /// Retained covariance columns, 1-based; all by default.
    pub vrank: Option<Vec<usize>>,
    pub rho: Option<[f64; 2]>,
    pub omega: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RegressorConfig {
    pub label: String,
    /// Series receiving the regressor, 1-based; all by default.
    pub series: Option<Vec<usize>>,
    /// CSV with a header row; `column` picks the column (first by default).
    pub file: Option<PathBuf>,
    pub column: Option<String>,
    /// Holiday date file (one `MM DD YYYY` date per line) for a
    /// moving-holiday regressor; needs dated rows.
    pub holiday: Option<PathBuf>,
    #[serde(default)]
    pub before: u32,
    #[serde(default)]
    pub after: u32,
    #[serde(default)]
    pub center: bool,
    /// Polynomial time trend `t^power`.
    pub power: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub components: Vec<ComponentConfig>,
    #[serde(default)]
    pub regressors: Vec<RegressorConfig>,
    /// Add the default polynomial trend regressors.
    #[serde(default = "yes")]
    pub trend: bool,
    /// Constraint CSV with rows `b, c_1, ..., c_len`.
    pub constraint: Option<PathBuf>,
    /// Initial pre-parameter; zeros by default.
    pub psi: Option<Vec<f64>>,
    pub null_tol: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { components: Vec::new(), regressors: Vec::new(), trend: true, constraint: None, psi: None, null_tol: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default)]
    pub method: Method,
    /// Start the likelihood fit from moment estimates.
    #[serde(default)]
    pub mom_init: bool,
    /// Condition-number threshold used to repair moment estimates.
    #[serde(default = "default_reduce")]
    pub reduce_threshold: f64,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    pub portmanteau_lag: Option<usize>,
}

fn default_reduce() -> f64 {
    -6.0
}
fn default_grad_tol() -> f64 {
    1e-6
}
fn default_max_evals() -> usize {
    10_000
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            method: Method::Mle,
            mom_init: false,
            reduce_threshold: default_reduce(),
            grad_tol: default_grad_tol(),
            max_evals: default_max_evals(),
            portmanteau_lag: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SignalMethod {
    #[default]
    Wk,
    Matrix,
    Adhoc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum X11Part {
    Trend,
    Seasonal,
    Sa,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct X11Config {
    pub period: f64,
    #[serde(default = "one_usize")]
    pub order: usize,
    pub part: X11Part,
    /// Embed the filter for blocks of this many high-frequency values.
    pub embed: Option<usize>,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalConfig {
    pub name: String,
    /// Components summed into the signal, 1-based.
    #[serde(default)]
    pub components: Vec<usize>,
    #[serde(default)]
    pub method: SignalMethod,
    /// Scalar target polynomial applied to every series.
    pub target: Option<Vec<f64>>,
    /// Ad hoc kernel file (see the filter CSV format).
    pub kernel: Option<PathBuf>,
    pub x11: Option<X11Config>,
    /// Regression effects (by label) added to the extraction.
    #[serde(default)]
    pub fixed: Vec<String>,
    /// Vertical offset for plotting.
    #[serde(default)]
    pub displace: f64,
    #[serde(default = "yes")]
    pub plot: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishConfig {
    pub signal: String,
    pub complement: String,
    /// Data including values treated as missing during estimation.
    pub original: Option<PathBuf>,
    /// Regression labels routed to the signal table; others go to the
    /// complement. Defaults to the trend polynomial only.
    pub signal_fixed: Option<Vec<String>>,
    /// Route the casting error to the complement instead of the signal.
    #[serde(default)]
    pub error_to_complement: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractConfig {
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub horizon: usize,
    #[serde(default)]
    pub signals: Vec<SignalConfig>,
    pub publish: Option<PublishConfig>,
}

fn default_window() -> usize {
    50
}
fn default_grid() -> usize {
    7000
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig { window: default_window(), grid: default_grid(), horizon: 0, signals: Vec::new(), publish: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CastConfig {
    #[serde(default = "default_span")]
    pub span: usize,
}

fn default_span() -> usize {
    50
}

impl Default for CastConfig {
    fn default() -> Self {
        CastConfig { span: default_span() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiltersConfig {
    /// Seasonal period; the data period by default.
    pub period: Option<f64>,
    #[serde(default = "one_usize")]
    pub order: usize,
    pub embed: Option<usize>,
    #[serde(default = "default_frf_grid")]
    pub grid: usize,
}

fn default_frf_grid() -> usize {
    1000
}

impl Default for FiltersConfig {
    fn default() -> Self {
        FiltersConfig { period: None, order: 1, embed: None, grid: default_frf_grid() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_sim_t")]
    pub t: usize,
    /// Number of series; taken from `data.series` when absent.
    pub n: Option<usize>,
    #[serde(default = "default_burn")]
    pub burn: usize,
    #[serde(default)]
    pub seed: u64,
    /// Generating pre-parameter; the model's initial value by default.
    pub psi: Option<Vec<f64>>,
}

fn default_sim_t() -> usize {
    200
}
fn default_burn() -> usize {
    100
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { t: default_sim_t(), n: None, burn: default_burn(), seed: 0, psi: None }
    }
}

/// Whole run description.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub extract: ExtractConfig,
    #[serde(default)]
    pub cast: CastConfig,
    #[serde(default)]
    pub filters: FiltersConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    /// Directory that relative paths are resolved against.
    #[serde(default)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        RunConfig::from_toml(&text, dir)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Time labels of sample rows.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeIndex {
    Dates { start: CalendarDate, step: u32 },
    Periods { year: i32, first: u32, period: u32 },
    Plain,
}

impl TimeIndex {
    pub fn from_config(d: &DataConfig) -> Result<TimeIndex> {
        let base = if let Some(s) = &d.start_date {
            TimeIndex::Dates { start: s.parse()?, step: d.step_days.unwrap_or(1).max(1) }
        } else if let Some(year) = d.start_year {
            let period = d.period.round().max(1.0) as u32;
            TimeIndex::Periods { year, first: d.start_period.unwrap_or(1).clamp(1, period), period }
        } else {
            TimeIndex::Plain
        };
        Ok(match d.range {
            Some([a, _]) if a > 1 => base.shifted(a as i64 - 1),
            _ => base,
        })
    }

    pub fn shifted(&self, k: i64) -> TimeIndex {
        match *self {
            TimeIndex::Dates { start, step } => TimeIndex::Dates { start: start.add_days(k * step as i64), step },
            TimeIndex::Periods { year, first, period } => {
                let idx = year as i64 * period as i64 + (first as i64 - 1) + k;
                TimeIndex::Periods { year: idx.div_euclid(period as i64) as i32, first: idx.rem_euclid(period as i64) as u32 + 1, period }
            }
            TimeIndex::Plain => TimeIndex::Plain,
        }
    }

    pub fn header(&self) -> Vec<String> {
        match self {
            TimeIndex::Dates { .. } => vec!["date".into()],
            TimeIndex::Periods { .. } => vec!["year".into(), "period".into()],
            TimeIndex::Plain => vec!["t".into()],
        }
    }

    /// Labels of row offset `k` (0 is the first sample row; negative is
    /// before the sample).
    pub fn label(&self, k: i64) -> Vec<String> {
        match self.shifted(k) {
            TimeIndex::Dates { start, .. } => vec![start.to_string()],
            TimeIndex::Periods { year, first, .. } => vec![year.to_string(), first.to_string()],
            TimeIndex::Plain => vec![(k + 1).to_string()],
        }
    }

    pub fn date(&self, k: i64) -> Option<CalendarDate> {
        match self.shifted(k) {
            TimeIndex::Dates { start, .. } => Some(start),
            _ => None,
        }
    }
}

/// Series loaded from a data file.
#[derive(Debug, Clone)]
pub struct Sample {
    pub values: DMatrix<f64>,
    pub names: Vec<String>,
    pub times: TimeIndex,
}

/// Time-index column names written by this tool; skipped when reading data.
pub const TIME_COLUMNS: [&str; 4] = ["date", "year", "period", "t"];

/// Parse CSV text with a header row of names; `na` and empty fields are
/// missing. Time-index columns are dropped.
pub fn parse_csv(text: &str, na: &str) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.iter().map(String::from).collect();
    let keep: Vec<usize> = (0..header.len()).filter(|&c| !TIME_COLUMNS.contains(&header[c].as_str())).collect();
    let names: Vec<String> = keep.iter().map(|&c| header[c].clone()).collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("row {}: {e}", i + 2)))?;
        let row: Result<Vec<f64>> = keep
            .iter()
            .map(|&c| {
                let f = rec.get(c).unwrap_or("");
                if f.is_empty() || f == na {
                    Ok(f64::NAN)
                } else {
                    f.parse::<f64>().map_err(|_| Error::Parse(format!("row {}: bad value '{f}'", i + 2)))
                }
            })
            .collect();
        rows.push(row?);
    }
    let t = rows.len();
    Ok((names.clone(), DMatrix::from_fn(t, names.len(), |r, c| rows[r][c])))
}

/// Read, subset, restrict, transform and aggregate the data.
pub fn ingest(cfg: &RunConfig) -> Result<Sample> {
    let d = &cfg.data;
    let path = d.path.as_ref().ok_or_else(|| Error::InvalidInput("data.path is not set".into()))?;
    let text = fs::read_to_string(cfg.resolve(path))?;
    let (names, all) = parse_csv(&text, &d.na)?;
    let cols: Vec<usize> = match &d.series {
        Some(sel) => sel
            .iter()
            .map(|s| names.iter().position(|n| n == s).ok_or_else(|| Error::InvalidInput(format!("no series named '{s}'"))))
            .collect::<Result<_>>()?,
        None => (0..names.len()).collect(),
    };
    let (r0, r1) = match d.range {
        Some([a, b]) => {
            if a == 0 || b < a || b > all.nrows() {
                return invalid(format!("range [{a}, {b}] outside 1..={}", all.nrows()));
            }
            (a - 1, b)
        }
        None => (0, all.nrows()),
    };
    let mut values = DMatrix::from_fn(r1 - r0, cols.len(), |r, c| all[(r0 + r, cols[c])]);
    let mut names: Vec<String> = cols.iter().map(|&c| names[c].clone()).collect();
    if d.transform == Transform::Log {
        if values.iter().any(|v| !v.is_nan() && *v <= 0.0) {
            return invalid("log transform needs positive data");
        }
        values.iter_mut().for_each(|v| *v = v.ln());
    }
    if d.aggregate {
        let sum = DMatrix::from_fn(values.nrows(), 1, |r, _| values.row(r).sum());
        values = sum;
        names = vec!["aggregate".into()];
    }
    Ok(Sample { values, names, times: TimeIndex::from_config(d)? })
}

fn read_column(path: &Path, column: Option<&str>) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let (names, m) = parse_csv(&text, "NA")?;
    let c = match column {
        Some(c) => names.iter().position(|n| n == c).ok_or_else(|| Error::InvalidInput(format!("no column '{c}' in {}", path.display())))?,
        None => 0,
    };
    Ok(m.column(c).iter().copied().collect())
}

/// Model, constraint and initial parameters for a sample of `t` rows and
/// `n` series.
pub fn build_model(cfg: &RunConfig, n: usize, t: usize, times: &TimeIndex) -> Result<(ModelSpec, Option<Constraint>)> {
    let mc = &cfg.model;
    let mut mdl = ModelSpec::new(n, t);
    if let Some(tol) = mc.null_tol {
        mdl = mdl.with_null_tol(tol);
    }
    for c in &mc.components {
        let vrank = match &c.vrank {
            Some(v) => {
                if v.contains(&0) {
                    return invalid(format!("component '{}': vrank is 1-based", c.label));
                }
                v.iter().map(|i| i - 1).collect()
            }
            None => (0..n).collect(),
        };
        let mut bounds = Bounds::default();
        if let Some([a, b]) = c.rho {
            bounds.rho_lo = a;
            bounds.rho_hi = b;
        }
        if let Some([a, b]) = c.omega {
            bounds.omega_lo = a;
            bounds.omega_hi = b;
        }
        mdl = mdl.add_component(c.label.clone(), c.class, vrank, bounds, Poly(c.delta.clone()))?;
    }
    if mdl.components.is_empty() {
        return invalid("model has no components");
    }
    if mc.trend {
        mdl = mdl.mean_init(0);
    }
    let offset = cfg.data.range.map(|[a, _]| a - 1).unwrap_or(0);
    for rc in &mc.regressors {
        let values: Vec<f64> = if let Some(p) = rc.power {
            Regressor::polynomial(&rc.label, p, t).values
        } else if let Some(f) = &rc.file {
            let col = read_column(&cfg.resolve(f), rc.column.as_deref())?;
            if col.len() < offset + t {
                return invalid(format!("regressor '{}' has {} rows, need {}", rc.label, col.len(), offset + t));
            }
            col[offset..offset + t].to_vec()
        } else if let Some(h) = &rc.holiday {
            let dates = read_holiday_file(&cfg.resolve(h))?;
            let (Some(start), TimeIndex::Dates { step, .. }) = (times.date(0), times) else {
                return invalid("holiday regressors need dated rows (data.start_date)");
            };
            let end = start.add_days(t as i64 * *step as i64 - 1);
            let daily = gethol(&dates, rc.before, rc.after, start, end, rc.center)?;
            daily.chunks(*step as usize).map(|c| c.iter().sum()).collect()
        } else {
            return invalid(format!("regressor '{}' needs power, file or holiday", rc.label));
        };
        if values.iter().any(|v| v.is_nan()) {
            return invalid(format!("regressor '{}' has missing values", rc.label));
        }
        let series: Vec<usize> = match &rc.series {
            Some(s) => s.iter().map(|&i| i.checked_sub(1).ok_or_else(|| Error::InvalidInput("regressor series are 1-based".into()))).collect::<Result<_>>()?,
            None => (0..n).collect(),
        };
        for j in series {
            mdl = mdl.add_regressor(j, Regressor::custom(rc.label.clone(), values.clone()))?;
        }
    }
    let constraint = match &mc.constraint {
        Some(p) => Some(Constraint::from_csv(&fs::read_to_string(cfg.resolve(p))?)?),
        None => None,
    };
    Ok((mdl, constraint))
}

fn initial_psi(cfg: &RunConfig, mdl: &ModelSpec) -> Result<Vec<f64>> {
    match &cfg.model.psi {
        Some(p) if p.len() != mdl.psi_len() => invalid(format!("model.psi has {} entries, model needs {}", p.len(), mdl.psi_len())),
        Some(p) => Ok(p.clone()),
        None => Ok(vec![0.0; mdl.psi_len()]),
    }
}

/// Fitted model with its data, written by `fit` and read by the other
/// commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bundle {
    pub config: RunConfig,
    pub names: Vec<String>,
    pub data: Vec<Vec<Option<f64>>>,
    pub data_sha256: String,
    pub transform: Transform,
    pub model: ModelSpec,
    pub method: Method,
    pub psi: Vec<f64>,
    pub eta: Vec<f64>,
    pub divergence: f64,
    pub converged: bool,
    pub hessian: Vec<Vec<Option<f64>>>,
    pub constraint: Option<ConstraintRows>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintRows {
    pub b: Vec<f64>,
    pub c: Vec<Vec<f64>>,
}

fn opt(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// SHA-256 of the data rendered as CSV rows.
pub fn data_digest(m: &DMatrix<f64>) -> String {
    let mut h = Sha256::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|v| fmt_num(*v)).collect();
        h.update(row.join(",").as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl Bundle {
    pub fn data_matrix(&self) -> DMatrix<f64> {
        let t = self.data.len();
        let n = self.names.len();
        DMatrix::from_fn(t, n, |r, c| self.data[r][c].unwrap_or(f64::NAN))
    }

    pub fn hessian_matrix(&self) -> DMatrix<f64> {
        let k = self.hessian.len();
        DMatrix::from_fn(k, k, |r, c| self.hessian[r][c].unwrap_or(f64::NAN))
    }

    pub fn constraint(&self) -> Option<Constraint> {
        self.constraint.as_ref().map(|c| Constraint {
            b: DVector::from_vec(c.b.clone()),
            c: DMatrix::from_fn(c.c.len(), c.c.first().map(Vec::len).unwrap_or(0), |i, j| c.c[i][j]),
        })
    }

    pub fn par(&self) -> Result<ParamSet> {
        psi_to_par(&self.psi, &self.model)
    }

    pub fn times(&self) -> Result<TimeIndex> {
        TimeIndex::from_config(&self.config.data)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Bundle> {
        let b: Bundle = serde_json::from_str(text).map_err(|e| Error::Parse(format!("bundle: {e}")))?;
        if data_digest(&b.data_matrix()) != b.data_sha256 {
            return Err(Error::Parse("bundle data checksum mismatch".into()));
        }
        Ok(b)
    }

    pub fn load(path: &Path) -> Result<Bundle> {
        Bundle::from_json(&fs::read_to_string(path)?)
    }
}

/// Write a CSV with time labels. `first` is the row offset of the first
/// row relative to the sample start.
pub fn write_table(path: &Path, times: &TimeIndex, first: i64, header: &[String], cols: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    let mut h = times.header();
    h.extend(header.iter().cloned());
    w.write_record(&h).map_err(|e| Error::Parse(e.to_string()))?;
    let rows = cols.first().map(Vec::len).unwrap_or(0);
    for r in 0..rows {
        let mut rec = times.label(first + r as i64);
        rec.extend(cols.iter().map(|c| fmt_num(c[r])));
        w.write_record(&rec).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn triple_columns(names: &[String], tr: &ExtractionTriple) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut header = Vec::new();
    let mut cols = Vec::new();
    for (j, name) in names.iter().enumerate() {
        for (suffix, m) in [("point", &tr.point), ("lower", &tr.lower), ("upper", &tr.upper)] {
            header.push(format!("{name}_{suffix}"));
            cols.push(m.column(j).iter().copied().collect());
        }
    }
    (header, cols)
}

/// Minimal SVG line plot: one line per series with a shaded band.
pub fn svg_plot(title: &str, names: &[String], tr: &ExtractionTriple, displace: f64) -> String {
    let (w, h, pad) = (800.0, 320.0, 40.0);
    let rows = tr.point.nrows();
    let vals = tr.lower.iter().chain(tr.upper.iter()).chain(tr.point.iter()).filter(|v| v.is_finite()).map(|v| v + displace);
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0) };
    let x = |r: usize| pad + (w - 2.0 * pad) * r as f64 / (rows.max(2) - 1) as f64;
    let y = |v: f64| h - pad - (h - 2.0 * pad) * (v + displace - lo) / (hi - lo);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n");
    let _ = writeln!(s, "<text x=\"{pad}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>");
    let _ = writeln!(s, "<rect x=\"{pad}\" y=\"{pad}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>", w - 2.0 * pad, h - 2.0 * pad);
    for (j, name) in names.iter().enumerate() {
        let col = colors[j % colors.len()];
        let mut band = String::new();
        for r in 0..rows {
            if tr.upper[(r, j)].is_finite() {
                let _ = write!(band, "{:.2},{:.2} ", x(r), y(tr.upper[(r, j)]));
            }
        }
        for r in (0..rows).rev() {
            if tr.lower[(r, j)].is_finite() {
                let _ = write!(band, "{:.2},{:.2} ", x(r), y(tr.lower[(r, j)]));
            }
        }
        let _ = writeln!(s, "<polygon points=\"{}\" fill=\"{col}\" fill-opacity=\"0.2\" stroke=\"none\"/>", band.trim_end());
        let line: Vec<String> =
            (0..rows).filter(|&r| tr.point[(r, j)].is_finite()).map(|r| format!("{:.2},{:.2}", x(r), y(tr.point[(r, j)]))).collect();
        let _ = writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"{col}\" stroke-width=\"1.2\"><title>{name}</title></polyline>", line.join(" "));
    }
    s.push_str("</svg>\n");
    s
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Project `psi` onto `c psi = b`.
/// Lift zero moment-estimated variances to a small positive value so the
/// start point has finite log pivots.
fn floor_pivots(par: &mut ParamSet) {
    let top = par.covs.iter().flat_map(|g| g.d.iter().copied()).fold(0.0f64, f64::max);
    let tiny = if top > 0.0 { 1e-6 * top } else { 1e-6 };
    for g in &mut par.covs {
        for d in g.d.iter_mut() {
            if !(*d >= tiny) {
                *d = tiny;
            }
        }
    }
}

fn project(psi: &[f64], con: &Constraint) -> Result<Vec<f64>> {
    let p = DVector::from_column_slice(psi);
    let r = &con.c * &p - &con.b;
    let cct = &con.c * con.c.transpose();
    let sol = cct.cholesky().ok_or_else(|| Error::Constraint("constraint rows are dependent".into()))?.solve(&r);
    Ok((p - con.c.transpose() * sol).iter().copied().collect())
}

fn condition_report(mdl: &ModelSpec, par: &ParamSet) -> Result<String> {
    let mut s = String::from("condition numbers (one row per component, one value per series):\n");
    for (k, c) in mdl.components.iter().enumerate() {
        let tau = conditions(&par.sigma(k))?;
        let vals: Vec<String> = tau.iter().map(|v| fmt_num(*v)).collect();
        let _ = writeln!(s, "{} {}", c.label, vals.join(" "));
    }
    Ok(s)
}

/// Fit the configured model and write `bundle.json` into `out_dir`.
pub fn cmd_fit(cfg: &RunConfig, method: Option<Method>, out_dir: &Path) -> Result<(Bundle, String)> {
    let sample = ingest(cfg)?;
    let (t, n) = sample.values.shape();
    let (mdl, constraint) = build_model(cfg, n, t, &sample.times)?;
    let data = &sample.values;
    let method = method.unwrap_or(cfg.fit.method);
    let psi0 = initial_psi(cfg, &mdl)?;
    let mut report = String::new();
    let (mdl, psi, eta, div, conv, hess) = match method {
        Method::Mom => {
            if constraint.is_some() {
                return Err(Error::Constraint("constraints apply to likelihood fits only".into()));
            }
            let init = psi_to_par(&psi0, &mdl)?;
            let raw = mom_fit(data, &init, &mdl)?;
            let (par, mdl) = reduce(&raw, &mdl, cfg.fit.reduce_threshold, true)?;
            let psi = par_to_psi(&par, &mdl)?;
            let div = lik(&psi, &mdl, data)?;
            (mdl, psi.clone(), psi, div, true, DMatrix::zeros(0, 0))
        }
        Method::Mle => {
            check_constraint(constraint.as_ref(), &psi0).map_err(|e| match (e, &constraint) {
                (Error::Constraint(m), Some(con)) => {
                    let bad: Vec<String> = (0..con.c.nrows())
                        .filter(|&i| (con.c.row(i) * DVector::from_column_slice(&psi0))[0] - con.b[i] != 0.0)
                        .map(|i| {
                            let coords: Vec<String> =
                                (0..con.c.ncols()).filter(|&j| con.c[(i, j)] != 0.0).map(|j| format!("psi[{}]", j + 1)).collect();
                            format!("row {} over {}", i + 1, coords.join(", "))
                        })
                        .collect();
                    Error::Constraint(format!("initial parameter violates the constraint: {m}; {}", bad.join("; ")))
                }
                (e, _) => e,
            })?;
            let mut start = psi_to_par(&psi0, &mdl)?;
            if cfg.fit.mom_init {
                let raw = mom_fit(data, &start, &mdl)?;
                let (mut par, _) = reduce(&raw, &mdl, cfg.fit.reduce_threshold, false)?;
                floor_pivots(&mut par);
                let mut p = par_to_psi(&par, &mdl)?;
                if let Some(con) = &constraint {
                    p = project(&p, con)?;
                }
                start = psi_to_par(&p, &mdl)?;
            }
            let opts = FitOptions { grad_tol: cfg.fit.grad_tol, max_evals: cfg.fit.max_evals, ..FitOptions::default() };
            let mut last: Vec<f64> = Vec::new();
            let mut cb = |eta: &[f64], _v: f64| {
                last.clear();
                last.extend_from_slice(eta);
            };
            let res = mle_fit(data, &start, constraint.as_ref(), &mdl, &opts, Some(&mut cb))?;
            if !res.converged {
                ensure_dir(out_dir)?;
                fs::write(out_dir.join("checkpoint.json"), serde_json::to_string(&last).unwrap_or_default())?;
                report.push_str("warning: optimizer stopped before convergence; last point written to checkpoint.json\n");
            }
            let ts = tstats(&res.psi, &res.hessian, &res.map);
            report.push_str("t statistics:\n");
            for (i, (p, tv)) in res.psi.iter().zip(&ts).enumerate() {
                let _ = writeln!(report, "psi[{}] {} {}", i + 1, fmt_num(*p), fmt_num(*tv));
            }
            (mdl, res.psi, res.eta, res.divergence, res.converged, res.hessian)
        }
    };
    let par = psi_to_par(&psi, &mdl)?;
    let mut head = format!("divergence {}\nconverged {}\n", fmt_num(div), conv);
    head.push_str(&condition_report(&mdl, &par)?);
    head.push_str(&report);
    let bundle = Bundle {
        config: cfg.clone(),
        names: sample.names.clone(),
        data: (0..t).map(|r| (0..n).map(|c| opt(data[(r, c)])).collect()).collect(),
        data_sha256: data_digest(data),
        transform: cfg.data.transform,
        model: mdl,
        method,
        psi,
        eta,
        divergence: div,
        converged: conv,
        hessian: (0..hess.nrows()).map(|r| (0..hess.ncols()).map(|c| opt(hess[(r, c)])).collect()).collect(),
        constraint: constraint.map(|c| ConstraintRows {
            b: c.b.iter().copied().collect(),
            c: (0..c.c.nrows()).map(|i| c.c.row(i).iter().copied().collect()).collect(),
        }),
    };
    ensure_dir(out_dir)?;
    fs::write(out_dir.join("bundle.json"), bundle.to_json()?)?;
    Ok((bundle, head))
}

/// Residual diagnostics: residual series, portmanteau test, normality
/// p-values and residual autocorrelations.
pub fn cmd_diagnose(bundle: &Bundle, out_dir: &Path) -> Result<String> {
    let data = bundle.data_matrix();
    let mdl = &bundle.model;
    let par = bundle.par()?;
    let (res, _) = resid(mdl, &par, &data)?;
    let d = mdl.full_delta().degree();
    let times = bundle.times()?;
    ensure_dir(out_dir)?;
    let cols: Vec<Vec<f64>> = (0..res.ncols()).map(|j| res.column(j).iter().copied().collect()).collect();
    write_table(&out_dir.join("residuals.csv"), &times, d as i64, &bundle.names, &cols)?;
    let period = bundle.config.data.period.round().max(1.0) as usize;
    let max_lag = (4 * period).max(4).min(res.nrows().saturating_sub(2));
    let lag = bundle.config.fit.portmanteau_lag.unwrap_or(max_lag).min(res.nrows().saturating_sub(2));
    let (stat, p) = portmanteau(&res, lag, bundle.psi.len())?;
    let normal = gauss_check(&res)?;
    let mut acf_cols = Vec::new();
    for col in &cols {
        let m = col.iter().sum::<f64>() / col.len() as f64;
        let c0: f64 = col.iter().map(|v| (v - m).powi(2)).sum();
        acf_cols.push(
            (1..=max_lag)
                .map(|h| (h..col.len()).map(|t| (col[t] - m) * (col[t - h] - m)).sum::<f64>() / c0)
                .collect::<Vec<f64>>(),
        );
    }
    let mut w = String::from("lag");
    for n in &bundle.names {
        let _ = write!(w, ",{n}");
    }
    w.push('\n');
    for h in 0..max_lag {
        let _ = write!(w, "{}", h + 1);
        for c in &acf_cols {
            let _ = write!(w, ",{}", fmt_num(c[h]));
        }
        w.push('\n');
    }
    fs::write(out_dir.join("residual_acf.csv"), w)?;
    let mut s = format!("portmanteau lag {lag}: {} {}\n", fmt_num(stat), fmt_num(p));
    let ps: Vec<String> = normal.iter().map(|v| fmt_num(*v)).collect();
    let _ = writeln!(s, "normality p-values: {}", ps.join(" "));
    Ok(s)
}

/// Overrides for [`cmd_extract`] taken from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExtractFlags {
    pub window: Option<usize>,
    pub grid: Option<usize>,
    pub horizon: Option<usize>,
    pub frf: bool,
    pub wk_coeffs: bool,
}

fn adhoc_kernel(sc: &SignalConfig, base: &RunConfig) -> Result<FilterKernel> {
    if let Some(p) = &sc.kernel {
        return FilterKernel::from_csv(&fs::read_to_string(base.resolve(p))?);
    }
    let Some(x) = &sc.x11 else {
        return invalid(format!("signal '{}' needs a kernel file or x11 settings", sc.name));
    };
    let (trend, seas, sa) = x11_filters(x.period, x.order)?;
    let k = match x.part {
        X11Part::Trend => trend,
        X11Part::Seasonal => seas,
        X11Part::Sa => sa,
    };
    match x.embed {
        Some(s) => hi_to_low(&k, s),
        None => Ok(k),
    }
}

fn comps0(sc: &SignalConfig, mdl: &ModelSpec) -> Result<Vec<usize>> {
    sc.components
        .iter()
        .map(|&k| {
            if k == 0 || k > mdl.components.len() {
                Err(Error::InvalidInput(format!("signal '{}': component {k} out of range (1-based)", sc.name)))
            } else {
                Ok(k - 1)
            }
        })
        .collect()
}

/// One configured extraction over times `1 - horizon ..= T + horizon`.
pub fn run_signal(bundle: &Bundle, sc: &SignalConfig, flags: &ExtractFlags) -> Result<(ExtractionTriple, usize)> {
    let ec = &bundle.config.extract;
    let (window, grid) = (flags.window.unwrap_or(ec.window), flags.grid.unwrap_or(ec.grid));
    let mut horizon = flags.horizon.unwrap_or(ec.horizon);
    let data = bundle.data_matrix();
    let mdl = &bundle.model;
    let par = bundle.par()?;
    let target = sc.target.as_ref().map(|t| MatPoly(t.iter().map(|&c| DMatrix::identity(mdl.n, mdl.n) * c).collect()));
    let mut tr = match sc.method {
        SignalMethod::Wk => wk_extract(mdl, &par, &data, &comps0(sc, mdl)?, target.as_ref(), grid, window, horizon, true)?,
        SignalMethod::Matrix => {
            horizon = 0;
            let (f, v) = signal_matrix(mdl, &par, &data, &comps0(sc, mdl)?)?;
            extract(mdl, &par, &data, &f, &v)?
        }
        SignalMethod::Adhoc => adhoc_extract(mdl, &par, &data, &adhoc_kernel(sc, &bundle.config)?, horizon, true)?,
    };
    for label in &sc.fixed {
        for j in 0..mdl.n {
            let eff = fixed_effect(mdl, &par.beta, j, label, horizon);
            for (r, v) in eff.iter().enumerate() {
                tr.point[(r, j)] += v;
                tr.lower[(r, j)] += v;
                tr.upper[(r, j)] += v;
            }
        }
    }
    Ok((tr, horizon))
}

/// Run every configured signal extraction, writing CSV (and SVG) files.
pub fn cmd_extract(bundle: &Bundle, flags: &ExtractFlags, out_dir: &Path) -> Result<String> {
    ensure_dir(out_dir)?;
    let times = bundle.times()?;
    let mdl = &bundle.model;
    let par = bundle.par()?;
    let ec = &bundle.config.extract;
    let mut report = String::new();
    if ec.signals.is_empty() {
        return invalid("no signals configured under [[extract.signals]]");
    }
    for sc in &ec.signals {
        let (tr, horizon) = run_signal(bundle, sc, flags)?;
        let (mut header, mut cols) = triple_columns(&bundle.names, &tr);
        header.push("displace".into());
        cols.push(vec![sc.displace; tr.point.nrows()]);
        write_table(&out_dir.join(format!("{}.csv", sc.name)), &times, -(horizon as i64), &header, &cols)?;
        if sc.plot {
            fs::write(out_dir.join(format!("{}.svg", sc.name)), svg_plot(&sc.name, &bundle.names, &tr, sc.displace))?;
        }
        let _ = writeln!(report, "{}: {} rows", sc.name, tr.point.nrows());
        if sc.method != SignalMethod::Adhoc {
            let comps = comps0(sc, mdl)?;
            let grid = flags.grid.unwrap_or(ec.grid);
            if flags.frf {
                let resp = frf(mdl, &par, &comps, grid / 2)?;
                let mut s = String::from("lambda");
                for i in 1..=mdl.n {
                    for j in 1..=mdl.n {
                        let _ = write!(s, ",re_{i}_{j},im_{i}_{j}");
                    }
                }
                s.push('\n');
                for (m, u) in resp.iter().enumerate() {
                    let _ = write!(s, "{}", fmt_num(std::f64::consts::PI * m as f64 / (grid / 2).max(1) as f64));
                    for i in 0..mdl.n {
                        for j in 0..mdl.n {
                            let _ = write!(s, ",{},{}", fmt_num(u[(i, j)].re), fmt_num(u[(i, j)].im));
                        }
                    }
                    s.push('\n');
                }
                fs::write(out_dir.join(format!("{}_frf.csv", sc.name)), s)?;
            }
            if flags.wk_coeffs {
                let target = sc.target.as_ref().map(|t| MatPoly(t.iter().map(|&c| DMatrix::identity(mdl.n, mdl.n) * c).collect()));
                let wk = wk_coeffs(mdl, &par, &comps, target.as_ref(), grid, flags.window.unwrap_or(ec.window))?;
                if wk.tail_warning() {
                    let _ = writeln!(report, "warning: {} filter tail beyond the window is about {}", sc.name, fmt_num(wk.tail));
                }
                fs::write(out_dir.join(format!("{}_wk.csv", sc.name)), wk.kernel.to_csv())?;
            }
        }
    }
    if let Some(pc) = &ec.publish {
        report.push_str(&publish(bundle, pc, flags, out_dir)?);
    }
    Ok(report)
}

fn publish(bundle: &Bundle, pc: &PublishConfig, flags: &ExtractFlags, out_dir: &Path) -> Result<String> {
    let ec = &bundle.config.extract;
    let find = |name: &str| {
        ec.signals.iter().find(|s| s.name == name).ok_or_else(|| Error::InvalidInput(format!("publish refers to unknown signal '{name}'")))
    };
    let no_h = ExtractFlags { horizon: Some(0), ..*flags };
    let strip = |sc: &SignalConfig| SignalConfig { fixed: Vec::new(), ..sc.clone() };
    let (sig, _) = run_signal(bundle, &strip(find(&pc.signal)?), &no_h)?;
    let (comp, _) = run_signal(bundle, &strip(find(&pc.complement)?), &no_h)?;
    let data = bundle.data_matrix();
    let mdl = &bundle.model;
    let par = bundle.par()?;
    let (cast, _) = midcast(mdl, &par, &data, 0)?;
    let original = match &pc.original {
        Some(p) => {
            let (_, m) = parse_csv(&fs::read_to_string(bundle.config.resolve(p))?, &bundle.config.data.na)?;
            let mut o = data.clone();
            for r in 0..o.nrows().min(m.nrows()) {
                for c in 0..o.ncols().min(m.ncols()) {
                    if o[(r, c)].is_nan() {
                        o[(r, c)] = m[(r, c)];
                    }
                }
            }
            o
        }
        None => data.clone(),
    };
    let mut routing = Routing::seasonal_adjustment();
    if let Some(labels) = &pc.signal_fixed {
        routing.fixed = labels.iter().map(|l| (l.clone(), Side::Signal)).collect();
    }
    if pc.error_to_complement {
        routing.casting_error = Side::Complement;
    }
    let dec = publish_decomposition(&original, &cast.filled, &sig.point, &comp.point, mdl, &par, &routing)?;
    let mut header = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for (j, name) in bundle.names.iter().enumerate() {
        let mut push = |h: String, m: &DMatrix<f64>| {
            header.push(h);
            cols.push(m.column(j).iter().copied().collect());
        };
        push(format!("{name}_{}", pc.signal), &dec.signal);
        push(format!("{name}_{}", pc.complement), &dec.complement);
        push(format!("{name}_casting_error"), &dec.casting_error);
        for (label, m) in &dec.fixed {
            push(format!("{name}_fixed_{label}"), m);
        }
        push(format!("{name}_total"), &dec.total());
    }
    write_table(&out_dir.join("decomposition.csv"), &bundle.times()?, 0, &header, &cols)?;
    let total = dec.total();
    let mut worst = 0.0f64;
    for r in 0..total.nrows() {
        for c in 0..total.ncols() {
            if !original[(r, c)].is_nan() {
                worst = worst.max((total[(r, c)] - original[(r, c)]).abs());
            }
        }
    }
    Ok(format!("decomposition additivity: max abs deviation {}\n", fmt_num(worst)))
}

/// Casts with regression effects and two-standard-error bands over the
/// sample extended by `span` on both sides.
pub fn cmd_cast(bundle: &Bundle, span: Option<usize>, out_dir: &Path) -> Result<String> {
    let span = span.unwrap_or(bundle.config.cast.span);
    let data = bundle.data_matrix();
    let par = bundle.par()?;
    let (cast, _) = midcast(&bundle.model, &par, &data, span)?;
    let tr = cast_extract(&bundle.model, &par, &data, &cast)?;
    ensure_dir(out_dir)?;
    let (header, cols) = triple_columns(&bundle.names, &tr);
    write_table(&out_dir.join("casts.csv"), &bundle.times()?, -(span as i64), &header, &cols)?;
    Ok(format!("casts: {} rows ({} casts)\n", tr.point.nrows(), cast.coords.len()))
}

/// X-11 style trend, seasonal and adjustment kernels, optionally embedded.
pub fn cmd_filters(cfg: &RunConfig, with_frf: bool, out_dir: &Path) -> Result<String> {
    let fc = &cfg.filters;
    let period = fc.period.unwrap_or(cfg.data.period);
    let (trend, seas, sa) = x11_filters(period, fc.order)?;
    ensure_dir(out_dir)?;
    let mut s = String::new();
    for (name, k) in [("trend", &trend), ("seasonal", &seas), ("sa", &sa)] {
        fs::write(out_dir.join(format!("x11_{name}.csv")), k.to_csv())?;
        let _ = writeln!(s, "{name}: length {} shift {} sum {}", k.len(), k.shift, fmt_num(k.sum()[(0, 0)]));
        if let Some(e) = fc.embed {
            let m = hi_to_low(k, e)?;
            fs::write(out_dir.join(format!("x11_{name}_embedded.csv")), m.to_csv())?;
            let _ = writeln!(s, "{name} embedded: length {} shift {}", m.len(), m.shift);
        }
    }
    if with_frf {
        let mut out = String::from("lambda,trend,seasonal,sa\n");
        for m in 0..=fc.grid {
            let l = std::f64::consts::PI * m as f64 / fc.grid.max(1) as f64;
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_num(l),
                fmt_num(trend.frf(l)[(0, 0)].re),
                fmt_num(seas.frf(l)[(0, 0)].re),
                fmt_num(sa.frf(l)[(0, 0)].re)
            );
        }
        fs::write(out_dir.join("x11_frf.csv"), out)?;
    }
    Ok(s)
}

/// Simulate from the configured model; writes `simulated.csv` and the
/// generating pre-parameter to `simulated_psi.json`.
pub fn cmd_simulate(cfg: &RunConfig, seed: Option<u64>, out_dir: &Path) -> Result<String> {
    let sc = &cfg.simulate;
    let seed = seed.unwrap_or(sc.seed);
    let names: Vec<String> = match (&cfg.data.series, sc.n) {
        (Some(s), None) => s.clone(),
        (Some(s), Some(n)) if s.len() == n => s.clone(),
        (_, n) => (1..=n.unwrap_or(1)).map(|i| format!("series{i}")).collect(),
    };
    let n = names.len();
    let times = TimeIndex::from_config(&DataConfig { range: None, ..cfg.data.clone() })?;
    let sim_cfg = RunConfig { data: DataConfig { range: None, ..cfg.data.clone() }, ..cfg.clone() };
    let (mdl, _) = build_model(&sim_cfg, n, sc.t, &times)?;
    let psi = match &sc.psi {
        Some(p) if p.len() != mdl.psi_len() => return invalid(format!("simulate.psi has {} entries, model needs {}", p.len(), mdl.psi_len())),
        Some(p) => p.clone(),
        None => initial_psi(cfg, &mdl)?,
    };
    let par = psi_to_par(&psi, &mdl)?;
    let x = simulate(&mdl, &par, sc.t, sc.burn, seed)?;
    ensure_dir(out_dir)?;
    let cols: Vec<Vec<f64>> = (0..n).map(|j| x.column(j).iter().copied().collect()).collect();
    write_table(&out_dir.join("simulated.csv"), &times, 0, &names, &cols)?;
    let meta = serde_json::json!({ "psi": psi, "seed": seed, "t": sc.t, "burn": sc.burn });
    fs::write(out_dir.join("simulated_psi.json"), serde_json::to_string_pretty(&meta).unwrap_or_default())?;
    Ok(format!("simulated {} x {} (seed {seed})\n", sc.t, n))
}
