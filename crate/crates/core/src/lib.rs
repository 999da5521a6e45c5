//! Multivariate time series as sums of latent stochastic components plus
//! fixed regression effects.
//!
//! Models are declared with [`model::ModelSpec`], mapped to and from an
//! unconstrained pre-parameter vector by [`param`], fitted by Gaussian
//! likelihood or moments in [`fit`], and used for casting and signal
//! extraction through [`gauss`] and [`extract`]. Missing values are `NaN`
//! anywhere in the `T x N` data matrix.
//!
//! Runnable examples, one per capability:
//!
//! - `var_ragged_edge`: VAR fit with staggered missing ends, nowcasts and forecasts
//! - `local_level_trends`: common trend of reduced rank, likelihood ratio, exact extraction
//! - `structural_seasonal`: trend/seasonal/irregular, outlier as missing, additive publication
//! - `weekly_holidays_x11`: fractional period, moving-holiday regressor, nonparametric filters
//! - `daily_embedding`: daily series and filters folded into weekly vectors
//! - `cycles`: Butterworth and balanced cycles
//! - `calendar_tools`: holidays, weekdays, day and week indices
//! - `cli_workflow`: the command verbs driven from code
//!
//! Run one with `cargo run --example cycles`.

pub mod acf;
pub mod calendar;
pub mod cli;
pub mod error;
pub mod extract;
pub mod fit;
pub mod gauss;
pub mod linalg;
pub mod model;
pub mod param;
pub mod poly;
pub mod specfact;

pub use error::{Error, Result};
