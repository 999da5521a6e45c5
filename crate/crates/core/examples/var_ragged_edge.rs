//! A bivariate VAR(1) in growth rates with a ragged edge: one series starts
//! late, the other stops early. Fit by maximum likelihood, fill the gaps
//! and forecast a year ahead with two-standard-error bands.

use latent_signal::fit::{mle_fit, portmanteau, tstats, FitOptions};
use latent_signal::gauss::{cast_extract, midcast, resid, simulate};
use latent_signal::model::{Bounds, ComponentClass, ModelSpec};
use latent_signal::param::{conditions, psi_to_par, ParamSet};
use latent_signal::poly::Poly;

fn main() -> latent_signal::Result<()> {
    let t = 150;
    let mdl = ModelSpec::new(2, t)
        .add_component("var", ComponentClass::Varma { p: 1, q: 0 }, vec![0, 1], Bounds::default(), Poly::difference())?
        .mean_init(0);
    // lower entry, log variances, VAR pre-parameters, drifts
    let truth = [0.6, -1.0, -1.6, 0.9, 0.3, -0.4, 0.5, 0.05, 0.02];
    let par = psi_to_par(&truth, &mdl)?;
    let mut data = simulate(&mdl, &par, t, 200, 3)?;
    for r in 0..8 {
        data[(r, 1)] = f64::NAN;
    }
    for r in t - 3..t {
        data[(r, 0)] = f64::NAN;
    }

    let fit = mle_fit(&data, &ParamSet::default_for(&mdl), None, &mdl, &FitOptions::default(), None)?;
    println!("divergence {:.4} after {} evaluations (converged {})", fit.divergence, fit.evaluations, fit.converged);
    let ts = tstats(&fit.psi, &fit.hessian, &fit.map);
    for (i, (p, s)) in fit.psi.iter().zip(&ts).enumerate() {
        println!("  psi[{}] = {p:8.4}  (true {:7.3}, t {s:7.2})", i + 1, truth[i]);
    }
    println!("innovation conditions: {:?}", conditions(&fit.par.sigma(0))?);

    let (res, _) = resid(&mdl, &fit.par, &data)?;
    let (stat, p) = portmanteau(&res, 24, fit.psi.len())?;
    println!("portmanteau lag 24: {stat:.2} (p = {p:.3})");

    let horizon = 12;
    let (cast, _) = midcast(&mdl, &fit.par, &data, horizon)?;
    let tri = cast_extract(&mdl, &fit.par, &data, &cast)?;
    println!("first rows of series 2 (imputed):");
    for r in horizon..horizon + 3 {
        println!("  t={:3}  {:8.3} [{:8.3}, {:8.3}]", r - horizon + 1, tri.point[(r, 1)], tri.lower[(r, 1)], tri.upper[(r, 1)]);
    }
    println!("tail of series 1 and forecasts:");
    for r in horizon + t - 4..tri.point.nrows() {
        let tag = if r >= horizon + t { "forecast" } else if data[(r - horizon, 0)].is_nan() { "nowcast" } else { "observed" };
        println!("  t={:3}  {:8.3} [{:8.3}, {:8.3}]  {tag}", r - horizon + 1, tri.point[(r, 0)], tri.lower[(r, 0)], tri.upper[(r, 0)]);
    }
    Ok(())
}
