//! Weekly data with a fractional annual period and an Easter effect. The
//! holiday regressor is built from daily windows summed into weeks, the
//! model is fitted, and model-based adjustment is set against X-11 style
//! nonparametric filters for the same period.

use std::f64::consts::PI;

use latent_signal::calendar::{easter, gethol, CalendarDate};
use latent_signal::extract::{adhoc_extract, wk_extract, x11_filters};
use latent_signal::fit::{mle_fit, tstats, FitOptions};
use latent_signal::gauss::simulate;
use latent_signal::model::{Bounds, ComponentClass, ModelSpec, Regressor};
use latent_signal::param::{psi_to_par, ParamSet};
use latent_signal::poly::{ub_generator, Poly};

fn main() -> latent_signal::Result<()> {
    let t = 364;
    let period = 365.25 / 7.0;
    let start = CalendarDate::new(2012, 1, 1)?;
    let end = start.add_days(7 * t as i64 - 1);
    let easters: Vec<CalendarDate> = (start.year..=end.year).map(easter).collect();
    let daily = gethol(&easters, 6, 0, start, end, true)?;
    let weekly: Vec<f64> = daily.chunks(7).map(|w| w.iter().sum()).collect();

    let mdl = ModelSpec::new(1, t)
        .add_component("trend", ComponentClass::WhiteNoise, vec![0], Bounds::default(), Poly::difference())?
        .add_component("seasonal", ComponentClass::WhiteNoise, vec![0], Bounds::default(), ub_generator(26, period)?)?
        .add_component("irregular", ComponentClass::WhiteNoise, vec![0], Bounds::default(), Poly::one())?
        .add_regressor(0, Regressor::custom("easter", weekly))?;
    let truth = [-3.0, -7.0, 0.0, 0.8];
    let data = simulate(&mdl, &psi_to_par(&truth, &mdl)?, t, 0, 8)?;

    let fit = mle_fit(&data, &ParamSet::default_for(&mdl), None, &mdl, &FitOptions::default(), None)?;
    let ts = tstats(&fit.psi, &fit.hessian, &fit.map);
    println!("log variances {:.3?} (true {:.3?})", &fit.psi[..3], &truth[..3]);
    println!("easter coefficient {:.3} (true {}, t {:.1})", fit.par.beta[0], truth[3], ts[3]);

    let (trend, seasonal, sa) = x11_filters(period, 1)?;
    for (name, k) in [("trend", &trend), ("seasonal", &seasonal), ("sa", &sa)] {
        println!("x11 {name}: {} weeks, gain at the annual frequency {:.4}", k.len(), k.frf(2.0 * PI / period)[(0, 0)].norm());
    }

    let model_sa = wk_extract(&mdl, &fit.par, &data, &[0, 2], None, 3000, 150, 0, false)?;
    let x11_sa = adhoc_extract(&mdl, &fit.par, &data, &sa, 0, true)?;
    let diff: Vec<f64> = (0..t).map(|r| model_sa.point[(r, 0)] - x11_sa.point[(r, 0)]).collect();
    let rms = (diff.iter().map(|d| d * d).sum::<f64>() / t as f64).sqrt();
    println!("model-based versus x11 adjustment: rms difference {rms:.3}");
    println!("week   data    model sa   x11 sa");
    for r in (0..t).step_by(52) {
        println!("{:4}  {:7.2}  {:8.2}  {:8.2}", r + 1, data[(r, 0)], model_sa.point[(r, 0)], x11_sa.point[(r, 0)]);
    }
    Ok(())
}
