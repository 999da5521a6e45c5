//! Monthly series as smooth trend plus stochastic seasonal plus irregular.
//! An additive outlier is set aside as missing, the components are
//! estimated by truncated Wiener-Kolmogorov filters, and the seasonal
//! adjustment is published as two tables that add up to the data.

use latent_signal::extract::{publish_decomposition, sample_rows, wk_extract, Routing};
use latent_signal::fit::{mle_fit, FitOptions};
use latent_signal::gauss::{midcast, simulate};
use latent_signal::model::{Bounds, ComponentClass, ModelSpec};
use latent_signal::param::{psi_to_par, ParamSet};
use latent_signal::poly::Poly;

fn main() -> latent_signal::Result<()> {
    let t = 144;
    let mdl = ModelSpec::new(1, t)
        .add_component("trend", ComponentClass::WhiteNoise, vec![0], Bounds::default(), Poly::difference().pow(2))?
        .add_component("seasonal", ComponentClass::WhiteNoise, vec![0], Bounds::default(), Poly::seasonal_sum(12))?
        .add_component("irregular", ComponentClass::WhiteNoise, vec![0], Bounds::default(), Poly::one())?;
    let truth = [-5.0, -3.0, 0.0];
    let mut original = simulate(&mdl, &psi_to_par(&truth, &mdl)?, t, 0, 5)?;
    let outlier = 70;
    original[(outlier, 0)] += 12.0;
    let mut data = original.clone();
    data[(outlier, 0)] = f64::NAN;

    let fit = mle_fit(&data, &ParamSet::default_for(&mdl), None, &mdl, &FitOptions::default(), None)?;
    let vars: Vec<f64> = (0..3).map(|k| fit.par.sigma(k)[(0, 0)]).collect();
    let true_vars: Vec<f64> = truth.iter().map(|x| x.exp()).collect();
    println!("innovation variances {vars:.4?} (true {true_vars:.4?})");

    let (grid, window) = (2000, 60);
    let trend = wk_extract(&mdl, &fit.par, &data, &[0], None, grid, window, 0, true)?;
    let seasonal = wk_extract(&mdl, &fit.par, &data, &[1], None, grid, window, 0, true)?;
    let sa = wk_extract(&mdl, &fit.par, &data, &[0, 2], None, grid, window, 0, true)?;

    let (cast, _) = midcast(&mdl, &fit.par, &data, 0)?;
    let filled = sample_rows(&cast, t);
    println!("outlier month: recorded {:.2}, imputed {:.2}", original[(outlier, 0)], filled[(outlier, 0)]);

    let dec = publish_decomposition(&original, &filled, &sa.point, &seasonal.point, &mdl, &fit.par, &Routing::seasonal_adjustment())?;
    let dev = (dec.total() - &original).abs().max();
    println!("published tables add up to the data within {dev:.1e}");
    println!("month  data     trend    seasonal  adjusted");
    for r in (outlier - 2..=outlier + 2).chain(t - 3..t) {
        println!(
            "{:5}  {:7.2}  {:7.2}  {:8.2}  {:8.2}",
            r + 1,
            original[(r, 0)],
            trend.point[(r, 0)],
            dec.complement[(r, 0)],
            dec.signal[(r, 0)]
        );
    }
    let band = |x: &latent_signal::gauss::ExtractionTriple, r: usize| (x.upper[(r, 0)] - x.lower[(r, 0)]) / 2.0;
    println!("trend half-band: middle {:.3}, end {:.3}", band(&trend, t / 2), band(&trend, t - 1));
    Ok(())
}
