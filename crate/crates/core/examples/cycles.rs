//! Butterworth and balanced cycles: spectral peaks, autocovariances and
//! the density floors that the stabilized variants remove. A trend plus
//! cycle plus irregular model is then fitted to simulated data.

use std::f64::consts::PI;

use latent_signal::acf::{arma_density, balanced_acvf, balanced_density, balanced_floor, butterworth_floor, butterworth_polys};
use latent_signal::fit::{mle_fit, FitOptions};
use latent_signal::gauss::simulate;
use latent_signal::model::{Bounds, ComponentClass, ModelSpec};
use latent_signal::param::{bounded_map, psi_to_par, Dynamics, ParamSet};
use latent_signal::poly::Poly;

fn main() -> latent_signal::Result<()> {
    let (rho, omega) = (0.9, PI / 10.0);
    println!("cycle rho {rho}, period {:.0}", 2.0 * PI / omega);
    println!("order  butterworth peak/floor   balanced peak/floor");
    for n in 1..=4 {
        let (ar, ma) = butterworth_polys(rho, omega, n);
        let bw_peak = arma_density(&ar, &ma, omega);
        let bal_peak = balanced_density(rho, omega, n, omega);
        println!(
            "{n:5}  {:10.3} / {:9.2e}   {:10.3} / {:9.2e}",
            bw_peak,
            butterworth_floor(rho, omega, n),
            bal_peak,
            balanced_floor(rho, omega, n)
        );
    }
    let acvf = balanced_acvf(rho, omega, 2, 20);
    let acf: Vec<f64> = acvf.iter().map(|g| g / acvf[0]).step_by(5).collect();
    println!("balanced order 2 autocorrelations at lags 0, 5, 10, 15, 20: {acf:.3?}");

    let t = 240;
    let bounds = Bounds::cycle(0.5, 0.99, PI / 30.0, PI / 4.0);
    let mdl = ModelSpec::new(1, t)
        .add_component("trend", ComponentClass::WhiteNoise, vec![0], Bounds::default(), Poly::difference())?
        .add_component("cycle", ComponentClass::BalancedStable { order: 2 }, vec![0], bounds, Poly::one())?
        .add_component("irregular", ComponentClass::WhiteNoise, vec![0], Bounds::default(), Poly::one())?;
    // log variances, then the cycle's rho and omega pre-parameters
    let truth = [-4.0, 0.0, -1.5, 1.0, -0.5];
    let par = psi_to_par(&truth, &mdl)?;
    let data = simulate(&mdl, &par, t, 200, 17)?;
    let fit = mle_fit(&data, &ParamSet::default_for(&mdl), None, &mdl, &FitOptions::default(), None)?;
    let show = |p: &ParamSet| match p.dynamics[1] {
        Dynamics::Cycle { rho, omega } => format!("rho {rho:.3}, period {:.1}", 2.0 * PI / omega),
        _ => unreachable!("second component is a cycle"),
    };
    println!("true cycle   {}", show(&par));
    println!("fitted cycle {} (divergence {:.3})", show(&fit.par), fit.divergence);
    println!(
        "rho bounds map 0 to {:.3}; fitted log variances {:.3?}",
        bounded_map(0.0, bounds.rho_lo, bounds.rho_hi),
        &fit.psi[..3]
    );
    Ok(())
}
