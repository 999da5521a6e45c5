//! Three related series sharing one common stochastic trend. The reduced
//! rank model is compared with a full rank one by a likelihood ratio, and
//! the trends are extracted with the exact finite-sample filter.

use latent_signal::extract::{extract, signal_matrix};
use latent_signal::fit::{glr, mle_fit, FitOptions};
use latent_signal::gauss::simulate;
use latent_signal::linalg::Gcd;
use latent_signal::model::{Bounds, ComponentClass, ModelSpec};
use latent_signal::param::{conditions, par_to_psi, ParamSet};
use latent_signal::poly::Poly;
use nalgebra::{DMatrix, DVector};

fn llm(n: usize, t: usize, trend_rank: Vec<usize>) -> latent_signal::Result<ModelSpec> {
    Ok(ModelSpec::new(n, t)
        .add_component("trend", ComponentClass::WhiteNoise, trend_rank, Bounds::default(), Poly::difference())?
        .add_component("irregular", ComponentClass::WhiteNoise, (0..n).collect(), Bounds::default(), Poly::one())?
        .mean_init(0))
}

fn main() -> latent_signal::Result<()> {
    let (n, t) = (3, 120);
    let reduced = llm(n, t, vec![0])?;
    let full = llm(n, t, vec![0, 1, 2])?;

    let mut par = ParamSet::default_for(&reduced);
    let l = DMatrix::from_column_slice(3, 1, &[1.0, 0.8, 1.3]);
    par.covs[0] = Gcd { l, d: DVector::from_vec(vec![0.5]), vrank: vec![0] };
    par.covs[1] = Gcd { l: DMatrix::identity(3, 3), d: DVector::from_vec(vec![1.0, 0.6, 1.5]), vrank: vec![0, 1, 2] };
    par.beta = vec![10.0, 8.0, 13.0];
    let data = simulate(&reduced, &par, t, 0, 21)?;

    let opts = FitOptions::default();
    let a = mle_fit(&data, &ParamSet::default_for(&reduced), None, &reduced, &opts, None)?;
    // start the nesting fit at the nested optimum with small extra trend variances
    let mut init = ParamSet::default_for(&full);
    let mut l = DMatrix::identity(3, 3);
    l.set_column(0, &a.par.covs[0].l.column(0));
    let d0 = a.par.covs[0].d[0];
    init.covs[0] = Gcd { l, d: DVector::from_vec(vec![d0, 0.01 * d0, 0.01 * d0]), vrank: vec![0, 1, 2] };
    init.covs[1] = a.par.covs[1].clone();
    init.beta = a.par.beta.clone();
    let b = mle_fit(&data, &init, None, &full, &opts, None)?;
    let loadings: Vec<f64> = a.par.covs[0].l.column(0).iter().copied().collect();
    println!("rank one trend: divergence {:.3}, loadings {loadings:.3?}", a.divergence);
    println!("full rank trend: divergence {:.3}", b.divergence);
    println!("full rank trend conditions {:.2?}", conditions(&b.par.sigma(0))?);
    let (stat, df) = glr(&data, &a.psi, &b.psi, &reduced, &full)?;
    println!("likelihood ratio {stat:.3} on {df} degrees of freedom");
    println!("psi length {} vs {}", par_to_psi(&a.par, &reduced)?.len(), b.psi.len());

    let (f, v) = signal_matrix(&reduced, &a.par, &data, &[0])?;
    let tri = extract(&reduced, &a.par, &data, &f, &v)?;
    println!("stochastic trend around the fitted levels {:.2?}, every 20 periods:", a.par.beta);
    for r in (0..t).step_by(20) {
        let row: Vec<String> = (0..n).map(|j| format!("{:7.2} +- {:4.2}", tri.point[(r, j)], (tri.upper[(r, j)] - tri.point[(r, j)]))).collect();
        println!("  t={:3}  {}", r + 1, row.join("   "));
    }
    Ok(())
}
