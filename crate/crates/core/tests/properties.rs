use std::f64::consts::PI;

use latent_signal::acf::{component_acvf, spectra, total_acvf};
use latent_signal::calendar::{daily_to_weekly, date_to_day, day_of_week, day_to_date, gethol, CalendarDate, Weekday};
use latent_signal::extract::{extract, signal_matrix, x11_filters};
use latent_signal::fit::{glr, mle_fit, tstats, FitOptions};
use latent_signal::gauss::{dl_midcast, forecast, lik, simulate};
use latent_signal::linalg::{block_toeplitz, companion_radius, gcd_decompose};
use latent_signal::model::{Bounds, ComponentClass, ModelSpec};
use latent_signal::param::{
    conditions, minus_poly, pacf_map, par_to_psi, psi_to_par, render_pd, var_map, Constraint, ConstraintMap, ParamSet,
};
use latent_signal::poly::{ub_generator, Poly};
use latent_signal::specfact::{spec_fact, SpecFactOptions};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn coeffs(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, len)
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let n = a.len().max(b.len());
    (0..n).all(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs() < tol)
}

fn llm(n: usize, t: usize) -> ModelSpec {
    let all: Vec<usize> = (0..n).collect();
    ModelSpec::new(n, t)
        .add_component("trend", ComponentClass::WhiteNoise, all.clone(), Bounds::default(), Poly::difference())
        .unwrap()
        .add_component("irregular", ComponentClass::WhiteNoise, all, Bounds::default(), Poly::one())
        .unwrap()
}

fn ar_model(t: usize) -> ModelSpec {
    ModelSpec::new(1, t)
        .add_component("ar", ComponentClass::Arma { p: 2, q: 1 }, vec![0], Bounds::default(), Poly::one())
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn poly_product_associative_commutative(a in coeffs(1..=6), b in coeffs(1..=6), c in coeffs(1..=6)) {
        let (a, b, c) = (Poly(a), Poly(b), Poly(c));
        prop_assert!(close(&a.mul(&b).0, &b.mul(&a).0, 1e-12));
        prop_assert!(close(&a.mul(&b).mul(&c).0, &a.mul(&b.mul(&c)).0, 1e-12));
    }

    #[test]
    fn spec_fact_reproduces_autocovariance(theta in coeffs(1..=10), s2 in 0.1f64..3.0) {
        let mut t = vec![1.0];
        t.extend(theta.iter().map(|v| v * 0.4));
        let gamma: Vec<f64> = Poly(t).autocovariance().iter().map(|g| g * s2).collect();
        let (ma, v) = spec_fact(&gamma, SpecFactOptions::default()).unwrap();
        let back: Vec<f64> = ma.autocovariance().iter().map(|g| g * v).collect();
        prop_assert!(close(&back, &gamma, 1e-8), "{back:?} vs {gamma:?}");
    }

    #[test]
    fn gcd_round_trip(n in 1usize..=6, rank in 1usize..=6, seed in prop::collection::vec(-1.0f64..1.0, 36)) {
        let r = rank.min(n);
        let a = DMatrix::from_fn(n, r, |i, j| seed[i * 6 + j]);
        let s = &a * a.transpose();
        let g = gcd_decompose(&s).unwrap();
        prop_assert!((g.matrix() - &s).amax() < 1e-10);
    }

    #[test]
    fn ub_generator_matches_quadratic_factors(n in 0usize..=15, s in 2.5f64..60.0) {
        let direct = (1..=n).fold(Poly::one(), |acc, k| acc.mul(&Poly::unit_cycle(2.0 * PI * k as f64 / s)));
        let scale = direct.0.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        prop_assert!(close(&ub_generator(n, s).unwrap().0, &direct.0, 1e-9 * scale));
    }

    #[test]
    fn block_toeplitz_shift(n in 1usize..=3, t in 2usize..=6, vals in prop::collection::vec(-1.0f64..1.0, 27)) {
        let gamma: Vec<DMatrix<f64>> = (0..3).map(|h| DMatrix::from_fn(n, n, |i, j| vals[h * 9 + i * 3 + j])).collect();
        let m = block_toeplitz(&gamma, t);
        for i in 0..t - 1 {
            for j in 0..t - 1 {
                let a = m.view((i * n, j * n), (n, n));
                let b = m.view(((i + 1) * n, (j + 1) * n), (n, n));
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn day_index_round_trip(ord in -100_000i64..100_000, step in 0i64..400) {
        let d = CalendarDate::from_ordinal(ord);
        prop_assert_eq!(day_to_date(date_to_day(d) as i64, d.year), d);
        let later = d.add_days(step);
        let shift = (day_of_week(later).number() as i64 - day_of_week(d).number() as i64).rem_euclid(7);
        prop_assert_eq!(shift, step % 7);
    }

    #[test]
    fn weekly_shape(ord in 700_000i64..740_000, len in 1usize..60, first in 1u32..=7) {
        let start = CalendarDate::from_ordinal(ord);
        let daily: Vec<f64> = (0..len).map(|i| i as f64).collect();
        let w = daily_to_weekly(&daily, start, Weekday::from_number(first).unwrap());
        prop_assert_eq!(w.values.nrows(), (w.lead + len).div_ceil(7));
        prop_assert_eq!(w.values.iter().filter(|v| !v.is_nan()).count(), len);
    }

    #[test]
    fn pacf_and_var_maps_are_stable(z in coeffs(1..=6), n in 1usize..=3, p in 1usize..=2, zv in coeffs(18..=18)) {
        let phi = minus_poly(&pacf_map(&z.iter().map(|v| 3.0 * v).collect::<Vec<_>>()));
        prop_assert!(phi.roots().iter().all(|r| r.norm() > 1.0 + 1e-10));
        let var = var_map(&zv[..p * n * n], n, p).unwrap();
        prop_assert!(companion_radius(&var) < 1.0 - 1e-10);
    }

    #[test]
    fn constraint_image_satisfies(k in 1usize..4, vals in prop::collection::vec(-1.0f64..1.0, 64)) {
        let len = 8;
        let c = DMatrix::from_fn(k, len, |i, j| vals[i * len + j]);
        let b = DVector::from_fn(k, |i, _| vals[40 + i]);
        let con = Constraint { c: c.clone(), b: b.clone() };
        let map = ConstraintMap::new(Some(&con), len).unwrap();
        prop_assert_eq!(map.a.ncols(), len - k);
        prop_assert_eq!(map.a.clone().svd(false, false).rank(1e-10), len - k);
        let eta: Vec<f64> = vals[48..48 + len - k].to_vec();
        let psi = DVector::from_vec(map.eta_to_psi(&eta));
        prop_assert!((&c * psi - b).amax() < 1e-10);
    }

    #[test]
    fn render_pd_keeps_factor(vals in prop::collection::vec(-1.0f64..1.0, 9), alpha in -8.0f64..-0.5) {
        let a = DMatrix::from_fn(3, 3, |i, j| vals[i * 3 + j]);
        let s = &a * a.transpose() + DMatrix::identity(3, 3) * 1e-3;
        let before = gcd_decompose(&s).unwrap();
        let after = gcd_decompose(&render_pd(&s, alpha).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..i {
                prop_assert!((before.l[(i, j)] - after.l[(i, j)]).abs() < 1e-9);
            }
            prop_assert!(after.d[i] >= before.d[i] * (1.0 - 1e-12));
        }
    }

    #[test]
    fn conditions_match_recursion(vals in prop::collection::vec(-1.0f64..1.0, 16)) {
        let a = DMatrix::from_fn(4, 4, |i, j| vals[i * 4 + j]);
        let s = &a * a.transpose() + DMatrix::identity(4, 4) * 0.1;
        let tau = conditions(&s).unwrap();
        let g = gcd_decompose(&s).unwrap();
        for j in 0..4 {
            let l = g.l.view((j, 0), (1, j)).transpose();
            let dl: f64 = (0..j).map(|i| l[i] * l[i] * g.d[i]).sum();
            let rec = -(1.0 + dl / g.d[j]).ln();
            prop_assert!((tau[j] - rec).abs() < 1e-10);
        }
    }

    #[test]
    fn acvf_is_nonnegative_definite(psi in prop::collection::vec(-1.5f64..1.5, 4)) {
        let mdl = ar_model(20);
        let par = psi_to_par(&psi, &mdl).unwrap();
        let g = total_acvf(&mdl, &par, 25).unwrap();
        let m = block_toeplitz(&g, 26);
        let min = m.symmetric_eigen().eigenvalues.min();
        prop_assert!(min > -1e-8 * g[0][(0, 0)]);
        let spec = spectra(&mdl, &par, 0, 4096).unwrap();
        let area = spec.iter().enumerate().map(|(i, f)| {
            let w = if i == 0 || i == spec.len() - 1 { 0.5 } else { 1.0 };
            w * f[(0, 0)].re
        }).sum::<f64>() / 4096.0;
        prop_assert!((area - g[0][(0, 0)]).abs() < 1e-6 * g[0][(0, 0)]);
    }

    #[test]
    fn lik_ignores_component_order(psi in prop::collection::vec(-1.0f64..1.0, 6)) {
        let t = 30;
        let a = llm(2, t);
        let b = ModelSpec::new(2, t)
            .add_component("irregular", ComponentClass::WhiteNoise, vec![0, 1], Bounds::default(), Poly::one())
            .unwrap()
            .add_component("trend", ComponentClass::WhiteNoise, vec![0, 1], Bounds::default(), Poly::difference())
            .unwrap();
        let swapped: Vec<f64> = psi[3..].iter().chain(&psi[..3]).copied().collect();
        let data = DMatrix::from_fn(t, 2, |r, c| ((r * 7 + c * 3) as f64 * 0.37).sin() * (1.0 + r as f64 * 0.05));
        let (x, y) = (lik(&psi, &a, &data).unwrap(), lik(&swapped, &b, &data).unwrap());
        prop_assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
    }

    #[test]
    fn matrix_extractions_are_complementary(q in 0.05f64..3.0, seed in 0u64..1000) {
        let t = 25;
        let mdl = llm(1, t);
        let mut par = ParamSet::default_for(&mdl);
        par.covs[0].d[0] = q;
        let data = simulate(&mdl, &par, t, 20, seed).unwrap();
        let (f1, v1) = signal_matrix(&mdl, &par, &data, &[0]).unwrap();
        let (f2, v2) = signal_matrix(&mdl, &par, &data, &[1]).unwrap();
        let a = extract(&mdl, &par, &data, &f1, &v1).unwrap();
        let b = extract(&mdl, &par, &data, &f2, &v2).unwrap();
        prop_assert!((&a.point + &b.point - &data).amax() < 1e-9);
        prop_assert!(v1.diagonal().iter().all(|v| *v >= -1e-12));
    }

    #[test]
    fn sa_kernel_symmetric(s in 3.0f64..60.0, p in 1usize..=3) {
        let (trend, seas, sa) = x11_filters(s, p).unwrap();
        let c = sa.scalar_coeffs();
        prop_assert!(close(&c, &c.iter().rev().copied().collect::<Vec<_>>(), 1e-12));
        prop_assert!((trend.sum()[(0, 0)] - 1.0).abs() < 1e-12);
        prop_assert!(seas.sum()[(0, 0)].abs() < 1e-12);
    }
}

#[test]
fn casting_errors_uncorrelated_with_observations() {
    let t = 12;
    let mdl = ar_model(t);
    let par = psi_to_par(&[0.8, -0.4, 0.3, 0.2], &mdl).unwrap();
    let g = total_acvf(&mdl, &par, t).unwrap();
    let full = block_toeplitz(&g, t);
    let mut data = DMatrix::from_fn(t, 1, |r, _| (r as f64).cos());
    for r in [0, 4, 5, 11] {
        data[(r, 0)] = f64::NAN;
    }
    let (cast, _) = dl_midcast(&g, &data, 0).unwrap();
    let obs: Vec<usize> = (0..t).filter(|&r| !data[(r, 0)].is_nan()).collect();
    let mis: Vec<usize> = (0..t).filter(|&r| data[(r, 0)].is_nan()).collect();
    let soo = DMatrix::from_fn(obs.len(), obs.len(), |a, b| full[(obs[a], obs[b])]);
    let smo = DMatrix::from_fn(mis.len(), obs.len(), |a, b| full[(mis[a], obs[b])]);
    let k = &smo * soo.clone().try_inverse().unwrap();
    // error e = X_m - K X_o has Cov(e, X_o) = S_mo - K S_oo
    assert!((&smo - &k * &soo).amax() < 1e-8);
    let cond = DMatrix::from_fn(mis.len(), mis.len(), |a, b| full[(mis[a], mis[b])]) - &k * smo.transpose();
    assert!((&cast.cov - &cond).amax() < 1e-8);
    let xo = DVector::from_iterator(obs.len(), obs.iter().map(|&r| data[(r, 0)]));
    let pred = &k * xo;
    for (a, &r) in mis.iter().enumerate() {
        assert!((cast.filled[(r, 0)] - pred[a]).abs() < 1e-8);
    }
}

#[test]
fn forecast_mse_grows_with_horizon() {
    let t = 30;
    let mdl = ModelSpec::new(1, t).add_component("ar", ComponentClass::Arma { p: 2, q: 0 }, vec![0], Bounds::default(), Poly::one()).unwrap();
    let par = psi_to_par(&[0.0, 1.2, -0.5], &mdl).unwrap();
    let g = total_acvf(&mdl, &par, t + 20).unwrap();
    let data = DMatrix::from_fn(t, 1, |r, _| (r as f64 * 0.3).sin());
    let mut ext = DMatrix::from_element(t + 15, 1, f64::NAN);
    ext.view_mut((0, 0), (t, 1)).copy_from(&data);
    let (cast, _) = dl_midcast(&g, &ext, 0).unwrap();
    let v: Vec<f64> = (t..t + 15).map(|e| cast.variance(e, 0)).collect();
    assert!(v.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{v:?}");
    assert_eq!(forecast(&g, &data, 15).unwrap().nrows(), 15);
}

#[test]
fn extraction_mse_grows_with_missing_data() {
    let t = 30;
    let mdl = llm(1, t);
    let mut par = ParamSet::default_for(&mdl);
    par.covs[0].d[0] = 0.4;
    let data = simulate(&mdl, &par, t, 10, 3).unwrap();
    let mut less = data.clone();
    less[(10, 0)] = f64::NAN;
    let mut more = less.clone();
    more[(11, 0)] = f64::NAN;
    more[(20, 0)] = f64::NAN;
    let a = latent_signal::extract::adhoc_extract(&mdl, &par, &less, &latent_signal::extract::FilterKernel::scalar(&[0.25, 0.5, 0.25], 1).unwrap(), 0, true).unwrap();
    let b = latent_signal::extract::adhoc_extract(&mdl, &par, &more, &latent_signal::extract::FilterKernel::scalar(&[0.25, 0.5, 0.25], 1).unwrap(), 0, true).unwrap();
    for r in 0..t {
        let va = a.upper[(r, 0)] - a.point[(r, 0)];
        let vb = b.upper[(r, 0)] - b.point[(r, 0)];
        assert!(va >= -1e-12 && vb >= va - 1e-10, "row {r}: {va} {vb}");
    }
}

#[test]
fn acvf_matches_simulation() {
    let t = 4000;
    let mdl = ModelSpec::new(1, t)
        .add_component("ar", ComponentClass::Arma { p: 1, q: 0 }, vec![0], Bounds::default(), Poly::one())
        .unwrap()
        .add_component("noise", ComponentClass::WhiteNoise, vec![0], Bounds::default(), Poly::one())
        .unwrap();
    let par = psi_to_par(&[0.0, 1.0, -0.5], &mdl).unwrap();
    let sum: Vec<f64> = (0..3)
        .map(|h| (0..2).map(|k| component_acvf(&mdl, &par, k, 3).unwrap()[h][(0, 0)]).sum())
        .collect();
    let reps = 40;
    let mut draws = vec![Vec::new(); 3];
    for seed in 0..reps {
        let x = simulate(&mdl, &par, t, 200, seed).unwrap();
        let m = x.mean();
        for h in 0..3 {
            draws[h].push((h..t).map(|s| (x[(s, 0)] - m) * (x[(s - h, 0)] - m)).sum::<f64>() / t as f64);
        }
    }
    for h in 0..3 {
        let mean = draws[h].iter().sum::<f64>() / reps as f64;
        let sd = (draws[h].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!((mean - sum[h]).abs() < 3.0 * sd / (reps as f64).sqrt() + 1e-3, "lag {h}: {mean} vs {}", sum[h]);
    }
}

#[test]
fn holiday_regressor_centered() {
    let dates: Vec<CalendarDate> = (1990..=2019).map(latent_signal::calendar::easter).collect();
    let start = CalendarDate::new(1990, 1, 1).unwrap();
    let end = CalendarDate::new(2019, 12, 31).unwrap();
    let h = gethol(&dates, 7, 0, start, end, true).unwrap();
    assert!(h.iter().sum::<f64>().abs() < 1e-12 * h.len() as f64);
    assert!(h.iter().any(|v| *v != 0.0));
}

#[test]
fn mean_init_differences_to_constant() {
    let t = 40;
    let seasonal = Poly::seasonal_sum(4);
    for d in 1..=2usize {
        let mdl = ModelSpec::new(1, t)
            .add_component("trend", ComponentClass::WhiteNoise, vec![0], Bounds::default(), Poly::difference().pow(d))
            .unwrap()
            .add_component("seas", ComponentClass::WhiteNoise, vec![0], Bounds::default(), seasonal.clone())
            .unwrap()
            .mean_init(0);
        let delta = mdl.full_delta();
        let parts = mdl.components.iter().fold(Poly::one(), |acc, c| acc.mul(&c.delta));
        assert!(close(&delta.0, &parts.0, 1e-12));
        let reg = &mdl.regressors[0][0];
        let out = delta.filter_valid(&reg.values);
        let expect = seasonal.eval_real(1.0) * (1..=d).product::<usize>() as f64;
        assert!(out.iter().all(|v| (v - expect).abs() < 1e-9 * reg.values.iter().fold(1.0f64, |a, b| a.max(b.abs()))), "{out:?}");
        let again = mdl.clone().add_regressor(0, latent_signal::model::Regressor::polynomial("c", 0, t)).unwrap();
        assert_eq!(again.num_regressors(), mdl.num_regressors());
    }
}

#[test]
fn fit_respects_constraints_and_reports_divergence() {
    let t = 80;
    let mdl = llm(2, t).mean_init(0);
    let truth = psi_to_par(&[0.3, -1.0, -1.5, 0.0, 0.0, 0.0, 0.5, 1.0], &mdl).unwrap();
    let data = simulate(&mdl, &truth, t, 50, 9).unwrap();
    let len = mdl.psi_len();
    let mut c = DMatrix::zeros(1, len);
    c[(0, len - 2)] = 1.0;
    c[(0, len - 1)] = -1.0;
    let con = Constraint { c: c.clone(), b: DVector::zeros(1) };
    let init = ParamSet::default_for(&mdl);
    let opts = FitOptions::default();
    let fit = mle_fit(&data, &init, Some(&con), &mdl, &opts, None).unwrap();
    assert!((&c * DVector::from_column_slice(&fit.psi)).amax() < 1e-8);
    assert!((fit.divergence - lik(&fit.psi, &mdl, &data).unwrap()).abs() < 1e-10);

    let scaled = Constraint { c: c * 3.0, b: DVector::zeros(1) };
    let map2 = ConstraintMap::new(Some(&scaled), len).unwrap();
    let hess2 = latent_signal::fit::numerical_hessian(
        &mut |eta: &[f64]| lik(&map2.eta_to_psi(eta), &mdl, &data).unwrap(),
        &map2.psi_to_eta(&fit.psi),
    );
    let a = tstats(&fit.psi, &fit.hessian, &fit.map);
    let b = tstats(&fit.psi, &hess2, &map2);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-6 * x.abs().max(1.0), "{x} vs {y}");
    }

    let (d0, k0) = glr(&data, &fit.psi, &fit.psi, &mdl, &mdl).unwrap();
    assert_eq!((d0, k0), (0.0, 0));
    let other: Vec<f64> = fit.psi.iter().map(|v| v + 0.1).collect();
    let (d1, _) = glr(&data, &fit.psi, &other, &mdl, &mdl).unwrap();
    let (d2, _) = glr(&data, &other, &fit.psi, &mdl, &mdl).unwrap();
    assert_eq!(d1, -d2);
    let _ = par_to_psi(&fit.par, &mdl).unwrap();
}
