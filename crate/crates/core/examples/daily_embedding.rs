//! A daily series folded into a 7-variate weekly series. Scalar daily
//! filters become matrix filters on the weekly vectors, and filtering in
//! either form gives the same daily output away from the ends.

use latent_signal::calendar::{daily_to_weekly, day_of_week, weekly_to_daily, CalendarDate, Weekday};
use latent_signal::extract::{deembed, hi_to_low, x11_filters, FilterKernel};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn main() -> latent_signal::Result<()> {
    let start = CalendarDate::new(2021, 3, 17)?;
    let days = 3 * 365;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let weekday_effect = [-3.0, 1.0, 0.5, 0.5, 0.7, 0.8, -0.5];
    let mut level = 100.0;
    let daily: Vec<f64> = (0..days)
        .map(|i| {
            level += 0.05 * noise.sample(&mut rng);
            let dow = day_of_week(start.add_days(i as i64)).number() as usize - 1;
            level + weekday_effect[dow] + 0.3 * noise.sample(&mut rng)
        })
        .collect();

    let emb = daily_to_weekly(&daily, start, Weekday::Sunday);
    println!(
        "{days} days from a {:?} become {} weeks starting week {} of {} ({} leading gaps)",
        day_of_week(start),
        emb.values.nrows(),
        emb.week,
        emb.year,
        emb.lead
    );
    let (back, first) = weekly_to_daily(&emb.values, Weekday::Sunday, emb.year, emb.week);
    println!("unfolded series starts {first:?}, {} values", back.len());

    let (week_mean, _, _) = x11_filters(7.0, 1)?;
    let weekly_mean = hi_to_low(&week_mean, 7)?;
    println!(
        "centered 7-day mean: {} daily taps become {} weekly 7x7 taps (lead {}, lag {})",
        week_mean.len(),
        weekly_mean.len(),
        weekly_mean.lead(),
        weekly_mean.lag()
    );
    let long = FilterKernel::scalar(&[1.0 / 29.0; 29], 14)?;
    println!("centered 29-day mean: {} weekly taps", hi_to_low(&long, 7)?.len());

    // from the first whole week on, so rows of the embedding start on Sunday
    let whole = &back[emb.lead.div_ceil(7) * 7..];
    let usable = whole.len() / 7 * 7;
    let scalar_out = week_mean.apply(&DMatrix::from_column_slice(usable, 1, &whole[..usable]))?;
    let embedded_out = deembed(&weekly_mean.apply(&DMatrix::from_row_slice(usable / 7, 7, &whole[..usable]))?);
    let mut worst = 0.0f64;
    let mut compared = 0;
    for (a, b) in scalar_out.iter().zip(&embedded_out) {
        if a.is_finite() && b.is_finite() {
            worst = worst.max((a - b).abs());
            compared += 1;
        }
    }
    println!("embedded versus daily filtering: {compared} days compared, max difference {worst:.1e}");

    let mut effect = [0.0; 7];
    let mut count = [0usize; 7];
    for (i, (x, m)) in whole[..usable].iter().zip(scalar_out.iter()).enumerate() {
        if m.is_finite() {
            effect[i % 7] += x - m;
            count[i % 7] += 1;
        }
    }
    let names = ["sun", "mon", "tue", "wed", "thu", "fri", "sat"];
    println!("day-of-week effects, estimated against true:");
    for d in 0..7 {
        println!("  {}  {:6.2}  {:6.2}", names[d], effect[d] / count[d] as f64, weekday_effect[d]);
    }
    Ok(())
}
