//! Calendar helpers: moving holidays, weekday arithmetic, day indices and
//! holiday regressors.

use latent_signal::calendar::{
    date_to_day, day_of_week, day_to_date, easter, find_holiday, format_holiday_dates, gethol, weekly_to_date,
    CalendarDate, Occurrence, Weekday,
};

fn main() -> latent_signal::Result<()> {
    let easters: Vec<CalendarDate> = (2020..=2026).map(easter).collect();
    println!("easter sundays:\n{}", format_holiday_dates(&easters));

    let thanksgiving = find_holiday(11, Weekday::Thursday, Occurrence::Nth(4), 2024..=2026)?;
    let memorial = find_holiday(5, Weekday::Monday, Occurrence::Last, 2024..=2026)?;
    for (a, b) in thanksgiving.iter().zip(&memorial) {
        println!("{}: memorial day {:02}-{:02}, thanksgiving {:02}-{:02}", a.year, b.month, b.day, a.month, a.day);
    }

    let d = CalendarDate::new(2024, 2, 29)?;
    let idx = date_to_day(d);
    println!("2024-02-29 is day {idx} of its year, a {:?}", day_of_week(d));
    let back = day_to_date(idx as i64 + 400, 2024);
    println!("400 days later: {}-{:02}-{:02}", back.year, back.month, back.day);

    let (first, last) = weekly_to_date(Weekday::Sunday, 2025, 1, 52);
    println!("52 weeks from week 1 of 2025: {first:?} .. {last:?}");

    // a week-long pre-holiday window, centered so each calendar day averages zero
    let start = CalendarDate::new(2020, 1, 1)?;
    let end = CalendarDate::new(2026, 12, 31)?;
    let reg = gethol(&easters, 7, 0, start, end, true)?;
    let on = reg.iter().filter(|v| **v > 0.0).count();
    let mean = reg.iter().sum::<f64>() / reg.len() as f64;
    println!("easter regressor: {} days, {on} positive, mean {mean:.2e}", reg.len());
    Ok(())
}
