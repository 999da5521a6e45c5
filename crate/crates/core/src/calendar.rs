//! Gregorian calendar arithmetic, daily/weekly re-indexing and holiday
//! regressors.
//!
//! Day-of-week numbers run from 1 for Sunday to 7 for Saturday. Day indices
//! within a year start at 1 for January 1.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CalendarDate {
    pub year: i32,
    pub month: u32,
    pub day: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Weekday {
    Sunday = 1,
    Monday = 2,
    Tuesday = 3,
    Wednesday = 4,
    Thursday = 5,
    Friday = 6,
    Saturday = 7,
}

impl Weekday {
    pub fn from_number(n: u32) -> Result<Weekday> {
        use Weekday::*;
        Ok(match n {
            1 => Sunday,
            2 => Monday,
            3 => Tuesday,
            4 => Wednesday,
            5 => Thursday,
            6 => Friday,
            7 => Saturday,
            _ => return invalid(format!("weekday number {n} outside 1..=7")),
        })
    }

    pub fn number(self) -> u32 {
        self as u32
    }
}

pub fn is_leap(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

pub fn days_in_year(year: i32) -> u32 {
    if is_leap(year) {
        366
    } else {
        365
    }
}

pub fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        2 => 28,
        _ => 0,
    }
}

impl CalendarDate {
    pub fn new(year: i32, month: u32, day: u32) -> Result<CalendarDate> {
        if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
            return invalid(format!("no such date {year}-{month:02}-{day:02}"));
        }
        Ok(CalendarDate { year, month, day })
    }

    /// Days since 1970-01-01.
    pub fn ordinal(self) -> i64 {
        // civil-from-days inverse, proleptic Gregorian
        let y = self.year as i64 - if self.month <= 2 { 1 } else { 0 };
        let era = y.div_euclid(400);
        let yoe = y - era * 400;
        let m = self.month as i64;
        let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) + 2) / 5 + self.day as i64 - 1;
        let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        era * 146097 + doe - 719468
    }

    pub fn from_ordinal(z: i64) -> CalendarDate {
        let z = z + 719468;
        let era = z.div_euclid(146097);
        let doe = z - era * 146097;
        let yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
        let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        let mp = (5 * doy + 2) / 153;
        let day = (doy - (153 * mp + 2) / 5 + 1) as u32;
        let month = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
        let year = (yoe + era * 400 + if month <= 2 { 1 } else { 0 }) as i32;
        CalendarDate { year, month, day }
    }

    pub fn add_days(self, n: i64) -> CalendarDate {
        CalendarDate::from_ordinal(self.ordinal() + n)
    }
}

impl fmt::Display for CalendarDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

impl std::str::FromStr for CalendarDate {
    type Err = Error;

    /// Accepts `YYYY-MM-DD`.
    fn from_str(s: &str) -> Result<CalendarDate> {
        let parts: Vec<&str> = s.trim().split('-').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("bad date '{s}'")));
        }
        let num = |p: &str| p.parse::<i64>().map_err(|_| Error::Parse(format!("bad date '{s}'")));
        CalendarDate::new(num(parts[0])? as i32, num(parts[1])? as u32, num(parts[2])? as u32)
    }
}

/// Index of the date within its year, January 1 being 1.
pub fn date_to_day(date: CalendarDate) -> u32 {
    (1..date.month).map(|m| days_in_month(date.year, m)).sum::<u32>() + date.day
}

/// Date with the given day index relative to `year`. Indices below 1 roll
/// back into earlier years and indices past the year's end roll forward.
pub fn day_to_date(index: i64, year: i32) -> CalendarDate {
    let jan1 = CalendarDate { year, month: 1, day: 1 };
    jan1.add_days(index - 1)
}

pub fn day_of_week(date: CalendarDate) -> Weekday {
    // 1970-01-01 was a Thursday
    let n = (date.ordinal() + 4).rem_euclid(7) + 1;
    Weekday::from_number(n as u32).expect("value in range")
}

/// Days from `first_day` forward to the weekday of `date`, in `0..7`.
fn lead_days(date: CalendarDate, first_day: Weekday) -> i64 {
    (day_of_week(date).number() as i64 - first_day.number() as i64).rem_euclid(7)
}

/// Daily series folded into weeks that begin on `first_day`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeeklyEmbedding {
    /// One row per week, column `j` holding the `j`-th day of that week.
    pub values: DMatrix<f64>,
    pub year: i32,
    /// Week number within `year`, 1-based.
    pub week: i64,
    /// Day index (within `year`) of the first day of the first week.
    pub first_index: i64,
    /// Number of leading missing values inserted.
    pub lead: usize,
}

/// Fold a daily series into a 7-variate weekly series, padding with `NaN`
/// so that every row starts on `first_day`.
pub fn daily_to_weekly(daily: &[f64], start: CalendarDate, first_day: Weekday) -> WeeklyEmbedding {
    let lead = lead_days(start, first_day) as usize;
    let first_index = date_to_day(start) as i64 - lead as i64;
    let week = ceil_div(first_index - 1, 7) + 1;
    let total = lead + daily.len();
    let rows = total.div_ceil(7);
    let mut values = DMatrix::from_element(rows, 7, f64::NAN);
    for (i, v) in daily.iter().enumerate() {
        let k = lead + i;
        values[(k / 7, k % 7)] = *v;
    }
    WeeklyEmbedding { values, year: start.year, week, first_index, lead }
}

fn ceil_div(a: i64, b: i64) -> i64 {
    -((-a).div_euclid(b))
}

/// Day index (relative to `year`) of the first day of week `week`.
fn week_start_index(first_day: Weekday, year: i32, week: i64) -> i64 {
    let jan1 = CalendarDate { year, month: 1, day: 1 };
    let day_lead = lead_days(jan1, first_day);
    7 * (week - 1) - day_lead + 1
}

/// Unfold a weekly embedding back into a daily series and report the date
/// of its first day.
pub fn weekly_to_daily(weekly: &DMatrix<f64>, first_day: Weekday, year: i32, week: i64) -> (Vec<f64>, CalendarDate) {
    let start = day_to_date(week_start_index(first_day, year, week), year);
    let mut out = Vec::with_capacity(weekly.nrows() * weekly.ncols());
    for r in 0..weekly.nrows() {
        for c in 0..weekly.ncols() {
            out.push(weekly[(r, c)]);
        }
    }
    (out, start)
}

/// First and last dates covered by `num_weeks` weeks starting at `week` of
/// `year`.
pub fn weekly_to_date(first_day: Weekday, year: i32, week: i64, num_weeks: usize) -> (CalendarDate, CalendarDate) {
    let start = day_to_date(week_start_index(first_day, year, week), year);
    let end = start.add_days(7 * num_weeks as i64 - 1);
    (start, end)
}

/// Moving-holiday regressor over `[start, end]`.
///
/// Each holiday date switches on a window from `fore` days before to `aft`
/// days after it. When `center` is set, the average value for each calendar
/// day (month and day) over the whole years spanned by `dates` is
/// subtracted, so fixed-date holidays contribute nothing.
pub fn gethol(
    dates: &[CalendarDate],
    fore: u32,
    aft: u32,
    start: CalendarDate,
    end: CalendarDate,
    center: bool,
) -> Result<Vec<f64>> {
    if end < start {
        return invalid("holiday regressor end precedes start");
    }
    let mut on: HashMap<i64, f64> = HashMap::new();
    for d in dates {
        let o = d.ordinal();
        for k in o - fore as i64..=o + aft as i64 {
            on.insert(k, 1.0);
        }
    }
    let mut means: HashMap<(u32, u32), f64> = HashMap::new();
    if center && !dates.is_empty() {
        let y0 = dates.iter().map(|d| d.year).min().unwrap();
        let y1 = dates.iter().map(|d| d.year).max().unwrap();
        let mut counts: HashMap<(u32, u32), (f64, f64)> = HashMap::new();
        let a = CalendarDate { year: y0, month: 1, day: 1 }.ordinal();
        let b = CalendarDate { year: y1, month: 12, day: 31 }.ordinal();
        for k in a..=b {
            let d = CalendarDate::from_ordinal(k);
            let e = counts.entry((d.month, d.day)).or_insert((0.0, 0.0));
            e.0 += on.get(&k).copied().unwrap_or(0.0);
            e.1 += 1.0;
        }
        means = counts.into_iter().map(|(k, (s, n))| (k, s / n)).collect();
    }
    let out = (start.ordinal()..=end.ordinal())
        .map(|k| {
            let d = CalendarDate::from_ordinal(k);
            let v = on.get(&k).copied().unwrap_or(0.0);
            v - means.get(&(d.month, d.day)).copied().unwrap_or(0.0)
        })
        .collect();
    Ok(out)
}

/// Which occurrence of a weekday within a month.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Occurrence {
    Nth(u32),
    Last,
}

/// Dates of a floating holiday such as "third Monday of January".
pub fn find_holiday(month: u32, weekday: Weekday, which: Occurrence, years: std::ops::RangeInclusive<i32>) -> Result<Vec<CalendarDate>> {
    if !(1..=12).contains(&month) {
        return invalid("month outside 1..=12");
    }
    let mut out = Vec::new();
    for year in years {
        let date = match which {
            Occurrence::Nth(n) => {
                if n == 0 || n > 5 {
                    return invalid("occurrence must be in 1..=5");
                }
                let first = CalendarDate { year, month, day: 1 };
                let offset = (weekday.number() as i64 - day_of_week(first).number() as i64).rem_euclid(7);
                let d = first.add_days(offset + 7 * (n as i64 - 1));
                if d.month != month {
                    continue;
                }
                d
            }
            Occurrence::Last => {
                let last = CalendarDate { year, month, day: days_in_month(year, month) };
                let back = (day_of_week(last).number() as i64 - weekday.number() as i64).rem_euclid(7);
                last.add_days(-back)
            }
        };
        out.push(date);
    }
    Ok(out)
}

/// Western Easter Sunday (anonymous Gregorian computus).
pub fn easter(year: i32) -> CalendarDate {
    let a = year % 19;
    let b = year / 100;
    let c = year % 100;
    let d = b / 4;
    let e = b % 4;
    let f = (b + 8) / 25;
    let g = (b - f + 1) / 3;
    let h = (19 * a + b - d - g + 15) % 30;
    let i = c / 4;
    let k = c % 4;
    let l = (32 + 2 * e + 2 * i - h - k) % 7;
    let m = (a + 11 * h + 22 * l) / 451;
    let month = (h + l - 7 * m + 114) / 31;
    let day = (h + l - 7 * m + 114) % 31 + 1;
    CalendarDate { year, month: month as u32, day: day as u32 }
}

/// Parse a holiday file with one `MM DD YYYY` date per line.
pub fn parse_holiday_dates(text: &str) -> Result<Vec<CalendarDate>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Parse(format!("holiday line {}: '{line}'", lineno + 1));
        if f.len() != 3 {
            return Err(bad());
        }
        let m = f[0].parse::<u32>().map_err(|_| bad())?;
        let d = f[1].parse::<u32>().map_err(|_| bad())?;
        let y = f[2].parse::<i32>().map_err(|_| bad())?;
        out.push(CalendarDate::new(y, m, d)?);
    }
    Ok(out)
}

pub fn read_holiday_file(path: &Path) -> Result<Vec<CalendarDate>> {
    parse_holiday_dates(&std::fs::read_to_string(path)?)
}

pub fn format_holiday_dates(dates: &[CalendarDate]) -> String {
    dates.iter().map(|d| format!("{:02} {:02} {:04}\n", d.month, d.day, d.year)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> CalendarDate {
        CalendarDate::new(y, m, d).unwrap()
    }

    #[test]
    fn leap_rules() {
        assert!(is_leap(2000) && is_leap(2020));
        assert!(!is_leap(1900) && !is_leap(2019));
    }

    #[test]
    fn day_index_examples() {
        assert_eq!(date_to_day(date(2020, 2, 28)), 59);
        assert_eq!(day_to_date(0, 2020), date(2019, 12, 31));
        assert_eq!(day_to_date(53, 2020), date(2020, 2, 22));
        assert_eq!(day_to_date(367, 2020), date(2021, 1, 1));
    }

    #[test]
    fn weekday_examples() {
        assert_eq!(day_of_week(date(2020, 1, 1)), Weekday::Wednesday);
        assert_eq!(day_of_week(date(2020, 2, 28)), Weekday::Friday);
        assert_eq!(day_of_week(date(1970, 1, 1)), Weekday::Thursday);
    }

    #[test]
    fn weekly_fold_example() {
        let e = daily_to_weekly(&[1.0; 10], date(2020, 2, 28), Weekday::Saturday);
        assert_eq!(e.lead, 6);
        assert_eq!(e.first_index, 53);
        assert_eq!(e.week, 9);
        assert_eq!(e.values[(0, 6)], 1.0);
        assert!(e.values[(0, 5)].is_nan());
    }

    #[test]
    fn week_dates() {
        let (s, e) = weekly_to_date(Weekday::Saturday, 2020, 9, 1);
        assert_eq!(s, date(2020, 2, 22));
        assert_eq!(e, date(2020, 2, 28));
        let (s, _) = weekly_to_date(Weekday::Sunday, 2020, 9, 1);
        assert_eq!(s, date(2020, 2, 23));
        let (s, _) = weekly_to_date(Weekday::Saturday, 2020, 1, 1);
        assert_eq!(s, date(2019, 12, 28));
    }

    #[test]
    fn floating_holidays() {
        let mlk = find_holiday(1, Weekday::Monday, Occurrence::Nth(3), 2012..=2012).unwrap();
        assert_eq!(mlk[0], date(2012, 1, 16));
        let tg = find_holiday(11, Weekday::Thursday, Occurrence::Last, 2019..=2019).unwrap();
        assert_eq!(tg[0], date(2019, 11, 28));
    }

    #[test]
    fn easter_dates() {
        assert_eq!(easter(2019), date(2019, 4, 21));
        assert_eq!(easter(2024), date(2024, 3, 31));
        assert_eq!(easter(2000), date(2000, 4, 23));
    }

    #[test]
    fn fixed_date_holiday_centers_to_zero() {
        let xmas: Vec<CalendarDate> = (2000..=2020).map(|y| date(y, 12, 25)).collect();
        let r = gethol(&xmas, 7, 0, date(2005, 1, 1), date(2010, 12, 31), true).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn uncentered_window_is_indicator() {
        let d = vec![date(2020, 4, 12)];
        let r = gethol(&d, 2, 1, date(2020, 4, 1), date(2020, 4, 30), false).unwrap();
        let ones: Vec<usize> = r.iter().enumerate().filter(|(_, v)| **v == 1.0).map(|(i, _)| i).collect();
        assert_eq!(ones, vec![9, 10, 11, 12]);
    }

    #[test]
    fn holiday_file_round_trip() {
        let d = vec![date(2021, 4, 4), date(2022, 4, 17)];
        let text = format_holiday_dates(&d);
        assert_eq!(parse_holiday_dates(&text).unwrap(), d);
        assert!(parse_holiday_dates("04 31 2021").is_err());
    }
}
