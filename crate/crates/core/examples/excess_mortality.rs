//! Excess deaths against a five-year baseline and the weekly change
//! relative to the second week.

use chrono::{Datelike, Days, NaiveDate};
use epizone::ingest::{compute_excess, parse_mortality_reader, weekly_percent_change};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let start = NaiveDate::from_ymd_opt(2020, 3, 1).unwrap();
    let mut csv = String::from("unit_id,date,deaths\n");
    for t in 0..42u64 {
        let date = start + Days::new(t);
        for year in 2015..=2019 {
            csv.push_str(&format!("town,{},{}\n", date.with_year(year).unwrap(), 8 + year % 3));
        }
        let surge = if t >= 14 { (1.25f64).powi(t as i32 - 14).round() } else { 0.0 };
        csv.push_str(&format!("town,{date},{}\n", 9.0 + surge));
    }

    let panel = parse_mortality_reader(csv.as_bytes())?.remove(0);
    let excess = compute_excess(&panel, 2020)?;
    for (t, (raw, floored)) in excess.raw.iter().zip(&excess.floored.counts).enumerate().step_by(7) {
        println!("{}  raw {raw:7.1}  floored {floored:7.1}", excess.floored.calendar.date(t));
    }
    for w in weekly_percent_change(&excess.target, excess.floored.calendar, 1) {
        let pct = w.percent_change.map_or("-".to_string(), |p| format!("{p:+.0}%"));
        println!("week of {}: {:5.0} deaths  {pct}", w.week_start, w.total);
    }
    Ok(())
}
