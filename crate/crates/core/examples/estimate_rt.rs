//! Simulates a renewal epidemic whose R drops from 2.5 to 0.8 on day 30,
//! then estimates and smooths R(t) from the daily counts.

use epizone::dataset::{Calendar, IncidenceSeries, UnitId};
use epizone::repro::{estimate_rt, smooth_rt, SiParams};
use epizone::synth::{cell_rng, simulate_renewal, Noise, Profile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let si = SiParams::default().build()?;
    let profile = Profile::step(2.5, 30, 0.8).values(90);
    let counts = simulate_renewal(&profile, &si, 100.0, Noise::Poisson, &mut cell_rng(1, "example"))?;

    let calendar = Calendar::new("2020-02-24".parse()?, counts.len())?;
    let series = IncidenceSeries::new(UnitId::new("example"), calendar, counts)?;
    let raw = estimate_rt(&series, &si)?;
    let smooth = smooth_rt(&raw, 7)?;

    println!("date        cases     R_true  R_raw   R_smooth");
    for t in (0..series.counts.len()).step_by(5) {
        let show = |v: Option<f64>| v.map_or("   -  ".to_string(), |v| format!("{v:6.3}"));
        println!(
            "{}  {:8.0}  {:6.2}  {}  {}",
            calendar.date(t),
            series.counts[t],
            profile[t],
            show(raw.values[t]),
            show(smooth.values[t])
        );
    }
    println!("the last {} days are censored: their infectees are not yet observed", si.max_lag());
    Ok(())
}
