//! Dynamic time warping between R(t) curves: a shifted copy of a curve is
//! closer to the original than a curve with a different shape.

use epizone::dtw::{dtw_distance, DtwConfig, StepPattern};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let wave = |shift: f64| -> Vec<f64> { (0..40).map(|t| 1.0 + (0.2 * (t as f64 - shift)).sin()).collect() };
    let flat: Vec<f64> = vec![1.0; 40];
    let curves = [("wave", wave(0.0)), ("wave shifted 5 days", wave(5.0)), ("flat", flat)];

    for step in [StepPattern::Symmetric1, StepPattern::Symmetric2] {
        let cfg = DtwConfig {
            step,
            normalize: true,
            window: None,
        };
        println!("{step:?}, normalized");
        for (name, c) in &curves[1..] {
            println!("  wave vs {name:<20} {:.4}", dtw_distance(&curves[0].1, c, &cfg)?);
        }
    }

    let banded = DtwConfig {
        window: Some(2),
        ..DtwConfig::default()
    };
    println!(
        "a 2-day band limits warping: wave vs shifted = {:.4}",
        dtw_distance(&curves[0].1, &curves[1].1, &banded)?
    );
    Ok(())
}
