//! Recovery of a two-region lattice over several random seeds.

use epizone::dataset::validate_dataset;
use epizone::pipeline::{analyze, AnalysisParams};
use epizone::synth::{adjusted_rand_index, make_scenario, Assignment, Noise, Profile, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut sc = Scenario::halves(10, 10, Profile::constant(2.0), Profile::constant(0.7), 60);
    for (noise, seeds) in [(Noise::Deterministic, 0..1u64), (Noise::Poisson, 0..8u64)] {
        sc.noise = noise;
        for seed in seeds {
            sc.seed = seed;
            let data = make_scenario(&sc)?;
            let a = analyze(validate_dataset(data.series, data.geoms)?, &AnalysisParams::new(2))?;
            let ari = adjusted_rand_index(&Assignment::from(&a.partition), &data.truth)?;
            println!("{noise:?} seed {seed}: ARI {ari:.3}");
        }
    }
    Ok(())
}
