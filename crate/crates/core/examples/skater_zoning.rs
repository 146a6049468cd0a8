//! Zoning a lattice into three regions with the greedy tree-cutting method
//! and with seeded growth, compared against the true regions.

use epizone::dataset::validate_dataset;
use epizone::pipeline::{analyze, zone, AnalysisParams, ZoningMethod};
use epizone::synth::{adjusted_rand_index, make_scenario, Assignment, Noise, Profile, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profiles = vec![
        Profile::step(2.2, 25, 0.8),
        Profile::constant(1.1),
        Profile::step(1.4, 40, 0.6),
    ];
    let mut sc = Scenario::bands(9, 6, profiles, 90);
    sc.noise = Noise::Poisson;
    sc.seed = 4;
    let data = make_scenario(&sc)?;
    let ds = validate_dataset(data.series, data.geoms)?;

    let mut params = AnalysisParams::new(3);
    let a = analyze(ds, &params)?;
    let skater = &a.partition;
    println!(
        "skater: objective {:.4}, cut edges {:?}, ARI {:.3}",
        skater.objective,
        skater.removed_edges,
        adjusted_rand_index(&Assignment::from(skater), &data.truth)?
    );

    params.zoning = ZoningMethod::Seeded;
    let seeded = zone(&a.tree, &a.distances, &params)?;
    println!(
        "seeded: objective {:.4}, ARI {:.3}",
        seeded.objective,
        adjusted_rand_index(&Assignment::from(&seeded), &data.truth)?
    );

    for row in 0..sc.rows {
        let line: String = (0..sc.cols)
            .map(|col| skater.label_of(&sc.cell_id(row, col)).map_or('.', |l| char::from(b'0' + l as u8)))
            .collect();
        println!("  {line}");
    }
    Ok(())
}
