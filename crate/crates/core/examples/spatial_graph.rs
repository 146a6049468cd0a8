//! Neighbour graphs over a small lattice and over scattered points, and the
//! minimum spanning tree weighted by attribute distance.

use epizone::dataset::{Point, UnitGeometry, UnitId};
use epizone::dtw::DistanceMatrix;
use epizone::geograph::{build_graph, minimum_spanning_tree, GraphMode};
use epizone::synth::{make_scenario, Profile, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lattice = make_scenario(&Scenario::uniform(3, 3, Profile::constant(1.2), 40))?;
    let queen = build_graph(&lattice.geoms, GraphMode::Contiguity)?;
    println!("3x3 lattice, queen contiguity: {} edges", queen.edge_count());

    let pts = [(0.0, 0.0), (1.0, 0.2), (2.1, 0.0), (0.4, 1.5), (5.0, 5.0)];
    let geoms: Vec<UnitGeometry> = pts
        .iter()
        .enumerate()
        .map(|(i, (x, y))| UnitGeometry::from_centroid(UnitId::new(format!("p{i}")), Point::new(*x, *y)))
        .collect();
    for mode in [GraphMode::Gabriel, GraphMode::Knn(1)] {
        let g = build_graph(&geoms, mode)?;
        let edges: Vec<String> = g.edges().map(|((a, b), src)| format!("{a}-{b} ({})", src.as_str())).collect();
        println!("{mode}: {}", edges.join(", "));
    }

    // attribute distances: units 0..3 alike, unit 4 different
    let level: [f64; 5] = [1.0, 1.1, 0.9, 1.05, 3.0];
    let d = DistanceMatrix::from_fn(geoms.iter().map(|g| g.unit.clone()).collect(), |i, j| {
        (level[i] - level[j]).abs()
    })?;
    let tree = minimum_spanning_tree(&build_graph(&geoms, GraphMode::Gabriel)?, &d)?;
    for e in &tree.edges {
        println!("mst {}-{} weight {:.2}", e.a, e.b, e.weight);
    }
    Ok(())
}
