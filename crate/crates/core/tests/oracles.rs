mod common;

use common::*;
use epizone::dataset::{Calendar, IncidenceSeries, Point, UnitGeometry, UnitId};
use epizone::dtw::{distance_matrix, dtw_distance, DistanceMatrix, DtwConfig, StepPattern};
use epizone::geograph::{build_gabriel, minimum_spanning_tree, EdgeSource, SpanningTree, SpatialGraph, TreeEdge};
use epizone::repro::{estimate_rt, RtSeries, SerialInterval};
use epizone::synth::{adjusted_rand_index, Assignment};
use epizone::zoning::{
    admission_test, cluster_cost, clusters_are_connected, grow_partition, skater_partition, Objective,
};
use rand::Rng;

fn raw(step: StepPattern) -> DtwConfig {
    DtwConfig {
        step,
        normalize: false,
        window: None,
    }
}

fn incidence(counts: &[f64]) -> IncidenceSeries {
    let cal = Calendar::new("2020-03-01".parse().unwrap(), counts.len()).unwrap();
    IncidenceSeries::new(UnitId::new("u"), cal, counts.to_vec()).unwrap()
}

#[test]
fn dtw_small_example_against_all_paths() {
    let (x, y) = ([0.0, 0.0, 1.0], [0.0, 1.0]);
    assert_eq!(path_count(3, 2), 5);
    let got = dtw_distance(&x, &y, &raw(StepPattern::Symmetric1)).unwrap();
    assert_eq!(got, dtw_paths(&x, &y, 1.0));
    assert_eq!(got, 0.0);
}

#[test]
fn dtw_matrix_of_random_trends_against_all_paths() {
    let mut r = rng(11);
    let trends: Vec<RtSeries> = (0..4)
        .map(|i| {
            let cal = Calendar::new("2020-03-01".parse().unwrap(), 5).unwrap();
            RtSeries {
                unit: UnitId::new(format!("t{i}")),
                calendar: cal,
                values: (0..5).map(|_| Some(r.random_range(0.0..3.0))).collect(),
                low_confidence: vec![false; 5],
            }
        })
        .collect();
    for (step, w) in [(StepPattern::Symmetric1, 1.0), (StepPattern::Symmetric2, 2.0)] {
        let d = distance_matrix(&trends, &raw(step)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let x: Vec<f64> = trends[i].values.iter().flatten().copied().collect();
                let y: Vec<f64> = trends[j].values.iter().flatten().copied().collect();
                let expect = if i == j { 0.0 } else { dtw_paths(&x, &y, w) };
                assert_eq!(d.get(i, j), expect, "{step:?} ({i},{j})");
            }
        }
    }
}

#[test]
fn normalized_symmetric2_divides_path_cost_by_total_length() {
    let (x, y) = ([1.0, 3.0, 2.0, 0.5], [2.0, 2.5, 0.0]);
    let cfg = DtwConfig::default();
    let got = dtw_distance(&x, &y, &cfg).unwrap();
    assert!((got - dtw_paths(&x, &y, 2.0) / 7.0).abs() <= 1e-15);
}

#[test]
fn estimator_matches_case_level_attribution() {
    let si = SerialInterval::fixed(1).unwrap();
    let rt = estimate_rt(&incidence(&[10.0, 20.0]), &si).unwrap();
    assert_eq!(rt.values, vec![Some(2.0), None]);
    assert_close(&rt.values, &case_level_rt(&[10, 20], &si));

    let rt = estimate_rt(&incidence(&[5.0, 0.0, 0.0]), &si).unwrap();
    assert_eq!(rt.values, vec![Some(0.0), None, None]);
    assert_close(&rt.values, &case_level_rt(&[5, 0, 0], &si));
}

fn assert_close(got: &[Option<f64>], oracle: &[Option<f64>]) {
    assert_eq!(got.len(), oracle.len());
    for (a, b) in got.iter().zip(oracle) {
        match (a, b) {
            (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-12, "{a} vs {b}"),
            _ => assert_eq!(a.is_some(), b.is_some()),
        }
    }
}

#[test]
fn estimator_matches_case_level_attribution_with_spread_weights() {
    let si = SerialInterval::from_pmf(vec![0.25, 0.5, 0.25]).unwrap();
    let counts = [3u32, 1, 4, 1, 5, 9, 2, 6];
    let rt = estimate_rt(&incidence(&counts.map(f64::from)), &si).unwrap();
    assert_close(&rt.values, &case_level_rt(&counts, &si));
}

#[test]
fn gabriel_matches_brute_force_disk_test() {
    let mut r = rng(5);
    let pts = random_points(10, &mut r);
    let geoms: Vec<UnitGeometry> = ids(10)
        .into_iter()
        .zip(&pts)
        .map(|(u, p)| UnitGeometry::from_centroid(u, *p))
        .collect();
    let g = build_gabriel(&geoms).unwrap();
    let got: Vec<(usize, usize)> = g.edges().map(|(e, _)| e).collect();
    assert_eq!(got, gabriel_brute(&pts));
}

#[test]
fn gabriel_keeps_pair_when_third_point_is_outside_disk() {
    let pts = [Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(1.0, 1.5)];
    let geoms: Vec<UnitGeometry> = ids(3)
        .into_iter()
        .zip(&pts)
        .map(|(u, p)| UnitGeometry::from_centroid(u, *p))
        .collect();
    let g = build_gabriel(&geoms).unwrap();
    assert!(g.has_edge(0, 1));
    assert_eq!(g.edges().map(|(e, _)| e).collect::<Vec<_>>(), gabriel_brute(&pts));
}

#[test]
fn mst_weight_matches_spanning_tree_enumeration() {
    let mut r = rng(3);
    for n in 2..=7 {
        let edges = random_connected_edges(n, 0.5, &mut r);
        // weights on a 1/8 grid keep every sum exact
        let w: Vec<f64> = (0..n * n).map(|_| r.random_range(0..64) as f64 / 8.0).collect();
        let d = DistanceMatrix::from_fn(ids(n), |i, j| w[i.min(j) * n + i.max(j)]).unwrap();
        let mut g = SpatialGraph::new(ids(n));
        for &(a, b) in &edges {
            g.add_edge(a, b, EdgeSource::Gabriel).unwrap();
        }
        let tree = minimum_spanning_tree(&g, &d).unwrap();
        let (best, trees) = min_spanning_weight(n, &edges, |a, b| d.get(a, b));
        assert!(trees >= 1);
        assert_eq!(tree.total_weight(), best, "n = {n}");
    }
}

#[test]
fn cluster_cost_matches_double_loop() {
    let mut r = rng(8);
    let d = random_distances(6, &mut r);
    let members = [0, 1, 2, 3, 4, 5];
    for obj in [Objective::SsdAnalogue, Objective::MeanPairwise] {
        let got = cluster_cost(&members, &d, obj).unwrap();
        assert!((got - double_loop_cost(&members, &d, obj)).abs() <= 1e-12);
    }
}

#[test]
fn admission_matches_exhaustive_means() {
    let mut r = rng(21);
    let d = random_distances(6, &mut r);
    let cluster = [0, 1, 2];
    let frontier = [3, 4, 5];
    let means: Vec<f64> = frontier
        .iter()
        .map(|&q| {
            let mut grown = cluster.to_vec();
            grown.push(q);
            double_loop_pair_sum(&grown, &d) / 6.0
        })
        .collect();
    let best = (0..3).min_by(|&a, &b| means[a].total_cmp(&means[b])).unwrap();
    assert_eq!(admission_test(&cluster, &frontier, &d).unwrap(), frontier[best]);
}

fn path_tree(d: &DistanceMatrix) -> SpanningTree {
    SpanningTree {
        units: d.units().to_vec(),
        edges: (0..d.len() - 1)
            .map(|i| TreeEdge {
                a: i,
                b: i + 1,
                weight: d.get(i, i + 1),
            })
            .collect(),
    }
}

#[test]
fn path_of_four_cuts_the_middle_first_and_matches_enumeration() {
    let pos: [f64; 4] = [0.0, 1.0, 10.0, 11.5];
    let d = DistanceMatrix::from_fn(ids(4), |i, j| (pos[i] - pos[j]).abs()).unwrap();
    let tree = path_tree(&d);
    let p2 = skater_partition(&tree, &d, 2, 1, Objective::SsdAnalogue).unwrap();
    assert_eq!(p2.removed_edges, vec![(1, 2)]);
    let p3 = skater_partition(&tree, &d, 3, 1, Objective::SsdAnalogue).unwrap();
    let (best, first) = exhaustive_zoning(&tree, &d, 3, Objective::SsdAnalogue, 1);
    assert_eq!(first, Some((1, 2)));
    assert!((p3.objective - best).abs() <= 1e-12);
}

/// Replays the seeded growth by hand: clusters take turns, each adding the
/// unassigned tree neighbour that minimises its mean pairwise distance.
fn simulate_growth(tree: &SpanningTree, d: &DistanceMatrix, seeds: &[usize]) -> Vec<usize> {
    let n = tree.len();
    let mut label = vec![0usize; n];
    let mut members: Vec<Vec<usize>> = seeds.iter().map(|&s| vec![s]).collect();
    for (c, &s) in seeds.iter().enumerate() {
        label[s] = c + 1;
    }
    let neighbours = |v: usize| -> Vec<usize> {
        tree.edges
            .iter()
            .filter_map(|e| {
                if e.a == v {
                    Some(e.b)
                } else if e.b == v {
                    Some(e.a)
                } else {
                    None
                }
            })
            .collect()
    };
    while label.contains(&0) {
        for c in 0..seeds.len() {
            let mut options: Vec<usize> = members[c]
                .iter()
                .flat_map(|&v| neighbours(v))
                .filter(|&w| label[w] == 0)
                .collect();
            options.sort_unstable();
            options.dedup();
            let pick = options.into_iter().min_by(|&a, &b| {
                let mean = |q: usize| {
                    let mut g = members[c].clone();
                    g.push(q);
                    double_loop_pair_sum(&g, d) / (g.len() * (g.len() - 1) / 2) as f64
                };
                mean(a).total_cmp(&mean(b)).then(a.cmp(&b))
            });
            if let Some(q) = pick {
                label[q] = c + 1;
                members[c].push(q);
            }
            if !label.contains(&0) {
                break;
            }
        }
    }
    label
}

#[test]
fn seeded_growth_matches_step_by_step_simulation() {
    let mut r = rng(2);
    for _ in 0..20 {
        let d = random_distances(6, &mut r);
        let tree = random_tree(6, &d, &mut r);
        let seeds = [0, 5];
        let p = grow_partition(&tree, &d, 2, &seeds, Objective::MeanPairwise).unwrap();
        let expect = simulate_growth(&tree, &d, &seeds);
        // the partition relabels by lowest member, and unit 0 seeds cluster 1
        assert_eq!(p.labels, expect);
        assert!(clusters_are_connected(&p.labels, &tree));
    }
}

#[test]
fn ari_hand_values() {
    let ids4: Vec<UnitId> = ["a", "b", "c", "d"].iter().map(|s| UnitId::new(*s)).collect();
    let truth = Assignment {
        units: ids4.clone(),
        labels: vec![1, 1, 2, 2],
    };
    let crossed = Assignment {
        units: ids4.clone(),
        labels: vec![1, 2, 1, 2],
    };
    let lumped = Assignment {
        units: ids4,
        labels: vec![1, 1, 1, 1],
    };
    assert_eq!(adjusted_rand_index(&crossed, &truth).unwrap(), -0.5);
    assert_eq!(adjusted_rand_index(&lumped, &truth).unwrap(), 0.0);
    assert_eq!(adjusted_rand_index(&truth, &truth).unwrap(), 1.0);
}
