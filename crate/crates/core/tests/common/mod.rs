//! Independent reference implementations used by the integration and
//! acceptance tests. Each one is written the slow, obvious way.
#![allow(dead_code)]

use epizone::dataset::{Point, UnitId};
use epizone::dtw::DistanceMatrix;
use epizone::geograph::{SpanningTree, TreeEdge};
use epizone::repro::SerialInterval;
use epizone::zoning::Objective;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ids(n: usize) -> Vec<UnitId> {
    (0..n).map(|i| UnitId::new(format!("u{i:02}"))).collect()
}

/// Minimum DTW cost over every monotone alignment path, found by walking all
/// paths explicitly. Costs are accumulated left to right in path order.
pub fn dtw_paths(x: &[f64], y: &[f64], diag_weight: f64) -> f64 {
    fn walk(x: &[f64], y: &[f64], w: f64, i: usize, j: usize, acc: f64, best: &mut f64) {
        if i == x.len() - 1 && j == y.len() - 1 {
            *best = best.min(acc);
            return;
        }
        if i + 1 < x.len() {
            walk(x, y, w, i + 1, j, acc + (x[i + 1] - y[j]).abs(), best);
        }
        if j + 1 < y.len() {
            walk(x, y, w, i, j + 1, acc + (x[i] - y[j + 1]).abs(), best);
        }
        if i + 1 < x.len() && j + 1 < y.len() {
            walk(x, y, w, i + 1, j + 1, acc + w * (x[i + 1] - y[j + 1]).abs(), best);
        }
    }
    let mut best = f64::INFINITY;
    walk(x, y, diag_weight, 0, 0, diag_weight * (x[0] - y[0]).abs(), &mut best);
    best
}

/// Number of monotone alignment paths between series of lengths `n` and `m`.
pub fn path_count(n: usize, m: usize) -> u64 {
    let mut t = vec![vec![0u64; m]; n];
    for i in 0..n {
        for j in 0..m {
            t[i][j] = if i == 0 && j == 0 {
                1
            } else {
                let up = if i > 0 { t[i - 1][j] } else { 0 };
                let left = if j > 0 { t[i][j - 1] } else { 0 };
                let diag = if i > 0 && j > 0 { t[i - 1][j - 1] } else { 0 };
                up + left + diag
            };
        }
    }
    t[n - 1][m - 1]
}

/// Case-level reproduction numbers: every case is listed individually, each
/// later case `j` is attributed to earlier case `i` with probability
/// `p_ij = w(s_j - s_i) / sum_k w(s_j - s_k)`, and `R(t)` is the mean over
/// cases with onset `t` of their expected offspring. Days that are empty or
/// whose infectees can fall past the end of the series are `None`.
pub fn case_level_rt(counts: &[u32], si: &SerialInterval) -> Vec<Option<f64>> {
    let onsets: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(t, &c)| std::iter::repeat_n(t, c as usize))
        .collect();
    let lag = si.max_lag();
    let n = counts.len();
    let mut offspring = vec![0.0; onsets.len()];
    for &sj in &onsets {
        let weights: Vec<(usize, f64)> = onsets
            .iter()
            .enumerate()
            .filter(|(_, &si_)| si_ < sj)
            .map(|(i, &si_)| (i, si.weight(sj - si_)))
            .collect();
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        if total == 0.0 {
            continue;
        }
        for (i, w) in weights {
            offspring[i] += w / total;
        }
    }
    (0..n)
        .map(|t| {
            if counts[t] == 0 || t + lag >= n {
                return None;
            }
            let mine: Vec<f64> = onsets
                .iter()
                .zip(&offspring)
                .filter(|(s, _)| **s == t)
                .map(|(_, r)| *r)
                .collect();
            Some(mine.iter().sum::<f64>() / mine.len() as f64)
        })
        .collect()
}

/// Random connected graph on `n` vertices: a random spanning tree plus each
/// remaining pair with probability `extra`.
pub fn random_connected_edges(n: usize, extra: f64, r: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for v in 1..n {
        let p = r.random_range(0..v);
        edges.push((p, v));
    }
    for a in 0..n {
        for b in a + 1..n {
            if !edges.contains(&(a, b)) && r.random_bool(extra) {
                edges.push((a, b));
            }
        }
    }
    edges.sort_unstable();
    edges
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn is_spanning_tree(n: usize, chosen: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    for &(a, b) in chosen {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return false;
        }
        parent[ra] = rb;
    }
    chosen.len() + 1 == n
}

/// Every `size`-subset of `0..n`, in lexicographic order.
pub fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < size - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, size, &mut Vec::new(), &mut out);
    out
}

/// Minimum total weight over all spanning trees, by enumerating every
/// `(n-1)`-subset of edges. Returns the weight and the number of trees seen.
pub fn min_spanning_weight(n: usize, edges: &[(usize, usize)], w: impl Fn(usize, usize) -> f64) -> (f64, usize) {
    let mut best = f64::INFINITY;
    let mut trees = 0;
    for pick in subsets(edges.len(), n - 1) {
        let chosen: Vec<(usize, usize)> = pick.iter().map(|&i| edges[i]).collect();
        if is_spanning_tree(n, &chosen) {
            trees += 1;
            let total: f64 = chosen.iter().map(|&(a, b)| w(a, b)).sum();
            best = best.min(total);
        }
    }
    (best, trees)
}

/// Gabriel edges by testing every third point against the closed disk whose
/// diameter is the candidate pair: `k` blocks `(i, j)` when the angle at `k`
/// is at least a right angle.
pub fn gabriel_brute(pts: &[Point]) -> Vec<(usize, usize)> {
    let n = pts.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let blocked = (0..n).filter(|&k| k != i && k != j).any(|k| {
                let (a, b, c) = (pts[i], pts[j], pts[k]);
                (a.x - c.x) * (b.x - c.x) + (a.y - c.y) * (b.y - c.y) <= 0.0
            });
            if !blocked {
                out.push((i, j));
            }
        }
    }
    out
}

/// Euclidean minimum spanning tree by Prim's algorithm on the complete graph.
pub fn euclidean_mst(pts: &[Point]) -> Vec<(usize, usize)> {
    let n = pts.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, 0usize); n];
    in_tree[0] = true;
    for v in 1..n {
        best[v] = (pts[0].dist2(&pts[v]), 0);
    }
    let mut out = Vec::new();
    for _ in 1..n {
        let v = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| best[a].0.total_cmp(&best[b].0))
            .unwrap();
        in_tree[v] = true;
        let u = best[v].1;
        out.push((u.min(v), u.max(v)));
        for q in 0..n {
            let d = pts[v].dist2(&pts[q]);
            if !in_tree[q] && d < best[q].0 {
                best[q] = (d, v);
            }
        }
    }
    out.sort_unstable();
    out
}

pub fn random_points(n: usize, r: &mut impl Rng) -> Vec<Point> {
    (0..n)
        .map(|_| Point::new(r.random_range(0.0..100.0), r.random_range(0.0..100.0)))
        .collect()
}

/// Pair sum by the full double loop over ordered pairs, halved.
pub fn double_loop_pair_sum(members: &[usize], d: &DistanceMatrix) -> f64 {
    let mut total = 0.0;
    for &i in members {
        for &j in members {
            if i != j {
                total += d.get(i, j);
            }
        }
    }
    total / 2.0
}

pub fn double_loop_cost(members: &[usize], d: &DistanceMatrix, objective: Objective) -> f64 {
    let s = members.len();
    if s < 2 {
        return 0.0;
    }
    let total = double_loop_pair_sum(members, d);
    match objective {
        Objective::SsdAnalogue => total / s as f64,
        Objective::MeanPairwise => total / (s * (s - 1) / 2) as f64,
    }
}

/// Random tree on `n` units (each unit attaches to an earlier one) weighted
/// by `d`.
pub fn random_tree(n: usize, d: &DistanceMatrix, r: &mut impl Rng) -> SpanningTree {
    let edges = (1..n)
        .map(|v| {
            let p = r.random_range(0..v);
            TreeEdge {
                a: p,
                b: v,
                weight: d.get(p, v),
            }
        })
        .collect();
    SpanningTree {
        units: d.units().to_vec(),
        edges,
    }
}

/// Distances between random points in the unit cube, standing in for DTW
/// distances between trends.
pub fn random_distances(n: usize, r: &mut impl Rng) -> DistanceMatrix {
    let feats: Vec<[f64; 3]> = (0..n)
        .map(|_| [r.random::<f64>(), r.random::<f64>(), r.random::<f64>()])
        .collect();
    DistanceMatrix::from_fn(ids(n), |i, j| {
        feats[i]
            .iter()
            .zip(&feats[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    })
    .unwrap()
}

/// Component labels of the tree with the given edges removed.
pub fn components(tree: &SpanningTree, removed: &[usize]) -> Vec<usize> {
    let n = tree.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for (i, e) in tree.edges.iter().enumerate() {
        if !removed.contains(&i) {
            let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
            parent[ra] = rb;
        }
    }
    (0..n).map(|v| find(&mut parent, v)).collect()
}

/// Objective of the partition obtained by cutting the listed tree edges, or
/// `None` when a piece is smaller than `min_size`.
pub fn cut_objective(
    tree: &SpanningTree,
    removed: &[usize],
    d: &DistanceMatrix,
    objective: Objective,
    min_size: usize,
) -> Option<f64> {
    let comp = components(tree, removed);
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (v, c) in comp.iter().enumerate() {
        groups.entry(*c).or_default().push(v);
    }
    if groups.values().any(|g| g.len() < min_size) {
        return None;
    }
    Some(groups.values().map(|g| double_loop_cost(g, d, objective)).sum())
}

/// Best objective over every way of removing `k - 1` tree edges, and the
/// best single removal (as an `(a, b)` pair with `a < b`).
pub fn exhaustive_zoning(
    tree: &SpanningTree,
    d: &DistanceMatrix,
    k: usize,
    objective: Objective,
    min_size: usize,
) -> (f64, Option<(usize, usize)>) {
    let m = tree.edges.len();
    let best = subsets(m, k - 1)
        .iter()
        .filter_map(|cut| cut_objective(tree, cut, d, objective, min_size))
        .fold(f64::INFINITY, f64::min);
    let first = (0..m)
        .filter_map(|e| cut_objective(tree, &[e], d, objective, min_size).map(|o| (o, e)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, e)| {
            let edge = tree.edges[e];
            (edge.a.min(edge.b), edge.a.max(edge.b))
        });
    (best, first)
}

/// Case reproduction number implied by a daily R profile:
/// `R_c(t) = sum_tau w(tau) R(t + tau)`.
pub fn case_reproduction(profile: &[f64], si: &SerialInterval) -> Vec<Option<f64>> {
    let lag = si.max_lag();
    (0..profile.len())
        .map(|t| (t + lag < profile.len()).then(|| (1..=lag).map(|tau| si.weight(tau) * profile[t + tau]).sum()))
        .collect()
}

/// Lightest spanning tree by enumeration, as a sorted edge list.
pub fn min_spanning_edges(n: usize, edges: &[(usize, usize)], w: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    let mut best = (f64::INFINITY, Vec::new());
    for pick in subsets(edges.len(), n - 1) {
        let chosen: Vec<(usize, usize)> = pick.iter().map(|&i| edges[i]).collect();
        if is_spanning_tree(n, &chosen) {
            let total: f64 = chosen.iter().map(|&(a, b)| w(a, b)).sum();
            if total < best.0 {
                best = (total, chosen);
            }
        }
    }
    best.1.sort_unstable();
    best.1
}
