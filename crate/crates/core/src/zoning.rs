//! Spatially constrained zoning on a DTW-weighted spanning tree.
//!
//! [`skater_partition`] cuts the tree greedily: each round removes the edge
//! whose split most reduces the summed cluster cost. Every edge of a subtree is
//! scored in `O(m^2)` total from per-node subtree distance sums, and the scores
//! of subtrees untouched by the previous cut are reused as-is.
//!
//! [`grow_partition`] is the incremental formulation: clusters grow from seeds,
//! each absorbing the frontier unit that keeps its mean pairwise distance
//! lowest.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::UnitId;
use crate::dtw::DistanceMatrix;
use crate::geograph::SpanningTree;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZoningError {
    #[error("cluster has no members")]
    EmptyCluster,
    #[error("no frontier unit to admit")]
    EmptyFrontier,
    #[error("k = {k} is outside 1..={n}")]
    InvalidK { k: usize, n: usize },
    #[error("no split leaves both sides with at least {min_size} units")]
    InfeasibleMinSize { min_size: usize },
    #[error("seeds must be {k} distinct units, got {got:?}")]
    SeedOverlap { k: usize, got: Vec<usize> },
    #[error("distance matrix units do not match the tree")]
    UnitMismatch,
}

/// Cost assigned to a cluster from the sum of its pairwise distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Pair sum divided by cluster size; the distance analogue of the
    /// within-cluster sum of squared deviations.
    #[default]
    SsdAnalogue,
    /// Mean distance over all pairs of the cluster.
    MeanPairwise,
}

impl Objective {
    pub fn cost(&self, pair_sum: f64, size: usize) -> f64 {
        if size < 2 {
            return 0.0;
        }
        match self {
            Self::SsdAnalogue => pair_sum / size as f64,
            Self::MeanPairwise => pair_sum / (size * (size - 1) / 2) as f64,
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SsdAnalogue => "ssd_analogue",
            Self::MeanPairwise => "mean_pairwise",
        })
    }
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ssd_analogue" => Ok(Self::SsdAnalogue),
            "mean_pairwise" => Ok(Self::MeanPairwise),
            other => Err(format!("unknown objective {other:?}")),
        }
    }
}

/// Sum of `d[i][j]` over unordered pairs of `members`.
pub fn pair_sum(members: &[usize], d: &DistanceMatrix) -> f64 {
    let mut total = 0.0;
    for (pos, &i) in members.iter().enumerate() {
        let row = d.row(i);
        for &j in &members[pos + 1..] {
            total += row[j];
        }
    }
    total
}

pub fn cluster_cost(members: &[usize], d: &DistanceMatrix, objective: Objective) -> Result<f64, ZoningError> {
    if members.is_empty() {
        return Err(ZoningError::EmptyCluster);
    }
    Ok(objective.cost(pair_sum(members, d), members.len()))
}

/// Picks the frontier unit whose admission gives `cluster` the lowest mean
/// pairwise distance. Ties go to the lowest index.
pub fn admission_test(cluster: &[usize], frontier: &[usize], d: &DistanceMatrix) -> Result<usize, ZoningError> {
    if cluster.is_empty() {
        return Err(ZoningError::EmptyCluster);
    }
    let base = pair_sum(cluster, d);
    let pairs = ((cluster.len() + 1) * cluster.len() / 2) as f64;
    let mut best: Option<(f64, usize)> = None;
    for &q in frontier {
        let row = d.row(q);
        let added: f64 = cluster.iter().map(|&a| row[a]).sum();
        let mean = (base + added) / pairs;
        let better = match best {
            None => true,
            Some((m, b)) => mean < m || (mean == m && q < b),
        };
        if better {
            best = Some((mean, q));
        }
    }
    best.map(|(_, q)| q).ok_or(ZoningError::EmptyFrontier)
}

/// Assignment of units to `k` clusters labelled `1..=k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    pub units: Vec<UnitId>,
    pub labels: Vec<usize>,
    pub k: usize,
    pub objective_kind: Objective,
    /// Sum of the cluster costs.
    pub objective: f64,
    /// Cost per cluster, index `label - 1`.
    pub cluster_costs: Vec<f64>,
    /// Tree edges cut, in removal order for the greedy mode.
    pub removed_edges: Vec<(usize, usize)>,
}

impl Partition {
    /// Builds a partition from raw labels (any values), relabelling clusters
    /// `1..=k` by their lowest member index.
    pub fn from_labels(
        units: Vec<UnitId>,
        raw: &[usize],
        d: &DistanceMatrix,
        objective_kind: Objective,
        removed_edges: Vec<(usize, usize)>,
    ) -> Self {
        let mut relabel = std::collections::BTreeMap::new();
        let labels: Vec<usize> = raw
            .iter()
            .map(|r| {
                let next = relabel.len() + 1;
                *relabel.entry(*r).or_insert(next)
            })
            .collect();
        Self::with_labels(units, labels, d, objective_kind, removed_edges)
    }

    /// Builds a partition from labels already numbered `1..=k`.
    pub fn with_labels(
        units: Vec<UnitId>,
        labels: Vec<usize>,
        d: &DistanceMatrix,
        objective_kind: Objective,
        removed_edges: Vec<(usize, usize)>,
    ) -> Self {
        let k = labels.iter().copied().max().unwrap_or(0);
        let mut part = Self {
            units,
            labels,
            k,
            objective_kind,
            objective: 0.0,
            cluster_costs: Vec::new(),
            removed_edges,
        };
        part.cluster_costs = part
            .clusters()
            .iter()
            .map(|c| objective_kind.cost(pair_sum(c, d), c.len()))
            .collect();
        part.objective = part.cluster_costs.iter().sum();
        part
    }

    /// Members of each cluster, ascending, index `label - 1`.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l - 1].push(i);
        }
        out
    }

    pub fn label_of(&self, unit_id: &str) -> Option<usize> {
        self.units
            .iter()
            .position(|u| u.id == unit_id)
            .map(|i| self.labels[i])
    }
}

/// True when every cluster induces a connected subgraph of the tree.
pub fn clusters_are_connected(labels: &[usize], tree: &SpanningTree) -> bool {
    let adj = tree.adjacency();
    let n = labels.len();
    let mut seen = vec![false; n];
    let mut started = BTreeSet::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        if !started.insert(labels[start]) {
            return false;
        }
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] && labels[w] == labels[start] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    true
}

fn check_inputs(tree: &SpanningTree, d: &DistanceMatrix, k: usize) -> Result<(), ZoningError> {
    if d.units() != tree.units.as_slice() {
        return Err(ZoningError::UnitMismatch);
    }
    let n = tree.len();
    if k == 0 || k > n {
        return Err(ZoningError::InvalidK { k, n });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Split {
    gain: f64,
    edge: (usize, usize),
    /// Endpoint of `edge` on the detached side.
    child: usize,
    child_sum: f64,
    rest_sum: f64,
}

impl Split {
    fn beats(&self, other: &Split) -> bool {
        self.gain > other.gain || (self.gain == other.gain && self.edge < other.edge)
    }
}

#[derive(Debug, Clone)]
struct Subtree {
    members: Vec<usize>,
    pair_sum: f64,
    best: Option<Option<Split>>,
}

/// Scores every edge of a subtree and returns the best feasible split.
fn best_split(
    members: &[usize],
    total: f64,
    adj: &[Vec<usize>],
    d: &DistanceMatrix,
    objective: Objective,
    min_size: usize,
) -> Option<Split> {
    let m = members.len();
    if m < 2 * min_size {
        return None;
    }
    // Preorder from the lowest member; subtrees occupy contiguous ranges.
    let root = members[0];
    let mut order = Vec::with_capacity(m);
    let mut parent = std::collections::HashMap::with_capacity(m);
    let mut stack = vec![(root, usize::MAX)];
    while let Some((v, p)) = stack.pop() {
        order.push(v);
        parent.insert(v, p);
        for &w in adj[v].iter().rev() {
            if w != p {
                stack.push((w, v));
            }
        }
    }
    debug_assert_eq!(order.len(), m);
    let pos: std::collections::HashMap<usize, usize> =
        order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut size = vec![1usize; m];
    for i in (1..m).rev() {
        let p = pos[&parent[&order[i]]];
        size[p] += size[i];
    }

    // below[i][x]: summed distance from unit `order[x]` to the subtree of `order[i]`.
    let mut below: Vec<Vec<f64>> = order
        .iter()
        .map(|&v| {
            let row = d.row(v);
            order.iter().map(|&x| row[x]).collect()
        })
        .collect();
    for i in (1..m).rev() {
        let p = pos[&parent[&order[i]]];
        let (head, tail) = below.split_at_mut(i);
        for (acc, v) in head[p].iter_mut().zip(&tail[0]) {
            *acc += v;
        }
    }

    let whole = objective.cost(total, m);
    let mut best: Option<Split> = None;
    for i in 1..m {
        let inside = size[i];
        let outside = m - inside;
        if inside < min_size || outside < min_size {
            continue;
        }
        let row = &below[i];
        let within: f64 = row[i..i + inside].iter().sum::<f64>() / 2.0;
        let cross: f64 = row[..i].iter().sum::<f64>() + row[i + inside..].iter().sum::<f64>();
        let rest = total - within - cross;
        let gain = whole - objective.cost(within, inside) - objective.cost(rest, outside);
        let (v, p) = (order[i], parent[&order[i]]);
        let split = Split {
            gain,
            edge: (v.min(p), v.max(p)),
            child: v,
            child_sum: within,
            rest_sum: rest,
        };
        if best.is_none_or(|b| split.beats(&b)) {
            best = Some(split);
        }
    }
    best
}

/// Greedy tree partitioning into `k` clusters of at least `min_size` units.
pub fn skater_partition(
    tree: &SpanningTree,
    d: &DistanceMatrix,
    k: usize,
    min_size: usize,
    objective: Objective,
) -> Result<Partition, ZoningError> {
    check_inputs(tree, d, k)?;
    let n = tree.len();
    let min_size = min_size.max(1);
    if k * min_size > n {
        return Err(ZoningError::InfeasibleMinSize { min_size });
    }

    let mut adj = tree.adjacency();
    let all: Vec<usize> = (0..n).collect();
    let mut parts = vec![Subtree {
        pair_sum: pair_sum(&all, d),
        members: all,
        best: None,
    }];
    let mut removed = Vec::with_capacity(k - 1);

    for _ in 1..k {
        let adj_ref = &adj;
        let fresh: Vec<(usize, Option<Split>)> = parts
            .par_iter()
            .enumerate()
            .filter(|(_, p)| p.best.is_none())
            .map(|(i, p)| (i, best_split(&p.members, p.pair_sum, adj_ref, d, objective, min_size)))
            .collect();
        for (i, split) in fresh {
            parts[i].best = Some(split);
        }

        let mut chosen: Option<(usize, Split)> = None;
        for (i, p) in parts.iter().enumerate() {
            if let Some(Some(s)) = p.best {
                if chosen.is_none_or(|(_, c)| s.beats(&c)) {
                    chosen = Some((i, s));
                }
            }
        }
        let (idx, split) = chosen.ok_or(ZoningError::InfeasibleMinSize { min_size })?;

        let (a, b) = split.edge;
        adj[a].retain(|&x| x != b);
        adj[b].retain(|&x| x != a);
        removed.push(split.edge);

        let mut detached = vec![split.child];
        let mut seen: BTreeSet<usize> = BTreeSet::from([split.child]);
        let mut cursor = 0;
        while cursor < detached.len() {
            let v = detached[cursor];
            cursor += 1;
            for &w in &adj[v] {
                if seen.insert(w) {
                    detached.push(w);
                }
            }
        }
        let old = parts.swap_remove(idx);
        let rest: Vec<usize> = old.members.into_iter().filter(|v| !seen.contains(v)).collect();
        detached.sort_unstable();
        parts.push(Subtree {
            members: detached,
            pair_sum: split.child_sum,
            best: None,
        });
        parts.push(Subtree {
            members: rest,
            pair_sum: split.rest_sum,
            best: None,
        });
    }

    let mut raw = vec![0usize; n];
    for (label, p) in parts.iter().enumerate() {
        for &v in &p.members {
            raw[v] = label;
        }
    }
    Ok(Partition::from_labels(tree.units.clone(), &raw, d, objective, removed))
}

/// `k` seeds by greedy farthest-point selection: the most distant pair
/// first, then repeatedly the unit farthest from its nearest seed. Ties go to
/// the lowest index.
pub fn farthest_point_seeds(d: &DistanceMatrix, k: usize) -> Vec<usize> {
    let n = d.len();
    if k == 0 || n == 0 {
        return Vec::new();
    }
    let mut best = (0, 0);
    let mut best_d = f64::NEG_INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            if d.get(i, j) > best_d {
                best_d = d.get(i, j);
                best = (i, j);
            }
        }
    }
    let mut seeds = vec![best.0];
    if k >= 2 && n >= 2 {
        seeds.push(best.1);
    }
    while seeds.len() < k.min(n) {
        let mut pick = None;
        let mut pick_d = f64::NEG_INFINITY;
        for q in 0..n {
            if seeds.contains(&q) {
                continue;
            }
            let near = seeds.iter().map(|&s| d.get(q, s)).fold(f64::INFINITY, f64::min);
            if near > pick_d {
                pick_d = near;
                pick = Some(q);
            }
        }
        seeds.push(pick.expect("unseeded unit remains"));
    }
    seeds
}

/// Grows one cluster per seed over the tree. Clusters take turns (in seed
/// order), each absorbing its [`admission_test`] winner among unassigned tree
/// neighbours, until every unit is assigned.
pub fn grow_partition(
    tree: &SpanningTree,
    d: &DistanceMatrix,
    k: usize,
    seeds: &[usize],
    objective: Objective,
) -> Result<Partition, ZoningError> {
    check_inputs(tree, d, k)?;
    let n = tree.len();
    let distinct: BTreeSet<usize> = seeds.iter().copied().collect();
    if seeds.len() != k || distinct.len() != k || seeds.iter().any(|&s| s >= n) {
        return Err(ZoningError::SeedOverlap {
            k,
            got: seeds.to_vec(),
        });
    }

    let adj = tree.adjacency();
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut clusters: Vec<Vec<usize>> = seeds.iter().map(|&s| vec![s]).collect();
    for (c, &s) in seeds.iter().enumerate() {
        label[s] = Some(c);
    }
    let mut unassigned = n - k;
    while unassigned > 0 {
        let mut progressed = false;
        for c in 0..k {
            let frontier: BTreeSet<usize> = clusters[c]
                .iter()
                .flat_map(|&v| adj[v].iter().copied())
                .filter(|&w| label[w].is_none())
                .collect();
            if frontier.is_empty() {
                continue;
            }
            let frontier: Vec<usize> = frontier.into_iter().collect();
            let winner = admission_test(&clusters[c], &frontier, d)?;
            label[winner] = Some(c);
            clusters[c].push(winner);
            unassigned -= 1;
            progressed = true;
            if unassigned == 0 {
                break;
            }
        }
        assert!(progressed, "spanning tree is connected");
    }

    let raw: Vec<usize> = label.into_iter().map(|l| l.expect("assigned")).collect();
    let removed: Vec<(usize, usize)> = tree
        .edges
        .iter()
        .filter(|e| raw[e.a] != raw[e.b])
        .map(|e| (e.a, e.b))
        .collect();
    // Labels follow seed order.
    let labels = raw.iter().map(|l| l + 1).collect();
    Ok(Partition::with_labels(tree.units.clone(), labels, d, objective, removed))
}
