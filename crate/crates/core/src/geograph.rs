//! Spatial proximity graphs over units and the DTW-weighted minimum spanning
//! tree extracted from them.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Point, UnitGeometry, UnitId};
use crate::dtw::DistanceMatrix;
use crate::geometry::segment_dist2;

/// Boundary points closer than this (in CRS units) count as shared.
pub const CONTIGUITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("unit {0} has no polygon")]
    MissingPolygon(String),
    #[error("units {0} and {1} share a centroid")]
    DuplicateCentroid(String, String),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("graph needs at least {need} units, got {got}")]
    TooFewUnits { need: usize, got: usize },
    #[error("distance matrix units do not match graph units")]
    UnitMismatch,
    #[error("invalid graph mode {0:?}")]
    InvalidMode(String),
    #[error("edge ({0}, {1}) is invalid")]
    InvalidEdge(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeSource {
    Contiguity,
    Gabriel,
    Knn,
    Bridge,
}

impl EdgeSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Contiguity => "contiguity",
            Self::Gabriel => "gabriel",
            Self::Knn => "knn",
            Self::Bridge => "bridge",
        }
    }
}

impl std::str::FromStr for EdgeSource {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "contiguity" => Ok(Self::Contiguity),
            "gabriel" => Ok(Self::Gabriel),
            "knn" => Ok(Self::Knn),
            "bridge" => Ok(Self::Bridge),
            other => Err(GraphError::InvalidMode(other.into())),
        }
    }
}

/// How the proximity graph is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GraphMode {
    /// Queen contiguity when every unit has a polygon, Gabriel otherwise.
    #[default]
    Auto,
    Contiguity,
    Gabriel,
    Knn(usize),
}

impl fmt::Display for GraphMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Contiguity => f.write_str("contiguity"),
            Self::Gabriel => f.write_str("gabriel"),
            Self::Knn(k) => write!(f, "knn:{k}"),
        }
    }
}

impl std::str::FromStr for GraphMode {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Self::Auto),
            "contiguity" => Ok(Self::Contiguity),
            "gabriel" => Ok(Self::Gabriel),
            _ => {
                let k = s
                    .strip_prefix("knn:")
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|k| *k > 0)
                    .ok_or_else(|| GraphError::InvalidMode(s.into()))?;
                Ok(Self::Knn(k))
            }
        }
    }
}

impl Serialize for GraphMode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GraphMode {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Undirected proximity graph. Edges are keyed `(i, j)` with `i < j`, indices
/// into `units`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGraph {
    pub units: Vec<UnitId>,
    edges: BTreeMap<(usize, usize), EdgeSource>,
}

impl SpatialGraph {
    pub fn new(units: Vec<UnitId>) -> Self {
        Self {
            units,
            edges: BTreeMap::new(),
        }
    }

    /// Adds an edge unless it is a self-loop or already present.
    pub fn add_edge(&mut self, a: usize, b: usize, source: EdgeSource) -> Result<bool, GraphError> {
        let n = self.units.len();
        if a == b || a >= n || b >= n {
            return Err(GraphError::InvalidEdge(a, b));
        }
        let key = (a.min(b), a.max(b));
        if self.edges.contains_key(&key) {
            return Ok(false);
        }
        self.edges.insert(key, source);
        Ok(true)
    }

    pub fn edges(&self) -> impl Iterator<Item = ((usize, usize), EdgeSource)> + '_ {
        self.edges.iter().map(|(k, v)| (*k, *v))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains_key(&(a.min(b), a.max(b)))
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Component label per unit, labels numbered by first appearance.
    pub fn components(&self) -> Vec<usize> {
        let mut uf = UnionFind::new(self.units.len());
        for &(a, b) in self.edges.keys() {
            uf.union(a, b);
        }
        let mut label = BTreeMap::new();
        (0..self.units.len())
            .map(|i| {
                let root = uf.find(i);
                let next = label.len();
                *label.entry(root).or_insert(next)
            })
            .collect()
    }

    pub fn component_count(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

fn bbox_overlap(a: &[f64; 4], b: &[f64; 4], tol: f64) -> bool {
    a[0] <= b[2] + tol && b[0] <= a[2] + tol && a[1] <= b[3] + tol && b[1] <= a[3] + tol
}

fn segments_of(g: &UnitGeometry) -> Vec<(Point, Point)> {
    g.polygon
        .iter()
        .flatten()
        .flat_map(|part| part.rings())
        .flat_map(|ring| ring.windows(2).map(|w| (w[0], w[1])))
        .collect()
}

fn seg_bbox(s: &(Point, Point)) -> [f64; 4] {
    [
        s.0.x.min(s.1.x),
        s.0.y.min(s.1.y),
        s.0.x.max(s.1.x),
        s.0.y.max(s.1.y),
    ]
}

/// Queen contiguity: an edge wherever two polygons share at least one
/// boundary point, within [`CONTIGUITY_TOLERANCE`].
pub fn build_contiguity(geoms: &[UnitGeometry]) -> Result<SpatialGraph, GraphError> {
    let mut boxes = Vec::with_capacity(geoms.len());
    for g in geoms {
        boxes.push(g.bbox().ok_or_else(|| GraphError::MissingPolygon(g.unit.id.clone()))?);
    }
    let segments: Vec<Vec<(Point, Point)>> = geoms.iter().map(segments_of).collect();
    let tol = CONTIGUITY_TOLERANCE;
    let tol2 = tol * tol;

    let n = geoms.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let (boxes, segments) = (&boxes, &segments);
            (i + 1..n).filter(move |&j| {
                if !bbox_overlap(&boxes[i], &boxes[j], tol) {
                    return false;
                }
                let near_j: Vec<&(Point, Point)> = segments[j]
                    .iter()
                    .filter(|s| bbox_overlap(&seg_bbox(s), &boxes[i], tol))
                    .collect();
                segments[i]
                    .iter()
                    .filter(|s| bbox_overlap(&seg_bbox(s), &boxes[j], tol))
                    .any(|a| {
                        let ba = seg_bbox(a);
                        near_j.iter().any(|b| {
                            bbox_overlap(&ba, &seg_bbox(b), tol)
                                && segment_dist2(&a.0, &a.1, &b.0, &b.1) <= tol2
                        })
                    })
            })
            .map(move |j| (i, j))
        })
        .collect();

    let mut graph = SpatialGraph::new(geoms.iter().map(|g| g.unit.clone()).collect());
    for (i, j) in pairs {
        graph.add_edge(i, j, EdgeSource::Contiguity)?;
    }
    Ok(graph)
}

fn check_centroids(geoms: &[UnitGeometry], need: usize) -> Result<(), GraphError> {
    if geoms.len() < need {
        return Err(GraphError::TooFewUnits {
            need,
            got: geoms.len(),
        });
    }
    let mut order: Vec<usize> = (0..geoms.len()).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (geoms[a].centroid, geoms[b].centroid);
        p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y))
    });
    for w in order.windows(2) {
        if geoms[w[0]].centroid == geoms[w[1]].centroid {
            let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
            return Err(GraphError::DuplicateCentroid(
                geoms[a].unit.id.clone(),
                geoms[b].unit.id.clone(),
            ));
        }
    }
    Ok(())
}

/// Gabriel graph on centroids: `(i, j)` is an edge unless another centroid
/// lies in the closed disk whose diameter is the segment `ij`.
pub fn build_gabriel(geoms: &[UnitGeometry]) -> Result<SpatialGraph, GraphError> {
    check_centroids(geoms, 2)?;
    let pts: Vec<Point> = geoms.iter().map(|g| g.centroid).collect();
    let n = pts.len();

    // Candidate blockers are found by x-range over the disk.
    let mut by_x: Vec<usize> = (0..n).collect();
    by_x.sort_by(|&a, &b| pts[a].x.total_cmp(&pts[b].x).then(a.cmp(&b)));
    let xs: Vec<f64> = by_x.iter().map(|&i| pts[i].x).collect();

    let pairs: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let (pts, by_x, xs) = (&pts, &by_x, &xs);
            (i + 1..n)
                .filter(move |&j| {
                    let (a, b) = (pts[i], pts[j]);
                    let cx = (a.x + b.x) / 2.0;
                    let r = (a.dist2(&b)).sqrt() / 2.0;
                    // Widened slightly so rounding in r never drops a blocker.
                    let lo = xs.partition_point(|x| *x < cx - r * (1.0 + 1e-9) - 1e-12);
                    let hi = xs.partition_point(|x| *x <= cx + r * (1.0 + 1e-9) + 1e-12);
                    !by_x[lo..hi].iter().any(|&k| {
                        if k == i || k == j {
                            return false;
                        }
                        let p = pts[k];
                        (p.x - a.x) * (p.x - b.x) + (p.y - a.y) * (p.y - b.y) <= 0.0
                    })
                })
                .map(move |j| (i, j))
        })
        .collect();

    let mut graph = SpatialGraph::new(geoms.iter().map(|g| g.unit.clone()).collect());
    for (i, j) in pairs {
        graph.add_edge(i, j, EdgeSource::Gabriel)?;
    }
    Ok(graph)
}

/// Symmetrized k-nearest-neighbour graph on centroids; distance ties go to the
/// lower index.
pub fn build_knn(geoms: &[UnitGeometry], k: usize) -> Result<SpatialGraph, GraphError> {
    check_centroids(geoms, 2)?;
    let n = geoms.len();
    let mut graph = SpatialGraph::new(geoms.iter().map(|g| g.unit.clone()).collect());
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (geoms[i].centroid.dist2(&geoms[j].centroid), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in others.iter().take(k) {
            graph.add_edge(i, j, EdgeSource::Knn)?;
        }
    }
    Ok(graph)
}

/// Joins components by repeatedly adding the shortest centroid-to-centroid
/// edge between two different components (ties: lowest index pair).
pub fn ensure_connected(mut graph: SpatialGraph, geoms: &[UnitGeometry]) -> SpatialGraph {
    let n = graph.len();
    loop {
        let comp = graph.components();
        if comp.iter().all(|&c| c == 0) {
            return graph;
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            for j in i + 1..n {
                if comp[i] == comp[j] {
                    continue;
                }
                let d = geoms[i].centroid.dist2(&geoms[j].centroid);
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, i, j));
                }
            }
        }
        let (_, i, j) = best.expect("more than one component");
        graph
            .add_edge(i, j, EdgeSource::Bridge)
            .expect("bridge endpoints are distinct units");
    }
}

/// Builds the proximity graph for `mode` and bridges any disconnected parts.
pub fn build_graph(geoms: &[UnitGeometry], mode: GraphMode) -> Result<SpatialGraph, GraphError> {
    let graph = match mode {
        GraphMode::Auto if geoms.iter().all(|g| g.polygon.is_some()) => build_contiguity(geoms)?,
        GraphMode::Auto | GraphMode::Gabriel => build_gabriel(geoms)?,
        GraphMode::Contiguity => build_contiguity(geoms)?,
        GraphMode::Knn(k) => build_knn(geoms, k)?,
    };
    Ok(ensure_connected(graph, geoms))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Spanning tree over the units of a connected graph, weighted by DTW
/// distance. Edges are stored in the order Kruskal accepted them.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    pub units: Vec<UnitId>,
    pub edges: Vec<TreeEdge>,
}

impl SpanningTree {
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.units.len()];
        for e in &self.edges {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        adj.iter_mut().for_each(|v| v.sort_unstable());
        adj
    }

    /// Component labels after deleting the listed edges (as `(a, b)`, `a < b`).
    pub fn components_without(&self, removed: &[(usize, usize)]) -> Vec<usize> {
        let mut uf = UnionFind::new(self.units.len());
        for e in &self.edges {
            if !removed.contains(&(e.a, e.b)) {
                uf.union(e.a, e.b);
            }
        }
        let mut label = BTreeMap::new();
        (0..self.units.len())
            .map(|i| {
                let root = uf.find(i);
                let next = label.len();
                *label.entry(root).or_insert(next)
            })
            .collect()
    }
}

/// Kruskal's algorithm over the graph's edges weighted by `d`. Equal weights
/// are ordered by edge index pair, so the tree is unique.
pub fn minimum_spanning_tree(graph: &SpatialGraph, d: &DistanceMatrix) -> Result<SpanningTree, GraphError> {
    if d.units() != graph.units.as_slice() {
        return Err(GraphError::UnitMismatch);
    }
    let mut candidates: Vec<TreeEdge> = graph
        .edges()
        .map(|((a, b), _)| TreeEdge {
            a,
            b,
            weight: d.get(a, b),
        })
        .collect();
    candidates.sort_by(|x, y| {
        x.weight
            .total_cmp(&y.weight)
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });

    let n = graph.len();
    let mut uf = UnionFind::new(n);
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for e in candidates {
        if uf.union(e.a, e.b) {
            edges.push(e);
            if edges.len() + 1 == n {
                break;
            }
        }
    }
    if edges.len() + 1 != n {
        return Err(GraphError::Disconnected);
    }
    Ok(SpanningTree {
        units: graph.units.clone(),
        edges,
    })
}
