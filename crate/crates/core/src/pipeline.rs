//! Stage orchestration: configuration, the in-memory analysis chain and the
//! file-level stage runners behind the command line.
//!
//! Every runner computes all of its outputs before touching the output
//! directory, so a failing run leaves no artifacts behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{covering_calendar, validate_dataset, Calendar, IncidenceSeries, UnitGeometry, ValidatedDataset};
use crate::dtw::{distance_matrix, DistanceMatrix, DtwConfig, StepPattern};
use crate::error::{Error, Result};
use crate::geograph::{build_graph, minimum_spanning_tree, GraphMode, SpanningTree, SpatialGraph};
use crate::ingest::{
    aggregate_panels, compute_excess_on, difference_cumulative, parse_aggregation_csv, parse_geometry,
    parse_incidence_csv, parse_mortality_csv, read_to_string, restrict_to_calendar, weekly_percent_change, Excess,
    IngestError, MortalityPanel, WeeklyChange,
};
use crate::io;
use crate::render::{choropleth_svg, cluster_color, line_chart_svg, trends_svg, Line};
use crate::repro::{estimate_rt, smooth_rt, RtSeries, SiParams};
use crate::synth::{adjusted_rand_index, make_scenario, Assignment, Scenario};
use crate::zoning::{farthest_point_seeds, grow_partition, skater_partition, Objective, Partition};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "EPIZONE_THREADS";

/// Index of the reference block for weekly change: the second week.
pub const REFERENCE_WEEK: usize = 1;

/// Sizes the global thread pool from `EPIZONE_THREADS` when it is set. Has no
/// effect once the pool exists.
pub fn init_thread_pool() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    /// Daily case counts.
    #[default]
    Cases,
    /// Floored excess deaths from a multi-year mortality file.
    ExcessMortality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoningMethod {
    /// Greedy edge removal on the spanning tree.
    #[default]
    Skater,
    /// Round-robin growth from seed units.
    Seeded,
}

impl std::str::FromStr for ZoningMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "skater" => Ok(Self::Skater),
            "seeded" => Ok(Self::Seeded),
            other => Err(format!("unknown zoning method {other:?}")),
        }
    }
}

/// Parameters of the chain from incidence to zones.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisParams {
    pub si: SiParams,
    pub smooth_window: usize,
    pub dtw: DtwConfig,
    pub graph: GraphMode,
    pub k: usize,
    pub min_size: usize,
    pub objective: Objective,
    pub zoning: ZoningMethod,
    /// Seed unit ids for the seeded method; farthest-point seeds otherwise.
    pub seeds: Option<Vec<String>>,
}

impl AnalysisParams {
    pub fn new(k: usize) -> Self {
        Self {
            si: SiParams::default(),
            smooth_window: default_smooth_window(),
            dtw: DtwConfig::default(),
            graph: GraphMode::default(),
            k,
            min_size: 1,
            objective: Objective::default(),
            zoning: ZoningMethod::default(),
            seeds: None,
        }
    }
}

fn default_smooth_window() -> usize {
    7
}

fn default_min_size() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("epizone-out")
}

/// One pipeline run. Relative paths in a config file are resolved against
/// the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub mode: PipelineMode,
    /// `unit_id,date,count` file (cases mode).
    #[serde(default)]
    pub incidence: Option<PathBuf>,
    /// Treat `count` as a running total and difference it.
    #[serde(default)]
    pub cumulative: bool,
    /// `unit_id,date,deaths` file (excess mode).
    #[serde(default)]
    pub mortality: Option<PathBuf>,
    /// Optional `fine_id,coarse_id` map applied to the mortality units.
    #[serde(default)]
    pub aggregation: Option<PathBuf>,
    #[serde(default)]
    pub target_year: Option<i32>,
    #[serde(default)]
    pub geometry: Option<PathBuf>,
    /// Optional `unit_id,cluster` file scored with the adjusted Rand index.
    #[serde(default)]
    pub truth: Option<PathBuf>,
    #[serde(default)]
    pub start_date: Option<NaiveDate>,
    /// Last day analysed; later days are discarded.
    #[serde(default)]
    pub end_date: Option<NaiveDate>,
    #[serde(default)]
    pub si: SiParams,
    #[serde(default = "default_smooth_window")]
    pub smooth_window: usize,
    #[serde(default)]
    pub dtw: DtwConfig,
    #[serde(default)]
    pub graph: GraphMode,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_min_size")]
    pub min_size: usize,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default)]
    pub zoning: ZoningMethod,
    #[serde(default)]
    pub seeds: Option<Vec<String>>,
    /// Recorded in the report. The analysis chain itself draws no random
    /// numbers.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_json(&read_to_string(path)?)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.incidence,
            &mut self.mortality,
            &mut self.aggregation,
            &mut self.geometry,
            &mut self.truth,
        ]
        .into_iter()
        .flatten()
        {
            join(p);
        }
        join(&mut self.out);
    }

    pub fn analysis(&self) -> Result<AnalysisParams> {
        let k = self.k.ok_or_else(|| Error::Config("k is required".into()))?;
        Ok(AnalysisParams {
            si: self.si,
            smooth_window: self.smooth_window,
            dtw: self.dtw,
            graph: self.graph,
            k,
            min_size: self.min_size,
            objective: self.objective,
            zoning: self.zoning,
            seeds: self.seeds.clone(),
        })
    }

    /// Checks everything that can be checked without reading inputs.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        match self.mode {
            PipelineMode::Cases if self.incidence.is_none() => return fail("cases mode needs an incidence file"),
            PipelineMode::ExcessMortality if self.mortality.is_none() => {
                return fail("excess_mortality mode needs a mortality file")
            }
            PipelineMode::ExcessMortality if self.target_year.is_none() => {
                return fail("excess_mortality mode needs target_year")
            }
            _ => {}
        }
        if self.geometry.is_none() {
            return fail("a geometry file is required");
        }
        let params = self.analysis()?;
        if params.k == 0 {
            return fail("k must be at least 1");
        }
        if params.min_size == 0 {
            return fail("min_size must be at least 1");
        }
        if self.smooth_window == 0 || self.smooth_window % 2 == 0 {
            return fail("smooth_window must be odd");
        }
        self.si.build()?;
        if let (Some(a), Some(b)) = (self.start_date, self.end_date) {
            if b < a {
                return fail("end_date precedes start_date");
            }
        }
        if let Some(seeds) = &self.seeds {
            if self.zoning != ZoningMethod::Seeded {
                return fail("seeds are only used with zoning = seeded");
            }
            if seeds.len() != params.k {
                return fail("the number of seeds must equal k");
            }
        }
        Ok(())
    }
}

/// Command-line values that replace config entries when present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub k: Option<usize>,
    pub min_size: Option<usize>,
    pub si_mean: Option<f64>,
    pub si_sd: Option<f64>,
    pub smooth_window: Option<usize>,
    pub dtw_step: Option<StepPattern>,
    pub dtw_normalize: Option<bool>,
    pub dtw_window: Option<usize>,
    pub start_date: Option<NaiveDate>,
    pub end_date: Option<NaiveDate>,
    pub graph: Option<GraphMode>,
    pub objective: Option<Objective>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        macro_rules! set {
            ($src:ident => $($dst:tt)+) => {
                if let Some(v) = self.$src.clone() {
                    cfg.$($dst)+ = v;
                }
            };
        }
        if let Some(k) = self.k {
            cfg.k = Some(k);
        }
        set!(min_size => min_size);
        set!(si_mean => si.mean);
        set!(si_sd => si.sd);
        set!(smooth_window => smooth_window);
        set!(dtw_step => dtw.step);
        set!(dtw_normalize => dtw.normalize);
        if let Some(w) = self.dtw_window {
            cfg.dtw.window = Some(w);
        }
        if let Some(d) = self.start_date {
            cfg.start_date = Some(d);
        }
        if let Some(d) = self.end_date {
            cfg.end_date = Some(d);
        }
        set!(graph => graph);
        set!(objective => objective);
        set!(seed => seed);
        set!(out => out);
    }
}

/// Everything computed between validated input and zones.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub dataset: ValidatedDataset,
    pub rt_raw: Vec<RtSeries>,
    /// Smoothed R(t), the input of the distance stage.
    pub rt: Vec<RtSeries>,
    pub distances: DistanceMatrix,
    pub graph: SpatialGraph,
    pub tree: SpanningTree,
    pub partition: Partition,
}

/// Raw and smoothed R(t) for each series.
pub fn estimate_all(
    series: &[IncidenceSeries],
    si: &SiParams,
    smooth_window: usize,
) -> Result<(Vec<RtSeries>, Vec<RtSeries>)> {
    let si = si.build()?;
    let raw: Vec<RtSeries> = series.par_iter().map(|s| estimate_rt(s, &si)).collect::<Result<_, _>>()?;
    let smooth = raw.par_iter().map(|r| smooth_rt(r, smooth_window)).collect::<Result<_, _>>()?;
    Ok((raw, smooth))
}

/// Zones from a spanning tree and distances.
pub fn zone(tree: &SpanningTree, d: &DistanceMatrix, p: &AnalysisParams) -> Result<Partition> {
    Ok(match p.zoning {
        ZoningMethod::Skater => skater_partition(tree, d, p.k, p.min_size, p.objective)?,
        ZoningMethod::Seeded => {
            let seeds = match &p.seeds {
                Some(ids) => ids
                    .iter()
                    .map(|id| {
                        d.units()
                            .iter()
                            .position(|u| &u.id == id)
                            .ok_or_else(|| Error::Config(format!("seed unit {id} is not in the dataset")))
                    })
                    .collect::<Result<Vec<_>>>()?,
                None => farthest_point_seeds(d, p.k),
            };
            grow_partition(tree, d, p.k, &seeds, p.objective)?
        }
    })
}

pub fn analyze(dataset: ValidatedDataset, p: &AnalysisParams) -> Result<Analysis> {
    let (rt_raw, rt) = estimate_all(&dataset.series, &p.si, p.smooth_window)?;
    let distances = distance_matrix(&rt, &p.dtw)?;
    let graph = build_graph(&dataset.geoms, p.graph)?;
    let tree = minimum_spanning_tree(&graph, &distances)?;
    let partition = zone(&tree, &distances, p)?;
    Ok(Analysis {
        dataset,
        rt_raw,
        rt,
        distances,
        graph,
        tree,
        partition,
    })
}

/// Restricts series to `[start, end]`, defaulting each bound to the current
/// calendar.
pub fn apply_window(
    series: Vec<IncidenceSeries>,
    start: Option<NaiveDate>,
    end: Option<NaiveDate>,
) -> Result<Vec<IncidenceSeries>> {
    if start.is_none() && end.is_none() {
        return Ok(series);
    }
    let Some(first) = series.first() else {
        return Ok(series);
    };
    let calendar = Calendar::spanning(start.unwrap_or(first.calendar.start), end.unwrap_or(first.calendar.end()))?;
    Ok(restrict_to_calendar(&series, calendar)?)
}

/// Reads an incidence file, differencing cumulative totals if asked and
/// applying the date window.
pub fn load_incidence(
    path: &Path,
    cumulative: bool,
    start: Option<NaiveDate>,
    end: Option<NaiveDate>,
) -> Result<Vec<IncidenceSeries>> {
    let mut series = parse_incidence_csv(path)?;
    if cumulative {
        series = series.iter().map(difference_cumulative).collect();
    }
    apply_window(series, start, end)
}

/// Mortality panels, aggregated when a map is given.
pub fn load_mortality(path: &Path, aggregation: Option<&Path>) -> Result<Vec<MortalityPanel>> {
    let panels = parse_mortality_csv(path)?;
    Ok(match aggregation {
        Some(map) => aggregate_panels(&panels, &parse_aggregation_csv(map)?)?,
        None => panels,
    })
}

/// Excess series of every panel on the target-year span observed in any of
/// them.
pub fn excess_all(panels: &[MortalityPanel], target_year: i32) -> Result<Vec<Excess>> {
    let dates: Vec<NaiveDate> = panels
        .iter()
        .filter_map(|p| p.by_year.get(&target_year))
        .flatten()
        .map(|(d, _)| *d)
        .collect();
    let calendar = covering_calendar(&dates).map_err(|_| IngestError::MissingTargetYear(target_year))?;
    Ok(panels
        .par_iter()
        .map(|p| compute_excess_on(p, target_year, calendar))
        .collect::<Result<_, _>>()?)
}

/// Weekly totals of `values` per group with their change against the
/// second week.
fn weekly_by_group(
    names: &[String],
    values: &[Vec<f64>],
    calendar: Calendar,
) -> (String, String) {
    let weekly: Vec<Vec<WeeklyChange>> = values
        .iter()
        .map(|v| weekly_percent_change(v, calendar, REFERENCE_WEEK))
        .collect();
    let mut csv_text = String::from("group,week_start,deaths,percent_change\n");
    for (name, rows) in names.iter().zip(&weekly) {
        for w in rows {
            let pct = w.percent_change.map(|p| p.to_string()).unwrap_or_default();
            csv_text.push_str(&format!("{name},{},{},{pct}\n", w.week_start, w.total));
        }
    }
    let labels: Vec<String> = weekly
        .first()
        .map(|rows| rows.iter().map(|w| w.week_start.format("%m-%d").to_string()).collect())
        .unwrap_or_default();
    let lines: Vec<Line> = names
        .iter()
        .zip(&weekly)
        .enumerate()
        .map(|(i, (name, rows))| Line {
            name: name.clone(),
            color: cluster_color(i + 1).to_string(),
            values: rows.iter().map(|w| w.percent_change).collect(),
        })
        .collect();
    let svg = line_chart_svg(
        "Weekly deaths, % change against the second week",
        "% change",
        &labels,
        &lines,
        Some(0.0),
    );
    (csv_text, svg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalendarSummary {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub days: usize,
}

impl From<Calendar> for CalendarSummary {
    fn from(c: Calendar) -> Self {
        Self {
            start: c.start,
            end: c.end(),
            days: c.len,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSummary {
    pub edges: usize,
    pub by_provenance: BTreeMap<&'static str, usize>,
    pub mst_weight: f64,
}

impl GraphSummary {
    fn new(graph: &SpatialGraph, tree: &SpanningTree) -> Self {
        let mut by_provenance = BTreeMap::new();
        for (_, source) in graph.edges() {
            *by_provenance.entry(source.as_str()).or_insert(0) += 1;
        }
        Self {
            edges: graph.edge_count(),
            by_provenance,
            mst_weight: tree.total_weight(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub label: usize,
    pub size: usize,
    pub cost: f64,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoningSummary {
    pub method: ZoningMethod,
    pub objective_kind: Objective,
    pub k: usize,
    pub objective: f64,
    pub clusters: Vec<ClusterSummary>,
    pub removed_edges: Vec<[String; 2]>,
    /// Adjusted Rand index against the truth file, when one is given.
    pub ari: Option<f64>,
}

impl ZoningSummary {
    fn new(p: &Partition, method: ZoningMethod, truth: Option<&Assignment>) -> Result<Self> {
        let clusters = p
            .clusters()
            .into_iter()
            .enumerate()
            .map(|(i, members)| ClusterSummary {
                label: i + 1,
                size: members.len(),
                cost: p.cluster_costs[i],
                members: members.iter().map(|&m| p.units[m].id.clone()).collect(),
            })
            .collect();
        let ari = truth
            .map(|t| adjusted_rand_index(&Assignment::from(p), t))
            .transpose()?;
        Ok(Self {
            method,
            objective_kind: p.objective_kind,
            k: p.k,
            objective: p.objective,
            clusters,
            removed_edges: p
                .removed_edges
                .iter()
                .map(|&(a, b)| [p.units[a].id.clone(), p.units[b].id.clone()])
                .collect(),
            ari,
        })
    }
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub version: &'static str,
    pub config: PipelineConfig,
    pub units: usize,
    pub calendar: CalendarSummary,
    pub graph: GraphSummary,
    pub zoning: ZoningSummary,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

/// Writes `files` into `dir`. If any write fails, the files already written
/// (and the directory, if this call created it) are removed.
pub fn write_artifacts(dir: &Path, files: &[(&str, String)]) -> Result<()> {
    let created = !dir.exists();
    let fail = |path: &Path, source| Error::Write {
        path: path.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(|e| fail(dir, e))?;
    let mut written = Vec::new();
    for (name, content) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, content) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            if created {
                let _ = fs::remove_dir(dir);
            }
            return Err(fail(&path, e));
        }
        written.push(path);
    }
    Ok(())
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| Error::Config(format!("{what} is required")))
}

/// Runs ingest, R(t), distances, graph and zoning, then writes `rt.csv`,
/// `rt_raw.csv`, `distances.csv`, `graph.csv`, `mst.csv`, `clusters.csv`,
/// `report.json`, `map.svg` and `trends.svg` (plus `excess.csv`,
/// `weekly_change.csv` and `weekly_change.svg` in excess mode).
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Report> {
    cfg.validate()?;
    let params = cfg.analysis()?;
    let geoms = parse_geometry(required(&cfg.geometry, "geometry")?)?;
    let truth = cfg.truth.as_deref().map(io::read_clusters_csv).transpose()?;

    let mut files: Vec<(&str, String)> = Vec::new();
    let mut excess = None;
    let series = match cfg.mode {
        PipelineMode::Cases => {
            load_incidence(required(&cfg.incidence, "incidence")?, cfg.cumulative, cfg.start_date, cfg.end_date)?
        }
        PipelineMode::ExcessMortality => {
            let year = cfg.target_year.expect("validated");
            let panels = load_mortality(required(&cfg.mortality, "mortality")?, cfg.aggregation.as_deref())?;
            let all = excess_all(&panels, year)?;
            files.push(("excess.csv", io::excess_csv(&all)));
            let floored = all.iter().map(|e| e.floored.clone()).collect();
            excess = Some(all);
            apply_window(floored, cfg.start_date, cfg.end_date)?
        }
    };

    let dataset = validate_dataset(series, geoms)?;
    let analysis = analyze(dataset, &params)?;
    let Analysis {
        dataset,
        rt_raw,
        rt,
        distances,
        graph,
        tree,
        partition,
    } = &analysis;
    let assignment = Assignment::from(partition);

    if let Some(all) = &excess {
        let by_id: BTreeMap<&str, &Excess> = all.iter().map(|e| (e.floored.unit.id.as_str(), e)).collect();
        let calendar = all[0].floored.calendar;
        let mut sums = vec![vec![0.0; calendar.len]; partition.k];
        for (unit, &label) in partition.units.iter().zip(&partition.labels) {
            for (acc, v) in sums[label - 1].iter_mut().zip(&by_id[unit.id.as_str()].target) {
                *acc += v;
            }
        }
        let names: Vec<String> = (1..=partition.k).map(|l| format!("Zone {l}")).collect();
        let (csv_text, svg) = weekly_by_group(&names, &sums, calendar);
        files.push(("weekly_change.csv", csv_text));
        files.push(("weekly_change.svg", svg));
    }

    let report = Report {
        version: VERSION,
        config: cfg.clone(),
        units: dataset.len(),
        calendar: dataset.calendar.into(),
        graph: GraphSummary::new(graph, tree),
        zoning: ZoningSummary::new(partition, params.zoning, truth.as_ref())?,
    };

    files.extend([
        ("rt_raw.csv", io::rt_csv(rt_raw)),
        ("rt.csv", io::rt_csv(rt)),
        ("distances.csv", io::distances_csv(distances)),
        ("graph.csv", io::graph_csv(graph, Some(distances))),
        ("mst.csv", io::mst_csv(tree)),
        ("clusters.csv", io::clusters_csv(&assignment)),
        ("report.json", to_json(&report)),
        ("map.svg", choropleth_svg(&dataset.geoms, &partition.labels, &format!("{} zones", partition.k))),
        ("trends.svg", trends_svg(rt, &partition.labels, dataset.calendar)),
    ]);
    write_artifacts(&cfg.out, &files)?;
    Ok(report)
}

/// `excess` stage: writes `excess.csv`, `weekly_change.csv` and
/// `weekly_change.svg` (one line per unit).
pub fn run_excess(mortality: &Path, aggregation: Option<&Path>, target_year: i32, out: &Path) -> Result<Vec<Excess>> {
    let panels = load_mortality(mortality, aggregation)?;
    let all = excess_all(&panels, target_year)?;
    let names: Vec<String> = all.iter().map(|e| e.floored.unit.id.clone()).collect();
    let deaths: Vec<Vec<f64>> = all.iter().map(|e| e.target.clone()).collect();
    let (csv_text, svg) = weekly_by_group(&names, &deaths, all[0].floored.calendar);
    write_artifacts(
        out,
        &[
            ("excess.csv", io::excess_csv(&all)),
            ("weekly_change.csv", csv_text),
            ("weekly_change.svg", svg),
        ],
    )?;
    Ok(all)
}

/// `synth` stage: writes `incidence.csv`, `geometry.geojson`, `truth.csv` and
/// the effective `scenario.json`.
pub fn run_synth(scenario: &Path, seed: Option<u64>, out: &Path) -> Result<Scenario> {
    let mut sc = Scenario::from_json(&read_to_string(scenario)?)?;
    if let Some(seed) = seed {
        sc.seed = seed;
    }
    let ds = make_scenario(&sc)?;
    write_artifacts(
        out,
        &[
            ("incidence.csv", io::incidence_csv(&ds.series)),
            ("geometry.geojson", io::geometry_geojson(&ds.geoms)),
            ("truth.csv", io::clusters_csv(&ds.truth)),
            ("scenario.json", to_json(&sc)),
        ],
    )?;
    Ok(sc)
}

/// Inputs of the `rt` stage.
#[derive(Debug, Clone)]
pub struct RtStage {
    pub incidence: PathBuf,
    pub cumulative: bool,
    pub start_date: Option<NaiveDate>,
    pub end_date: Option<NaiveDate>,
    pub si: SiParams,
    pub smooth_window: usize,
}

/// `rt` stage: writes `rt_raw.csv` and the smoothed `rt.csv`.
pub fn run_rt(stage: &RtStage, out: &Path) -> Result<Vec<RtSeries>> {
    let series = load_incidence(&stage.incidence, stage.cumulative, stage.start_date, stage.end_date)?;
    let (raw, smooth) = estimate_all(&series, &stage.si, stage.smooth_window)?;
    write_artifacts(out, &[("rt_raw.csv", io::rt_csv(&raw)), ("rt.csv", io::rt_csv(&smooth))])?;
    Ok(smooth)
}

/// `distances` stage: writes `distances.csv` from an R(t) file.
pub fn run_distances(rt: &Path, dtw: &DtwConfig, out: &Path) -> Result<DistanceMatrix> {
    let series = io::read_rt_csv(rt)?;
    let d = distance_matrix(&series, dtw)?;
    write_artifacts(out, &[("distances.csv", io::distances_csv(&d))])?;
    Ok(d)
}

/// Geometries of exactly the matrix units, in matrix order.
fn geometry_for(units: &DistanceMatrix, geometry: &Path) -> Result<Vec<UnitGeometry>> {
    let mut by_id: BTreeMap<String, UnitGeometry> =
        parse_geometry(geometry)?.into_iter().map(|g| (g.unit.id.clone(), g)).collect();
    units
        .units()
        .iter()
        .map(|u| {
            by_id
                .remove(&u.id)
                .ok_or_else(|| crate::dataset::DatasetError::MissingGeometry(u.id.clone()).into())
        })
        .collect()
}

/// `graph` stage: writes `graph.csv` and `mst.csv` for the units of a
/// distance file.
pub fn run_graph(geometry: &Path, distances: &Path, mode: GraphMode, out: &Path) -> Result<(SpatialGraph, SpanningTree)> {
    let d = io::read_distances_csv(distances)?;
    let geoms = geometry_for(&d, geometry)?;
    let graph = build_graph(&geoms, mode)?;
    let tree = minimum_spanning_tree(&graph, &d)?;
    write_artifacts(
        out,
        &[("graph.csv", io::graph_csv(&graph, Some(&d))), ("mst.csv", io::mst_csv(&tree))],
    )?;
    Ok((graph, tree))
}

/// Inputs of the `cluster` stage.
#[derive(Debug, Clone)]
pub struct ClusterStage {
    pub distances: PathBuf,
    pub graph: PathBuf,
    pub params: AnalysisParams,
    /// When given, `map.svg` is drawn too.
    pub geometry: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

/// `cluster` stage: writes `clusters.csv` and `zoning.json`, plus `map.svg`
/// when a geometry file is given.
pub fn run_cluster(stage: &ClusterStage, out: &Path) -> Result<ZoningSummary> {
    let d = io::read_distances_csv(&stage.distances)?;
    let graph = io::read_graph_csv(&stage.graph, d.units())?;
    let geoms = stage.geometry.as_deref().map(|g| geometry_for(&d, g)).transpose()?;
    let truth = stage.truth.as_deref().map(io::read_clusters_csv).transpose()?;
    let tree = minimum_spanning_tree(&graph, &d)?;
    let partition = zone(&tree, &d, &stage.params)?;
    let summary = ZoningSummary::new(&partition, stage.params.zoning, truth.as_ref())?;
    let mut files = vec![
        ("clusters.csv", io::clusters_csv(&Assignment::from(&partition))),
        ("zoning.json", to_json(&summary)),
    ];
    if let Some(geoms) = geoms {
        files.push(("map.svg", choropleth_svg(&geoms, &partition.labels, &format!("{} zones", partition.k))));
    }
    write_artifacts(out, &files)?;
    Ok(summary)
}
