use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use epizone::dtw::StepPattern;
use epizone::geograph::GraphMode;
use epizone::pipeline::{self, ClusterStage, Overrides, PipelineConfig, PipelineMode, RtStage, ZoningMethod};
use epizone::zoning::Objective;
use epizone::{Error, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "epizone", version, about = "Zoning of areal units by their epidemic R(t) trends")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand. Flags override the config file.
#[derive(Args, Clone)]
struct Common {
    /// JSON pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    min_size: Option<usize>,
    #[arg(long)]
    si_mean: Option<f64>,
    #[arg(long)]
    si_sd: Option<f64>,
    #[arg(long)]
    smooth_window: Option<usize>,
    /// symmetric1 or symmetric2
    #[arg(long)]
    dtw_step: Option<StepPattern>,
    #[arg(long, action = clap::ArgAction::Set)]
    dtw_normalize: Option<bool>,
    /// Sakoe-Chiba band half-width in days.
    #[arg(long)]
    dtw_window: Option<usize>,
    /// auto, contiguity, gabriel or knn:K
    #[arg(long)]
    graph: Option<GraphMode>,
    /// ssd_analogue or mean_pairwise
    #[arg(long)]
    objective: Option<Objective>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    start_date: Option<NaiveDate>,
    /// Drop days after this date.
    #[arg(long)]
    end_date: Option<NaiveDate>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        Overrides {
            k: self.k,
            min_size: self.min_size,
            si_mean: self.si_mean,
            si_sd: self.si_sd,
            smooth_window: self.smooth_window,
            dtw_step: self.dtw_step,
            dtw_normalize: self.dtw_normalize,
            dtw_window: self.dtw_window,
            start_date: self.start_date,
            end_date: self.end_date,
            graph: self.graph,
            objective: self.objective,
            seed: self.seed,
            out: self.out.clone(),
        }
        .apply(&mut cfg);
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write all artifacts.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        incidence: Option<PathBuf>,
        #[arg(long)]
        geometry: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Excess mortality per (aggregated) unit.
    Excess {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mortality: Option<PathBuf>,
        #[arg(long)]
        aggregation: Option<PathBuf>,
        #[arg(long)]
        target_year: Option<i32>,
    },
    /// Simulate a lattice scenario.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Estimate and smooth R(t).
    Rt {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        incidence: Option<PathBuf>,
        /// Counts are running totals.
        #[arg(long)]
        cumulative: bool,
    },
    /// Pairwise DTW distances between R(t) trends.
    Distances {
        #[command(flatten)]
        common: Common,
        /// R(t) file written by `rt`.
        #[arg(long)]
        rt: PathBuf,
    },
    /// Proximity graph and its minimum spanning tree.
    Graph {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        geometry: Option<PathBuf>,
        #[arg(long)]
        distances: PathBuf,
    },
    /// Cut the spanning tree into zones.
    Cluster {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        distances: PathBuf,
        /// Edge file written by `graph`.
        #[arg(long)]
        edges: PathBuf,
        /// Draw map.svg from this geometry.
        #[arg(long)]
        geometry: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// skater or seeded
        #[arg(long)]
        zoning: Option<ZoningMethod>,
        /// Comma-separated seed unit ids for the seeded method.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<String>>,
    },
}

fn need<T: Clone>(flag: &Option<T>, config: &Option<T>, name: &str) -> Result<T> {
    flag.clone()
        .or_else(|| config.clone())
        .ok_or_else(|| Error::Config(format!("--{name} is required")))
}

fn out_dir(cfg: &PipelineConfig) -> &Path {
    &cfg.out
}

fn run(cli: Cli) -> Result<serde_json::Value> {
    match cli.command {
        Command::Pipeline {
            common,
            incidence,
            geometry,
            truth,
        } => {
            let mut cfg = common.config()?;
            if incidence.is_some() {
                cfg.incidence = incidence;
                cfg.mode = PipelineMode::Cases;
            }
            cfg.geometry = geometry.or(cfg.geometry);
            cfg.truth = truth.or(cfg.truth);
            let report = pipeline::run_pipeline(&cfg)?;
            Ok(json!({
                "out": cfg.out,
                "units": report.units,
                "k": report.zoning.k,
                "objective": report.zoning.objective,
                "ari": report.zoning.ari,
            }))
        }
        Command::Excess {
            common,
            mortality,
            aggregation,
            target_year,
        } => {
            let cfg = common.config()?;
            let mortality = need(&mortality, &cfg.mortality, "mortality")?;
            let aggregation = aggregation.or(cfg.aggregation.clone());
            let year = need(&target_year, &cfg.target_year, "target-year")?;
            let all = pipeline::run_excess(&mortality, aggregation.as_deref(), year, out_dir(&cfg))?;
            Ok(json!({"out": cfg.out, "units": all.len()}))
        }
        Command::Synth { common, scenario } => {
            let cfg = common.config()?;
            let sc = pipeline::run_synth(&scenario, common.seed, out_dir(&cfg))?;
            Ok(json!({"out": cfg.out, "seed": sc.seed}))
        }
        Command::Rt {
            common,
            incidence,
            cumulative,
        } => {
            let cfg = common.config()?;
            let stage = RtStage {
                incidence: need(&incidence, &cfg.incidence, "incidence")?,
                cumulative: cumulative || cfg.cumulative,
                start_date: cfg.start_date,
                end_date: cfg.end_date,
                si: cfg.si,
                smooth_window: cfg.smooth_window,
            };
            let rt = pipeline::run_rt(&stage, out_dir(&cfg))?;
            Ok(json!({"out": cfg.out, "units": rt.len()}))
        }
        Command::Distances { common, rt } => {
            let cfg = common.config()?;
            let d = pipeline::run_distances(&rt, &cfg.dtw, out_dir(&cfg))?;
            Ok(json!({"out": cfg.out, "units": d.len()}))
        }
        Command::Graph {
            common,
            geometry,
            distances,
        } => {
            let cfg = common.config()?;
            let geometry = need(&geometry, &cfg.geometry, "geometry")?;
            let (graph, tree) = pipeline::run_graph(&geometry, &distances, cfg.graph, out_dir(&cfg))?;
            Ok(json!({"out": cfg.out, "edges": graph.edge_count(), "mst_weight": tree.total_weight()}))
        }
        Command::Cluster {
            common,
            distances,
            edges,
            geometry,
            truth,
            zoning,
            seeds,
        } => {
            let mut cfg = common.config()?;
            if let Some(z) = zoning {
                cfg.zoning = z;
            }
            if seeds.is_some() {
                cfg.seeds = seeds;
            }
            let stage = ClusterStage {
                distances,
                graph: edges,
                params: cfg.analysis()?,
                geometry: geometry.or(cfg.geometry.clone()),
                truth: truth.or(cfg.truth.clone()),
            };
            let summary = pipeline::run_cluster(&stage, out_dir(&cfg))?;
            Ok(json!({
                "out": cfg.out,
                "k": summary.k,
                "objective": summary.objective,
                "ari": summary.ari,
            }))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = pipeline::init_thread_pool().and_then(|_| run(cli));
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
