use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use nanoloc_core::channel::{sweep, StackFile};
use nanoloc_core::experiments::{
    compare_report, run_scenario, summary_markdown, Analysis, EventsConfig, ImuLevel, LayoutRef, MetricsReport,
    RunOptions, ScenarioConfig, Seeds,
};
use nanoloc_core::vasculature::{load_graph, EventSensor, GraphDocument, TrajectoryIter, VesselGraph};
use nanoloc_core::{ChannelConfig, LayerStack, LinkParams, SpreadingMode, TissueLibrary};

/// Exit status when a run or comparison completes but fails its assertions.
const EXIT_CHECK_FAILED: u8 = 2;

#[derive(Parser)]
#[command(name = "nanoloc", version, about = "In-body nanosensor localization simulator")]
struct Cli {
    /// Scenario file used as the base configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Added to every configured seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed_offset: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// THz channel utilities.
    Channel {
        #[command(subcommand)]
        command: ChannelCommand,
    },
    /// Single-purpose simulations.
    Simulate {
        #[command(subcommand)]
        command: SimulateCommand,
    },
    /// Run a bundled scenario (fig4 ... fig9) or a scenario file.
    Run {
        scenario: Option<String>,
        /// Exit non-zero when any acceptance check fails.
        #[arg(long)]
        check: bool,
    },
    /// Compare a report against a baseline using the baseline's tolerances.
    Compare {
        /// Report file or scenario output directory.
        report: PathBuf,
        /// Baseline report file or directory.
        baseline: PathBuf,
    },
    /// List the bundled scenarios.
    List,
}

#[derive(Subcommand)]
enum ChannelCommand {
    /// Per-sub-band loss, received power, noise and capacity.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Spreading {
    PerLayer,
    TotalDistance,
}

#[derive(Args)]
struct SweepArgs {
    /// Lower band edge, Hz.
    #[arg(long, default_value_t = 0.1e12)]
    f_min: f64,
    /// Upper band edge, Hz.
    #[arg(long, default_value_t = 1.0e12)]
    f_max: f64,
    /// Sub-band width, Hz.
    #[arg(long, default_value_t = 1e9)]
    delta_f: f64,
    /// Layer stack JSON; defaults to the built-in skin stack.
    #[arg(long)]
    stack: Option<PathBuf>,
    /// Tissue library JSON used to resolve the stack.
    #[arg(long)]
    tissues: Option<PathBuf>,
    /// Peak transmit power, W.
    #[arg(long, default_value_t = 5000.0)]
    p_t: f64,
    /// Linear transmit gain.
    #[arg(long, default_value_t = 5.09)]
    g_t: f64,
    /// Linear receive gain.
    #[arg(long, default_value_t = 5.09)]
    g_r: f64,
    #[arg(long, value_enum, default_value = "per-layer")]
    spreading: Spreading,
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// Ground-truth trajectory and the events it senses.
    Trajectory(TrajectoryArgs),
    /// Anchor revisit intervals.
    Visits(MotionArgs),
    /// Event localization error versus distance since reset.
    Localize(LocalizeArgs),
}

#[derive(Args)]
struct TrajectoryArgs {
    /// Vessel graph JSON; defaults to the built-in body graph.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Injection segment id; defaults to the graph's first injection point.
    #[arg(long)]
    inject: Option<u32>,
    #[arg(long, default_value_t = 100.0)]
    duration: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Events JSON: a list of placements or `{count, sensing_radius_m}`.
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Args)]
struct MotionArgs {
    /// Vessel graph JSON.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Anchor layout JSON.
    #[arg(long)]
    anchors: Option<PathBuf>,
    /// Seed count (`50`) or half-open range (`10..20`).
    #[arg(long)]
    seeds: Option<String>,
    /// Simulated seconds per seed.
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Args)]
struct LocalizeArgs {
    #[command(flatten)]
    motion: MotionArgs,
    /// Events JSON: a list of placements or `{count, sensing_radius_m}`.
    #[arg(long)]
    events: Option<PathBuf>,
    /// IMU grid JSON: one level object or a list of them.
    #[arg(long)]
    imu_spec: Option<PathBuf>,
    /// Fuse the along-vessel pseudo-measurement.
    #[arg(long)]
    enable_vessel_constraint: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    let opts = RunOptions {
        seed_offset: cli.seed_offset,
        ..RunOptions::from_env()
    };
    match &cli.command {
        Command::Channel {
            command: ChannelCommand::Sweep(a),
        } => channel_sweep(a, cli.out.as_deref()),
        Command::Simulate { command } => match command {
            SimulateCommand::Trajectory(a) => simulate_trajectory(a, &out_dir(cli), cli.seed_offset),
            SimulateCommand::Visits(a) => {
                let mut cfg = base_config(cli, "fig8")?;
                cfg.name = "visits".into();
                apply_motion(&mut cfg, a)?;
                let report = run_scenario(&cfg, &out_dir(cli), &opts)?;
                print_table(&report, "interval_summary");
                println!("wrote {}", out_dir(cli).join(&cfg.name).display());
                Ok(ExitCode::SUCCESS)
            }
            SimulateCommand::Localize(a) => {
                let mut cfg = base_config(cli, "fig9")?;
                cfg.name = "localize".into();
                apply_motion(&mut cfg, &a.motion)?;
                if let Some(p) = &a.events {
                    cfg.events = read_json(p)?;
                }
                if let Some(p) = &a.imu_spec {
                    cfg.imu_spec_grid = read_imu_grid(p)?;
                    retarget_checks(&mut cfg);
                }
                if a.enable_vessel_constraint {
                    cfg.toggles.vessel_constraint = true;
                }
                let report = run_scenario(&cfg, &out_dir(cli), &opts)?;
                print_table(&report, "resets");
                println!("wrote {}", out_dir(cli).join(&cfg.name).display());
                Ok(ExitCode::SUCCESS)
            }
        },
        Command::Run { scenario, check } => {
            let cfg = match (scenario, &cli.config) {
                (Some(s), _) => ScenarioConfig::load(s)?,
                (None, Some(p)) => ScenarioConfig::from_file(p)?,
                (None, None) => bail!("name a scenario or pass --config"),
            };
            let out = out_dir(cli);
            let report = run_scenario(&cfg, &out, &opts)?;
            print!("{}", summary_markdown(&report));
            println!("\nwrote {}", out.join(&cfg.name).display());
            Ok(if *check && !report.all_passed() {
                ExitCode::from(EXIT_CHECK_FAILED)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Compare { report, baseline } => {
            let r = MetricsReport::from_file(&report_path(report))?;
            let b = MetricsReport::from_file(&report_path(baseline))?;
            let c = compare_report(&r, &b)?;
            print!("{}", c.render());
            Ok(if c.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK_FAILED)
            })
        }
        Command::List => {
            for name in nanoloc_core::experiments::builtin_names() {
                let cfg = ScenarioConfig::builtin(name).expect("bundled");
                println!("{name:<12} {:<8} {}", cfg.figure, cfg.analysis.kind());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn report_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("report.json")
    } else {
        p.to_path_buf()
    }
}

fn read_json<T: serde::de::DeserializeOwned>(p: &Path) -> Result<T> {
    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
}

fn read_imu_grid(p: &Path) -> Result<Vec<ImuLevel>> {
    let value: serde_json::Value = read_json(p)?;
    let grid = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|l| vec![l])
    };
    grid.with_context(|| format!("parsing {}", p.display()))
}

/// Points the curve checks at the supplied levels so validation accepts
/// grids with different labels. The first level is the reference curve.
fn retarget_checks(cfg: &mut ScenarioConfig) {
    let labels: Vec<String> = cfg.imu_spec_grid.iter().map(|l| l.label.clone()).collect();
    if let (Analysis::LocalizationError { checks, .. }, Some(first)) = (&mut cfg.analysis, labels.first()) {
        checks.ordered_levels = labels.clone();
        checks.plateau_level = first.clone();
        checks.spacing_level = first.clone();
    }
}

fn base_config(cli: &Cli, default: &str) -> Result<ScenarioConfig> {
    Ok(match &cli.config {
        Some(p) => ScenarioConfig::from_file(p)?,
        None => ScenarioConfig::builtin(default).expect("bundled scenario"),
    })
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).with_context(|| format!("resolving {}", p.display()))
}

fn parse_seeds(s: &str) -> Result<Seeds> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if b <= a {
            bail!("seed range `{s}` is empty");
        }
        return Ok(Seeds::Range { start: a, count: b - a });
    }
    let n: u64 = s.trim().parse().with_context(|| format!("bad --seeds `{s}`"))?;
    Ok(Seeds::Range { start: 0, count: n })
}

fn apply_motion(cfg: &mut ScenarioConfig, a: &MotionArgs) -> Result<()> {
    if let Some(p) = &a.graph {
        cfg.graph_path = Some(absolute(p)?);
    }
    if let Some(p) = &a.anchors {
        cfg.anchor_layout = LayoutRef::File { path: absolute(p)? };
    }
    if let Some(s) = &a.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if let Some(d) = a.duration {
        cfg.duration_s = d;
    }
    Ok(())
}

fn print_table(report: &MetricsReport, name: &str) {
    if let Some(t) = report.table(name) {
        println!("{}", t.columns.join("\t"));
        for row in &t.rows {
            println!("{}", row.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("\t"));
        }
    }
}

fn channel_sweep(a: &SweepArgs, out: Option<&Path>) -> Result<ExitCode> {
    let tissues = match &a.tissues {
        Some(p) => TissueLibrary::from_json_str(&fs::read_to_string(p)?)?,
        None => TissueLibrary::builtin(),
    };
    let stack = match &a.stack {
        Some(p) => StackFile::from_json_str(&fs::read_to_string(p)?)?.resolve(&tissues)?,
        None => LayerStack::default_skin(),
    };
    let params = LinkParams {
        p_t: a.p_t,
        g_t: a.g_t,
        g_r: a.g_r,
        band: (a.f_min, a.f_max),
        delta_f: a.delta_f,
        ..LinkParams::default()
    };
    params.validate()?;
    let cfg = ChannelConfig {
        spreading: match a.spreading {
            Spreading::PerLayer => SpreadingMode::PerLayer,
            Spreading::TotalDistance => SpreadingMode::TotalDistance,
        },
        ..ChannelConfig::default()
    };
    let rows = sweep(&stack, &params, &params.subband_centers(), &cfg)?;
    let sink: Box<dyn Write> = match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Box::new(fs::File::create(dir.join("channel_sweep.csv"))?)
        }
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "frequency_hz",
        "loss_spread_db",
        "loss_abs_db",
        "loss_total_db",
        "p_rb_db",
        "noise_psd_w_hz",
        "capacity_fwd_bps",
        "capacity_back_bps",
    ])?;
    for r in rows {
        w.write_record(
            [
                r.frequency,
                r.loss_spread_db,
                r.loss_abs_db,
                r.loss_total_db,
                r.p_received_backscatter_db,
                r.noise_psd,
                r.capacity_fwd_bps,
                r.capacity_back_bps,
            ]
            .map(|v| format!("{v:?}")),
        )?;
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn simulate_trajectory(a: &TrajectoryArgs, out: &Path, seed_offset: u64) -> Result<ExitCode> {
    let graph = match &a.graph {
        Some(p) => load_graph(&GraphDocument::from_json_str(&fs::read_to_string(p)?)?)?,
        None => VesselGraph::simplified_body(),
    };
    let inject = match a.inject {
        Some(id) => id,
        None => *graph
            .injection_points()
            .first()
            .context("graph declares no injection point")?,
    };
    if !(a.dt > 0.0 && a.duration >= 0.0) {
        bail!("--dt must be positive and --duration non-negative");
    }
    let seed = a.seed + seed_offset;
    let events = match &a.events {
        Some(p) => read_json::<EventsConfig>(p)?.materialize(&graph, seed)?,
        None => Vec::new(),
    };
    fs::create_dir_all(out)?;
    let mut traj = csv::Writer::from_path(out.join("trajectory.csv"))?;
    traj.write_record(["t_s", "x_m", "y_m", "z_m", "segment_id"])?;
    let mut hits = csv::Writer::from_path(out.join("events.csv"))?;
    hits.write_record(["t_s", "event_id", "segment_id", "x_m", "y_m", "z_m"])?;
    let mut sensor = EventSensor::new();
    let mut sensed = 0usize;
    for s in TrajectoryIter::new(&graph, inject, a.duration, a.dt, seed)? {
        let p = s.position;
        traj.write_record([
            format!("{:?}", s.sim_time),
            format!("{:?}", p.x),
            format!("{:?}", p.y),
            format!("{:?}", p.z),
            s.segment_id.to_string(),
        ])?;
        for id in sensor.sense(&p, &events) {
            let e = events.iter().find(|e| e.id == id).expect("sensed id is known");
            let l = e.true_location;
            hits.write_record([
                format!("{:?}", s.sim_time),
                id.to_string(),
                e.segment_id.to_string(),
                format!("{:?}", l.x),
                format!("{:?}", l.y),
                format!("{:?}", l.z),
            ])?;
            sensed += 1;
        }
    }
    traj.flush()?;
    hits.flush()?;
    println!("wrote {} ({sensed} event detections)", out.display());
    Ok(ExitCode::SUCCESS)
}
