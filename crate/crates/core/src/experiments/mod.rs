//! Scenario orchestration: load a [`ScenarioConfig`], run the analysis it
//! names, write `out/<scenario>/<table>.csv` plus `summary.md` and
//! `report.json`, and compare reports against baselines.

mod analyses;
mod compare;
mod config;
pub mod localize;
mod table;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use compare::{compare_report, CellDiff, CompareError, Comparison, TableDiff};
pub use config::{
    builtin_names, Analysis, Band, ErrorCurveChecks, EventPlacement, EventsConfig, FreqGrid, ImuLevel, LayoutRef,
    PowerTarget, ScenarioConfig, Seeds, Toggles,
};
pub use table::{Cell, Table, Tolerance};

use crate::anchor::{parse_layout, place_anchors, Layout, Placement};
use crate::channel::{ChannelConfig, LayerStack, StackFile};
use crate::dielectric::TissueLibrary;
use crate::vasculature::{GraphDocument, VesselGraph};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: {reason}")]
    Config { path: String, reason: String },
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("{context}: {reason}")]
    Run { context: String, reason: String },
    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentError {
    pub(crate) fn run(context: impl Into<String>, reason: impl ToString) -> Self {
        ExperimentError::Run {
            context: context.into(),
            reason: reason.to_string(),
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub figure: String,
    pub analysis: String,
    pub fingerprint: Fingerprint,
    pub tables: Vec<Table>,
    pub checks: Vec<CheckResult>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl MetricsReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn from_json_str(s: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(s).map_err(|e| ExperimentError::Config {
            path: "<report>".into(),
            reason: e.to_string(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::Config {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}

/// Knobs that are not part of the scenario itself.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed_offset: u64,
    /// Worker cap; falls back to `NANOLOC_THREADS`, then all cores.
    pub threads: Option<usize>,
}

impl RunOptions {
    pub fn from_env() -> Self {
        Self {
            seed_offset: 0,
            threads: std::env::var("NANOLOC_THREADS").ok().and_then(|v| v.parse().ok()),
        }
    }
}

/// Everything a scenario references, loaded and validated.
pub struct Resources {
    pub tissues: TissueLibrary,
    pub stack: LayerStack,
    pub graph: VesselGraph,
    pub placement: Placement,
    pub channel: ChannelConfig,
    /// Raw bytes of referenced files, folded into the fingerprint.
    sources: Vec<(String, Vec<u8>)>,
}

fn read(cfg: &ScenarioConfig, field: &str, p: &Path) -> Result<(PathBuf, String), ExperimentError> {
    let full = cfg.resolve_path(p);
    let text = fs::read_to_string(&full).map_err(|e| ExperimentError::Config {
        path: format!("{field} ({})", full.display()),
        reason: e.to_string(),
    })?;
    Ok((full, text))
}

impl Resources {
    pub fn load(cfg: &ScenarioConfig) -> Result<Self, ExperimentError> {
        let mut sources = Vec::new();
        let bad = |field: &str, e: &dyn std::fmt::Display| ExperimentError::Config {
            path: field.into(),
            reason: e.to_string(),
        };
        let tissues = match &cfg.tissue_path {
            Some(p) => {
                let (full, text) = read(cfg, "tissue_path", p)?;
                sources.push((full.display().to_string(), text.clone().into_bytes()));
                TissueLibrary::from_json_str(&text).map_err(|e| bad("tissue_path", &e))?
            }
            None => TissueLibrary::builtin(),
        };
        let stack = match &cfg.stack_path {
            Some(p) => {
                let (full, text) = read(cfg, "stack_path", p)?;
                sources.push((full.display().to_string(), text.clone().into_bytes()));
                StackFile::from_json_str(&text)
                    .and_then(|f| f.resolve(&tissues))
                    .map_err(|e| bad("stack_path", &e))?
            }
            None if cfg.tissue_path.is_some() => {
                StackFile::from_json_str(include_str!("../../assets/stacks/default.json"))
                    .and_then(|f| f.resolve(&tissues))
                    .map_err(|e| bad("tissue_path", &e))?
            }
            None => LayerStack::default_skin(),
        };
        let graph = match &cfg.graph_path {
            Some(p) => {
                let (full, text) = read(cfg, "graph_path", p)?;
                sources.push((full.display().to_string(), text.clone().into_bytes()));
                crate::vasculature::load_graph(&GraphDocument::from_json_str(&text).map_err(|e| bad("graph_path", &e))?)
                    .map_err(|e| bad("graph_path", &e))?
            }
            None => VesselGraph::simplified_body(),
        };
        let layout = match &cfg.anchor_layout {
            LayoutRef::Preset(n) => Layout::Preset(n.clone()),
            LayoutRef::Explicit(v) => Layout::Explicit(v.clone()),
            LayoutRef::File { path } => {
                let (full, text) = read(cfg, "anchor_layout.path", path)?;
                sources.push((full.display().to_string(), text.clone().into_bytes()));
                Layout::Explicit(parse_layout(&text).map_err(|e| bad("anchor_layout.path", &e))?)
            }
        };
        let stacks = HashMap::from([("default".to_string(), stack.clone())]);
        let placement = place_anchors(&layout, &stacks, &graph).map_err(|e| bad("anchor_layout", &e))?;
        let channel = ChannelConfig {
            spreading: cfg.toggles.spreading_mode,
            absorption_wavelength: cfg.toggles.absorption_wavelength,
            ..ChannelConfig::default()
        };
        Ok(Self {
            tissues,
            stack,
            graph,
            placement,
            channel,
            sources,
        })
    }

    pub fn injection_segment(&self) -> Result<u32, ExperimentError> {
        self.graph
            .injection_points()
            .first()
            .copied()
            .ok_or_else(|| ExperimentError::run("graph", "no injection point declared"))
    }
}

/// Hash over the effective config, referenced file contents and crate version.
pub fn fingerprint(cfg: &ScenarioConfig, seeds: &[u64], resources: &Resources) -> Fingerprint {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    h.update(serde_json::to_vec(seeds).expect("seeds serialize"));
    for (name, bytes) in &resources.sources {
        h.update(name.as_bytes());
        h.update(bytes);
    }
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    Fingerprint {
        config_hash: hex::encode(h.finalize()),
        seeds: seeds.to_vec(),
        version: env!("CARGO_PKG_VERSION").into(),
    }
}

pub(crate) fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, ExperimentError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads.filter(|&n| n > 0) {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| ExperimentError::run("thread pool", e))?;
    Ok(pool.install(f))
}

/// Runs a scenario in memory.
pub fn evaluate(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<MetricsReport, ExperimentError> {
    cfg.validate()?;
    let resources = Resources::load(cfg)?;
    let seeds = cfg.seeds.expand(opts.seed_offset);
    let output = with_pool(opts.threads, || analyses::run(cfg, &resources, &seeds))??;
    let mut tables = output.tables;
    for t in &mut tables {
        t.figure = cfg.figure.clone();
        if let Some(tol) = cfg.tolerances.get(&t.name) {
            t.tolerance = *tol;
        }
    }
    let mut notes = output.notes;
    notes.extend(resources.placement.warnings.iter().cloned());
    Ok(MetricsReport {
        scenario: cfg.name.clone(),
        figure: cfg.figure.clone(),
        analysis: cfg.analysis.kind().into(),
        fingerprint: fingerprint(cfg, &seeds, &resources),
        tables,
        checks: output.checks,
        notes,
    })
}

/// Runs a scenario and writes its outputs under `out_root/<scenario>/`.
///
/// Files are staged in a sibling directory and moved into place only when
/// everything was written, so a failed run leaves no partial output.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    out_root: &Path,
    opts: &RunOptions,
) -> Result<MetricsReport, ExperimentError> {
    let report = evaluate(cfg, opts)?;
    let final_dir = out_root.join(&cfg.name);
    let staging = out_root.join(format!(".{}.partial-{}", cfg.name, std::process::id()));
    let result = write_outputs(&report, &staging);
    if let Err(e) = result {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }
    if final_dir.exists() {
        fs::remove_dir_all(&final_dir).map_err(|e| ExperimentError::io(&final_dir, e))?;
    }
    fs::rename(&staging, &final_dir).map_err(|e| {
        let _ = fs::remove_dir_all(&staging);
        ExperimentError::io(&final_dir, e)
    })?;
    Ok(report)
}

fn write_outputs(report: &MetricsReport, dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    for t in &report.tables {
        let path = dir.join(format!("{}.csv", t.name));
        let file = fs::File::create(&path).map_err(|e| ExperimentError::io(&path, e))?;
        t.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| ExperimentError::run(path.display().to_string(), e))?;
    }
    let slim = MetricsReport {
        tables: report
            .tables
            .iter()
            .map(|t| if t.in_report { t.clone() } else { t.header_only() })
            .collect(),
        ..report.clone()
    };
    let path = dir.join("report.json");
    let json = serde_json::to_string_pretty(&slim).expect("report serializes");
    fs::write(&path, json + "\n").map_err(|e| ExperimentError::io(&path, e))?;
    let path = dir.join("summary.md");
    fs::write(&path, summary_markdown(report)).map_err(|e| ExperimentError::io(&path, e))?;
    Ok(())
}

pub fn summary_markdown(report: &MetricsReport) -> String {
    let mut s = String::new();
    s.push_str(&format!("# {} ({})\n\n", report.scenario, report.figure));
    s.push_str(&format!("- analysis: `{}`\n", report.analysis));
    s.push_str(&format!("- config hash: `{}`\n", report.fingerprint.config_hash));
    s.push_str(&format!("- version: {}\n", report.fingerprint.version));
    s.push_str(&format!("- seeds: {}\n\n", seed_summary(&report.fingerprint.seeds)));
    s.push_str("## Checks\n\n");
    if report.checks.is_empty() {
        s.push_str("none\n");
    }
    for c in &report.checks {
        s.push_str(&format!(
            "- **{}** `{}`: {}\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    s.push_str("\n## Tables\n\n| table | rows | tolerance |\n|---|---|---|\n");
    for t in &report.tables {
        s.push_str(&format!(
            "| `{}.csv` | {} | {} |\n",
            t.name,
            t.rows.len(),
            serde_json::to_string(&t.tolerance).expect("tolerance serializes")
        ));
    }
    if !report.notes.is_empty() {
        s.push_str("\n## Notes\n\n");
        for n in &report.notes {
            s.push_str(&format!("- {n}\n"));
        }
    }
    s
}

fn seed_summary(seeds: &[u64]) -> String {
    match seeds {
        [] => "none".into(),
        [one] => one.to_string(),
        [first, .., last] if seeds.windows(2).all(|w| w[1] == w[0] + 1) => {
            format!("{first}..={last} ({} seeds)", seeds.len())
        }
        _ => format!("{seeds:?}"),
    }
}
