//! Scenario configuration files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::localize::EVENT_STREAM;
use super::table::Tolerance;
use super::ExperimentError;
use crate::anchor::{AnchorRecord, LinkGate};
use crate::channel::{LinkParams, SpreadingMode};
use crate::dielectric::AbsorptionWavelength;
use crate::imu::{ImuSpec, ResetModel};
use crate::vasculature::{scatter_events, stream_rng, AnomalyEvent, VesselGraph};

/// Run seeds: an explicit list or a contiguous range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::Range { start: 0, count: 50 }
    }
}

impl Seeds {
    pub fn expand(&self, offset: u64) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.iter().map(|s| s + offset).collect(),
            Seeds::Range { start, count } => (start + offset..start + offset + count).collect(),
        }
    }
}

/// Anchor layout reference inside a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayoutRef {
    Preset(String),
    File { path: PathBuf },
    Explicit(Vec<AnchorRecord>),
}

impl Default for LayoutRef {
    fn default() -> Self {
        LayoutRef::Preset("paper20".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Toggles {
    pub vessel_constraint: bool,
    pub spreading_mode: SpreadingMode,
    pub absorption_wavelength: AbsorptionWavelength,
}

/// One cell of an IMU sweep, isotropic on every axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImuLevel {
    pub label: String,
    pub gyro_noise_std: f64,
    pub gyro_bias: f64,
    pub accel_noise_std: f64,
    pub accel_bias: f64,
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
}

fn default_rate() -> f64 {
    100.0
}

impl ImuLevel {
    pub fn spec(&self) -> ImuSpec {
        ImuSpec {
            sample_rate: self.sample_rate,
            ..ImuSpec::isotropic(
                self.gyro_noise_std,
                self.gyro_bias,
                self.accel_noise_std,
                self.accel_bias,
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventPlacement {
    pub segment_id: u32,
    pub arc_offset_m: f64,
    pub sensing_radius_m: f64,
    #[serde(default)]
    pub id: Option<u32>,
}

/// Anomaly events: explicit placements, or `count` drawn per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EventsConfig {
    Explicit(Vec<EventPlacement>),
    Random { count: usize, sensing_radius_m: f64 },
}

impl Default for EventsConfig {
    fn default() -> Self {
        EventsConfig::Explicit(Vec::new())
    }
}

impl EventsConfig {
    /// Concrete events for one seed; random placements use the event stream.
    pub fn materialize(&self, graph: &VesselGraph, seed: u64) -> Result<Vec<AnomalyEvent>, ExperimentError> {
        match self {
            EventsConfig::Random {
                count,
                sensing_radius_m,
            } => Ok(scatter_events(
                graph,
                *count,
                *sensing_radius_m,
                &mut stream_rng(seed, EVENT_STREAM),
            )),
            EventsConfig::Explicit(list) => list
                .iter()
                .enumerate()
                .map(|(k, e)| {
                    AnomalyEvent::on_segment(
                        graph,
                        e.id.unwrap_or(k as u32 + 1),
                        e.segment_id,
                        e.arc_offset_m,
                        e.sensing_radius_m,
                    )
                    .map_err(|err| ExperimentError::run(format!("events[{k}]"), err))
                })
                .collect(),
        }
    }
}

/// Inclusive frequency grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqGrid {
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub step_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTarget {
    pub frequency_hz: f64,
    pub expected_dbw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub min: f64,
    pub max: f64,
}

impl Band {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurveChecks {
    /// Bins up to here must be non-decreasing.
    pub monotone_until_mm: f64,
    /// A drop counts only if it exceeds this many combined standard errors.
    pub monotone_sigma: f64,
    /// Sweep labels in expected increasing-error order.
    pub ordered_levels: Vec<String>,
    /// Same allowance as `monotone_sigma` for the ordering test.
    pub order_sigma: f64,
    /// Bins with fewer samples are ignored by the shape checks.
    pub min_bin_count: usize,
    pub plateau_level: String,
    pub plateau_from_mm: f64,
    pub plateau_to_mm: f64,
    pub plateau_band_mm: Band,
    pub spacing_level: String,
    pub spacing_mm: f64,
    pub spacing_max_error_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Analysis {
    AbsorptionCoefficients {
        grid: FreqGrid,
        tissues: Vec<String>,
        dominant_tissue: String,
        split_frequency_hz: f64,
    },
    PathLoss {
        frequencies_hz: Vec<f64>,
        depth_step_m: f64,
    },
    BackscatterPower {
        frequencies_hz: Vec<f64>,
        depth_step_m: f64,
        targets: Vec<PowerTarget>,
        tolerance_db: f64,
    },
    Capacity {
        depths_m: Vec<f64>,
        check_depth_m: f64,
        forward_band_bps: Band,
        backward_band_bps: Band,
    },
    VisitedVessels {
        log_every_s: f64,
        dense_regions: Vec<String>,
        sparse_regions: Vec<String>,
    },
    AnchorVisits {
        #[serde(default)]
        gate: Option<LinkGate>,
        threshold_s: f64,
        fraction_band: Band,
        max_interval_s: f64,
        payload_capacity_bps: f64,
    },
    LocalizationError {
        #[serde(default)]
        gate: Option<LinkGate>,
        reset: ResetModel,
        vessel_constraint_std_m: f64,
        bin_width_mm: f64,
        max_distance_mm: f64,
        checks: ErrorCurveChecks,
    },
}

impl Analysis {
    pub fn kind(&self) -> &'static str {
        match self {
            Analysis::AbsorptionCoefficients { .. } => "absorption_coefficients",
            Analysis::PathLoss { .. } => "path_loss",
            Analysis::BackscatterPower { .. } => "backscatter_power",
            Analysis::Capacity { .. } => "capacity",
            Analysis::VisitedVessels { .. } => "visited_vessels",
            Analysis::AnchorVisits { .. } => "anchor_visits",
            Analysis::LocalizationError { .. } => "localization_error",
        }
    }

    fn uses_motion(&self) -> bool {
        matches!(
            self,
            Analysis::VisitedVessels { .. } | Analysis::AnchorVisits { .. } | Analysis::LocalizationError { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub figure: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub graph_path: Option<PathBuf>,
    #[serde(default)]
    pub tissue_path: Option<PathBuf>,
    #[serde(default)]
    pub stack_path: Option<PathBuf>,
    #[serde(default)]
    pub anchor_layout: LayoutRef,
    #[serde(default)]
    pub link_params: LinkParams,
    #[serde(default)]
    pub imu_spec_grid: Vec<ImuLevel>,
    #[serde(default)]
    pub events: EventsConfig,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub toggles: Toggles,
    pub analysis: Analysis,
    /// Comparison tolerance per table name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, Tolerance>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_duration() -> f64 {
    10_000.0
}

fn default_dt() -> f64 {
    0.01
}

const BUILTIN: &[(&str, &str)] = &[
    ("fig4", include_str!("../../assets/scenarios/fig4.json")),
    ("fig5", include_str!("../../assets/scenarios/fig5.json")),
    ("fig6", include_str!("../../assets/scenarios/fig6.json")),
    ("fig7cap", include_str!("../../assets/scenarios/fig7cap.json")),
    ("fig7visits", include_str!("../../assets/scenarios/fig7visits.json")),
    ("fig8", include_str!("../../assets/scenarios/fig8.json")),
    ("fig9", include_str!("../../assets/scenarios/fig9.json")),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(n, _)| *n).collect()
}

impl ScenarioConfig {
    pub fn from_json_str(s: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(s).map_err(|e| ExperimentError::Config {
            path: "<config>".into(),
            reason: e.to_string(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Config {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| ExperimentError::Config {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn builtin(name: &str) -> Option<Self> {
        BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, s)| Self::from_json_str(s).expect("bundled scenario parses"))
    }

    /// A bundled scenario name or a path to a JSON file.
    pub fn load(name_or_path: &str) -> Result<Self, ExperimentError> {
        match Self::builtin(name_or_path) {
            Some(c) => Ok(c),
            None => Self::from_file(Path::new(name_or_path)),
        }
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Every violation found, each naming the offending field.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let mut problems = Vec::new();
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            problems.push("name: must be a non-empty plain identifier".to_string());
        }
        if !(self.duration_s > 0.0) {
            problems.push("duration_s: must be positive".into());
        }
        if !(self.dt_s > 0.0) {
            problems.push("dt_s: must be positive".into());
        }
        if self.seeds.expand(0).is_empty() {
            problems.push("seeds: must not be empty".into());
        }
        if let Err(e) = self.link_params.validate() {
            problems.push(format!("link_params: {e}"));
        }
        for (field, path) in [
            ("graph_path", &self.graph_path),
            ("tissue_path", &self.tissue_path),
            ("stack_path", &self.stack_path),
        ] {
            if let Some(p) = path {
                let full = self.resolve_path(p);
                if !full.is_file() {
                    problems.push(format!("{field}: {} does not exist", full.display()));
                }
            }
        }
        if let LayoutRef::File { path } = &self.anchor_layout {
            let full = self.resolve_path(path);
            if !full.is_file() {
                problems.push(format!("anchor_layout.path: {} does not exist", full.display()));
            }
        }
        for (i, level) in self.imu_spec_grid.iter().enumerate() {
            if let Err(e) = level.spec().validate() {
                problems.push(format!("imu_spec_grid[{i}] ({}): {e}", level.label));
            }
            if self.analysis.uses_motion() && (level.spec().dt() - self.dt_s).abs() > 1e-12 {
                problems.push(format!(
                    "imu_spec_grid[{i}] ({}): sample_rate must equal 1/dt_s",
                    level.label
                ));
            }
        }
        if let Analysis::LocalizationError { checks, .. } = &self.analysis {
            if self.imu_spec_grid.is_empty() {
                problems.push("imu_spec_grid: localization needs at least one level".into());
            }
            let labels: Vec<_> = self.imu_spec_grid.iter().map(|l| l.label.as_str()).collect();
            for l in checks
                .ordered_levels
                .iter()
                .chain([&checks.plateau_level, &checks.spacing_level])
            {
                if !labels.contains(&l.as_str()) {
                    problems.push(format!("analysis.checks: unknown level `{l}`"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::Validation(problems))
        }
    }
}
