//! One function per analysis kind. Each returns its tables and checks;
//! parallel cells are collected in input order so output is deterministic.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::config::{Analysis, Band, ErrorCurveChecks, FreqGrid, PowerTarget, ScenarioConfig};
use super::localize::{run_localization, LocalizationSetup};
use super::table::Table;
use super::{CheckResult, ExperimentError, Resources};
use crate::anchor::{payload_feasibility, CommGate, LinkGate, VisitTracker};
use crate::channel::{backscatter_power, channel_capacity, frequency_grid, path_loss_stack, Direction, LayerStack};
use crate::imu::{StampedEvent, VesselConstraint};
use crate::vasculature::{AnomalyEvent, TrajectoryIter};

#[derive(Default)]
pub(super) struct AnalysisOutput {
    pub tables: Vec<Table>,
    pub checks: Vec<CheckResult>,
    pub notes: Vec<String>,
}

pub(super) fn run(cfg: &ScenarioConfig, res: &Resources, seeds: &[u64]) -> Result<AnalysisOutput, ExperimentError> {
    match &cfg.analysis {
        Analysis::AbsorptionCoefficients {
            grid,
            tissues,
            dominant_tissue,
            split_frequency_hz,
        } => absorption(cfg, res, grid, tissues, dominant_tissue, *split_frequency_hz),
        Analysis::PathLoss {
            frequencies_hz,
            depth_step_m,
        } => path_loss(res, frequencies_hz, *depth_step_m),
        Analysis::BackscatterPower {
            frequencies_hz,
            depth_step_m,
            targets,
            tolerance_db,
        } => power(cfg, res, frequencies_hz, *depth_step_m, targets, *tolerance_db),
        Analysis::Capacity {
            depths_m,
            check_depth_m,
            forward_band_bps,
            backward_band_bps,
        } => capacity(cfg, res, depths_m, *check_depth_m, forward_band_bps, backward_band_bps),
        Analysis::VisitedVessels {
            log_every_s,
            dense_regions,
            sparse_regions,
        } => visited(cfg, res, seeds, *log_every_s, dense_regions, sparse_regions),
        Analysis::AnchorVisits {
            gate,
            threshold_s,
            fraction_band,
            max_interval_s,
            payload_capacity_bps,
        } => anchor_visits(
            cfg,
            res,
            seeds,
            gate,
            *threshold_s,
            fraction_band,
            *max_interval_s,
            *payload_capacity_bps,
        ),
        Analysis::LocalizationError {
            gate,
            reset,
            vessel_constraint_std_m,
            bin_width_mm,
            max_distance_mm,
            checks,
        } => {
            let constraint = VesselConstraint {
                enabled: cfg.toggles.vessel_constraint,
                std_m: *vessel_constraint_std_m,
            };
            localization(
                cfg,
                res,
                seeds,
                &LocalizationParams {
                    gate,
                    reset: *reset,
                    constraint,
                    bin_width_mm: *bin_width_mm,
                    max_distance_mm: *max_distance_mm,
                    checks,
                },
            )
        }
    }
}

fn chan<T>(context: &str, r: Result<T, crate::channel::ChannelError>) -> Result<T, ExperimentError> {
    r.map_err(|e| ExperimentError::run(context, e))
}

/// Depths `step, 2·step, …` up to the stack thickness (inclusive).
fn depth_grid(stack: &LayerStack, step: f64) -> Vec<f64> {
    let total = stack.total_thickness();
    let n = (total / step).round().max(1.0) as usize;
    (1..=n).map(|k| if k == n { total } else { k as f64 * step }).collect()
}

fn absorption(
    cfg: &ScenarioConfig,
    res: &Resources,
    grid: &FreqGrid,
    tissues: &[String],
    dominant: &str,
    split_f: f64,
) -> Result<AnalysisOutput, ExperimentError> {
    let freqs = frequency_grid(grid.lo_hz, grid.hi_hz, grid.step_hz);
    let mut table = Table::new(
        "absorption",
        "",
        &[
            "frequency_hz",
            "tissue",
            "n_real",
            "n_imag",
            "lambda_g_m",
            "mu_abs_per_m",
        ],
        2,
    );
    let mut failures = Vec::new();
    for &f in &freqs {
        let mut mu = BTreeMap::new();
        for name in tissues {
            let model = res
                .tissues
                .get(name)
                .map_err(|e| ExperimentError::run("analysis.tissues", e))?;
            let op = model
                .optical(f, cfg.toggles.absorption_wavelength)
                .map_err(|e| ExperimentError::run(format!("tissue {name}"), e))?;
            table.push(vec![
                f.into(),
                name.as_str().into(),
                op.n_real.into(),
                op.n_imag.into(),
                op.lambda_g.into(),
                op.mu_abs.into(),
            ]);
            mu.insert(name.as_str(), op.mu_abs);
        }
        let top = mu.get(dominant).copied().unwrap_or(f64::NAN);
        if mu.iter().any(|(n, &m)| *n != dominant && !(top > m)) {
            failures.push(f);
        }
    }
    let mut out = AnalysisOutput::default();
    out.checks.push(CheckResult::new(
        "dominant_absorber",
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "{dominant} has the largest mu_abs at all {} grid frequencies",
                freqs.len()
            )
        } else {
            format!(
                "{dominant} not strictly largest at {} frequencies, first {:e} Hz",
                failures.len(),
                failures[0]
            )
        },
    ));
    let loss = chan("loss split", path_loss_stack(&res.stack, split_f, &res.channel))?;
    let mut split = Table::new("loss_split", "", &["frequency_hz", "depth_m", "spread_db", "abs_db"], 2);
    split.push(vec![
        split_f.into(),
        res.stack.total_thickness().into(),
        loss.spread_db.into(),
        loss.abs_db.into(),
    ]);
    out.checks.push(CheckResult::new(
        "absorption_exceeds_spreading",
        loss.abs_db > loss.spread_db,
        format!(
            "at {:e} Hz over {:.4} m: absorption {:.3} dB vs spreading {:.3} dB",
            split_f,
            res.stack.total_thickness(),
            loss.abs_db,
            loss.spread_db
        ),
    ));
    out.tables = vec![table, split];
    Ok(out)
}

fn path_loss(res: &Resources, freqs: &[f64], step: f64) -> Result<AnalysisOutput, ExperimentError> {
    let mut table = Table::new(
        "loss",
        "",
        &["frequency_hz", "depth_m", "spread_db", "abs_db", "total_db"],
        2,
    );
    for &f in freqs {
        for d in depth_grid(&res.stack, step) {
            let stack = chan("depth grid", res.stack.truncated(d))?;
            let l = chan("path loss", path_loss_stack(&stack, f, &res.channel))?;
            table.push(vec![
                f.into(),
                d.into(),
                l.spread_db.into(),
                l.abs_db.into(),
                l.total_db().into(),
            ]);
        }
    }
    Ok(AnalysisOutput {
        tables: vec![table],
        ..AnalysisOutput::default()
    })
}

fn power(
    cfg: &ScenarioConfig,
    res: &Resources,
    freqs: &[f64],
    step: f64,
    targets: &[PowerTarget],
    tol: f64,
) -> Result<AnalysisOutput, ExperimentError> {
    let mut table = Table::new("power", "", &["frequency_hz", "depth_m", "p_rb_dbw"], 2);
    for &f in freqs {
        for d in depth_grid(&res.stack, step) {
            let stack = chan("depth grid", res.stack.truncated(d))?;
            let p = chan(
                "backscatter",
                backscatter_power(&stack, &cfg.link_params, f, &res.channel),
            )?;
            table.push(vec![f.into(), d.into(), p.into()]);
        }
    }
    let mut out = AnalysisOutput::default();
    for t in targets {
        let p = chan(
            "backscatter",
            backscatter_power(&res.stack, &cfg.link_params, t.frequency_hz, &res.channel),
        )?;
        let dev = p - t.expected_dbw;
        out.checks.push(CheckResult::new(
            &format!("power_at_{}ghz", (t.frequency_hz / 1e9).round()),
            dev.abs() <= tol,
            format!(
                "{:.2} dBW at full depth vs {:.1} dBW expected (deviation {:+.2} dB, tolerance {tol} dB)",
                p, t.expected_dbw, dev
            ),
        ));
    }
    out.tables.push(table);
    Ok(out)
}

fn capacity(
    cfg: &ScenarioConfig,
    res: &Resources,
    depths: &[f64],
    check_depth: f64,
    fwd_band: &Band,
    back_band: &Band,
) -> Result<AnalysisOutput, ExperimentError> {
    let rows: Vec<_> = depths
        .par_iter()
        .map(|&d| {
            let stack = res.stack.truncated(d)?;
            let f = channel_capacity(&stack, &cfg.link_params, Direction::Forward, &res.channel)?;
            let b = channel_capacity(&stack, &cfg.link_params, Direction::Backward, &res.channel)?;
            Ok((d, f, b))
        })
        .collect::<Result<_, crate::channel::ChannelError>>()
        .map_err(|e| ExperimentError::run("capacity", e))?;
    let mut table = Table::new(
        "capacity",
        "",
        &[
            "depth_m",
            "forward_bps",
            "backward_bps",
            "forward_capped_subbands",
            "backward_capped_subbands",
        ],
        1,
    );
    table.info_columns = vec!["forward_capped_subbands".into(), "backward_capped_subbands".into()];
    for (d, f, b) in &rows {
        table.push(vec![
            (*d).into(),
            f.bits_per_second.into(),
            b.bits_per_second.into(),
            f.capped_subbands.into(),
            b.capped_subbands.into(),
        ]);
    }
    let stack = chan("capacity", res.stack.truncated(check_depth))?;
    let f = chan(
        "capacity",
        channel_capacity(&stack, &cfg.link_params, Direction::Forward, &res.channel),
    )?;
    let b = chan(
        "capacity",
        channel_capacity(&stack, &cfg.link_params, Direction::Backward, &res.channel),
    )?;
    let mut out = AnalysisOutput::default();
    out.checks.push(CheckResult::new(
        "forward_capacity",
        fwd_band.contains(f.bits_per_second),
        format!(
            "{:.3e} bps at {} m, band [{:e}, {:e}]",
            f.bits_per_second, check_depth, fwd_band.min, fwd_band.max
        ),
    ));
    out.checks.push(CheckResult::new(
        "backward_capacity",
        back_band.contains(b.bits_per_second),
        format!(
            "{:.3e} bps at {} m, band [{:e}, {:e}]",
            b.bits_per_second, check_depth, back_band.min, back_band.max
        ),
    ));
    if f.capped_subbands + b.capped_subbands > 0 {
        out.notes.push(format!(
            "{} forward and {} backward sub-bands had zero noise and used the SNR cap",
            f.capped_subbands, b.capped_subbands
        ));
    }
    out.tables.push(table);
    Ok(out)
}

struct SeedVisits {
    entries: Vec<u64>,
    occupancy: Vec<u64>,
    log: Vec<(f64, u32)>,
}

fn visited(
    cfg: &ScenarioConfig,
    res: &Resources,
    seeds: &[u64],
    log_every_s: f64,
    dense: &[String],
    sparse: &[String],
) -> Result<AnalysisOutput, ExperimentError> {
    let g = &res.graph;
    let inj = res.injection_segment()?;
    let log_every = (log_every_s / cfg.dt_s).round().max(1.0) as u64;
    let per_seed: Vec<SeedVisits> = seeds
        .par_iter()
        .enumerate()
        .map(|(k, &seed)| {
            let n = g.segments().len();
            let mut sv = SeedVisits {
                entries: vec![0; n],
                occupancy: vec![0; n],
                log: Vec::new(),
            };
            let mut it = TrajectoryIter::new(g, inj, cfg.duration_s, cfg.dt_s, seed)?;
            let mut step = 0u64;
            sv.entries[g.segment_index(inj).expect("injection segment exists")] += 1;
            while let Some(s) = it.next() {
                for &id in it.entered() {
                    sv.entries[g.segment_index(id).expect("entered segment exists")] += 1;
                }
                sv.occupancy[g.segment_index(s.segment_id).expect("segment exists")] += 1;
                if k == 0 && step.is_multiple_of(log_every) {
                    sv.log.push((s.sim_time, s.segment_id));
                }
                step += 1;
            }
            Ok(sv)
        })
        .collect::<Result<_, crate::vasculature::GraphError>>()
        .map_err(|e| ExperimentError::run("trajectory", e))?;

    let n = g.segments().len();
    let mut entries = vec![0u64; n];
    let mut occupancy = vec![0u64; n];
    for sv in &per_seed {
        for i in 0..n {
            entries[i] += sv.entries[i];
            occupancy[i] += sv.occupancy[i];
        }
    }
    let total_occ: u64 = occupancy.iter().sum();
    let mut seg_table = Table::new(
        "segment_visits",
        "",
        &["segment_id", "name", "region", "kind", "entries", "occupancy_fraction"],
        1,
    );
    let mut region_entries: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    let mut dense_min: Option<(u64, u32)> = None;
    let mut sparse_max: Option<(u64, u32)> = None;
    for (i, s) in g.segments().iter().enumerate() {
        let region = s.region.clone().unwrap_or_default();
        seg_table.push(vec![
            s.id.into(),
            s.name.clone().unwrap_or_default().into(),
            region.as_str().into(),
            serde_json::to_value(s.kind)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default()
                .into(),
            entries[i].into(),
            (occupancy[i] as f64 / total_occ as f64).into(),
        ]);
        let e = region_entries.entry(region.clone()).or_default();
        e.0 += entries[i];
        e.1 += 1;
        if dense.contains(&region) && dense_min.is_none_or(|(m, _)| entries[i] < m) {
            dense_min = Some((entries[i], s.id));
        }
        if sparse.contains(&region) && sparse_max.is_none_or(|(m, _)| entries[i] > m) {
            sparse_max = Some((entries[i], s.id));
        }
    }
    let mut region_table = Table::new(
        "region_visits",
        "",
        &["region", "segments", "entries", "entries_per_segment"],
        1,
    );
    for (r, (e, c)) in &region_entries {
        region_table.push(vec![
            r.as_str().into(),
            (*c).into(),
            (*e).into(),
            (*e as f64 / *c as f64).into(),
        ]);
    }
    let mut log_table = Table::new("visits_over_time", "", &["t_s", "segment_id"], 1);
    log_table.in_report = false;
    for &(t, id) in &per_seed[0].log {
        log_table.push(vec![t.into(), id.into()]);
    }
    let mut out = AnalysisOutput::default();
    let passed = matches!((dense_min, sparse_max), (Some((d, _)), Some((s, _))) if d > s);
    out.checks.push(CheckResult::new(
        "upper_body_visited_more",
        passed,
        match (dense_min, sparse_max) {
            (Some((d, di)), Some((s, si))) => format!(
                "least-entered {dense:?} segment {di}: {d} entries; most-entered {sparse:?} segment {si}: {s} entries"
            ),
            _ => "region labels missing from graph".into(),
        },
    ));
    out.tables = vec![seg_table, region_table, log_table];
    Ok(out)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn gate_for(res: &Resources, gate: &Option<LinkGate>) -> Result<CommGate, ExperimentError> {
    let mut g = gate.unwrap_or_default();
    g.channel = res.channel;
    CommGate::new(res.placement.anchors.clone(), &g).map_err(|e| ExperimentError::run("link gate", e))
}

#[allow(clippy::too_many_arguments)]
fn anchor_visits(
    cfg: &ScenarioConfig,
    res: &Resources,
    seeds: &[u64],
    gate: &Option<LinkGate>,
    threshold_s: f64,
    band: &Band,
    max_interval_s: f64,
    payload_bps: f64,
) -> Result<AnalysisOutput, ExperimentError> {
    let gate = gate_for(res, gate)?;
    let inj = res.injection_segment()?;
    let n_anchors = gate.anchors().len();
    let per_seed: Vec<(Vec<f64>, Vec<u64>)> = seeds
        .par_iter()
        .map(|&seed| {
            let mut tracker = VisitTracker::new();
            let mut starts = Vec::new();
            let mut counts = vec![0u64; n_anchors];
            for s in TrajectoryIter::new(&res.graph, inj, cfg.duration_s, cfg.dt_s, seed)? {
                if let Some(i) = tracker.observe(&gate, &s.position) {
                    starts.push(s.sim_time);
                    counts[i] += 1;
                }
            }
            let intervals = starts.windows(2).map(|w| w[1] - w[0]).collect();
            Ok((intervals, counts))
        })
        .collect::<Result<_, crate::vasculature::GraphError>>()
        .map_err(|e| ExperimentError::run("trajectory", e))?;

    let mut raw = Table::new("intervals", "", &["seed", "index", "interval_s"], 2);
    raw.in_report = false;
    let mut all = Vec::new();
    let mut counts = vec![0u64; n_anchors];
    for (&seed, (iv, c)) in seeds.iter().zip(&per_seed) {
        for (k, &x) in iv.iter().enumerate() {
            raw.push(vec![seed.into(), k.into(), x.into()]);
        }
        all.extend_from_slice(iv);
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
    }
    all.sort_by(f64::total_cmp);
    let frac = if all.is_empty() {
        0.0
    } else {
        all.iter().filter(|&&x| x <= threshold_s).count() as f64 / all.len() as f64
    };
    let max = all.last().copied().unwrap_or(f64::INFINITY);
    let mean = all.iter().sum::<f64>() / all.len().max(1) as f64;
    let mut summary = Table::new("interval_summary", "", &["statistic", "value"], 1);
    for (k, v) in [
        ("intervals", all.len() as f64),
        ("fraction_within_threshold", frac),
        ("threshold_s", threshold_s),
        ("mean_s", mean),
        ("p50_s", quantile(&all, 0.5)),
        ("p90_s", quantile(&all, 0.9)),
        ("p99_s", quantile(&all, 0.99)),
        ("max_s", max),
    ] {
        summary.push(vec![k.into(), v.into()]);
    }
    let mut per_anchor = Table::new("anchor_visits", "", &["anchor_id", "name", "region", "visits"], 1);
    for (a, c) in gate.anchors().iter().zip(&counts) {
        per_anchor.push(vec![
            a.id.into(),
            a.name.clone().unwrap_or_default().into(),
            a.region.clone().unwrap_or_default().into(),
            (*c).into(),
        ]);
    }

    let fastest = res.graph.segments().iter().map(|s| s.flow_speed).fold(0.0, f64::max);
    let w = gate
        .anchors()
        .first()
        .map_or(crate::anchor::DEFAULT_PATCH_HALF_WIDTH, |a| a.patch_half_width);
    let pf = payload_feasibility(1, payload_bps, w, fastest);
    let mut payload = Table::new(
        "payload_feasibility",
        "",
        &[
            "packets",
            "packet_bytes",
            "capacity_bps",
            "airtime_s",
            "dwell_s",
            "margin",
        ],
        1,
    );
    payload.push(vec![
        pf.packets.into(),
        pf.packet_bytes.into(),
        pf.capacity_bps.into(),
        pf.airtime_s.into(),
        pf.dwell_s.into(),
        pf.margin.into(),
    ]);

    let mut out = AnalysisOutput::default();
    if pf.margin < 1.0 {
        out.notes.push(format!(
            "payload warning: one {}-byte packet needs {:.3} s at {} bps but a straight pass under a patch at {} m/s lasts {:.3} s",
            pf.packet_bytes, pf.airtime_s, payload_bps, fastest, pf.dwell_s
        ));
    }
    out.checks.push(CheckResult::new(
        "fraction_within_threshold",
        band.contains(frac),
        format!(
            "{:.4} of {} intervals <= {threshold_s} s, band [{}, {}]",
            frac,
            all.len(),
            band.min,
            band.max
        ),
    ));
    out.checks.push(CheckResult::new(
        "max_interval",
        max <= max_interval_s,
        format!("longest interval {max:.2} s, limit {max_interval_s} s"),
    ));
    out.tables = vec![summary, per_anchor, payload, raw];
    Ok(out)
}

struct LocalizationParams<'a> {
    gate: &'a Option<LinkGate>,
    reset: crate::imu::ResetModel,
    constraint: VesselConstraint,
    bin_width_mm: f64,
    max_distance_mm: f64,
    checks: &'a ErrorCurveChecks,
}

/// Running mean of event errors with per-seed partial sums. Events from one
/// seed share a trajectory and its drift, so the standard error treats seeds
/// as the independent units (cluster-robust ratio estimator).
#[derive(Debug, Clone, Default)]
struct Bin {
    n: usize,
    sum: f64,
    by_seed: BTreeMap<usize, (usize, f64)>,
}

impl Bin {
    fn add(&mut self, seed: usize, x: f64) {
        self.n += 1;
        self.sum += x;
        let e = self.by_seed.entry(seed).or_default();
        e.0 += 1;
        e.1 += x;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn se(&self) -> f64 {
        let k = self.by_seed.len();
        if k < 2 {
            return f64::INFINITY;
        }
        let m = self.mean();
        let ss: f64 = self.by_seed.values().map(|&(n, s)| (s - m * n as f64).powi(2)).sum();
        (ss * k as f64 / (k - 1) as f64).sqrt() / self.n as f64
    }
}

fn events_for(cfg: &ScenarioConfig, res: &Resources, seed: u64) -> Result<Vec<AnomalyEvent>, ExperimentError> {
    cfg.events.materialize(&res.graph, seed)
}

fn localization(
    cfg: &ScenarioConfig,
    res: &Resources,
    seeds: &[u64],
    p: &LocalizationParams<'_>,
) -> Result<AnalysisOutput, ExperimentError> {
    let gate = gate_for(res, p.gate)?;
    let setup = LocalizationSetup {
        graph: &res.graph,
        gate: &gate,
        injection_segment: res.injection_segment()?,
        duration_s: cfg.duration_s,
        reset: p.reset,
        constraint: p.constraint,
        sink_period_s: 60.0,
        sensor_id: 1,
    };
    let events: Vec<Vec<AnomalyEvent>> = seeds
        .iter()
        .map(|&s| events_for(cfg, res, s))
        .collect::<Result<_, _>>()?;
    let cells: Vec<(usize, usize)> = (0..cfg.imu_spec_grid.len())
        .flat_map(|l| (0..seeds.len()).map(move |s| (l, s)))
        .collect();
    let runs: Vec<(Vec<StampedEvent>, usize, f64)> = cells
        .par_iter()
        .map(|&(l, s)| {
            let spec = cfg.imu_spec_grid[l].spec();
            let run = run_localization(&setup, &spec, &events[s], seeds[s])?;
            let reset_err = run.resets.iter().map(|r| r.error_after_m).sum::<f64>();
            Ok((run.stamps, run.resets.len(), reset_err))
        })
        .collect::<Result<_, super::localize::LocalizeError>>()
        .map_err(|e| ExperimentError::run("localization", e))?;

    let n_bins = (p.max_distance_mm / p.bin_width_mm).round() as usize;
    let mut bins = vec![vec![Bin::default(); n_bins]; cfg.imu_spec_grid.len()];
    let mut raw = Table::new(
        "event_errors",
        "",
        &[
            "level",
            "seed",
            "event_id",
            "distance_since_reset_m",
            "error_m",
            "gyro_noise_std",
            "gyro_bias",
            "accel_noise_std",
            "accel_bias",
        ],
        4,
    );
    raw.in_report = false;
    let mut resets = Table::new("resets", "", &["level", "resets", "mean_error_after_reset_mm"], 1);
    let mut plateau = Bin::default();
    for (l, level) in cfg.imu_spec_grid.iter().enumerate() {
        let (mut count, mut err) = (0usize, 0.0);
        for (s, &seed) in seeds.iter().enumerate() {
            let (stamps, nr, er) = &runs[l * seeds.len() + s];
            count += nr;
            err += er;
            for st in stamps {
                let d_mm = st.distance_since_reset_at_stamp * 1e3;
                raw.push(vec![
                    level.label.as_str().into(),
                    seed.into(),
                    st.event_id.into(),
                    st.distance_since_reset_at_stamp.into(),
                    st.error_m.into(),
                    level.gyro_noise_std.into(),
                    level.gyro_bias.into(),
                    level.accel_noise_std.into(),
                    level.accel_bias.into(),
                ]);
                let b = (d_mm / p.bin_width_mm).floor() as usize;
                if b < n_bins {
                    bins[l][b].add(s, st.error_m * 1e3);
                }
                if level.label == p.checks.plateau_level
                    && d_mm >= p.checks.plateau_from_mm
                    && d_mm < p.checks.plateau_to_mm
                {
                    plateau.add(s, st.error_m * 1e3);
                }
            }
        }
        resets.push(vec![
            level.label.as_str().into(),
            count.into(),
            (if count > 0 { err / count as f64 * 1e3 } else { 0.0 }).into(),
        ]);
    }

    let mut curve = Table::new(
        "error_bins",
        "",
        &[
            "level",
            "bin_lo_mm",
            "bin_hi_mm",
            "n",
            "mean_error_mm",
            "mean_error_mm_se",
        ],
        3,
    );
    curve.info_columns = vec!["n".into()];
    for (l, level) in cfg.imu_spec_grid.iter().enumerate() {
        for (b, bin) in bins[l].iter().enumerate() {
            if bin.n == 0 {
                continue;
            }
            curve.push(vec![
                level.label.as_str().into(),
                (b as f64 * p.bin_width_mm).into(),
                ((b + 1) as f64 * p.bin_width_mm).into(),
                bin.n.into(),
                bin.mean().into(),
                bin.se().into(),
            ]);
        }
    }

    Ok(AnalysisOutput {
        checks: curve_checks(cfg, p, &bins, &plateau),
        tables: vec![curve, resets, raw],
        ..AnalysisOutput::default()
    })
}

fn curve_checks(
    cfg: &ScenarioConfig,
    p: &LocalizationParams<'_>,
    bins: &[Vec<Bin>],
    plateau: &Bin,
) -> Vec<CheckResult> {
    let c = p.checks;
    let idx = |label: &str| {
        cfg.imu_spec_grid
            .iter()
            .position(|l| l.label == label)
            .expect("validated label")
    };
    let usable = |b: &Bin| b.n >= c.min_bin_count;
    let mono_bins = (c.monotone_until_mm / p.bin_width_mm).round() as usize;
    let mut checks = Vec::new();

    let mut drops = Vec::new();
    for (l, level) in cfg.imu_spec_grid.iter().enumerate() {
        let row = &bins[l][..mono_bins.min(bins[l].len())];
        let pts: Vec<(usize, &Bin)> = row.iter().enumerate().filter(|(_, b)| usable(b)).collect();
        for w in pts.windows(2) {
            let ((i, a), (j, b)) = (w[0], w[1]);
            let allowance = c.monotone_sigma * (a.se().powi(2) + b.se().powi(2)).sqrt();
            if b.mean() < a.mean() - allowance {
                drops.push(format!(
                    "{} bin {}->{} mm: {:.3} -> {:.3} mm",
                    level.label,
                    i as f64 * p.bin_width_mm,
                    j as f64 * p.bin_width_mm,
                    a.mean(),
                    b.mean()
                ));
            }
        }
    }
    checks.push(CheckResult::new(
        "error_non_decreasing",
        drops.is_empty(),
        if drops.is_empty() {
            format!(
                "all levels non-decreasing up to {} mm (allowance {} se)",
                c.monotone_until_mm, c.monotone_sigma
            )
        } else {
            format!("{} drops, first: {}", drops.len(), drops[0])
        },
    ));

    let mut inversions = Vec::new();
    let order: Vec<usize> = c.ordered_levels.iter().map(|l| idx(l)).collect();
    for w in order.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        for (b, (a, z)) in bins[lo].iter().zip(&bins[hi]).enumerate() {
            if !(usable(a) && usable(z)) {
                continue;
            }
            let allowance = c.order_sigma * (a.se().powi(2) + z.se().powi(2)).sqrt();
            if z.mean() < a.mean() - allowance {
                inversions.push(format!(
                    "bin {} mm: {} {:.3} mm > {} {:.3} mm",
                    b as f64 * p.bin_width_mm,
                    cfg.imu_spec_grid[lo].label,
                    a.mean(),
                    cfg.imu_spec_grid[hi].label,
                    z.mean()
                ));
            }
        }
    }
    checks.push(CheckResult::new(
        "ordered_by_noise",
        inversions.is_empty(),
        if inversions.is_empty() {
            format!("order {:?} holds in every populated bin", c.ordered_levels)
        } else {
            format!("{} inversions, first: {}", inversions.len(), inversions[0])
        },
    ));

    let pm = if plateau.n > 0 { plateau.mean() } else { f64::NAN };
    checks.push(CheckResult::new(
        "plateau",
        plateau.n > 0 && c.plateau_band_mm.contains(pm),
        format!(
            "{} mean error over [{}, {}) mm: {:.3} mm (n = {}), band [{}, {}] mm",
            c.plateau_level,
            c.plateau_from_mm,
            c.plateau_to_mm,
            pm,
            plateau.n,
            c.plateau_band_mm.min,
            c.plateau_band_mm.max
        ),
    ));

    let l = idx(&c.spacing_level);
    let b = ((c.spacing_mm / p.bin_width_mm).round() as usize).saturating_sub(1);
    let bin = bins[l].get(b).cloned().unwrap_or_default();
    let m = if bin.n > 0 { bin.mean() } else { f64::NAN };
    checks.push(CheckResult::new(
        "error_at_spacing",
        bin.n > 0 && m <= c.spacing_max_error_mm,
        format!(
            "{} mean error in bin [{}, {}) mm: {:.3} mm (n = {}), limit {} mm",
            c.spacing_level,
            b as f64 * p.bin_width_mm,
            (b + 1) as f64 * p.bin_width_mm,
            m,
            bin.n,
            c.spacing_max_error_mm
        ),
    ));
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!((quantile(&v, 0.5) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn depth_grid_ends_at_thickness() {
        let s = LayerStack::default_skin();
        let d = depth_grid(&s, 1e-4);
        assert_eq!(d.len(), 25);
        assert_eq!(*d.last().unwrap(), s.total_thickness());
    }

    #[test]
    fn bin_statistics() {
        // One event per seed reduces to the textbook standard error.
        let mut b = Bin::default();
        for (s, x) in [1.0, 2.0, 3.0].into_iter().enumerate() {
            b.add(s, x);
        }
        assert!((b.mean() - 2.0).abs() < 1e-15);
        assert!((b.se() - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);

        // Repeated values within a seed add no information.
        let mut c = Bin::default();
        for (s, x) in [(0, 1.0), (0, 1.0), (1, 3.0), (1, 3.0)] {
            c.add(s, x);
        }
        assert!((c.se() - 1.0).abs() < 1e-12);
        let mut one = Bin::default();
        one.add(0, 1.0);
        one.add(0, 2.0);
        assert!(one.se().is_infinite());
    }
}
