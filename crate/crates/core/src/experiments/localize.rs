//! Closed-loop localization run: truth motion, IMU, estimator, event
//! stamping, anchor exchanges and sink merging for one sensor.

use serde::{Deserialize, Serialize};

use crate::anchor::{exchange, merge_tables, AnchorError, AnchorTable, CommGate, Reading, SinkView, VisitTracker};
use crate::imu::{
    anchor_update, predict, stamp_event, vessel_constraint_update, EstimatorState, ImuError, ImuSpec, ImuSynth,
    ResetFix, ResetModel, StampedEvent, VesselConstraint,
};
use crate::vasculature::{stream_rng, AnomalyEvent, EventSensor, GraphError, TrajectoryIter, VesselGraph};

pub const IMU_STREAM: u64 = 1;
pub const RESET_STREAM: u64 = 2;
pub const EVENT_STREAM: u64 = 3;

#[derive(Debug, thiserror::Error)]
pub enum LocalizeError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Imu(#[from] ImuError),
    #[error(transparent)]
    Anchor(#[from] AnchorError),
}

pub struct LocalizationSetup<'a> {
    pub graph: &'a VesselGraph,
    pub gate: &'a CommGate,
    pub injection_segment: u32,
    pub duration_s: f64,
    pub reset: ResetModel,
    pub constraint: VesselConstraint,
    /// Sink merge period in simulated seconds.
    pub sink_period_s: f64,
    pub sensor_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetRecord {
    pub t: f64,
    pub anchor_id: u32,
    /// Estimate error just before the reset.
    pub error_before_m: f64,
    pub error_after_m: f64,
}

#[derive(Debug, Clone)]
pub struct LocalizationRun {
    pub stamps: Vec<StampedEvent>,
    pub resets: Vec<ResetRecord>,
    pub sink: SinkView,
    /// Sink merges performed during the run (the final flush included).
    pub sink_merges: usize,
}

pub fn run_localization(
    setup: &LocalizationSetup<'_>,
    spec: &ImuSpec,
    events: &[AnomalyEvent],
    seed: u64,
) -> Result<LocalizationRun, LocalizeError> {
    spec.validate()?;
    let dt = spec.dt();
    let mut truth_iter = TrajectoryIter::new(setup.graph, setup.injection_segment, setup.duration_s, dt, seed)?;
    let first = truth_iter.next().expect("iterator yields the initial state");
    let mut imu_rng = stream_rng(seed, IMU_STREAM);
    let mut reset_rng = stream_rng(seed, RESET_STREAM);
    let mut synth = ImuSynth::new();
    let mut est = EstimatorState::from_truth(&first);
    let mut sensor = EventSensor::new();
    let mut tracker = VisitTracker::new();
    let mut pending: Vec<StampedEvent> = Vec::new();
    let mut tables: Vec<AnchorTable> = setup.gate.anchors().iter().map(|a| AnchorTable::new(a.id)).collect();
    let mut sink = SinkView::new();
    let mut sink_merges = 0;
    let mut next_merge = setup.sink_period_s;
    let mut stamps = Vec::new();
    let mut resets = Vec::new();

    // The sensor starts at the injection point inside whichever patch covers it.
    tracker.observe(setup.gate, &first.position);
    let mut prev = first;
    for truth in truth_iter {
        let sample = synth.sample(&prev, &truth, spec, &mut imu_rng);
        est = predict(&est, &sample, spec, dt);
        est = vessel_constraint_update(&est, setup.graph, &setup.constraint);

        for id in sensor.sense(&truth.position, events) {
            let event = events.iter().find(|e| e.id == id).expect("sensed id is known");
            let stamped = stamp_event(&est, event);
            stamps.push(stamped);
            pending.push(stamped);
        }

        if let Some(i) = tracker.observe(setup.gate, &truth.position) {
            let anchor = &setup.gate.anchors()[i];
            let in_range = setup.gate.in_range(i, &truth.position);
            let heartbeat = Reading::new(0.0, "none");
            let (packets, directive) = exchange(
                anchor,
                in_range,
                setup.sensor_id,
                &est,
                heartbeat,
                &mut pending,
                truth.sim_time,
            )?;
            tables[i].extend(packets);
            let before = (est.position_est - truth.position).norm();
            let fix = ResetFix {
                anchor_id: directive.anchor_id,
                anchor_center: directive.anchor_center,
                in_range,
                truth: &truth,
                reference_velocity: synth.reference_velocity().unwrap_or(truth.velocity),
            };
            est = anchor_update(&est, &fix, &setup.reset, &mut reset_rng)?;
            resets.push(ResetRecord {
                t: truth.sim_time,
                anchor_id: anchor.id,
                error_before_m: before,
                error_after_m: (est.position_est - truth.position).norm(),
            });
        }

        if truth.sim_time >= next_merge {
            sink = sink.merge(&merge_tables(&tables));
            sink_merges += 1;
            next_merge += setup.sink_period_s;
        }
        prev = truth;
    }
    sink = sink.merge(&merge_tables(&tables));
    sink_merges += 1;
    Ok(LocalizationRun {
        stamps,
        resets,
        sink,
        sink_merges,
    })
}
