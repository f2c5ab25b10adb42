//! Simplified cardiovascular graph and bionanosensor ground-truth motion.
//!
//! Sensors advect along segment centerlines at the segment's flow speed. At
//! a segment end the next segment is drawn from the declared branch
//! probabilities and the residual distance is carried over. Orientation keeps
//! the body x-axis on the tangent, applying the minimal rotation at each
//! junction so roll is preserved.

use std::collections::{HashMap, HashSet, VecDeque};

use nalgebra::{Point3, UnitQuaternion, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_GRAPH_JSON: &str = include_str!("../assets/graphs/simplified_body.json");

/// Tolerance on branch probability sums.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("segment {segment}: downstream id {target} does not exist")]
    DanglingDownstream { segment: u32, target: u32 },
    #[error("segment {segment}: branch probabilities sum to {sum}")]
    ProbabilitySum { segment: u32, sum: f64 },
    #[error("segment {segment}: branch probability {p} outside [0, 1]")]
    BadProbability { segment: u32, p: f64 },
    #[error("segment {segment}: start and end coincide")]
    ZeroLength { segment: u32 },
    #[error("segment {segment}: flow speed must be positive")]
    NonPositiveSpeed { segment: u32 },
    #[error("segment {segment}: no downstream segments")]
    NoDownstream { segment: u32 },
    #[error("segment id {0} declared twice")]
    DuplicateId(u32),
    #[error("injection point {0} is not a segment")]
    UnknownInjection(u32),
    #[error("segment {segment} cannot reach injection point {injection}")]
    NotStronglyConnected { segment: u32, injection: u32 },
    #[error("unknown segment {0}")]
    UnknownSegment(u32),
    #[error("malformed graph document: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VesselKind {
    Artery,
    Vein,
    OrganTransition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: u32,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDoc {
    pub id: u32,
    pub kind: VesselKind,
    pub start_xyz_m: [f64; 3],
    pub end_xyz_m: [f64; 3],
    pub flow_speed_mps: f64,
    pub downstream: Vec<Branch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
}

/// The vessel graph file as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub segments: Vec<SegmentDoc>,
    #[serde(default)]
    pub injection_points: Vec<u32>,
}

impl GraphDocument {
    pub fn from_json_str(s: &str) -> Result<Self, GraphError> {
        serde_json::from_str(s).map_err(|e| GraphError::Parse(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VesselSegment {
    pub id: u32,
    pub kind: VesselKind,
    pub start: Point3<f64>,
    pub end: Point3<f64>,
    pub flow_speed: f64,
    pub downstream: Vec<Branch>,
    pub name: Option<String>,
    pub region: Option<String>,
    length: f64,
    tangent: Vector3<f64>,
}

impl VesselSegment {
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Unit vector from start to end.
    pub fn tangent(&self) -> Vector3<f64> {
        self.tangent
    }

    pub fn point_at(&self, arc_offset: f64) -> Point3<f64> {
        self.start + self.tangent * arc_offset
    }

    pub fn traversal_time(&self) -> f64 {
        self.length / self.flow_speed
    }

    /// Closest centerline point to `p` as `(arc_offset, point)`.
    pub fn project(&self, p: &Point3<f64>) -> (f64, Point3<f64>) {
        let s = (p - self.start).dot(&self.tangent).clamp(0.0, self.length);
        (s, self.point_at(s))
    }

    fn choose_next<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        if self.downstream.len() == 1 {
            return self.downstream[0].id;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for b in &self.downstream {
            acc += b.p;
            if u < acc {
                return b.id;
            }
        }
        self.downstream.last().expect("validated non-empty").id
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VesselGraph {
    name: Option<String>,
    segments: Vec<VesselSegment>,
    index: HashMap<u32, usize>,
    injection_points: Vec<u32>,
    total_length: f64,
}

/// Nearest centerline point over the whole graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterlineMatch {
    pub segment_id: u32,
    pub arc_offset: f64,
    pub point: Point3<f64>,
    pub distance: f64,
}

/// Validates a graph document and builds the in-memory graph.
pub fn load_graph(doc: &GraphDocument) -> Result<VesselGraph, GraphError> {
    let mut index = HashMap::with_capacity(doc.segments.len());
    let mut segments = Vec::with_capacity(doc.segments.len());
    for (i, s) in doc.segments.iter().enumerate() {
        if index.insert(s.id, i).is_some() {
            return Err(GraphError::DuplicateId(s.id));
        }
        let start = Point3::from(s.start_xyz_m);
        let end = Point3::from(s.end_xyz_m);
        let delta = end - start;
        let length = delta.norm();
        if !(length > 0.0) || !length.is_finite() {
            return Err(GraphError::ZeroLength { segment: s.id });
        }
        if !(s.flow_speed_mps > 0.0 && s.flow_speed_mps.is_finite()) {
            return Err(GraphError::NonPositiveSpeed { segment: s.id });
        }
        segments.push(VesselSegment {
            id: s.id,
            kind: s.kind,
            start,
            end,
            flow_speed: s.flow_speed_mps,
            downstream: s.downstream.clone(),
            name: s.name.clone(),
            region: s.region.clone(),
            length,
            tangent: delta / length,
        });
    }
    for s in &segments {
        if s.downstream.is_empty() {
            return Err(GraphError::NoDownstream { segment: s.id });
        }
        let mut sum = 0.0;
        for b in &s.downstream {
            if !index.contains_key(&b.id) {
                return Err(GraphError::DanglingDownstream {
                    segment: s.id,
                    target: b.id,
                });
            }
            if !(0.0..=1.0).contains(&b.p) {
                return Err(GraphError::BadProbability { segment: s.id, p: b.p });
            }
            sum += b.p;
        }
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(GraphError::ProbabilitySum { segment: s.id, sum });
        }
    }
    for &inj in &doc.injection_points {
        if !index.contains_key(&inj) {
            return Err(GraphError::UnknownInjection(inj));
        }
    }
    let graph = VesselGraph {
        name: doc.name.clone(),
        total_length: segments.iter().map(|s| s.length).sum(),
        segments,
        index,
        injection_points: doc.injection_points.clone(),
    };
    graph.check_reachability()?;
    Ok(graph)
}

impl VesselGraph {
    pub fn from_json_str(s: &str) -> Result<Self, GraphError> {
        load_graph(&GraphDocument::from_json_str(s)?)
    }

    /// The bundled desk-scale body model.
    pub fn simplified_body() -> Self {
        Self::from_json_str(DEFAULT_GRAPH_JSON).expect("bundled graph is valid")
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn segments(&self) -> &[VesselSegment] {
        &self.segments
    }

    pub fn segment(&self, id: u32) -> Result<&VesselSegment, GraphError> {
        self.index
            .get(&id)
            .map(|&i| &self.segments[i])
            .ok_or(GraphError::UnknownSegment(id))
    }

    /// Position of `id` in [`Self::segments`].
    pub fn segment_index(&self, id: u32) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn injection_points(&self) -> &[u32] {
        &self.injection_points
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn find_by_name(&self, name: &str) -> Option<&VesselSegment> {
        self.segments.iter().find(|s| s.name.as_deref() == Some(name))
    }

    // Every segment must reach every injection point (reverse BFS from each).
    fn check_reachability(&self) -> Result<(), GraphError> {
        let mut upstream: HashMap<u32, Vec<u32>> = HashMap::new();
        for s in &self.segments {
            for b in &s.downstream {
                upstream.entry(b.id).or_default().push(s.id);
            }
        }
        for &inj in &self.injection_points {
            let mut seen = HashSet::from([inj]);
            let mut queue = VecDeque::from([inj]);
            while let Some(id) = queue.pop_front() {
                for &u in upstream.get(&id).map(Vec::as_slice).unwrap_or(&[]) {
                    if seen.insert(u) {
                        queue.push_back(u);
                    }
                }
            }
            if let Some(s) = self.segments.iter().find(|s| !seen.contains(&s.id)) {
                return Err(GraphError::NotStronglyConnected {
                    segment: s.id,
                    injection: inj,
                });
            }
        }
        Ok(())
    }

    /// Closest centerline point to `p` across all segments.
    pub fn nearest_centerline(&self, p: &Point3<f64>) -> CenterlineMatch {
        let mut best = CenterlineMatch {
            segment_id: 0,
            arc_offset: 0.0,
            point: *p,
            distance: f64::INFINITY,
        };
        for s in &self.segments {
            let (off, q) = s.project(p);
            let d2 = (p - q).norm_squared();
            if d2 < best.distance {
                best = CenterlineMatch {
                    segment_id: s.id,
                    arc_offset: off,
                    point: q,
                    distance: d2,
                };
            }
        }
        best.distance = best.distance.sqrt();
        best
    }

    /// Sensor state at `arc_offset` along `segment_id`, body x-axis on the tangent.
    pub fn state_at(&self, segment_id: u32, arc_offset: f64, sim_time: f64) -> Result<BnsState, GraphError> {
        let seg = self.segment(segment_id)?;
        Ok(BnsState {
            position: seg.point_at(arc_offset),
            segment_id,
            arc_offset,
            velocity: seg.tangent * seg.flow_speed,
            orientation: align_x_axis(UnitQuaternion::identity(), &seg.tangent),
            sim_time,
        })
    }
}

/// Applies the minimal rotation taking the body x-axis of `q` onto `tangent`.
fn align_x_axis(q: UnitQuaternion<f64>, tangent: &Vector3<f64>) -> UnitQuaternion<f64> {
    let current = q * Vector3::x();
    let r = UnitQuaternion::rotation_between(&current, tangent).unwrap_or_else(|| {
        // antiparallel: half turn about any axis normal to the tangent
        let axis = if current.z.abs() < 0.9 {
            Vector3::z()
        } else {
            Vector3::y()
        };
        let n = current.cross(&axis).normalize();
        UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_unchecked(n), std::f64::consts::PI)
    });
    let out = r * q;
    UnitQuaternion::new_normalize(out.into_inner())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BnsState {
    pub position: Point3<f64>,
    pub segment_id: u32,
    pub arc_offset: f64,
    pub velocity: Vector3<f64>,
    /// Body-to-world rotation.
    pub orientation: UnitQuaternion<f64>,
    pub sim_time: f64,
}

/// Advances the sensor by `dt`, reporting every segment entered on the way.
pub fn step_with<R: Rng + ?Sized>(
    state: &BnsState,
    graph: &VesselGraph,
    dt: f64,
    rng: &mut R,
    mut on_enter: impl FnMut(u32),
) -> BnsState {
    let mut seg = graph.segment(state.segment_id).expect("state refers to graph segment");
    let mut offset = state.arc_offset + seg.flow_speed * dt;
    let mut orientation = state.orientation;
    while offset >= seg.length {
        offset -= seg.length;
        let next = seg.choose_next(rng);
        seg = graph.segment(next).expect("validated downstream");
        orientation = align_x_axis(orientation, &seg.tangent);
        on_enter(next);
    }
    BnsState {
        position: seg.point_at(offset),
        segment_id: seg.id,
        arc_offset: offset,
        velocity: seg.tangent * seg.flow_speed,
        orientation,
        sim_time: state.sim_time + dt,
    }
}

pub fn step<R: Rng + ?Sized>(state: &BnsState, graph: &VesselGraph, dt: f64, rng: &mut R) -> BnsState {
    step_with(state, graph, dt, rng, |_| {})
}

/// Per-stream RNG derived from a run seed. Stream 0 drives motion.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub const MOTION_STREAM: u64 = 0;

/// Streaming ground-truth trajectory; yields the initial state first.
pub struct TrajectoryIter<'g> {
    graph: &'g VesselGraph,
    rng: ChaCha8Rng,
    state: BnsState,
    dt: f64,
    remaining: usize,
    started: bool,
    entered: Vec<u32>,
}

impl<'g> TrajectoryIter<'g> {
    pub fn new(
        graph: &'g VesselGraph,
        injection_segment: u32,
        duration: f64,
        dt: f64,
        seed: u64,
    ) -> Result<Self, GraphError> {
        assert!(
            dt > 0.0 && duration >= 0.0,
            "dt must be positive and duration non-negative"
        );
        let state = graph.state_at(injection_segment, 0.0, 0.0)?;
        Ok(Self {
            graph,
            rng: stream_rng(seed, MOTION_STREAM),
            state,
            dt,
            remaining: (duration / dt).round() as usize,
            started: false,
            entered: Vec::new(),
        })
    }

    /// Segments entered during the most recent step, in order.
    pub fn entered(&self) -> &[u32] {
        &self.entered
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

impl Iterator for TrajectoryIter<'_> {
    type Item = BnsState;

    fn next(&mut self) -> Option<BnsState> {
        if !self.started {
            self.started = true;
            return Some(self.state);
        }
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        self.entered.clear();
        let entered = &mut self.entered;
        self.state = step_with(&self.state, self.graph, self.dt, &mut self.rng, |id| entered.push(id));
        Some(self.state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<BnsState>,
    /// Segment occupied at each sample (same length as `states`).
    pub segment_log: Vec<u32>,
    /// `(time, segment)` for every segment entry, including skipped-over ones.
    pub entries: Vec<(f64, u32)>,
}

impl Trajectory {
    /// Number of entries into each segment.
    pub fn entry_counts(&self) -> HashMap<u32, usize> {
        let mut counts = HashMap::new();
        for &(_, id) in &self.entries {
            *counts.entry(id).or_insert(0) += 1;
        }
        counts
    }
}

pub fn trajectory(
    graph: &VesselGraph,
    injection_segment: u32,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<Trajectory, GraphError> {
    let mut it = TrajectoryIter::new(graph, injection_segment, duration, dt, seed)?;
    let n = it.remaining + 1;
    let mut states = Vec::with_capacity(n);
    let mut entries = vec![(0.0, injection_segment)];
    while let Some(s) = it.next() {
        for &id in it.entered() {
            entries.push((s.sim_time, id));
        }
        states.push(s);
    }
    let segment_log = states.iter().map(|s| s.segment_id).collect();
    Ok(Trajectory {
        states,
        segment_log,
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyEvent {
    pub id: u32,
    pub true_location: Point3<f64>,
    pub sensing_radius: f64,
    pub segment_id: u32,
}

/// Event placement as stored in an events file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub id: u32,
    pub segment_id: u32,
    pub arc_offset_m: f64,
    pub sensing_radius_m: f64,
}

impl AnomalyEvent {
    pub fn on_segment(
        graph: &VesselGraph,
        id: u32,
        segment_id: u32,
        arc_offset: f64,
        sensing_radius: f64,
    ) -> Result<Self, GraphError> {
        let seg = graph.segment(segment_id)?;
        Ok(Self {
            id,
            true_location: seg.point_at(arc_offset.clamp(0.0, seg.length)),
            sensing_radius,
            segment_id,
        })
    }

    pub fn from_spec(graph: &VesselGraph, spec: &EventSpec) -> Result<Self, GraphError> {
        Self::on_segment(
            graph,
            spec.id,
            spec.segment_id,
            spec.arc_offset_m,
            spec.sensing_radius_m,
        )
    }
}

/// `count` events placed uniformly by length over the graph.
pub fn scatter_events<R: Rng + ?Sized>(
    graph: &VesselGraph,
    count: usize,
    sensing_radius: f64,
    rng: &mut R,
) -> Vec<AnomalyEvent> {
    (0..count)
        .map(|k| {
            let mut u = rng.random::<f64>() * graph.total_length;
            let seg = graph
                .segments
                .iter()
                .find(|s| {
                    if u < s.length {
                        true
                    } else {
                        u -= s.length;
                        false
                    }
                })
                .unwrap_or_else(|| graph.segments.last().expect("graph has segments"));
            AnomalyEvent {
                id: k as u32 + 1,
                true_location: seg.point_at(u.min(seg.length)),
                sensing_radius,
                segment_id: seg.id,
            }
        })
        .collect()
}

/// Open-ball event detection with per-pass debouncing.
#[derive(Debug, Clone, Default)]
pub struct EventSensor {
    inside: HashSet<u32>,
}

impl EventSensor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ids of events newly within range at `position`.
    pub fn sense(&mut self, position: &Point3<f64>, events: &[AnomalyEvent]) -> Vec<u32> {
        let mut fresh = Vec::new();
        for e in events {
            let within = (position - e.true_location).norm() < e.sensing_radius;
            if within {
                if self.inside.insert(e.id) {
                    fresh.push(e.id);
                }
            } else {
                self.inside.remove(&e.id);
            }
        }
        fresh
    }
}

/// Stateless form: every event whose ball contains the sensor.
pub fn sense_events(state: &BnsState, events: &[AnomalyEvent]) -> Vec<u32> {
    events
        .iter()
        .filter(|e| (state.position - e.true_location).norm() < e.sensing_radius)
        .map(|e| e.id)
        .collect()
}
