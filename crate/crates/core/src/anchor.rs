//! Skin anchors: communication gate, packet exchange, per-anchor tables and
//! sink-side merging.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use nalgebra::{Point2, Point3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{backscatter_power, ChannelConfig, ChannelError, LayerStack, LinkParams, Sensitivity};
use crate::imu::{EstimatorState, StampedEvent};
use crate::vasculature::VesselGraph;

const PAPER20_JSON: &str = include_str!("../assets/anchors/paper20.json");

pub const DEFAULT_PATCH_HALF_WIDTH: f64 = 0.025;
pub const DEFAULT_SKIN_THICKNESS: f64 = 0.0025;

#[derive(Debug, Error, PartialEq)]
pub enum AnchorError {
    #[error("unknown anchor preset `{0}`")]
    UnknownPreset(String),
    #[error("anchor {anchor}: unknown stack `{stack}`")]
    UnknownStack { anchor: u32, stack: String },
    #[error("anchor {0}: patch half-width must be positive")]
    BadPatch(u32),
    #[error("anchor id {0} declared twice")]
    DuplicateId(u32),
    #[error("exchange with anchor {anchor} attempted out of range")]
    OutOfRange { anchor: u32 },
    #[error("malformed anchor layout: {0}")]
    Parse(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// One entry of an anchor layout file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorRecord {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    pub center_xyz_m: [f64; 3],
    #[serde(default = "default_half_width")]
    pub patch_half_width_m: f64,
    #[serde(default = "default_skin_thickness")]
    pub skin_thickness_m: f64,
    #[serde(default = "default_stack_ref")]
    pub stack_ref: String,
}

fn default_half_width() -> f64 {
    DEFAULT_PATCH_HALF_WIDTH
}

fn default_skin_thickness() -> f64 {
    DEFAULT_SKIN_THICKNESS
}

fn default_stack_ref() -> String {
    "default".into()
}

pub fn parse_layout(json: &str) -> Result<Vec<AnchorRecord>, AnchorError> {
    serde_json::from_str(json).map_err(|e| AnchorError::Parse(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub id: u32,
    pub name: Option<String>,
    pub region: Option<String>,
    pub center: Point3<f64>,
    pub patch_half_width: f64,
    pub skin_thickness_m: f64,
    pub stack: LayerStack,
    /// Anchors are synchronized; always zero.
    pub clock_offset: f64,
}

impl Anchor {
    /// Skin-plane distance from the anchor centre.
    pub fn horizontal_distance(&self, p: &Point3<f64>) -> f64 {
        (p.xy() - self.center.xy()).norm()
    }

    pub fn within_patch(&self, p: &Point3<f64>) -> bool {
        self.horizontal_distance(p) <= self.patch_half_width
    }

    pub fn is_torso_or_head(&self) -> bool {
        self.region.as_deref() == Some("torso_head")
    }
}

/// Link-budget side of the communication gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkGate {
    /// When false only the geometric patch test applies.
    pub enforce_link_budget: bool,
    pub carrier_hz: f64,
    pub link: LinkParams,
    pub sensitivity: Sensitivity,
    pub channel: ChannelConfig,
}

impl Default for LinkGate {
    fn default() -> Self {
        Self {
            enforce_link_budget: true,
            carrier_hz: 0.5e12,
            link: LinkParams::default(),
            sensitivity: Sensitivity::default(),
            channel: ChannelConfig::default(),
        }
    }
}

impl LinkGate {
    pub fn geometric_only() -> Self {
        Self {
            enforce_link_budget: false,
            ..Self::default()
        }
    }

    /// Whether the backscatter through `stack` clears the sensitivity threshold.
    pub fn link_closes(&self, stack: &LayerStack) -> Result<bool, ChannelError> {
        let p = backscatter_power(stack, &self.link, self.carrier_hz, &self.channel)?;
        Ok(self.sensitivity.detects(p))
    }
}

/// Communication opportunity between `anchor` and a sensor at `bns_position`.
pub fn in_comm_range(anchor: &Anchor, bns_position: &Point3<f64>, gate: &LinkGate) -> Result<bool, ChannelError> {
    if !anchor.within_patch(bns_position) {
        return Ok(false);
    }
    if !gate.enforce_link_budget {
        return Ok(true);
    }
    gate.link_closes(&anchor.stack)
}

/// Gate with the per-anchor link verdict evaluated once.
///
/// The received power depends only on the anchor's stack, so it does not
/// need recomputing every step.
#[derive(Debug, Clone)]
pub struct CommGate {
    anchors: Vec<Anchor>,
    link_ok: Vec<bool>,
}

impl CommGate {
    pub fn new(anchors: Vec<Anchor>, gate: &LinkGate) -> Result<Self, ChannelError> {
        let link_ok = anchors
            .iter()
            .map(|a| {
                if gate.enforce_link_budget {
                    gate.link_closes(&a.stack)
                } else {
                    Ok(true)
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { anchors, link_ok })
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn in_range(&self, index: usize, p: &Point3<f64>) -> bool {
        self.link_ok[index] && self.anchors[index].within_patch(p)
    }

    /// Index of the lowest-id anchor in range, if any.
    pub fn first_in_range(&self, p: &Point3<f64>) -> Option<usize> {
        (0..self.anchors.len())
            .filter(|&i| self.in_range(i, p))
            .min_by_key(|&i| self.anchors[i].id)
    }
}

/// Detects visit starts: the step at which the anchor in range changes to a
/// new one.
#[derive(Debug, Clone, Default)]
pub struct VisitTracker {
    current: Option<usize>,
}

impl VisitTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the anchor index when a new visit starts at `p`.
    pub fn observe(&mut self, gate: &CommGate, p: &Point3<f64>) -> Option<usize> {
        let now = gate.first_in_range(p);
        let started = match now {
            Some(i) if self.current != Some(i) => Some(i),
            _ => None,
        };
        self.current = now;
        started
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub value: f64,
    pub unit: String,
}

impl Reading {
    pub fn new(value: f64, unit: &str) -> Self {
        Self {
            value,
            unit: unit.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorPacket {
    pub sensor_id: u32,
    pub reading: Reading,
    pub location_stamp: Point3<f64>,
    pub event_id: Option<u32>,
    /// Set by the receiving anchor.
    pub rx_time: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnchorTable {
    pub anchor_id: u32,
    rows: Vec<SensorPacket>,
}

impl AnchorTable {
    pub fn new(anchor_id: u32) -> Self {
        Self {
            anchor_id,
            rows: Vec::new(),
        }
    }

    pub fn rows(&self) -> &[SensorPacket] {
        &self.rows
    }

    /// Inserts keeping rows ordered by `rx_time` (stable for ties).
    pub fn push(&mut self, packet: SensorPacket) {
        let at = self.rows.partition_point(|r| r.rx_time <= packet.rx_time);
        self.rows.insert(at, packet);
    }

    pub fn extend(&mut self, packets: impl IntoIterator<Item = SensorPacket>) {
        for p in packets {
            self.push(p);
        }
    }
}

/// Instruction for the estimator to reset at this anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetDirective {
    pub anchor_id: u32,
    pub anchor_center: Point3<f64>,
    pub sim_time: f64,
}

/// Uploads the sensor's pending events plus a heartbeat. The pending buffer
/// is drained (transfers are always acknowledged).
pub fn exchange(
    anchor: &Anchor,
    in_range: bool,
    sensor_id: u32,
    state: &EstimatorState,
    heartbeat: Reading,
    pending: &mut Vec<StampedEvent>,
    sim_time: f64,
) -> Result<(Vec<SensorPacket>, ResetDirective), AnchorError> {
    if !in_range {
        return Err(AnchorError::OutOfRange { anchor: anchor.id });
    }
    let rx_time = sim_time + anchor.clock_offset;
    let mut packets: Vec<SensorPacket> = pending
        .drain(..)
        .map(|e| SensorPacket {
            sensor_id,
            reading: Reading::new(1.0, "anomaly"),
            location_stamp: e.estimated_location,
            event_id: Some(e.event_id),
            rx_time,
        })
        .collect();
    packets.push(SensorPacket {
        sensor_id,
        reading: heartbeat,
        location_stamp: state.position_est,
        event_id: None,
        rx_time,
    });
    let directive = ResetDirective {
        anchor_id: anchor.id,
        anchor_center: anchor.center,
        sim_time: rx_time,
    };
    Ok((packets, directive))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedPacket {
    pub anchor_id: u32,
    #[serde(flatten)]
    pub packet: SensorPacket,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LastKnown {
    pub location: Point3<f64>,
    pub rx_time: f64,
    pub anchor_id: u32,
}

type DedupKey = (u64, u32, u32, Option<u32>);

fn key(m: &MergedPacket) -> DedupKey {
    (
        m.packet.rx_time.to_bits(),
        m.anchor_id,
        m.packet.sensor_id,
        m.packet.event_id,
    )
}

/// Sink-side union of anchor tables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SinkView {
    merged: BTreeMap<DedupKey, MergedPacket>,
}

impl SinkView {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn absorb(&mut self, table: &AnchorTable) {
        for p in table.rows() {
            let m = MergedPacket {
                anchor_id: table.anchor_id,
                packet: p.clone(),
            };
            self.merged.entry(key(&m)).or_insert(m);
        }
    }

    /// Union with another view.
    pub fn merge(&self, other: &SinkView) -> SinkView {
        let mut out = self.clone();
        for (k, m) in &other.merged {
            out.merged.entry(*k).or_insert_with(|| m.clone());
        }
        out
    }

    pub fn len(&self) -> usize {
        self.merged.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merged.is_empty()
    }

    /// Packets ordered by `rx_time`, then anchor, sensor and event id.
    pub fn packets(&self) -> Vec<&MergedPacket> {
        let mut v: Vec<_> = self.merged.values().collect();
        v.sort_by(|a, b| {
            a.packet
                .rx_time
                .total_cmp(&b.packet.rx_time)
                .then(a.anchor_id.cmp(&b.anchor_id))
                .then(a.packet.sensor_id.cmp(&b.packet.sensor_id))
                .then(a.packet.event_id.cmp(&b.packet.event_id))
        });
        v
    }

    /// Latest location stamp per sensor.
    pub fn last_known(&self) -> HashMap<u32, LastKnown> {
        let mut out: HashMap<u32, LastKnown> = HashMap::new();
        for m in self.packets() {
            out.insert(
                m.packet.sensor_id,
                LastKnown {
                    location: m.packet.location_stamp,
                    rx_time: m.packet.rx_time,
                    anchor_id: m.anchor_id,
                },
            );
        }
        out
    }

    /// One JSON object per line, in `rx_time` order.
    pub fn write_ndjson<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for m in self.packets() {
            serde_json::to_writer(&mut w, m)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn merge_tables(tables: &[AnchorTable]) -> SinkView {
    let mut view = SinkView::new();
    for t in tables {
        view.absorb(t);
    }
    view
}

/// Anchor layout: a named preset or explicit records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Layout {
    Preset(String),
    Explicit(Vec<AnchorRecord>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub anchors: Vec<Anchor>,
    /// Human-readable notes, e.g. anchors no vessel passes under.
    pub warnings: Vec<String>,
}

impl Placement {
    pub fn torso_head_fraction(&self) -> f64 {
        if self.anchors.is_empty() {
            return 0.0;
        }
        self.anchors.iter().filter(|a| a.is_torso_or_head()).count() as f64 / self.anchors.len() as f64
    }
}

pub fn preset_records(name: &str) -> Result<Vec<AnchorRecord>, AnchorError> {
    match name {
        "paper20" => parse_layout(PAPER20_JSON),
        other => Err(AnchorError::UnknownPreset(other.into())),
    }
}

/// Stacks available to `stack_ref`; always includes `default`.
pub fn builtin_stacks() -> HashMap<String, LayerStack> {
    HashMap::from([("default".to_string(), LayerStack::default_skin())])
}

fn segment_distance_2d(p: Point2<f64>, a: Point2<f64>, b: Point2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

pub fn place_anchors(
    layout: &Layout,
    stacks: &HashMap<String, LayerStack>,
    graph: &VesselGraph,
) -> Result<Placement, AnchorError> {
    let records = match layout {
        Layout::Preset(name) => preset_records(name)?,
        Layout::Explicit(r) => r.clone(),
    };
    let mut anchors = Vec::with_capacity(records.len());
    let mut warnings = Vec::new();
    for r in records {
        if anchors.iter().any(|a: &Anchor| a.id == r.id) {
            return Err(AnchorError::DuplicateId(r.id));
        }
        if !(r.patch_half_width_m > 0.0) {
            return Err(AnchorError::BadPatch(r.id));
        }
        let stack = stacks
            .get(&r.stack_ref)
            .cloned()
            .ok_or_else(|| AnchorError::UnknownStack {
                anchor: r.id,
                stack: r.stack_ref.clone(),
            })?;
        let center = Point3::from(r.center_xyz_m);
        let reach = graph
            .segments()
            .iter()
            .map(|s| segment_distance_2d(center.xy(), s.start.xy(), s.end.xy()))
            .fold(f64::INFINITY, f64::min);
        if reach > r.patch_half_width_m {
            warnings.push(format!(
                "anchor {}: nearest vessel is {:.1} mm away in the skin plane, beyond the {:.1} mm patch; it can never be visited",
                r.id,
                reach * 1e3,
                r.patch_half_width_m * 1e3
            ));
        }
        anchors.push(Anchor {
            id: r.id,
            name: r.name,
            region: r.region,
            center,
            patch_half_width: r.patch_half_width_m,
            skin_thickness_m: r.skin_thickness_m,
            stack,
            clock_offset: 0.0,
        });
    }
    Ok(Placement { anchors, warnings })
}

/// Airtime of a payload against the time spent under a patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayloadFeasibility {
    pub packet_bytes: usize,
    pub packets: usize,
    pub capacity_bps: f64,
    pub airtime_s: f64,
    pub dwell_s: f64,
    /// `dwell_s / airtime_s`; below 1 the payload does not fit.
    pub margin: f64,
}

pub const PACKET_BYTES: usize = 32;

/// Dwell for a straight crossing of the full patch diameter at `speed`.
pub fn payload_feasibility(packets: usize, capacity_bps: f64, patch_half_width: f64, speed: f64) -> PayloadFeasibility {
    let airtime_s = (packets * PACKET_BYTES * 8) as f64 / capacity_bps;
    let dwell_s = 2.0 * patch_half_width / speed;
    PayloadFeasibility {
        packet_bytes: PACKET_BYTES,
        packets,
        capacity_bps,
        airtime_s,
        dwell_s,
        margin: dwell_s / airtime_s,
    }
}
