use nalgebra::Point3;
use nanoloc_core::anchor::{
    builtin_stacks, merge_tables, place_anchors, AnchorRecord, AnchorTable, CommGate, Layout, LinkGate, Reading,
    SensorPacket, SinkView, VisitTracker,
};
use nanoloc_core::experiments::localize::{run_localization, LocalizationSetup};
use nanoloc_core::imu::{ImuSpec, ResetModel, VesselConstraint};
use nanoloc_core::vasculature::{scatter_events, stream_rng, TrajectoryIter, VesselGraph};
use proptest::prelude::*;

fn record(id: u32, center: [f64; 3]) -> AnchorRecord {
    AnchorRecord {
        id,
        name: None,
        region: None,
        center_xyz_m: center,
        patch_half_width_m: 0.025,
        skin_thickness_m: 0.0025,
        stack_ref: "default".into(),
    }
}

#[test]
fn brachial_anchor_is_visited_within_the_first_loop() {
    let g = VesselGraph::simplified_body();
    let seg = g.find_by_name("left brachial artery").unwrap();
    let mid = seg.point_at(seg.length() / 2.0);
    let placement = place_anchors(
        &Layout::Explicit(vec![record(1, [mid.x, mid.y, 0.0])]),
        &builtin_stacks(),
        &g,
    )
    .unwrap();
    assert!(placement.warnings.is_empty());
    let gate = CommGate::new(placement.anchors, &LinkGate::geometric_only()).unwrap();
    for seed in 0..10 {
        let mut it = TrajectoryIter::new(&g, seg.id, 1_000.0, 0.01, seed).unwrap();
        let mut tracker = VisitTracker::new();
        let mut visited = false;
        while let Some(s) = it.next() {
            if it.entered().contains(&seg.id) {
                break;
            }
            visited |= tracker.observe(&gate, &s.position).is_some();
        }
        assert!(visited, "seed {seed}");
    }
}

#[test]
fn empty_layout_runs_without_resets() {
    let g = VesselGraph::simplified_body();
    let placement = place_anchors(&Layout::Explicit(vec![]), &builtin_stacks(), &g).unwrap();
    assert!(placement.anchors.is_empty());
    let gate = CommGate::new(placement.anchors, &LinkGate::default()).unwrap();
    let setup = LocalizationSetup {
        graph: &g,
        gate: &gate,
        injection_segment: 52,
        duration_s: 60.0,
        reset: ResetModel::default(),
        constraint: VesselConstraint::default(),
        sink_period_s: 10.0,
        sensor_id: 1,
    };
    let events = scatter_events(&g, 100, 0.001, &mut stream_rng(0, 3));
    let run = run_localization(&setup, &ImuSpec::default(), &events, 0).unwrap();
    assert!(run.resets.is_empty());
    assert!(run.sink.is_empty());
}

#[test]
fn paper20_layout_visits_every_anchor_over_a_long_run() {
    let g = VesselGraph::simplified_body();
    let placement = place_anchors(&Layout::Preset("paper20".into()), &builtin_stacks(), &g).unwrap();
    let gate = CommGate::new(placement.anchors, &LinkGate::geometric_only()).unwrap();
    let mut seen = vec![false; gate.anchors().len()];
    let mut tracker = VisitTracker::new();
    for s in TrajectoryIter::new(&g, 52, 5_000.0, 0.01, 1).unwrap() {
        if let Some(i) = tracker.observe(&gate, &s.position) {
            seen[i] = true;
        }
    }
    assert!(seen.iter().all(|&v| v), "{seen:?}");
}

fn table(anchor: u32, packets: &[(u32, f64, Option<u32>)]) -> AnchorTable {
    let mut t = AnchorTable::new(anchor);
    for &(sensor, time, event) in packets {
        t.push(SensorPacket {
            sensor_id: sensor,
            reading: Reading::new(0.0, "none"),
            location_stamp: Point3::new(time, 0.0, 0.0),
            event_id: event,
            rx_time: time,
        });
    }
    t
}

fn arb_table() -> impl Strategy<Value = AnchorTable> {
    (
        0u32..4,
        prop::collection::vec((0u32..3, 0u32..50, prop::option::of(0u32..5)), 0..12),
    )
        .prop_map(|(a, ps)| {
            let ps: Vec<_> = ps.into_iter().map(|(s, t, e)| (s, t as f64, e)).collect();
            table(a, &ps)
        })
}

proptest! {
    #[test]
    fn sink_merge_is_a_semilattice(a in arb_table(), b in arb_table(), c in arb_table()) {
        let (va, vb, vc) = (merge_tables(std::slice::from_ref(&a)), merge_tables(std::slice::from_ref(&b)), merge_tables(&[c]));
        prop_assert_eq!(va.merge(&vb), vb.merge(&va));
        prop_assert_eq!(va.merge(&vb).merge(&vc), va.merge(&vb.merge(&vc)));
        prop_assert_eq!(va.merge(&va), va.clone());
        prop_assert_eq!(merge_tables(&[a.clone(), a]), va);
        prop_assert_eq!(SinkView::new().merge(&vb), vb);
    }
}
