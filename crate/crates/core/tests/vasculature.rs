use std::collections::HashSet;

use nanoloc_core::vasculature::{
    load_graph, step_with, stream_rng, trajectory, AnomalyEvent, EventSensor, GraphDocument, GraphError, VesselGraph,
};
use proptest::prelude::*;

fn doc(json: &str) -> GraphDocument {
    GraphDocument::from_json_str(json).unwrap()
}

/// Segment 1 splits 70/30 into 2 and 3, both of which return to 1.
const SPLIT: &str = r#"{
  "segments": [
    {"id": 1, "kind": "artery", "start_xyz_m": [0, 0, -0.05], "end_xyz_m": [0.1, 0, -0.05],
     "flow_speed_mps": 0.1, "downstream": [{"id": 2, "p": 0.7}, {"id": 3, "p": 0.3}]},
    {"id": 2, "kind": "vein", "start_xyz_m": [0.1, 0, -0.05], "end_xyz_m": [0, 0, -0.05],
     "flow_speed_mps": 0.1, "downstream": [{"id": 1, "p": 1.0}]},
    {"id": 3, "kind": "vein", "start_xyz_m": [0.1, 0, -0.05], "end_xyz_m": [0, 0.05, -0.05],
     "flow_speed_mps": 0.05, "downstream": [{"id": 1, "p": 1.0}]}
  ],
  "injection_points": [1]
}"#;

#[test]
fn junction_split_matches_declared_probabilities() {
    let g = VesselGraph::from_json_str(SPLIT).unwrap();
    let start = g.state_at(1, 0.0999, 0.0).unwrap();
    let mut rng = stream_rng(11, 0);
    let n = 100_000;
    let mut to_2 = 0;
    for _ in 0..n {
        let mut first = None;
        step_with(&start, &g, 0.01, &mut rng, |id| {
            first.get_or_insert(id);
        });
        if first == Some(2) {
            to_2 += 1;
        }
    }
    let frac = to_2 as f64 / n as f64;
    assert!((frac - 0.7).abs() <= 0.01, "70/30 split observed as {frac}");
}

// Length summed independently from the asset's endpoint coordinates.
#[test]
fn shipped_graph_golden() {
    let g = VesselGraph::simplified_body();
    assert_eq!(g.segments().len(), 89);
    assert!(
        (g.total_length() - 11.322_915_201_467_536).abs() < 1e-9,
        "{}",
        g.total_length()
    );
    assert!((5.0..=20.0).contains(&g.total_length()));
    assert_eq!(g.injection_points(), &[52]);
}

#[test]
fn same_seed_is_bit_identical_and_seeds_differ() {
    let g = VesselGraph::simplified_body();
    let a = trajectory(&g, 52, 200.0, 0.01, 5).unwrap();
    let b = trajectory(&g, 52, 200.0, 0.01, 5).unwrap();
    let c = trajectory(&g, 52, 200.0, 0.01, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.segment_log, c.segment_log);
}

#[test]
fn upper_body_segments_are_entered_more_than_limbs() {
    let g = VesselGraph::simplified_body();
    let t = trajectory(&g, 52, 10_000.0, 0.01, 0).unwrap();
    let counts = t.entry_counts();
    let count = |region: &str| -> Vec<usize> {
        g.segments()
            .iter()
            .filter(|s| s.region.as_deref() == Some(region))
            .map(|s| counts.get(&s.id).copied().unwrap_or(0))
            .collect()
    };
    let heart = count("heart_lung");
    let limbs: Vec<usize> = count("arm").into_iter().chain(count("leg")).collect();
    assert!(
        heart.iter().min().unwrap() > limbs.iter().max().unwrap(),
        "{heart:?} vs {limbs:?}"
    );
}

/// Time share per segment over 10 seeds against the stationary entry
/// distribution weighted by traversal time.
#[test]
fn occupancy_converges_to_embedded_chain() {
    let g = VesselGraph::simplified_body();
    let n = g.segments().len();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..100_000 {
        let mut next = vec![0.0; n];
        for (i, s) in g.segments().iter().enumerate() {
            next[i] += 0.5 * pi[i];
            for b in &s.downstream {
                next[g.segment_index(b.id).unwrap()] += 0.5 * pi[i] * b.p;
            }
        }
        pi = next;
    }
    let weighted: Vec<f64> = g
        .segments()
        .iter()
        .zip(&pi)
        .map(|(s, p)| p * s.traversal_time())
        .collect();
    let z: f64 = weighted.iter().sum();

    let mut time = vec![0usize; n];
    let mut total = 0;
    for seed in 0..10 {
        let t = trajectory(&g, 52, 20_000.0, 0.05, seed).unwrap();
        for id in &t.segment_log {
            time[g.segment_index(*id).unwrap()] += 1;
            total += 1;
        }
    }
    let tv: f64 = 0.5
        * time
            .iter()
            .zip(&weighted)
            .map(|(&c, w)| (c as f64 / total as f64 - w / z).abs())
            .sum::<f64>();
    assert!(tv <= 0.02, "occupancy TV distance {tv}");
}

#[test]
fn never_visited_branch_is_never_sensed() {
    let g = VesselGraph::simplified_body();
    let t = trajectory(&g, 52, 30.0, 0.01, 3).unwrap();
    let visited: HashSet<u32> = t.entries.iter().map(|&(_, id)| id).collect();
    let events: Vec<AnomalyEvent> = g
        .segments()
        .iter()
        .filter(|s| !visited.contains(&s.id))
        .enumerate()
        .map(|(k, s)| AnomalyEvent::on_segment(&g, k as u32, s.id, s.length() / 2.0, 0.001).unwrap())
        .collect();
    assert!(!events.is_empty());
    let mut sensor = EventSensor::new();
    for s in &t.states {
        assert!(
            sensor.sense(&s.position, &events).is_empty(),
            "sensed at t = {}",
            s.sim_time
        );
    }
}

#[test]
fn dangling_and_unreachable_graphs_are_rejected() {
    let dangling = SPLIT.replace(r#"{"id": 3, "p": 0.3}"#, r#"{"id": 9, "p": 0.3}"#);
    assert!(matches!(
        load_graph(&doc(&dangling)),
        Err(GraphError::DanglingDownstream { segment: 1, target: 9 })
    ));
    let off = SPLIT.replace(r#""p": 0.3"#, r#""p": 0.2"#);
    assert!(matches!(
        load_graph(&doc(&off)),
        Err(GraphError::ProbabilitySum { segment: 1, .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Distance advanced along the centerline equals speed times time on a
    /// uniform-speed loop, however the steps fall across junctions.
    #[test]
    fn arc_length_is_conserved(
        la in 0.01f64..0.5,
        speed in 0.01f64..0.3,
        dt in 0.001f64..0.5,
        steps in 1usize..400,
    ) {
        let json = format!(r#"{{
          "segments": [
            {{"id": 1, "kind": "artery", "start_xyz_m": [0, 0, -0.05], "end_xyz_m": [{la}, 0, -0.05],
              "flow_speed_mps": {speed}, "downstream": [{{"id": 2, "p": 1.0}}]}},
            {{"id": 2, "kind": "vein", "start_xyz_m": [{la}, 0, -0.05], "end_xyz_m": [0, 0, -0.05],
              "flow_speed_mps": {speed}, "downstream": [{{"id": 1, "p": 1.0}}]}}
          ],
          "injection_points": [1]
        }}"#);
        let g = VesselGraph::from_json_str(&json).unwrap();
        let t = trajectory(&g, 1, dt * steps as f64, dt, 0).unwrap();
        let last = t.states.last().unwrap();
        let mut travelled = last.arc_offset;
        for &(_, id) in t.entries.iter().skip(1) {
            travelled += g.segment(if id == 1 { 2 } else { 1 }).unwrap().length();
        }
        let expected = speed * dt * (t.states.len() - 1) as f64;
        prop_assert!((travelled - expected).abs() <= 1e-9 * (1.0 + expected), "{travelled} vs {expected}");
    }

    #[test]
    fn graph_json_round_trips_bit_exact(
        coords in prop::collection::vec(-1.0f64..1.0, 6),
        speed in 1e-3f64..1.0,
    ) {
        let json = format!(r#"{{
          "segments": [
            {{"id": 1, "kind": "artery", "start_xyz_m": [{}, {}, {}], "end_xyz_m": [{}, {}, {}],
              "flow_speed_mps": {speed:?}, "downstream": [{{"id": 1, "p": 1.0}}]}}
          ],
          "injection_points": [1]
        }}"#, coords[0], coords[1], coords[2], coords[3], coords[4], coords[5]);
        let d = doc(&json);
        let back = GraphDocument::from_json_str(&serde_json::to_string(&d).unwrap()).unwrap();
        prop_assert_eq!(&d, &back);
        for (a, b) in d.segments[0].start_xyz_m.iter().zip(&back.segments[0].start_xyz_m) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
