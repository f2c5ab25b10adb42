use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::Point3;
use nanoloc_core::anchor::{merge_tables, AnchorTable, Reading, SensorPacket};
use nanoloc_core::channel::{path_loss_stack, sweep};
use nanoloc_core::imu::{predict, EstimatorState, ImuSpec, ImuSynth};
use nanoloc_core::vasculature::{stream_rng, TrajectoryIter, VesselGraph};
use nanoloc_core::{ChannelConfig, LayerStack, LinkParams, TissueLibrary};

fn channel(c: &mut Criterion) {
    let lib = TissueLibrary::builtin();
    let blood = lib.get("blood").unwrap().clone();
    let stack = LayerStack::default_skin();
    let params = LinkParams::default();
    let cfg = ChannelConfig::default();
    c.bench_function("permittivity_blood", |b| {
        b.iter(|| blood.permittivity(black_box(0.5e12)).unwrap())
    });
    c.bench_function("path_loss_stack", |b| {
        b.iter(|| path_loss_stack(&stack, black_box(0.5e12), &cfg).unwrap())
    });
    let freqs = params.subband_centers();
    c.bench_function("sweep_default_band", |b| {
        b.iter(|| sweep(&stack, &params, &freqs, &cfg).unwrap())
    });
}

fn motion(c: &mut Criterion) {
    let g = VesselGraph::simplified_body();
    c.bench_function("trajectory_10s", |b| {
        b.iter(|| TrajectoryIter::new(&g, 52, 10.0, 0.01, black_box(3)).unwrap().count())
    });

    let spec = ImuSpec::default();
    let states: Vec<_> = TrajectoryIter::new(&g, 52, 10.0, spec.dt(), 0).unwrap().collect();
    c.bench_function("eskf_predict_10s", |b| {
        b.iter(|| {
            let mut est = EstimatorState::from_truth(&states[0]);
            let mut synth = ImuSynth::new();
            let mut rng = stream_rng(0, 1);
            for w in states.windows(2) {
                est = predict(&est, &synth.sample(&w[0], &w[1], &spec, &mut rng), &spec, spec.dt());
            }
            est
        })
    });
}

fn sink(c: &mut Criterion) {
    let tables: Vec<AnchorTable> = (0..20)
        .map(|a| {
            let mut t = AnchorTable::new(a);
            for k in 0..200u32 {
                t.push(SensorPacket {
                    sensor_id: k % 5,
                    reading: Reading::new(0.0, "none"),
                    location_stamp: Point3::new(k as f64, 0.0, 0.0),
                    event_id: Some(k % 40),
                    rx_time: k as f64,
                });
            }
            t
        })
        .collect();
    c.bench_function("sink_merge_20x200", |b| b.iter(|| merge_tables(black_box(&tables))));
}

criterion_group!(benches, channel, motion, sink);
criterion_main!(benches);
