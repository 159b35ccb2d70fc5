use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use hetnet_core::coexistence::{AccessMode, CoexistConfig, NodeSpec};
use hetnet_core::handover::{CandidateMeasurement, ServingMeasurement};
use hetnet_core::topology::TrafficClass;
use hetnet_core::*;

fn fuzzy(c: &mut Criterion) {
    let rb = default_rule_base();
    let inputs = HandoffInputs {
        sinr_margin_db: 0.0,
        velocity_kmh: 5.0,
        authorized: true,
        latency_ms: 10.0,
        battery_hours: 8.0,
        load_mbps: 10.0,
    };
    c.bench_function("fuzzy_decide_1001", |b| b.iter(|| decide_handoff(&rb, black_box(&inputs), 0.5).unwrap()));
}

fn crisp(c: &mut Criterion) {
    let candidates = (1..64)
        .map(|i| CandidateMeasurement {
            cell: CellId(i),
            kind: if i < 4 { CellKind::Macro } else { CellKind::Micro },
            sinr_db: (i as f64 * 0.37).sin() * 15.0,
            rx_dbm: -80.0,
            load_mbps: 10.0,
            authorized: i % 3 != 0,
            position: Point { x: i as f64 * 40.0, y: 0.0 },
        })
        .collect();
    let m = Measurement {
        serving: ServingMeasurement { cell: CellId(0), kind: CellKind::Macro, sinr_db: 2.0 },
        candidates,
        position: Point { x: 0.0, y: 0.0 },
        velocity_kmh: (20.0, 0.0),
        speed_kmh: 20.0,
        traffic: TrafficClass::RealTime,
        battery_hours: 5.0,
    };
    let cfg = HandoverConfig::default();
    c.bench_function("crisp_decide_63_candidates", |b| b.iter(|| evaluate_crisp_handover(black_box(&m), &cfg)));
}

fn coexistence(c: &mut Criterion) {
    let mut g = c.benchmark_group("coexistence_10k_slots");
    for mode in AccessMode::ALL {
        let cfg = CoexistConfig {
            mode,
            nodes: vec![NodeSpec::gateway(1), NodeSpec::uplink(2, 1), NodeSpec::wifi(3), NodeSpec::wifi(4)],
            ..Default::default()
        };
        g.bench_function(mode.as_str(), |b| b.iter(|| run_coexistence(&cfg, black_box(7)).unwrap()));
    }
    g.finish();
}

fn scenario(c: &mut Criterion) {
    let cfg = ScenarioConfig { seed: Some(1), sim_time_s: 10.0, ..Default::default() };
    let mut g = c.benchmark_group("scenario");
    g.sample_size(10);
    g.bench_function("default_10s", |b| b.iter(|| run_scenario(black_box(&cfg)).unwrap()));
    g.finish();
}

criterion_group!(benches, fuzzy, crisp, coexistence, scenario);
criterion_main!(benches);
