//! Whole-run invariants of the scenario engine over a seed sweep.

use std::collections::BTreeMap;

use hetnet_core::engine::{CellPolicy, EventKind};
use hetnet_core::handover::Decider;
use hetnet_core::*;

fn sweep(base: &ScenarioConfig, seeds: std::ops::Range<u64>) -> Vec<RunOutput> {
    let cfgs: Vec<_> = seeds.map(|s| ScenarioConfig { seed: Some(s), ..base.clone() }).collect();
    run_sweep(&cfgs).into_iter().map(Result::unwrap).collect()
}

fn check_log(cfg: &ScenarioConfig, run: &RunOutput) {
    let ev = &run.events;
    assert!(ev.windows(2).all(|w| w[0].t_s <= w[1].t_s), "timestamps go backwards");
    assert!(ev.iter().all(|e| e.t_s > 0.0 && e.t_s <= cfg.sim_time_s + 1e-9));

    let per_kind = |k| ev.iter().filter(|e| e.event == k).count();
    let ue_ticks = cfg.n_ues * cfg.n_ticks();
    assert_eq!(per_kind(EventKind::Measure), ue_ticks);
    assert_eq!(per_kind(EventKind::Decide), ue_ticks);

    // The serving cell on every row follows the handovers executed so far.
    let mut serving: BTreeMap<u32, CellId> = BTreeMap::new();
    for e in ev.iter().filter(|e| e.event != EventKind::TempGrant) {
        let s = e.serving.expect("serving recorded").id;
        if let Some(prev) = serving.get(&e.ue_id.0) {
            assert_eq!(*prev, s, "UE {} at t={} changed cell without a handover", e.ue_id.0, e.t_s);
        }
        if e.event == EventKind::HandoverExec {
            let to = e.target.expect("handover target").id;
            assert_ne!(to, s);
            serving.insert(e.ue_id.0, to);
        } else {
            serving.insert(e.ue_id.0, s);
        }
    }

    let m = &run.metrics;
    assert_eq!(summarize_metrics(ev, &MetricsParams::of(cfg)).unwrap(), *m);
    assert_eq!(m.handover_count as usize, per_kind(EventKind::HandoverExec));
    assert!(m.pingpong_count <= m.handover_count);
    assert_eq!(HandoverScenario::ALL.iter().map(|&s| m.handovers(s)).sum::<u64>(), m.handover_count);
    assert!((0.0..=1.0).contains(&m.micro_time_fraction));
}

#[test]
fn default_scenario_over_ten_seeds() {
    let cfg = ScenarioConfig::default();
    for run in sweep(&cfg, 0..10) {
        check_log(&cfg, &run);
        assert!(run.metrics.handover_count >= 1, "seed {} never handed over", run.seed);
        // Open cells never need temporary access.
        assert_eq!(run.metrics.temp_access_requests, 0);
    }
}

#[test]
fn fuzzy_decider_logs_values_in_unit_interval() {
    let mut cfg = ScenarioConfig { sim_time_s: 20.0, ..Default::default() };
    cfg.handover.decider = Decider::Fuzzy;
    for run in sweep(&cfg, 0..3) {
        check_log(&cfg, &run);
        let values: Vec<f64> = run
            .events
            .iter()
            .filter(|e| e.event == EventKind::Decide)
            .filter_map(|e| e.decision_value)
            .collect();
        assert!(!values.is_empty());
        assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn closed_cells_without_grants_are_never_entered() {
    let mut cfg = ScenarioConfig { sim_time_s: 50.0, ..Default::default() };
    cfg.auth.default_open = false;
    for run in sweep(&cfg, 0..4) {
        check_log(&cfg, &run);
        let m = &run.metrics;
        assert_eq!(m.handovers(HandoverScenario::MacroLteu) + m.handovers(HandoverScenario::LteuLteu), 0);
        assert_eq!(m.temp_access_grants, 0);
        assert_eq!(m.micro_time_fraction, 0.0);
    }
}

#[test]
fn auto_granted_entries_follow_their_grants() {
    let mut cfg = ScenarioConfig { sim_time_s: 60.0, ..Default::default() };
    cfg.auth.default_open = false;
    for id in cfg.micro_ids() {
        cfg.auth.cells.insert(id, CellPolicy { auto_grant: true, grant_delay_s: 1.0, ..CellPolicy::closed(u32::MAX - 1) });
    }
    let mut entries = 0;
    for run in sweep(&cfg, 0..4) {
        check_log(&cfg, &run);
        let ev = &run.events;
        for (k, exec) in ev.iter().enumerate().filter(|(_, e)| e.event == EventKind::HandoverExec) {
            let to = exec.target.unwrap();
            if to.kind != CellKind::Micro {
                continue;
            }
            entries += 1;
            let earlier = &ev[..k];
            let grant = earlier
                .iter()
                .rposition(|e| e.event == EventKind::TempGrant && e.ue_id == exec.ue_id && e.target == Some(to))
                .unwrap_or_else(|| panic!("UE {} entered {to} without a grant", exec.ue_id.0));
            let request = earlier[..grant]
                .iter()
                .rposition(|e| e.event == EventKind::TempRequest && e.ue_id == exec.ue_id && e.target == Some(to))
                .expect("grant without request");
            assert!(earlier[grant].t_s - earlier[request].t_s >= 1.0 - 1e-9);
            assert!(earlier[grant].t_s < exec.t_s);
        }
        assert!(run.metrics.temp_access_grants <= run.metrics.temp_access_requests);
    }
    assert!(entries > 0, "no UE entered a microcell");
}

#[test]
fn zero_decorrelation_distance_and_zero_shadowing_still_run() {
    let mut cfg = ScenarioConfig { sim_time_s: 5.0, n_ues: 5, ..Default::default() };
    cfg.radio.shadowing_decorrelation_m = 0.0;
    check_log(&cfg, &run_scenario(&cfg).unwrap());
    cfg.radio.shadowing_std_db = 0.0;
    check_log(&cfg, &run_scenario(&cfg).unwrap());
}
