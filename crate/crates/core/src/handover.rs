//! Handover decisions (crisp algorithm and fuzzy decider) and the per-UE
//! session state machine that turns decisions into executed handovers.

use std::fmt;

use log::warn;

use crate::fuzzy::{self, HandoffInputs, RuleBase};
use crate::radio::CellKind;
use crate::topology::{predict_target_cell, CellId, Point, TrafficClass, DEFAULT_PREDICTION_HORIZON_S};

pub const DEFAULT_HHM_DB: f64 = 3.0;
pub const DEFAULT_VELOCITY_GATE_KMH: f64 = 10.0;
pub const DEFAULT_REACTIVE_THRESHOLD_DBM: f64 = -95.0;
pub const DEFAULT_PINGPONG_WINDOW_S: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decider {
    Crisp,
    Fuzzy,
}

impl Decider {
    pub fn as_str(&self) -> &'static str {
        match self {
            Decider::Crisp => "crisp",
            Decider::Fuzzy => "fuzzy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandoverConfig {
    /// Handover hysteresis margin, dB.
    pub hhm_db: f64,
    pub velocity_gate_kmh: f64,
    pub reactive_threshold_dbm: f64,
    pub decider: Decider,
    pub fuzzy_threshold: f64,
    pub pingpong_window_s: f64,
    pub prediction_horizon_s: f64,
}

impl Default for HandoverConfig {
    fn default() -> Self {
        HandoverConfig {
            hhm_db: DEFAULT_HHM_DB,
            velocity_gate_kmh: DEFAULT_VELOCITY_GATE_KMH,
            reactive_threshold_dbm: DEFAULT_REACTIVE_THRESHOLD_DBM,
            decider: Decider::Crisp,
            fuzzy_threshold: fuzzy::DEFAULT_THRESHOLD,
            pingpong_window_s: DEFAULT_PINGPONG_WINDOW_S,
            prediction_horizon_s: DEFAULT_PREDICTION_HORIZON_S,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServingMeasurement {
    pub cell: CellId,
    pub kind: CellKind,
    pub sinr_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateMeasurement {
    pub cell: CellId,
    pub kind: CellKind,
    pub sinr_db: f64,
    pub rx_dbm: f64,
    pub load_mbps: f64,
    /// Whether the UE may use this cell right now.
    pub authorized: bool,
    pub position: Point,
}

/// Everything one decision looks at. The serving cell is never a candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub serving: ServingMeasurement,
    pub candidates: Vec<CandidateMeasurement>,
    pub position: Point,
    pub velocity_kmh: (f64, f64),
    pub speed_kmh: f64,
    pub traffic: TrafficClass,
    pub battery_hours: f64,
}

impl Measurement {
    /// Highest-SINR candidate of `kind` (any kind when `None`) satisfying
    /// `keep`; ties go to the lowest cell id.
    fn best_where(&self, kind: Option<CellKind>, keep: impl Fn(&CandidateMeasurement) -> bool) -> Option<&CandidateMeasurement> {
        self.candidates
            .iter()
            .filter(|c| kind.is_none_or(|k| c.kind == k) && keep(c))
            .min_by(|a, b| b.sinr_db.total_cmp(&a.sinr_db).then(a.cell.cmp(&b.cell)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    None,
    Proactive(CellId),
    ReactivePending(CellId),
    RequestTempAccess(CellId),
}

impl Verdict {
    pub fn target(&self) -> Option<CellId> {
        match *self {
            Verdict::None => None,
            Verdict::Proactive(c) | Verdict::ReactivePending(c) | Verdict::RequestTempAccess(c) => Some(c),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::None => "none",
            Verdict::Proactive(_) => "proactive",
            Verdict::ReactivePending(_) => "reactive_pending",
            Verdict::RequestTempAccess(_) => "request_temp_access",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HandoverScenario {
    MacroMacro,
    MacroLteu,
    LteuLteu,
    LteuMacro,
    NotApplicable,
}

impl HandoverScenario {
    pub const ALL: [HandoverScenario; 4] =
        [HandoverScenario::MacroMacro, HandoverScenario::MacroLteu, HandoverScenario::LteuLteu, HandoverScenario::LteuMacro];

    pub fn between(from: CellKind, to: CellKind) -> Self {
        match (from, to) {
            (CellKind::Macro, CellKind::Macro) => HandoverScenario::MacroMacro,
            (CellKind::Macro, CellKind::Micro) => HandoverScenario::MacroLteu,
            (CellKind::Micro, CellKind::Micro) => HandoverScenario::LteuLteu,
            (CellKind::Micro, CellKind::Macro) => HandoverScenario::LteuMacro,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            HandoverScenario::MacroMacro => "macro_macro",
            HandoverScenario::MacroLteu => "macro_lteu",
            HandoverScenario::LteuLteu => "lteu_lteu",
            HandoverScenario::LteuMacro => "lteu_macro",
            HandoverScenario::NotApplicable => "n/a",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().chain([HandoverScenario::NotApplicable]).find(|x| x.as_str() == s)
    }
}

impl fmt::Display for HandoverScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandoverDecision {
    pub verdict: Verdict,
    pub scenario: HandoverScenario,
    /// Fuzzy decision value, when the fuzzy decider produced this decision.
    pub decision_value: Option<f64>,
}

impl HandoverDecision {
    pub fn none() -> Self {
        HandoverDecision { verdict: Verdict::None, scenario: HandoverScenario::NotApplicable, decision_value: None }
    }

    fn crisp(verdict: Verdict, scenario: HandoverScenario) -> Self {
        HandoverDecision { verdict, scenario, decision_value: None }
    }
}

fn by_traffic(traffic: TrafficClass, target: CellId) -> Verdict {
    match traffic {
        TrafficClass::RealTime => Verdict::Proactive(target),
        TrafficClass::NonRealTime => Verdict::ReactivePending(target),
    }
}

/// The four-branch crisp algorithm, branches tried in order, first trigger
/// wins:
///
/// 1. macro -> macro: target SINR > serving + HHM. Above the velocity gate the
///    target is the triggering macro closest to the UE's projected position;
///    real-time traffic is proactive, the rest reactive.
/// 2. macro -> LTE-U: same trigger. Above the gate no handover; otherwise
///    authorized users go proactive/reactive, others request temporary access.
/// 3. LTE-U -> LTE-U: trigger against the serving microcell, then as 2 without
///    the velocity gate.
/// 4. LTE-U -> macro: trigger, then proactive/reactive by traffic class.
///
/// `speed > gate` is strict, so a UE at exactly the gate takes the low-speed
/// path. The load input is not consulted.
pub fn evaluate_crisp_handover(m: &Measurement, cfg: &HandoverConfig) -> HandoverDecision {
    let threshold = m.serving.sinr_db + cfg.hhm_db;
    let triggered = |c: &CandidateMeasurement| c.sinr_db > threshold;
    let fast = m.speed_kmh > cfg.velocity_gate_kmh;

    match m.serving.kind {
        CellKind::Macro => {
            if let Some(best) = m.best_where(Some(CellKind::Macro), triggered) {
                let target = if fast {
                    let cands: Vec<(CellId, Point)> = m
                        .candidates
                        .iter()
                        .filter(|c| c.kind == CellKind::Macro && triggered(c))
                        .map(|c| (c.cell, c.position))
                        .collect();
                    predict_target_cell(m.position, m.velocity_kmh, &cands, cfg.prediction_horizon_s)
                        .unwrap_or(best.cell)
                } else {
                    best.cell
                };
                return HandoverDecision::crisp(by_traffic(m.traffic, target), HandoverScenario::MacroMacro);
            }
            if let Some(best) = m.best_where(Some(CellKind::Micro), triggered) {
                let verdict = if fast {
                    Verdict::None
                } else if best.authorized {
                    by_traffic(m.traffic, best.cell)
                } else {
                    Verdict::RequestTempAccess(best.cell)
                };
                return HandoverDecision::crisp(verdict, HandoverScenario::MacroLteu);
            }
        }
        CellKind::Micro => {
            if let Some(best) = m.best_where(Some(CellKind::Micro), triggered) {
                let verdict = if best.authorized {
                    by_traffic(m.traffic, best.cell)
                } else {
                    Verdict::RequestTempAccess(best.cell)
                };
                return HandoverDecision::crisp(verdict, HandoverScenario::LteuLteu);
            }
            if let Some(best) = m.best_where(Some(CellKind::Macro), triggered) {
                return HandoverDecision::crisp(by_traffic(m.traffic, best.cell), HandoverScenario::LteuMacro);
            }
        }
    }
    HandoverDecision::none()
}

/// Six-input vector for the fuzzy decider toward `target`.
pub fn fuzzy_inputs(m: &Measurement, target: &CandidateMeasurement, cfg: &HandoverConfig) -> HandoffInputs {
    HandoffInputs {
        sinr_margin_db: target.sinr_db - m.serving.sinr_db - cfg.hhm_db,
        velocity_kmh: m.speed_kmh,
        authorized: target.authorized,
        latency_ms: match m.traffic {
            TrafficClass::RealTime => fuzzy::REAL_TIME_LATENCY_MS,
            TrafficClass::NonRealTime => fuzzy::NON_REAL_TIME_LATENCY_MS,
        },
        battery_hours: m.battery_hours,
        load_mbps: target.load_mbps,
    }
}

/// Fuzzy decider on the strongest candidate. A recommendation is refined like
/// the crisp path: unauthorized microcells need temporary access, otherwise
/// the traffic class picks proactive or reactive.
pub fn evaluate_fuzzy_handover(m: &Measurement, rb: &RuleBase, cfg: &HandoverConfig) -> HandoverDecision {
    let Some(best) = m.best_where(None, |_| true) else {
        return HandoverDecision::none();
    };
    let inputs = fuzzy_inputs(m, best, cfg);
    let value = match fuzzy::decide_handoff(rb, &inputs, cfg.fuzzy_threshold) {
        Ok(v) => v,
        Err(e) => {
            warn!("fuzzy decider failed for serving cell {}: {e}", m.serving.cell);
            return HandoverDecision::none();
        }
    };
    if !value.recommend {
        return HandoverDecision { decision_value: Some(value.value), ..HandoverDecision::none() };
    }
    let verdict = if best.kind == CellKind::Micro && !best.authorized {
        Verdict::RequestTempAccess(best.cell)
    } else {
        by_traffic(m.traffic, best.cell)
    };
    HandoverDecision {
        verdict,
        scenario: HandoverScenario::between(m.serving.kind, best.kind),
        decision_value: Some(value.value),
    }
}

pub fn evaluate_handover(m: &Measurement, rb: &RuleBase, cfg: &HandoverConfig) -> HandoverDecision {
    match cfg.decider {
        Decider::Crisp => evaluate_crisp_handover(m, cfg),
        Decider::Fuzzy => evaluate_fuzzy_handover(m, rb, cfg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendingReactive {
    pub target: CellId,
    pub armed_at_s: f64,
    pub scenario: HandoverScenario,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UeSessionState {
    pub pending_reactive: Option<PendingReactive>,
    pub last_handover_s: Option<f64>,
    /// Cell served before the most recent handover.
    pub previous_cell: Option<CellId>,
    pub handover_count: u64,
    pub pingpong_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Execution {
    pub from: CellId,
    pub to: CellId,
    pub scenario: HandoverScenario,
    pub pingpong: bool,
}

impl UeSessionState {
    /// Applies one decision at time `t_s`.
    ///
    /// Proactive verdicts execute at once. A reactive verdict arms (or keeps)
    /// a pending handover that executes once `rx_dbm(target)` reaches the
    /// reactive threshold; a later decision naming another target cancels it.
    pub fn advance(
        &mut self,
        serving: CellId,
        decision: &HandoverDecision,
        rx_dbm: impl Fn(CellId) -> Option<f64>,
        t_s: f64,
        cfg: &HandoverConfig,
    ) -> Option<Execution> {
        if let (Some(p), Some(target)) = (self.pending_reactive, decision.verdict.target()) {
            if p.target != target {
                self.pending_reactive = None;
            }
        }
        if self.pending_reactive.is_some_and(|p| p.target == serving) {
            self.pending_reactive = None;
        }
        match decision.verdict {
            Verdict::Proactive(target) => return Some(self.execute(serving, target, decision.scenario, t_s, cfg)),
            Verdict::ReactivePending(target) => {
                if self.pending_reactive.is_none() {
                    self.pending_reactive =
                        Some(PendingReactive { target, armed_at_s: t_s, scenario: decision.scenario });
                }
            }
            Verdict::None | Verdict::RequestTempAccess(_) => {}
        }
        let pending = self.pending_reactive?;
        match rx_dbm(pending.target) {
            Some(rx) if rx >= cfg.reactive_threshold_dbm => {
                Some(self.execute(serving, pending.target, pending.scenario, t_s, cfg))
            }
            _ => None,
        }
    }

    fn execute(
        &mut self,
        from: CellId,
        to: CellId,
        scenario: HandoverScenario,
        t_s: f64,
        cfg: &HandoverConfig,
    ) -> Execution {
        let pingpong = self.previous_cell == Some(to)
            && self.last_handover_s.is_some_and(|last| t_s - last <= cfg.pingpong_window_s);
        if pingpong {
            self.pingpong_count += 1;
        }
        self.handover_count += 1;
        self.previous_cell = Some(from);
        self.last_handover_s = Some(t_s);
        self.pending_reactive = None;
        Execution { from, to, scenario, pingpong }
    }
}

/// Free-function form of [`UeSessionState::advance`].
pub fn advance_session(
    state: &mut UeSessionState,
    serving: CellId,
    decision: &HandoverDecision,
    rx_dbm: impl Fn(CellId) -> Option<f64>,
    t_s: f64,
    cfg: &HandoverConfig,
) -> Option<Execution> {
    state.advance(serving, decision, rx_dbm, t_s, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzzy::{default_rule_base, LinguisticVariable, MembershipFunction};

    const SERVING: CellId = CellId(0);
    const MACRO_B: CellId = CellId(1);
    const MICRO: CellId = CellId(10);

    fn meas(serving_kind: CellKind, cands: Vec<(CellId, CellKind, f64, bool)>, speed: f64, rt: bool) -> Measurement {
        Measurement {
            serving: ServingMeasurement { cell: SERVING, kind: serving_kind, sinr_db: 10.0 },
            candidates: cands
                .into_iter()
                .map(|(cell, kind, sinr_db, authorized)| CandidateMeasurement {
                    cell,
                    kind,
                    sinr_db,
                    rx_dbm: -80.0,
                    load_mbps: 10.0,
                    authorized,
                    position: Point::new(cell.0 as f64 * 1000.0, 0.0),
                })
                .collect(),
            position: Point::new(0.0, 0.0),
            velocity_kmh: (speed, 0.0),
            speed_kmh: speed,
            traffic: if rt { TrafficClass::RealTime } else { TrafficClass::NonRealTime },
            battery_hours: 8.0,
        }
    }

    fn cfg() -> HandoverConfig {
        HandoverConfig::default()
    }

    #[test]
    fn strict_margin_boundary() {
        let m = meas(CellKind::Macro, vec![(MACRO_B, CellKind::Macro, 10.0 + DEFAULT_HHM_DB, true)], 5.0, true);
        assert_eq!(evaluate_crisp_handover(&m, &cfg()).verdict, Verdict::None);
    }

    #[test]
    fn macro_to_micro_velocity_gate() {
        let m = meas(CellKind::Macro, vec![(MICRO, CellKind::Micro, 20.0, true)], 15.0, true);
        let d = evaluate_crisp_handover(&m, &cfg());
        assert_eq!(d.verdict, Verdict::None);
        assert_eq!(d.scenario, HandoverScenario::MacroLteu);

        let m = meas(CellKind::Macro, vec![(MICRO, CellKind::Micro, 20.0, true)], 5.0, true);
        assert_eq!(evaluate_crisp_handover(&m, &cfg()).verdict, Verdict::Proactive(MICRO));

        let m = meas(CellKind::Macro, vec![(MICRO, CellKind::Micro, 20.0, false)], 5.0, true);
        assert_eq!(evaluate_crisp_handover(&m, &cfg()).verdict, Verdict::RequestTempAccess(MICRO));

        // at the gate exactly, the low-speed path is taken
        let m = meas(CellKind::Macro, vec![(MICRO, CellKind::Micro, 20.0, true)], 10.0, false);
        assert_eq!(evaluate_crisp_handover(&m, &cfg()).verdict, Verdict::ReactivePending(MICRO));
    }

    #[test]
    fn micro_to_macro_is_reactive_for_data() {
        let m = meas(CellKind::Micro, vec![(MACRO_B, CellKind::Macro, 20.0, true)], 50.0, false);
        let d = evaluate_crisp_handover(&m, &cfg());
        assert_eq!(d.verdict, Verdict::ReactivePending(MACRO_B));
        assert_eq!(d.scenario, HandoverScenario::LteuMacro);
    }

    #[test]
    fn macro_macro_wins_over_micro_and_uses_prediction_when_fast() {
        let far = CellId(3);
        let m = meas(
            CellKind::Macro,
            vec![(MICRO, CellKind::Micro, 30.0, true), (far, CellKind::Macro, 25.0, true), (MACRO_B, CellKind::Macro, 14.0, true)],
            5.0,
            true,
        );
        // slow: strongest macro
        assert_eq!(evaluate_crisp_handover(&m, &cfg()).verdict, Verdict::Proactive(far));
        // fast, heading along +x for 5 s at 20 km/h ~ 28 m: cell 1 at x=1000 is nearer than cell 3 at x=3000
        let mut fast = m.clone();
        fast.speed_kmh = 20.0;
        fast.velocity_kmh = (20.0, 0.0);
        let d = evaluate_crisp_handover(&fast, &cfg());
        assert_eq!(d.verdict, Verdict::Proactive(MACRO_B));
        assert_eq!(d.scenario, HandoverScenario::MacroMacro);
    }

    #[test]
    fn micro_to_micro_checks_auth_on_target() {
        let other = CellId(11);
        let m = meas(CellKind::Micro, vec![(other, CellKind::Micro, 20.0, false)], 50.0, true);
        let d = evaluate_crisp_handover(&m, &cfg());
        assert_eq!(d.verdict, Verdict::RequestTempAccess(other));
        assert_eq!(d.scenario, HandoverScenario::LteuLteu);
    }

    fn reference_measurement(authorized: bool) -> Measurement {
        let mut m = meas(CellKind::Macro, vec![(MICRO, CellKind::Micro, 10.0 + DEFAULT_HHM_DB, authorized)], 5.0, true);
        m.candidates[0].load_mbps = 10.0;
        m
    }

    #[test]
    fn fuzzy_recommendation_on_reference_vector() {
        let rb = default_rule_base();
        let d = evaluate_fuzzy_handover(&reference_measurement(true), &rb, &cfg());
        assert!(d.decision_value.unwrap() > 0.8);
        assert_eq!(d.verdict, Verdict::Proactive(MICRO));
        assert_eq!(d.scenario, HandoverScenario::MacroLteu);
    }

    #[test]
    fn fuzzy_unauthorized_micro_requests_access() {
        // Authorization does not enter the default rules, so the value stays
        // high and the refinement asks for temporary access.
        let rb = default_rule_base();
        let d = evaluate_fuzzy_handover(&reference_measurement(false), &rb, &cfg());
        assert!(d.decision_value.unwrap() >= cfg().fuzzy_threshold);
        assert_eq!(d.verdict, Verdict::RequestTempAccess(MICRO));
    }

    #[test]
    fn fuzzy_nothing_fired_is_none() {
        let mut inputs = vec![];
        for i in 0..6 {
            inputs.push(
                LinguisticVariable::new(
                    format!("v{i}"),
                    -200.0,
                    200.0,
                    "",
                    vec![("never", MembershipFunction::triangular(199.0, 200.0, 200.0).unwrap())],
                )
                .unwrap(),
            );
        }
        let rb = RuleBase::from_text(inputs, fuzzy::default_output(), "if (v0 is never) then (Handoff_decision_value is handoff)", 101)
            .unwrap();
        let d = evaluate_fuzzy_handover(&reference_measurement(true), &rb, &cfg());
        assert_eq!(d.verdict, Verdict::None);
        assert_eq!(d.decision_value, Some(0.0));
    }

    fn decision(v: Verdict) -> HandoverDecision {
        HandoverDecision { verdict: v, scenario: HandoverScenario::MacroMacro, decision_value: None }
    }

    #[test]
    fn proactive_executes_immediately() {
        let mut s = UeSessionState::default();
        let ex = s.advance(SERVING, &decision(Verdict::Proactive(MACRO_B)), |_| None, 3.0, &cfg()).unwrap();
        assert_eq!((ex.from, ex.to), (SERVING, MACRO_B));
        assert_eq!(s.handover_count, 1);
        assert_eq!(s.last_handover_s, Some(3.0));
    }

    #[test]
    fn reactive_waits_for_threshold() {
        let mut s = UeSessionState::default();
        for k in 0..100 {
            let ex = s.advance(SERVING, &decision(Verdict::ReactivePending(MACRO_B)), |_| Some(-100.0), k as f64, &cfg());
            assert!(ex.is_none());
        }
        assert_eq!(s.handover_count, 0);
        assert_eq!(s.pending_reactive.unwrap().armed_at_s, 0.0);
        // crossing the threshold later executes even without a fresh decision
        let ex = s.advance(SERVING, &HandoverDecision::none(), |_| Some(-90.0), 100.0, &cfg()).unwrap();
        assert_eq!(ex.to, MACRO_B);
        assert!(s.pending_reactive.is_none());
    }

    #[test]
    fn newer_target_cancels_pending_reactive() {
        let mut s = UeSessionState::default();
        s.advance(SERVING, &decision(Verdict::ReactivePending(MACRO_B)), |_| Some(-120.0), 0.0, &cfg());
        s.advance(SERVING, &decision(Verdict::ReactivePending(CellId(2))), |_| Some(-120.0), 1.0, &cfg());
        let p = s.pending_reactive.unwrap();
        assert_eq!((p.target, p.armed_at_s), (CellId(2), 1.0));
    }

    #[test]
    fn pingpong_counted_within_window() {
        let (a, b) = (CellId(0), CellId(1));
        let mut s = UeSessionState::default();
        s.advance(a, &decision(Verdict::Proactive(b)), |_| None, 10.0, &cfg());
        let ex = s.advance(b, &decision(Verdict::Proactive(a)), |_| None, 12.0, &cfg()).unwrap();
        assert!(ex.pingpong);
        assert_eq!((s.handover_count, s.pingpong_count), (2, 1));
        // back to b after the window: not a ping-pong
        s.advance(a, &decision(Verdict::Proactive(b)), |_| None, 30.0, &cfg());
        assert_eq!(s.pingpong_count, 1);
    }
}
