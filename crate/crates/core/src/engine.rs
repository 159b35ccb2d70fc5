//! Fixed-timestep scenario engine.
//!
//! Every tick, in UE id order: move the UE, measure every cell, decide, file
//! temporary-access requests, advance the handover session. Automatic grants
//! fall due at the end of a tick, so a grant is always logged after its
//! request and before any handover it enables.
//!
//! Independent random streams drive cell placement, UE mobility and
//! shadowing, so changing decision parameters never changes trajectories.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::SeedableRng;
use log::debug;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::authorization::{AuthError, GatewayRegistry, SessionId, UserId, OPERATOR};
use crate::coexistence::CoexistConfig;
use crate::fuzzy::{
    self, FuzzyError, LinguisticVariable, MembershipFunction, RuleBase, DEFAULT_RESOLUTION, INPUT_ALIASES,
    OUTPUT_ALIAS,
};
use crate::handover::{
    evaluate_handover, CandidateMeasurement, HandoverConfig, HandoverScenario, Measurement, ServingMeasurement,
    UeSessionState, Verdict,
};
use crate::radio::{
    dbm_to_mw, mw_to_dbm, noise_floor_dbm, shannon_throughput_mbps, CellKind, LogDistanceModel, RadioError,
    Shadowing, TxConfig, DEFAULT_BANDWIDTH_MHZ, MACRO_TX_DBM, MICRO_TX_DBM, SHADOWING_STD_DB,
};
use crate::topology::{
    build_hex_grid, place_microcells, step_ue, CellId, HexGrid, MobilityConfig, TopologyError, UeId, UeState,
    DEFAULT_CELL_RADIUS_M, DEFAULT_MICRO_PER_CELL, DEFAULT_N_MACRO, DEFAULT_V_MAX_KMH, DEFAULT_V_MIN_KMH,
};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_SIM_TIME_S: f64 = 100.0;
pub const DEFAULT_DT_S: f64 = 0.1;
pub const DEFAULT_N_UES: usize = 20;
pub const DEFAULT_LOAD_PER_UE_MBPS: f64 = 5.0;
pub const DEFAULT_DECORRELATION_M: f64 = 50.0;

const STREAM_PLACEMENT: u64 = 1;
const STREAM_MOBILITY: u64 = 2;
const STREAM_SHADOWING: u64 = 3;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error("event {index} at t={t_s} s precedes t={previous_s} s")]
    OutOfOrder { index: usize, t_s: f64, previous_s: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioParams {
    pub bandwidth_mhz: f64,
    pub shadowing_std_db: f64,
    /// Distance over which a link's shadowing decorrelates to 1/e; 0 draws
    /// independent values every tick.
    pub shadowing_decorrelation_m: f64,
    pub macro_tx_dbm: f64,
    pub micro_tx_dbm: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            bandwidth_mhz: DEFAULT_BANDWIDTH_MHZ,
            shadowing_std_db: SHADOWING_STD_DB,
            shadowing_decorrelation_m: DEFAULT_DECORRELATION_M,
            macro_tx_dbm: MACRO_TX_DBM,
            micro_tx_dbm: MICRO_TX_DBM,
        }
    }
}

/// Changes to the shipped fuzzy vocabulary, keyed by variable alias
/// (`sinr`, `velocity`, `auth`, `latency`, `battery`, `load`, `output`).
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyConfig {
    pub resolution: usize,
    pub universes: BTreeMap<String, (f64, f64)>,
    /// `(alias, term)` → shape; replaces a shipped term or adds a new one.
    pub terms: BTreeMap<(String, String), MembershipFunction>,
    /// Rule text replacing the shipped rules.
    pub rules: Option<String>,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        FuzzyConfig { resolution: DEFAULT_RESOLUTION, universes: BTreeMap::new(), terms: BTreeMap::new(), rules: None }
    }
}

pub fn is_fuzzy_alias(alias: &str) -> bool {
    alias == OUTPUT_ALIAS || INPUT_ALIASES.contains(&alias)
}

impl FuzzyConfig {
    pub fn build(&self) -> Result<RuleBase, FuzzyError> {
        for alias in self.universes.keys().chain(self.terms.keys().map(|(a, _)| a)) {
            if !is_fuzzy_alias(alias) {
                return Err(FuzzyError::InvalidVariable(format!("unknown variable alias `{alias}`")));
            }
        }
        let adjust = |alias: &str, var: LinguisticVariable| -> Result<LinguisticVariable, FuzzyError> {
            let (lo, hi) = self.universes.get(alias).copied().unwrap_or((var.min, var.max));
            let mut terms: Vec<(String, MembershipFunction)> =
                var.terms().iter().map(|t| (t.name.clone(), t.mf)).collect();
            for ((a, name), mf) in &self.terms {
                if a != alias {
                    continue;
                }
                match terms.iter_mut().find(|(n, _)| n == name) {
                    Some(slot) => slot.1 = *mf,
                    None => terms.push((name.clone(), *mf)),
                }
            }
            LinguisticVariable::new(var.name.clone(), lo, hi, var.units.clone(), terms)
        };
        let inputs = fuzzy::default_inputs()
            .into_iter()
            .zip(INPUT_ALIASES)
            .map(|(v, a)| adjust(a, v))
            .collect::<Result<Vec<_>, _>>()?;
        let output = adjust(OUTPUT_ALIAS, fuzzy::default_output())?;
        let rules = self.rules.as_deref().unwrap_or(fuzzy::DEFAULT_RULES);
        RuleBase::from_text(inputs, output, rules, self.resolution)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellPolicy {
    pub owner: u32,
    pub users: BTreeSet<u32>,
    /// Stand-in for the owner's answer to temporary-access requests.
    pub auto_grant: bool,
    pub grant_delay_s: f64,
}

impl CellPolicy {
    pub fn closed(owner: u32) -> Self {
        CellPolicy { owner, users: BTreeSet::new(), auto_grant: false, grant_delay_s: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuthConfig {
    /// Microcells without a policy are open (operator-owned) or closed.
    pub default_open: bool,
    pub cells: BTreeMap<u32, CellPolicy>,
}

impl Default for AuthConfig {
    fn default() -> Self {
        AuthConfig { default_open: true, cells: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: Option<u64>,
    pub sim_time_s: f64,
    pub dt_s: f64,
    pub n_macro: usize,
    pub micro_per_cell: usize,
    pub n_ues: usize,
    pub cell_radius_m: f64,
    pub v_min_kmh: f64,
    pub v_max_kmh: f64,
    pub load_per_ue_mbps: f64,
    pub output: Option<String>,
    pub radio: RadioParams,
    pub handover: HandoverConfig,
    pub fuzzy: FuzzyConfig,
    pub auth: AuthConfig,
    pub coexist: Option<CoexistConfig>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: None,
            sim_time_s: DEFAULT_SIM_TIME_S,
            dt_s: DEFAULT_DT_S,
            n_macro: DEFAULT_N_MACRO,
            micro_per_cell: DEFAULT_MICRO_PER_CELL,
            n_ues: DEFAULT_N_UES,
            cell_radius_m: DEFAULT_CELL_RADIUS_M,
            v_min_kmh: DEFAULT_V_MIN_KMH,
            v_max_kmh: DEFAULT_V_MAX_KMH,
            load_per_ue_mbps: DEFAULT_LOAD_PER_UE_MBPS,
            output: None,
            radio: RadioParams::default(),
            handover: HandoverConfig::default(),
            fuzzy: FuzzyConfig::default(),
            auth: AuthConfig::default(),
            coexist: None,
        }
    }
}

impl ScenarioConfig {
    pub fn resolved_seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn n_ticks(&self) -> usize {
        (self.sim_time_s / self.dt_s + 1e-9).floor() as usize
    }

    /// Range of microcell ids this config will create.
    pub fn micro_ids(&self) -> std::ops::Range<u32> {
        let first = self.n_macro as u32;
        first..first + (self.n_macro * self.micro_per_cell) as u32
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::InvalidConfig(m));
        let positive = [
            ("sim_time_s", self.sim_time_s),
            ("dt_s", self.dt_s),
            ("cell_radius_m", self.cell_radius_m),
            ("bandwidth_mhz", self.radio.bandwidth_mhz),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.dt_s > self.sim_time_s {
            return bad(format!("dt_s {} exceeds sim_time_s {}", self.dt_s, self.sim_time_s));
        }
        if self.n_macro == 0 {
            return bad("n_macro must be at least 1".into());
        }
        if !(self.v_min_kmh >= 0.0 && self.v_min_kmh <= self.v_max_kmh && self.v_max_kmh.is_finite()) {
            return bad(format!("need 0 <= v_min_kmh <= v_max_kmh, got {} and {}", self.v_min_kmh, self.v_max_kmh));
        }
        let nonneg = [
            ("hhm_db", self.handover.hhm_db),
            ("shadowing_std_db", self.radio.shadowing_std_db),
            ("shadowing_decorrelation_m", self.radio.shadowing_decorrelation_m),
            ("load_per_ue_mbps", self.load_per_ue_mbps),
            ("pingpong_window_s", self.handover.pingpong_window_s),
            ("prediction_horizon_s", self.handover.prediction_horizon_s),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        for (name, v) in [
            ("macro_tx_dbm", self.radio.macro_tx_dbm),
            ("micro_tx_dbm", self.radio.micro_tx_dbm),
            ("velocity_gate_kmh", self.handover.velocity_gate_kmh),
            ("reactive_threshold_dbm", self.handover.reactive_threshold_dbm),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.handover.fuzzy_threshold) {
            return bad(format!("fuzzy_threshold {} outside [0, 1]", self.handover.fuzzy_threshold));
        }
        let micros = self.micro_ids();
        for (id, p) in &self.auth.cells {
            if !micros.contains(id) {
                return bad(format!("auth policy for cell {id}, which is not a microcell (ids {micros:?})"));
            }
            if !(p.grant_delay_s.is_finite() && p.grant_delay_s >= 0.0) {
                return bad(format!("cell {id} grant_delay_s must be >= 0, got {}", p.grant_delay_s));
            }
        }
        if let Some(c) = &self.coexist {
            c.validate().map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        }
        self.fuzzy.build()?;
        Ok(())
    }

    pub fn build_grid(&self) -> Result<HexGrid, EngineError> {
        let macro_tx = TxConfig { tx_power_dbm: self.radio.macro_tx_dbm, ..TxConfig::macro_default() };
        let micro_tx = TxConfig { tx_power_dbm: self.radio.micro_tx_dbm, ..TxConfig::micro_default() };
        let mut grid = build_hex_grid(self.n_macro, self.cell_radius_m, macro_tx)?;
        let mut rng = stream(self.resolved_seed(), STREAM_PLACEMENT);
        grid.micros = place_microcells(&grid, self.micro_per_cell, micro_tx, &mut rng);
        Ok(grid)
    }
}

/// Gudmundson autocorrelation of shadowing after moving `moved_m`.
pub fn correlation(moved_m: f64, decorrelation_m: f64) -> f64 {
    if decorrelation_m > 0.0 {
        (-moved_m / decorrelation_m).exp()
    } else {
        0.0
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Measure,
    Decide,
    HandoverExec,
    TempRequest,
    TempGrant,
}

impl EventKind {
    pub const ALL: [EventKind; 5] =
        [EventKind::Measure, EventKind::Decide, EventKind::HandoverExec, EventKind::TempRequest, EventKind::TempGrant];

    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Measure => "measure",
            EventKind::Decide => "decide",
            EventKind::HandoverExec => "handover_exec",
            EventKind::TempRequest => "temp_request",
            EventKind::TempGrant => "temp_grant",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// A cell as it appears in the log: `M<id>` for macro, `U<id>` for LTE-U.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellRef {
    pub id: CellId,
    pub kind: CellKind,
}

impl fmt::Display for CellRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.kind {
            CellKind::Macro => 'M',
            CellKind::Micro => 'U',
        };
        write!(f, "{p}{}", self.id.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub t_s: f64,
    pub ue_id: UeId,
    pub event: EventKind,
    pub serving: Option<CellRef>,
    pub target: Option<CellRef>,
    pub sinr_serving_db: Option<f64>,
    pub sinr_target_db: Option<f64>,
    pub decision_value: Option<f64>,
    /// Decision verdict on `decide` rows, handover scenario on
    /// `handover_exec` rows.
    pub verdict: Option<&'static str>,
}

impl EventRecord {
    fn new(t_s: f64, ue_id: UeId, event: EventKind) -> Self {
        EventRecord {
            t_s,
            ue_id,
            event,
            serving: None,
            target: None,
            sinr_serving_db: None,
            sinr_target_db: None,
            decision_value: None,
            verdict: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeMetrics {
    pub ue_id: UeId,
    /// Indexed like [`HandoverScenario::ALL`].
    pub handovers_by_scenario: [u64; 4],
    pub pingpong_count: u64,
    pub temp_access_requests: u64,
    pub temp_access_grants: u64,
    pub throughput_sum_mbps: f64,
    pub ticks: u64,
    pub micro_ticks: u64,
}

fn scenario_index(s: HandoverScenario) -> Option<usize> {
    HandoverScenario::ALL.iter().position(|x| *x == s)
}

impl UeMetrics {
    pub fn new(ue_id: UeId) -> Self {
        UeMetrics {
            ue_id,
            handovers_by_scenario: [0; 4],
            pingpong_count: 0,
            temp_access_requests: 0,
            temp_access_grants: 0,
            throughput_sum_mbps: 0.0,
            ticks: 0,
            micro_ticks: 0,
        }
    }

    pub fn handover_count(&self) -> u64 {
        self.handovers_by_scenario.iter().sum()
    }

    pub fn mean_throughput_mbps(&self) -> f64 {
        if self.ticks == 0 {
            0.0
        } else {
            self.throughput_sum_mbps / self.ticks as f64
        }
    }

    /// Share of ticks spent on a microcell: the offload proxy.
    pub fn micro_time_fraction(&self) -> f64 {
        if self.ticks == 0 {
            0.0
        } else {
            self.micro_ticks as f64 / self.ticks as f64
        }
    }

    fn record_measure(&mut self, serving: CellKind, sinr_db: f64, bandwidth_mhz: f64) {
        self.ticks += 1;
        self.throughput_sum_mbps += shannon_throughput_mbps(sinr_db, bandwidth_mhz);
        if serving == CellKind::Micro {
            self.micro_ticks += 1;
        }
    }

    fn record_handover(&mut self, scenario: HandoverScenario, pingpong: bool) {
        if let Some(i) = scenario_index(scenario) {
            self.handovers_by_scenario[i] += 1;
        }
        if pingpong {
            self.pingpong_count += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub per_ue: Vec<UeMetrics>,
    pub handovers_by_scenario: [u64; 4],
    pub handover_count: u64,
    pub pingpong_count: u64,
    pub temp_access_requests: u64,
    pub temp_access_grants: u64,
    /// Mean over UEs of each UE's mean Shannon throughput.
    pub mean_throughput_mbps: f64,
    /// Mean over UEs of the time-in-microcell fraction.
    pub micro_time_fraction: f64,
}

impl Metrics {
    pub fn from_per_ue(per_ue: Vec<UeMetrics>) -> Self {
        let mut by = [0u64; 4];
        for u in &per_ue {
            for (b, x) in by.iter_mut().zip(u.handovers_by_scenario) {
                *b += x;
            }
        }
        let n = per_ue.len();
        let mean = |f: fn(&UeMetrics) -> f64| if n == 0 { 0.0 } else { per_ue.iter().map(f).sum::<f64>() / n as f64 };
        Metrics {
            handovers_by_scenario: by,
            handover_count: by.iter().sum(),
            pingpong_count: per_ue.iter().map(|u| u.pingpong_count).sum(),
            temp_access_requests: per_ue.iter().map(|u| u.temp_access_requests).sum(),
            temp_access_grants: per_ue.iter().map(|u| u.temp_access_grants).sum(),
            mean_throughput_mbps: mean(UeMetrics::mean_throughput_mbps),
            micro_time_fraction: mean(UeMetrics::micro_time_fraction),
            per_ue,
        }
    }

    pub fn handovers(&self, scenario: HandoverScenario) -> u64 {
        scenario_index(scenario).map_or(0, |i| self.handovers_by_scenario[i])
    }
}

/// What [`summarize_metrics`] needs beyond the log itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsParams {
    pub pingpong_window_s: f64,
    pub bandwidth_mhz: f64,
}

impl MetricsParams {
    pub fn of(cfg: &ScenarioConfig) -> Self {
        MetricsParams { pingpong_window_s: cfg.handover.pingpong_window_s, bandwidth_mhz: cfg.radio.bandwidth_mhz }
    }
}

/// Rebuilds the run metrics from the event log alone.
pub fn summarize_metrics(log: &[EventRecord], params: &MetricsParams) -> Result<Metrics, EngineError> {
    let mut per_ue: BTreeMap<UeId, UeMetrics> = BTreeMap::new();
    // last handover per UE: (cell it left, time)
    let mut last: BTreeMap<UeId, (CellId, f64)> = BTreeMap::new();
    let mut previous_s = f64::NEG_INFINITY;
    for (index, e) in log.iter().enumerate() {
        if e.t_s < previous_s {
            return Err(EngineError::OutOfOrder { index, t_s: e.t_s, previous_s });
        }
        previous_s = e.t_s;
        let m = per_ue.entry(e.ue_id).or_insert_with(|| UeMetrics::new(e.ue_id));
        match e.event {
            EventKind::Measure => {
                if let (Some(s), Some(sinr)) = (e.serving, e.sinr_serving_db) {
                    m.record_measure(s.kind, sinr, params.bandwidth_mhz);
                }
            }
            EventKind::HandoverExec => {
                let (Some(from), Some(to)) = (e.serving, e.target) else { continue };
                let pingpong = last
                    .get(&e.ue_id)
                    .is_some_and(|&(left, t)| left == to.id && e.t_s - t <= params.pingpong_window_s);
                let scenario = e.verdict.and_then(HandoverScenario::parse).unwrap_or(HandoverScenario::NotApplicable);
                m.record_handover(scenario, pingpong);
                last.insert(e.ue_id, (from.id, e.t_s));
            }
            EventKind::TempRequest => m.temp_access_requests += 1,
            EventKind::TempGrant => m.temp_access_grants += 1,
            EventKind::Decide => {}
        }
    }
    Ok(Metrics::from_per_ue(per_ue.into_values().collect()))
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub grid: HexGrid,
    pub events: Vec<EventRecord>,
    pub metrics: Metrics,
}

struct UeRun {
    ue: UeState,
    /// Current shadowing per site, dB.
    shadow: Vec<f64>,
    session: UeSessionState,
    /// Temporary-access session: id and the cell it is for.
    access: Option<(SessionId, CellId)>,
    sessions_opened: u64,
    metrics: UeMetrics,
}

struct ScheduledGrant {
    due_tick: usize,
    ue: usize,
    cell: CellId,
    session: SessionId,
}

struct Site {
    id: CellId,
    kind: CellKind,
    position: crate::topology::Point,
    tx_dbm: f64,
    gateway: Option<u32>,
}

struct World {
    sites: Vec<Site>,
    index: BTreeMap<CellId, usize>,
    registries: BTreeMap<u32, GatewayRegistry>,
    policies: BTreeMap<CellId, CellPolicy>,
}

impl World {
    fn authorized(&self, site: &Site, user: UserId, t_s: f64) -> bool {
        match site.gateway {
            None => true,
            Some(gw) => self.registries[&gw].check_access(site.id, user, t_s).unwrap_or(false),
        }
    }

    fn cell_ref(&self, id: CellId) -> CellRef {
        CellRef { id, kind: self.sites[self.index[&id]].kind }
    }

    fn registry_of(&mut self, cell: CellId) -> Option<&mut GatewayRegistry> {
        let gw = self.sites[*self.index.get(&cell)?].gateway?;
        self.registries.get_mut(&gw)
    }
}

fn end_access_session(world: &mut World, scheduled: &mut Vec<ScheduledGrant>, session: SessionId, cell: CellId) {
    if let Some(reg) = world.registry_of(cell) {
        reg.end_session(session);
    }
    scheduled.retain(|g| g.session != session);
}

fn build_world(cfg: &ScenarioConfig, grid: &HexGrid) -> Result<World, EngineError> {
    let sites: Vec<Site> = grid
        .sites()
        .map(|s| Site { id: s.id, kind: s.kind, position: s.position, tx_dbm: s.tx.tx_power_dbm, gateway: s.gateway_id })
        .collect();
    let index = sites.iter().enumerate().map(|(i, s)| (s.id, i)).collect();
    let mut registries: BTreeMap<u32, GatewayRegistry> = BTreeMap::new();
    let mut policies = BTreeMap::new();
    for s in &grid.micros {
        let gw = s.gateway_id.expect("microcells carry a gateway");
        let reg = registries.entry(gw).or_insert_with(|| GatewayRegistry::new(gw));
        match cfg.auth.cells.get(&s.id.0) {
            Some(p) => {
                reg.register_microcell(s.id, UserId(p.owner), p.users.iter().map(|&u| UserId(u)))?;
                policies.insert(s.id, p.clone());
            }
            None if cfg.auth.default_open => reg.register_open_cell(s.id)?,
            None => {
                reg.register_microcell(s.id, OPERATOR, [])?;
                policies.insert(s.id, CellPolicy::closed(OPERATOR.0));
            }
        }
    }
    Ok(World { sites, index, registries, policies })
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput, EngineError> {
    cfg.validate()?;
    let seed = cfg.resolved_seed();
    let rb = cfg.fuzzy.build()?;
    let grid = cfg.build_grid()?;
    let mut world = build_world(cfg, &grid)?;
    let shadowing = Shadowing::new(cfg.radio.shadowing_std_db)?;
    let noise_mw = dbm_to_mw(noise_floor_dbm(cfg.radio.bandwidth_mhz));
    let mobility = MobilityConfig { v_min_kmh: cfg.v_min_kmh, v_max_kmh: cfg.v_max_kmh };
    let mut mob_rng = stream(seed, STREAM_MOBILITY);
    let mut shadow_rng = stream(seed, STREAM_SHADOWING);
    let hcfg = &cfg.handover;

    let mut ues: Vec<UeRun> = (0..cfg.n_ues)
        .map(|i| {
            let mut ue = UeState::spawn(UeId(i as u32), &grid.bbox, &mobility, grid.macros[0].id, &mut mob_rng);
            ue.serving = grid
                .macros
                .iter()
                .min_by(|a, b| a.position.distance(&ue.position).total_cmp(&b.position.distance(&ue.position)))
                .map(|s| s.id)
                .expect("grid has a macro");
            UeRun {
                ue,
                shadow: Vec::new(),
                session: UeSessionState::default(),
                access: None,
                sessions_opened: 0,
                metrics: UeMetrics::new(UeId(i as u32)),
            }
        })
        .collect();

    let n_sites = world.sites.len();
    for u in &mut ues {
        u.shadow = (0..n_sites).map(|_| shadowing.sample(&mut shadow_rng)).collect();
    }
    let mut rx = vec![0.0f64; n_sites];
    let mut sinr = vec![0.0f64; n_sites];
    let mut load = vec![0usize; n_sites];
    let mut events = Vec::new();
    let mut scheduled: Vec<ScheduledGrant> = Vec::new();

    for tick in 1..=cfg.n_ticks() {
        let t = tick as f64 * cfg.dt_s;
        load.fill(0);
        for u in &ues {
            load[world.index[&u.ue.serving]] += 1;
        }

        for (i, u) in ues.iter_mut().enumerate() {
            let before = u.ue.position;
            step_ue(&mut u.ue, cfg.dt_s, &grid.bbox, &mobility, &mut mob_rng);
            let rho = correlation(before.distance(&u.ue.position), cfg.radio.shadowing_decorrelation_m);
            let innovation = (1.0 - rho * rho).sqrt();
            let user = UserId(i as u32);

            let mut total_mw = [0.0f64; 2];
            for (k, s) in world.sites.iter().enumerate() {
                let model = match s.kind {
                    CellKind::Macro => LogDistanceModel::MACRO,
                    CellKind::Micro => LogDistanceModel::MICRO,
                };
                let d = s.position.distance(&u.ue.position).max(f64::MIN_POSITIVE);
                u.shadow[k] = rho * u.shadow[k] + innovation * shadowing.sample(&mut shadow_rng);
                rx[k] = s.tx_dbm - model.loss_db(d)? - u.shadow[k];
                total_mw[s.kind as usize] += dbm_to_mw(rx[k]);
            }
            for (k, s) in world.sites.iter().enumerate() {
                let signal = dbm_to_mw(rx[k]);
                let interference = (total_mw[s.kind as usize] - signal).max(0.0);
                sinr[k] = mw_to_dbm(signal / (interference + noise_mw));
            }

            let serving_idx = world.index[&u.ue.serving];
            let serving = &world.sites[serving_idx];
            let serving_ref = CellRef { id: serving.id, kind: serving.kind };
            let candidates: Vec<CandidateMeasurement> = world
                .sites
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != serving_idx)
                .map(|(k, s)| CandidateMeasurement {
                    cell: s.id,
                    kind: s.kind,
                    sinr_db: sinr[k],
                    rx_dbm: rx[k],
                    load_mbps: load[k] as f64 * cfg.load_per_ue_mbps,
                    authorized: world.authorized(s, user, t),
                    position: s.position,
                })
                .collect();
            let m = Measurement {
                serving: ServingMeasurement { cell: serving.id, kind: serving.kind, sinr_db: sinr[serving_idx] },
                candidates,
                position: u.ue.position,
                velocity_kmh: u.ue.velocity_kmh,
                speed_kmh: u.ue.speed_kmh,
                traffic: u.ue.traffic,
                battery_hours: u.ue.battery_hours,
            };

            let best = m.candidates.iter().min_by(|a, b| b.sinr_db.total_cmp(&a.sinr_db).then(a.cell.cmp(&b.cell)));
            events.push(EventRecord {
                serving: Some(serving_ref),
                target: best.map(|c| CellRef { id: c.cell, kind: c.kind }),
                sinr_serving_db: Some(m.serving.sinr_db),
                sinr_target_db: best.map(|c| c.sinr_db),
                ..EventRecord::new(t, u.ue.id, EventKind::Measure)
            });
            u.metrics.record_measure(serving.kind, m.serving.sinr_db, cfg.radio.bandwidth_mhz);

            let decision = evaluate_handover(&m, &rb, hcfg);
            let target = decision.verdict.target();
            events.push(EventRecord {
                serving: Some(serving_ref),
                target: target.map(|c| world.cell_ref(c)),
                sinr_serving_db: Some(m.serving.sinr_db),
                sinr_target_db: target.map(|c| sinr[world.index[&c]]),
                decision_value: decision.decision_value,
                verdict: Some(decision.verdict.as_str()),
                ..EventRecord::new(t, u.ue.id, EventKind::Decide)
            });

            if let Verdict::RequestTempAccess(cell) = decision.verdict {
                if let Some((s, c)) = u.access {
                    if c != cell {
                        end_access_session(&mut world, &mut scheduled, s, c);
                        u.access = None;
                    }
                }
                let session = match u.access {
                    Some((s, _)) => s,
                    None => {
                        u.sessions_opened += 1;
                        SessionId(((i as u64) << 32) | u.sessions_opened)
                    }
                };
                let filed = world.registry_of(cell).map(|r| r.request_temp_access(cell, user, session, t));
                if let Some(Ok(_)) = filed {
                    u.access = Some((session, cell));
                    u.metrics.temp_access_requests += 1;
                    events.push(EventRecord {
                        serving: Some(serving_ref),
                        target: Some(world.cell_ref(cell)),
                        ..EventRecord::new(t, u.ue.id, EventKind::TempRequest)
                    });
                    if let Some(p) = world.policies.get(&cell).filter(|p| p.auto_grant) {
                        let delay_ticks = ((p.grant_delay_s / cfg.dt_s) - 1e-9).ceil().max(1.0) as usize;
                        scheduled.push(ScheduledGrant { due_tick: tick + delay_ticks, ue: i, cell, session });
                    }
                }
            }

            let exec = u.session.advance(u.ue.serving, &decision, |c| world.index.get(&c).map(|&k| rx[k]), t, hcfg);
            if let Some(x) = exec {
                u.ue.serving = x.to;
                u.metrics.record_handover(x.scenario, x.pingpong);
                events.push(EventRecord {
                    serving: Some(world.cell_ref(x.from)),
                    target: Some(world.cell_ref(x.to)),
                    sinr_serving_db: Some(sinr[world.index[&x.from]]),
                    sinr_target_db: Some(sinr[world.index[&x.to]]),
                    verdict: Some(x.scenario.as_str()),
                    ..EventRecord::new(t, u.ue.id, EventKind::HandoverExec)
                });
                if let Some((s, c)) = u.access {
                    if x.from == c || x.to != c {
                        end_access_session(&mut world, &mut scheduled, s, c);
                        u.access = None;
                    }
                }
            }
        }

        let (due, later): (Vec<_>, Vec<_>) = scheduled.drain(..).partition(|g| g.due_tick <= tick);
        scheduled = later;
        for g in due {
            let owner = UserId(world.policies[&g.cell].owner);
            let granted = world.registry_of(g.cell).map(|r| r.grant_temp_access(g.cell, owner, UserId(g.ue as u32), t));
            if let Some(Ok(_)) = granted {
                let u = &mut ues[g.ue];
                u.metrics.temp_access_grants += 1;
                events.push(EventRecord {
                    serving: Some(world.cell_ref(u.ue.serving)),
                    target: Some(world.cell_ref(g.cell)),
                    ..EventRecord::new(t, u.ue.id, EventKind::TempGrant)
                });
            }
        }
    }

    let metrics = Metrics::from_per_ue(ues.into_iter().map(|u| u.metrics).collect());
    debug!("seed {seed}: {} events, {} handovers, {} ping-pong", events.len(), metrics.handover_count, metrics.pingpong_count);
    Ok(RunOutput { seed, grid, events, metrics })
}

/// Runs independent scenarios in parallel; results keep input order.
pub fn run_sweep(cfgs: &[ScenarioConfig]) -> Vec<Result<RunOutput, EngineError>> {
    cfgs.par_iter().map(run_scenario).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> ScenarioConfig {
        ScenarioConfig { seed: Some(seed), sim_time_s: 10.0, n_ues: 5, ..ScenarioConfig::default() }
    }

    #[test]
    fn vacuous_run() {
        let out = run_scenario(&ScenarioConfig { n_ues: 0, ..small(1) }).unwrap();
        assert!(out.events.is_empty());
        assert_eq!(out.metrics, Metrics::from_per_ue(vec![]));
        assert_eq!(out.metrics.handover_count, 0);
    }

    #[test]
    fn shadowing_correlation_limits() {
        assert_eq!(correlation(0.0, 50.0), 1.0);
        assert!((correlation(50.0, 50.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(correlation(0.0, 0.0), 0.0);
    }

    #[test]
    fn tick_count() {
        assert_eq!(ScenarioConfig::default().n_ticks(), 1000);
        assert_eq!(ScenarioConfig { sim_time_s: 0.3, ..ScenarioConfig::default() }.n_ticks(), 3);
    }

    #[test]
    fn rejects_bad_configs() {
        for cfg in [
            ScenarioConfig { dt_s: 0.0, ..small(0) },
            ScenarioConfig { dt_s: 20.0, ..small(0) },
            ScenarioConfig { cell_radius_m: -5.0, ..small(0) },
            ScenarioConfig { n_macro: 0, ..small(0) },
            ScenarioConfig { v_min_kmh: 10.0, v_max_kmh: 5.0, ..small(0) },
        ] {
            assert!(matches!(run_scenario(&cfg), Err(EngineError::InvalidConfig(_))));
        }
        let mut cfg = small(0);
        cfg.auth.cells.insert(0, CellPolicy::closed(1));
        assert!(run_scenario(&cfg).is_err());
    }

    #[test]
    fn every_tick_measures_every_ue() {
        let cfg = small(3);
        let out = run_scenario(&cfg).unwrap();
        let measures = out.events.iter().filter(|e| e.event == EventKind::Measure).count();
        assert_eq!(measures, cfg.n_ticks() * cfg.n_ues);
        assert!(out.events.windows(2).all(|w| w[0].t_s <= w[1].t_s));
    }

    #[test]
    fn metrics_match_log_recomputation() {
        let cfg = small(9);
        let out = run_scenario(&cfg).unwrap();
        assert_eq!(summarize_metrics(&out.events, &MetricsParams::of(&cfg)).unwrap(), out.metrics);
    }

    #[test]
    fn summarize_counts_and_ordering() {
        let params = MetricsParams { pingpong_window_s: 5.0, bandwidth_mhz: 20.0 };
        assert_eq!(summarize_metrics(&[], &params).unwrap().handover_count, 0);
        let a = CellRef { id: CellId(0), kind: CellKind::Macro };
        let b = CellRef { id: CellId(1), kind: CellKind::Macro };
        let exec = |t: f64, from, to| EventRecord {
            serving: Some(from),
            target: Some(to),
            verdict: Some("macro_macro"),
            ..EventRecord::new(t, UeId(0), EventKind::HandoverExec)
        };
        let log = vec![exec(10.0, a, b), exec(12.0, b, a), exec(30.0, a, b)];
        let m = summarize_metrics(&log, &params).unwrap();
        assert_eq!(m.handover_count, 3);
        assert_eq!(m.pingpong_count, 1);
        assert_eq!(m.handovers(HandoverScenario::MacroMacro), 3);
        let backwards = vec![exec(2.0, a, b), exec(1.0, b, a)];
        assert!(matches!(summarize_metrics(&backwards, &params), Err(EngineError::OutOfOrder { index: 1, .. })));
    }

    #[test]
    fn aggregates_are_sums_of_per_ue() {
        let out = run_scenario(&small(4)).unwrap();
        let m = &out.metrics;
        assert_eq!(m.handover_count, m.per_ue.iter().map(|u| u.handover_count()).sum::<u64>());
        assert_eq!(m.pingpong_count, m.per_ue.iter().map(|u| u.pingpong_count).sum::<u64>());
    }

    #[test]
    fn sweep_preserves_order() {
        let cfgs: Vec<_> = (0..4).map(small).collect();
        let outs = run_sweep(&cfgs);
        for (i, o) in outs.into_iter().enumerate() {
            let o = o.unwrap();
            assert_eq!(o.seed, i as u64);
            assert_eq!(o.events, run_scenario(&cfgs[i]).unwrap().events);
        }
    }

    #[test]
    fn fuzzy_overrides_apply() {
        let mut f = FuzzyConfig::default();
        f.universes.insert("load".into(), (0.0, 200.0));
        f.terms.insert(("load".into(), "high".into()), MembershipFunction::trapezoidal(50.0, 100.0, 200.0, 200.0).unwrap());
        let rb = f.build().unwrap();
        let load = &rb.inputs()[5];
        assert_eq!(load.max, 200.0);
        assert_eq!(load.term("high").unwrap().mf.breakpoints(), vec![50.0, 100.0, 200.0, 200.0]);
        f.terms.insert(("nope".into(), "x".into()), MembershipFunction::triangular(0.0, 1.0, 2.0).unwrap());
        assert!(f.build().is_err());
    }
}
