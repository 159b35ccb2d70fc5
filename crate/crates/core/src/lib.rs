//! LTE-U heterogeneous network simulator: fuzzy and crisp handover deciders,
//! radio and topology models, unlicensed-band coexistence, gateway access
//! control, and a deterministic scenario engine.

pub mod authorization;
pub mod coexistence;
pub mod csv;
pub mod engine;
pub mod fuzzy;
pub mod handover;
pub mod radio;
pub mod scenario;
pub mod topology;

pub use authorization::{AccessGrant, AuthError, GatewayRegistry, SessionId, UserId};
pub use coexistence::{
    run_coexistence, run_with_standalone, AccessMode, CoexistConfig, CoexistError, CoexistOutcome, CoexistReport,
    NodeSpec, Tech,
};
pub use engine::{
    run_scenario, run_sweep, summarize_metrics, EngineError, EventKind, EventRecord, Metrics, MetricsParams,
    RunOutput, ScenarioConfig,
};
pub use fuzzy::{
    decide_handoff, default_rule_base, FuzzyError, HandoffInputs, LinguisticVariable, MembershipFunction, RuleBase,
};
pub use handover::{
    evaluate_crisp_handover, evaluate_fuzzy_handover, evaluate_handover, Decider, HandoverConfig, HandoverDecision,
    HandoverScenario, Measurement, Verdict,
};
pub use radio::{macro_path_loss_db, micro_path_loss_db, CellKind, RadioError};
pub use scenario::{parse_scenario, parse_with_overrides, render, ScenarioError};
pub use topology::{build_hex_grid, CellId, HexGrid, Point, TopologyError, UeId};
