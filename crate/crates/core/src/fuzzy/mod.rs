//! Mamdani fuzzy inference: fuzzifier, verbose rule language, min/max
//! inference and centroid defuzzification, plus the handoff decider built on
//! top of them.

mod handoff;
mod inference;
mod membership;
mod rules;
mod variable;

use thiserror::Error;

pub use handoff::{
    decide_handoff, default_inputs, default_output, default_rule_base, HandoffInputs, HandoffValue, AUTH_VAR,
    BATTERY_VAR, DEFAULT_RULES, DEFAULT_THRESHOLD, INPUT_ALIASES, LATENCY_VAR, LOAD_VAR, NON_REAL_TIME_LATENCY_MS,
    OUTPUT_ALIAS, OUTPUT_VAR, REAL_TIME_LATENCY_MS, SINR_VAR, VELOCITY_VAR,
};
pub use inference::{defuzzify_centroid, CrispInputs, InferenceResult, RuleBase, DEFAULT_RESOLUTION};
pub use membership::{eval_membership, MembershipFunction};
pub use rules::{evaluate_rule, parse_rule_base, render_rules, Clause, Connective, Degrees, FuzzyRule};
pub use variable::{LinguisticVariable, Term};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuzzyError {
    #[error("invalid membership function: {0}")]
    InvalidMembership(String),
    #[error("invalid linguistic variable: {0}")]
    InvalidVariable(String),
    #[error("invalid rule base: {0}")]
    InvalidRuleBase(String),
    #[error("rule parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing input for variable `{0}`")]
    MissingInput(String),
    #[error("input `{0}` is not a variable of the rule base")]
    UnknownInput(String),
    #[error("variable `{variable}` has no term `{term}`")]
    UnknownTerm { variable: String, term: String },
    #[error("no rule fired")]
    NoRuleFired,
    #[error("aggregated fuzzy set is empty")]
    EmptyFuzzySet,
}
