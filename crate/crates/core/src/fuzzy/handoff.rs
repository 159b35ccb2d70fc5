//! The six-input handoff decider and its shipped vocabulary.

use super::{CrispInputs, FuzzyError, LinguisticVariable, MembershipFunction, RuleBase, DEFAULT_RESOLUTION};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Short names for the six inputs plus the output, in rule-base order.
pub const INPUT_ALIASES: [&str; 6] = ["sinr", "velocity", "auth", "latency", "battery", "load"];
pub const OUTPUT_ALIAS: &str = "output";

pub const SINR_VAR: &str = "SINR_in_db";
pub const VELOCITY_VAR: &str = "Velocity_(V)_of_UE_in_kmh/hr";
pub const AUTH_VAR: &str = "Authorization_access";
pub const LATENCY_VAR: &str = "Latency_in_ms";
pub const BATTERY_VAR: &str = "UE_battery_level_in_hrs_left";
pub const LOAD_VAR: &str = "Load_in_Mbps";
pub const OUTPUT_VAR: &str = "Handoff_decision_value";

/// Latency input used for real-time (voice/gaming) sessions.
pub const REAL_TIME_LATENCY_MS: f64 = 10.0;
/// Latency input used for non-real-time (data) sessions.
pub const NON_REAL_TIME_LATENCY_MS: f64 = 80.0;

pub const DEFAULT_RULES: &str = "\
If (SINR_in_db is near_RTH) or
(Velocity_(V)_of_UE_in_kmh/hr is
high) or (Load_in_Mbps is low) or
(Latency_in_ms is voice/gaming) or
(UE_battery_level_in_hrs_left is
high) then (Handoff_decision_value is
handoff) (1)
if (SINR_in_db is high) then (Handoff_decision_value is handoff)
if (SINR_in_db is low) then (Handoff_decision_value is no_handoff)
if (Load_in_Mbps is high) and (UE_battery_level_in_hrs_left is low) then (Handoff_decision_value is no_handoff)
";

fn trap(a: f64, b: f64, c: f64, d: f64) -> MembershipFunction {
    MembershipFunction::trapezoidal(a, b, c, d).expect("static breakpoints")
}

fn tri(a: f64, b: f64, c: f64) -> MembershipFunction {
    MembershipFunction::triangular(a, b, c).expect("static breakpoints")
}

/// Default input variables, ordered SINR, velocity, authorization, latency,
/// battery, load.
pub fn default_inputs() -> Vec<LinguisticVariable> {
    let v = |name: &str, lo, hi, units: &str, terms: Vec<(&str, MembershipFunction)>| {
        LinguisticVariable::new(name, lo, hi, units, terms).expect("static vocabulary")
    };
    vec![
        // hysteresis-adjusted margin: target - serving - HHM
        v(
            SINR_VAR,
            -10.0,
            10.0,
            "dB",
            vec![
                ("low", trap(-10.0, -10.0, -6.0, -2.0)),
                ("near_RTH", trap(-6.0, -2.0, 2.0, 6.0)),
                ("high", trap(-2.0, 2.0, 10.0, 10.0)),
            ],
        ),
        v(
            VELOCITY_VAR,
            0.0,
            120.0,
            "km/h",
            vec![("low", trap(0.0, 0.0, 5.0, 15.0)), ("high", trap(5.0, 15.0, 120.0, 120.0))],
        ),
        v(AUTH_VAR, 0.0, 1.0, "", vec![("denied", tri(0.0, 0.0, 1.0)), ("granted", tri(0.0, 1.0, 1.0))]),
        v(
            LATENCY_VAR,
            0.0,
            100.0,
            "ms",
            vec![("voice/gaming", trap(0.0, 0.0, 20.0, 50.0)), ("data", trap(20.0, 50.0, 100.0, 100.0))],
        ),
        v(
            BATTERY_VAR,
            0.0,
            10.0,
            "h",
            vec![("low", trap(0.0, 0.0, 2.0, 5.0)), ("high", trap(2.0, 5.0, 10.0, 10.0))],
        ),
        v(
            LOAD_VAR,
            0.0,
            100.0,
            "Mbps",
            vec![("low", trap(0.0, 0.0, 20.0, 60.0)), ("high", trap(20.0, 60.0, 100.0, 100.0))],
        ),
    ]
}

/// Output on [0, 1]. `no_handoff` carries more mass than `handoff`, so equal
/// evidence for both lands below the 0.5 threshold.
pub fn default_output() -> LinguisticVariable {
    LinguisticVariable::new(
        OUTPUT_VAR,
        0.0,
        1.0,
        "",
        vec![("no_handoff", trap(0.0, 0.0, 0.2, 0.5)), ("handoff", tri(0.5, 1.0, 1.0))],
    )
    .expect("static vocabulary")
}

pub fn default_rule_base() -> RuleBase {
    RuleBase::from_text(default_inputs(), default_output(), DEFAULT_RULES, DEFAULT_RESOLUTION)
        .expect("shipped rules parse")
}

/// One handoff decision's crisp inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandoffInputs {
    /// Target SINR minus serving SINR minus the hysteresis margin, dB.
    pub sinr_margin_db: f64,
    pub velocity_kmh: f64,
    pub authorized: bool,
    pub latency_ms: f64,
    pub battery_hours: f64,
    pub load_mbps: f64,
}

impl HandoffInputs {
    /// Maps the six values onto the rule base's inputs by position.
    pub fn to_crisp(&self, rb: &RuleBase) -> Result<CrispInputs, FuzzyError> {
        let vars = rb.inputs();
        if vars.len() != 6 {
            return Err(FuzzyError::InvalidRuleBase(format!(
                "handoff decider needs 6 input variables, rule base has {}",
                vars.len()
            )));
        }
        let values = [
            self.sinr_margin_db,
            self.velocity_kmh,
            if self.authorized { 1.0 } else { 0.0 },
            self.latency_ms,
            self.battery_hours,
            self.load_mbps,
        ];
        Ok(vars.iter().zip(values).map(|(v, x)| (v.name.clone(), x)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandoffValue {
    pub value: f64,
    pub recommend: bool,
}

/// Runs inference and thresholds the crisp value. A rule base that fires
/// nothing yields value 0 and no recommendation.
pub fn decide_handoff(rb: &RuleBase, inputs: &HandoffInputs, threshold: f64) -> Result<HandoffValue, FuzzyError> {
    let crisp = inputs.to_crisp(rb)?;
    match rb.infer(&crisp) {
        Ok(res) => Ok(HandoffValue { value: res.crisp, recommend: res.crisp >= threshold }),
        Err(FuzzyError::NoRuleFired) | Err(FuzzyError::EmptyFuzzySet) => {
            Ok(HandoffValue { value: 0.0, recommend: false })
        }
        Err(e) => Err(e),
    }
}
