use std::collections::BTreeMap;

use super::rules::{evaluate_rule, parse_rule_base, render_rules, Degrees, FuzzyRule};
use super::{FuzzyError, LinguisticVariable};

pub const DEFAULT_RESOLUTION: usize = 1001;

/// Crisp input values keyed by variable name.
pub type CrispInputs = BTreeMap<String, f64>;

/// Mamdani rule base: immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleBase {
    inputs: Vec<LinguisticVariable>,
    output: LinguisticVariable,
    rules: Vec<FuzzyRule>,
    resolution: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    /// Aggregated output set sampled at `resolution` evenly spaced points
    /// spanning the output universe.
    pub aggregated: Vec<f64>,
    pub crisp: f64,
}

impl RuleBase {
    pub fn new(
        inputs: Vec<LinguisticVariable>,
        output: LinguisticVariable,
        rules: Vec<FuzzyRule>,
        resolution: usize,
    ) -> Result<Self, FuzzyError> {
        if resolution < 3 {
            return Err(FuzzyError::InvalidRuleBase(format!("resolution {resolution} < 3")));
        }
        if rules.is_empty() {
            return Err(FuzzyError::InvalidRuleBase("no rules".into()));
        }
        for (i, v) in inputs.iter().enumerate() {
            if inputs[..i].iter().any(|o| o.name == v.name) || v.name == output.name {
                return Err(FuzzyError::InvalidRuleBase(format!("duplicate variable {}", v.name)));
            }
        }
        // Round-trip through the text form to validate the vocabulary.
        let text = render_rules(&rules);
        parse_rule_base(&text, &inputs, &output)?;
        Ok(RuleBase { inputs, output, rules, resolution })
    }

    pub fn from_text(
        inputs: Vec<LinguisticVariable>,
        output: LinguisticVariable,
        text: &str,
        resolution: usize,
    ) -> Result<Self, FuzzyError> {
        let rules = parse_rule_base(text, &inputs, &output)?;
        Self::new(inputs, output, rules, resolution)
    }

    pub fn inputs(&self) -> &[LinguisticVariable] {
        &self.inputs
    }

    pub fn output(&self) -> &LinguisticVariable {
        &self.output
    }

    pub fn rules(&self) -> &[FuzzyRule] {
        &self.rules
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn with_resolution(&self, resolution: usize) -> Result<Self, FuzzyError> {
        Self::new(self.inputs.clone(), self.output.clone(), self.rules.clone(), resolution)
    }

    pub fn render(&self) -> String {
        render_rules(&self.rules)
    }

    pub fn fuzzify_all(&self, inputs: &CrispInputs) -> Result<Degrees, FuzzyError> {
        if let Some(unknown) = inputs.keys().find(|k| !self.inputs.iter().any(|v| &v.name == *k)) {
            return Err(FuzzyError::UnknownInput(unknown.clone()));
        }
        self.inputs
            .iter()
            .map(|v| {
                let x = inputs.get(&v.name).ok_or_else(|| FuzzyError::MissingInput(v.name.clone()))?;
                Ok((v.name.clone(), v.fuzzify(*x)))
            })
            .collect()
    }

    /// Firing strength of each rule, in rule order.
    pub fn activations(&self, inputs: &CrispInputs) -> Result<Vec<f64>, FuzzyError> {
        let degrees = self.fuzzify_all(inputs)?;
        self.rules.iter().map(|r| evaluate_rule(r, &degrees)).collect()
    }

    /// Min implication, max aggregation, centroid defuzzification.
    pub fn infer(&self, inputs: &CrispInputs) -> Result<InferenceResult, FuzzyError> {
        let activations = self.activations(inputs)?;
        if activations.iter().all(|&a| a <= 0.0) {
            return Err(FuzzyError::NoRuleFired);
        }
        // Strongest activation per consequent term; max distributes over min.
        let mut clip: BTreeMap<&str, f64> = BTreeMap::new();
        for (rule, &a) in self.rules.iter().zip(&activations) {
            let e = clip.entry(rule.consequent.term.as_str()).or_insert(0.0);
            *e = e.max(a);
        }
        let terms: Vec<_> = clip
            .into_iter()
            .filter(|&(_, a)| a > 0.0)
            .map(|(name, a)| (self.output.term(name).expect("validated consequent").mf, a))
            .collect();
        let (lo, hi) = (self.output.min, self.output.max);
        let n = self.resolution;
        let step = (hi - lo) / (n - 1) as f64;
        let aggregated: Vec<f64> = (0..n)
            .map(|i| {
                let x = lo + step * i as f64;
                terms.iter().fold(0.0f64, |acc, (mf, a)| acc.max(mf.eval(x).min(*a)))
            })
            .collect();
        let crisp = defuzzify_centroid(&aggregated, lo, hi)?;
        Ok(InferenceResult { aggregated, crisp })
    }
}

/// Centroid of a fuzzy set sampled on a uniform grid spanning `[lo, hi]`.
pub fn defuzzify_centroid(samples: &[f64], lo: f64, hi: f64) -> Result<f64, FuzzyError> {
    if samples.len() < 2 {
        return Err(FuzzyError::InvalidRuleBase("need at least two samples".into()));
    }
    let step = (hi - lo) / (samples.len() - 1) as f64;
    let (moment, mass) = samples.iter().enumerate().fold((0.0, 0.0), |(m, s), (i, &mu)| {
        let x = lo + step * i as f64;
        (m + x * mu, s + mu)
    });
    if mass <= 0.0 {
        return Err(FuzzyError::EmptyFuzzySet);
    }
    Ok((moment / mass).clamp(lo, hi))
}
