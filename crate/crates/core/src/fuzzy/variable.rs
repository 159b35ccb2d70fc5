use std::collections::BTreeMap;

use super::{FuzzyError, MembershipFunction};

/// A named linguistic term of a variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub name: String,
    pub mf: MembershipFunction,
}

/// Input or output variable with a bounded universe of discourse.
#[derive(Debug, Clone, PartialEq)]
pub struct LinguisticVariable {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub units: String,
    terms: Vec<Term>,
}

impl LinguisticVariable {
    pub fn new(
        name: impl Into<String>,
        min: f64,
        max: f64,
        units: impl Into<String>,
        terms: Vec<(impl Into<String>, MembershipFunction)>,
    ) -> Result<Self, FuzzyError> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(FuzzyError::InvalidVariable(format!("bad variable name {name:?}")));
        }
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(FuzzyError::InvalidVariable(format!("{name}: universe [{min}, {max}] is empty")));
        }
        let terms: Vec<Term> = terms
            .into_iter()
            .map(|(n, mf)| Term { name: n.into(), mf })
            .collect();
        if terms.is_empty() {
            return Err(FuzzyError::InvalidVariable(format!("{name}: no terms")));
        }
        for (i, t) in terms.iter().enumerate() {
            if t.name.is_empty() || t.name.chars().any(|c| c.is_whitespace() || c == '(' || c == ')') {
                return Err(FuzzyError::InvalidVariable(format!("{name}: bad term name {:?}", t.name)));
            }
            if terms[..i].iter().any(|o| o.name == t.name) {
                return Err(FuzzyError::InvalidVariable(format!("{name}: duplicate term {}", t.name)));
            }
            t.mf.validate()?;
            let (lo, hi) = t.mf.support();
            if lo < min || hi > max {
                return Err(FuzzyError::InvalidVariable(format!(
                    "{name}: term {} {} leaves universe [{min}, {max}]",
                    t.name, t.mf
                )));
            }
        }
        Ok(LinguisticVariable { name, min, max, units: units.into(), terms })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term(&self, name: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.name == name)
    }

    pub fn clamp(&self, x: f64) -> f64 {
        if x.is_nan() {
            self.min
        } else {
            x.clamp(self.min, self.max)
        }
    }

    /// Degree of every term at `x`, after clamping `x` into the universe.
    pub fn fuzzify(&self, x: f64) -> BTreeMap<String, f64> {
        let x = self.clamp(x);
        self.terms.iter().map(|t| (t.name.clone(), t.mf.eval(x))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn low_high() -> LinguisticVariable {
        LinguisticVariable::new(
            "x",
            0.0,
            10.0,
            "",
            vec![
                ("low", MembershipFunction::triangular(0.0, 0.0, 10.0).unwrap()),
                ("high", MembershipFunction::triangular(0.0, 10.0, 10.0).unwrap()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn fuzzify_endpoint_crossover_and_clamp() {
        let v = low_high();
        let at10 = v.fuzzify(10.0);
        assert_eq!(at10["low"], 0.0);
        assert_eq!(at10["high"], 1.0);
        let at5 = v.fuzzify(5.0);
        assert!((at5["low"] - 0.5).abs() < 1e-12);
        assert!((at5["high"] - 0.5).abs() < 1e-12);
        assert_eq!(v.fuzzify(15.0), at10);
        assert_eq!(v.fuzzify(-3.0)["low"], 1.0);
    }

    #[test]
    fn rejects_duplicate_terms_and_escaping_terms() {
        let mf = MembershipFunction::triangular(0.0, 1.0, 2.0).unwrap();
        assert!(LinguisticVariable::new("v", 0.0, 2.0, "", vec![("a", mf), ("a", mf)]).is_err());
        assert!(LinguisticVariable::new("v", 0.0, 1.5, "", vec![("a", mf)]).is_err());
        let none: Vec<(String, MembershipFunction)> = vec![];
        assert!(LinguisticVariable::new("v", 0.0, 1.0, "", none).is_err());
        assert!(LinguisticVariable::new("v", 1.0, 1.0, "", vec![("a", mf)]).is_err());
    }
}
