//! Fuzzy rules and the verbose rule language.
//!
//! One statement per rule:
//!
//! ```text
//! if (<var> is <term>) ((and|or) (<var> is <term>))* then (<outvar> is <term>) [(<label>)]
//! ```
//!
//! Keywords are case-insensitive, names are matched exactly. Statements may
//! span lines and may be separated by `;`. A trailing parenthesized integer
//! such as `(1)` is a rule label and is ignored. `#` starts a comment that
//! runs to the end of the line.
//!
//! Mixed connectives have no precedence: `a or b and c` means `(a or b) and c`.

use std::collections::BTreeMap;
use std::fmt;

use super::{FuzzyError, LinguisticVariable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connective {
    And,
    Or,
}

impl Connective {
    pub fn apply(self, lhs: f64, rhs: f64) -> f64 {
        match self {
            Connective::And => lhs.min(rhs),
            Connective::Or => lhs.max(rhs),
        }
    }
}

impl fmt::Display for Connective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Connective::And => "and",
            Connective::Or => "or",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub variable: String,
    pub term: String,
}

impl Clause {
    pub fn new(variable: impl Into<String>, term: impl Into<String>) -> Self {
        Clause { variable: variable.into(), term: term.into() }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} is {})", self.variable, self.term)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzyRule {
    pub first: Clause,
    pub rest: Vec<(Connective, Clause)>,
    pub consequent: Clause,
}

impl FuzzyRule {
    pub fn clauses(&self) -> impl Iterator<Item = &Clause> {
        std::iter::once(&self.first).chain(self.rest.iter().map(|(_, c)| c))
    }
}

impl fmt::Display for FuzzyRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "if {}", self.first)?;
        for (conn, clause) in &self.rest {
            write!(f, " {conn} {clause}")?;
        }
        write!(f, " then {}", self.consequent)
    }
}

/// Term degrees keyed by variable name, then term name.
pub type Degrees = BTreeMap<String, BTreeMap<String, f64>>;

/// Firing strength of `rule`: AND = min, OR = max, folded left to right.
pub fn evaluate_rule(rule: &FuzzyRule, degrees: &Degrees) -> Result<f64, FuzzyError> {
    let lookup = |clause: &Clause| -> Result<f64, FuzzyError> {
        let terms = degrees
            .get(&clause.variable)
            .ok_or_else(|| FuzzyError::MissingInput(clause.variable.clone()))?;
        terms.get(&clause.term).copied().ok_or_else(|| FuzzyError::UnknownTerm {
            variable: clause.variable.clone(),
            term: clause.term.clone(),
        })
    };
    let mut acc = lookup(&rule.first)?;
    for (conn, clause) in &rule.rest {
        acc = conn.apply(acc, lookup(clause)?);
    }
    Ok(acc)
}

/// Renders rules one per line in the grammar accepted by [`parse_rule_base`].
pub fn render_rules(rules: &[FuzzyRule]) -> String {
    let mut out = String::new();
    for rule in rules {
        out.push_str(&rule.to_string());
        out.push('\n');
    }
    out
}

/// Parses `text` against the given vocabulary.
pub fn parse_rule_base(
    text: &str,
    inputs: &[LinguisticVariable],
    output: &LinguisticVariable,
) -> Result<Vec<FuzzyRule>, FuzzyError> {
    let cleaned = strip_comments(text);
    let mut p = Parser { src: &cleaned, pos: 0 };
    let mut rules = Vec::new();
    loop {
        p.skip_separators();
        if p.at_end() {
            break;
        }
        let rule = p.rule()?;
        for clause in rule.clauses() {
            check_clause(&p, clause, inputs)?;
        }
        check_clause(&p, &rule.consequent, std::slice::from_ref(output))?;
        rules.push(rule);
    }
    if rules.is_empty() {
        return Err(FuzzyError::Parse { line: 1, message: "empty rule base".into() });
    }
    Ok(rules)
}

fn check_clause(p: &Parser<'_>, clause: &Clause, vocab: &[LinguisticVariable]) -> Result<(), FuzzyError> {
    let var = vocab.iter().find(|v| v.name == clause.variable).ok_or_else(|| FuzzyError::Parse {
        line: p.line(),
        message: format!("unknown variable `{}`", clause.variable),
    })?;
    if var.term(&clause.term).is_none() {
        return Err(FuzzyError::Parse {
            line: p.line(),
            message: format!("unknown term `{}` for variable `{}`", clause.term, clause.variable),
        });
    }
    Ok(())
}

fn strip_comments(text: &str) -> String {
    text.lines()
        .map(|l| match l.find('#') {
            Some(i) => &l[..i],
            None => l,
        })
        .collect::<Vec<_>>()
        .join("\n")
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn line(&self) -> usize {
        self.src[..self.pos.min(self.src.len())].matches('\n').count() + 1
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, FuzzyError> {
        Err(FuzzyError::Parse { line: self.line(), message: message.into() })
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn skip_separators(&mut self) {
        loop {
            self.skip_ws();
            if self.rest().starts_with(';') {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Next bare word (letters only), without consuming it.
    fn peek_word(&self) -> &'a str {
        let rest = self.rest();
        let end = rest.find(|c: char| !c.is_ascii_alphabetic()).unwrap_or(rest.len());
        &rest[..end]
    }

    fn keyword(&mut self, kw: &str) -> bool {
        self.skip_ws();
        let word = self.peek_word();
        if word.eq_ignore_ascii_case(kw) {
            self.pos += word.len();
            true
        } else {
            false
        }
    }

    fn rule(&mut self) -> Result<FuzzyRule, FuzzyError> {
        if !self.keyword("if") {
            let found: String = self.rest().split_whitespace().next().unwrap_or("").chars().take(24).collect();
            return self.err(format!("expected `if`, found `{found}`"));
        }
        let first = self.clause()?;
        let mut rest = Vec::new();
        let consequent = loop {
            if self.keyword("and") {
                rest.push((Connective::And, self.clause()?));
            } else if self.keyword("or") {
                rest.push((Connective::Or, self.clause()?));
            } else if self.keyword("then") {
                break self.clause()?;
            } else if self.at_end() {
                return self.err("unexpected end of input, expected `and`, `or` or `then`");
            } else {
                let found: String = self.rest().split_whitespace().next().unwrap_or("").chars().take(24).collect();
                return self.err(format!("expected `and`, `or` or `then`, found `{found}`"));
            }
        };
        self.skip_label();
        Ok(FuzzyRule { first, rest, consequent })
    }

    fn skip_label(&mut self) {
        self.skip_ws();
        let rest = self.rest();
        if let Some(inner) = rest.strip_prefix('(') {
            if let Some(close) = inner.find(')') {
                let label = inner[..close].trim();
                if !label.is_empty() && label.chars().all(|c| c.is_ascii_digit()) {
                    self.pos += close + 2;
                }
            }
        }
    }

    /// `( <var> is <term> )`, where the parentheses may nest inside names.
    fn clause(&mut self) -> Result<Clause, FuzzyError> {
        self.skip_ws();
        if !self.rest().starts_with('(') {
            return self.err("expected `(` to open a clause");
        }
        let mut depth = 0usize;
        let mut close = None;
        for (i, ch) in self.rest().char_indices() {
            match ch {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        let Some(close) = close else {
            return self.err("unbalanced parentheses in clause");
        };
        let body = &self.rest()[1..close];
        let tokens: Vec<&str> = body.split_whitespace().collect();
        if tokens.len() != 3 || !tokens[1].eq_ignore_ascii_case("is") {
            return self.err(format!("malformed clause `({})`, expected `(<variable> is <term>)`", body.trim()));
        }
        let clause = Clause::new(tokens[0], tokens[2]);
        self.pos += close + 1;
        Ok(clause)
    }
}
