//! Scenario files.
//!
//! ```text
//! # comment
//! [general]
//! seed = 42
//! n_ues = 20
//!
//! [handover]
//! hhm_db = 3
//! fuzzy.load.high = trap(20, 60, 100, 100)
//!
//! [fuzzy_rules]
//! if (SINR_in_db is high) then (Handoff_decision_value is handoff)
//! ```
//!
//! `[general]` is required; every other section and key is optional and
//! defaults to the built-in scenario. Unknown sections or keys, repeated keys
//! and malformed values are errors carrying their line number. The
//! `[fuzzy_rules]` body is kept verbatim and handed to the rule parser.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::coexistence::{AccessMode, CoexistConfig, NodeSpec, Tech};
use crate::engine::{is_fuzzy_alias, CellPolicy, EngineError, ScenarioConfig};
use crate::fuzzy::MembershipFunction;
use crate::handover::Decider;

pub const SECTIONS: [&str; 6] = ["general", "radio", "handover", "fuzzy_rules", "auth", "coexist"];

/// Where a setting came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Override => f.write_str("--set"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{origin}: unknown section [{name}]")]
    UnknownSection { origin: Origin, name: String },
    #[error("line {line}: section [{name}] appears twice")]
    DuplicateSection { line: usize, name: String },
    #[error("{origin}: unknown key `{key}` in [{section}]")]
    UnknownKey { origin: Origin, section: String, key: String },
    #[error("line {line}: duplicate key `{key}` in [{section}] (first set on line {first})")]
    DuplicateKey { line: usize, section: String, key: String, first: usize },
    #[error("{origin}: `{key}` in [{section}] expects {expected}, got `{value}`")]
    Type { origin: Origin, section: String, key: String, expected: &'static str, value: String },
    #[error("{origin}: invalid `{key}` in [{section}]: {message}")]
    Invalid { origin: Origin, section: String, key: String, message: String },
    #[error("missing required key `{key}` in [{section}]")]
    Missing { section: String, key: String },
    #[error("missing required section [{0}]")]
    MissingSection(String),
    #[error("bad override `{0}`: expected section.key=value")]
    BadOverride(String),
    #[error(transparent)]
    Config(#[from] EngineError),
}

#[derive(Debug, Clone)]
struct Entry {
    section: String,
    key: String,
    value: String,
    origin: Origin,
}

impl Entry {
    fn type_err(&self, expected: &'static str) -> ScenarioError {
        ScenarioError::Type {
            origin: self.origin,
            section: self.section.clone(),
            key: self.key.clone(),
            expected,
            value: self.value.clone(),
        }
    }

    fn invalid(&self, message: impl Into<String>) -> ScenarioError {
        ScenarioError::Invalid {
            origin: self.origin,
            section: self.section.clone(),
            key: self.key.clone(),
            message: message.into(),
        }
    }

    fn unknown(&self) -> ScenarioError {
        ScenarioError::UnknownKey { origin: self.origin, section: self.section.clone(), key: self.key.clone() }
    }

    fn parse<T: FromStr>(&self, expected: &'static str) -> Result<T, ScenarioError> {
        self.value.parse().map_err(|_| self.type_err(expected))
    }

    fn real(&self) -> Result<f64, ScenarioError> {
        let v: f64 = self.parse("a number")?;
        if !v.is_finite() {
            return Err(self.type_err("a finite number"));
        }
        Ok(v)
    }

    fn positive(&self) -> Result<f64, ScenarioError> {
        let v = self.real()?;
        if v <= 0.0 {
            return Err(self.invalid(format!("must be > 0, got {v}")));
        }
        Ok(v)
    }

    fn nonneg(&self) -> Result<f64, ScenarioError> {
        let v = self.real()?;
        if v < 0.0 {
            return Err(self.invalid(format!("must be >= 0, got {v}")));
        }
        Ok(v)
    }

    fn unit(&self) -> Result<f64, ScenarioError> {
        let v = self.real()?;
        if !(0.0..=1.0).contains(&v) {
            return Err(self.invalid(format!("must lie in [0, 1], got {v}")));
        }
        Ok(v)
    }

    fn boolean(&self) -> Result<bool, ScenarioError> {
        match self.value.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(self.type_err("true or false")),
        }
    }

    fn list<T: FromStr>(&self, expected: &'static str) -> Result<Vec<T>, ScenarioError> {
        if self.value.is_empty() {
            return Ok(Vec::new());
        }
        self.value.split(',').map(|s| s.trim().parse().map_err(|_| self.type_err(expected))).collect()
    }
}

#[derive(Debug, Default)]
struct Document {
    entries: Vec<Entry>,
    sections: BTreeSet<String>,
    rules: Option<String>,
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(a, _)| a)
}

fn section_header(line: &str) -> Option<&str> {
    let t = line.trim();
    let name = t.strip_prefix('[')?.strip_suffix(']')?.trim();
    (!name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')).then_some(name)
}

fn read_document(text: &str) -> Result<Document, ScenarioError> {
    let mut doc = Document::default();
    let mut section: Option<String> = None;
    let mut rules: Option<Vec<&str>> = None;
    let mut first_seen: BTreeMap<(String, String), usize> = BTreeMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if let Some(name) = section_header(strip_comment(raw)) {
            if !SECTIONS.contains(&name) {
                return Err(ScenarioError::UnknownSection { origin: Origin::Line(line), name: name.into() });
            }
            if !doc.sections.insert(name.to_string()) {
                return Err(ScenarioError::DuplicateSection { line, name: name.into() });
            }
            if let Some(body) = rules.take() {
                doc.rules = Some(body.join("\n"));
            }
            if name == "fuzzy_rules" {
                rules = Some(Vec::new());
            }
            section = Some(name.to_string());
            continue;
        }
        if let Some(body) = rules.as_mut() {
            body.push(raw);
            continue;
        }
        let content = strip_comment(raw).trim();
        if content.is_empty() {
            continue;
        }
        let Some(sec) = section.clone() else {
            return Err(ScenarioError::Syntax { line, message: "setting before any [section] header".into() });
        };
        let Some((k, v)) = content.split_once('=') else {
            return Err(ScenarioError::Syntax { line, message: format!("expected `key = value`, got `{content}`") });
        };
        let (key, value) = (k.trim().to_string(), v.trim().to_string());
        if key.is_empty() {
            return Err(ScenarioError::Syntax { line, message: "empty key".into() });
        }
        if let Some(&first) = first_seen.get(&(sec.clone(), key.clone())) {
            return Err(ScenarioError::DuplicateKey { line, section: sec, key, first });
        }
        first_seen.insert((sec.clone(), key.clone()), line);
        doc.entries.push(Entry { section: sec, key, value, origin: Origin::Line(line) });
    }
    if let Some(body) = rules.take() {
        doc.rules = Some(body.join("\n"));
    }
    doc.rules = doc.rules.map(|r| r.trim().to_string());
    Ok(doc)
}

/// Parses a scenario file. Equivalent to [`parse_with_overrides`] with no
/// overrides.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    parse_with_overrides(text, &[])
}

/// Parses a scenario file, then applies `section.key=value` overrides
/// (replacing or adding keys) before building the config.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<ScenarioConfig, ScenarioError> {
    let mut doc = read_document(text)?;
    if !doc.sections.contains("general") {
        return Err(ScenarioError::MissingSection("general".into()));
    }
    for o in overrides {
        let (path, value) = o.split_once('=').ok_or_else(|| ScenarioError::BadOverride(o.clone()))?;
        let (section, key) = path.trim().split_once('.').ok_or_else(|| ScenarioError::BadOverride(o.clone()))?;
        if !SECTIONS.contains(&section) || section == "fuzzy_rules" {
            return Err(ScenarioError::UnknownSection { origin: Origin::Override, name: section.into() });
        }
        let entry =
            Entry { section: section.into(), key: key.trim().into(), value: value.trim().into(), origin: Origin::Override };
        match doc.entries.iter_mut().find(|e| e.section == entry.section && e.key == entry.key) {
            Some(e) => *e = entry,
            None => doc.entries.push(entry),
        }
    }
    build(doc)
}

fn build(doc: Document) -> Result<ScenarioConfig, ScenarioError> {
    let mut cfg = ScenarioConfig::default();
    let mut cells: BTreeMap<u32, (Option<u32>, CellPolicy)> = BTreeMap::new();
    let mut coexist: Option<CoexistConfig> = None;
    let mut coexist_nodes = false;

    for e in &doc.entries {
        match e.section.as_str() {
            "general" => general(&mut cfg, e)?,
            "radio" => {
                let r = &mut cfg.radio;
                match e.key.as_str() {
                    "bandwidth_mhz" => r.bandwidth_mhz = e.positive()?,
                    "shadowing_std_db" => r.shadowing_std_db = e.nonneg()?,
                    "shadowing_decorrelation_m" => r.shadowing_decorrelation_m = e.nonneg()?,
                    "macro_tx_dbm" => r.macro_tx_dbm = e.real()?,
                    "micro_tx_dbm" => r.micro_tx_dbm = e.real()?,
                    _ => return Err(e.unknown()),
                }
            }
            "handover" => handover(&mut cfg, e)?,
            "auth" => auth(&mut cfg, &mut cells, e)?,
            "coexist" => {
                let c = coexist.get_or_insert_with(CoexistConfig::default);
                coexist_nodes |= e.key == "nodes";
                coexist_key(c, e)?;
            }
            _ => return Err(e.unknown()),
        }
    }
    for (id, (owner, mut policy)) in cells {
        policy.owner = owner
            .ok_or_else(|| ScenarioError::Missing { section: "auth".into(), key: format!("cell.{id}.owner") })?;
        cfg.auth.cells.insert(id, policy);
    }
    if doc.sections.contains("coexist") && !coexist_nodes {
        return Err(ScenarioError::Missing { section: "coexist".into(), key: "nodes".into() });
    }
    cfg.coexist = coexist;
    cfg.fuzzy.rules = doc.rules;
    cfg.validate()?;
    Ok(cfg)
}

fn general(cfg: &mut ScenarioConfig, e: &Entry) -> Result<(), ScenarioError> {
    match e.key.as_str() {
        "seed" => cfg.seed = Some(e.parse("an unsigned integer")?),
        "sim_time_s" => cfg.sim_time_s = e.positive()?,
        "dt_s" => cfg.dt_s = e.positive()?,
        "n_macro" => {
            cfg.n_macro = e.parse("an unsigned integer")?;
            if cfg.n_macro == 0 {
                return Err(e.invalid("must be at least 1"));
            }
        }
        "micro_per_cell" => cfg.micro_per_cell = e.parse("an unsigned integer")?,
        "n_ues" => cfg.n_ues = e.parse("an unsigned integer")?,
        "cell_radius_m" => cfg.cell_radius_m = e.positive()?,
        "v_min_kmh" => cfg.v_min_kmh = e.nonneg()?,
        "v_max_kmh" => cfg.v_max_kmh = e.nonneg()?,
        "load_per_ue_mbps" => cfg.load_per_ue_mbps = e.nonneg()?,
        "output" => {
            if e.value.is_empty() {
                return Err(e.invalid("empty path"));
            }
            cfg.output = Some(e.value.clone());
        }
        _ => return Err(e.unknown()),
    }
    Ok(())
}

fn membership(e: &Entry) -> Result<MembershipFunction, ScenarioError> {
    let v = e.value.replace(' ', "");
    let (name, rest) = v.split_once('(').ok_or_else(|| e.type_err("tri(a, b, c) or trap(a, b, c, d)"))?;
    let args = rest.strip_suffix(')').ok_or_else(|| e.type_err("tri(a, b, c) or trap(a, b, c, d)"))?;
    let pts: Vec<f64> = args
        .split(',')
        .map(|s| s.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| e.type_err("tri(a, b, c) or trap(a, b, c, d)"))?;
    let mf = match (name, pts.as_slice()) {
        ("tri", &[a, b, c]) => MembershipFunction::triangular(a, b, c),
        ("trap", &[a, b, c, d]) => MembershipFunction::trapezoidal(a, b, c, d),
        _ => return Err(e.type_err("tri(a, b, c) or trap(a, b, c, d)")),
    };
    mf.map_err(|err| e.invalid(err.to_string()))
}

fn handover(cfg: &mut ScenarioConfig, e: &Entry) -> Result<(), ScenarioError> {
    let h = &mut cfg.handover;
    match e.key.as_str() {
        "hhm_db" => h.hhm_db = e.nonneg()?,
        "velocity_gate_kmh" => h.velocity_gate_kmh = e.real()?,
        "reactive_threshold_dbm" => h.reactive_threshold_dbm = e.real()?,
        "decider" => {
            h.decider = match e.value.as_str() {
                "crisp" => Decider::Crisp,
                "fuzzy" => Decider::Fuzzy,
                _ => return Err(e.type_err("crisp or fuzzy")),
            }
        }
        "fuzzy_threshold" => h.fuzzy_threshold = e.unit()?,
        "pingpong_window_s" => h.pingpong_window_s = e.nonneg()?,
        "prediction_horizon_s" => h.prediction_horizon_s = e.nonneg()?,
        "fuzzy.resolution" => {
            let r: usize = e.parse("an unsigned integer")?;
            if r < 3 {
                return Err(e.invalid(format!("must be at least 3, got {r}")));
            }
            cfg.fuzzy.resolution = r;
        }
        key => {
            let mut parts = key.splitn(3, '.');
            let (Some("fuzzy"), Some(alias), Some(field)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(e.unknown());
            };
            if !is_fuzzy_alias(alias) {
                return Err(e.unknown());
            }
            if field == "universe" {
                let v: Vec<f64> = e.list("two numbers `lo, hi`")?;
                match v.as_slice() {
                    &[lo, hi] if lo.is_finite() && hi.is_finite() && lo < hi => {
                        cfg.fuzzy.universes.insert(alias.into(), (lo, hi));
                    }
                    _ => return Err(e.invalid("need finite `lo, hi` with lo < hi")),
                }
            } else {
                cfg.fuzzy.terms.insert((alias.into(), field.into()), membership(e)?);
            }
        }
    }
    Ok(())
}

fn auth(
    cfg: &mut ScenarioConfig,
    cells: &mut BTreeMap<u32, (Option<u32>, CellPolicy)>,
    e: &Entry,
) -> Result<(), ScenarioError> {
    if e.key == "default" {
        cfg.auth.default_open = match e.value.as_str() {
            "open" => true,
            "closed" => false,
            _ => return Err(e.type_err("open or closed")),
        };
        return Ok(());
    }
    let mut parts = e.key.splitn(3, '.');
    let (Some("cell"), Some(id), Some(field)) = (parts.next(), parts.next(), parts.next()) else {
        return Err(e.unknown());
    };
    let id: u32 = id.parse().map_err(|_| e.unknown())?;
    let (owner, policy) = cells.entry(id).or_insert_with(|| (None, CellPolicy::closed(0)));
    match field {
        "owner" => *owner = Some(e.parse("a user id")?),
        "users" => policy.users = e.list::<u32>("a comma-separated list of user ids")?.into_iter().collect(),
        "auto_grant" => policy.auto_grant = e.boolean()?,
        "grant_delay_s" => policy.grant_delay_s = e.nonneg()?,
        _ => return Err(e.unknown()),
    }
    Ok(())
}

fn node(e: &Entry, s: &str) -> Result<NodeSpec, ScenarioError> {
    let expected = "nodes like `lteu_gw:1, lteu_ue_ul:2:1, wifi:3`";
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let tech = parts.first().and_then(|t| Tech::parse(t)).ok_or_else(|| e.type_err(expected))?;
    let num = |i: usize| parts.get(i).and_then(|p| p.parse::<u32>().ok()).ok_or_else(|| e.type_err(expected));
    let id = num(1)?;
    match (tech, parts.len()) {
        (Tech::LteuUeUl, 3) => Ok(NodeSpec::uplink(id, num(2)?)),
        (Tech::LteuGw, 2) => Ok(NodeSpec::gateway(id)),
        (Tech::Wifi, 2) => Ok(NodeSpec::wifi(id)),
        _ => Err(e.type_err(expected)),
    }
}

fn coexist_key(c: &mut CoexistConfig, e: &Entry) -> Result<(), ScenarioError> {
    let count = |e: &Entry| e.parse::<usize>("an unsigned integer");
    let at_least_one = |e: &Entry| {
        let n = count(e)?;
        if n == 0 {
            return Err(e.invalid("must be at least 1"));
        }
        Ok(n)
    };
    let window = |e: &Entry| {
        let w: u32 = e.parse("an unsigned integer")?;
        if !(w.wrapping_add(1)).is_power_of_two() {
            return Err(e.invalid(format!("must be 2^k - 1, got {w}")));
        }
        Ok(w)
    };
    match e.key.as_str() {
        "n_slots" => c.n_slots = count(e)?,
        "mode" => c.mode = AccessMode::parse(&e.value).ok_or_else(|| e.type_err("greedy, lbt or abs"))?,
        "abs_ratio" => c.abs_ratio = e.unit()?,
        "wifi_rts_cts" => c.wifi_rts_cts = e.boolean()?,
        "cca_slots" => c.cca_slots = at_least_one(e)?,
        "ul_lookahead_slots" => c.ul_lookahead_slots = count(e)?,
        "cw_min" => c.cw_min = window(e)?,
        "cw_max" => c.cw_max = window(e)?,
        "wifi_frame_slots" => c.wifi_frame_slots = at_least_one(e)?,
        "nodes" => {
            c.nodes = e
                .value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| node(e, s))
                .collect::<Result<_, _>>()?;
            if c.nodes.is_empty() {
                return Err(e.invalid("at least one node is required"));
            }
        }
        _ => return Err(e.unknown()),
    }
    Ok(())
}

fn render_mf(mf: &MembershipFunction) -> String {
    let p: Vec<String> = mf.breakpoints().iter().map(|x| x.to_string()).collect();
    match mf {
        MembershipFunction::Triangular { .. } => format!("tri({})", p.join(", ")),
        MembershipFunction::Trapezoidal { .. } => format!("trap({})", p.join(", ")),
    }
}

fn join<T: ToString>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Writes `cfg` in the file format; parsing the result gives back `cfg`.
pub fn render(cfg: &ScenarioConfig) -> String {
    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, "[general]");
    if let Some(seed) = cfg.seed {
        let _ = writeln!(w, "seed = {seed}");
    }
    let _ = writeln!(w, "sim_time_s = {}", cfg.sim_time_s);
    let _ = writeln!(w, "dt_s = {}", cfg.dt_s);
    let _ = writeln!(w, "n_macro = {}", cfg.n_macro);
    let _ = writeln!(w, "micro_per_cell = {}", cfg.micro_per_cell);
    let _ = writeln!(w, "n_ues = {}", cfg.n_ues);
    let _ = writeln!(w, "cell_radius_m = {}", cfg.cell_radius_m);
    let _ = writeln!(w, "v_min_kmh = {}", cfg.v_min_kmh);
    let _ = writeln!(w, "v_max_kmh = {}", cfg.v_max_kmh);
    let _ = writeln!(w, "load_per_ue_mbps = {}", cfg.load_per_ue_mbps);
    if let Some(out) = &cfg.output {
        let _ = writeln!(w, "output = {out}");
    }

    let r = &cfg.radio;
    let _ = writeln!(w, "\n[radio]");
    let _ = writeln!(w, "bandwidth_mhz = {}", r.bandwidth_mhz);
    let _ = writeln!(w, "shadowing_std_db = {}", r.shadowing_std_db);
    let _ = writeln!(w, "shadowing_decorrelation_m = {}", r.shadowing_decorrelation_m);
    let _ = writeln!(w, "macro_tx_dbm = {}", r.macro_tx_dbm);
    let _ = writeln!(w, "micro_tx_dbm = {}", r.micro_tx_dbm);

    let h = &cfg.handover;
    let _ = writeln!(w, "\n[handover]");
    let _ = writeln!(w, "hhm_db = {}", h.hhm_db);
    let _ = writeln!(w, "velocity_gate_kmh = {}", h.velocity_gate_kmh);
    let _ = writeln!(w, "reactive_threshold_dbm = {}", h.reactive_threshold_dbm);
    let _ = writeln!(w, "decider = {}", h.decider.as_str());
    let _ = writeln!(w, "fuzzy_threshold = {}", h.fuzzy_threshold);
    let _ = writeln!(w, "pingpong_window_s = {}", h.pingpong_window_s);
    let _ = writeln!(w, "prediction_horizon_s = {}", h.prediction_horizon_s);
    let _ = writeln!(w, "fuzzy.resolution = {}", cfg.fuzzy.resolution);
    for (alias, (lo, hi)) in &cfg.fuzzy.universes {
        let _ = writeln!(w, "fuzzy.{alias}.universe = {lo}, {hi}");
    }
    for ((alias, term), mf) in &cfg.fuzzy.terms {
        let _ = writeln!(w, "fuzzy.{alias}.{term} = {}", render_mf(mf));
    }

    if let Some(rules) = &cfg.fuzzy.rules {
        let _ = writeln!(w, "\n[fuzzy_rules]\n{rules}");
    }

    let _ = writeln!(w, "\n[auth]");
    let _ = writeln!(w, "default = {}", if cfg.auth.default_open { "open" } else { "closed" });
    for (id, p) in &cfg.auth.cells {
        let _ = writeln!(w, "cell.{id}.owner = {}", p.owner);
        let _ = writeln!(w, "cell.{id}.users = {}", join(&p.users));
        let _ = writeln!(w, "cell.{id}.auto_grant = {}", p.auto_grant);
        let _ = writeln!(w, "cell.{id}.grant_delay_s = {}", p.grant_delay_s);
    }

    if let Some(c) = &cfg.coexist {
        let _ = writeln!(w, "\n[coexist]");
        let _ = writeln!(w, "n_slots = {}", c.n_slots);
        let _ = writeln!(w, "mode = {}", c.mode);
        let _ = writeln!(w, "abs_ratio = {}", c.abs_ratio);
        let _ = writeln!(w, "wifi_rts_cts = {}", c.wifi_rts_cts);
        let _ = writeln!(w, "cca_slots = {}", c.cca_slots);
        let _ = writeln!(w, "ul_lookahead_slots = {}", c.ul_lookahead_slots);
        let _ = writeln!(w, "cw_min = {}", c.cw_min);
        let _ = writeln!(w, "cw_max = {}", c.cw_max);
        let _ = writeln!(w, "wifi_frame_slots = {}", c.wifi_frame_slots);
        let nodes = c.nodes.iter().map(|n| match n.gateway {
            Some(g) => format!("{}:{}:{g}", n.tech, n.id),
            None => format!("{}:{}", n.tech, n.id),
        });
        let _ = writeln!(w, "nodes = {}", join(nodes));
    }
    s
}
