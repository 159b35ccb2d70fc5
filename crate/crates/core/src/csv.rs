//! CSV output. Floats carry four decimals, rows end in `\n`, fields that do
//! not apply are empty.

use std::io::{self, Write};

use crate::coexistence::CoexistOutcome;
use crate::engine::EventRecord;
use crate::topology::CellSite;

pub const EVENTS_HEADER: &str = "t_s,ue_id,event,serving,target,sinr_serving_db,sinr_target_db,decision_value,verdict";
pub const COEXIST_HEADER: &str = "mode,seed,node_id,tech,slots_won,standalone_slots_won,utilization";
pub const GRID_HEADER: &str = "x_m,y_m";

/// Four decimals; never prints `-0.0000`.
pub fn fmt4(x: f64) -> String {
    let s = format!("{x:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

fn opt<T>(x: Option<T>, f: impl Fn(T) -> String) -> String {
    x.map(f).unwrap_or_default()
}

pub fn event_row(e: &EventRecord) -> String {
    [
        fmt4(e.t_s),
        e.ue_id.0.to_string(),
        e.event.as_str().to_string(),
        opt(e.serving, |c| c.to_string()),
        opt(e.target, |c| c.to_string()),
        opt(e.sinr_serving_db, fmt4),
        opt(e.sinr_target_db, fmt4),
        opt(e.decision_value, fmt4),
        e.verdict.unwrap_or_default().to_string(),
    ]
    .join(",")
}

pub fn write_events_csv<W: Write>(log: &[EventRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "{EVENTS_HEADER}")?;
    for e in log {
        writeln!(w, "{}", event_row(e))?;
    }
    w.flush()
}

pub fn events_csv(log: &[EventRecord]) -> String {
    let mut buf = Vec::new();
    write_events_csv(log, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn write_coexist_csv<W: Write>(outcomes: &[CoexistOutcome], mut w: W) -> io::Result<()> {
    writeln!(w, "{COEXIST_HEADER}")?;
    for o in outcomes {
        for n in &o.nodes {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                o.mode,
                o.seed,
                n.id,
                n.tech,
                n.slots_won,
                n.standalone_slots_won,
                fmt4(o.utilization)
            )?;
        }
    }
    w.flush()
}

pub fn write_grid_csv<'a, W: Write>(sites: impl IntoIterator<Item = &'a CellSite>, mut w: W) -> io::Result<()> {
    writeln!(w, "{GRID_HEADER}")?;
    for s in sites {
        writeln!(w, "{},{}", fmt4(s.position.x), fmt4(s.position.y))?;
    }
    w.flush()
}
