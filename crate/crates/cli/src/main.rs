//! `hetnet`: run scenarios, single fuzzy decisions, coexistence sweeps and
//! grid dumps from the command line.
//!
//! Exit status: 0 on success, 1 on runtime errors, 2 on usage errors.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};

use hetnet_core::coexistence::{sweep, AccessMode, CoexistConfig, NodeSpec};
use hetnet_core::csv::{write_coexist_csv, write_events_csv, write_grid_csv};
use hetnet_core::engine::{run_scenario, ScenarioConfig};
use hetnet_core::fuzzy::{decide_handoff, HandoffInputs, INPUT_ALIASES};
use hetnet_core::scenario::parse_with_overrides;
use hetnet_core::HandoverScenario;

const SEED_ENV: &str = "HETNET_SEED";

#[derive(Parser)]
#[command(name = "hetnet", version, about = "LTE-U heterogeneous network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full scenario and write the event log as CSV.
    Run(RunArgs),
    /// Evaluate one fuzzy handoff decision and print its crisp value.
    Fuzzy(FuzzyArgs),
    /// Run the unlicensed-band coexistence simulator over a range of seeds.
    Coexist(CoexistArgs),
    /// Print macro site coordinates as CSV.
    Grid(GridArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Override a scenario setting, e.g. `--set handover.hhm_db=6`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed; takes precedence over the file and the HETNET_SEED variable.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: ConfigArgs,
    /// Output CSV; defaults to the file's `output` key, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FuzzyArgs {
    /// Scenario file supplying membership overrides and rules.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input as NAME=VALUE; names are sinr, velocity, auth, latency, battery,
    /// load or the full variable names. All six are required.
    #[arg(long = "input", value_name = "NAME=VALUE", required = true)]
    inputs: Vec<String>,
    /// Recommendation threshold; defaults to the scenario's.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct CoexistArgs {
    /// Scenario file with a `[coexist]` section.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: ConfigArgs,
    /// Access mode; overrides the file.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<AccessMode>,
    /// Slots per run; overrides the file.
    #[arg(long)]
    slots: Option<usize>,
    /// Number of consecutive seeds starting at the resolved seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    n_macro: Option<usize>,
    #[arg(long)]
    radius_m: Option<f64>,
}

fn parse_mode(s: &str) -> Result<AccessMode, String> {
    AccessMode::parse(s).ok_or_else(|| format!("expected greedy, lbt or abs, got `{s}`"))
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ScenarioConfig> {
    let text = match path {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => "[general]\n".to_string(),
    };
    let cfg = parse_with_overrides(&text, overrides)
        .with_context(|| path.map_or("scenario overrides".into(), |p| p.display().to_string()))?;
    Ok(cfg)
}

/// `--seed`, then the file, then `HETNET_SEED`, then the built-in default.
fn resolve_seed(cli: Option<u64>, cfg: &mut ScenarioConfig) -> Result<()> {
    if let Some(s) = cli {
        cfg.seed = Some(s);
    } else if cfg.seed.is_none() {
        if let Ok(v) = std::env::var(SEED_ENV) {
            cfg.seed = Some(v.trim().parse().with_context(|| format!("{SEED_ENV}=`{v}` is not a seed"))?);
        }
    }
    Ok(())
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = load_config(Some(&args.config), &args.common.overrides)?;
    resolve_seed(args.common.seed, &mut cfg)?;
    let out = run_scenario(&cfg)?;
    let path = args.out.or_else(|| cfg.output.as_ref().map(PathBuf::from));
    write_events_csv(&out.events, sink(path.as_deref())?).context("writing events CSV")?;

    let m = &out.metrics;
    eprintln!("seed {}: {} events, {} handovers", out.seed, out.events.len(), m.handover_count);
    for s in HandoverScenario::ALL {
        eprintln!("  {:<12} {}", s.as_str(), m.handovers(s));
    }
    eprintln!("  ping-pong    {}", m.pingpong_count);
    eprintln!("  temp access  {} requested, {} granted", m.temp_access_requests, m.temp_access_grants);
    eprintln!("  throughput   {:.2} Mbps mean per UE", m.mean_throughput_mbps);
    eprintln!("  microcell    {:.1}% of UE time", 100.0 * m.micro_time_fraction);
    Ok(())
}

fn cmd_fuzzy(args: FuzzyArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref(), &args.overrides)?;
    let rb = cfg.fuzzy.build()?;
    let mut values: [Option<f64>; 6] = [None; 6];
    for raw in &args.inputs {
        let (name, value) = raw.split_once('=').ok_or_else(|| usage(format!("--input `{raw}` is not NAME=VALUE")))?;
        let name = name.trim();
        let idx = INPUT_ALIASES
            .iter()
            .position(|a| *a == name)
            .or_else(|| rb.inputs().iter().position(|v| v.name == name))
            .ok_or_else(|| usage(format!("unknown input `{name}`; expected one of {}", INPUT_ALIASES.join(", "))))?;
        let v = match value.trim() {
            "true" => 1.0,
            "false" => 0.0,
            s => s.parse::<f64>().map_err(|_| usage(format!("input `{name}` needs a number, got `{s}`")))?,
        };
        if values[idx].replace(v).is_some() {
            return Err(usage(format!("input `{name}` given twice")));
        }
    }
    let missing: Vec<&str> = INPUT_ALIASES.iter().zip(&values).filter(|(_, v)| v.is_none()).map(|(a, _)| *a).collect();
    if !missing.is_empty() {
        return Err(usage(format!("missing --input for {}", missing.join(", "))));
    }
    let v = values.map(|x| x.unwrap_or_default());
    let inputs = HandoffInputs {
        sinr_margin_db: v[0],
        velocity_kmh: v[1],
        authorized: v[2] >= 0.5,
        latency_ms: v[3],
        battery_hours: v[4],
        load_mbps: v[5],
    };
    let threshold = args.threshold.unwrap_or(cfg.handover.fuzzy_threshold);
    let d = decide_handoff(&rb, &inputs, threshold)?;
    println!("{:.4}", d.value);
    eprintln!("{}", if d.recommend { "handoff recommended" } else { "no handoff" });
    Ok(())
}

fn cmd_coexist(args: CoexistArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref(), &args.common.overrides)?;
    resolve_seed(args.common.seed, &mut cfg)?;
    let mut c = cfg.coexist.clone().unwrap_or_else(|| CoexistConfig {
        nodes: vec![NodeSpec::gateway(1), NodeSpec::wifi(2)],
        ..CoexistConfig::default()
    });
    if let Some(m) = args.mode {
        c.mode = m;
    }
    if let Some(n) = args.slots {
        c.n_slots = n;
    }
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let base = cfg.resolved_seed();
    let seeds: Vec<u64> = (0..args.seeds).map(|i| base.wrapping_add(i)).collect();
    let outcomes = sweep(&c, &seeds)?;
    write_coexist_csv(&outcomes, sink(args.out.as_deref())?).context("writing coexistence CSV")?;
    Ok(())
}

fn cmd_grid(args: GridArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref(), &args.overrides)?;
    if let Some(n) = args.n_macro {
        cfg.n_macro = n;
    }
    if let Some(r) = args.radius_m {
        if !(r.is_finite() && r > 0.0) {
            bail!("--radius-m must be positive, got {r}");
        }
        cfg.cell_radius_m = r;
    }
    let grid = cfg.build_grid()?;
    write_grid_csv(&grid.macros, sink(None)?).context("writing grid CSV")?;
    Ok(())
}

/// Marker for errors that should exit with the usage status.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: String) -> anyhow::Error {
    anyhow!(Usage(msg))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Fuzzy(a) => cmd_fuzzy(a),
        Command::Coexist(a) => cmd_coexist(a),
        Command::Grid(a) => cmd_grid(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<Usage>().is_some() => {
            let mut cmd = Cli::command();
            cmd.error(clap::error::ErrorKind::InvalidValue, e.to_string()).exit()
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
