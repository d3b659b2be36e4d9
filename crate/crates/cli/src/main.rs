//! `dss`: lifetime math, scenario simulation, accession analysis and the
//! lottery demo.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use dss_core::ledger::Lottery;
use dss_core::node::{self, BatteryConfig, DutyCycleConfig};
use dss_core::registry;
use dss_core::sim::{self, SimConfig};
use dss_core::thermal::{self, FreezerState, THERMAL_TRACE_HEADER};
use dss_core::{config, ValidityPolicy};

const ONE_YEAR_H: f64 = 8760.0;
const PUBLISHED_SLEEP_H: f64 = 0.73;

fn config_help() -> String {
    format!(
        "Config file keys (TOML, `version = 1` optional, unknown keys rejected).\n\
         Command-line flags override values from the file, which override defaults.\n\n{}",
        config::key_reference()
    )
}

#[derive(Parser)]
#[command(name = "dss", version, about = "Freezer-network seed backup simulator", after_help = config_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Battery lifetime for a sleep period, or the sleep period for a target lifetime.
    Lifetime(LifetimeArgs),
    /// Run a scenario and write its trace and summary.
    #[command(after_help = config_help())]
    Simulate(SimulateArgs),
    /// Depositor-redundancy histogram and at-risk species for an accession CSV.
    Redundancy(RedundancyArgs),
    /// Replay and verify a ledger log, or run a demo round.
    Lottery(LotteryArgs),
    /// Freezer temperature trace for one node.
    Thermal(ThermalArgs),
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("mode").required(true).args(["sleep_hours", "target_hours"])))]
struct LifetimeArgs {
    /// Sleep period X in hours.
    #[arg(long)]
    sleep_hours: Option<f64>,
    /// Required lifetime in hours.
    #[arg(long)]
    target_hours: Option<f64>,
    /// Use exact measured phase charges instead of the rounded ones.
    #[arg(long)]
    measured: bool,
    #[arg(long)]
    capacity_mah: Option<f64>,
    #[arg(long)]
    capacity_multiplier: Option<f64>,
    /// Take duty-cycle and battery values from a config file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Config file; defaults apply when omitted.
    config: Option<PathBuf>,
    /// Run seed. Repeat to run several seeds in parallel.
    #[arg(long)]
    seed: Vec<u64>,
    #[arg(long)]
    nodes: Option<u32>,
    #[arg(long)]
    duration_h: Option<f64>,
    #[arg(long)]
    loss_prob: Option<f64>,
    /// Output directory for trace.txt and summary.toml (per-seed subdirectories
    /// when several seeds are given). Without it the summary goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RedundancyArgs {
    csv: PathBuf,
    /// Species with fewer than k distinct depositors are at risk.
    #[arg(long, default_value_t = 2)]
    k: usize,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["log", "demo"])))]
struct LotteryArgs {
    /// Ledger log to replay.
    log: Option<PathBuf>,
    /// Run fund, enter and draw on a fresh ledger.
    #[arg(long)]
    demo: bool,
    #[arg(long, default_value_t = 1, requires = "demo")]
    seed: u64,
    /// Write the demo log here instead of stdout.
    #[arg(long, requires = "demo")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ThermalArgs {
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 24.0)]
    hours: f64,
    /// Open the door at this time (hours).
    #[arg(long)]
    door_at: Option<f64>,
    #[arg(long, default_value_t = 30.0)]
    door_s: f64,
}

/// Exit code 2: the input was understood but is wrong or unreadable.
struct DataError(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for DataError {
    fn from(e: E) -> Self {
        DataError(e.into())
    }
}

type Result<T> = std::result::Result<T, DataError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let res = match cli.command {
        Command::Lifetime(a) => lifetime(a),
        Command::Simulate(a) => simulate(a),
        Command::Redundancy(a) => redundancy(a),
        Command::Lottery(a) => lottery(a),
        Command::Thermal(a) => thermal_trace(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(DataError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<SimConfig> {
    match path {
        None => Ok(SimConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(config::parse(&text).with_context(|| format!("in {}", p.display()))?)
        }
    }
}

fn lifetime(a: LifetimeArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let mut duty = cfg.duty_cycle;
    let mut battery: BatteryConfig = cfg.battery;
    if a.measured {
        duty.charge_model = node::ChargeModel::Measured;
    }
    if let Some(c) = a.capacity_mah {
        battery.capacity_mah = c;
    }
    if let Some(m) = a.capacity_multiplier {
        battery.capacity_multiplier = m;
    }
    battery.validate()?;
    duty.with_sleep(1.0).validate()?;

    let mut out = String::new();
    if let Some(x) = a.sleep_hours {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(
                anyhow!("sleep hours must be a finite non-negative number, got {x}").into(),
            );
        }
        let duty = duty.with_sleep(x);
        let life = node::lifetime_hours(&duty, &battery)?;
        writeln!(out, "sleep_hours = {x}").unwrap();
        cycle_breakdown(&mut out, &duty, &battery);
        writeln!(out, "lifetime_h = {life:.1}  ({:.1} days)", life / 24.0).unwrap();
    } else if let Some(t) = a.target_hours {
        let x = node::min_sleep_for(t, &duty, &battery)?;
        writeln!(out, "target_hours = {t}").unwrap();
        writeln!(out, "min_sleep_hours = {x:.6}").unwrap();
        let duty = duty.with_sleep(x);
        cycle_breakdown(&mut out, &duty, &battery);
        writeln!(
            out,
            "lifetime_h = {:.1}",
            node::lifetime_hours(&duty, &battery)?
        )
        .unwrap();
    }
    let published = node::lifetime_hours(&duty.with_sleep(PUBLISHED_SLEEP_H), &battery)?;
    writeln!(
        out,
        "reference: X >= {PUBLISHED_SLEEP_H} h is the published one-year setting; it gives {published:.1} h"
    )
    .unwrap();
    match node::min_sleep_for(ONE_YEAR_H, &duty, &battery) {
        Ok(th) => writeln!(
            out,
            "reference: exact threshold for {ONE_YEAR_H} h is X = {th:.4} h"
        )
        .unwrap(),
        Err(e) => writeln!(out, "reference: one year unreachable ({e})").unwrap(),
    }
    print!("{out}");
    Ok(())
}

fn cycle_breakdown(out: &mut String, duty: &DutyCycleConfig, battery: &BatteryConfig) {
    let pc = duty.phase_charges();
    let (init_h, com_h) = duty.active_durations();
    let model = match duty.charge_model {
        node::ChargeModel::Rounded => "rounded",
        node::ChargeModel::Measured => "measured",
    };
    writeln!(out, "charge_model = {model}").unwrap();
    writeln!(out, "capacity_mah = {}", battery.effective_capacity_mah()).unwrap();
    writeln!(out, "phase,hours,charge_mAh").unwrap();
    writeln!(out, "init,{init_h:.6},{:.6}", pc.init_mah).unwrap();
    writeln!(out, "com,{com_h:.6},{:.6}", pc.com_mah).unwrap();
    writeln!(out, "sleep,{:.6},{:.6}", duty.sleep_hours, pc.sleep_mah).unwrap();
    writeln!(out, "cycle,{:.6},{:.6}", duty.cycle_hours(), pc.total()).unwrap();
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(n) = a.nodes {
        cfg.run.n_nodes = n;
    }
    if let Some(d) = a.duration_h {
        cfg.run.duration_h = d;
    }
    if let Some(p) = a.loss_prob {
        cfg.run.loss_prob = p;
    }
    let seeds = if a.seed.is_empty() {
        vec![cfg.run.seed]
    } else {
        a.seed.clone()
    };
    cfg.validate()?;

    let configs: Vec<SimConfig> = seeds
        .iter()
        .map(|&s| {
            let mut c = cfg.clone();
            c.run.seed = s;
            c
        })
        .collect();
    let results: Vec<_> = if configs.len() == 1 {
        vec![sim::run(&configs[0])]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = configs
                .iter()
                .map(|c| scope.spawn(move || sim::run(c)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("simulation thread panicked"))
                .collect()
        })
    };
    let outputs = results
        .into_iter()
        .collect::<std::result::Result<Vec<_>, _>>()?;

    match &a.out {
        Some(dir) => {
            let many = outputs.len() > 1;
            for (seed, o) in seeds.iter().zip(&outputs) {
                let target = if many {
                    dir.join(format!("seed-{seed}"))
                } else {
                    dir.clone()
                };
                write_artifacts(&target, &o.trace, &o.summary.to_text())?;
                eprintln!("wrote {}", target.display());
            }
        }
        None => {
            for (seed, o) in seeds.iter().zip(&outputs) {
                if outputs.len() > 1 {
                    println!("# seed {seed}");
                }
                print!("{}", o.summary.to_text());
            }
        }
    }
    Ok(())
}

/// Writes both files to temporaries first so a failure leaves neither behind.
fn write_artifacts(dir: &Path, trace: &str, summary: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let files = [("trace.txt", trace), ("summary.toml", summary)];
    let mut staged = Vec::new();
    for (name, body) in files {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = fs::write(&tmp, body) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            return Err(anyhow!(e)
                .context(format!("writing {}", tmp.display()))
                .into());
        }
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, dest) in staged {
        fs::rename(&tmp, &dest).with_context(|| format!("renaming to {}", dest.display()))?;
    }
    Ok(())
}

fn redundancy(a: RedundancyArgs) -> Result<()> {
    if a.k == 0 {
        return Err(anyhow!("k must be at least 1").into());
    }
    let file = fs::File::open(&a.csv).with_context(|| format!("opening {}", a.csv.display()))?;
    let report = registry::ingest(file).with_context(|| format!("in {}", a.csv.display()))?;
    for s in &report.skipped {
        eprintln!("warning: skipped line {}: {}", s.line, s.reason);
    }
    let hist = registry::depositor_histogram(&report.records);
    let summary = registry::species_summary(&report.records);
    let risky = registry::at_risk(&report.records, a.k);

    let mut out = String::from("# dss-redundancy v1\n");
    writeln!(out, "records = {}", report.records.len()).unwrap();
    writeln!(out, "skipped = {}", report.skipped.len()).unwrap();
    writeln!(out, "species = {}", hist.species_count()).unwrap();
    writeln!(
        out,
        "single_depositor_share = {:.4}",
        hist.single_depositor_share()
    )
    .unwrap();
    out.push_str("\n[histogram]\n");
    out.push_str(&hist.to_text());
    out.push_str("\n[species]\nspecies,depositors,accessions,countries\n");
    for (name, s) in &summary {
        writeln!(
            out,
            "{name},{},{},{}",
            s.depositors, s.accessions, s.countries
        )
        .unwrap();
    }
    writeln!(out, "\n[at_risk k={}]", a.k).unwrap();
    for name in &risky {
        writeln!(out, "{name}").unwrap();
    }
    print!("{out}");
    Ok(())
}

fn lottery(a: LotteryArgs) -> Result<()> {
    if a.demo {
        let ledger = demo_round(a.seed)?;
        let log = ledger.log_text();
        match &a.out {
            Some(p) => {
                fs::write(p, &log).with_context(|| format!("writing {}", p.display()))?;
                print!("{}", state_report(&ledger));
            }
            None => print!("{log}"),
        }
        return Ok(());
    }
    let path = a.log.expect("clap enforces log or demo");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let ledger = Lottery::replay(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    print!("{}", state_report(&ledger));
    Ok(())
}

/// Sponsor funds the pot, five nodes report (one from a warm freezer), then
/// one seeded draw.
fn demo_round(seed: u64) -> Result<Lottery> {
    let mut l = Lottery::new(ValidityPolicy::default());
    l.fund("sponsor", 100)?;
    let readings = [
        (-18.0, 15.0),
        (-17.2, 14.1),
        (-19.5, 16.0),
        (20.0, 40.0),
        (-16.1, 13.2),
    ];
    for (i, (t, h)) in readings.iter().enumerate() {
        let tb = node::encode_temp(*t)?;
        let hb = node::encode_hum(*h)?;
        l.enter(&node::node_address(i as u32), tb, hb);
    }
    l.draw(seed)?;
    Ok(l)
}

fn state_report(l: &Lottery) -> String {
    let mut out = String::from("# dss-lottery-state v1\n");
    writeln!(out, "records = {}", l.log().len()).unwrap();
    writeln!(out, "rounds = {}", l.round()).unwrap();
    writeln!(out, "funded = {}", l.funded_total()).unwrap();
    writeln!(out, "paid = {}", l.paid_total()).unwrap();
    writeln!(out, "pot = {}", l.pot()).unwrap();
    writeln!(out, "conserved = {}", l.is_conserved()).unwrap();
    writeln!(out, "entries = {}", l.entries().len()).unwrap();
    for (addr, amount) in l.payouts() {
        writeln!(out, "payout {addr} = {amount}").unwrap();
    }
    out
}

fn thermal_trace(a: ThermalArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    if !(a.hours > 0.0 && a.hours.is_finite()) {
        return Err(anyhow!("hours must be positive").into());
    }
    let params = cfg.freezer;
    let tick = cfg.run.tick_h;
    let mut s = FreezerState::at_setpoint(&params);
    let mut out = format!(
        "# dss-thermal v1\n{THERMAL_TRACE_HEADER}\n{}\n",
        s.trace_row()
    );
    let mut door = a.door_at;
    while s.t_h < a.hours - 1e-12 {
        if let Some(at) = door {
            if at <= s.t_h + 1e-12 {
                s = thermal::open_door(&s, s.t_h, a.door_s);
                door = None;
            }
        }
        let mut target = (s.t_h + tick).min(a.hours);
        if let Some(at) = door {
            if at > s.t_h {
                target = target.min(at);
            }
        }
        s = thermal::step(&s, &params, target - s.t_h)?;
        out.push_str(&s.trace_row());
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}
