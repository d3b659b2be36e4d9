//! Discrete-event loop: one freezer and one sensor node per participant, a
//! lossy uplink, the lottery ledger and the node registry.
//!
//! Events are ordered by `(time, node_id, sequence)`; ledger draws use
//! `node_id = u32::MAX` so they run after node events at the same instant.
//! Each node owns a ChaCha8 stream derived from the run seed, so a node's
//! readings and losses do not depend on how other nodes interleave.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{EnterOutcome, Lottery, ValidityPolicy};
use crate::node::{
    self, BatteryConfig, Charge, CycleEnv, DutyCycleConfig, FlushPolicy, LossyLink, NodeState,
};
use crate::registry::{is_live, NodeRecord, NodeRegistry};
use crate::thermal::{self, FreezerParams, FreezerState, SensorSpec};

pub const TRACE_HEADER: &str = "# dss-trace v1";
pub const SUMMARY_HEADER: &str = "# dss-summary v1";

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Error, PartialEq)]
#[error("trace line {line}: {message}")]
pub struct TraceError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub n_nodes: u32,
    pub duration_h: f64,
    /// Freezer integration step.
    pub tick_h: f64,
    pub loss_prob: f64,
    pub seed: u64,
    /// 0 selects three report intervals (batch size × cycle length).
    pub liveness_window_h: f64,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            n_nodes: 5,
            duration_h: 720.0,
            tick_h: 1.0 / 60.0,
            loss_prob: 0.0,
            seed: 1,
            liveness_window_h: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LotterySchedule {
    /// Hours between draws; 0 disables the lottery.
    pub draw_every_h: f64,
    /// Tokens the sponsor adds just before each draw.
    pub fund_amount: u64,
    pub sponsor: String,
}

impl Default for LotterySchedule {
    fn default() -> Self {
        Self {
            draw_every_h: 168.0,
            fund_amount: 100,
            sponsor: "sponsor".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeOverride {
    pub node: u32,
    pub sleep_hours: Option<f64>,
    pub setpoint_c: Option<f64>,
    pub ambient_c: Option<f64>,
    pub capacity_mah: Option<f64>,
    pub capacity_multiplier: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoorEvent {
    pub node: u32,
    pub at_h: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    #[serde(rename = "sim")]
    pub run: RunParams,
    pub duty_cycle: DutyCycleConfig,
    pub battery: BatteryConfig,
    pub freezer: FreezerParams,
    pub sensor: SensorSpec,
    pub flush: FlushPolicy,
    pub policy: ValidityPolicy,
    pub lottery: LotterySchedule,
    #[serde(rename = "node")]
    pub nodes: Vec<NodeOverride>,
    #[serde(rename = "door")]
    pub doors: Vec<DoorEvent>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        let r = &self.run;
        if r.n_nodes == 0 {
            return bad("n_nodes must be at least 1".into());
        }
        if !(r.duration_h > 0.0 && r.duration_h.is_finite()) {
            return bad("duration_h must be positive".into());
        }
        if !(r.tick_h > 0.0 && r.tick_h.is_finite()) {
            return bad("tick_h must be positive".into());
        }
        if !(0.0..=1.0).contains(&r.loss_prob) {
            return bad(format!("loss_prob {} outside [0, 1]", r.loss_prob));
        }
        if !(r.liveness_window_h >= 0.0 && r.liveness_window_h.is_finite()) {
            return bad("liveness_window_h must be >= 0".into());
        }
        let l = &self.lottery;
        if !(l.draw_every_h >= 0.0 && l.draw_every_h.is_finite()) {
            return bad("draw_every_h must be >= 0".into());
        }
        if l.draw_every_h > 0.0 {
            crate::ledger::check_address(&l.sponsor)
                .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        }
        let wrap = |e: String| SimError::InvalidConfig(e);
        self.battery.validate().map_err(|e| wrap(e.to_string()))?;
        self.sensor.validate().map_err(|e| wrap(e.to_string()))?;
        self.flush.validate().map_err(|e| wrap(e.to_string()))?;
        self.policy.validate().map_err(wrap)?;
        for id in 0..r.n_nodes {
            let (duty, freezer, battery) = self.node_params(id);
            duty.validate()
                .map_err(|e| wrap(format!("node {id}: {e}")))?;
            freezer
                .validate()
                .map_err(|e| wrap(format!("node {id}: {e}")))?;
            battery
                .validate()
                .map_err(|e| wrap(format!("node {id}: {e}")))?;
        }
        for o in &self.nodes {
            if o.node >= r.n_nodes {
                return bad(format!("override for unknown node {}", o.node));
            }
        }
        for d in &self.doors {
            if d.node >= r.n_nodes {
                return bad(format!("door event for unknown node {}", d.node));
            }
            if !(0.0..=r.duration_h).contains(&d.at_h)
                || d.duration_s.is_nan()
                || d.duration_s < 0.0
            {
                return bad(format!("door event at {} h is out of range", d.at_h));
            }
        }
        Ok(())
    }

    /// Effective parameters for one node after overrides.
    pub fn node_params(&self, id: u32) -> (DutyCycleConfig, FreezerParams, BatteryConfig) {
        let mut duty = self.duty_cycle;
        let mut freezer = self.freezer;
        let mut battery = self.battery;
        for o in self.nodes.iter().filter(|o| o.node == id) {
            if let Some(v) = o.sleep_hours {
                duty.sleep_hours = v;
            }
            if let Some(v) = o.setpoint_c {
                freezer.setpoint_c = v;
            }
            if let Some(v) = o.ambient_c {
                freezer.ambient_c = v;
            }
            if let Some(v) = o.capacity_mah {
                battery.capacity_mah = v;
            }
            if let Some(v) = o.capacity_multiplier {
                battery.capacity_multiplier = v;
            }
        }
        (duty, freezer, battery)
    }

    pub fn liveness_window_h(&self) -> f64 {
        if self.run.liveness_window_h > 0.0 {
            self.run.liveness_window_h
        } else {
            3.0 * self.flush.batch_size as f64 * self.duty_cycle.cycle_hours()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub id: u32,
    pub cycles: u64,
    /// Charge drawn, nanoamp-hours.
    pub drawn_nah: u64,
    pub death_time_h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawSummary {
    pub round: u64,
    pub t_h: f64,
    pub winner: Option<String>,
    pub amount: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub sent: u64,
    pub delivered: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub funded: u64,
    pub paid: u64,
    pub pot: u64,
    pub active_nodes: u32,
    pub nodes: Vec<NodeSummary>,
    pub draws: Vec<DrawSummary>,
}

impl SimSummary {
    pub fn delivery_fraction(&self) -> f64 {
        if self.sent == 0 {
            0.0
        } else {
            self.delivered as f64 / self.sent as f64
        }
    }

    pub fn to_text(&self) -> String {
        let body = toml::to_string(self).expect("summary serializes");
        format!("{SUMMARY_HEADER}\n{body}")
    }

    pub fn from_text(text: &str) -> Result<Self, String> {
        let body = text
            .strip_prefix(SUMMARY_HEADER)
            .ok_or_else(|| format!("missing {SUMMARY_HEADER:?} header"))?;
        toml::from_str(body).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub trace: String,
    pub summary: SimSummary,
}

/// Times are written and summarised at microhour resolution.
fn micros(t: f64) -> i64 {
    (t * 1e6).round() as i64
}

fn fmt_micros(m: i64) -> String {
    format!("{}.{:06}", m / 1_000_000, m % 1_000_000)
}

fn fmt_time(t: f64) -> String {
    fmt_micros(micros(t))
}

fn snap(t: f64) -> f64 {
    micros(t) as f64 / 1e6
}

fn parse_time(s: &str) -> Option<f64> {
    let (w, f) = s.split_once('.')?;
    if f.len() != 6 || !f.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let m = w.parse::<i64>().ok()?.checked_mul(1_000_000)? + f.parse::<i64>().ok()?;
    Some(m as f64 / 1e6)
}

/// SplitMix64 finaliser, used to derive per-round draw seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn draw_seed(run_seed: u64, round: u64) -> u64 {
    mix(run_seed ^ mix(round))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Door(usize),
    Cycle,
    Draw,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    t: f64,
    node: u32,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // Reversed: BinaryHeap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then(other.node.cmp(&self.node))
            .then(other.seq.cmp(&self.seq))
    }
}

struct Slot {
    node: NodeState,
    duty: DutyCycleConfig,
    freezer_params: FreezerParams,
    freezer: FreezerState,
    rng: ChaCha8Rng,
    death: Option<f64>,
    cycles: u64,
}

struct Trace {
    text: String,
    events: u64,
}

impl Trace {
    fn line(&mut self, args: std::fmt::Arguments<'_>) {
        self.text.write_fmt(args).expect("writing to String");
        self.text.push('\n');
        self.events += 1;
    }
}

fn header(cfg: &SimConfig) -> String {
    format!(
        "{TRACE_HEADER} nodes={} seed={} duration_h={} liveness_window_h={}",
        cfg.run.n_nodes,
        cfg.run.seed,
        cfg.run.duration_h,
        cfg.liveness_window_h()
    )
}

pub fn run(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let r = &cfg.run;
    let window = cfg.liveness_window_h();
    let link = LossyLink::new(r.loss_prob).expect("validated");
    let mut ledger = Lottery::new(cfg.policy);
    let mut registry = NodeRegistry::new();
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |heap: &mut BinaryHeap<Event>, t: f64, node: u32, kind: Kind| {
        heap.push(Event { t, node, seq, kind });
        seq += 1;
    };

    let mut slots: Vec<Slot> = (0..r.n_nodes)
        .map(|id| {
            let (duty, freezer_params, battery) = cfg.node_params(id);
            let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
            rng.set_stream(u64::from(id) + 1);
            let start = duty.sleep_hours * f64::from(id) / f64::from(r.n_nodes);
            registry.register(NodeRecord::new(id, 0));
            Slot {
                node: NodeState::new(id, battery, start),
                duty,
                freezer_params,
                freezer: FreezerState::at_setpoint(&freezer_params),
                rng,
                death: None,
                cycles: 0,
            }
        })
        .collect();

    for (i, d) in cfg.doors.iter().enumerate() {
        push(&mut heap, d.at_h, d.node, Kind::Door(i));
    }
    for s in &slots {
        let t = s.node.next_sample_time(&s.duty);
        if t <= r.duration_h {
            push(&mut heap, t, s.node.id, Kind::Cycle);
        }
    }
    if cfg.lottery.draw_every_h > 0.0 && cfg.lottery.draw_every_h <= r.duration_h {
        push(&mut heap, cfg.lottery.draw_every_h, u32::MAX, Kind::Draw);
    }

    let mut trace = Trace {
        text: header(cfg) + "\n",
        events: 0,
    };
    let mut summary = SimSummary::default();
    let advance = |s: &mut Slot, t: f64| {
        s.freezer = thermal::advance_to(&s.freezer, &s.freezer_params, t, r.tick_h)
            .expect("tick validated");
    };

    while let Some(ev) = heap.pop() {
        match ev.kind {
            Kind::Door(i) => {
                let d = &cfg.doors[i];
                let s = &mut slots[d.node as usize];
                advance(s, ev.t);
                s.freezer = thermal::open_door(&s.freezer, ev.t, d.duration_s);
                trace.line(format_args!(
                    "door,{},{},{}",
                    d.node,
                    fmt_time(ev.t),
                    d.duration_s
                ));
            }
            Kind::Cycle => {
                let s = &mut slots[ev.node as usize];
                advance(s, ev.t);
                let flush: &FlushPolicy = &cfg.flush;
                let env = CycleEnv {
                    duty: &s.duty,
                    sensor: &cfg.sensor,
                    flush,
                    link: &link,
                };
                let out = node::run_cycle(&s.node, &env, &s.freezer, &mut ledger, &mut s.rng);
                for row in &out.rows {
                    trace.line(format_args!(
                        "node,{},{},{},{},{},{},{}",
                        row.node_id,
                        fmt_time(row.t_sim),
                        row.phase,
                        row.drawn,
                        row.buffered,
                        row.submitted,
                        row.delivered
                    ));
                    if row.phase == "com" {
                        s.cycles += 1;
                    }
                }
                if let Some(sub) = &out.submission {
                    summary.sent += 1;
                    let outcome = match sub.outcome {
                        None => "lost".to_string(),
                        Some(o) => {
                            summary.delivered += 1;
                            let valid = o == EnterOutcome::Accepted;
                            if valid {
                                summary.accepted += 1;
                            } else {
                                summary.rejected += 1;
                            }
                            registry
                                .record_report(ev.node, valid, snap(sub.t_sim), window)
                                .expect("registered");
                            o.to_string()
                        }
                    };
                    trace.line(format_args!(
                        "tx,{},{},{},{}",
                        ev.node,
                        fmt_time(sub.t_sim),
                        sub.count,
                        outcome
                    ));
                }
                s.node = out.node;
                if let Some(t) = out.died_at {
                    s.death = Some(snap(t));
                    trace.line(format_args!("death,{},{}", ev.node, fmt_time(t)));
                } else {
                    let next = s.node.next_sample_time(&s.duty);
                    if next <= r.duration_h {
                        push(&mut heap, next, ev.node, Kind::Cycle);
                    }
                }
            }
            Kind::Draw => {
                let l = &cfg.lottery;
                if l.fund_amount > 0 && ledger.fund(&l.sponsor, l.fund_amount).is_ok() {
                    trace.line(format_args!(
                        "fund,{},{},{},{}",
                        fmt_time(ev.t),
                        l.sponsor,
                        l.fund_amount,
                        ledger.pot()
                    ));
                }
                let round = ledger.round();
                let (winner, amount) = match ledger.draw(draw_seed(r.seed, round)) {
                    Ok(d) => (Some(d.winner), d.amount),
                    Err(_) => (None, 0),
                };
                trace.line(format_args!(
                    "draw,{},{},{},{},{}",
                    fmt_time(ev.t),
                    round,
                    winner.as_deref().unwrap_or("-"),
                    amount,
                    ledger.pot()
                ));
                summary.draws.push(DrawSummary {
                    round,
                    t_h: snap(ev.t),
                    winner,
                    amount,
                });
                let next = ev.t + l.draw_every_h;
                if next <= r.duration_h {
                    push(&mut heap, next, u32::MAX, Kind::Draw);
                }
            }
        }
    }

    registry.refresh(r.duration_h, window);
    summary.active_nodes = registry.active_count() as u32;
    summary.funded = ledger.funded_total();
    summary.paid = ledger.paid_total();
    summary.pot = ledger.pot();
    summary.nodes = slots
        .iter()
        .map(|s| NodeSummary {
            id: s.node.id,
            cycles: s.cycles,
            drawn_nah: s.node.battery.drawn.nah(),
            death_time_h: s.death,
        })
        .collect();
    debug_assert!(ledger.is_conserved());

    let events = trace.events;
    let mut text = trace.text;
    let _ = writeln!(text, "# end events={events}");
    Ok(SimOutput {
        trace: text,
        summary,
    })
}

/// Rebuilds the summary from a trace written by [`run`].
pub fn replay(trace: &str) -> Result<SimSummary, TraceError> {
    if trace.is_empty() {
        return Ok(SimSummary::default());
    }
    let err = |line: usize, message: String| TraceError { line, message };
    let mut lines = trace.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (_, head) = lines.next().expect("non-empty");
    let settings = head
        .strip_prefix(TRACE_HEADER)
        .ok_or_else(|| err(1, format!("missing {TRACE_HEADER:?} header")))?;
    let mut kv = BTreeMap::new();
    for part in settings.split_whitespace() {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| err(1, format!("bad header field {part:?}")))?;
        kv.insert(k, v);
    }
    let get = |k: &str| {
        kv.get(k)
            .copied()
            .ok_or_else(|| err(1, format!("header lacks {k}")))
    };
    let n_nodes: u32 = get("nodes")?
        .parse()
        .map_err(|_| err(1, "bad nodes".into()))?;
    let duration: f64 = get("duration_h")?
        .parse()
        .map_err(|_| err(1, "bad duration_h".into()))?;
    let window: f64 = get("liveness_window_h")?
        .parse()
        .map_err(|_| err(1, "bad liveness_window_h".into()))?;

    let mut s = SimSummary {
        nodes: (0..n_nodes)
            .map(|id| NodeSummary {
                id,
                ..NodeSummary::default()
            })
            .collect(),
        ..SimSummary::default()
    };
    let mut last_valid: Vec<Option<f64>> = vec![None; n_nodes as usize];
    let mut events = 0u64;
    let mut footer = None;

    for (n, line) in lines {
        if footer.is_some() {
            return Err(err(n, "content after end marker".into()));
        }
        if let Some(rest) = line.strip_prefix("# end events=") {
            let count: u64 = rest.parse().map_err(|_| err(n, "bad end marker".into()))?;
            footer = Some((n, count));
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = |what: &str| err(n, format!("bad {what} in {line:?}"));
        let node_ix = |v: &str| -> Result<usize, TraceError> {
            let id: u32 = v.parse().map_err(|_| bad("node id"))?;
            if id >= n_nodes {
                return Err(bad("node id"));
            }
            Ok(id as usize)
        };
        let time = |v: &str| parse_time(v).ok_or_else(|| bad("time"));
        let arity = |k: usize| {
            if f.len() == k {
                Ok(())
            } else {
                Err(bad("field count"))
            }
        };
        match f[0] {
            "node" => {
                arity(8)?;
                let i = node_ix(f[1])?;
                time(f[2])?;
                let drawn = Charge::parse_mah(f[4]).ok_or_else(|| bad("drawn_mAh"))?;
                match f[3] {
                    "com" => s.nodes[i].cycles += 1,
                    "sleep" | "init" | "dead" => {}
                    _ => return Err(bad("phase")),
                }
                if drawn.nah() < s.nodes[i].drawn_nah {
                    return Err(err(n, "battery charge decreased".into()));
                }
                s.nodes[i].drawn_nah = drawn.nah();
                for v in &f[5..8] {
                    v.parse::<usize>().map_err(|_| bad("counter"))?;
                }
            }
            "tx" => {
                arity(5)?;
                let i = node_ix(f[1])?;
                let t = time(f[2])?;
                f[3].parse::<usize>().map_err(|_| bad("count"))?;
                s.sent += 1;
                if f[4] != "lost" {
                    let o: EnterOutcome = f[4].parse().map_err(|_| bad("outcome"))?;
                    s.delivered += 1;
                    if o == EnterOutcome::Accepted {
                        s.accepted += 1;
                        last_valid[i] = Some(t);
                    } else {
                        s.rejected += 1;
                    }
                }
            }
            "door" => {
                arity(4)?;
                node_ix(f[1])?;
                time(f[2])?;
                f[3].parse::<f64>().map_err(|_| bad("duration"))?;
            }
            "death" => {
                arity(3)?;
                let i = node_ix(f[1])?;
                s.nodes[i].death_time_h = Some(time(f[2])?);
            }
            "fund" => {
                arity(5)?;
                time(f[1])?;
                let amount: u64 = f[3].parse().map_err(|_| bad("amount"))?;
                let pot: u64 = f[4].parse().map_err(|_| bad("pot"))?;
                s.funded += amount;
                s.pot += amount;
                if pot != s.pot {
                    return Err(err(
                        n,
                        format!("pot {pot} disagrees with running total {}", s.pot),
                    ));
                }
            }
            "draw" => {
                arity(6)?;
                let t = time(f[1])?;
                let round: u64 = f[2].parse().map_err(|_| bad("round"))?;
                let amount: u64 = f[4].parse().map_err(|_| bad("amount"))?;
                let pot: u64 = f[5].parse().map_err(|_| bad("pot"))?;
                let winner = (f[3] != "-").then(|| f[3].to_string());
                if winner.is_some() {
                    if amount != s.pot {
                        return Err(err(n, "draw paid a different amount than the pot".into()));
                    }
                    s.paid += amount;
                    s.pot = 0;
                } else if amount != 0 {
                    return Err(bad("amount"));
                }
                if pot != s.pot {
                    return Err(err(
                        n,
                        format!("pot {pot} disagrees with running total {}", s.pot),
                    ));
                }
                s.draws.push(DrawSummary {
                    round,
                    t_h: t,
                    winner,
                    amount,
                });
            }
            _ => return Err(bad("record kind")),
        }
        events += 1;
    }

    let total = trace.lines().count();
    match footer {
        None => Err(err(total, "trace truncated: no end marker".into())),
        Some((n, count)) if count != events => Err(err(
            n,
            format!("end marker counts {count} events, found {events}"),
        )),
        Some(_) => {
            s.active_nodes = last_valid
                .iter()
                .filter(|t| is_live(**t, duration, window))
                .count() as u32;
            Ok(s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            run: RunParams {
                n_nodes: 3,
                duration_h: 200.0,
                loss_prob: 0.4,
                seed: 11,
                ..RunParams::default()
            },
            lottery: LotterySchedule {
                draw_every_h: 48.0,
                ..LotterySchedule::default()
            },
            doors: vec![DoorEvent {
                node: 1,
                at_h: 10.0,
                duration_s: 30.0,
            }],
            ..SimConfig::default()
        }
    }

    #[test]
    fn default_config_is_valid() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_configs_fail_before_running() {
        let mut c = small();
        c.run.loss_prob = 1.5;
        assert!(run(&c).is_err());
        let mut c = small();
        c.run.tick_h = 0.0;
        assert!(run(&c).is_err());
        let mut c = small();
        c.doors[0].node = 9;
        assert!(run(&c).is_err());
        let mut c = small();
        c.nodes.push(NodeOverride {
            node: 0,
            sleep_hours: Some(-1.0),
            ..NodeOverride::default()
        });
        assert!(run(&c).is_err());
    }

    #[test]
    fn run_is_deterministic_and_seed_sensitive() {
        let a = run(&small()).unwrap();
        let b = run(&small()).unwrap();
        assert_eq!(a, b);
        let mut c = small();
        c.run.seed = 12;
        assert_ne!(run(&c).unwrap().trace, a.trace);
    }

    #[test]
    fn replay_matches_run() {
        let out = run(&small()).unwrap();
        assert_eq!(replay(&out.trace).unwrap(), out.summary);
        assert!(out.summary.draws.len() == 4);
        assert!(out
            .trace
            .lines()
            .any(|l| l.starts_with("door,1,10.000000,30")));
    }

    #[test]
    fn counting_identities() {
        let s = run(&small()).unwrap().summary;
        assert!(s.delivered <= s.sent);
        assert_eq!(s.accepted + s.rejected, s.delivered);
        assert_eq!(s.funded, s.pot + s.paid);
    }

    #[test]
    fn lossless_link_delivers_everything() {
        let mut c = small();
        c.run.loss_prob = 0.0;
        let s = run(&c).unwrap().summary;
        assert!(s.sent > 0);
        assert_eq!(s.delivered, s.sent);
    }

    #[test]
    fn empty_trace_replays_to_zero() {
        assert_eq!(replay("").unwrap(), SimSummary::default());
    }

    #[test]
    fn truncated_trace_is_rejected() {
        let out = run(&small()).unwrap();
        let lines: Vec<&str> = out.trace.lines().collect();
        let cut = lines[..lines.len() / 2].join("\n");
        assert!(replay(&cut).unwrap_err().message.contains("truncated"));
        let partial = &out.trace[..out.trace.len() - 20];
        assert!(replay(partial).is_err());
    }

    #[test]
    fn corrupted_line_is_reported() {
        let out = run(&small()).unwrap();
        let mut lines: Vec<String> = out.trace.lines().map(String::from).collect();
        lines[5] = "node,0,zz,sleep,0.000000,0,0,0".into();
        let e = replay(&lines.join("\n")).unwrap_err();
        assert_eq!(e.line, 6);
    }

    #[test]
    fn summary_text_round_trips() {
        let s = run(&small()).unwrap().summary;
        assert_eq!(SimSummary::from_text(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn time_format_round_trips() {
        for t in [0.0, 0.7316, 8620.581304, 1e-6, 123456.5] {
            assert_eq!(parse_time(&fmt_time(t)), Some(snap(t)));
        }
    }

    #[test]
    fn draw_seeds_differ_per_round() {
        assert_ne!(draw_seed(1, 0), draw_seed(1, 1));
        assert_ne!(draw_seed(1, 0), draw_seed(2, 0));
    }
}
