//! Sensor node: duty-cycle energy accounting, closed-form lifetime math,
//! the one-byte reading encoding and the 32-byte packing used on the wire.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{EnterOutcome, Lottery};
use crate::thermal::{self, FreezerState, Reading, SensorSpec};

#[derive(Debug, Error, PartialEq)]
pub enum NodeError {
    #[error("temperature {0} °C outside the encodable range [-40, 80]")]
    TempOutOfRange(f64),
    #[error("humidity {0} % outside the encodable range [0, 100]")]
    HumOutOfRange(f64),
    #[error("temperature byte {0} exceeds 120")]
    BadTempByte(u8),
    #[error("humidity byte {0} exceeds 100")]
    BadHumByte(u8),
    #[error("cannot pack {0} values; a word holds 1 to 32")]
    PackLength(usize),
    #[error("malformed packed word: {0}")]
    BadWord(String),
    #[error("cycle charge is zero; lifetime is unbounded")]
    ZeroCycleCharge,
    #[error("target {target} h is not reachable; lifetime tends to {limit} h")]
    Unreachable { target: f64, limit: f64 },
    #[error("invalid duty-cycle configuration: {0}")]
    InvalidConfig(String),
}

/// Charge in nanoamp-hours. Integer so that per-cycle accounting is exact.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Charge(pub u64);

impl Charge {
    pub const ZERO: Charge = Charge(0);

    pub fn from_mah(mah: f64) -> Self {
        Charge((mah * 1e6).round().max(0.0) as u64)
    }

    pub fn as_mah(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn nah(self) -> u64 {
        self.0
    }

    /// Parses the fixed six-decimal mAh form written by `Display`.
    pub fn parse_mah(s: &str) -> Option<Self> {
        let (whole, frac) = s.split_once('.')?;
        if frac.len() != 6 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let whole: u64 = whole.parse().ok()?;
        let frac: u64 = frac.parse().ok()?;
        Some(Charge(whole.checked_mul(1_000_000)?.checked_add(frac)?))
    }
}

impl fmt::Display for Charge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}

impl std::ops::Add for Charge {
    type Output = Charge;
    fn add(self, rhs: Charge) -> Charge {
        Charge(self.0 + rhs.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargeModel {
    /// Active-phase charges rounded to 0.01 mAh and durations to 0.0001 h,
    /// which reproduces the 0.03 + 0.09 + 0.01·X mAh cycle and the
    /// 0.0016 + X h cycle length.
    #[default]
    Rounded,
    /// Duration × current, unrounded.
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DutyCycleConfig {
    pub sleep_hours: f64,
    pub init_duration_h: f64,
    pub init_current_ma: f64,
    pub com_duration_h: f64,
    pub com_current_ma: f64,
    pub sleep_current_ma: f64,
    pub charge_model: ChargeModel,
}

impl Default for DutyCycleConfig {
    fn default() -> Self {
        Self {
            sleep_hours: 0.73,
            init_duration_h: 2400.0 / 3_600_000.0,
            init_current_ma: 50.0,
            com_duration_h: 3160.0 / 3_600_000.0,
            com_current_ma: 100.0,
            sleep_current_ma: 0.01,
            charge_model: ChargeModel::Rounded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCharges {
    pub init_mah: f64,
    pub com_mah: f64,
    pub sleep_mah: f64,
}

impl PhaseCharges {
    pub fn total(&self) -> f64 {
        self.init_mah + self.com_mah + self.sleep_mah
    }
}

fn round_to(v: f64, places: i32) -> f64 {
    let m = 10f64.powi(places);
    (v * m).round() / m
}

impl DutyCycleConfig {
    pub fn measured() -> Self {
        Self {
            charge_model: ChargeModel::Measured,
            ..Self::default()
        }
    }

    pub fn with_sleep(self, sleep_hours: f64) -> Self {
        Self {
            sleep_hours,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), NodeError> {
        let vals = [
            self.sleep_hours,
            self.init_duration_h,
            self.init_current_ma,
            self.com_duration_h,
            self.com_current_ma,
            self.sleep_current_ma,
        ];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(NodeError::InvalidConfig(
                "durations and currents must be finite and non-negative".into(),
            ));
        }
        if self.sleep_hours <= 0.0 {
            return Err(NodeError::InvalidConfig("sleep_hours must be > 0".into()));
        }
        Ok(())
    }

    pub fn phase_charges(&self) -> PhaseCharges {
        let init = self.init_duration_h * self.init_current_ma;
        let com = self.com_duration_h * self.com_current_ma;
        let (init, com) = match self.charge_model {
            ChargeModel::Rounded => (round_to(init, 2), round_to(com, 2)),
            ChargeModel::Measured => (init, com),
        };
        PhaseCharges {
            init_mah: init,
            com_mah: com,
            sleep_mah: self.sleep_hours * self.sleep_current_ma,
        }
    }

    /// Init and com durations after the model's rounding.
    pub fn active_durations(&self) -> (f64, f64) {
        match self.charge_model {
            ChargeModel::Rounded => (
                round_to(self.init_duration_h, 4),
                round_to(self.com_duration_h, 4),
            ),
            ChargeModel::Measured => (self.init_duration_h, self.com_duration_h),
        }
    }

    pub fn cycle_hours(&self) -> f64 {
        let (init, com) = self.active_durations();
        init + com + self.sleep_hours
    }
}

/// Charge drawn by one sleep/init/com cycle, mAh.
pub fn cycle_charge_mah(cfg: &DutyCycleConfig) -> f64 {
    cfg.phase_charges().total()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryConfig {
    pub capacity_mah: f64,
    pub nominal_v: f64,
    /// Fraction of rated capacity available, e.g. 0.4 to 0.6 for a cell kept
    /// at -20..-40 °C. 1.0 for a node outside the freezer.
    pub capacity_multiplier: f64,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            capacity_mah: 1500.0,
            nominal_v: 3.6,
            capacity_multiplier: 1.0,
        }
    }
}

impl BatteryConfig {
    pub fn effective_capacity_mah(&self) -> f64 {
        self.capacity_mah * self.capacity_multiplier
    }

    pub fn validate(&self) -> Result<(), NodeError> {
        if !(self.capacity_mah > 0.0 && self.capacity_mah.is_finite()) {
            return Err(NodeError::InvalidConfig("capacity_mah must be > 0".into()));
        }
        if !(self.capacity_multiplier > 0.0 && self.capacity_multiplier <= 1.0) {
            return Err(NodeError::InvalidConfig(
                "capacity_multiplier must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub config: BatteryConfig,
    pub drawn: Charge,
}

impl BatteryState {
    pub fn new(config: BatteryConfig) -> Self {
        Self {
            config,
            drawn: Charge::ZERO,
        }
    }

    pub fn capacity(&self) -> Charge {
        Charge::from_mah(self.config.effective_capacity_mah())
    }

    pub fn drawn_mah(&self) -> f64 {
        self.drawn.as_mah()
    }

    pub fn is_exhausted(&self) -> bool {
        self.drawn >= self.capacity()
    }

    /// Draws `charge` if the battery can supply all of it. Otherwise the
    /// remainder is consumed, the phase does not complete and `false` is
    /// returned.
    pub fn draw(&mut self, charge: Charge) -> bool {
        let cap = self.capacity();
        let next = self.drawn + charge;
        if next > cap {
            self.drawn = cap;
            false
        } else {
            self.drawn = next;
            true
        }
    }
}

/// `capacity / cycle_charge · cycle_length`, hours.
pub fn lifetime_hours(cfg: &DutyCycleConfig, battery: &BatteryConfig) -> Result<f64, NodeError> {
    let charge = cycle_charge_mah(cfg);
    if charge <= 0.0 {
        return Err(NodeError::ZeroCycleCharge);
    }
    Ok(battery.effective_capacity_mah() / charge * cfg.cycle_hours())
}

/// Lifetime as the sleep period grows without bound: capacity / sleep current.
pub fn lifetime_limit_hours(cfg: &DutyCycleConfig, battery: &BatteryConfig) -> f64 {
    if cfg.sleep_current_ma <= 0.0 {
        f64::INFINITY
    } else {
        battery.effective_capacity_mah() / cfg.sleep_current_ma
    }
}

/// Smallest sleep period whose lifetime reaches `target_hours`.
///
/// Lifetime is `C (a + X) / (c + s X)` with active hours `a`, active charge
/// `c` and sleep current `s`, so the threshold solves a linear equation.
pub fn min_sleep_for(
    target_hours: f64,
    cfg: &DutyCycleConfig,
    battery: &BatteryConfig,
) -> Result<f64, NodeError> {
    let limit = lifetime_limit_hours(cfg, battery);
    if !(target_hours.is_finite() && target_hours < limit) {
        return Err(NodeError::Unreachable {
            target: target_hours,
            limit,
        });
    }
    let probe = cfg.with_sleep(0.0);
    let pc = probe.phase_charges();
    let active_charge = pc.init_mah + pc.com_mah;
    let active_hours = probe.cycle_hours();
    let cap = battery.effective_capacity_mah();
    if active_charge <= cfg.sleep_current_ma * active_hours {
        // Sleeping costs at least as much per hour as being active; longer
        // sleep never helps.
        return Err(NodeError::Unreachable {
            target: target_hours,
            limit,
        });
    }
    let x = (target_hours * active_charge - cap * active_hours)
        / (cap - target_hours * cfg.sleep_current_ma);
    Ok(x.max(0.0))
}

pub const TEMP_OFFSET: i32 = 40;

/// `40 + round(temp)`, halves away from zero.
pub fn encode_temp(temp_c: f64) -> Result<u8, NodeError> {
    if !(-40.0..=80.0).contains(&temp_c) {
        return Err(NodeError::TempOutOfRange(temp_c));
    }
    Ok((TEMP_OFFSET + temp_c.round() as i32) as u8)
}

pub fn decode_temp(byte: u8) -> Result<f64, NodeError> {
    if byte > 120 {
        return Err(NodeError::BadTempByte(byte));
    }
    Ok(f64::from(byte) - f64::from(TEMP_OFFSET))
}

pub fn encode_hum(rh_pct: f64) -> Result<u8, NodeError> {
    if !(0.0..=100.0).contains(&rh_pct) {
        return Err(NodeError::HumOutOfRange(rh_pct));
    }
    Ok(rh_pct.round() as u8)
}

pub fn decode_hum(byte: u8) -> Result<f64, NodeError> {
    if byte > 100 {
        return Err(NodeError::BadHumByte(byte));
    }
    Ok(f64::from(byte))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedReading {
    pub temp_byte: u8,
    pub hum_byte: u8,
}

impl EncodedReading {
    pub fn from_reading(r: &Reading) -> Result<Self, NodeError> {
        Ok(Self {
            temp_byte: encode_temp(r.temp_c)?,
            hum_byte: encode_hum(r.rh_pct)?,
        })
    }
}

pub const WORD_BYTES: usize = 32;

/// Up to 32 one-byte values laid out big-endian from byte 0, as a uint256.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PackedWord {
    bytes: [u8; WORD_BYTES],
    count: u8,
}

impl PackedWord {
    pub fn bytes(&self) -> &[u8; WORD_BYTES] {
        &self.bytes
    }

    pub fn count(&self) -> usize {
        usize::from(self.count)
    }

    pub fn to_hex(&self) -> String {
        format!("0x{}", hex::encode(self.bytes))
    }

    pub fn from_hex(s: &str, count: usize) -> Result<Self, NodeError> {
        let digits = s.strip_prefix("0x").unwrap_or(s);
        let raw = hex::decode(digits).map_err(|e| NodeError::BadWord(e.to_string()))?;
        let bytes: [u8; WORD_BYTES] = raw
            .try_into()
            .map_err(|_| NodeError::BadWord("word must be exactly 32 bytes".into()))?;
        Self::from_parts(bytes, count)
    }

    pub fn from_parts(bytes: [u8; WORD_BYTES], count: usize) -> Result<Self, NodeError> {
        if !(1..=WORD_BYTES).contains(&count) {
            return Err(NodeError::BadWord(format!("count {count} outside 1..=32")));
        }
        if bytes[count..].iter().any(|&b| b != 0) {
            return Err(NodeError::BadWord("non-zero bytes past count".into()));
        }
        Ok(Self {
            bytes,
            count: count as u8,
        })
    }
}

pub fn pack(values: &[u8]) -> Result<PackedWord, NodeError> {
    if values.is_empty() || values.len() > WORD_BYTES {
        return Err(NodeError::PackLength(values.len()));
    }
    let mut bytes = [0u8; WORD_BYTES];
    bytes[..values.len()].copy_from_slice(values);
    Ok(PackedWord {
        bytes,
        count: values.len() as u8,
    })
}

pub fn unpack(word: &PackedWord) -> Vec<u8> {
    word.bytes[..word.count()].to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Sleeping,
    Init,
    Com,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Sleeping => "sleep",
            Phase::Init => "init",
            Phase::Com => "com",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlushPolicy {
    /// Readings per submission, 1..=32.
    pub batch_size: usize,
    /// Submit once the oldest buffered reading is this old. `inf` disables.
    pub max_latency_h: f64,
}

impl Default for FlushPolicy {
    fn default() -> Self {
        Self {
            batch_size: WORD_BYTES,
            max_latency_h: 24.0,
        }
    }
}

impl FlushPolicy {
    pub fn validate(&self) -> Result<(), NodeError> {
        if !(1..=WORD_BYTES).contains(&self.batch_size) {
            return Err(NodeError::InvalidConfig(
                "batch_size must be in 1..=32".into(),
            ));
        }
        if self.max_latency_h.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(NodeError::InvalidConfig("max_latency_h must be > 0".into()));
        }
        Ok(())
    }
}

/// Independent Bernoulli loss per transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossyLink {
    loss_prob: f64,
}

impl LossyLink {
    pub fn new(loss_prob: f64) -> Result<Self, NodeError> {
        if !(0.0..=1.0).contains(&loss_prob) {
            return Err(NodeError::InvalidConfig(format!(
                "loss probability {loss_prob} outside [0, 1]"
            )));
        }
        Ok(Self { loss_prob })
    }

    pub fn loss_prob(&self) -> f64 {
        self.loss_prob
    }

    /// True when the packet arrives.
    pub fn transmit<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        !rng.gen_bool(self.loss_prob)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub id: u32,
    pub phase: Phase,
    pub battery: BatteryState,
    pub buffered: Vec<EncodedReading>,
    pub alive: bool,
    /// Start of the next cycle, hours.
    pub t_h: f64,
    batch_started_h: Option<f64>,
}

impl NodeState {
    pub fn new(id: u32, battery: BatteryConfig, start_h: f64) -> Self {
        Self {
            id,
            phase: Phase::Sleeping,
            battery: BatteryState::new(battery),
            buffered: Vec::new(),
            alive: true,
            t_h: start_h,
            batch_started_h: None,
        }
    }

    pub fn address(&self) -> String {
        node_address(self.id)
    }

    /// When the next cycle takes its reading.
    pub fn next_sample_time(&self, cfg: &DutyCycleConfig) -> f64 {
        self.t_h + cfg.sleep_hours + cfg.active_durations().0
    }
}

pub fn node_address(id: u32) -> String {
    format!("node-{id}")
}

/// One line of the per-cycle trace.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRow {
    pub node_id: u32,
    pub t_sim: f64,
    /// `sleep`, `init`, `com`, or `dead`.
    pub phase: &'static str,
    pub drawn: Charge,
    pub buffered: usize,
    pub submitted: usize,
    pub delivered: usize,
}

pub const CYCLE_TRACE_HEADER: &str = "node_id,t_sim,phase,drawn_mAh,buffered,submitted,delivered";

impl CycleRow {
    pub fn to_line(&self) -> String {
        format!(
            "{},{:.6},{},{},{},{},{}",
            self.node_id,
            self.t_sim,
            self.phase,
            self.drawn,
            self.buffered,
            self.submitted,
            self.delivered
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    pub t_sim: f64,
    pub count: usize,
    pub delivered: bool,
    /// Ledger verdict, present only when delivered.
    pub outcome: Option<EnterOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutcome {
    pub node: NodeState,
    pub rows: Vec<CycleRow>,
    pub submission: Option<Submission>,
    /// Set when the battery ran out during this cycle.
    pub died_at: Option<f64>,
    /// The node was already dead; nothing happened.
    pub dead_noop: bool,
}

/// Per-node inputs that stay fixed across cycles.
#[derive(Debug, Clone, Copy)]
pub struct CycleEnv<'a> {
    pub duty: &'a DutyCycleConfig,
    pub sensor: &'a SensorSpec,
    pub flush: &'a FlushPolicy,
    pub link: &'a LossyLink,
}

/// Runs one sleep → init → com cycle. `freezer` must already be advanced to
/// the sample time (`node.next_sample_time`).
pub fn run_cycle<R: Rng + ?Sized>(
    node: &NodeState,
    env: &CycleEnv<'_>,
    freezer: &FreezerState,
    ledger: &mut Lottery,
    rng: &mut R,
) -> CycleOutcome {
    let mut n = node.clone();
    let mut out = CycleOutcome {
        node: node.clone(),
        rows: Vec::new(),
        submission: None,
        died_at: None,
        dead_noop: false,
    };
    if !n.alive {
        out.dead_noop = true;
        out.rows.push(CycleRow {
            node_id: n.id,
            t_sim: n.t_h,
            phase: "dead",
            drawn: n.battery.drawn,
            buffered: n.buffered.len(),
            submitted: 0,
            delivered: 0,
        });
        return out;
    }

    let charges = env.duty.phase_charges();
    let (init_h, com_h) = env.duty.active_durations();
    let phases = [
        (Phase::Sleeping, env.duty.sleep_hours, charges.sleep_mah),
        (Phase::Init, init_h, charges.init_mah),
        (Phase::Com, com_h, charges.com_mah),
    ];

    let mut t = n.t_h;
    for (phase, duration, charge) in phases {
        n.phase = phase;
        if !n.battery.draw(Charge::from_mah(charge)) {
            n.alive = false;
            out.died_at = Some(t);
            out.rows.push(CycleRow {
                node_id: n.id,
                t_sim: t,
                phase: "dead",
                drawn: n.battery.drawn,
                buffered: n.buffered.len(),
                submitted: 0,
                delivered: 0,
            });
            n.t_h = t;
            out.node = n;
            return out;
        }
        t += duration;

        let (mut submitted, mut delivered) = (0, 0);
        if phase == Phase::Com {
            let sample_t = t - duration;
            let reading = thermal::sample(freezer, env.sensor, rng);
            // The sensor clamps to [-40, 80] and [0, 100], so encoding cannot fail.
            let enc = EncodedReading::from_reading(&reading).expect("sensor output is encodable");
            if n.buffered.is_empty() {
                n.batch_started_h = Some(sample_t);
            }
            n.buffered.push(enc);
            let stale = n
                .batch_started_h
                .is_some_and(|s| sample_t - s >= env.flush.max_latency_h);
            if n.buffered.len() >= env.flush.batch_size || stale {
                let sub = submit(&mut n, env, ledger, rng, sample_t);
                submitted = sub.count;
                delivered = if sub.delivered { sub.count } else { 0 };
                out.submission = Some(sub);
            }
        }
        out.rows.push(CycleRow {
            node_id: n.id,
            t_sim: t,
            phase: phase.as_str(),
            drawn: n.battery.drawn,
            buffered: n.buffered.len(),
            submitted,
            delivered,
        });
    }

    n.phase = Phase::Sleeping;
    n.t_h = t;
    if n.battery.is_exhausted() {
        n.alive = false;
        out.died_at = Some(t);
    }
    out.node = n;
    out
}

fn submit<R: Rng + ?Sized>(
    n: &mut NodeState,
    env: &CycleEnv<'_>,
    ledger: &mut Lottery,
    rng: &mut R,
    t: f64,
) -> Submission {
    let temps: Vec<u8> = n.buffered.iter().map(|r| r.temp_byte).collect();
    let hums: Vec<u8> = n.buffered.iter().map(|r| r.hum_byte).collect();
    let count = temps.len();
    // Buffer length is bounded by batch_size <= 32.
    let temp_word = pack(&temps).expect("buffer holds 1..=32 readings");
    let hum_word = pack(&hums).expect("buffer holds 1..=32 readings");
    n.buffered.clear();
    n.batch_started_h = None;

    let delivered = env.link.transmit(rng);
    let outcome =
        delivered.then(|| ledger.enter_packed(&n.address(), &temp_word, &hum_word, count));
    Submission {
        t_sim: t,
        count,
        delivered,
        outcome,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::ValidityPolicy;
    use crate::thermal::FreezerParams;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn temperature_encoding_anchors() {
        assert_eq!(encode_temp(-40.0), Ok(0));
        assert_eq!(encode_temp(80.0), Ok(120));
        assert_eq!(encode_temp(-18.0), Ok(22));
        assert_eq!(encode_temp(-18.5), Ok(21));
        assert_eq!(encode_temp(-17.5), Ok(22));
        assert_eq!(encode_temp(0.5), Ok(41));
        assert!(encode_temp(-40.1).is_err());
        assert!(encode_temp(80.01).is_err());
        assert!(encode_temp(f64::NAN).is_err());
    }

    #[test]
    fn temperature_decoding() {
        assert_eq!(decode_temp(0), Ok(-40.0));
        assert_eq!(decode_temp(22), Ok(-18.0));
        assert_eq!(decode_temp(120), Ok(80.0));
        assert_eq!(decode_temp(121), Err(NodeError::BadTempByte(121)));
    }

    #[test]
    fn humidity_encoding() {
        assert_eq!(encode_hum(0.0), Ok(0));
        assert_eq!(encode_hum(100.0), Ok(100));
        assert_eq!(encode_hum(15.4), Ok(15));
        assert_eq!(encode_hum(15.5), Ok(16));
        assert!(encode_hum(-0.1).is_err());
        assert!(encode_hum(100.2).is_err());
        assert_eq!(decode_hum(101), Err(NodeError::BadHumByte(101)));
    }

    #[test]
    fn exhaustive_round_trip_error_is_at_most_half_a_degree() {
        let mut worst: f64 = 0.0;
        for tenth in -400..=800 {
            let t = f64::from(tenth) / 10.0;
            let back = decode_temp(encode_temp(t).unwrap()).unwrap();
            assert_eq!(back, t.round());
            worst = worst.max((back - t).abs());
        }
        assert!((worst - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pack_singleton_and_full() {
        let w = pack(&[22]).unwrap();
        assert_eq!(w.count(), 1);
        assert_eq!(w.bytes()[0], 22);
        assert!(w.bytes()[1..].iter().all(|&b| b == 0));
        let full: Vec<u8> = (0..32).collect();
        let w = pack(&full).unwrap();
        assert_eq!(w.count(), 32);
        assert_eq!(unpack(&w), full);
        assert_eq!(pack(&[]), Err(NodeError::PackLength(0)));
        assert_eq!(pack(&[0; 33]), Err(NodeError::PackLength(33)));
    }

    #[test]
    fn hex_form_is_big_endian_uint256() {
        let w = pack(&[0x16, 0x0f]).unwrap();
        let h = w.to_hex();
        assert_eq!(h.len(), 2 + 64);
        assert!(h.starts_with("0x160f00"));
        assert_eq!(PackedWord::from_hex(&h, 2).unwrap(), w);
        assert!(PackedWord::from_hex(&h, 1).is_err());
        assert!(PackedWord::from_hex("0x16", 1).is_err());
    }

    proptest! {
        #[test]
        fn unpack_inverts_pack(values in proptest::collection::vec(any::<u8>(), 1..=32)) {
            let w = pack(&values).unwrap();
            prop_assert_eq!(unpack(&w), values.clone());
            prop_assert_eq!(PackedWord::from_hex(&w.to_hex(), values.len()).unwrap(), w);
        }

        #[test]
        fn lifetime_increases_with_sleep(x in 0.01f64..100.0, dx in 0.001f64..10.0) {
            let b = BatteryConfig::default();
            let a = lifetime_hours(&DutyCycleConfig::default().with_sleep(x), &b).unwrap();
            let c = lifetime_hours(&DutyCycleConfig::default().with_sleep(x + dx), &b).unwrap();
            prop_assert!(c > a);
        }

        #[test]
        fn charge_display_parses_back(n in 0u64..10_000_000_000_000) {
            let c = Charge(n);
            prop_assert_eq!(Charge::parse_mah(&c.to_string()), Some(c));
        }
    }

    #[test]
    fn cycle_charge_rounded() {
        let cfg = DutyCycleConfig::default().with_sleep(1.0);
        let pc = cfg.phase_charges();
        assert_eq!(pc.init_mah, 0.03);
        assert_eq!(pc.com_mah, 0.09);
        assert!((cycle_charge_mah(&cfg) - 0.13).abs() < 1e-12);
        assert!((cycle_charge_mah(&cfg.with_sleep(0.0)) - 0.12).abs() < 1e-12);
        assert!((cfg.cycle_hours() - 1.0016).abs() < 1e-12);
    }

    #[test]
    fn cycle_charge_measured() {
        // 2400 ms at 50 mA + 3160 ms at 100 mA + 1 h at 10 µA.
        let expected = 2.4 / 3600.0 * 50.0 + 3.16 / 3600.0 * 100.0 + 0.01;
        let got = cycle_charge_mah(&DutyCycleConfig::measured().with_sleep(1.0));
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.131_111).abs() < 1e-6);
    }

    #[test]
    fn zero_currents_draw_nothing() {
        let cfg = DutyCycleConfig {
            init_current_ma: 0.0,
            com_current_ma: 0.0,
            sleep_current_ma: 0.0,
            ..DutyCycleConfig::measured()
        };
        assert_eq!(cycle_charge_mah(&cfg), 0.0);
        assert_eq!(
            lifetime_hours(&cfg, &BatteryConfig::default()),
            Err(NodeError::ZeroCycleCharge)
        );
    }

    #[test]
    fn lifetime_at_published_threshold() {
        let b = BatteryConfig::default();
        let l = lifetime_hours(&DutyCycleConfig::default().with_sleep(0.73), &b).unwrap();
        let formula = 1500.0 / (0.12 + 0.01 * 0.73) * (0.0016 + 0.73);
        assert!((l - formula).abs() < 1e-9);
        assert!((l - 8620.58).abs() < 0.01);
        assert!(l < 8760.0);
    }

    #[test]
    fn lifetime_tends_to_sleep_asymptote() {
        let b = BatteryConfig::default();
        let cfg = DutyCycleConfig::default();
        assert_eq!(lifetime_limit_hours(&cfg, &b), 150_000.0);
        let far = lifetime_hours(&cfg.with_sleep(1e7), &b).unwrap();
        assert!((far - 150_000.0).abs() < 1.0);
    }

    #[test]
    fn derating_scales_lifetime() {
        let cfg = DutyCycleConfig::default();
        let full = lifetime_hours(&cfg, &BatteryConfig::default()).unwrap();
        let cold = BatteryConfig {
            capacity_multiplier: 0.4,
            ..BatteryConfig::default()
        };
        assert!((lifetime_hours(&cfg, &cold).unwrap() - 0.4 * full).abs() < 1e-9);
    }

    /// Independent bisection on the lifetime formula.
    fn bisect_min_sleep(target: f64, cfg: &DutyCycleConfig, b: &BatteryConfig) -> f64 {
        let f = |x: f64| lifetime_hours(&cfg.with_sleep(x), b).unwrap();
        if f(0.0) >= target {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while f(hi) < target {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    #[test]
    fn min_sleep_for_one_year() {
        let b = BatteryConfig::default();
        let cfg = DutyCycleConfig::default();
        let x = min_sleep_for(8760.0, &cfg, &b).unwrap();
        assert!((x - bisect_min_sleep(8760.0, &cfg, &b)).abs() < 1e-4);
        assert!((x - 0.7426).abs() < 1e-4);
        assert!(lifetime_hours(&cfg.with_sleep(x), &b).unwrap() >= 8760.0 - 1e-6);
    }

    #[test]
    fn min_sleep_inverts_lifetime() {
        let b = BatteryConfig::default();
        for cfg in [DutyCycleConfig::default(), DutyCycleConfig::measured()] {
            for x0 in [0.05, 0.5, 0.73, 3.0, 24.0] {
                let target = lifetime_hours(&cfg.with_sleep(x0), &b).unwrap();
                let x = min_sleep_for(target, &cfg, &b).unwrap();
                assert!((x - x0).abs() < 1e-4, "{x} vs {x0}");
            }
        }
    }

    #[test]
    fn min_sleep_small_target_is_zero() {
        let b = BatteryConfig::default();
        let cfg = DutyCycleConfig::default();
        assert_eq!(min_sleep_for(1.0, &cfg, &b).unwrap(), 0.0);
        assert_eq!(bisect_min_sleep(1.0, &cfg, &b), 0.0);
    }

    #[test]
    fn min_sleep_rejects_targets_past_asymptote() {
        let b = BatteryConfig::default();
        let cfg = DutyCycleConfig::default();
        assert!(matches!(
            min_sleep_for(150_000.0, &cfg, &b),
            Err(NodeError::Unreachable { .. })
        ));
        assert!(min_sleep_for(149_000.0, &cfg, &b).is_ok());
    }

    fn run_cycles(
        cycles: usize,
        loss: f64,
        batch: usize,
    ) -> (NodeState, Lottery, Vec<CycleOutcome>) {
        let duty = DutyCycleConfig::default();
        let sensor = SensorSpec::noiseless();
        let flush = FlushPolicy {
            batch_size: batch,
            max_latency_h: f64::INFINITY,
        };
        let link = LossyLink::new(loss).unwrap();
        let env = CycleEnv {
            duty: &duty,
            sensor: &sensor,
            flush: &flush,
            link: &link,
        };
        let freezer = FreezerState::at_setpoint(&FreezerParams::default());
        let mut ledger = Lottery::new(ValidityPolicy::default());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut node = NodeState::new(0, BatteryConfig::default(), 0.0);
        let mut outs = Vec::new();
        for _ in 0..cycles {
            let o = run_cycle(&node, &env, &freezer, &mut ledger, &mut rng);
            node = o.node.clone();
            outs.push(o);
        }
        (node, ledger, outs)
    }

    #[test]
    fn lossless_link_credits_one_entry_per_flush() {
        let (_, ledger, outs) = run_cycles(64, 0.0, 32);
        let subs: Vec<_> = outs.iter().filter_map(|o| o.submission.as_ref()).collect();
        assert_eq!(subs.len(), 2);
        assert!(subs.iter().all(|s| s.delivered && s.count == 32));
        assert!(subs
            .iter()
            .all(|s| s.outcome == Some(EnterOutcome::Accepted)));
        assert_eq!(ledger.entries().len(), 1);
        assert_eq!(ledger.log().len(), 2);
    }

    #[test]
    fn total_loss_still_drains_battery() {
        let (node, ledger, outs) = run_cycles(10, 1.0, 1);
        assert!(ledger.log().is_empty());
        assert_eq!(outs.iter().filter(|o| o.submission.is_some()).count(), 10);
        let per_cycle = Charge::from_mah(cycle_charge_mah(&DutyCycleConfig::default()));
        assert_eq!(node.battery.drawn.nah(), 10 * per_cycle.nah());
    }

    #[test]
    fn battery_accounting_is_exact() {
        let cfg = DutyCycleConfig::default();
        let pc = cfg.phase_charges();
        let oracle = Charge::from_mah(pc.init_mah).nah()
            + Charge::from_mah(pc.com_mah).nah()
            + Charge::from_mah(pc.sleep_mah).nah();
        let (node, _, outs) = run_cycles(500, 0.4, 32);
        assert_eq!(node.battery.drawn.nah(), 500 * oracle);
        let drawn: Vec<u64> = outs
            .iter()
            .flat_map(|o| o.rows.iter().map(|r| r.drawn.nah()))
            .collect();
        assert!(drawn.windows(2).all(|w| w[0] <= w[1]));
        assert!((node.t_h - 500.0 * cfg.cycle_hours()).abs() < 1e-9);
    }

    #[test]
    fn dead_node_is_a_flagged_no_op() {
        let mut node = NodeState::new(3, BatteryConfig::default(), 0.0);
        node.alive = false;
        let duty = DutyCycleConfig::default();
        let sensor = SensorSpec::noiseless();
        let flush = FlushPolicy::default();
        let link = LossyLink::new(0.0).unwrap();
        let env = CycleEnv {
            duty: &duty,
            sensor: &sensor,
            flush: &flush,
            link: &link,
        };
        let mut ledger = Lottery::new(ValidityPolicy::default());
        let freezer = FreezerState::at_setpoint(&FreezerParams::default());
        let o = run_cycle(
            &node,
            &env,
            &freezer,
            &mut ledger,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(o.dead_noop);
        assert_eq!(o.node, node);
        assert_eq!(o.rows[0].phase, "dead");
    }

    #[test]
    fn node_dies_and_stays_dead() {
        let duty = DutyCycleConfig::default();
        let battery = BatteryConfig {
            capacity_mah: 1.0,
            ..BatteryConfig::default()
        };
        let sensor = SensorSpec::noiseless();
        let flush = FlushPolicy::default();
        let link = LossyLink::new(0.0).unwrap();
        let env = CycleEnv {
            duty: &duty,
            sensor: &sensor,
            flush: &flush,
            link: &link,
        };
        let mut ledger = Lottery::new(ValidityPolicy::default());
        let freezer = FreezerState::at_setpoint(&FreezerParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut node = NodeState::new(0, battery, 0.0);
        let mut death = None;
        for _ in 0..20 {
            let o = run_cycle(&node, &env, &freezer, &mut ledger, &mut rng);
            if let Some(t) = o.died_at {
                death = Some(t);
            }
            node = o.node;
        }
        assert!(!node.alive);
        assert_eq!(node.battery.drawn, node.battery.capacity());
        // 1 mAh / 0.1273 mAh per cycle: 7 full cycles, death in the eighth.
        let l = lifetime_hours(&duty, &battery).unwrap();
        let t = death.unwrap();
        assert!((t - l).abs() <= duty.cycle_hours(), "{t} vs {l}");
    }
}
