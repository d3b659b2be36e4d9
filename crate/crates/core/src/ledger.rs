//! Incentive lottery state machine.
//!
//! Anyone may `fund` the pot. Nodes `enter` with encoded readings and are
//! admitted only when the decoded readings satisfy the [`ValidityPolicy`].
//! `draw` picks a uniform winner among the round's distinct entrants and
//! pays out the whole pot. Every call, accepted or not, is appended to the
//! transaction log, and replaying the log rebuilds the state exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::node::{decode_hum, decode_temp, unpack, PackedWord};

pub type Tokens = u64;

pub const LOG_HEADER: &str = "# dss-ledger-log v1";
pub const LOG_COLUMNS: &str = "tick,op,address,payload,result,pot";

#[derive(Debug, Error, PartialEq)]
pub enum LedgerError {
    #[error("fund amount must be positive")]
    NonPositiveAmount,
    #[error("no eligible entries in round {0}")]
    NoEntries(u64),
    #[error("invalid address {0:?}")]
    BadAddress(String),
    #[error("pot overflow")]
    Overflow,
}

#[derive(Debug, Error, PartialEq)]
#[error("log line {line}: {message}")]
pub struct ReplayError {
    pub line: usize,
    pub message: String,
}

/// Storage conditions that make a reading eligible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidityPolicy {
    pub ideal_temp_c: (f64, f64),
    pub ideal_rh_pct: (f64, f64),
    /// Accept any subzero temperature (byte < 40) in place of the ideal band.
    pub acceptable_mode: bool,
}

impl Default for ValidityPolicy {
    fn default() -> Self {
        Self {
            ideal_temp_c: (-21.0, -15.0),
            ideal_rh_pct: (12.0, 18.0),
            acceptable_mode: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    /// A byte outside its encoding range.
    Malformed,
    TempOutOfRange,
    HumOutOfRange,
    CountMismatch,
}

impl Rejection {
    pub fn as_str(self) -> &'static str {
        match self {
            Rejection::Malformed => "malformed",
            Rejection::TempOutOfRange => "temp_out_of_range",
            Rejection::HumOutOfRange => "hum_out_of_range",
            Rejection::CountMismatch => "count_mismatch",
        }
    }
}

impl FromStr for Rejection {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "malformed" => Rejection::Malformed,
            "temp_out_of_range" => Rejection::TempOutOfRange,
            "hum_out_of_range" => Rejection::HumOutOfRange,
            "count_mismatch" => Rejection::CountMismatch,
            _ => return Err(()),
        })
    }
}

impl ValidityPolicy {
    pub fn validate(&self) -> Result<(), String> {
        let (tl, th) = self.ideal_temp_c;
        let (hl, hh) = self.ideal_rh_pct;
        if !(tl <= th && hl <= hh) {
            return Err("ideal ranges must be non-empty".into());
        }
        if th >= 0.0 {
            return Err("ideal temperature band must be subzero".into());
        }
        if !(0.0..=100.0).contains(&hl) || !(0.0..=100.0).contains(&hh) {
            return Err("ideal humidity band must lie in [0, 100]".into());
        }
        Ok(())
    }

    pub fn check(&self, temp_byte: u8, hum_byte: u8) -> Result<(), Rejection> {
        let (Ok(temp), Ok(hum)) = (decode_temp(temp_byte), decode_hum(hum_byte)) else {
            return Err(Rejection::Malformed);
        };
        let ideal_temp = (self.ideal_temp_c.0..=self.ideal_temp_c.1).contains(&temp);
        let temp_ok = ideal_temp || (self.acceptable_mode && temp_byte < 40);
        if !temp_ok {
            return Err(Rejection::TempOutOfRange);
        }
        if !(self.ideal_rh_pct.0..=self.ideal_rh_pct.1).contains(&hum) {
            return Err(Rejection::HumOutOfRange);
        }
        Ok(())
    }

    fn header_line(&self) -> String {
        format!(
            "# policy ideal_temp_c={}:{} ideal_rh_pct={}:{} acceptable_mode={}",
            self.ideal_temp_c.0,
            self.ideal_temp_c.1,
            self.ideal_rh_pct.0,
            self.ideal_rh_pct.1,
            self.acceptable_mode
        )
    }

    fn parse_header(line: &str) -> Option<Self> {
        let rest = line.strip_prefix("# policy ")?;
        let mut p = ValidityPolicy::default();
        let range = |v: &str| -> Option<(f64, f64)> {
            let (a, b) = v.split_once(':')?;
            Some((a.parse().ok()?, b.parse().ok()?))
        };
        for kv in rest.split_whitespace() {
            let (k, v) = kv.split_once('=')?;
            match k {
                "ideal_temp_c" => p.ideal_temp_c = range(v)?,
                "ideal_rh_pct" => p.ideal_rh_pct = range(v)?,
                "acceptable_mode" => p.acceptable_mode = v.parse().ok()?,
                _ => return None,
            }
        }
        Some(p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub address: String,
    pub temp_byte: u8,
    pub hum_byte: u8,
    pub tick: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnterOutcome {
    Accepted,
    Rejected(Rejection),
}

impl fmt::Display for EnterOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnterOutcome::Accepted => f.write_str("accepted"),
            EnterOutcome::Rejected(r) => write!(f, "rejected:{}", r.as_str()),
        }
    }
}

impl FromStr for EnterOutcome {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        if s == "accepted" {
            return Ok(EnterOutcome::Accepted);
        }
        let r = s.strip_prefix("rejected:").ok_or(())?;
        Ok(EnterOutcome::Rejected(r.parse()?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Fund,
    Enter,
    EnterPacked,
    Draw,
}

impl Op {
    fn as_str(self) -> &'static str {
        match self {
            Op::Fund => "fund",
            Op::Enter => "enter",
            Op::EnterPacked => "enter_packed",
            Op::Draw => "draw",
        }
    }
}

impl FromStr for Op {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "fund" => Op::Fund,
            "enter" => Op::Enter,
            "enter_packed" => Op::EnterPacked,
            "draw" => Op::Draw,
            _ => return Err(()),
        })
    }
}

/// One line of the transaction log: `tick,op,address,payload,result,pot`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub tick: u64,
    pub op: Op,
    pub address: String,
    pub payload: String,
    pub result: String,
    pub pot: Tokens,
}

impl LogRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.tick,
            self.op.as_str(),
            self.address,
            self.payload,
            self.result,
            self.pot
        )
    }

    fn parse(line: &str) -> Result<Self, String> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(format!("expected 6 fields, found {}", f.len()));
        }
        Ok(Self {
            tick: f[0].parse().map_err(|_| format!("bad tick {:?}", f[0]))?,
            op: f[1].parse().map_err(|_| format!("unknown op {:?}", f[1]))?,
            address: f[2].to_string(),
            payload: f[3].to_string(),
            result: f[4].to_string(),
            pot: f[5].parse().map_err(|_| format!("bad pot {:?}", f[5]))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DrawResult {
    pub round: u64,
    pub winner: String,
    pub amount: Tokens,
}

/// Addresses appear verbatim in comma-separated logs and traces.
pub fn check_address(address: &str) -> Result<(), LedgerError> {
    let ok = !address.is_empty()
        && address != "-"
        && !address
            .chars()
            .any(|c| c == ',' || c == '#' || c.is_whitespace() || c.is_control());
    if ok {
        Ok(())
    } else {
        Err(LedgerError::BadAddress(address.to_string()))
    }
}

/// Index of the winner among `n` entrants for a given seed.
pub fn pick_winner(n: usize, seed: u64) -> usize {
    ChaCha8Rng::seed_from_u64(seed).gen_range(0..n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lottery {
    policy: ValidityPolicy,
    pot: Tokens,
    entries: Vec<Entry>,
    round: u64,
    tick: u64,
    funded_total: Tokens,
    paid_total: Tokens,
    payouts: BTreeMap<String, Tokens>,
    log: Vec<LogRecord>,
}

impl Lottery {
    pub fn new(policy: ValidityPolicy) -> Self {
        Self {
            policy,
            pot: 0,
            entries: Vec::new(),
            round: 0,
            tick: 0,
            funded_total: 0,
            paid_total: 0,
            payouts: BTreeMap::new(),
            log: Vec::new(),
        }
    }

    pub fn policy(&self) -> &ValidityPolicy {
        &self.policy
    }
    pub fn pot(&self) -> Tokens {
        self.pot
    }
    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }
    pub fn round(&self) -> u64 {
        self.round
    }
    pub fn funded_total(&self) -> Tokens {
        self.funded_total
    }
    pub fn paid_total(&self) -> Tokens {
        self.paid_total
    }
    pub fn payouts(&self) -> &BTreeMap<String, Tokens> {
        &self.payouts
    }
    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    /// Funded tokens are either in the pot or paid out.
    pub fn is_conserved(&self) -> bool {
        self.pot.checked_add(self.paid_total) == Some(self.funded_total)
    }

    fn append(&mut self, op: Op, address: &str, payload: String, result: String) {
        self.log.push(LogRecord {
            tick: self.tick,
            op,
            address: address.to_string(),
            payload,
            result,
            pot: self.pot,
        });
        self.tick += 1;
    }

    pub fn fund(&mut self, address: &str, amount: Tokens) -> Result<(), LedgerError> {
        check_address(address)?;
        let payload = format!("amount={amount}");
        if amount == 0 {
            self.append(
                Op::Fund,
                address,
                payload,
                "rejected:non_positive_amount".into(),
            );
            return Err(LedgerError::NonPositiveAmount);
        }
        let (Some(pot), Some(funded)) = (
            self.pot.checked_add(amount),
            self.funded_total.checked_add(amount),
        ) else {
            self.append(Op::Fund, address, payload, "rejected:overflow".into());
            return Err(LedgerError::Overflow);
        };
        self.pot = pot;
        self.funded_total = funded;
        self.append(Op::Fund, address, payload, "ok".into());
        Ok(())
    }

    fn admit(&mut self, address: &str, temp_byte: u8, hum_byte: u8) {
        self.entries.retain(|e| e.address != address);
        self.entries.push(Entry {
            address: address.to_string(),
            temp_byte,
            hum_byte,
            tick: self.tick,
        });
    }

    /// Single-reading entry.
    pub fn enter(&mut self, address: &str, temp_byte: u8, hum_byte: u8) -> EnterOutcome {
        // Unrepresentable addresses never reach the log.
        if check_address(address).is_err() {
            return EnterOutcome::Rejected(Rejection::Malformed);
        }
        let outcome = match self.policy.check(temp_byte, hum_byte) {
            Ok(()) => {
                self.admit(address, temp_byte, hum_byte);
                EnterOutcome::Accepted
            }
            Err(r) => EnterOutcome::Rejected(r),
        };
        self.append(
            Op::Enter,
            address,
            format!("temp={temp_byte};hum={hum_byte}"),
            outcome.to_string(),
        );
        outcome
    }

    /// Up to 32 readings in one call. Every reading must pass the policy.
    pub fn enter_packed(
        &mut self,
        address: &str,
        temp_word: &PackedWord,
        hum_word: &PackedWord,
        count: usize,
    ) -> EnterOutcome {
        if check_address(address).is_err() {
            return EnterOutcome::Rejected(Rejection::Malformed);
        }
        let temps = unpack(temp_word);
        let hums = unpack(hum_word);
        let outcome = if temps.len() != count || hums.len() != count {
            EnterOutcome::Rejected(Rejection::CountMismatch)
        } else {
            // Malformed bytes take precedence over range violations.
            let verdicts: Vec<_> = temps
                .iter()
                .zip(&hums)
                .map(|(&t, &h)| self.policy.check(t, h))
                .collect();
            match verdicts
                .iter()
                .find(|v| **v == Err(Rejection::Malformed))
                .or_else(|| verdicts.iter().find(|v| v.is_err()))
            {
                Some(Err(r)) => EnterOutcome::Rejected(*r),
                _ => {
                    self.admit(address, temps[count - 1], hums[count - 1]);
                    EnterOutcome::Accepted
                }
            }
        };
        self.append(
            Op::EnterPacked,
            address,
            format!(
                "count={count};temps={}/{};hums={}/{}",
                temp_word.to_hex(),
                temp_word.count(),
                hum_word.to_hex(),
                hum_word.count()
            ),
            outcome.to_string(),
        );
        outcome
    }

    /// Uniform draw among the round's entrants. The pot goes to the winner,
    /// entries are cleared and the round advances.
    pub fn draw(&mut self, seed: u64) -> Result<DrawResult, LedgerError> {
        let payload = format!("seed={seed}");
        if self.entries.is_empty() {
            self.append(Op::Draw, "-", payload, "rejected:no_entries".into());
            return Err(LedgerError::NoEntries(self.round));
        }
        let idx = pick_winner(self.entries.len(), seed);
        let winner = self.entries[idx].address.clone();
        let amount = self.pot;
        self.paid_total += amount;
        *self.payouts.entry(winner.clone()).or_default() += amount;
        self.pot = 0;
        let round = self.round;
        self.entries.clear();
        self.round += 1;
        self.append(
            Op::Draw,
            "-",
            payload,
            format!("winner={winner};amount={amount}"),
        );
        Ok(DrawResult {
            round,
            winner,
            amount,
        })
    }

    pub fn log_text(&self) -> String {
        let mut s = String::new();
        s.push_str(LOG_HEADER);
        s.push('\n');
        s.push_str(&self.policy.header_line());
        s.push('\n');
        s.push_str(LOG_COLUMNS);
        s.push('\n');
        for r in &self.log {
            s.push_str(&r.to_line());
            s.push('\n');
        }
        s
    }

    /// Re-executes every logged call on a fresh ledger and checks that each
    /// recomputed record matches the logged one, then checks conservation.
    pub fn replay(text: &str) -> Result<Lottery, ReplayError> {
        let err = |line: usize, message: String| ReplayError { line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l.trim_end() == LOG_HEADER => {}
            _ => return Err(err(1, format!("missing header {LOG_HEADER:?}"))),
        }
        let policy = match lines.next() {
            Some((n, l)) => ValidityPolicy::parse_header(l.trim_end())
                .ok_or_else(|| err(n, "bad policy line".into()))?,
            None => return Err(err(2, "missing policy line".into())),
        };
        let mut ledger = Lottery::new(policy);
        for (n, raw) in lines {
            let line = raw.trim_end();
            if line.is_empty() || line == LOG_COLUMNS {
                continue;
            }
            let rec = LogRecord::parse(line).map_err(|m| err(n, m))?;
            ledger.apply(&rec).map_err(|m| err(n, m))?;
            let got = ledger.log.last().expect("apply appends a record");
            if *got != rec {
                return Err(err(
                    n,
                    format!("recorded {:?} but replay gives {:?}", line, got.to_line()),
                ));
            }
            if !ledger.is_conserved() {
                return Err(err(n, "conservation violated".into()));
            }
        }
        Ok(ledger)
    }

    fn apply(&mut self, rec: &LogRecord) -> Result<(), String> {
        let kv = |key: &str| -> Result<&str, String> {
            rec.payload
                .split(';')
                .find_map(|p| p.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| format!("payload lacks {key}"))
        };
        match rec.op {
            Op::Fund => {
                let amount: Tokens = kv("amount")?.parse().map_err(|_| "bad amount")?;
                let _ = self.fund(&rec.address, amount);
            }
            Op::Enter => {
                let t: u8 = kv("temp")?.parse().map_err(|_| "bad temp")?;
                let h: u8 = kv("hum")?.parse().map_err(|_| "bad hum")?;
                self.enter(&rec.address, t, h);
            }
            Op::EnterPacked => {
                let count: usize = kv("count")?.parse().map_err(|_| "bad count")?;
                let word = |key: &str| -> Result<PackedWord, String> {
                    let (hex, n) = kv(key)?.split_once('/').ok_or("bad word")?;
                    let n: usize = n.parse().map_err(|_| "bad word count")?;
                    PackedWord::from_hex(hex, n).map_err(|e| e.to_string())
                };
                let tw = word("temps")?;
                let hw = word("hums")?;
                self.enter_packed(&rec.address, &tw, &hw, count);
            }
            Op::Draw => {
                let seed: u64 = kv("seed")?.parse().map_err(|_| "bad seed")?;
                let _ = self.draw(seed);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::node::pack;

    #[test]
    fn fund_is_additive_and_rejects_zero() {
        let mut l = Lottery::new(ValidityPolicy::default());
        l.fund("alice", 3).unwrap();
        l.fund("bob", 7).unwrap();
        assert_eq!(l.pot(), 10);
        assert_eq!(l.fund("carol", 0), Err(LedgerError::NonPositiveAmount));
        assert_eq!(l.pot(), 10);
        assert_eq!(l.log().len(), 3);
        assert!(l.is_conserved());

        let mut r = Lottery::new(ValidityPolicy::default());
        r.fund("bob", 7).unwrap();
        r.fund("alice", 3).unwrap();
        assert_eq!(r.pot(), l.pot());
    }

    #[test]
    fn ideal_reading_is_accepted() {
        let mut l = Lottery::new(ValidityPolicy::default());
        assert_eq!(l.enter("n1", 22, 15), EnterOutcome::Accepted);
        assert_eq!(l.entries().len(), 1);
    }

    #[test]
    fn above_freezing_is_always_rejected() {
        for acceptable_mode in [false, true] {
            let mut l = Lottery::new(ValidityPolicy {
                acceptable_mode,
                ..ValidityPolicy::default()
            });
            assert_eq!(
                l.enter("n1", 60, 15),
                EnterOutcome::Rejected(Rejection::TempOutOfRange)
            );
            assert_eq!(
                l.enter("n1", 40, 15),
                EnterOutcome::Rejected(Rejection::TempOutOfRange)
            );
            assert!(l.entries().is_empty());
        }
    }

    #[test]
    fn acceptable_mode_admits_any_subzero_temperature() {
        let mut strict = Lottery::new(ValidityPolicy::default());
        assert_eq!(
            strict.enter("n1", 30, 15),
            EnterOutcome::Rejected(Rejection::TempOutOfRange)
        );
        let mut relaxed = Lottery::new(ValidityPolicy {
            acceptable_mode: true,
            ..ValidityPolicy::default()
        });
        assert_eq!(relaxed.enter("n1", 30, 15), EnterOutcome::Accepted);
        assert_eq!(relaxed.enter("n2", 39, 15), EnterOutcome::Accepted);
    }

    #[test]
    fn band_edges_are_inclusive() {
        let p = ValidityPolicy::default();
        assert_eq!(p.check(19, 12), Ok(()));
        assert_eq!(p.check(25, 18), Ok(()));
        assert_eq!(p.check(18, 15), Err(Rejection::TempOutOfRange));
        assert_eq!(p.check(22, 19), Err(Rejection::HumOutOfRange));
        assert_eq!(p.check(22, 11), Err(Rejection::HumOutOfRange));
    }

    #[test]
    fn malformed_bytes_have_their_own_reason() {
        let mut l = Lottery::new(ValidityPolicy::default());
        assert_eq!(
            l.enter("n1", 121, 15),
            EnterOutcome::Rejected(Rejection::Malformed)
        );
        assert_eq!(
            l.enter("n1", 22, 101),
            EnterOutcome::Rejected(Rejection::Malformed)
        );
        assert_eq!(l.log()[0].result, "rejected:malformed");
    }

    #[test]
    fn latest_entry_per_address_wins() {
        let mut l = Lottery::new(ValidityPolicy::default());
        l.enter("n1", 22, 15);
        l.enter("n1", 21, 14);
        assert_eq!(l.entries().len(), 1);
        assert_eq!(l.entries()[0].temp_byte, 21);
    }

    #[test]
    fn packed_entry_needs_every_reading_valid() {
        let mut l = Lottery::new(ValidityPolicy::default());
        let temps = pack(&[22; 32]).unwrap();
        let hums = pack(&[15; 32]).unwrap();
        assert_eq!(
            l.enter_packed("n1", &temps, &hums, 32),
            EnterOutcome::Accepted
        );

        let mut bad = [22u8; 32];
        bad[17] = 60;
        let temps = pack(&bad).unwrap();
        assert_eq!(
            l.enter_packed("n2", &temps, &hums, 32),
            EnterOutcome::Rejected(Rejection::TempOutOfRange)
        );
        assert_eq!(l.entries().len(), 1);
    }

    #[test]
    fn packed_count_mismatch_is_rejected() {
        let mut l = Lottery::new(ValidityPolicy::default());
        let temps = pack(&[22; 4]).unwrap();
        let hums = pack(&[15; 3]).unwrap();
        assert_eq!(
            l.enter_packed("n1", &temps, &hums, 4),
            EnterOutcome::Rejected(Rejection::CountMismatch)
        );
        let hums = pack(&[15; 4]).unwrap();
        assert_eq!(
            l.enter_packed("n1", &temps, &hums, 3),
            EnterOutcome::Rejected(Rejection::CountMismatch)
        );
    }

    #[test]
    fn single_packed_reading_matches_enter() {
        for (t, h) in [(22, 15), (30, 15), (60, 15), (22, 40), (121, 15)] {
            let mut a = Lottery::new(ValidityPolicy::default());
            let mut b = Lottery::new(ValidityPolicy::default());
            let tw = pack(&[t]).unwrap();
            let hw = pack(&[h]).unwrap();
            assert_eq!(a.enter("n", t, h), b.enter_packed("n", &tw, &hw, 1));
            assert_eq!(a.entries(), b.entries());
        }
    }

    #[test]
    fn single_entrant_takes_the_pot() {
        let mut l = Lottery::new(ValidityPolicy::default());
        l.fund("sponsor", 50).unwrap();
        l.enter("n1", 22, 15);
        let r = l.draw(99).unwrap();
        assert_eq!(r.winner, "n1");
        assert_eq!(r.amount, 50);
        assert_eq!(l.pot(), 0);
        assert_eq!(l.round(), 1);
        assert!(l.entries().is_empty());
        assert_eq!(l.payouts()["n1"], 50);
        assert!(l.is_conserved());
    }

    #[test]
    fn draw_without_entries_leaves_pot() {
        let mut l = Lottery::new(ValidityPolicy::default());
        l.fund("sponsor", 5).unwrap();
        assert_eq!(l.draw(1), Err(LedgerError::NoEntries(0)));
        assert_eq!(l.pot(), 5);
        assert_eq!(l.round(), 0);
    }

    #[test]
    fn draw_is_deterministic_in_seed() {
        let build = || {
            let mut l = Lottery::new(ValidityPolicy::default());
            l.fund("s", 10).unwrap();
            for i in 0..7 {
                l.enter(&format!("n{i}"), 22, 15);
            }
            l
        };
        for seed in 0..20 {
            assert_eq!(build().draw(seed), build().draw(seed));
        }
    }

    #[test]
    fn addresses_must_be_log_safe() {
        let mut l = Lottery::new(ValidityPolicy::default());
        assert!(l.fund("a,b", 1).is_err());
        assert_eq!(
            l.enter("has space", 22, 15),
            EnterOutcome::Rejected(Rejection::Malformed)
        );
        assert!(l.log().is_empty());
    }

    #[test]
    fn replay_rebuilds_state() {
        let mut l = Lottery::new(ValidityPolicy {
            acceptable_mode: true,
            ..ValidityPolicy::default()
        });
        l.fund("s", 10).unwrap();
        l.enter("n1", 22, 15);
        l.enter("n2", 30, 15);
        l.enter("n3", 60, 15);
        l.enter_packed(
            "n4",
            &pack(&[22, 23]).unwrap(),
            &pack(&[15, 16]).unwrap(),
            2,
        );
        l.draw(3).unwrap();
        let _ = l.draw(4);
        let _ = l.fund("s", 0);
        let text = l.log_text();
        let r = Lottery::replay(&text).unwrap();
        assert_eq!(r, l);
        assert_eq!(r.log_text(), text);
    }

    #[test]
    fn replay_detects_tampered_pot() {
        let mut l = Lottery::new(ValidityPolicy::default());
        l.fund("s", 10).unwrap();
        l.enter("n1", 22, 15);
        l.draw(0).unwrap();
        let text = l
            .log_text()
            .replace("0,fund,s,amount=10,ok,10", "0,fund,s,amount=10,ok,12");
        let e = Lottery::replay(&text).unwrap_err();
        assert_eq!(e.line, 4);
    }

    #[test]
    fn replay_rejects_garbage() {
        assert_eq!(Lottery::replay("").unwrap_err().line, 1);
        let mut text = Lottery::new(ValidityPolicy::default()).log_text();
        text.push_str("0,fund,s\n");
        assert_eq!(Lottery::replay(&text).unwrap_err().line, 4);
    }
}
