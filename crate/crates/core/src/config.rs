//! Config file: TOML with one table per subsystem and an optional
//! `version = 1` line. Unknown keys are errors.

use thiserror::Error;

use crate::sim::SimConfig;

pub const CONFIG_VERSION: i64 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(toml::de::Error),
    #[error("unsupported config version {0} (expected {CONFIG_VERSION})")]
    Version(String),
    #[error(transparent)]
    Invalid(#[from] crate::sim::SimError),
}

impl From<toml::de::Error> for ConfigError {
    fn from(e: toml::de::Error) -> Self {
        ConfigError::Parse(e)
    }
}

/// Parses and validates a config file.
pub fn parse(text: &str) -> Result<SimConfig, ConfigError> {
    let mut table: toml::Table = toml::from_str(text)?;
    if let Some(v) = table.remove("version") {
        if v.as_integer() != Some(CONFIG_VERSION) {
            return Err(ConfigError::Version(v.to_string()));
        }
    }
    let cfg: SimConfig = table.try_into()?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn to_text(cfg: &SimConfig) -> String {
    let body = toml::to_string(cfg).expect("config serializes");
    format!("version = {CONFIG_VERSION}\n\n{body}")
}

/// Every config key with where its default comes from.
pub const KEY_NOTES: &[(&str, &str)] = &[
    ("sim.n_nodes", "scenario choice"),
    ("sim.duration_h", "scenario choice"),
    ("sim.tick_h", "freezer integration step"),
    ("sim.loss_prob", "0 with the node outside the freezer; 0.4 reproduces the in-freezer measurement"),
    ("sim.seed", "run seed"),
    ("sim.liveness_window_h", "0 = three report intervals"),
    ("duty_cycle.sleep_hours", "X = 0.73 h, the published one-year threshold"),
    ("duty_cycle.init_duration_h", "init phase, 2400 ms measured"),
    ("duty_cycle.init_current_ma", "init phase, about 50 mA measured"),
    ("duty_cycle.com_duration_h", "com phase, 3160 ms measured"),
    ("duty_cycle.com_current_ma", "com phase, about 100 mA measured"),
    ("duty_cycle.sleep_current_ma", "deep sleep, 10 uA nominal"),
    ("duty_cycle.charge_model", "rounded (0.03 + 0.09 + 0.01X mAh) or measured"),
    ("battery.capacity_mah", "1.5 Ah LiFePO4 cell"),
    ("battery.nominal_v", "3.6 V, informational"),
    ("battery.capacity_multiplier", "1.0 outside the freezer; 0.4-0.6 for a cell at -20..-40 C"),
    ("freezer.setpoint_c", "-18 C domestic freezer setting"),
    ("freezer.hysteresis_band_c", "compressor band half-width, model choice"),
    ("freezer.ambient_c", "room temperature, model choice"),
    ("freezer.warm_rate_c_per_h", "passive warming at the setpoint, model choice"),
    ("freezer.cool_rate_c_per_h", "compressor cooling, model choice"),
    ("freezer.door_open_delta_c_per_s", "chosen so a 30 s opening stays under 0.1 C"),
    ("sensor.temp_range", "DHT22 range -40..80 C"),
    ("sensor.temp_accuracy_c", "DHT22 +-0.5 C"),
    ("sensor.temp_resolution_c", "DHT22 0.1 C"),
    ("sensor.rh_accuracy_pct", "DHT22 +-2 %RH"),
    ("sensor.rh_resolution_pct", "DHT22 0.1 %RH"),
    ("sensor.measure_current_ma", "DHT22 measuring mode 1 mA"),
    ("sensor.standby_current_ua", "DHT22 stand-by 40 uA"),
    ("sensor.noise", "uniform noise within the accuracy bound"),
    ("flush.batch_size", "32 one-byte readings per uint256 word"),
    ("flush.max_latency_h", "submit a partial batch after this long"),
    ("policy.ideal_temp_c", "-18 +- 3 C"),
    ("policy.ideal_rh_pct", "15 +- 3 %RH"),
    ("policy.acceptable_mode", "false; true accepts any subzero temperature"),
    ("lottery.draw_every_h", "weekly draws, scenario choice"),
    ("lottery.fund_amount", "tokens added before each draw, scenario choice"),
    ("lottery.sponsor", "funding address"),
    ("node", "per-node overrides: node, sleep_hours, setpoint_c, ambient_c, capacity_mah, capacity_multiplier"),
    ("door", "door openings: node, at_h, duration_s"),
];

/// `key = default  # note` lines for `--help`.
pub fn key_reference() -> String {
    let defaults: toml::Table =
        toml::Table::try_from(SimConfig::default()).expect("config serializes");
    let mut out = String::new();
    for (key, note) in KEY_NOTES {
        let value = lookup(&defaults, key).map_or_else(|| "[]".to_string(), |v| v.to_string());
        out.push_str(&format!("  {key} = {value}    # {note}\n"));
    }
    out
}

fn lookup<'a>(table: &'a toml::Table, dotted: &str) -> Option<&'a toml::Value> {
    let (section, key) = dotted.split_once('.')?;
    table.get(section)?.as_table()?.get(key)
}
