//! Browser bindings for the demo page: freezer trace, lifetime curve and
//! depositor-redundancy histogram.

use dss_core::node::{self, BatteryConfig, ChargeModel, DutyCycleConfig};
use dss_core::registry;
use dss_core::thermal::{self, FreezerParams, FreezerState, SensorSpec};
use wasm_bindgen::prelude::*;

fn duty(measured: bool) -> DutyCycleConfig {
    if measured {
        DutyCycleConfig {
            charge_model: ChargeModel::Measured,
            ..DutyCycleConfig::default()
        }
    } else {
        DutyCycleConfig::default()
    }
}

/// `[t, temp, t, temp, ...]` at one-minute steps, with an optional door
/// opening (`door_at_h < 0` disables it).
pub fn freezer_series(
    hours: f64,
    setpoint_c: f64,
    door_at_h: f64,
    door_s: f64,
) -> Result<Vec<f64>, String> {
    if !(hours > 0.0 && hours <= 24.0 * 14.0) {
        return Err("hours must be in (0, 336]".into());
    }
    let params = FreezerParams {
        setpoint_c,
        ..FreezerParams::default()
    };
    params.validate().map_err(|e| e.to_string())?;
    let tick = 1.0 / 60.0;
    let mut s = FreezerState::at_setpoint(&params);
    let mut door = (door_at_h >= 0.0).then_some(door_at_h);
    let mut out = vec![s.t_h, s.air_temp_c];
    while s.t_h < hours - 1e-9 {
        if door.is_some_and(|at| at <= s.t_h + 1e-9) {
            s = thermal::open_door(&s, s.t_h, door_s);
            door = None;
        }
        let mut target = (s.t_h + tick).min(hours);
        if let Some(at) = door.filter(|&at| at > s.t_h) {
            target = target.min(at);
        }
        s = thermal::step(&s, &params, target - s.t_h).map_err(|e| e.to_string())?;
        let sensed = thermal::quantize(s.air_temp_c, SensorSpec::default().temp_resolution_c);
        out.extend([s.t_h, sensed]);
    }
    Ok(out)
}

/// `[x, lifetime_h, ...]` for `points` sleep periods evenly spaced up to `x_max`.
pub fn lifetime_series(x_max: f64, points: usize, measured: bool) -> Result<Vec<f64>, String> {
    if !(x_max > 0.0 && x_max.is_finite()) || points < 2 {
        return Err("need x_max > 0 and at least two points".into());
    }
    let battery = BatteryConfig::default();
    let base = duty(measured);
    let mut out = Vec::with_capacity(points * 2);
    for i in 0..points {
        let x = x_max * i as f64 / (points - 1) as f64;
        let l = node::lifetime_hours(&base.with_sleep(x), &battery).map_err(|e| e.to_string())?;
        out.extend([x, l]);
    }
    Ok(out)
}

pub fn min_sleep_hours(target_h: f64, measured: bool) -> Result<f64, String> {
    node::min_sleep_for(target_h, &duty(measured), &BatteryConfig::default())
        .map_err(|e| e.to_string())
}

/// Histogram lines plus the at-risk species, from CSV text or, when the text
/// is empty, a synthetic extract.
pub fn redundancy_text(
    csv: &str,
    k: usize,
    synthetic_species: usize,
    seed: u64,
) -> Result<String, String> {
    let (records, skipped) = if csv.trim().is_empty() {
        (registry::synthetic_records(synthetic_species, seed), 0)
    } else {
        let r = registry::ingest_str(csv).map_err(|e| e.to_string())?;
        (r.records, r.skipped.len())
    };
    let hist = registry::depositor_histogram(&records);
    let risky = registry::at_risk(&records, k);
    let mut s = format!(
        "species {}  records {}  skipped {}  single-depositor share {:.1}%\n",
        hist.species_count(),
        records.len(),
        skipped,
        100.0 * hist.single_depositor_share()
    );
    s.push_str(&hist.to_text());
    s.push_str(&format!(
        "at risk (fewer than {k} depositors): {}\n",
        risky.len()
    ));
    for name in risky.iter().take(50) {
        s.push_str(name);
        s.push('\n');
    }
    if risky.len() > 50 {
        s.push_str("...\n");
    }
    Ok(s)
}

fn js(r: Result<Vec<f64>, String>) -> Result<Vec<f64>, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn freezer_trace(
    hours: f64,
    setpoint_c: f64,
    door_at_h: f64,
    door_s: f64,
) -> Result<Vec<f64>, JsValue> {
    js(freezer_series(hours, setpoint_c, door_at_h, door_s))
}

#[wasm_bindgen]
pub fn lifetime_curve(x_max: f64, points: usize, measured: bool) -> Result<Vec<f64>, JsValue> {
    js(lifetime_series(x_max, points, measured))
}

#[wasm_bindgen]
pub fn min_sleep(target_h: f64, measured: bool) -> Result<f64, JsValue> {
    min_sleep_hours(target_h, measured).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn redundancy(
    csv: &str,
    k: usize,
    synthetic_species: usize,
    seed: u64,
) -> Result<String, JsValue> {
    redundancy_text(csv, k, synthetic_species, seed).map_err(|e| JsValue::from_str(&e))
}
