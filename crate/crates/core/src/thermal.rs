//! Freezer interior model and the temperature/humidity sensor that samples it.
//!
//! The air temperature follows a first-order law: passive warming toward
//! ambient (Newtonian, calibrated so the rate at the setpoint equals
//! `warm_rate_c_per_h`), a constant cooling rate while the compressor runs,
//! and a constant extra warming rate while the door is open. The compressor
//! switches on at `setpoint + band` and off at `setpoint - band`.
//!
//! Within one step the compressor and door flags are piecewise constant, so
//! the linear ODE is integrated in closed form. The only overshoot past the
//! band is the distance travelled during the step in which a threshold is
//! crossed.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ThermalError {
    #[error("time step must be positive and finite, got {0}")]
    NonPositiveStep(f64),
    #[error("invalid freezer parameters: {0}")]
    InvalidParams(String),
    #[error("relative humidity {0} outside [0, 100]")]
    InvalidHumidity(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreezerParams {
    pub setpoint_c: f64,
    /// Half-width of the compressor on/off band.
    pub hysteresis_band_c: f64,
    pub ambient_c: f64,
    /// Passive warming rate when the air sits at the setpoint.
    pub warm_rate_c_per_h: f64,
    pub cool_rate_c_per_h: f64,
    pub door_open_delta_c_per_s: f64,
}

impl Default for FreezerParams {
    fn default() -> Self {
        Self {
            setpoint_c: -18.0,
            hysteresis_band_c: 1.5,
            ambient_c: 20.0,
            warm_rate_c_per_h: 2.0,
            cool_rate_c_per_h: 6.0,
            // 30 s open adds 0.045 °C.
            door_open_delta_c_per_s: 0.0015,
        }
    }
}

impl FreezerParams {
    pub fn validate(&self) -> Result<(), ThermalError> {
        let bad = |m: &str| Err(ThermalError::InvalidParams(m.to_string()));
        let all = [
            self.setpoint_c,
            self.hysteresis_band_c,
            self.ambient_c,
            self.warm_rate_c_per_h,
            self.cool_rate_c_per_h,
            self.door_open_delta_c_per_s,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite");
        }
        if self.hysteresis_band_c <= 0.0 {
            return bad("hysteresis_band_c must be > 0");
        }
        if self.setpoint_c >= 0.0 {
            return bad("setpoint_c must be below 0 °C");
        }
        if self.ambient_c < self.setpoint_c {
            return bad("ambient_c must not be below the setpoint");
        }
        if self.warm_rate_c_per_h < 0.0 || self.door_open_delta_c_per_s < 0.0 {
            return bad("warming rates must be non-negative");
        }
        if self.cool_rate_c_per_h <= self.warm_rate_c_per_h {
            return bad("cool_rate_c_per_h must exceed warm_rate_c_per_h");
        }
        Ok(())
    }

    /// Newtonian coefficient (1/h); zero when ambient equals the setpoint.
    fn leak_coefficient(&self) -> f64 {
        let span = self.ambient_c - self.setpoint_c;
        if span.abs() < f64::EPSILON {
            0.0
        } else {
            self.warm_rate_c_per_h / span
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreezerState {
    /// Simulation clock, hours.
    pub t_h: f64,
    pub air_temp_c: f64,
    pub rh_pct: f64,
    pub compressor_on: bool,
    pub door_open_until: Option<f64>,
}

impl FreezerState {
    pub fn new(t_h: f64, air_temp_c: f64, rh_pct: f64) -> Result<Self, ThermalError> {
        if !(0.0..=100.0).contains(&rh_pct) {
            return Err(ThermalError::InvalidHumidity(rh_pct));
        }
        Ok(Self {
            t_h,
            air_temp_c,
            rh_pct,
            compressor_on: false,
            door_open_until: None,
        })
    }

    /// Air at the setpoint, 15 % RH inside the sealed container.
    pub fn at_setpoint(params: &FreezerParams) -> Self {
        Self {
            t_h: 0.0,
            air_temp_c: params.setpoint_c,
            rh_pct: 15.0,
            compressor_on: false,
            door_open_until: None,
        }
    }

    pub fn door_open(&self) -> bool {
        self.door_open_until.is_some_and(|u| u > self.t_h)
    }

    /// `t_sim, air_temp_c, rh_pct, compressor_on, door_open`
    pub fn trace_row(&self) -> String {
        format!(
            "{:.6},{:.4},{:.2},{},{}",
            self.t_h,
            self.air_temp_c,
            self.rh_pct,
            u8::from(self.compressor_on),
            u8::from(self.door_open())
        )
    }
}

pub const THERMAL_TRACE_HEADER: &str = "t_sim,air_temp_c,rh_pct,compressor_on,door_open";

/// Closed-form solution of `dT/dt = rate - k (T - ambient)` over `h` hours.
fn integrate(temp: f64, ambient: f64, k: f64, rate: f64, h: f64) -> f64 {
    if h <= 0.0 {
        return temp;
    }
    if k == 0.0 {
        return temp + rate * h;
    }
    let eq = ambient + rate / k;
    eq + (temp - eq) * (-k * h).exp()
}

/// Advances the freezer by `dt` hours.
pub fn step(
    state: &FreezerState,
    params: &FreezerParams,
    dt: f64,
) -> Result<FreezerState, ThermalError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ThermalError::NonPositiveStep(dt));
    }
    let mut next = *state;
    if state.air_temp_c >= params.setpoint_c + params.hysteresis_band_c {
        next.compressor_on = true;
    } else if state.air_temp_c <= params.setpoint_c - params.hysteresis_band_c {
        next.compressor_on = false;
    }

    let k = params.leak_coefficient();
    let cooling = if next.compressor_on {
        -params.cool_rate_c_per_h
    } else {
        0.0
    };
    let open_h = match state.door_open_until {
        Some(until) if until > state.t_h => (until - state.t_h).min(dt),
        _ => 0.0,
    };
    let door_rate = params.door_open_delta_c_per_s * 3600.0;

    let mut temp = state.air_temp_c;
    temp = integrate(temp, params.ambient_c, k, cooling + door_rate, open_h);
    temp = integrate(temp, params.ambient_c, k, cooling, dt - open_h);

    next.air_temp_c = temp;
    next.t_h = state.t_h + dt;
    if next.door_open_until.is_some_and(|u| u <= next.t_h) {
        next.door_open_until = None;
    }
    Ok(next)
}

/// Steps in increments of at most `tick_h` until the clock reaches `target_h`.
pub fn advance_to(
    state: &FreezerState,
    params: &FreezerParams,
    target_h: f64,
    tick_h: f64,
) -> Result<FreezerState, ThermalError> {
    if !(tick_h > 0.0 && tick_h.is_finite()) {
        return Err(ThermalError::NonPositiveStep(tick_h));
    }
    let mut s = *state;
    while target_h - s.t_h > 1e-12 {
        let dt = tick_h.min(target_h - s.t_h);
        s = step(&s, params, dt)?;
    }
    Ok(s)
}

/// Opens the door at `now` for `duration_s` seconds. Overlapping openings
/// extend to the later of the two end times.
pub fn open_door(state: &FreezerState, now: f64, duration_s: f64) -> FreezerState {
    let mut next = *state;
    if duration_s <= 0.0 {
        return next;
    }
    let end = now + duration_s / 3600.0;
    next.door_open_until = Some(match state.door_open_until {
        Some(prev) => prev.max(end),
        None => end,
    });
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSpec {
    pub temp_range: (f64, f64),
    pub temp_accuracy_c: f64,
    pub temp_resolution_c: f64,
    pub rh_accuracy_pct: f64,
    pub rh_resolution_pct: f64,
    pub measure_current_ma: f64,
    pub standby_current_ua: f64,
    /// When false, readings are the quantized true values.
    pub noise: bool,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            temp_range: (-40.0, 80.0),
            temp_accuracy_c: 0.5,
            temp_resolution_c: 0.1,
            rh_accuracy_pct: 2.0,
            rh_resolution_pct: 0.1,
            measure_current_ma: 1.0,
            standby_current_ua: 40.0,
            noise: true,
        }
    }
}

impl SensorSpec {
    pub fn noiseless() -> Self {
        Self {
            noise: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        let bad = |m: &str| Err(ThermalError::InvalidParams(m.to_string()));
        if self.temp_range.0.partial_cmp(&self.temp_range.1) != Some(std::cmp::Ordering::Less) {
            return bad("sensor range low must be below high");
        }
        if !(self.temp_resolution_c > 0.0 && self.rh_resolution_pct > 0.0) {
            return bad("sensor resolution must be > 0");
        }
        if !(self.temp_accuracy_c >= 0.0 && self.rh_accuracy_pct >= 0.0) {
            return bad("sensor accuracy must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub t_sim: f64,
    pub temp_c: f64,
    pub rh_pct: f64,
}

/// Rounds to the nearest multiple of `resolution`, halves away from zero.
pub fn quantize(value: f64, resolution: f64) -> f64 {
    let inv = 1.0 / resolution;
    if (inv - inv.round()).abs() < 1e-9 {
        let inv = inv.round();
        (value * inv).round() / inv
    } else {
        (value / resolution).round() * resolution
    }
}

/// One sensor reading: true value plus uniform noise bounded by the accuracy,
/// quantized to the resolution, then clamped to the sensing range.
pub fn sample<R: Rng + ?Sized>(state: &FreezerState, spec: &SensorSpec, rng: &mut R) -> Reading {
    let (temp_noise, rh_noise) = if spec.noise {
        (
            uniform(rng, spec.temp_accuracy_c),
            uniform(rng, spec.rh_accuracy_pct),
        )
    } else {
        (0.0, 0.0)
    };
    let temp = quantize(state.air_temp_c + temp_noise, spec.temp_resolution_c)
        .clamp(spec.temp_range.0, spec.temp_range.1);
    let rh = quantize(state.rh_pct + rh_noise, spec.rh_resolution_pct).clamp(0.0, 100.0);
    Reading {
        t_sim: state.t_h,
        temp_c: temp,
        rh_pct: rh,
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, half_width: f64) -> f64 {
    if half_width > 0.0 {
        rng.gen_range(-half_width..=half_width)
    } else {
        0.0
    }
}
