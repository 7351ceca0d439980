//! Rotary-wing propulsion power for steady flight along straight lines and
//! circular arcs, optimal-speed search, and per-hour energy of closed loops.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PlanError, Result};

pub const SECONDS_PER_HOUR: f64 = 3600.0;

/// Upper end of the optimal-speed search, m/s.
pub const MAX_SEARCH_SPEED: f64 = 60.0;
const COARSE_SPEED_STEP: f64 = 0.1;

pub const DEFAULT_PARAMS_TXT: &str = include_str!("../data/uav_params.txt");

/// Turn radius of a flight segment. Straight flight has no centripetal load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "Option<f64>", try_from = "Option<f64>")]
pub enum Turn {
    Straight,
    Radius(f64),
}

impl From<Turn> for Option<f64> {
    fn from(t: Turn) -> Self {
        match t {
            Turn::Straight => None,
            Turn::Radius(r) => Some(r),
        }
    }
}

impl TryFrom<Option<f64>> for Turn {
    type Error = String;

    fn try_from(v: Option<f64>) -> std::result::Result<Self, Self::Error> {
        match v {
            None => Ok(Turn::Straight),
            Some(r) if r > 0.0 && r.is_finite() => Ok(Turn::Radius(r)),
            Some(r) => Err(format!("turn radius must be positive, got {r}")),
        }
    }
}

impl Turn {
    fn check(self) -> Result<()> {
        match self {
            Turn::Radius(r) if !(r > 0.0) || !r.is_finite() => {
                Err(PlanError::domain(format!("turn radius must be positive, got {r}")))
            }
            _ => Ok(()),
        }
    }
}

/// Constants of the rotary-wing power model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Aircraft weight W, N.
    pub weight: f64,
    /// Rotor radius R, m.
    pub rotor_radius: f64,
    /// Blade angular velocity Omega, rad/s.
    pub blade_angular_velocity: f64,
    /// Incremental correction factor to induced power, k.
    pub induced_power_factor: f64,
    /// Profile drag coefficient, delta.
    pub profile_drag_coeff: f64,
    /// Air density rho, kg/m^3.
    pub air_density: f64,
    /// Rotor disc area A, m^2.
    pub rotor_disc_area: f64,
    /// Blade tip speed U_tip, m/s.
    pub tip_speed: f64,
    /// Fuselage drag ratio d_0.
    pub fuselage_drag_ratio: f64,
    /// Rotor solidity s.
    pub rotor_solidity: f64,
    /// Mean rotor induced velocity in hover v_0, m/s.
    pub hover_induced_velocity: f64,
    /// Blade profile power in hover P_b, W.
    pub blade_profile_power: f64,
    /// Induced power in hover P_ind, W.
    pub induced_power: f64,
    /// Gravitational acceleration g, m/s^2.
    pub gravity: f64,
    /// Propulsion power ceiling, W.
    pub max_power: f64,
}

impl Default for EnergyParams {
    /// The published rounded constants (P_b = 79.86 W, P_ind = 88.63 W).
    fn default() -> Self {
        Self::parse(DEFAULT_PARAMS_TXT.as_bytes()).expect("shipped parameter file is valid")
    }
}

impl EnergyParams {
    /// Derives disc area, induced velocity and hover powers from airframe
    /// primitives. `max_power` defaults to twice the hover power.
    #[allow(clippy::too_many_arguments)]
    pub fn from_primitives(
        weight: f64,
        rotor_radius: f64,
        blade_angular_velocity: f64,
        induced_power_factor: f64,
        profile_drag_coeff: f64,
        air_density: f64,
        tip_speed: f64,
        fuselage_drag_ratio: f64,
        rotor_solidity: f64,
        gravity: f64,
        max_power: Option<f64>,
    ) -> Result<Self> {
        let area = std::f64::consts::PI * rotor_radius * rotor_radius;
        let v0 = (weight / (2.0 * air_density * area)).sqrt();
        let pb = profile_drag_coeff / 8.0
            * air_density
            * rotor_solidity
            * area
            * blade_angular_velocity.powi(3)
            * rotor_radius.powi(3);
        let pind = (1.0 + induced_power_factor) * weight.powf(1.5) / (2.0 * air_density * area).sqrt();
        let p = Self {
            weight,
            rotor_radius,
            blade_angular_velocity,
            induced_power_factor,
            profile_drag_coeff,
            air_density,
            rotor_disc_area: area,
            tip_speed,
            fuselage_drag_ratio,
            rotor_solidity,
            hover_induced_velocity: v0,
            blade_profile_power: pb,
            induced_power: pind,
            gravity,
            max_power: max_power.unwrap_or(2.0 * (pb + pind)),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("weight", self.weight),
            ("rotor_radius", self.rotor_radius),
            ("blade_angular_velocity", self.blade_angular_velocity),
            ("induced_power_factor", self.induced_power_factor),
            ("profile_drag_coeff", self.profile_drag_coeff),
            ("air_density", self.air_density),
            ("rotor_disc_area", self.rotor_disc_area),
            ("tip_speed", self.tip_speed),
            ("fuselage_drag_ratio", self.fuselage_drag_ratio),
            ("rotor_solidity", self.rotor_solidity),
            ("hover_induced_velocity", self.hover_induced_velocity),
            ("blade_profile_power", self.blade_profile_power),
            ("induced_power", self.induced_power),
            ("gravity", self.gravity),
            ("max_power", self.max_power),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(PlanError::domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn hover_power(&self) -> f64 {
        self.blade_profile_power + self.induced_power
    }

    /// Parses `name = value` lines. `#` starts a comment. Every field is
    /// required except `max_power`, which defaults to twice the hover power.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut values: [Option<f64>; 15] = [None; 15];
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| PlanError::Parse(format!("line {}: expected `name = value`", lineno + 1)))?;
            let key = key.trim();
            let idx = param_index(key)
                .ok_or_else(|| PlanError::Parse(format!("line {}: unknown parameter `{key}`", lineno + 1)))?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|e| PlanError::Parse(format!("line {}: `{}`: {e}", lineno + 1, value.trim())))?;
            values[idx] = Some(v);
        }
        let get =
            |i: usize| values[i].ok_or_else(|| PlanError::Parse(format!("missing parameter `{}`", PARAM_KEYS[i].0)));
        let blade_profile_power = get(11)?;
        let induced_power = get(12)?;
        let p = Self {
            weight: get(0)?,
            rotor_radius: get(1)?,
            blade_angular_velocity: get(2)?,
            induced_power_factor: get(3)?,
            profile_drag_coeff: get(4)?,
            air_density: get(5)?,
            rotor_disc_area: get(6)?,
            tip_speed: get(7)?,
            fuselage_drag_ratio: get(8)?,
            rotor_solidity: get(9)?,
            hover_induced_velocity: get(10)?,
            blade_profile_power,
            induced_power,
            gravity: get(13)?,
            max_power: values[14].unwrap_or(2.0 * (blade_profile_power + induced_power)),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::parse(std::io::BufReader::new(f))
    }

    pub fn to_param_string(&self) -> String {
        let vals = [
            self.weight,
            self.rotor_radius,
            self.blade_angular_velocity,
            self.induced_power_factor,
            self.profile_drag_coeff,
            self.air_density,
            self.rotor_disc_area,
            self.tip_speed,
            self.fuselage_drag_ratio,
            self.rotor_solidity,
            self.hover_induced_velocity,
            self.blade_profile_power,
            self.induced_power,
            self.gravity,
            self.max_power,
        ];
        PARAM_KEYS
            .iter()
            .zip(vals)
            .map(|((name, _), v)| format!("{name} = {v}\n"))
            .collect()
    }
}

// (name, symbol alias), in field order.
const PARAM_KEYS: [(&str, &str); 15] = [
    ("weight", "W"),
    ("rotor_radius", "R"),
    ("blade_angular_velocity", "Omega"),
    ("induced_power_factor", "k"),
    ("profile_drag_coeff", "delta"),
    ("air_density", "rho"),
    ("rotor_disc_area", "A"),
    ("tip_speed", "U_tip"),
    ("fuselage_drag_ratio", "d_0"),
    ("rotor_solidity", "s"),
    ("hover_induced_velocity", "v_0"),
    ("blade_profile_power", "P_b"),
    ("induced_power", "P_ind"),
    ("gravity", "g"),
    ("max_power", "P_max"),
];

fn param_index(key: &str) -> Option<usize> {
    PARAM_KEYS.iter().position(|(name, sym)| *name == key || *sym == key)
}

/// The three additive terms of the steady-flight power model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBreakdown {
    pub blade_profile: f64,
    pub induced: f64,
    pub parasite: f64,
}

impl PowerBreakdown {
    pub fn total(&self) -> f64 {
        self.blade_profile + self.induced + self.parasite
    }
}

/// Power terms for speed `speed` and centripetal acceleration `accel`
/// (`V^2 / r` for a circular turn).
pub(crate) fn power_terms(p: &EnergyParams, speed: f64, accel: f64) -> PowerBreakdown {
    let v2 = speed * speed;
    let v4 = v2 * v2;
    let v0 = p.hover_induced_velocity;
    let load = 1.0 + accel * accel / (p.gravity * p.gravity);
    let inner = (load + v4 / (4.0 * v0.powi(4))).sqrt() - v2 / (2.0 * v0 * v0);
    PowerBreakdown {
        blade_profile: p.blade_profile_power * (1.0 + 3.0 * v2 / (p.tip_speed * p.tip_speed)),
        induced: p.induced_power * load.sqrt() * inner.max(0.0).sqrt(),
        parasite: 0.5 * p.fuselage_drag_ratio * p.air_density * p.rotor_solidity * p.rotor_disc_area * v2 * speed,
    }
}

pub fn circular_power_breakdown(params: &EnergyParams, speed: f64, turn: Turn) -> Result<PowerBreakdown> {
    if !(speed >= 0.0) || !speed.is_finite() {
        return Err(PlanError::domain(format!("speed must be non-negative, got {speed}")));
    }
    turn.check()?;
    let accel = match turn {
        Turn::Straight => 0.0,
        Turn::Radius(r) => speed * speed / r,
    };
    Ok(power_terms(params, speed, accel))
}

/// Steady propulsion power, W, at `speed` on a turn of the given radius.
pub fn circular_power(params: &EnergyParams, speed: f64, turn: Turn) -> Result<f64> {
    circular_power_breakdown(params, speed, turn).map(|b| b.total())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedPoint {
    pub speed: f64,
    pub turn: Turn,
    pub power: f64,
}

/// Speed in `[0, MAX_SEARCH_SPEED]` minimising power for the given turn.
///
/// A 0.1 m/s scan brackets the minimum, then golden-section search refines
/// it inside the bracket.
pub fn optimal_speed(params: &EnergyParams, turn: Turn) -> Result<SpeedPoint> {
    turn.check()?;
    let f = |v: f64| circular_power(params, v, turn).expect("validated turn");
    let steps = (MAX_SEARCH_SPEED / COARSE_SPEED_STEP).round() as usize;
    let mut best = (0usize, f(0.0));
    for k in 1..=steps {
        let pk = f(k as f64 * COARSE_SPEED_STEP);
        if pk < best.1 {
            best = (k, pk);
        }
    }
    let lo = best.0.saturating_sub(1) as f64 * COARSE_SPEED_STEP;
    let hi = ((best.0 + 1).min(steps)) as f64 * COARSE_SPEED_STEP;
    let (speed, power) = golden_section_min(f, lo, hi, 1e-9);
    let (speed, power) = if power <= best.1 {
        (speed, power)
    } else {
        (best.0 as f64 * COARSE_SPEED_STEP, best.1)
    };
    Ok(SpeedPoint { speed, turn, power })
}

fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub length: f64,
    pub turn: Turn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopEnergy {
    /// Energy for one hour of continuous laps, J.
    pub energy: f64,
    pub lap_time: f64,
    pub mean_power: f64,
    /// Operating point of each segment, in input order.
    pub speeds: Vec<SpeedPoint>,
}

/// Per-hour energy of a closed loop with every segment flown at the optimal
/// speed for its turn radius. Speed changes between segments are treated as
/// instantaneous, so no kinetic-energy term is added.
pub fn loop_energy_per_hour(params: &EnergyParams, segments: &[Segment]) -> Result<LoopEnergy> {
    if segments.is_empty() {
        return Err(PlanError::domain("loop has no segments"));
    }
    let mut lap_time = 0.0;
    let mut work = 0.0;
    let mut speeds = Vec::with_capacity(segments.len());
    for seg in segments {
        if !(seg.length > 0.0) || !seg.length.is_finite() {
            return Err(PlanError::domain(format!(
                "segment length must be positive, got {}",
                seg.length
            )));
        }
        let sp = optimal_speed(params, seg.turn)?;
        if !(sp.speed > 0.0) {
            return Err(PlanError::domain("optimal speed is zero; loop cannot be flown"));
        }
        let t = seg.length / sp.speed;
        lap_time += t;
        work += sp.power * t;
        speeds.push(sp);
    }
    let mean_power = work / lap_time;
    Ok(LoopEnergy {
        energy: mean_power * SECONDS_PER_HOUR,
        lap_time,
        mean_power,
        speeds,
    })
}

pub fn hover_energy_per_hour(params: &EnergyParams) -> f64 {
    circular_power(params, 0.0, Turn::Straight).expect("zero speed is valid") * SECONDS_PER_HOUR
}
