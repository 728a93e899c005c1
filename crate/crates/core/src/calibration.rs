//! Actuation calibration from measured robot data.
//!
//! Measurements arrive as CSV with the header
//! `robot_id,u1,u2,speed_cm_s,turn_deg_s`, one row per trial. Commands are in
//! the robot's raw units (`u1` in [-100, 100], `u2` in [-2, 2]); measured
//! rates are in cm/s and deg/s.
//!
//! A trial with `u1 != 0` is a speed trial at the commanded level `(u1, u2)`;
//! a trial with `u2 != 0` is a turn trial at that level. For every level the
//! group average is the mean of the per-robot averages of the absolute
//! measured rate, and a robot's factor at that level is its own average over
//! the group average. A robot's factor is the mean over the levels it was
//! measured at.
//!
//! The resulting [`CalibrationProfile`] is JSON:
//!
//! ```text
//! {
//!   "version": 1,
//!   "dt_s": 0.022,
//!   "robots": {"r1": {"speed_factor": 1.003, "turn_factor": 1.0, "mean_speed_at_ref_cm_s": 28.17}},
//!   "population": {"speed_factor": {"mean": 1.0, "std": 0.05}, "turn_factor": {"mean": 1.0, "std": 0.0}},
//!   "sensor": {"vision_distance_m": {"mean": 1.1, "std": 0.0}, "vision_halfangle_rad": {"mean": 0.4276, "std": 0.0}},
//!   "speed_map": [{"u1": 50.0, "u2": 0.0, "rate": 18.39}],
//!   "turn_map": [],
//!   "measured_limits": {"max_speed": 0.2696, "max_turn_rate": 6.283}
//! }
//! ```
//!
//! `speed_map` rates are cm/s, `turn_map` rates deg/s, `measured_limits` SI.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SwarmError};
use crate::model::{default_vision_halfangle, ActuatorLimits, DEFAULT_DT, DEFAULT_VISION_DISTANCE};
use crate::world::{AgentParams, FactorTiming, IdiosyncrasySource, NormalParams, PopulationSpec, WorldConfig};

pub const PROFILE_VERSION: u32 = 1;
pub const U1_RANGE: f64 = 100.0;
pub const U2_RANGE: f64 = 2.0;
pub const CSV_COLUMNS: [&str; 5] = ["robot_id", "u1", "u2", "speed_cm_s", "turn_deg_s"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementTrial {
    pub robot_id: String,
    pub u1: f64,
    pub u2: f64,
    pub speed_cm_s: f64,
    pub turn_deg_s: f64,
}

impl MeasurementTrial {
    fn check(&self) -> std::result::Result<(), String> {
        if self.robot_id.trim().is_empty() {
            return Err("empty robot_id".into());
        }
        if !(self.u1.abs() <= U1_RANGE) {
            return Err(format!("u1 = {} outside [-{U1_RANGE}, {U1_RANGE}]", self.u1));
        }
        if !(self.u2.abs() <= U2_RANGE) {
            return Err(format!("u2 = {} outside [-{U2_RANGE}, {U2_RANGE}]", self.u2));
        }
        if !self.speed_cm_s.is_finite() || !self.turn_deg_s.is_finite() {
            return Err("measured values must be finite".into());
        }
        Ok(())
    }
}

/// Parses and validates measurement CSV, reporting every bad row by line.
pub fn parse_measurements<R: Read>(input: R) -> Result<Vec<MeasurementTrial>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| SwarmError::Parse(format!("header: {e}")))?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let missing: Vec<_> = CSV_COLUMNS
        .iter()
        .filter(|c| !headers.iter().any(|h| h == **c))
        .collect();
    if !missing.is_empty() {
        return Err(SwarmError::Parse(format!("missing columns: {missing:?}")));
    }
    let mut trials = Vec::new();
    let mut bad = Vec::new();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                bad.push(format!("line {line}: {e}"));
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        match rec.deserialize::<MeasurementTrial>(Some(&headers)) {
            Ok(t) => match t.check() {
                Ok(()) => trials.push(t),
                Err(msg) => bad.push(format!("line {line}: {msg}")),
            },
            Err(e) => bad.push(format!("line {line}: {e}")),
        }
    }
    if !bad.is_empty() {
        return Err(SwarmError::Parse(bad.join("; ")));
    }
    Ok(trials)
}

pub fn load_measurements(path: &Path) -> Result<Vec<MeasurementTrial>> {
    parse_measurements(std::fs::File::open(path)?)
}

/// Ratio of an individual's average rate to the group's.
pub fn actuation_factor(individual_avg: f64, group_avg: f64) -> Result<f64> {
    if !(group_avg > 0.0) || !individual_avg.is_finite() {
        return Err(SwarmError::Argument(format!(
            "group average must be positive, got {group_avg}"
        )));
    }
    Ok(individual_avg / group_avg)
}

/// Sample mean and unbiased sample standard deviation.
pub fn fit_population(factors: &[f64]) -> Result<NormalParams> {
    if factors.len() < 2 {
        return Err(SwarmError::Argument(format!(
            "need at least 2 values to fit a distribution, got {}",
            factors.len()
        )));
    }
    let n = factors.len() as f64;
    let mean = factors.iter().sum::<f64>() / n;
    let var = factors.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(NormalParams { mean, std: var.sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorStats {
    pub vision_distance_m: NormalParams,
    pub vision_halfangle_rad: NormalParams,
}

impl Default for SensorStats {
    fn default() -> Self {
        SensorStats {
            vision_distance_m: NormalParams::fixed(DEFAULT_VISION_DISTANCE),
            vision_halfangle_rad: NormalParams::fixed(default_vision_halfangle()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotCalibration {
    pub speed_factor: f64,
    pub turn_factor: f64,
    /// Average speed at the highest speed level the robot was measured at.
    pub mean_speed_at_ref_cm_s: Option<f64>,
    /// Factor at each commanded speed level, before averaging.
    #[serde(default)]
    pub speed_levels: Vec<LevelFactor>,
    #[serde(default)]
    pub turn_levels: Vec<LevelFactor>,
}

/// One robot's factor at one commanded level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelFactor {
    pub u1: f64,
    pub u2: f64,
    pub factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorPopulation {
    pub speed_factor: NormalParams,
    pub turn_factor: NormalParams,
}

/// Group-average response at one commanded level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelPoint {
    pub u1: f64,
    pub u2: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProfile {
    pub version: u32,
    pub dt_s: f64,
    pub robots: BTreeMap<String, RobotCalibration>,
    pub population: FactorPopulation,
    pub sensor: SensorStats,
    pub speed_map: Vec<LevelPoint>,
    pub turn_map: Vec<LevelPoint>,
    pub measured_limits: Option<ActuatorLimits>,
}

/// Level key with exact float identity; commands come from a fixed set of
/// set-points, so bitwise grouping is what an operator expects.
type Level = (u64, u64);

fn level(u1: f64, u2: f64) -> Level {
    // fold -0.0 into 0.0
    ((u1 + 0.0).to_bits(), (u2 + 0.0).to_bits())
}

struct LevelFit {
    /// robot -> its factor at each level it was measured at
    factors: BTreeMap<String, Vec<LevelFactor>>,
    map: Vec<LevelPoint>,
    /// robot -> (level magnitude, average) at its highest level
    reference: BTreeMap<String, (f64, f64)>,
}

fn fit_levels<'a>(trials: impl Iterator<Item = (&'a MeasurementTrial, f64)>) -> Result<LevelFit> {
    // level -> robot -> (sum, count)
    let mut acc: BTreeMap<Level, BTreeMap<&str, (f64, usize)>> = BTreeMap::new();
    for (t, rate) in trials {
        let e = acc.entry(level(t.u1, t.u2)).or_default().entry(&t.robot_id).or_insert((0.0, 0));
        e.0 += rate.abs();
        e.1 += 1;
    }
    let mut fit = LevelFit {
        factors: BTreeMap::new(),
        map: Vec::new(),
        reference: BTreeMap::new(),
    };
    for (&(b1, b2), robots) in &acc {
        let (u1, u2) = (f64::from_bits(b1), f64::from_bits(b2));
        let avgs: Vec<(&str, f64)> = robots.iter().map(|(r, (s, n))| (*r, s / *n as f64)).collect();
        let group = avgs.iter().map(|(_, a)| a).sum::<f64>() / avgs.len() as f64;
        fit.map.push(LevelPoint { u1, u2, rate: group });
        for (robot, avg) in avgs {
            let f = actuation_factor(avg, group)
                .map_err(|_| SwarmError::Argument(format!("level ({u1}, {u2}) has zero group average")))?;
            fit.factors
                .entry(robot.to_string())
                .or_default()
                .push(LevelFactor { u1, u2, factor: f });
            let mag = u1.abs().max(u2.abs());
            let r = fit.reference.entry(robot.to_string()).or_insert((mag, avg));
            if mag > r.0 {
                *r = (mag, avg);
            }
        }
    }
    Ok(fit)
}

fn mean_factor(v: &[LevelFactor]) -> f64 {
    v.iter().map(|l| l.factor).sum::<f64>() / v.len() as f64
}

fn population(factors: &[f64], what: &str, warnings: &mut Vec<String>) -> NormalParams {
    match factors.len() {
        0 => {
            warnings.push(format!("no {what} trials; {what} fixed at 1.0"));
            NormalParams::fixed(1.0)
        }
        1 => {
            warnings.push(format!("only one robot has {what} trials; {what} spread is 0"));
            NormalParams::fixed(factors[0])
        }
        _ => fit_population(factors).expect("two or more factors"),
    }
}

/// Builds a profile; returns it with any warnings raised along the way.
pub fn build_profile(trials: &[MeasurementTrial], sensor: Option<SensorStats>) -> Result<(CalibrationProfile, Vec<String>)> {
    let mut warnings = Vec::new();
    let speed = fit_levels(trials.iter().filter(|t| t.u1 != 0.0).map(|t| (t, t.speed_cm_s)))?;
    let turn = fit_levels(trials.iter().filter(|t| t.u2 != 0.0).map(|t| (t, t.turn_deg_s)))?;

    let mut ids: Vec<&str> = trials.iter().map(|t| t.robot_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut robots = BTreeMap::new();
    for id in ids {
        let s = speed.factors.get(id);
        let r = turn.factors.get(id);
        if s.is_none() && r.is_none() {
            warnings.push(format!("robot {id} has no usable trials; excluded"));
            continue;
        }
        if s.is_none() {
            warnings.push(format!("robot {id} has no speed trials; speed factor set to 1.0"));
        }
        robots.insert(
            id.to_string(),
            RobotCalibration {
                speed_factor: s.map_or(1.0, |v| mean_factor(v)),
                turn_factor: r.map_or(1.0, |v| mean_factor(v)),
                mean_speed_at_ref_cm_s: speed.reference.get(id).map(|r| r.1),
                speed_levels: s.cloned().unwrap_or_default(),
                turn_levels: r.cloned().unwrap_or_default(),
            },
        );
    }
    if robots.is_empty() {
        return Err(SwarmError::Argument("no robot has usable trials".into()));
    }
    let speed_factors: Vec<f64> = speed.factors.values().map(|v| mean_factor(v)).collect();
    let turn_factors: Vec<f64> = turn.factors.values().map(|v| mean_factor(v)).collect();
    let pop = FactorPopulation {
        speed_factor: population(&speed_factors, "speed_factor", &mut warnings),
        turn_factor: population(&turn_factors, "turn_factor", &mut warnings),
    };

    let max_speed = speed.map.iter().map(|p| p.rate).fold(0.0f64, f64::max) / 100.0;
    let max_turn = turn.map.iter().map(|p| p.rate).fold(0.0f64, f64::max).to_radians();
    let measured_limits = (max_speed > 0.0 || max_turn > 0.0).then(|| {
        let d = ActuatorLimits::default();
        ActuatorLimits {
            max_speed: if max_speed > 0.0 { max_speed } else { d.max_speed },
            max_turn_rate: if max_turn > 0.0 { max_turn } else { d.max_turn_rate },
        }
    });

    let profile = CalibrationProfile {
        version: PROFILE_VERSION,
        dt_s: DEFAULT_DT,
        robots,
        population: pop,
        sensor: sensor.unwrap_or_default(),
        speed_map: speed.map,
        turn_map: turn.map,
        measured_limits,
    };
    profile.validate()?;
    Ok((profile, warnings))
}

/// Piecewise-linear response through the origin, clamped past the last level.
fn interpolate(points: &[(f64, f64)], x: f64) -> Option<f64> {
    if points.is_empty() {
        return None;
    }
    let sign = x.signum();
    let x = x.abs();
    let mut prev = (0.0, 0.0);
    for &(px, py) in points {
        if x <= px {
            let t = if px > prev.0 { (x - prev.0) / (px - prev.0) } else { 1.0 };
            return Some(sign * (prev.1 + t * (py - prev.1)));
        }
        prev = (px, py);
    }
    Some(sign * prev.1)
}

fn curve(map: &[LevelPoint], pick: impl Fn(&LevelPoint) -> Option<f64>) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = map.iter().filter_map(|p| pick(p).map(|x| (x.abs(), p.rate))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    pts
}

impl CalibrationProfile {
    pub fn validate(&self) -> Result<()> {
        if self.version != PROFILE_VERSION {
            return Err(SwarmError::Schema(format!(
                "unsupported calibration profile version {} (expected {PROFILE_VERSION})",
                self.version
            )));
        }
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return Err(SwarmError::Config(format!("dt_s must be positive, got {}", self.dt_s)));
        }
        for (what, p) in [
            ("speed_factor", self.population.speed_factor),
            ("turn_factor", self.population.turn_factor),
            ("vision_distance_m", self.sensor.vision_distance_m),
            ("vision_halfangle_rad", self.sensor.vision_halfangle_rad),
        ] {
            if !(p.mean > 0.0 && p.mean.is_finite() && p.std >= 0.0 && p.std.is_finite()) {
                return Err(SwarmError::Config(format!(
                    "{what}: need mean > 0 and std >= 0, got N({}, {})",
                    p.mean, p.std
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: CalibrationProfile = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("profile serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Group-average forward speed (cm/s) for a straight-line command `u1`.
    pub fn speed_at(&self, u1: f64) -> Option<f64> {
        interpolate(&curve(&self.speed_map, |p| (p.u2 == 0.0).then_some(p.u1)), u1)
    }

    /// Group-average turn rate (deg/s) for an in-place command `u2`.
    pub fn turn_rate_at(&self, u2: f64) -> Option<f64> {
        interpolate(&curve(&self.turn_map, |p| (p.u1 == 0.0).then_some(p.u2)), u2)
    }

    pub fn population_spec(&self, factor_timing: FactorTiming) -> PopulationSpec {
        PopulationSpec {
            speed_factor: self.population.speed_factor,
            turn_factor: self.population.turn_factor,
            vision_distance: self.sensor.vision_distance_m,
            vision_halfangle: self.sensor.vision_halfangle_rad,
            factor_timing,
        }
    }

    /// Points `config` at this profile's distributions and sampling period,
    /// keeping its factor timing. Measured actuator limits are copied only
    /// when `apply_limits` is set.
    pub fn apply_to(&self, config: &mut WorldConfig, apply_limits: bool) {
        let timing = match &config.idiosyncrasy {
            IdiosyncrasySource::Population(p) => p.factor_timing,
            IdiosyncrasySource::Explicit { .. } => FactorTiming::default(),
        };
        config.idiosyncrasy = IdiosyncrasySource::Population(self.population_spec(timing));
        config.dt = self.dt_s;
        if apply_limits {
            if let Some(l) = self.measured_limits {
                config.actuator_limits = l;
            }
        }
    }
}

/// `n` per-agent draws from the profile's distributions.
pub fn sample_profile(profile: &CalibrationProfile, n: u32, seed: u64) -> Result<Vec<AgentParams>> {
    if n == 0 {
        return Err(SwarmError::Argument("n must be at least 1".into()));
    }
    profile.validate()?;
    let spec = profile.population_spec(FactorTiming::PerAgent);
    (0..n).map(|id| spec.sample_agent(seed, id)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const TABLE: &str = "robot_id,u1,u2,speed_cm_s,turn_deg_s
r1,50,0,18.45,0
r2,50,0,18.90,0
r3,50,0,17.82,0
r1,100,0,28.17,0
r2,100,0,25.66,0
r3,100,0,27.04,0
";

    fn only_level(u1: &str) -> Vec<MeasurementTrial> {
        parse_measurements(TABLE.as_bytes())
            .unwrap()
            .into_iter()
            .filter(|t| t.u1.to_string() == u1)
            .collect()
    }

    #[test]
    fn parses_rows() {
        let trials = parse_measurements(TABLE.as_bytes()).unwrap();
        assert_eq!(trials.len(), 6);
        assert_eq!(
            trials[0],
            MeasurementTrial {
                robot_id: "r1".into(),
                u1: 50.0,
                u2: 0.0,
                speed_cm_s: 18.45,
                turn_deg_s: 0.0
            }
        );
    }

    #[test]
    fn empty_input_is_empty() {
        assert!(parse_measurements(&b""[..]).unwrap().is_empty());
        assert!(parse_measurements(&b"robot_id,u1,u2,speed_cm_s,turn_deg_s\n"[..]).unwrap().is_empty());
    }

    #[test]
    fn reports_bad_rows_by_line() {
        let csv = "robot_id,u1,u2,speed_cm_s,turn_deg_s\nr1,150,0,18,0\nr2,50,0,abc,0\nr3,50,0,18,0\n";
        let err = parse_measurements(csv.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("u1 = 150"), "{err}");
        assert!(err.contains("line 3"), "{err}");
        assert!(!err.contains("line 4"), "{err}");
        let err = parse_measurements(&b"robot_id,u1,speed_cm_s\nr1,1,2\n"[..]).unwrap_err().to_string();
        assert!(err.contains("u2") && err.contains("turn_deg_s"), "{err}");
    }

    #[test]
    fn factor_examples() {
        let group = (18.45 + 18.90 + 17.82) / 3.0;
        assert_abs_diff_eq!(actuation_factor(18.90, group).unwrap(), 1.03, epsilon = 0.005);
        assert_abs_diff_eq!(actuation_factor(17.82, group).unwrap(), 0.97, epsilon = 0.005);
        assert_eq!(actuation_factor(3.7, 3.7).unwrap(), 1.0);
        assert!(actuation_factor(1.0, 0.0).is_err());
    }

    #[test]
    fn population_examples() {
        let p = fit_population(&[1.00, 1.03, 0.97]).unwrap();
        assert_abs_diff_eq!(p.mean, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.std, 0.03, epsilon = 1e-12);
        let p = fit_population(&[1.05, 0.95, 1.00]).unwrap();
        assert_abs_diff_eq!(p.std, 0.05, epsilon = 1e-12);
        assert_eq!(fit_population(&[2.0, 2.0, 2.0]).unwrap(), NormalParams { mean: 2.0, std: 0.0 });
        assert!(fit_population(&[1.0]).is_err());
    }

    #[test]
    fn table_levels_reproduce_printed_factors() {
        for (u1, expected) in [("50", [1.00, 1.03, 0.97]), ("100", [1.05, 0.95, 1.00])] {
            let (profile, _) = build_profile(&only_level(u1), None).unwrap();
            for (id, want) in ["r1", "r2", "r3"].iter().zip(expected) {
                let got = profile.robots[*id].speed_factor;
                assert!((got - want).abs() <= 0.005, "u1={u1} {id}: {got} vs {want}");
            }
            let sum: f64 = profile.robots.values().map(|r| r.speed_factor).sum();
            assert_abs_diff_eq!(sum / 3.0, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn full_table_keeps_per_level_factors() {
        let (profile, _) = build_profile(&parse_measurements(TABLE.as_bytes()).unwrap(), None).unwrap();
        for (u1, expected) in [(50.0, [1.00, 1.03, 0.97]), (100.0, [1.05, 0.95, 1.00])] {
            for (id, want) in ["r1", "r2", "r3"].iter().zip(expected) {
                let lf = profile.robots[*id].speed_levels.iter().find(|l| l.u1 == u1).unwrap();
                assert!((lf.factor - want).abs() <= 0.005, "u1={u1} {id}: {} vs {want}", lf.factor);
            }
        }
        let r1 = &profile.robots["r1"];
        assert_abs_diff_eq!(
            r1.speed_factor,
            (r1.speed_levels[0].factor + r1.speed_levels[1].factor) / 2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn single_robot_is_its_own_group() {
        let trials: Vec<_> = only_level("50").into_iter().take(1).collect();
        let (p, warnings) = build_profile(&trials, None).unwrap();
        assert_eq!(p.robots["r1"].speed_factor, 1.0);
        assert_eq!(p.population.speed_factor.std, 0.0);
        assert!(!warnings.is_empty());
    }

    #[test]
    fn missing_turn_trials_fall_back() {
        let (p, warnings) = build_profile(&only_level("100"), None).unwrap();
        assert_eq!(p.population.turn_factor, NormalParams::fixed(1.0));
        assert!(warnings.iter().any(|w| w.contains("turn_factor")));
        assert_eq!(p.sensor, SensorStats::default());
        assert_abs_diff_eq!(p.measured_limits.unwrap().max_speed, (28.17 + 25.66 + 27.04) / 300.0, epsilon = 1e-12);
    }

    #[test]
    fn turn_trials_mirror_speed() {
        let csv = "robot_id,u1,u2,speed_cm_s,turn_deg_s\na,0,1,0,90\nb,0,1,0,-110\na,0,-1,0,-95\nb,0,-1,0,105\n";
        let (p, _) = build_profile(&parse_measurements(csv.as_bytes()).unwrap(), None).unwrap();
        // level +1: group 100, a 0.9, b 1.1; level -1: group 100, a 0.95, b 1.05
        assert_abs_diff_eq!(p.robots["a"].turn_factor, 0.925, epsilon = 1e-12);
        assert_abs_diff_eq!(p.robots["b"].turn_factor, 1.075, epsilon = 1e-12);
        assert_eq!(p.robots["a"].speed_factor, 1.0);
    }

    #[test]
    fn interpolation_is_linear() {
        let (p, _) = build_profile(&parse_measurements(TABLE.as_bytes()).unwrap(), None).unwrap();
        let g50 = (18.45 + 18.90 + 17.82) / 3.0;
        let g100 = (28.17 + 25.66 + 27.04) / 3.0;
        assert_abs_diff_eq!(p.speed_at(50.0).unwrap(), g50, epsilon = 1e-12);
        assert_abs_diff_eq!(p.speed_at(75.0).unwrap(), 0.5 * (g50 + g100), epsilon = 1e-12);
        assert_abs_diff_eq!(p.speed_at(25.0).unwrap(), 0.5 * g50, epsilon = 1e-12);
        assert_abs_diff_eq!(p.speed_at(-75.0).unwrap(), -0.5 * (g50 + g100), epsilon = 1e-12);
        assert!(p.turn_rate_at(1.0).is_none());
    }

    #[test]
    fn profile_round_trip_is_byte_identical() {
        let (p, _) = build_profile(&parse_measurements(TABLE.as_bytes()).unwrap(), None).unwrap();
        let text = p.to_json();
        let back = CalibrationProfile::from_json(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_json(), text);
        let bad = text.replace("\"version\": 1", "\"version\": 9");
        assert!(CalibrationProfile::from_json(&bad).is_err());
    }

    #[test]
    fn sampling() {
        let (mut p, _) = build_profile(&only_level("50")[..1], None).unwrap();
        let a = sample_profile(&p, 5, 3).unwrap();
        assert!(a.iter().all(|x| x.speed_factor == 1.0 && x.turn_factor == 1.0));
        p.population.speed_factor = NormalParams { mean: 1.0, std: 0.04 };
        let draws = sample_profile(&p, 1000, 11).unwrap();
        assert_eq!(draws, sample_profile(&p, 1000, 11).unwrap());
        let m = draws.iter().map(|x| x.speed_factor).sum::<f64>() / 1000.0;
        assert!((m - 1.0).abs() <= 0.004, "{m}");
        p.population.speed_factor.mean = -1.0;
        assert!(matches!(sample_profile(&p, 3, 0), Err(SwarmError::Config(_))));
    }
}
