//! Reference scenarios: the published robot experiments as world
//! configurations, and the measurement each one is judged by.

use crate::config::DEFAULT_TICKS;
use crate::error::{Result, SwarmError};
use crate::metrics::{centroid, ClassifierConfig};
use crate::model::{ControllerKind, ControllerMode};
use crate::world::{FactorTiming, IdiosyncrasySource, NoiseSpec, NormalParams, PopulationSpec, World, WorldConfig};

/// Spread of the actuation factors, from the calibration measurements.
pub const FACTOR_STD: f64 = 0.04;

pub const MILLING_N: u32 = 6;
pub const MILLING_V: f64 = 0.25;
pub const MILLING_OMEGA_DEG: f64 = 45.0;

pub const DIFFUSION_N: u32 = 8;
pub const DIFFUSION_V: f64 = 0.3;
pub const DIFFUSION_OMEGA_DEG: f64 = 150.0;

pub const BULLSEYE_N: u32 = 7;
pub const BULLSEYE_NOISE: NoiseSpec = NoiseSpec {
    actuation_std: 0.05,
    false_negative_rate: 0.1,
    false_positive_rate: 0.0,
};

/// Actuation factors N(1, 0.04^2) redrawn every tick; sensors at the
/// measured means.
pub fn robot_population() -> PopulationSpec {
    PopulationSpec {
        speed_factor: NormalParams { mean: 1.0, std: FACTOR_STD },
        turn_factor: NormalParams { mean: 1.0, std: FACTOR_STD },
        factor_timing: FactorTiming::PerTick,
        ..PopulationSpec::default()
    }
}

fn base(n: u32, kind: ControllerKind, v: f64, omega_deg: f64, seed: u64) -> WorldConfig {
    let mode = ControllerMode::new(kind, v, omega_deg.to_radians()).expect("reference parameters are valid");
    let mut cfg = WorldConfig::new(n, mode);
    cfg.seed = seed;
    cfg.idiosyncrasy = IdiosyncrasySource::Population(robot_population());
    cfg
}

/// Six milling agents, v = 0.25 m/s, omega = 45 deg/s.
pub fn milling(seed: u64) -> WorldConfig {
    base(MILLING_N, ControllerKind::Milling, MILLING_V, MILLING_OMEGA_DEG, seed)
}

/// Eight diffusing agents, v = 0.3 m/s, omega = 150 deg/s.
pub fn diffusion(seed: u64) -> WorldConfig {
    base(DIFFUSION_N, ControllerKind::Diffusing, DIFFUSION_V, DIFFUSION_OMEGA_DEG, seed)
}

/// Seven agents at the milling parameters with sensor and actuation noise;
/// agent 0 runs the self-centering law.
pub fn bullseye(seed: u64) -> WorldConfig {
    let mut cfg = base(BULLSEYE_N, ControllerKind::Milling, MILLING_V, MILLING_OMEGA_DEG, seed);
    cfg.noise = BULLSEYE_NOISE;
    let center = ControllerMode {
        kind: ControllerKind::SelfCentering,
        ..cfg.controllers.default
    };
    cfg.controllers.overrides.insert(0, center);
    cfg
}

/// Ticks in 120 simulated seconds at the default tick.
pub const SCENARIO_TICKS: u64 = DEFAULT_TICKS;

/// Trailing-window mean centroid distance of agent `id`, over the mean of
/// the other agents' trailing-window mean distances.
pub fn centering_ratio(world: &mut World, id: u32, ticks: u64, classifier: &ClassifierConfig) -> Result<f64> {
    let n = world.agents().len();
    if n < 2 {
        return Err(SwarmError::Argument("centering needs at least 2 agents".into()));
    }
    let idx = world
        .agents()
        .iter()
        .position(|a| a.id == id)
        .ok_or(SwarmError::UnknownAgent(id))?;
    let len = ticks as usize + 1;
    let window = classifier.window_len(len);
    if window > len {
        return Err(SwarmError::Argument(format!("{ticks} ticks is shorter than the evaluation window")));
    }
    let first = len - window;
    let (mut me, mut others) = (0.0, 0.0);
    let mut sample = |w: &World| -> Result<()> {
        let pts: Vec<(f64, f64)> = w.agents().iter().map(|a| a.position()).collect();
        let c = centroid(&pts)?;
        for (k, p) in pts.iter().enumerate() {
            let d = ((p.0 - c.0).powi(2) + (p.1 - c.1).powi(2)).sqrt();
            if k == idx {
                me += d;
            } else {
                others += d / (n - 1) as f64;
            }
        }
        Ok(())
    };
    if first == 0 {
        sample(world)?;
    }
    for k in 1..len {
        world.step()?;
        if k >= first {
            sample(world)?;
        }
    }
    if others == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(me / others)
}
