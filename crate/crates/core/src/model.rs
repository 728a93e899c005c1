//! Agent kinematics and the reactive controllers.
//!
//! Agents are unicycles: a forward speed along the heading and a turning
//! rate, each scaled by a per-agent actuation factor. Headings follow the
//! mathematical convention (counterclockwise from +x), so motion is
//! `(cos heading, sin heading)`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SwarmError};

/// Robot body length is 19 cm; collisions are counted below half of it.
pub const DEFAULT_BODY_RADIUS: f64 = 0.0975;
/// Measured control loop period of the physical robots.
pub const DEFAULT_DT: f64 = 0.022;
/// Measured mean detection range.
pub const DEFAULT_VISION_DISTANCE: f64 = 1.10;
/// Measured full field-of-view opening, in degrees.
pub const DEFAULT_FOV_DEG: f64 = 49.0;

pub fn default_vision_halfangle() -> f64 {
    (DEFAULT_FOV_DEG / 2.0).to_radians()
}

/// Wraps an angle into `[0, 2π)`.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    // one-period fast path; both subtractions are exact, matching rem_euclid
    if (0.0..TAU).contains(&a) {
        return a;
    }
    if (TAU..2.0 * TAU).contains(&a) {
        return a - TAU;
    }
    let r = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Wraps an angle into `(-π, π]`.
#[inline]
pub fn wrap_signed(a: f64) -> f64 {
    let r = wrap_angle(a);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Milling,
    Diffusing,
    SelfCentering,
}

impl ControllerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Milling => "milling",
            ControllerKind::Diffusing => "diffusing",
            ControllerKind::SelfCentering => "self_centering",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            ControllerKind::Milling => 0,
            ControllerKind::Diffusing => 1,
            ControllerKind::SelfCentering => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ControllerKind::Milling),
            1 => Some(ControllerKind::Diffusing),
            2 => Some(ControllerKind::SelfCentering),
            _ => None,
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = SwarmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "milling" => Ok(ControllerKind::Milling),
            "diffusing" => Ok(ControllerKind::Diffusing),
            "self_centering" | "selfcentering" => Ok(ControllerKind::SelfCentering),
            other => Err(SwarmError::Argument(format!("unknown controller {other:?}"))),
        }
    }
}

/// A controller law together with its speed and turning-rate magnitudes.
/// Signs come from the law, so both magnitudes are strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerMode {
    pub kind: ControllerKind,
    /// Forward speed magnitude, m/s.
    pub v: f64,
    /// Turning-rate magnitude, rad/s.
    pub omega: f64,
}

impl ControllerMode {
    pub fn new(kind: ControllerKind, v: f64, omega: f64) -> Result<Self> {
        let mode = ControllerMode { kind, v, omega };
        mode.validate()?;
        Ok(mode)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v.is_finite() && self.v > 0.0 && self.omega.is_finite() && self.omega > 0.0) {
            return Err(SwarmError::Config(format!(
                "controller magnitudes must be finite and positive (v={}, omega={})",
                self.v, self.omega
            )));
        }
        Ok(())
    }
}

/// Commanded forward speed (m/s) and turning rate (rad/s), both signed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub forward_speed: f64,
    pub turn_rate: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput {
        forward_speed: 0.0,
        turn_rate: 0.0,
    };

    pub fn new(forward_speed: f64, turn_rate: f64) -> Self {
        ControlInput {
            forward_speed,
            turn_rate,
        }
    }

    /// Saturates both channels at the actuator caps.
    pub fn saturate(self, limits: &ActuatorLimits) -> Self {
        ControlInput {
            forward_speed: self.forward_speed.clamp(-limits.max_speed, limits.max_speed),
            turn_rate: self.turn_rate.clamp(-limits.max_turn_rate, limits.max_turn_rate),
        }
    }
}

/// Maps a binary sensor reading to a control input.
pub fn apply_controller(mode: &ControllerMode, detected: bool) -> ControlInput {
    let (v, w) = (mode.v, mode.omega);
    match (mode.kind, detected) {
        (ControllerKind::Milling, true) => ControlInput::new(v, w),
        (ControllerKind::Milling, false) => ControlInput::new(v, -w),
        (ControllerKind::Diffusing, true) => ControlInput::new(-v, 0.0),
        (ControllerKind::Diffusing, false) => ControlInput::new(0.0, w),
        (ControllerKind::SelfCentering, true) => ControlInput::new(v, w),
        (ControllerKind::SelfCentering, false) => ControlInput::new(0.0, -3.0 * w),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorLimits {
    /// m/s
    pub max_speed: f64,
    /// rad/s
    pub max_turn_rate: f64,
}

impl Default for ActuatorLimits {
    fn default() -> Self {
        ActuatorLimits {
            max_speed: 1.0,
            max_turn_rate: TAU,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArenaSpec {
    #[default]
    Unbounded,
    /// Axis-aligned box `[0, width] x [0, height]`; positions are clamped.
    BoundedClamp { width: f64, height: f64 },
    /// Periodic box `[0, width) x [0, height)`.
    Torus { width: f64, height: f64 },
}

impl ArenaSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ArenaSpec::Unbounded => Ok(()),
            ArenaSpec::BoundedClamp { width, height } | ArenaSpec::Torus { width, height } => {
                if width.is_finite() && height.is_finite() && width > 0.0 && height > 0.0 {
                    Ok(())
                } else {
                    Err(SwarmError::Config(format!(
                        "arena dimensions must be positive, got {width} x {height}"
                    )))
                }
            }
        }
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            ArenaSpec::Unbounded => (x, y),
            ArenaSpec::BoundedClamp { width, height } => (x.clamp(0.0, width), y.clamp(0.0, height)),
            ArenaSpec::Torus { width, height } => (wrap_len(x, width), wrap_len(y, height)),
        }
    }

    /// Displacement from `a` to `b`, using the minimum image on a torus.
    #[inline]
    pub fn displacement(&self, a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
        let (mut dx, mut dy) = (b.0 - a.0, b.1 - a.1);
        if let ArenaSpec::Torus { width, height } = *self {
            dx -= width * (dx / width).round();
            dy -= height * (dy / height).round();
        }
        (dx, dy)
    }
}

#[inline]
fn wrap_len(v: f64, len: f64) -> f64 {
    let r = v.rem_euclid(len);
    if r >= len {
        0.0
    } else {
        r
    }
}

/// State of one agent. Pose plus the per-agent constants it was born with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    /// Radians in `[0, 2π)`.
    pub heading: f64,
    pub speed_factor: f64,
    pub turn_factor: f64,
    /// Sensing range, m.
    pub vision_distance: f64,
    /// Half of the field-of-view opening, rad.
    pub vision_halfangle: f64,
    pub controller: ControllerMode,
    pub last_sensor: bool,
    /// Input applied on the most recent tick.
    #[serde(default)]
    pub last_input: ControlInput,
}

impl AgentState {
    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.x,
            self.y,
            self.heading,
            self.speed_factor,
            self.turn_factor,
            self.vision_distance,
            self.vision_halfangle,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(SwarmError::ModelIntegrity(format!("agent {} has non-finite state", self.id)));
        }
        if self.speed_factor <= 0.0 || self.turn_factor <= 0.0 {
            return Err(SwarmError::ModelIntegrity(format!(
                "agent {} actuation factors must be positive",
                self.id
            )));
        }
        if self.vision_distance < 0.0 || !(self.vision_halfangle > 0.0 && self.vision_halfangle <= PI) {
            return Err(SwarmError::ModelIntegrity(format!(
                "agent {} sensor cone out of range (distance {}, half-angle {})",
                self.id, self.vision_distance, self.vision_halfangle
            )));
        }
        self.controller.validate()
    }
}

/// Multiplicative actuation noise for one tick. `ONE` is the noise-free case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuationDraws {
    pub speed: f64,
    pub turn: f64,
}

impl ActuationDraws {
    pub const ONE: ActuationDraws = ActuationDraws { speed: 1.0, turn: 1.0 };
}

/// Advances one agent by one explicit Euler step, then applies the arena rule.
pub fn step_agent(
    state: &AgentState,
    input: ControlInput,
    dt: f64,
    draws: ActuationDraws,
    arena: &ArenaSpec,
) -> Result<AgentState> {
    step_agent_with_trig(state, input, dt, draws, arena, state.heading.sin_cos())
}

/// [`step_agent`] with `heading.sin_cos()` supplied by the caller.
pub fn step_agent_with_trig(
    state: &AgentState,
    input: ControlInput,
    dt: f64,
    draws: ActuationDraws,
    arena: &ArenaSpec,
    (sin, cos): (f64, f64),
) -> Result<AgentState> {
    if !(input.forward_speed.is_finite() && input.turn_rate.is_finite()) {
        return Err(SwarmError::ModelIntegrity(format!(
            "agent {} received non-finite input {input:?}",
            state.id
        )));
    }
    if !(state.x.is_finite() && state.y.is_finite() && state.heading.is_finite()) {
        return Err(SwarmError::ModelIntegrity(format!("agent {} has non-finite pose", state.id)));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SwarmError::ModelIntegrity(format!("timestep must be positive, got {dt}")));
    }

    let speed = input.forward_speed * state.speed_factor * draws.speed;
    let turn = input.turn_rate * state.turn_factor * draws.turn;
    let (x, y) = arena.apply(state.x + speed * cos * dt, state.y + speed * sin * dt);

    let mut next = state.clone();
    next.x = x;
    next.y = y;
    next.heading = wrap_angle(state.heading + turn * dt);
    next.last_input = input;
    if !(next.x.is_finite() && next.y.is_finite()) {
        return Err(SwarmError::ModelIntegrity(format!("agent {} left the finite plane", state.id)));
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    pub(crate) fn agent(x: f64, y: f64, heading: f64, speed_factor: f64, turn_factor: f64) -> AgentState {
        AgentState {
            id: 0,
            x,
            y,
            heading,
            speed_factor,
            turn_factor,
            vision_distance: DEFAULT_VISION_DISTANCE,
            vision_halfangle: default_vision_halfangle(),
            controller: ControllerMode::new(ControllerKind::Milling, 0.25, 1.0).unwrap(),
            last_sensor: false,
            last_input: ControlInput::ZERO,
        }
    }

    fn step(s: &AgentState, u: (f64, f64), dt: f64) -> AgentState {
        step_agent(s, ControlInput::new(u.0, u.1), dt, ActuationDraws::ONE, &ArenaSpec::Unbounded).unwrap()
    }

    #[test]
    fn forward_motion() {
        let next = step(&agent(0.0, 0.0, 0.0, 1.0, 1.0), (1.0, 0.0), 1.0);
        assert_eq!((next.x, next.y, next.heading), (1.0, 0.0, 0.0));
    }

    #[test]
    fn heading_convention() {
        let next = step(&agent(0.0, 0.0, PI / 2.0, 1.0, 1.0), (1.0, 0.0), 1.0);
        assert_abs_diff_eq!(next.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(next.y, 1.0, epsilon = 1e-15);
        assert_eq!(next.heading, PI / 2.0);
    }

    #[test]
    fn turn_scaled_by_factor() {
        let next = step(&agent(0.0, 0.0, 0.0, 1.0, 2.0), (0.0, 0.5), 0.022);
        assert_abs_diff_eq!(next.heading, 0.022, epsilon = 1e-15);
    }

    #[test]
    fn heading_wraps_negative() {
        let next = step(&agent(0.0, 0.0, 0.0, 1.0, 1.0), (0.0, -1.0), 0.1);
        assert_abs_diff_eq!(next.heading, TAU - 0.1, epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let s = agent(0.0, 0.0, 0.0, 1.0, 1.0);
        let err = step_agent(&s, ControlInput::new(f64::NAN, 0.0), 0.1, ActuationDraws::ONE, &ArenaSpec::Unbounded);
        assert!(matches!(err, Err(SwarmError::ModelIntegrity(_))));
        let bad = agent(f64::INFINITY, 0.0, 0.0, 1.0, 1.0);
        let err = step_agent(&bad, ControlInput::ZERO, 0.1, ActuationDraws::ONE, &ArenaSpec::Unbounded);
        assert!(err.is_err());
    }

    #[test]
    fn controller_table() {
        let m = |k| ControllerMode::new(k, 0.3, 2.0).unwrap();
        let mill = m(ControllerKind::Milling);
        assert_eq!(apply_controller(&mill, true), ControlInput::new(0.3, 2.0));
        assert_eq!(apply_controller(&mill, false), ControlInput::new(0.3, -2.0));
        let diff = m(ControllerKind::Diffusing);
        assert_eq!(apply_controller(&diff, true), ControlInput::new(-0.3, 0.0));
        assert_eq!(apply_controller(&diff, false), ControlInput::new(0.0, 2.0));
        let sc = m(ControllerKind::SelfCentering);
        assert_eq!(apply_controller(&sc, true), ControlInput::new(0.3, 2.0));
        assert_eq!(apply_controller(&sc, false), ControlInput::new(0.0, -6.0));
    }

    #[test]
    fn controller_magnitudes_must_be_positive() {
        assert!(ControllerMode::new(ControllerKind::Milling, 0.0, 1.0).is_err());
        assert!(ControllerMode::new(ControllerKind::Milling, 1.0, -1.0).is_err());
    }

    #[test]
    fn arena_rules() {
        let clamp = ArenaSpec::BoundedClamp { width: 2.0, height: 1.0 };
        assert_eq!(clamp.apply(-1.0, 3.0), (0.0, 1.0));
        let torus = ArenaSpec::Torus { width: 2.0, height: 1.0 };
        let (x, y) = torus.apply(-0.5, 2.25);
        assert_abs_diff_eq!(x, 1.5);
        assert_abs_diff_eq!(y, 0.25);
        let (dx, dy) = torus.displacement((0.1, 0.1), (1.9, 0.9));
        assert_abs_diff_eq!(dx, -0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(dy, -0.2, epsilon = 1e-12);
        assert!(ArenaSpec::Torus { width: 0.0, height: 1.0 }.validate().is_err());
    }

    proptest! {
        #[test]
        fn zero_input_is_fixed_point(x in -1e3..1e3f64, y in -1e3..1e3f64, h in 0.0..TAU, dt in 1e-4..1.0f64) {
            let s = agent(x, y, h, 1.1, 0.9);
            let next = step(&s, (0.0, 0.0), dt);
            prop_assert_eq!((next.x, next.y, next.heading), (s.x, s.y, s.heading));
        }

        #[test]
        fn heading_stays_wrapped(h in -100.0..100.0f64, w in -50.0..50.0f64, dt in 1e-4..1.0f64) {
            let s = agent(0.0, 0.0, wrap_angle(h), 1.0, 1.3);
            let next = step(&s, (0.2, w), dt);
            prop_assert!(next.heading >= 0.0 && next.heading < TAU);
        }
    }
}
