//! Macroscopic metrics of a swarm snapshot and the phase-region classifier.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SwarmError};
use crate::model::{AgentState, ArenaSpec, ControlInput};

pub type Point = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// Below this centroid distance (m) circliness is reported as +inf.
    pub circliness_epsilon: f64,
    /// Below this effective turning rate (rad/s) an agent has no pivot.
    pub pivot_epsilon: f64,
    /// Clustering link distance (m). Defaults to the mean vision distance.
    pub link_distance: Option<f64>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            circliness_epsilon: 1e-9,
            pivot_epsilon: 1e-6,
            link_distance: None,
        }
    }
}

pub fn centroid(points: &[Point]) -> Result<Point> {
    if points.is_empty() {
        return Err(SwarmError::Argument("centroid of an empty set".into()));
    }
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.0, sy + p.1));
    Ok((sx / n, sy / n))
}

/// Spread of centroid distances relative to the closest agent:
/// `(max - min) / min`. Zero is a perfect ring.
pub fn circliness(points: &[Point], epsilon: f64) -> Result<f64> {
    if points.len() < 2 {
        return Err(SwarmError::Argument(format!(
            "circliness needs at least 2 agents, got {}",
            points.len()
        )));
    }
    let mu = centroid(points)?;
    let (lo, hi) = points
        .iter()
        .map(|p| ((p.0 - mu.0).powi(2) + (p.1 - mu.1).powi(2)).sqrt())
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
    if lo < epsilon {
        return Ok(f64::INFINITY);
    }
    Ok((hi - lo) / lo)
}

/// Center of the circle the agent traces if `input` is held constant.
///
/// Derived from the engine's own update rule rather than the continuous
/// limit: one tick moves the agent `s*dt` along its heading and then turns
/// it by `w*dt`, so successive positions are vertices of a regular polygon.
/// Its center lies half a step ahead and `(s*dt/2) * cot(w*dt/2)` to the
/// left, and stays put exactly. As `dt -> 0` this tends to `s/w` to the left.
/// Returns `None` for (near) straight-line motion.
pub fn pivot(state: &AgentState, input: ControlInput, dt: f64, epsilon: f64) -> Option<Point> {
    let w = input.turn_rate * state.turn_factor;
    if w.abs() < epsilon {
        return None;
    }
    let s = input.forward_speed * state.speed_factor;
    if s == 0.0 {
        return Some(state.position());
    }
    let half_turn = 0.5 * w * dt;
    let sin_half = half_turn.sin();
    if sin_half.abs() < 1e-12 {
        // whole turns per tick: the agent moves in a straight line
        return None;
    }
    let ahead = 0.5 * s * dt;
    let left = ahead * half_turn.cos() / sin_half;
    let (sin, cos) = state.heading.sin_cos();
    Some((state.x + ahead * cos - left * sin, state.y + ahead * sin + left * cos))
}

/// Minimum pairwise pivot distance over the vision distance `gamma`.
/// Agents without a pivot contribute their position.
pub fn diffusion_metric(agents: &[AgentState], gamma: f64, dt: f64, arena: &ArenaSpec, epsilon: f64) -> Result<f64> {
    if agents.len() < 2 {
        return Err(SwarmError::Argument(format!(
            "diffusion metric needs at least 2 agents, got {}",
            agents.len()
        )));
    }
    if !(gamma > 0.0) {
        return Err(SwarmError::Argument(format!("vision distance must be positive, got {gamma}")));
    }
    let pivots: Vec<Point> = agents
        .iter()
        .map(|a| pivot(a, a.last_input, dt, epsilon).unwrap_or(a.position()))
        .collect();
    Ok(min_pairwise(&pivots, arena) / gamma)
}

/// Smallest distance between any two points; +inf for fewer than two.
pub fn min_pairwise(points: &[Point], arena: &ArenaSpec) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let (dx, dy) = arena.displacement(*a, *b);
            best = best.min(dx * dx + dy * dy);
        }
    }
    best.sqrt()
}

/// Number of pairs closer than `radius`.
pub fn count_collisions(points: &[Point], radius: f64, arena: &ArenaSpec) -> u32 {
    let r2 = radius * radius;
    let mut n = 0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let (dx, dy) = arena.displacement(*a, *b);
            if dx * dx + dy * dy < r2 {
                n += 1;
            }
        }
    }
    n
}

/// Connected components of the graph linking points no farther apart than
/// `link_distance` (inclusive). Members are point indices; components are
/// ordered by their smallest member.
pub fn cluster_components(points: &[Point], link_distance: f64, arena: &ArenaSpec) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut label: Vec<usize> = vec![usize::MAX; n];
    let mut out: Vec<Vec<usize>> = Vec::new();
    let l2 = link_distance * link_distance;
    let mut stack = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let c = out.len();
        label[start] = c;
        let mut members = vec![start];
        stack.push(start);
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if label[j] == usize::MAX {
                    let (dx, dy) = arena.displacement(points[i], points[j]);
                    if dx * dx + dy * dy <= l2 {
                        label[j] = c;
                        members.push(j);
                        stack.push(j);
                    }
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Per-tick metric sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTrace {
    pub tick: u64,
    #[serde(with = "crate::serde_ext")]
    pub circliness: f64,
    #[serde(with = "crate::serde_ext")]
    pub diffusion: f64,
    #[serde(with = "crate::serde_ext")]
    pub min_pairwise_distance: f64,
    pub n_components: u32,
    /// Pairs closer than the body radius at this tick.
    pub collisions: u32,
}

/// Evaluates every metric on one snapshot. Single-agent worlds report
/// +inf circliness (the only agent sits on the centroid) and +inf diffusion.
pub fn measure(
    tick: u64,
    agents: &[AgentState],
    arena: &ArenaSpec,
    gamma: f64,
    dt: f64,
    body_radius: f64,
    cfg: &MetricConfig,
) -> MetricTrace {
    let points: Vec<Point> = agents.iter().map(AgentState::position).collect();
    let circ = circliness(&points, cfg.circliness_epsilon).unwrap_or(f64::INFINITY);
    let diffusion = diffusion_metric(agents, gamma, dt, arena, cfg.pivot_epsilon).unwrap_or(f64::INFINITY);
    let link = cfg.link_distance.unwrap_or(gamma);
    MetricTrace {
        tick,
        circliness: circ,
        diffusion,
        min_pairwise_distance: min_pairwise(&points, arena),
        n_components: cluster_components(&points, link, arena).len() as u32,
        collisions: count_collisions(&points, body_radius, arena),
    }
}

/// Phase regions, ordered from best to worst outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhaseLabel {
    Mill,
    Ellipsoidal,
    SeparatedGroups,
    CollidingClusters,
}

impl PhaseLabel {
    pub const ALL: [PhaseLabel; 4] = [
        PhaseLabel::Mill,
        PhaseLabel::Ellipsoidal,
        PhaseLabel::SeparatedGroups,
        PhaseLabel::CollidingClusters,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PhaseLabel::Mill => "Mill",
            PhaseLabel::Ellipsoidal => "Ellipsoidal",
            PhaseLabel::SeparatedGroups => "SeparatedGroups",
            PhaseLabel::CollidingClusters => "CollidingClusters",
        }
    }

    /// Legend color of the phase diagram.
    pub fn color(self) -> &'static str {
        match self {
            PhaseLabel::Mill => "green",
            PhaseLabel::Ellipsoidal => "yellow",
            PhaseLabel::CollidingClusters => "red",
            PhaseLabel::SeparatedGroups => "purple",
        }
    }
}

impl std::fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PhaseLabel {
    type Err = SwarmError;

    fn from_str(s: &str) -> Result<Self> {
        PhaseLabel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| SwarmError::Parse(format!("unknown phase label {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Fraction of the run, counted from the end, that is averaged.
    pub window_fraction: f64,
    /// Lower bound on the window length in ticks.
    pub min_window_ticks: usize,
    /// Mean circliness strictly below this is a mill.
    pub mill_threshold: f64,
    /// Mean circliness strictly below this (and not a mill) is ellipsoidal.
    pub ellipse_threshold: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            window_fraction: 0.2,
            min_window_ticks: 100,
            mill_threshold: 0.2,
            ellipse_threshold: 1.0,
        }
    }
}

impl ClassifierConfig {
    pub fn window_len(&self, n_ticks: usize) -> usize {
        ((self.window_fraction * n_ticks as f64).ceil() as usize).max(self.min_window_ticks)
    }
}

/// Summary of the trailing evaluation window of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub label: PhaseLabel,
    /// Time-averaged circliness over the window.
    #[serde(with = "crate::serde_ext")]
    pub mean_circliness: f64,
    /// Diffusion metric at the last tick.
    #[serde(with = "crate::serde_ext")]
    pub final_diffusion: f64,
    /// Smallest diffusion metric seen inside the window.
    #[serde(with = "crate::serde_ext")]
    pub min_diffusion: f64,
    pub collisions: u64,
    pub n_components: u32,
    pub window_ticks: usize,
}

/// Labels a run from its metric trace.
///
/// Mean circliness over the trailing window picks the band. Above the
/// ellipse threshold, collisions inside the window or a single connected
/// component at the last tick mean colliding clusters; otherwise the swarm
/// split into separated groups.
pub fn classify_trace(trace: &[MetricTrace], cfg: &ClassifierConfig) -> Result<WindowSummary> {
    let window = cfg.window_len(trace.len());
    if trace.is_empty() || trace.len() < window {
        return Err(SwarmError::Argument(format!(
            "record has {} ticks, the evaluation window needs {window}",
            trace.len()
        )));
    }
    summarize_window(&trace[trace.len() - window..], cfg)
}

/// Labels an already-cut evaluation window (see [`classify_trace`]).
pub fn summarize_window(tail: &[MetricTrace], cfg: &ClassifierConfig) -> Result<WindowSummary> {
    if tail.is_empty() {
        return Err(SwarmError::Argument("empty evaluation window".into()));
    }
    // running mean keeps a constant series exactly at its value
    let mean_circliness = tail.iter().enumerate().fold(0.0, |mean, (k, m)| {
        if m.circliness == mean {
            mean
        } else {
            mean + (m.circliness - mean) / (k + 1) as f64
        }
    });
    let collisions: u64 = tail.iter().map(|m| m.collisions as u64).sum();
    let last = tail[tail.len() - 1];
    let label = if mean_circliness < cfg.mill_threshold {
        PhaseLabel::Mill
    } else if mean_circliness < cfg.ellipse_threshold {
        PhaseLabel::Ellipsoidal
    } else if collisions > 0 || last.n_components <= 1 {
        PhaseLabel::CollidingClusters
    } else {
        PhaseLabel::SeparatedGroups
    };
    Ok(WindowSummary {
        label,
        mean_circliness,
        final_diffusion: last.diffusion,
        min_diffusion: tail.iter().map(|m| m.diffusion).fold(f64::INFINITY, f64::min),
        collisions,
        n_components: last.n_components,
        window_ticks: tail.len(),
    })
}
