//! Binary cone sensing.
//!
//! Agent `i` reads 1 when any other agent's center lies within its range and
//! within its half-angle of its heading. Two backends produce identical
//! readings: an all-pairs scan, and a uniform grid with cells no smaller than
//! the largest sensing range so only the 3x3 block around an agent is probed.

use serde::{Deserialize, Serialize};

use crate::model::{AgentState, ArenaSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingBackend {
    #[default]
    Grid,
    BruteForce,
}

/// Below this many agents the all-pairs scan beats building a grid.
pub const GRID_MIN_AGENTS: usize = 48;

/// An observer's sensing cone, with the trigonometry done once.
#[derive(Debug, Clone, Copy)]
pub struct Cone {
    x: f64,
    y: f64,
    cos_h: f64,
    sin_h: f64,
    range2: f64,
    cos_half: f64,
}

impl Cone {
    pub fn of(observer: &AgentState) -> Cone {
        Cone::with_trig(observer, observer.heading.sin_cos())
    }

    /// Same as [`Cone::of`] with `heading.sin_cos()` already computed.
    pub fn with_trig(observer: &AgentState, (sin_h, cos_h): (f64, f64)) -> Cone {
        Cone {
            x: observer.x,
            y: observer.y,
            cos_h,
            sin_h,
            range2: observer.vision_distance * observer.vision_distance,
            cos_half: observer.vision_halfangle.cos(),
        }
    }

    /// The bearing test `|bearing| <= half-angle` written as
    /// `cos(bearing) >= cos(half-angle)`, which holds for half-angles in [0, π].
    #[inline]
    pub fn contains(&self, target: (f64, f64), arena: &ArenaSpec) -> bool {
        let (dx, dy) = arena.displacement((self.x, self.y), target);
        let d2 = dx * dx + dy * dy;
        if d2 > self.range2 {
            return false;
        }
        if d2 == 0.0 {
            // coincident centers count as seen
            return true;
        }
        dx * self.cos_h + dy * self.sin_h >= d2.sqrt() * self.cos_half
    }
}

/// Whether `target` lies in the field of view of `observer`.
#[inline]
pub fn in_fov(observer: &AgentState, target: (f64, f64), arena: &ArenaSpec) -> bool {
    Cone::of(observer).contains(target, arena)
}

/// Noise-free readings for every agent, in slice order.
pub fn sense_all(agents: &[AgentState], arena: &ArenaSpec, backend: SensingBackend) -> Vec<bool> {
    let cones: Vec<Cone> = agents.iter().map(Cone::of).collect();
    sense_cones(agents, &cones, arena, backend)
}

/// [`sense_all`] with the cones (one per agent, same order) prebuilt.
pub fn sense_cones(agents: &[AgentState], cones: &[Cone], arena: &ArenaSpec, backend: SensingBackend) -> Vec<bool> {
    let grid = match backend {
        SensingBackend::Grid if agents.len() >= GRID_MIN_AGENTS => SpatialGrid::build(agents, arena),
        _ => None,
    };
    match grid {
        Some(grid) => (0..agents.len()).map(|i| grid.detects(agents, &cones[i], i, arena)).collect(),
        None => scan(agents, cones, arena),
    }
}

pub fn sense_brute_force(agents: &[AgentState], arena: &ArenaSpec) -> Vec<bool> {
    let cones: Vec<Cone> = agents.iter().map(Cone::of).collect();
    scan(agents, &cones, arena)
}

fn scan(agents: &[AgentState], cones: &[Cone], arena: &ArenaSpec) -> Vec<bool> {
    cones
        .iter()
        .enumerate()
        .map(|(i, c)| {
            agents
                .iter()
                .enumerate()
                .any(|(j, b)| j != i && c.contains(b.position(), arena))
        })
        .collect()
}

/// Uniform grid over agent positions, stored as indices sorted by cell key.
pub struct SpatialGrid {
    cell_w: f64,
    cell_h: f64,
    /// Cell counts per axis when the arena is periodic.
    wrap: Option<(i64, i64)>,
    entries: Vec<((i64, i64), usize)>,
}

impl SpatialGrid {
    /// Returns `None` when a grid cannot beat the all-pairs scan (no
    /// positive range, or a torus too small for a 3x3 block of cells).
    pub fn build(agents: &[AgentState], arena: &ArenaSpec) -> Option<SpatialGrid> {
        let max_range = agents.iter().map(|a| a.vision_distance).fold(0.0f64, f64::max);
        if !(max_range > 0.0 && max_range.is_finite()) {
            return None;
        }
        let (mut cell_w, mut cell_h) = (max_range, max_range);
        let mut wrap = None;
        if let ArenaSpec::Torus { width, height } = *arena {
            let cols = (width / max_range).floor() as i64;
            let rows = (height / max_range).floor() as i64;
            if cols < 3 || rows < 3 {
                return None;
            }
            // cells tile the torus exactly and are still at least one range wide
            cell_w = width / cols as f64;
            cell_h = height / rows as f64;
            wrap = Some((cols, rows));
        }
        let mut grid = SpatialGrid {
            cell_w,
            cell_h,
            wrap,
            entries: Vec::with_capacity(agents.len()),
        };
        grid.entries = agents.iter().enumerate().map(|(i, a)| (grid.key(a.x, a.y), i)).collect();
        grid.entries.sort_unstable();
        Some(grid)
    }

    #[inline]
    fn key(&self, x: f64, y: f64) -> (i64, i64) {
        let cx = (x / self.cell_w).floor() as i64;
        let cy = (y / self.cell_h).floor() as i64;
        match self.wrap {
            // positions are already wrapped; the clamp absorbs rounding at the seam
            Some((cols, rows)) => (cx.clamp(0, cols - 1), cy.clamp(0, rows - 1)),
            None => (cx, cy),
        }
    }

    fn cell(&self, key: (i64, i64)) -> &[((i64, i64), usize)] {
        let lo = self.entries.partition_point(|e| e.0 < key);
        let hi = lo + self.entries[lo..].partition_point(|e| e.0 == key);
        &self.entries[lo..hi]
    }

    /// Noise-free reading for agent `i`.
    pub fn detects(&self, agents: &[AgentState], cone: &Cone, i: usize, arena: &ArenaSpec) -> bool {
        let (cx, cy) = self.key(agents[i].x, agents[i].y);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let key = match self.wrap {
                    Some((cols, rows)) => ((cx + dx).rem_euclid(cols), (cy + dy).rem_euclid(rows)),
                    None => (cx + dx, cy + dy),
                };
                let hit = self
                    .cell(key)
                    .iter()
                    .any(|&(_, j)| j != i && cone.contains(agents[j].position(), arena));
                if hit {
                    return true;
                }
            }
        }
        false
    }
}
