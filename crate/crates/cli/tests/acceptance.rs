//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Run in release; the runtime budgets assume optimized code.
//!
//!     cargo test --release -p swarm-cli --test acceptance

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarm_core::calibration::{build_profile, load_measurements};
use swarm_core::metrics::{circliness, cluster_components, pivot};
use swarm_core::record::simulate_window;
use swarm_core::scenarios::{self, centering_ratio, SCENARIO_TICKS};
use swarm_core::sensing::{sense_brute_force, Cone, SpatialGrid};
use swarm_core::sweep::{run_sweep, write_phase_diagram, PhaseFormat, SweepPlan};
use swarm_core::world::{FactorTiming, IdiosyncrasySource, WorldParam};
use swarm_core::{AgentState, ArenaSpec, ClassifierConfig, ControlInput, ControllerKind, ControllerMode, PhaseLabel};
use swarm_core::{World, WorldConfig};

const SEEDS: u64 = 50;

const MILL_CIRCLINESS: f64 = 0.2;
const MILL_SHARE: f64 = 0.70;
const MILL_BUDGET: Duration = Duration::from_secs(10);

const DIFFUSION_DELTA: f64 = 1.0;
const DIFFUSION_SHARE: f64 = 0.70;

const CENTERING_RATIO: f64 = 0.5;
const CENTERING_SHARE: f64 = 0.50;

const SWEEP_WORKERS: usize = 8;
const SWEEP_BUDGET: Duration = Duration::from_secs(60);

const FACTOR_TOL: f64 = 0.005;

const POLYGON_CASES: usize = 1000;
const POLYGON_TOL: f64 = 1e-9;
const PIVOT_TICKS: u64 = 1000;
const PIVOT_TOL: f64 = 1e-3;
const COMPONENT_CASES: usize = 500;
const COMPONENT_MAX_N: usize = 50;

const SENSING_WORLDS: usize = 1000;
const SENSING_MAX_N: usize = 30;
const RECORD_TICKS: u64 = 3000;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn share(hits: usize, total: u64) -> f64 {
    hits as f64 / total as f64
}

fn milling_rate(timing: FactorTiming) -> usize {
    let classifier = ClassifierConfig::default();
    (0..SEEDS)
        .filter(|&seed| {
            let mut cfg = scenarios::milling(seed);
            if let IdiosyncrasySource::Population(p) = &mut cfg.idiosyncrasy {
                p.factor_timing = timing;
            }
            let mut world = World::init(cfg).unwrap();
            let s = simulate_window(&mut world, SCENARIO_TICKS, &classifier).unwrap();
            s.mean_circliness < MILL_CIRCLINESS
        })
        .count()
}

fn milling() -> Outcome {
    let start = Instant::now();
    let hits = milling_rate(FactorTiming::PerTick);
    let wall = start.elapsed();
    let rate = share(hits, SEEDS);
    // same worlds with factors drawn once per agent, for comparison only
    let fixed = milling_rate(FactorTiming::PerAgent);
    Outcome {
        pass: rate >= MILL_SHARE && wall < MILL_BUDGET,
        detail: format!(
            "{hits}/{SEEDS} seeds with mean circliness < {MILL_CIRCLINESS} (need {:.0}%), {:.2} s (budget {} s); \
             per-agent factors: {fixed}/{SEEDS}",
            MILL_SHARE * 100.0,
            wall.as_secs_f64(),
            MILL_BUDGET.as_secs()
        ),
    }
}

fn diffusion() -> Outcome {
    let classifier = ClassifierConfig::default();
    let hits = (0..SEEDS)
        .filter(|&seed| {
            let mut world = World::init(scenarios::diffusion(seed)).unwrap();
            let s = simulate_window(&mut world, SCENARIO_TICKS, &classifier).unwrap();
            s.min_diffusion > DIFFUSION_DELTA
        })
        .count();
    let rate = share(hits, SEEDS);
    Outcome {
        pass: rate >= DIFFUSION_SHARE,
        detail: format!(
            "{hits}/{SEEDS} seeds keep diffusion > {DIFFUSION_DELTA} over the final window (need {:.0}%)",
            DIFFUSION_SHARE * 100.0
        ),
    }
}

fn bullseye() -> Outcome {
    let classifier = ClassifierConfig::default();
    let hits = (0..SEEDS)
        .filter(|&seed| {
            let mut world = World::init(scenarios::bullseye(seed)).unwrap();
            centering_ratio(&mut world, 0, SCENARIO_TICKS, &classifier).unwrap() < CENTERING_RATIO
        })
        .count();
    let rate = share(hits, SEEDS);
    Outcome {
        pass: rate >= CENTERING_SHARE,
        detail: format!(
            "{hits}/{SEEDS} seeds put agent 0 at < {CENTERING_RATIO}x the others' centroid distance (need {:.0}%)",
            CENTERING_SHARE * 100.0
        ),
    }
}

fn phase_diagram() -> Outcome {
    let plan = SweepPlan::default_grid();
    let start = Instant::now();
    let report = run_sweep(&plan, SWEEP_WORKERS, None).unwrap();
    let wall = start.elapsed();
    let target = report.cells.iter().find(|c| {
        let v = c.coordinate(WorldParam::V).unwrap();
        let w = c.coordinate(WorldParam::Omega).unwrap();
        (v - scenarios::MILLING_V).abs() < 1e-9 && (w - scenarios::MILLING_OMEGA_DEG.to_radians()).abs() < 1e-9
    });
    let target_label = target.and_then(|c| c.aggregate_label);
    let mills = report.cells.iter().filter(|c| c.aggregate_label == Some(PhaseLabel::Mill)).count();
    let others = report.cells.len() - mills;
    Outcome {
        pass: report.cells.len() == 56 && target_label == Some(PhaseLabel::Mill) && others > 0 && wall < SWEEP_BUDGET,
        detail: format!(
            "{} cells: {mills} Mill, {others} other; (0.25 m/s, 45 deg/s) is {}; {:.2} s at {SWEEP_WORKERS} workers \
             (budget {} s)",
            report.cells.len(),
            target_label.map_or("unlabeled", |l| l.as_str()),
            wall.as_secs_f64(),
            SWEEP_BUDGET.as_secs()
        ),
    }
}

fn workspace_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn calibration() -> Outcome {
    let trials = load_measurements(&workspace_file("configs/table1.csv")).unwrap();
    let (profile, _) = build_profile(&trials, None).unwrap();
    let expected = [(50.0, [1.00, 1.03, 0.97]), (100.0, [1.05, 0.95, 1.00])];
    let mut worst: f64 = 0.0;
    let mut missing = 0;
    for (u1, factors) in expected {
        for (id, want) in ["r1", "r2", "r3"].iter().zip(factors) {
            match profile
                .robots
                .get(*id)
                .and_then(|r| r.speed_levels.iter().find(|l| l.u1 == u1))
            {
                Some(l) => worst = worst.max((l.factor - want).abs()),
                None => missing += 1,
            }
        }
    }
    Outcome {
        pass: missing == 0 && worst <= FACTOR_TOL,
        detail: format!("6 per-level speed factors, worst deviation {worst:.5} (tolerance {FACTOR_TOL}), {missing} missing"),
    }
}

fn regular_polygons(rng: &mut ChaCha8Rng) -> (usize, f64) {
    let mut bad = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..POLYGON_CASES {
        let n = rng.random_range(3..=12);
        let r = 10f64.powf(rng.random_range(-2.0..3.0));
        let rot = rng.random_range(0.0..TAU);
        let (cx, cy) = (rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3));
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let a = rot + TAU * k as f64 / n as f64;
                (cx + r * a.cos(), cy + r * a.sin())
            })
            .collect();
        let c = circliness(&pts, 1e-12).unwrap();
        worst = worst.max(c);
        if c.is_nan() || c.abs() >= POLYGON_TOL {
            bad += 1;
        }
    }
    (bad, worst)
}

/// Largest drift, relative to v/w, of a lone constant-input agent from the
/// pivot computed at its first tick.
fn pivot_drift() -> f64 {
    let v = scenarios::MILLING_V;
    let w = scenarios::MILLING_OMEGA_DEG.to_radians();
    let mut cfg = WorldConfig::new(1, ControllerMode::new(ControllerKind::Milling, v, w).unwrap());
    cfg.dt = 0.022;
    let mut world = World::init(cfg).unwrap();
    world.step().unwrap();
    let a = &world.agents()[0];
    let input = a.last_input;
    let center = pivot(a, input, 0.022, 1e-9).unwrap();
    let radius = (a.x - center.0).hypot(a.y - center.1);
    let scale = input.forward_speed.abs() / input.turn_rate.abs();
    let mut worst: f64 = 0.0;
    for _ in 0..PIVOT_TICKS {
        world.step().unwrap();
        let a = &world.agents()[0];
        assert_eq!(a.last_input, input, "input changed; the agent is not alone");
        let p = pivot(a, a.last_input, 0.022, 1e-9).unwrap();
        let moved = (p.0 - center.0).hypot(p.1 - center.1);
        let off_circle = ((a.x - center.0).hypot(a.y - center.1) - radius).abs();
        worst = worst.max(moved.max(off_circle) / scale);
    }
    worst
}

/// Union-find over all pairs.
fn union_find_components(points: &[(f64, f64)], link: f64, arena: &ArenaSpec) -> BTreeSet<Vec<usize>> {
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            let (dx, dy) = match *arena {
                ArenaSpec::Torus { width, height } => {
                    let dx = (points[j].0 - points[i].0).abs() % width;
                    let dy = (points[j].1 - points[i].1).abs() % height;
                    (dx.min(width - dx), dy.min(height - dy))
                }
                _ => (points[j].0 - points[i].0, points[j].1 - points[i].1),
            };
            if dx.hypot(dy) <= link {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups = std::collections::BTreeMap::<usize, Vec<usize>>::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    groups.into_values().collect()
}

fn components(rng: &mut ChaCha8Rng) -> usize {
    let mut mismatches = 0;
    for case in 0..COMPONENT_CASES {
        let n = rng.random_range(0..=COMPONENT_MAX_N);
        let side = rng.random_range(1.0..20.0);
        let arena = if case % 4 == 3 {
            ArenaSpec::Torus { width: side, height: side }
        } else {
            ArenaSpec::Unbounded
        };
        let link = rng.random_range(0.1..3.0);
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(0.0..side), rng.random_range(0.0..side)))
            .collect();
        let got: BTreeSet<Vec<usize>> = cluster_components(&pts, link, &arena).into_iter().collect();
        if got != union_find_components(&pts, link, &arena) {
            mismatches += 1;
        }
    }
    mismatches
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (bad_polygons, worst_polygon) = regular_polygons(&mut rng);
    let drift = pivot_drift();
    let mismatches = components(&mut rng);
    Outcome {
        pass: bad_polygons == 0 && drift <= PIVOT_TOL && mismatches == 0,
        detail: format!(
            "polygons {}/{POLYGON_CASES} (worst circliness {worst_polygon:.1e}); pivot drift {drift:.1e} x v/w over \
             {PIVOT_TICKS} ticks (tolerance {PIVOT_TOL:.0e}); components {}/{COMPONENT_CASES} match union-find",
            POLYGON_CASES - bad_polygons,
            COMPONENT_CASES - mismatches
        ),
    }
}

/// Bearing-based field-of-view test, written independently of the engine.
fn sees(a: &AgentState, b: &AgentState, arena: &ArenaSpec) -> bool {
    let (mut dx, mut dy) = (b.x - a.x, b.y - a.y);
    if let ArenaSpec::Torus { width, height } = *arena {
        dx -= width * (dx / width).round();
        dy -= height * (dy / height).round();
    }
    let d = dx.hypot(dy);
    if d > a.vision_distance {
        return false;
    }
    let mut bearing = dy.atan2(dx) - a.heading;
    while bearing > PI {
        bearing -= TAU;
    }
    while bearing < -PI {
        bearing += TAU;
    }
    bearing.abs() <= a.vision_halfangle
}

fn random_world(rng: &mut ChaCha8Rng, case: usize) -> (Vec<AgentState>, ArenaSpec) {
    let n = rng.random_range(1..=SENSING_MAX_N);
    let side = rng.random_range(2.0..12.0);
    let arena = match case % 3 {
        0 => ArenaSpec::Unbounded,
        1 => ArenaSpec::BoundedClamp { width: side, height: side },
        _ => ArenaSpec::Torus {
            width: side.max(4.0),
            height: side.max(4.0),
        },
    };
    let mode = ControllerMode::new(ControllerKind::Milling, 0.25, 0.8).unwrap();
    let agents = (0..n as u32)
        .map(|id| AgentState {
            id,
            x: rng.random_range(0.0..side),
            y: rng.random_range(0.0..side),
            heading: rng.random_range(0.0..TAU),
            speed_factor: 1.0,
            turn_factor: 1.0,
            vision_distance: rng.random_range(0.5..1.3),
            vision_halfangle: rng.random_range(0.05..PI * 0.95),
            controller: mode,
            last_sensor: false,
            last_input: ControlInput::ZERO,
        })
        .collect();
    (agents, arena)
}

fn sensing_agreement() -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut grid_worlds, mut mismatches) = (0, 0);
    for case in 0..SENSING_WORLDS {
        let (agents, arena) = random_world(&mut rng, case);
        let brute = sense_brute_force(&agents, &arena);
        let oracle: Vec<bool> = (0..agents.len())
            .map(|i| (0..agents.len()).any(|j| j != i && sees(&agents[i], &agents[j], &arena)))
            .collect();
        let grid = SpatialGrid::build(&agents, &arena).map(|g| {
            (0..agents.len())
                .map(|i| g.detects(&agents, &Cone::of(&agents[i]), i, &arena))
                .collect::<Vec<bool>>()
        });
        if grid.is_some() {
            grid_worlds += 1;
        }
        if brute != oracle || grid.is_some_and(|g| g != brute) {
            mismatches += 1;
        }
    }
    (grid_worlds, mismatches)
}

fn run_in_process(dir: &Path, seed: u64) -> Vec<u8> {
    let out = dir.join("record.json");
    let status = Command::new(env!("CARGO_BIN_EXE_swarm"))
        .arg("run")
        .arg("--config")
        .arg(workspace_file("configs/milling.json"))
        .args(["--seed", &seed.to_string(), "--ticks", &RECORD_TICKS.to_string()])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    std::fs::read(out).unwrap()
}

fn sweep_bytes(plan: &SweepPlan, workers: usize, dir: &Path) -> Vec<u8> {
    let report = run_sweep(plan, workers, None).unwrap();
    let path = dir.join(format!("grid-{workers}.jsonl"));
    write_phase_diagram(&report.cells, &path, PhaseFormat::Jsonl).unwrap();
    std::fs::read(path).unwrap()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    let records_equal = run_in_process(&a, 11) == run_in_process(&b, 11);

    let mut plan = SweepPlan::default_grid();
    plan.axes[0].values.truncate(3);
    plan.axes[1].values.truncate(3);
    plan.ticks_per_run = 1500;
    let runs: Vec<Vec<u8>> = [1, 4, 8].iter().map(|&w| sweep_bytes(&plan, w, dir.path())).collect();
    let sweeps_equal = runs.windows(2).all(|w| w[0] == w[1]);

    let (grid_worlds, mismatches) = sensing_agreement();
    Outcome {
        pass: records_equal && sweeps_equal && mismatches == 0,
        detail: format!(
            "records across processes {}; sweeps at 1/4/8 workers {}; sensing {}/{SENSING_WORLDS} worlds agree \
             ({grid_worlds} through the grid)",
            if records_equal { "identical" } else { "DIFFER" },
            if sweeps_equal { "identical" } else { "DIFFER" },
            SENSING_WORLDS - mismatches
        ),
    }
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("milling emergence", milling),
        ("diffusion emergence", diffusion),
        ("self-centering bulls-eye", bullseye),
        ("phase-diagram structure", phase_diagram),
        ("calibration oracle", calibration),
        ("metric oracles", metric_oracles),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} {}: {name}: {}",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
