//! Single-thread simulation throughput, in agent-ticks per millisecond.
//!
//! cargo run --release -p swarm-core --example throughput

use std::time::Instant;

use swarm_core::metrics::ClassifierConfig;
use swarm_core::record::simulate_window;
use swarm_core::world::{NoiseSpec, World, WorldConfig};
use swarm_core::{ControllerKind, ControllerMode};

fn main() {
    let classifier = ClassifierConfig::default();
    for n in [6u32, 12, 20] {
        for noisy in [false, true] {
            let mode = ControllerMode::new(ControllerKind::Milling, 0.25, 45f64.to_radians()).unwrap();
            let mut cfg = WorldConfig::new(n, mode);
            if noisy {
                cfg.noise = NoiseSpec {
                    actuation_std: 0.05,
                    false_negative_rate: 0.1,
                    false_positive_rate: 0.0,
                };
            }
            let ticks = 5455u64;
            let runs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
            let t0 = Instant::now();
            for seed in 0..runs {
                cfg.seed = seed;
                let mut w = World::init(cfg.clone()).unwrap();
                simulate_window(&mut w, ticks, &classifier).unwrap();
            }
            let ms = t0.elapsed().as_secs_f64() * 1e3;
            let rate = (n as u64 * ticks * runs) as f64 / ms;
            println!("n={n:2} noise={noisy:5} {rate:10.0} agent-ticks/ms");
        }
    }
}
