//! Success rates of the reference scenarios over a range of seeds.
//!
//! cargo run --release -p swarm-core --example reference_scenarios [n_seeds]

use swarm_core::metrics::{ClassifierConfig, PhaseLabel};
use swarm_core::record::simulate_window;
use swarm_core::scenarios::{self, SCENARIO_TICKS};
use swarm_core::World;

fn main() {
    let n: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(50);
    let cls = ClassifierConfig::default();
    let (mut mill, mut diffused, mut centered) = (0, 0, 0);
    for seed in 0..n {
        let mut w = World::init(scenarios::milling(seed)).unwrap();
        if simulate_window(&mut w, SCENARIO_TICKS, &cls).unwrap().label == PhaseLabel::Mill {
            mill += 1;
        }
        let mut w = World::init(scenarios::diffusion(seed)).unwrap();
        if simulate_window(&mut w, SCENARIO_TICKS, &cls).unwrap().min_diffusion > 1.0 {
            diffused += 1;
        }
        let mut w = World::init(scenarios::bullseye(seed)).unwrap();
        if scenarios::centering_ratio(&mut w, 0, SCENARIO_TICKS, &cls).unwrap() < 0.5 {
            centered += 1;
        }
    }
    println!("milling   {mill}/{n}");
    println!("diffusion {diffused}/{n}");
    println!("bullseye  {centered}/{n}");
}
