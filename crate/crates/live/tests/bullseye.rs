use swarm_core::config::RunConfig;
use swarm_core::metrics::ClassifierConfig;
use swarm_core::scenarios::{self, centering_ratio, SCENARIO_TICKS};
use swarm_core::ControllerKind;
use swarm_live::{Command, Session};

/// Seven noisy millers; partway through, agent 3 is switched to the
/// self-centering law and should end up near the middle.
fn ratio(seed: u64, assign: bool) -> f64 {
    let mut cfg = scenarios::bullseye(seed);
    cfg.controllers.overrides.clear();
    let mut s = Session::new(RunConfig::new(cfg)).unwrap();
    s.apply(Command::Step { k: 500 }).unwrap();
    if assign {
        s.apply(Command::AssignController {
            agent_id: 3,
            kind: ControllerKind::SelfCentering,
            v: None,
            omega: None,
        })
        .unwrap();
    }
    let mut world = s.snapshot().build_world().unwrap();
    centering_ratio(&mut world, 3, SCENARIO_TICKS, &ClassifierConfig::default()).unwrap()
}

#[test]
fn assigned_agent_migrates_inward() {
    let seeds = 0..20u64;
    let assigned: Vec<f64> = seeds.clone().map(|s| ratio(s, true)).collect();
    let control: Vec<f64> = seeds.map(|s| ratio(s, false)).collect();
    let centered = assigned.iter().filter(|&&r| r < 0.5).count();
    let closer = assigned.iter().zip(&control).filter(|(a, c)| a < c).count();
    assert!(centered * 2 >= assigned.len(), "{centered}/20 centered");
    assert!(closer >= 16, "{closer}/20 closer than the unmodified run");
}
