//! Debug probe for the all-way-stop baseline. Development aid.

use junction_core::scenario::{presets, DemandSpec, Policy, ScenarioConfig};
use junction_core::sim::{Simulation, TrajectoryLibrary};

fn main() {
    let mut cfg = ScenarioConfig::default();
    cfg.policy = Policy::AllWayStop;
    cfg.horizon_s = 60.0;
    cfg.demand = DemandSpec { level: presets::MEDIUM, ratios: presets::BALANCED, ..DemandSpec::default() };
    let lib = TrajectoryLibrary::build(&cfg).unwrap();
    let mut sim = Simulation::new(cfg, lib).unwrap();
    for step in 0..3000u64 {
        sim.step().unwrap();
        if step % 250 == 0 {
            println!("--- t = {:.1} s, active {}", step as f64 * 0.02, sim.active_count());
            for d in sim.debug_vehicles() {
                println!("   {d}");
            }
        }
    }
}
