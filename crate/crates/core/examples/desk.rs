//! Desk-scale behavior probe: prints summary numbers for a few constructed
//! scenarios and small demand runs. Development aid, not part of the test
//! suite.

use junction_core::geometry::{Approach, Movement, MovementId};
use junction_core::metrics;
use junction_core::scenario::{presets, DemandSpec, Policy, ScenarioConfig};
use junction_core::sim::{RunArtifacts, Simulation, TrajectoryLibrary};

fn summarize(tag: &str, art: &RunArtifacts) {
    let delays = art.delays();
    let eff = metrics::efficiency_summary(&delays, art.horizon_s());
    let safety = metrics::safety_summary(&art.step_min_gaps, 2.0, art.collision_events);
    println!(
        "{tag}: spawned={} completed={} active_end={} pending={} collisions={}",
        art.spawned, art.completions.len(), art.active_at_end, art.pending_at_end,
        art.collision_events
    );
    println!(
        "   throughput={:.0} veh/hr avg_delay={:?} max_delay={:?} min_gap={:?}",
        eff.throughput, eff.avg_delay, eff.max_delay, safety.min_distance
    );
    if let (Some(jfi), Some(gini)) = (art.jfi_final(), art.gini_final()) {
        println!("   jfi={jfi:.4} gini={gini:.4}");
    }
    let min_h = art
        .step_rows
        .iter()
        .filter_map(|r| r.min_h)
        .fold(f64::INFINITY, f64::min);
    println!("   min_h_over_run={min_h:.3}");
}

fn main() {
    let mut cfg = ScenarioConfig::default();
    cfg.horizon_s = 60.0;
    cfg.demand.level = 1e-9; // nothing spawns on schedule
    let t0 = std::time::Instant::now();
    let lib = TrajectoryLibrary::build(&cfg).expect("plan library");
    println!("library planned in {:.2?}", t0.elapsed());

    // 1. Single vehicle, proposed policy.
    {
        let mut sim = Simulation::new(cfg.clone(), lib.clone()).unwrap();
        sim.inject_vehicle(MovementId {
            approach: Approach::South,
            movement: Movement::Straight,
            lane: 1,
        })
        .unwrap();
        sim.run_to_end().unwrap();
        summarize("single straight", &sim.into_artifacts());
    }

    // 2. Two conflicting straight movements.
    {
        let mut sim = Simulation::new(cfg.clone(), lib.clone()).unwrap();
        sim.inject_vehicle(MovementId {
            approach: Approach::South,
            movement: Movement::Straight,
            lane: 1,
        })
        .unwrap();
        sim.inject_vehicle(MovementId {
            approach: Approach::West,
            movement: Movement::Straight,
            lane: 1,
        })
        .unwrap();
        sim.run_to_end().unwrap();
        summarize("crossing straights", &sim.into_artifacts());
    }

    // 3. Left turn vs opposing straight.
    {
        let mut sim = Simulation::new(cfg.clone(), lib.clone()).unwrap();
        sim.inject_vehicle(MovementId {
            approach: Approach::South,
            movement: Movement::Left,
            lane: 1,
        })
        .unwrap();
        sim.inject_vehicle(MovementId {
            approach: Approach::North,
            movement: Movement::Straight,
            lane: 0,
        })
        .unwrap();
        sim.run_to_end().unwrap();
        summarize("left vs straight", &sim.into_artifacts());
    }

    // 4. Demand runs.
    for (name, level, policy, horizon) in [
        ("low proposed", presets::LOW, Policy::Proposed, 120.0),
        ("medium proposed", presets::MEDIUM, Policy::Proposed, 120.0),
        ("medium stop", presets::MEDIUM, Policy::AllWayStop, 120.0),
        ("medium signal", presets::MEDIUM, Policy::PretimedSignal, 120.0),
    ] {
        let mut c = cfg.clone();
        c.policy = policy;
        c.horizon_s = horizon;
        c.demand = DemandSpec {
            level,
            ratios: presets::BALANCED,
            ..DemandSpec::default()
        };
        let t = std::time::Instant::now();
        let mut sim = Simulation::new(c, lib.clone()).unwrap();
        match sim.run_to_end() {
            Ok(()) => {
                let wall = t.elapsed();
                let art = sim.into_artifacts();
                println!("--- {name} (wall {wall:.2?})");
                summarize(name, &art);
            }
            Err(e) => println!("--- {name} FAILED: {e}"),
        }
    }
}
