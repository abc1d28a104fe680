//! Route-planning quality checks: every approach/movement/lane combination
//! must converge to a dynamically consistent, lane-plausible reference.

use junction_core::ddp;
use junction_core::dynamics::{step_planning_model, VehicleParams};
use junction_core::geometry::{
    plan_route, route_problem, route_problem_window, Approach, IntersectionGeometry, Movement,
    MovementId, PlannerSettings,
};

#[test]
fn all_routes_plan_and_stay_on_pavement() {
    let geom = IntersectionGeometry::default();
    let vehicle = VehicleParams::default();
    let ps = PlannerSettings::default();
    let kappa_max = vehicle.max_steer.tan() / vehicle.wheelbase;
    let half = geom.half_span();

    for id in geom.movements() {
        let route = geom.route(id);
        let traj =
            plan_route(&geom, id, &vehicle, &ps, 0.02).unwrap_or_else(|e| panic!("route {id}: {e}"));

        // The normalized reference is exactly Euler-consistent.
        for k in 0..traj.horizon() {
            let next =
                step_planning_model(&traj.states[k], &traj.controls[k], traj.h, vehicle.max_speed)
                    .unwrap();
            assert_eq!(next, traj.states[k + 1], "route {id} inconsistent at {k}");
        }

        // Post-hoc feasibility: curvature within the steering limit.
        for (k, s) in traj.states.iter().enumerate() {
            let kappa = s.omega / s.v.max(0.5);
            assert!(
                kappa.abs() <= kappa_max * 1.05,
                "route {id} curvature {kappa:.3} at index {k} exceeds the limit"
            );
        }

        // Stays on pavement (never over a corner island).
        for s in &traj.states {
            assert!(
                s.px.abs().min(s.py.abs()) <= half + 0.2,
                "route {id} leaves the pavement at ({:.2}, {:.2})",
                s.px,
                s.py
            );
        }

        // Lane discipline away from the turning pocket.
        let mut max_far_dev: f64 = 0.0;
        for s in &traj.states {
            if s.px.abs().max(s.py.abs()) < half + 13.0 {
                continue;
            }
            let mut best = f64::INFINITY;
            let mut arc = 0.0;
            while arc <= route.length() {
                let p = route.sample(arc);
                best = best.min((p.pos - s.position()).norm());
                arc += 0.5;
            }
            max_far_dev = max_far_dev.max(best);
        }
        assert!(max_far_dev < 0.5, "route {id} strays {max_far_dev:.2} m on a leg");

        // Ends at the route exit.
        let end_ref = route.sample(route.length());
        let end = traj.states.last().unwrap();
        let miss = (end.position() - end_ref.pos).norm();
        assert!(miss < 1.0, "route {id} misses the exit by {miss:.2} m");

        // Constant speed and plausible duration after normalization.
        assert!(traj.states.iter().all(|s| (s.v - ps.v_nominal).abs() < 1e-12));
        assert!(traj.v_ref.iter().all(|v| *v == ps.v_nominal));
        let expected_t = route.length() / ps.v_nominal;
        assert!(
            (traj.duration() - expected_t).abs() < 0.5,
            "route {id} duration {:.2} vs {expected_t:.2}",
            traj.duration()
        );
    }
}

#[test]
fn turn_pocket_plan_is_dynamically_consistent() {
    let geom = IntersectionGeometry::default();
    let vehicle = VehicleParams::default();
    let ps = PlannerSettings::default();
    let id = MovementId { approach: Approach::South, movement: Movement::Left, lane: 1 };
    let route = geom.route(id);
    let (a0, a1) = route.turn_window().unwrap();
    let (prob, seed) = route_problem_window(&geom, &route, &vehicle, &ps, a0 - 10.0, a1 + 10.0);
    let traj = ddp::plan(&prob, &seed).unwrap();
    for k in 0..traj.horizon() {
        let next =
            step_planning_model(&traj.states[k], &traj.controls[k], prob.h, prob.max_speed)
                .unwrap();
        assert_eq!(next, traj.states[k + 1]);
    }
    let goal_miss = (traj.states.last().unwrap().position() - prob.goal.position()).norm();
    assert!(goal_miss < 0.5, "pocket misses its goal by {goal_miss:.2} m");
}

#[test]
fn straight_seed_is_already_near_optimal() {
    let geom = IntersectionGeometry::default();
    let vehicle = VehicleParams::default();
    let ps = PlannerSettings::default();
    let id = MovementId { approach: Approach::South, movement: Movement::Straight, lane: 0 };
    let route = geom.route(id);
    let (prob, seed) = route_problem(&geom, &route, &vehicle, &ps);
    let initial = ddp::rollout_from_controls(&seed, &prob).unwrap();
    let traj = ddp::plan(&prob, &seed).unwrap();
    assert!(traj.cost <= initial.cost + 1e-9);
    assert!(initial.cost < 1.0, "straight seed cost {}", initial.cost);
}
