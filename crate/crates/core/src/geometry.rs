//! Four-way two-lane intersection geometry: lane layout, route polylines
//! (lines + circular arcs) for every approach/movement/lane combination,
//! and helpers that turn a route into a trajectory-optimization instance.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

// f64 math comes from the trait in pure no_std graphs; std graphs
// resolve it inherently and would flag the import.
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{Matrix2, Matrix5, Vector2, Vector5};

use crate::ddp::{self, DdpProblem, PenaltyDisc, ReferenceTrajectory};
use crate::dynamics::{wrap_angle, PlanningControl, VehicleParams, VehicleState};

/// Compass leg a vehicle enters from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Approach {
    North,
    East,
    South,
    West,
}

impl Approach {
    pub const ALL: [Approach; 4] = [Approach::North, Approach::East, Approach::South, Approach::West];

    /// Rotation mapping the canonical from-south frame onto this approach.
    fn rotation(self) -> f64 {
        match self {
            Approach::South => 0.0,
            Approach::West => -core::f64::consts::FRAC_PI_2,
            Approach::North => core::f64::consts::PI,
            Approach::East => core::f64::consts::FRAC_PI_2,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Approach::North => "N",
            Approach::East => "E",
            Approach::South => "S",
            Approach::West => "W",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Movement {
    Straight,
    Left,
    Right,
}

impl Movement {
    pub fn short(self) -> &'static str {
        match self {
            Movement::Straight => "straight",
            Movement::Left => "left",
            Movement::Right => "right",
        }
    }
}

/// One plannable route: approach leg, movement, and entry lane.
///
/// Lane 0 is the outer (rightmost) lane carrying straight and right turns;
/// lane 1 is the inner lane carrying straight and left turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MovementId {
    pub approach: Approach,
    pub movement: Movement,
    pub lane: u8,
}

impl fmt::Display for MovementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}_{}", self.approach.short(), self.movement.short(), self.lane)
    }
}

/// Point sampled along a route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub pos: Vector2<f64>,
    pub theta: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Segment {
    Line { start: Vector2<f64>, dir: Vector2<f64>, len: f64 },
    Arc { center: Vector2<f64>, radius: f64, start_angle: f64, sweep: f64 },
}

impl Segment {
    fn len(&self) -> f64 {
        match self {
            Segment::Line { len, .. } => *len,
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    fn sample(&self, s: f64) -> PathPoint {
        match self {
            Segment::Line { start, dir, .. } => PathPoint {
                pos: start + dir * s,
                theta: dir.y.atan2(dir.x),
                kappa: 0.0,
            },
            Segment::Arc { center, radius, start_angle, sweep } => {
                let ang = start_angle + sweep.signum() * s / radius;
                let pos = center + Vector2::new(ang.cos(), ang.sin()) * *radius;
                let theta = wrap_angle(ang + sweep.signum() * core::f64::consts::FRAC_PI_2);
                PathPoint { pos, theta, kappa: sweep.signum() / radius }
            }
        }
    }
}

/// Piecewise line/arc route with arc-length sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutePath {
    segments: Vec<Segment>,
    cum: Vec<f64>,
}

impl RoutePath {
    fn new(segments: Vec<Segment>) -> Self {
        let mut cum = Vec::with_capacity(segments.len() + 1);
        cum.push(0.0);
        for seg in &segments {
            cum.push(cum.last().unwrap() + seg.len());
        }
        Self { segments, cum }
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn sample(&self, s: f64) -> PathPoint {
        let s = s.clamp(0.0, self.length());
        let mut idx = self.segments.len() - 1;
        for i in 0..self.segments.len() {
            if s <= self.cum[i + 1] {
                idx = i;
                break;
            }
        }
        self.segments[idx].sample(s - self.cum[idx])
    }

    /// Arc-length span of the turning arc, if the route has one.
    pub fn turn_window(&self) -> Option<(f64, f64)> {
        for (i, seg) in self.segments.iter().enumerate() {
            if matches!(seg, Segment::Arc { .. }) {
                return Some((self.cum[i], self.cum[i + 1]));
            }
        }
        None
    }
}

/// Intersection layout parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntersectionGeometry {
    /// Lane width [m].
    pub lane_width: f64,
    /// Spawn/despawn distance from the intersection center [m].
    pub spawn_distance: f64,
    /// Right-turn arc radius [m].
    pub r_right: f64,
    /// Left-turn arc radius [m].
    pub r_left: f64,
}

impl Default for IntersectionGeometry {
    fn default() -> Self {
        // r_right keeps the turn apex inside the conflict box: the apex
        // excursion is lane_offset + r (1 - 1/sqrt(2)), which must stay
        // below the half-span.
        Self { lane_width: 3.5, spawn_distance: 50.0, r_right: 5.0, r_left: 9.0 }
    }
}

fn rot(p: Vector2<f64>, angle: f64) -> Vector2<f64> {
    let (s, c) = angle.sin_cos();
    Vector2::new(c * p.x - s * p.y, s * p.x + c * p.y)
}

impl IntersectionGeometry {
    /// Half-extent of the conflict box (two lanes per direction).
    pub fn half_span(&self) -> f64 {
        2.0 * self.lane_width
    }

    /// Lane-center x offset in the canonical from-south frame.
    fn lane_offset(&self, lane: u8) -> f64 {
        match lane {
            0 => 1.5 * self.lane_width,
            _ => 0.5 * self.lane_width,
        }
    }

    /// Every valid approach/movement/lane combination (16 routes).
    pub fn movements(&self) -> Vec<MovementId> {
        let mut out = Vec::with_capacity(16);
        for approach in Approach::ALL {
            for (movement, lane) in [
                (Movement::Straight, 0),
                (Movement::Straight, 1),
                (Movement::Right, 0),
                (Movement::Left, 1),
            ] {
                out.push(MovementId { approach, movement, lane });
            }
        }
        out
    }

    /// Entry lane used by a movement: right turns hug lane 0, left turns
    /// lane 1, straights take either.
    pub fn lane_for(movement: Movement, straight_toggle: bool) -> u8 {
        match movement {
            Movement::Right => 0,
            Movement::Left => 1,
            Movement::Straight => {
                if straight_toggle {
                    1
                } else {
                    0
                }
            }
        }
    }

    /// Build the route polyline for one movement.
    pub fn route(&self, id: MovementId) -> RoutePath {
        let d = self.spawn_distance;
        let x = self.lane_offset(id.lane);
        let up = Vector2::new(0.0, 1.0);
        let segments: Vec<Segment> = match id.movement {
            Movement::Straight => vec![Segment::Line {
                start: Vector2::new(x, -d),
                dir: up,
                len: 2.0 * d,
            }],
            Movement::Right => {
                let r = self.r_right;
                let turn_y = -(x + r);
                vec![
                    Segment::Line { start: Vector2::new(x, -d), dir: up, len: d + turn_y },
                    Segment::Arc {
                        center: Vector2::new(x + r, turn_y),
                        radius: r,
                        start_angle: core::f64::consts::PI,
                        sweep: -core::f64::consts::FRAC_PI_2,
                    },
                    Segment::Line {
                        start: Vector2::new(x + r, -x),
                        dir: Vector2::new(1.0, 0.0),
                        len: d - (x + r),
                    },
                ]
            }
            Movement::Left => {
                let r = self.r_left;
                let turn_y = x - r;
                vec![
                    Segment::Line { start: Vector2::new(x, -d), dir: up, len: d + turn_y },
                    Segment::Arc {
                        center: Vector2::new(x - r, turn_y),
                        radius: r,
                        start_angle: 0.0,
                        sweep: core::f64::consts::FRAC_PI_2,
                    },
                    Segment::Line {
                        start: Vector2::new(x - r, x),
                        dir: Vector2::new(-1.0, 0.0),
                        len: d - (r - x),
                    },
                ]
            }
        };
        let angle = id.approach.rotation();
        let rotated = segments
            .into_iter()
            .map(|seg| match seg {
                Segment::Line { start, dir, len } => {
                    Segment::Line { start: rot(start, angle), dir: rot(dir, angle), len }
                }
                Segment::Arc { center, radius, start_angle, sweep } => Segment::Arc {
                    center: rot(center, angle),
                    radius,
                    start_angle: start_angle + angle,
                    sweep,
                },
            })
            .collect();
        RoutePath::new(rotated)
    }

    /// Soft-penalty discs covering the four corner islands: one disc in each
    /// corner pocket plus fences along both island edges, so plans neither
    /// clip the pocket nor swing off the road before a turn.
    pub fn corner_discs(&self, radius: f64, weight: f64) -> Vec<PenaltyDisc> {
        let hs = self.half_span();
        let pocket = hs + radius;
        // Penalty onset half a metre inside the road edge.
        let edge = hs - 0.5 + radius;
        let mut discs = Vec::new();
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                discs.push(PenaltyDisc {
                    center: Vector2::new(sx * pocket, sy * pocket),
                    radius,
                    weight,
                });
                let mut along = hs + 0.5 * radius;
                while along < hs + 18.0 {
                    discs.push(PenaltyDisc {
                        center: Vector2::new(sx * edge, sy * along),
                        radius,
                        weight,
                    });
                    discs.push(PenaltyDisc {
                        center: Vector2::new(sx * along, sy * edge),
                        radius,
                        weight,
                    });
                    along += 1.25 * radius;
                }
            }
        }
        discs
    }

    /// Arc-length window `(s_enter, s_exit)` where a polyline trajectory is
    /// inside the enlarged conflict box.
    pub fn box_window(&self, traj: &ReferenceTrajectory, margin: f64) -> (f64, f64) {
        let bound = self.half_span() + margin;
        let mut s = 0.0;
        let mut enter = None;
        let mut exit = 0.0;
        for w in traj.states.windows(2) {
            let p = w[0].position();
            if p.x.abs() < bound && p.y.abs() < bound {
                if enter.is_none() {
                    enter = Some(s);
                }
                exit = s;
            }
            s += (w[1].position() - w[0].position()).norm();
        }
        (enter.unwrap_or(s), exit)
    }
}

/// Planner weights and seed parameters shared by all routes.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerSettings {
    /// Planning step [s].
    pub h: f64,
    pub q: Matrix5<f64>,
    pub r: Matrix2<f64>,
    pub qf: Matrix5<f64>,
    /// Corner-island penalty disc radius [m] and weight.
    pub disc_radius: f64,
    pub disc_weight: f64,
    /// Nominal reference speed [m/s].
    pub v_nominal: f64,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        Self {
            h: 0.1,
            // Running cost regulates speed and yaw rate; the pose is pinned
            // by the terminal weight so plans cruise instead of rushing.
            q: Matrix5::from_diagonal(&Vector5::new(0.0, 0.0, 0.0, 0.5, 0.01)),
            r: Matrix2::from_diagonal(&Vector2::new(1.0, 100.0)),
            qf: Matrix5::from_diagonal(&Vector5::new(600.0, 600.0, 1200.0, 50.0, 100.0)),
            disc_radius: 3.0,
            disc_weight: 100.0,
            v_nominal: 8.0,
        }
    }
}

/// Route curvature averaged over a short window, ramping the piecewise
/// constant arc curvature so the seed's yaw acceleration stays bounded.
fn smoothed_kappa(route: &RoutePath, s: f64) -> f64 {
    const WINDOW: f64 = 2.0;
    const SAMPLES: i32 = 4;
    let mut acc = 0.0;
    for i in -SAMPLES..=SAMPLES {
        let off = WINDOW * i as f64 / SAMPLES as f64;
        acc += route.sample((s + off).clamp(0.0, route.length())).kappa;
    }
    acc / (2 * SAMPLES + 1) as f64
}

/// Constant-speed states along a route, the geometric planner seed.
pub fn seed_states(route: &RoutePath, v: f64, h: f64, n: usize) -> Vec<VehicleState> {
    (0..=n)
        .map(|k| {
            let s = (k as f64 * v * h).min(route.length());
            let p = route.sample(s);
            VehicleState::new(p.pos.x, p.pos.y, p.theta, v, v * smoothed_kappa(route, s))
        })
        .collect()
}

/// Finite-difference controls reproducing the seed state sequence.
pub fn seed_controls(route: &RoutePath, v: f64, h: f64, n: usize) -> Vec<PlanningControl> {
    let states = seed_states(route, v, h, n);
    (0..n)
        .map(|k| {
            PlanningControl::new(
                (states[k + 1].v - states[k].v) / h,
                (states[k + 1].omega - states[k].omega) / h,
            )
        })
        .collect()
}

/// Assemble the optimization instance for one route over the arc-length
/// window `[s0, s1]` (pass the full span for whole-route problems).
pub fn route_problem_window(
    geom: &IntersectionGeometry,
    route: &RoutePath,
    vehicle: &VehicleParams,
    ps: &PlannerSettings,
    s0: f64,
    s1: f64,
) -> (DdpProblem, Vec<PlanningControl>) {
    let n = (((s1 - s0) / (ps.v_nominal * ps.h)).ceil() as usize).max(1);
    let start = route.sample(s0);
    let end = route.sample(s1);
    let prob = DdpProblem {
        x0: VehicleState::new(
            start.pos.x,
            start.pos.y,
            start.theta,
            ps.v_nominal,
            ps.v_nominal * smoothed_kappa(route, s0),
        ),
        n,
        h: ps.h,
        q: ps.q,
        r: ps.r,
        qf: ps.qf,
        goal: VehicleState::new(
            end.pos.x,
            end.pos.y,
            end.theta,
            ps.v_nominal,
            ps.v_nominal * smoothed_kappa(route, s1),
        ),
        obstacles: geom.corner_discs(ps.disc_radius, ps.disc_weight),
        max_speed: vehicle.max_speed,
        max_accel: vehicle.max_accel,
    };
    let seed: Vec<PlanningControl> = {
        let states: Vec<VehicleState> = (0..=n)
            .map(|k| {
                let s = (s0 + k as f64 * ps.v_nominal * ps.h).min(route.length());
                let p = route.sample(s);
                VehicleState::new(p.pos.x, p.pos.y, p.theta, ps.v_nominal, ps.v_nominal * smoothed_kappa(route, s))
            })
            .collect();
        (0..n)
            .map(|k| {
                PlanningControl::new(
                    (states[k + 1].v - states[k].v) / ps.h,
                    (states[k + 1].omega - states[k].omega) / ps.h,
                )
            })
            .collect()
    };
    (prob, seed)
}

/// Assemble the whole-route optimization instance.
pub fn route_problem(
    geom: &IntersectionGeometry,
    route: &RoutePath,
    vehicle: &VehicleParams,
    ps: &PlannerSettings,
) -> (DdpProblem, Vec<PlanningControl>) {
    route_problem_window(geom, route, vehicle, ps, 0.0, route.length())
}

/// How far before and after the turning arc the optimized segment extends.
const TURN_LEAD: f64 = 10.0;

fn stitched_trajectory(
    route: &RoutePath,
    pocket: &ReferenceTrajectory,
    s0: f64,
    s1: f64,
    v: f64,
    h: f64,
) -> ReferenceTrajectory {
    let ds = v * h;
    let mut states: Vec<VehicleState> = Vec::new();
    let mut s = 0.0;
    while s < s0 - 0.5 * ds {
        let p = route.sample(s);
        states.push(VehicleState::new(p.pos.x, p.pos.y, p.theta, v, v * smoothed_kappa(route, s)));
        s += ds;
    }
    states.extend_from_slice(&pocket.states);
    let mut s = s1 + ds;
    while s < route.length() + 0.5 * ds {
        let p = route.sample(s.min(route.length()));
        let sk = smoothed_kappa(route, s.min(route.length()));
        states.push(VehicleState::new(p.pos.x, p.pos.y, p.theta, v, v * sk));
        s += ds;
    }
    let n = states.len() - 1;
    let controls: Vec<PlanningControl> = (0..n)
        .map(|k| {
            PlanningControl::new(
                (states[k + 1].v - states[k].v) / h,
                (states[k + 1].omega - states[k].omega) / h,
            )
        })
        .collect();
    let curvature: Vec<f64> = states.iter().map(|x| x.omega / x.v.max(0.5)).collect();
    let v_ref: Vec<f64> = states.iter().map(|x| x.v).collect();
    ReferenceTrajectory { states, controls, curvature, v_ref, cost: pocket.cost, h }
}

/// Plan one route and normalize it to the common constant reference speed,
/// sampled at the control period `ts`.
///
/// Turning routes optimize only the segment around the arc (the approach
/// and exit legs are straight lane-keeping with nothing to optimize); the
/// optimized pocket is stitched back into the full route before
/// normalization.
pub fn plan_route(
    geom: &IntersectionGeometry,
    id: MovementId,
    vehicle: &VehicleParams,
    ps: &PlannerSettings,
    ts: f64,
) -> Result<ReferenceTrajectory, ddp::DdpError> {
    let route = geom.route(id);
    let traj = match route.turn_window() {
        None => {
            let (prob, seed) = route_problem(geom, &route, vehicle, ps);
            ddp::plan(&prob, &seed)?
        }
        Some((a0, a1)) => {
            let ds = ps.v_nominal * ps.h;
            let s0 = ((a0 - TURN_LEAD).max(0.0) / ds).floor() * ds;
            let s1 = (a1 + TURN_LEAD).min(route.length());
            let (prob, seed) = route_problem_window(geom, &route, vehicle, ps, s0, s1);
            let pocket = ddp::plan(&prob, &seed)?;
            stitched_trajectory(&route, &pocket, s0, s1, ps.v_nominal, ps.h)
        }
    };
    Ok(ddp::normalize_constant_speed(&traj, ps.v_nominal, ts, vehicle.max_speed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn geom() -> IntersectionGeometry {
        IntersectionGeometry::default()
    }

    #[test]
    fn straight_route_runs_spawn_to_despawn() {
        let id = MovementId { approach: Approach::South, movement: Movement::Straight, lane: 1 };
        let route = geom().route(id);
        assert_relative_eq!(route.length(), 100.0);
        let start = route.sample(0.0);
        assert_relative_eq!(start.pos.x, 1.75);
        assert_relative_eq!(start.pos.y, -50.0);
        assert_relative_eq!(start.theta, core::f64::consts::FRAC_PI_2);
        let end = route.sample(route.length());
        assert_relative_eq!(end.pos.y, 50.0);
    }

    #[test]
    fn right_turn_exits_east() {
        let id = MovementId { approach: Approach::South, movement: Movement::Right, lane: 0 };
        let route = geom().route(id);
        let end = route.sample(route.length());
        assert_relative_eq!(end.pos.x, 50.0, epsilon = 1e-9);
        assert_relative_eq!(end.pos.y, -5.25, epsilon = 1e-9);
        assert_relative_eq!(end.theta, 0.0, epsilon = 1e-12);
        // Heading is continuous through the turn.
        let mut prev = route.sample(0.0).theta;
        let mut s = 0.5;
        while s < route.length() {
            let th = route.sample(s).theta;
            assert!(wrap_angle(th - prev).abs() < 0.2, "heading jump at s = {s}");
            prev = th;
            s += 0.5;
        }
    }

    #[test]
    fn left_turn_exits_west() {
        let id = MovementId { approach: Approach::South, movement: Movement::Left, lane: 1 };
        let route = geom().route(id);
        let end = route.sample(route.length());
        assert_relative_eq!(end.pos.x, -50.0, epsilon = 1e-9);
        assert_relative_eq!(end.pos.y, 1.75, epsilon = 1e-9);
        assert_relative_eq!(wrap_angle(end.theta - core::f64::consts::PI), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rotated_approaches_are_consistent() {
        let id = MovementId { approach: Approach::West, movement: Movement::Straight, lane: 0 };
        let route = geom().route(id);
        let start = route.sample(0.0);
        assert_relative_eq!(start.pos.x, -50.0, epsilon = 1e-9);
        assert_relative_eq!(start.pos.y, -5.25, epsilon = 1e-9);
        assert_relative_eq!(start.theta, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn turn_curvature_within_steering_limit() {
        let p = VehicleParams::default();
        let kappa_max = p.max_steer.tan() / p.wheelbase;
        for id in geom().movements() {
            let route = geom().route(id);
            let mut s = 0.0;
            while s <= route.length() {
                assert!(route.sample(s).kappa.abs() <= kappa_max, "route {id} too tight");
                s += 0.25;
            }
        }
    }

    #[test]
    fn seed_is_consistent_with_finite_differences() {
        let id = MovementId { approach: Approach::South, movement: Movement::Left, lane: 1 };
        let route = geom().route(id);
        let controls = seed_controls(&route, 8.0, 0.1, 30);
        assert_eq!(controls.len(), 30);
        assert!(controls.iter().all(|u| u.a == 0.0));
        assert!(controls.iter().all(|u| u.alpha.is_finite()));
    }
}
