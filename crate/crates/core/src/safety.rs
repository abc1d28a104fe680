//! F-HOCBF safety certificate: a velocity/acceleration-inflated obstacle
//! ellipse, the minimal-clearance barrier with its second-order input-affine
//! expansion, and the relaxed QP that computes the minimal corrective input.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

// f64 math comes from the trait in pure no_std graphs; std graphs
// resolve it inherently and would flag the import.
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2, Vector3};

use crate::avoidance::ObstacleTrack;
use crate::dynamics::VehicleState;
use crate::tracking::TrackingCommand;

const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

/// Envelope inflation gains and activation thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeParams {
    /// Velocity inflation gains [s], longitudinal / lateral.
    pub mu1: f64,
    pub mu2: f64,
    /// Acceleration inflation gains [s^2].
    pub nu1: f64,
    pub nu2: f64,
    /// Velocity activation threshold [m/s].
    pub v0: f64,
    /// Acceleration activation threshold [m/s^2].
    pub a0: f64,
    /// Sigmoid sharpness.
    pub k_sig: f64,
    /// Clearance margin subtracted from the minimal distance [m].
    pub d_safe: f64,
    /// Below this speed the orientation falls back to the last known heading.
    pub v_phi_floor: f64,
}

impl Default for EnvelopeParams {
    fn default() -> Self {
        Self {
            mu1: 0.3,
            mu2: 0.3,
            nu1: 0.05,
            nu2: 0.05,
            v0: 1.0,
            a0: 1.0,
            k_sig: 5.0,
            d_safe: 2.0,
            v_phi_floor: 0.1,
        }
    }
}

/// Inflated ellipse around one obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleEnvelope {
    pub center: Vector2<f64>,
    /// Orientation of the major axis [rad].
    pub phi: f64,
    /// Semi-axis along the heading [m], never below half the body length.
    pub a_axis: f64,
    /// Perpendicular semi-axis [m], never below half the body width.
    pub b_axis: f64,
}

impl ObstacleEnvelope {
    /// Boundary point at angle `sigma`.
    pub fn point(&self, sigma: f64) -> Vector2<f64> {
        let (sp, cp) = self.phi.sin_cos();
        let (ss, cs) = sigma.sin_cos();
        let local = Vector2::new(self.a_axis * cs, self.b_axis * ss);
        self.center + Vector2::new(cp * local.x - sp * local.y, sp * local.x + cp * local.y)
    }

    /// True when `p` lies strictly inside the ellipse.
    pub fn contains(&self, p: Vector2<f64>) -> bool {
        let (sp, cp) = self.phi.sin_cos();
        let d = p - self.center;
        let qx = cp * d.x + sp * d.y;
        let qy = -sp * d.x + cp * d.y;
        (qx / self.a_axis).powi(2) + (qy / self.b_axis).powi(2) < 1.0
    }
}

fn sigmoid(z: f64, k: f64) -> f64 {
    1.0 / (1.0 + (-k * z).exp())
}

/// Inflate the obstacle's body ellipse with its speed and acceleration.
///
/// The semi-axes grow with the velocity/acceleration components parallel and
/// perpendicular to the heading, gated by sigmoid activations; a static
/// obstacle collapses exactly to the rectangle-circumscribing ellipse
/// `(L/2, W/2)`.
pub fn envelope(ob: &ObstacleTrack, ep: &EnvelopeParams) -> ObstacleEnvelope {
    let speed = ob.vel.norm();
    let phi = if speed > ep.v_phi_floor { ob.vel.y.atan2(ob.vel.x) } else { ob.heading };
    let dir = Vector2::new(phi.cos(), phi.sin());
    let perp = Vector2::new(-dir.y, dir.x);

    let v_par = ob.vel.dot(&dir).abs();
    let v_perp = ob.vel.dot(&perp).abs();
    let a_par = ob.acc.dot(&dir).abs();
    let a_perp = ob.acc.dot(&perp).abs();

    let a_axis = 0.5 * ob.length
        + ep.mu1 * sigmoid(v_par - ep.v0, ep.k_sig) * v_par
        + ep.nu1 * sigmoid(a_par - ep.a0, ep.k_sig) * a_par;
    let b_axis = 0.5 * ob.width
        + ep.mu2 * sigmoid(v_perp - ep.v0, ep.k_sig) * v_perp
        + ep.nu2 * sigmoid(a_perp - ep.a0, ep.k_sig) * a_perp;

    ObstacleEnvelope { center: ob.pos, phi, a_axis, b_axis }
}

/// Distance from a point to the envelope boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clearance {
    /// Distance to the nearest boundary point, always >= 0.
    pub d_min: f64,
    /// Minimizing boundary angle in [0, 2 pi).
    pub sigma_star: f64,
    /// Set when the query point lies inside the ellipse.
    pub inside: bool,
}

const GRID: usize = 8;
const GOLDEN_TOL: f64 = 1e-4;
const INV_PHI: f64 = 0.618_033_988_749_894_8;

fn golden_section(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > GOLDEN_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    (mid, f(mid))
}

/// Minimal distance from `p` to the envelope boundary: a coarse scan over
/// 8 equally spaced boundary angles followed by golden-section refinement of
/// each bracketing local minimum.
pub fn min_clearance(p: Vector2<f64>, env: &ObstacleEnvelope) -> Clearance {
    let dist = |sigma: f64| (p - env.point(sigma)).norm();
    let step = TWO_PI / GRID as f64;
    let mut grid = [0.0f64; GRID];
    for (i, g) in grid.iter_mut().enumerate() {
        *g = dist(i as f64 * step);
    }
    let mut best_d = f64::INFINITY;
    let mut best_sigma = 0.0;
    for i in 0..GRID {
        let prev = grid[(i + GRID - 1) % GRID];
        let next = grid[(i + 1) % GRID];
        if grid[i] <= prev && grid[i] <= next {
            let center = i as f64 * step;
            let (sigma, d) = golden_section(&dist, center - step, center + step);
            if d < best_d {
                best_d = d;
                best_sigma = sigma;
            }
        }
    }
    let sigma_star = num_traits::Euclid::rem_euclid(&best_sigma, &TWO_PI);
    Clearance { d_min: best_d, sigma_star, inside: env.contains(p) }
}

/// Second-order barrier expansion for one obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierEvaluation {
    /// Barrier value `+-d_min - d_safe` (negative branch inside) [m].
    pub h: f64,
    /// First time derivative [m/s].
    pub h_dot: f64,
    /// Row multiplying the input `u = (delta, accel)` in `h_ddot`.
    pub a_row: Vector2<f64>,
    /// Drift plus `alpha1 h_dot + alpha2 h`.
    pub b_scalar: f64,
    pub sigma_star: f64,
    pub inside: bool,
}

/// Evaluate the F-HOCBF constraint pieces for one obstacle.
///
/// The surrogate used for the second derivative: the ego acceleration vector
/// is `a t_hat + v^2 delta / L n_hat` (small-angle steering bridge), the
/// obstacle runs at constant acceleration, and the envelope axes and
/// `sigma_star` are frozen over the step. The resulting constraint
/// `a_row . u + b_scalar >= 0` is affine in the tracking input.
pub fn barrier_terms(
    ego: &VehicleState,
    wheelbase: f64,
    ob: &ObstacleTrack,
    ep: &EnvelopeParams,
    alpha1: f64,
    alpha2: f64,
) -> BarrierEvaluation {
    let env = envelope(ob, ep);
    let cl = min_clearance(ego.position(), &env);
    let sign = if cl.inside { -1.0 } else { 1.0 };
    let h = sign * cl.d_min - ep.d_safe;

    let boundary = env.point(cl.sigma_star);
    let mut r = ego.position() - boundary;
    let d = r.norm();
    if d < 1e-3 {
        // Degenerate normal: fall back to the center-to-ego direction.
        let c = ego.position() - env.center;
        r = if c.norm() > 1e-9 { c / c.norm() } else { ego.heading_vec() };
    } else {
        r /= d;
    }
    let r_hat = r;
    let d_eff = d.max(1e-3);

    let r_dot = ego.velocity_vec() - ob.vel;
    let radial = r_hat.dot(&r_dot);
    let h_dot = sign * radial;

    let t_hat = ego.heading_vec();
    let n_hat = Vector2::new(-t_hat.y, t_hat.x);
    let a_row = Vector2::new(
        sign * (ego.v * ego.v / wheelbase) * r_hat.dot(&n_hat),
        sign * r_hat.dot(&t_hat),
    );
    let drift = sign * ((r_dot.norm_squared() - radial * radial) / d_eff - r_hat.dot(&ob.acc));
    let b_scalar = drift + alpha1 * h_dot + alpha2 * h;

    BarrierEvaluation { h, h_dot, a_row, b_scalar, sigma_star: cl.sigma_star, inside: cl.inside }
}

/// Weights and bounds of the corrective QP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSetup {
    /// Input-deviation weight, positive definite.
    pub p_weight: Matrix2<f64>,
    /// Relaxation weight Q > 0.
    pub q_relax: f64,
    /// Relaxation setpoint.
    pub beta0: f64,
    /// Total-input box, componentwise `u_min < u_max`.
    pub u_min: Vector2<f64>,
    pub u_max: Vector2<f64>,
}

impl Default for QpSetup {
    fn default() -> Self {
        Self {
            p_weight: Matrix2::identity(),
            q_relax: 100.0,
            beta0: 1.0,
            u_min: Vector2::new(-0.6109, -15.0),
            u_max: Vector2::new(0.6109, 15.0),
        }
    }
}

/// Solution of the corrective QP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSolution {
    pub u2: Vector2<f64>,
    pub beta: f64,
    pub objective: f64,
    /// Cleared when no KKT point satisfied every constraint.
    pub feasible: bool,
}

const FEAS_TOL: f64 = 1e-9;

fn qp_objective(z: &Vector3<f64>, qp: &QpSetup) -> f64 {
    let u2 = Vector2::new(z[0], z[1]);
    let db = z[2] - qp.beta0;
    u2.dot(&(qp.p_weight * u2)) + qp.q_relax * db * db
}

/// Minimize `u2' P u2 + Q (beta - beta0)^2` subject to every barrier row
/// (sharing one relaxation beta), the input box, and `beta >= 0`.
///
/// Solved exactly by enumerating active sets of size <= 3 over the
/// inequality constraints and keeping the feasible KKT point of least cost;
/// ties resolve to the lexicographically earliest active set.
pub fn solve_safety_qp(
    u1: Vector2<f64>,
    rows: &[(Vector2<f64>, f64)],
    qp: &QpSetup,
) -> QpSolution {
    debug_assert!(qp.q_relax > 0.0 && qp.u_min < qp.u_max);
    // Constraints g . z >= rhs over z = (u2_x, u2_y, beta).
    let mut cons: Vec<(Vector3<f64>, f64)> = Vec::with_capacity(rows.len() + 5);
    for (a_row, b_scalar) in rows {
        cons.push((Vector3::new(a_row.x, a_row.y, 1.0), -(a_row.dot(&u1) + b_scalar)));
    }
    cons.push((Vector3::new(1.0, 0.0, 0.0), qp.u_min.x - u1.x));
    cons.push((Vector3::new(-1.0, 0.0, 0.0), u1.x - qp.u_max.x));
    cons.push((Vector3::new(0.0, 1.0, 0.0), qp.u_min.y - u1.y));
    cons.push((Vector3::new(0.0, -1.0, 0.0), u1.y - qp.u_max.y));
    cons.push((Vector3::new(0.0, 0.0, 1.0), 0.0));

    let h = [
        [2.0 * qp.p_weight[(0, 0)], 2.0 * qp.p_weight[(0, 1)], 0.0],
        [2.0 * qp.p_weight[(1, 0)], 2.0 * qp.p_weight[(1, 1)], 0.0],
        [0.0, 0.0, 2.0 * qp.q_relax],
    ];
    let f = [0.0, 0.0, -2.0 * qp.q_relax * qp.beta0];

    let feasible_at = |z: &Vector3<f64>| {
        cons.iter().all(|(g, rhs)| g.dot(z) - rhs >= -FEAS_TOL * (1.0 + rhs.abs()))
    };
    let violation_at = |z: &Vector3<f64>| {
        cons.iter().map(|(g, rhs)| (rhs - g.dot(z)).max(0.0)).fold(0.0, f64::max)
    };

    let mut best: Option<(Vector3<f64>, f64)> = None;
    let mut least_bad: Option<(Vector3<f64>, f64)> = None;

    let consider = |active: &[usize], best: &mut Option<(Vector3<f64>, f64)>,
                        least_bad: &mut Option<(Vector3<f64>, f64)>| {
        let na = active.len();
        let dim = 3 + na;
        let mut kkt = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        for i in 0..3 {
            for j in 0..3 {
                kkt[(i, j)] = h[i][j];
            }
            rhs[i] = -f[i];
        }
        for (k, &ci) in active.iter().enumerate() {
            let (g, b) = cons[ci];
            for i in 0..3 {
                kkt[(i, 3 + k)] = -g[i];
                kkt[(3 + k, i)] = g[i];
            }
            rhs[3 + k] = b;
        }
        let sol = match kkt.lu().solve(&rhs) {
            Some(s) => s,
            None => return,
        };
        let z = Vector3::new(sol[0], sol[1], sol[2]);
        if !z.iter().all(|v| v.is_finite()) {
            return;
        }
        if (0..na).any(|k| sol[3 + k] < -FEAS_TOL) {
            return;
        }
        if feasible_at(&z) {
            let obj = qp_objective(&z, qp);
            if best.as_ref().map_or(true, |(_, b)| obj < *b - 1e-12) {
                *best = Some((z, obj));
            }
        } else {
            let v = violation_at(&z);
            if least_bad.as_ref().map_or(true, |(_, b)| v < *b) {
                *least_bad = Some((z, v));
            }
        }
    };

    let m = cons.len();
    consider(&[], &mut best, &mut least_bad);
    for i in 0..m {
        consider(&[i], &mut best, &mut least_bad);
        for j in (i + 1)..m {
            consider(&[i, j], &mut best, &mut least_bad);
            for k in (j + 1)..m {
                consider(&[i, j, k], &mut best, &mut least_bad);
            }
        }
    }

    match best {
        Some((z, obj)) => QpSolution {
            u2: Vector2::new(z[0], z[1]),
            beta: z[2],
            objective: obj,
            feasible: true,
        },
        None => {
            // Unreachable with a free relaxation; kept as a safety net.
            let z = least_bad.map(|(z, _)| z).unwrap_or(Vector3::new(0.0, 0.0, qp.beta0));
            QpSolution {
                u2: Vector2::new(z[0], z[1]),
                beta: z[2],
                objective: qp_objective(&z, qp),
                feasible: false,
            }
        }
    }
}

/// Full safety-filter configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub envelope: EnvelopeParams,
    pub qp: QpSetup,
    /// Class-K slopes of the second-order constraint.
    pub alpha1: f64,
    pub alpha2: f64,
    /// Obstacles beyond `2 * d_detect` are skipped.
    pub d_detect: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            envelope: EnvelopeParams::default(),
            qp: QpSetup::default(),
            alpha1: 2.0,
            alpha2: 4.0,
            d_detect: 6.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SafetyEvent {
    /// The QP needed relaxation beyond the setpoint.
    RelaxationExceeded { beta: f64 },
    /// The barrier value dropped below zero for some obstacle.
    MarginLost { obstacle: u32, h: f64 },
    /// No feasible KKT point was found.
    Infeasible,
    /// An envelope semi-axis changed by more than 5% in one step.
    EnvelopeJump { obstacle: u32 },
}

/// Per-obstacle barrier record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierRecord {
    pub obstacle: u32,
    pub h: f64,
    pub h_dot: f64,
    pub inside: bool,
}

/// Outcome of one filter evaluation.
#[derive(Debug, Clone)]
pub struct FilterReport {
    pub barriers: Vec<BarrierRecord>,
    pub u2: Vector2<f64>,
    pub beta: f64,
    /// Smallest barrier value among considered obstacles (infinite if none).
    pub min_h: f64,
    pub events: Vec<SafetyEvent>,
}

/// Tracks envelope axes between steps for the jump diagnostic.
pub type FilterMemory = BTreeMap<u32, (f64, f64)>;

/// Build one constraint row per nearby obstacle, solve the corrective QP and
/// return the clamped total command `u1 + u2*`.
pub fn filter(
    u1: &TrackingCommand,
    ego: &VehicleState,
    wheelbase: f64,
    obstacles: &[(u32, ObstacleTrack)],
    fp: &FilterParams,
    memory: &mut FilterMemory,
) -> (TrackingCommand, FilterReport) {
    let mut rows = Vec::new();
    let mut barriers = Vec::new();
    let mut events = Vec::new();
    let mut min_h = f64::INFINITY;
    let mut next_memory = FilterMemory::new();

    for (id, ob) in obstacles {
        if (ob.pos - ego.position()).norm() > 2.0 * fp.d_detect {
            continue;
        }
        let env = envelope(ob, &fp.envelope);
        if let Some(&(pa, pb)) = memory.get(id) {
            if (env.a_axis - pa).abs() > 0.05 * pa || (env.b_axis - pb).abs() > 0.05 * pb {
                events.push(SafetyEvent::EnvelopeJump { obstacle: *id });
            }
        }
        next_memory.insert(*id, (env.a_axis, env.b_axis));

        let be = barrier_terms(ego, wheelbase, ob, &fp.envelope, fp.alpha1, fp.alpha2);
        if be.h < min_h {
            min_h = be.h;
        }
        if be.h < 0.0 {
            events.push(SafetyEvent::MarginLost { obstacle: *id, h: be.h });
        }
        barriers.push(BarrierRecord { obstacle: *id, h: be.h, h_dot: be.h_dot, inside: be.inside });
        rows.push((be.a_row, be.b_scalar));
    }
    *memory = next_memory;

    let u1v = Vector2::new(u1.delta, u1.accel);
    let sol = solve_safety_qp(u1v, &rows, &fp.qp);
    if !sol.feasible {
        events.push(SafetyEvent::Infeasible);
    }
    if sol.beta > fp.qp.beta0 + 1e-6 {
        events.push(SafetyEvent::RelaxationExceeded { beta: sol.beta });
    }

    let total = u1v + sol.u2;
    let cmd = TrackingCommand {
        delta: total.x.clamp(fp.qp.u_min.x, fp.qp.u_max.x),
        accel: total.y.clamp(fp.qp.u_min.y, fp.qp.u_max.y),
    };
    let report = FilterReport { barriers, u2: sol.u2, beta: sol.beta, min_h, events };
    (cmd, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn static_ob(x: f64, y: f64) -> ObstacleTrack {
        ObstacleTrack {
            pos: Vector2::new(x, y),
            vel: Vector2::zeros(),
            acc: Vector2::zeros(),
            heading: 0.0,
            length: 4.42,
            width: 1.74,
        }
    }

    #[test]
    fn static_envelope_collapses_to_body_ellipse() {
        let env = envelope(&static_ob(0.0, 0.0), &EnvelopeParams::default());
        assert_eq!(env.a_axis, 2.21);
        assert_eq!(env.b_axis, 0.87);
        assert_eq!(env.phi, 0.0);
    }

    #[test]
    fn pure_longitudinal_motion_keeps_lateral_axis() {
        let mut ob = static_ob(0.0, 0.0);
        ob.vel = Vector2::new(12.0, 0.0);
        ob.acc = Vector2::new(2.0, 0.0);
        let env = envelope(&ob, &EnvelopeParams::default());
        assert_eq!(env.b_axis, 0.87);
        assert!(env.a_axis > 2.21);
    }

    #[test]
    fn velocity_inflation_scales_with_gain() {
        let mut ob = static_ob(0.0, 0.0);
        ob.vel = Vector2::new(15.0, 0.0);
        let ep = EnvelopeParams { v0: 1.0, k_sig: 5.0, ..EnvelopeParams::default() };
        let base = envelope(&ob, &ep).a_axis - 0.5 * ob.length;
        let doubled =
            envelope(&ob, &EnvelopeParams { mu1: 2.0 * ep.mu1, ..ep }).a_axis - 0.5 * ob.length;
        assert_relative_eq!(doubled, 2.0 * base, max_relative = 1e-9);
    }

    #[test]
    fn circular_envelope_clearance() {
        let env = ObstacleEnvelope { center: Vector2::zeros(), phi: 0.7, a_axis: 3.0, b_axis: 3.0 };
        let cl = min_clearance(Vector2::new(10.0, 0.0), &env);
        assert_relative_eq!(cl.d_min, 7.0, epsilon = 1e-6);
        assert!(!cl.inside);
    }

    #[test]
    fn major_axis_point_is_nearest() {
        let env = ObstacleEnvelope { center: Vector2::new(2.0, 0.0), phi: 0.0, a_axis: 4.0, b_axis: 1.0 };
        let cl = min_clearance(Vector2::new(2.0 + 4.0 + 5.0, 0.0), &env);
        assert_relative_eq!(cl.d_min, 5.0, epsilon = 1e-6);
        assert!(cl.sigma_star < 1e-3 || cl.sigma_star > TWO_PI - 1e-3);
    }

    #[test]
    fn inside_point_flagged_with_boundary_distance() {
        let env = ObstacleEnvelope { center: Vector2::zeros(), phi: 0.0, a_axis: 3.0, b_axis: 3.0 };
        let cl = min_clearance(Vector2::new(1.0, 0.0), &env);
        assert!(cl.inside);
        assert_relative_eq!(cl.d_min, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn static_pair_barrier_reduces_to_position_terms() {
        let ego = VehicleState::new(10.0, 0.0, core::f64::consts::PI, 0.0, 0.0);
        let ob = static_ob(0.0, 0.0);
        let ep = EnvelopeParams::default();
        let be = barrier_terms(&ego, 2.33, &ob, &ep, 2.0, 4.0);
        // d_min = 10 - 2.21, h = d_min - 2.
        assert_relative_eq!(be.h, 10.0 - 2.21 - 2.0, epsilon = 1e-4);
        assert_relative_eq!(be.h_dot, 0.0, epsilon = 1e-12);
        assert_relative_eq!(be.b_scalar, 4.0 * be.h, epsilon = 1e-9);
    }

    #[test]
    fn receding_ego_has_positive_h_dot() {
        let ego = VehicleState::new(10.0, 0.0, 0.0, 2.0, 0.0);
        let ob = static_ob(0.0, 0.0);
        let be = barrier_terms(&ego, 2.33, &ob, &EnvelopeParams::default(), 2.0, 4.0);
        assert_relative_eq!(be.h_dot, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn qp_without_rows_returns_setpoint() {
        let qp = QpSetup::default();
        let sol = solve_safety_qp(Vector2::zeros(), &[], &qp);
        assert!(sol.feasible);
        assert_eq!(sol.u2, Vector2::zeros());
        assert_relative_eq!(sol.beta, qp.beta0, epsilon = 1e-12);
        assert_relative_eq!(sol.objective, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn slack_row_leaves_command_untouched() {
        let qp = QpSetup::default();
        let rows = [(Vector2::new(1.0, 0.0), 5.0)]; // already satisfied at beta0
        let sol = solve_safety_qp(Vector2::zeros(), &rows, &qp);
        assert_eq!(sol.u2, Vector2::zeros());
        assert_relative_eq!(sol.beta, qp.beta0, epsilon = 1e-12);
    }

    #[test]
    fn single_binding_row_matches_hand_kkt() {
        // min u2x^2 + u2y^2 + 100 (b - 1)^2 s.t. u2x + b >= 3:
        // u2x = 100 (b - 1), u2x + b = 3 -> b = 103/101, u2x = 200/101.
        let qp = QpSetup {
            u_min: Vector2::new(-100.0, -100.0),
            u_max: Vector2::new(100.0, 100.0),
            ..QpSetup::default()
        };
        let rows = [(Vector2::new(1.0, 0.0), -3.0)];
        let sol = solve_safety_qp(Vector2::zeros(), &rows, &qp);
        assert!(sol.feasible);
        assert_relative_eq!(sol.u2.x, 200.0 / 101.0, epsilon = 1e-9);
        assert_relative_eq!(sol.u2.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(sol.beta, 103.0 / 101.0, epsilon = 1e-9);
    }

    #[test]
    fn filter_passthrough_without_obstacles() {
        let u1 = TrackingCommand { delta: 0.1, accel: 1.0 };
        let ego = VehicleState::new(0.0, 0.0, 0.0, 8.0, 0.0);
        let mut mem = FilterMemory::new();
        let (cmd, report) = filter(&u1, &ego, 2.33, &[], &FilterParams::default(), &mut mem);
        assert_eq!(cmd, u1);
        assert_eq!(report.u2, Vector2::zeros());
        assert!(report.events.is_empty());
        assert_eq!(report.min_h, f64::INFINITY);
    }

    #[test]
    fn far_obstacle_leaves_u2_zero() {
        let u1 = TrackingCommand { delta: 0.0, accel: 0.5 };
        let ego = VehicleState::new(0.0, 0.0, 0.0, 2.0, 0.0);
        let obstacles = [(7u32, static_ob(11.0, 0.0))];
        let mut mem = FilterMemory::new();
        let (cmd, report) =
            filter(&u1, &ego, 2.33, &obstacles, &FilterParams::default(), &mut mem);
        assert_eq!(cmd, u1);
        assert!(report.u2.norm() < 1e-9);
        assert_eq!(report.barriers.len(), 1);
        assert!(report.barriers[0].h > 0.0);
    }
}
