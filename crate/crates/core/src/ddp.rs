//! Offline trajectory optimization with differential dynamic programming:
//! a regularized backward value expansion and a line-searched forward
//! rollout over the 5-state planning model, plus the post-hoc constant-speed
//! reparameterization used to normalize reference trajectories.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

// f64 math comes from the trait in pure no_std graphs; std graphs
// resolve it inherently and would flag the import.
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{Matrix2, Matrix2x5, Matrix5, Vector2, Vector5};

use crate::dynamics::{
    planning_jacobians, step_planning_model, wrap_angle, PlanningControl, VehicleState, V_FLOOR,
};

/// Static soft-penalty disc shaping offline plans around fixed geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyDisc {
    pub center: Vector2<f64>,
    pub radius: f64,
    pub weight: f64,
}

/// One trajectory-optimization instance.
#[derive(Debug, Clone)]
pub struct DdpProblem {
    pub x0: VehicleState,
    /// Horizon steps (N controls, N+1 states).
    pub n: usize,
    /// Step duration [s].
    pub h: f64,
    /// Running state weight on the deviation from `goal`.
    pub q: Matrix5<f64>,
    /// Running control weight, strictly positive definite.
    pub r: Matrix2<f64>,
    /// Terminal state weight.
    pub qf: Matrix5<f64>,
    pub goal: VehicleState,
    pub obstacles: Vec<PenaltyDisc>,
    pub max_speed: f64,
    pub max_accel: f64,
}

/// Difference of two planning states with the heading taken on the circle.
pub fn state_diff(x: &VehicleState, y: &VehicleState) -> Vector5<f64> {
    Vector5::new(
        x.px - y.px,
        x.py - y.py,
        wrap_angle(x.theta - y.theta),
        x.v - y.v,
        x.omega - y.omega,
    )
}

/// Time-indexed reference produced by the planner.
///
/// States and controls satisfy the forward-Euler planning map exactly:
/// `states[k+1] = step_planning_model(states[k], controls[k], h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub states: Vec<VehicleState>,
    pub controls: Vec<PlanningControl>,
    /// Reference curvature per index, `omega / max(v, V_FLOOR)` [1/m].
    pub curvature: Vec<f64>,
    /// Reference speed per index [m/s].
    pub v_ref: Vec<f64>,
    /// Objective value of the producing optimization.
    pub cost: f64,
    /// Step duration [s].
    pub h: f64,
}

impl ReferenceTrajectory {
    /// Number of control intervals.
    pub fn horizon(&self) -> usize {
        self.controls.len()
    }

    /// Total duration [s].
    pub fn duration(&self) -> f64 {
        self.h * self.controls.len() as f64
    }

    /// Polyline arc length from `idx` to the final state [m].
    pub fn arc_length_from(&self, idx: usize) -> f64 {
        let mut s = 0.0;
        for w in self.states[idx.min(self.states.len() - 1)..].windows(2) {
            s += (w[1].position() - w[0].position()).norm();
        }
        s
    }

    /// Total polyline arc length [m].
    pub fn arc_length(&self) -> f64 {
        self.arc_length_from(0)
    }
}

/// Backward-pass output: feedforward corrections, feedback gains and the
/// predicted cost-improvement pair.
#[derive(Debug, Clone)]
pub struct BackwardPassResult {
    pub k_ff: Vec<Vector2<f64>>,
    pub k_fb: Vec<Matrix2x5<f64>>,
    /// Linear term of the predicted improvement, `sum k' Q_u` (negative).
    pub dv1: f64,
    /// Quadratic term, `1/2 sum k' Q_uu k`.
    pub dv2: f64,
    pub mu: f64,
}

impl BackwardPassResult {
    /// Model-predicted cost decrease for step size `a`.
    pub fn predicted_decrease(&self, a: f64) -> f64 {
        -(a * self.dv1 + a * a * self.dv2)
    }
}

/// Stage cost value and its exact first/second derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct StageDerivatives {
    pub l: f64,
    pub lx: Vector5<f64>,
    pub lu: Vector2<f64>,
    pub lxx: Matrix5<f64>,
    pub luu: Matrix2<f64>,
    pub lux: Matrix2x5<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DdpError {
    /// `Q_uu + mu I` stayed indefinite up to the regularization cap.
    NotPositiveDefinite { mu: f64 },
    /// A rollout produced non-finite states (treated as line-search failure
    /// where recoverable).
    NonFiniteRollout,
    /// Candidate costs increased for five consecutive iterations.
    Diverged { iterations: usize, cost: f64 },
    InvalidProblem(&'static str),
}

impl fmt::Display for DdpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotPositiveDefinite { mu } => {
                write!(f, "Q_uu not positive definite at mu = {mu:e}")
            }
            Self::NonFiniteRollout => write!(f, "forward rollout produced non-finite states"),
            Self::Diverged { iterations, cost } => {
                write!(f, "cost increasing for 5 iterations (iter {iterations}, J = {cost:.6})")
            }
            Self::InvalidProblem(what) => write!(f, "invalid problem: {what}"),
        }
    }
}

/// Convergence threshold on the accepted cost improvement.
pub const TOL_J: f64 = 1e-6;
/// Smallest line-search step size.
pub const A_MIN: f64 = 1e-4;
/// Iteration cap for [`plan`].
pub const ITER_MAX: usize = 200;
/// Initial Levenberg-Marquardt regularization.
pub const MU_INIT: f64 = 1e-6;
/// Regularization cap.
pub const MU_MAX: f64 = 1e10;
/// Accept a step when actual/predicted improvement exceeds this ratio.
pub const DECREASE_RATIO: f64 = 0.1;

fn disc_penalty(p: Vector2<f64>, disc: &PenaltyDisc) -> (f64, Vector2<f64>, nalgebra::Matrix2<f64>) {
    let q = p - disc.center;
    let d = q.norm();
    if d >= disc.radius {
        return (0.0, Vector2::zeros(), Matrix2::zeros());
    }
    let pen = disc.radius - d;
    let val = disc.weight * pen * pen;
    if d < 1e-9 {
        // Exactly at the center the direction is undefined; the value is the
        // plateau maximum, so a zero gradient is consistent.
        return (val, Vector2::zeros(), Matrix2::zeros());
    }
    let dir = q / d;
    let grad = dir * (-2.0 * disc.weight * pen);
    let dirdir = dir * dir.transpose();
    let hess = dirdir * (2.0 * disc.weight)
        - (Matrix2::identity() - dirdir) * (2.0 * disc.weight * pen / d);
    (val, grad, hess)
}

/// Running cost `1/2 ((x-goal)' Q (x-goal) + u' R u) h` plus obstacle
/// penalties `w (r - d)^2` inside each disc, with exact derivatives.
pub fn stage_cost(x: &VehicleState, u: &PlanningControl, prob: &DdpProblem) -> StageDerivatives {
    let dx = state_diff(x, &prob.goal);
    let uv = Vector2::new(u.a, u.alpha);
    let qdx = prob.q * dx;
    let ru = prob.r * uv;
    let mut l = 0.5 * (dx.dot(&qdx) + uv.dot(&ru)) * prob.h;
    let mut lx = qdx * prob.h;
    let mut lxx = prob.q * prob.h;
    for disc in &prob.obstacles {
        let (val, grad, hess) = disc_penalty(x.position(), disc);
        l += val;
        lx[0] += grad[0];
        lx[1] += grad[1];
        lxx[(0, 0)] += hess[(0, 0)];
        lxx[(0, 1)] += hess[(0, 1)];
        lxx[(1, 0)] += hess[(1, 0)];
        lxx[(1, 1)] += hess[(1, 1)];
    }
    StageDerivatives { l, lx, lu: ru * prob.h, lxx, luu: prob.r * prob.h, lux: Matrix2x5::zeros() }
}

fn stage_cost_value(x: &VehicleState, u: &PlanningControl, prob: &DdpProblem) -> f64 {
    let dx = state_diff(x, &prob.goal);
    let uv = Vector2::new(u.a, u.alpha);
    let mut l = 0.5 * (dx.dot(&(prob.q * dx)) + uv.dot(&(prob.r * uv))) * prob.h;
    for disc in &prob.obstacles {
        let q = x.position() - disc.center;
        let d = q.norm();
        if d < disc.radius {
            let pen = disc.radius - d;
            l += disc.weight * pen * pen;
        }
    }
    l
}

/// Terminal cost `1/2 (x-goal)' Qf (x-goal)` with derivatives.
pub fn terminal_cost(x: &VehicleState, prob: &DdpProblem) -> (f64, Vector5<f64>, Matrix5<f64>) {
    let dx = state_diff(x, &prob.goal);
    let qdx = prob.qf * dx;
    (0.5 * dx.dot(&qdx), qdx, prob.qf)
}

/// Total objective of a state/control sequence.
pub fn trajectory_cost(
    states: &[VehicleState],
    controls: &[PlanningControl],
    prob: &DdpProblem,
) -> f64 {
    let mut cost = 0.0;
    for (x, u) in states.iter().zip(controls.iter()) {
        cost += stage_cost_value(x, u, prob);
    }
    cost + terminal_cost(states.last().expect("non-empty trajectory"), prob).0
}

fn finish(
    states: Vec<VehicleState>,
    controls: Vec<PlanningControl>,
    cost: f64,
    h: f64,
) -> ReferenceTrajectory {
    let curvature: Vec<f64> =
        states.iter().map(|s| s.omega / s.v.max(V_FLOOR)).collect();
    let v_ref: Vec<f64> = states.iter().map(|s| s.v).collect();
    ReferenceTrajectory { states, controls, curvature, v_ref, cost, h }
}

/// Integrate a control sequence from `prob.x0` through the planning model.
pub fn rollout_from_controls(
    controls: &[PlanningControl],
    prob: &DdpProblem,
) -> Result<ReferenceTrajectory, DdpError> {
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(prob.x0);
    for u in controls {
        let next = step_planning_model(states.last().unwrap(), u, prob.h, prob.max_speed)
            .map_err(|_| DdpError::NonFiniteRollout)?;
        if !next.is_finite() {
            return Err(DdpError::NonFiniteRollout);
        }
        states.push(next);
    }
    let cost = trajectory_cost(&states, controls, prob);
    Ok(finish(states, controls.to_vec(), cost, prob.h))
}

/// Backward value expansion along `traj` with regularization `mu`.
///
/// Fails with the offending `mu` when `Q_uu + mu I` loses positive
/// definiteness so the caller can escalate the regularization.
pub fn backward_pass(
    traj: &ReferenceTrajectory,
    prob: &DdpProblem,
    mu: f64,
) -> Result<BackwardPassResult, DdpError> {
    let n = traj.controls.len();
    let (_, mut vx, mut vxx) = terminal_cost(&traj.states[n], prob);
    let mut k_ff = vec![Vector2::zeros(); n];
    let mut k_fb = vec![Matrix2x5::zeros(); n];
    let mut dv1 = 0.0;
    let mut dv2 = 0.0;
    let reg = Matrix2::identity() * mu;
    for k in (0..n).rev() {
        let sd = stage_cost(&traj.states[k], &traj.controls[k], prob);
        let (a, b) = planning_jacobians(&traj.states[k], &traj.controls[k], prob.h, prob.max_speed);
        let qx = sd.lx + a.transpose() * vx;
        let qu = sd.lu + b.transpose() * vx;
        let qxx = sd.lxx + a.transpose() * vxx * a;
        let quu = sd.luu + b.transpose() * vxx * b;
        let qux = sd.lux + b.transpose() * vxx * a;

        let chol = nalgebra::Cholesky::new(quu + reg)
            .ok_or(DdpError::NotPositiveDefinite { mu })?;
        let kff = -chol.solve(&qu);
        let kfb = -chol.solve(&qux);

        dv1 += kff.dot(&qu);
        dv2 += 0.5 * kff.dot(&(quu * kff));

        vx = qx + kfb.transpose() * (quu * kff) + kfb.transpose() * qu + qux.transpose() * kff;
        vxx = qxx
            + kfb.transpose() * quu * kfb
            + kfb.transpose() * qux
            + qux.transpose() * kfb;
        vxx = (vxx + vxx.transpose()) * 0.5;

        k_ff[k] = kff;
        k_fb[k] = kfb;
    }
    Ok(BackwardPassResult { k_ff, k_fb, dv1, dv2, mu })
}

/// Re-integrate with `u_k + a k_ff[k] + K_fb[k] (x_k_new - x_k)`, clamping
/// the longitudinal component to `+-max_accel`.
pub fn forward_rollout(
    traj: &ReferenceTrajectory,
    bp: &BackwardPassResult,
    a: f64,
    prob: &DdpProblem,
) -> Result<ReferenceTrajectory, DdpError> {
    let n = traj.controls.len();
    let mut states = Vec::with_capacity(n + 1);
    let mut controls = Vec::with_capacity(n);
    states.push(traj.states[0]);
    for k in 0..n {
        let dx = state_diff(&states[k], &traj.states[k]);
        let base = Vector2::new(traj.controls[k].a, traj.controls[k].alpha);
        let uv = base + bp.k_ff[k] * a + bp.k_fb[k] * dx;
        let u = PlanningControl::new(uv[0].clamp(-prob.max_accel, prob.max_accel), uv[1]);
        if !u.is_finite() {
            return Err(DdpError::NonFiniteRollout);
        }
        let next = step_planning_model(&states[k], &u, prob.h, prob.max_speed)
            .map_err(|_| DdpError::NonFiniteRollout)?;
        if !next.is_finite() {
            return Err(DdpError::NonFiniteRollout);
        }
        controls.push(u);
        states.push(next);
    }
    let cost = trajectory_cost(&states, &controls, prob);
    if !cost.is_finite() {
        return Err(DdpError::NonFiniteRollout);
    }
    Ok(finish(states, controls, cost, prob.h))
}

fn validate(prob: &DdpProblem, u_init: &[PlanningControl]) -> Result<(), DdpError> {
    if prob.n == 0 {
        return Err(DdpError::InvalidProblem("horizon must be >= 1"));
    }
    if !(prob.h > 0.0) {
        return Err(DdpError::InvalidProblem("step duration must be > 0"));
    }
    if u_init.len() != prob.n {
        return Err(DdpError::InvalidProblem("seed length must equal the horizon"));
    }
    if u_init.iter().any(|u| !u.is_finite()) {
        return Err(DdpError::InvalidProblem("seed controls must be finite"));
    }
    if nalgebra::Cholesky::new(prob.r).is_none() {
        return Err(DdpError::InvalidProblem("R must be positive definite"));
    }
    Ok(())
}

/// Full DDP loop: alternate [`backward_pass`] and line-searched
/// [`forward_rollout`] until the cost improvement drops below [`TOL_J`],
/// the step size collapses, or [`ITER_MAX`] is hit. Returns the best
/// trajectory found; deterministic for fixed inputs.
pub fn plan(prob: &DdpProblem, u_init: &[PlanningControl]) -> Result<ReferenceTrajectory, DdpError> {
    validate(prob, u_init)?;
    let mut traj = rollout_from_controls(u_init, prob)?;
    let mut best = traj.clone();
    let mut mu = MU_INIT;
    let mut rising_streak = 0usize;

    for iter in 0..ITER_MAX {
        let bp = loop {
            match backward_pass(&traj, prob, mu) {
                Ok(bp) => break bp,
                Err(DdpError::NotPositiveDefinite { .. }) => {
                    mu *= 10.0;
                    if mu > MU_MAX {
                        return Err(DdpError::NotPositiveDefinite { mu });
                    }
                }
                Err(e) => return Err(e),
            }
        };

        // Stationary: the quadratic model predicts nothing left to gain.
        if bp.predicted_decrease(1.0).max(0.0) < TOL_J {
            return Ok(best);
        }

        let mut accepted: Option<(ReferenceTrajectory, f64, f64)> = None;
        let mut best_candidate = f64::INFINITY;
        let mut a = 1.0;
        while a >= A_MIN {
            if let Ok(cand) = forward_rollout(&traj, &bp, a, prob) {
                best_candidate = best_candidate.min(cand.cost);
                let actual = traj.cost - cand.cost;
                let predicted = bp.predicted_decrease(a);
                if actual >= 0.0 && (predicted <= 0.0 || actual / predicted > DECREASE_RATIO) {
                    accepted = Some((cand, a, actual));
                    break;
                }
            }
            a *= 0.5;
        }

        match accepted {
            Some((cand, step, actual)) => {
                rising_streak = 0;
                traj = cand;
                if traj.cost < best.cost {
                    best = traj.clone();
                }
                if step == 1.0 {
                    mu *= 0.5;
                }
                if actual < TOL_J {
                    return Ok(best);
                }
            }
            None => {
                if best_candidate > traj.cost {
                    rising_streak += 1;
                    if rising_streak >= 5 {
                        return Err(DdpError::Diverged { iterations: iter + 1, cost: traj.cost });
                    }
                } else {
                    // Candidates neither improve sufficiently nor worsen:
                    // stationary up to the line-search resolution.
                    return Ok(best);
                }
                mu *= 10.0;
                if mu > MU_MAX {
                    return Ok(best);
                }
            }
        }
    }
    Ok(best)
}

/// Reparameterize a converged trajectory to a constant reference speed.
///
/// The geometric path is resampled at `v_norm * h_out` spacing and re-rolled
/// through the planning model with zero longitudinal acceleration; the
/// angular acceleration tracks the path curvature (sampled at interval
/// midpoints) plus a small curvature-space correction that keeps the
/// open-loop Euler roll glued to the source polyline. The result is
/// dynamically consistent like any planner output.
pub fn normalize_constant_speed(
    traj: &ReferenceTrajectory,
    v_norm: f64,
    h_out: f64,
    max_speed: f64,
) -> ReferenceTrajectory {
    // Cumulative arc length of the source polyline.
    let m = traj.states.len();
    let mut cum = Vec::with_capacity(m);
    cum.push(0.0);
    for w in traj.states.windows(2) {
        let d = (w[1].position() - w[0].position()).norm();
        cum.push(cum.last().unwrap() + d);
    }
    let total = *cum.last().unwrap();
    let ds = v_norm * h_out;
    let n = ((total / ds).ceil() as usize).max(1);

    let bracket = |s: f64| -> (usize, f64) {
        let s = s.clamp(0.0, total);
        let mut i = match cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        if i >= m - 1 {
            i = m - 2;
        }
        let span = cum[i + 1] - cum[i];
        let w = if span > 1e-12 { ((s - cum[i]) / span).clamp(0.0, 1.0) } else { 0.0 };
        (i, w)
    };
    let kappa_at = |s: f64| -> f64 {
        let (i, w) = bracket(s);
        traj.curvature[i] * (1.0 - w) + traj.curvature[i + 1] * w
    };
    let point_at = |s: f64| -> (Vector2<f64>, f64) {
        let (i, w) = bracket(s);
        let a = traj.states[i].position();
        let b = traj.states[i + 1].position();
        let p = a + (b - a) * w;
        let d = b - a;
        let theta = if d.norm() > 1e-9 { d.y.atan2(d.x) } else { traj.states[i].theta };
        (p, theta)
    };

    // Lateral/heading feedback gains in curvature space.
    const K_LAT: f64 = 0.1;
    const K_HEAD: f64 = 0.4;

    let (p0, _) = point_at(0.0);
    let mut states = Vec::with_capacity(n + 1);
    states.push(VehicleState::new(
        p0.x,
        p0.y,
        traj.states[0].theta,
        v_norm,
        v_norm * kappa_at(0.5 * ds),
    ));
    let mut controls = Vec::with_capacity(n);
    for k in 0..n {
        let x = *states.last().unwrap();
        let s_here = k as f64 * ds;
        let (p_ref, th_ref) = point_at(s_here);
        let normal = Vector2::new(-th_ref.sin(), th_ref.cos());
        let e_lat = (x.position() - p_ref).dot(&normal);
        let th_err = wrap_angle(x.theta - th_ref);
        let kappa_cmd = kappa_at(s_here + 0.5 * ds) - K_LAT * e_lat - K_HEAD * th_err;
        let omega_cmd = v_norm * kappa_cmd;
        let u = PlanningControl::new(0.0, (omega_cmd - x.omega) / h_out);
        let next =
            step_planning_model(&x, &u, h_out, max_speed).expect("normalization rollout");
        controls.push(u);
        states.push(next);
    }
    let mut out = finish(states, controls, traj.cost, h_out);
    out.v_ref = vec![v_norm; n + 1];
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_problem(x0: VehicleState, goal: VehicleState, n: usize) -> DdpProblem {
        DdpProblem {
            x0,
            n,
            h: 1.0,
            q: Matrix5::identity(),
            r: Matrix2::identity(),
            qf: Matrix5::identity(),
            goal,
            obstacles: Vec::new(),
            max_speed: 100.0,
            max_accel: 100.0,
        }
    }

    #[test]
    fn stage_cost_zero_at_goal() {
        let goal = VehicleState::new(1.0, 2.0, 0.3, 4.0, 0.0);
        let prob = unit_problem(goal, goal, 1);
        let sd = stage_cost(&goal, &PlanningControl::zero(), &prob);
        assert_eq!(sd.l, 0.0);
        assert_eq!(sd.lx, Vector5::zeros());
        assert_eq!(sd.lu, Vector2::zeros());
    }

    #[test]
    fn stage_cost_unit_deviation() {
        let goal = VehicleState::new(0.0, 0.0, 0.0, 0.0, 0.0);
        let prob = unit_problem(goal, goal, 1);
        let x = VehicleState::new(1.0, 0.0, 0.0, 0.0, 0.0);
        let sd = stage_cost(&x, &PlanningControl::zero(), &prob);
        assert_relative_eq!(sd.l, 0.5);
    }

    #[test]
    fn disc_penalty_zero_outside_radius() {
        let disc = PenaltyDisc { center: Vector2::new(0.0, 0.0), radius: 2.0, weight: 7.0 };
        let (v, g, _) = disc_penalty(Vector2::new(3.0, 0.0), &disc);
        assert_eq!(v, 0.0);
        assert_eq!(g, Vector2::zeros());
        let (v, g, _) = disc_penalty(Vector2::new(1.0, 0.0), &disc);
        assert_relative_eq!(v, 7.0);
        assert_relative_eq!(g[0], -14.0);
    }

    #[test]
    fn plan_from_goal_at_rest_converges_immediately() {
        let goal = VehicleState::new(0.0, 0.0, 0.0, 0.0, 0.0);
        let prob = unit_problem(goal, goal, 10);
        let traj = plan(&prob, &vec![PlanningControl::zero(); 10]).unwrap();
        assert_eq!(traj.cost, 0.0);
        assert!(traj.controls.iter().all(|u| u.a == 0.0 && u.alpha == 0.0));
    }

    #[test]
    fn rollout_is_dynamically_consistent() {
        let x0 = VehicleState::new(0.0, 0.0, 0.2, 3.0, 0.1);
        let goal = VehicleState::new(10.0, 2.0, 0.0, 0.0, 0.0);
        let prob = unit_problem(x0, goal, 20);
        let seed: Vec<_> =
            (0..20).map(|k| PlanningControl::new(0.1 * (k % 3) as f64, -0.02)).collect();
        let traj = rollout_from_controls(&seed, &prob).unwrap();
        for k in 0..traj.horizon() {
            let next = step_planning_model(&traj.states[k], &traj.controls[k], prob.h, prob.max_speed)
                .unwrap();
            assert_eq!(next, traj.states[k + 1]);
        }
    }

    #[test]
    fn invalid_problems_rejected() {
        let goal = VehicleState::new(0.0, 0.0, 0.0, 0.0, 0.0);
        let mut prob = unit_problem(goal, goal, 4);
        assert!(matches!(
            plan(&prob, &vec![PlanningControl::zero(); 3]),
            Err(DdpError::InvalidProblem(_))
        ));
        prob.r = Matrix2::zeros();
        assert!(matches!(
            plan(&prob, &vec![PlanningControl::zero(); 4]),
            Err(DdpError::InvalidProblem(_))
        ));
    }

    #[test]
    fn normalization_holds_constant_speed() {
        // A gently curving source trajectory.
        let x0 = VehicleState::new(0.0, 0.0, 0.0, 6.0, 0.05);
        let prob = unit_problem(x0, x0, 50);
        let seed = vec![PlanningControl::new(0.2, 0.001); 50];
        let traj = rollout_from_controls(&seed, &prob).unwrap();
        let norm = normalize_constant_speed(&traj, 8.0, 0.02, 18.05);
        assert!(norm.states.iter().all(|s| (s.v - 8.0).abs() < 1e-12));
        assert!(norm.v_ref.iter().all(|v| *v == 8.0));
        let src_len = traj.arc_length();
        let out_len = norm.arc_length();
        assert_relative_eq!(src_len, out_len, max_relative = 0.02);
    }
}
