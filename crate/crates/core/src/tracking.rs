//! Real-time trajectory tracking: discrete LQR lateral control with an
//! iterated Riccati solve and curvature/speed feedforward, plus PD
//! longitudinal control with a near-stop override.

use core::fmt;

// f64 math comes from the trait in pure no_std graphs; std graphs
// resolve it inherently and would flag the import.
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{Matrix4, RowVector4, Vector4};

use crate::ddp::ReferenceTrajectory;
use crate::dynamics::{
    discretize, linearize_error_dynamics, wrap_angle, LateralErrorState, LinearSystem,
    VehicleParams, VehicleState, V_FLOOR,
};

/// LQR weighting and iteration limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrWeights {
    /// 4x4 state weight (diagonal in the default configuration).
    pub q: Matrix4<f64>,
    /// Scalar input weight, must be > 0.
    pub r: f64,
    pub max_iter: usize,
    /// Convergence threshold on the max-norm of the iterate difference.
    pub eps: f64,
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self {
            q: Matrix4::from_diagonal(&Vector4::new(0.5, 0.3, 1.0, 0.0)),
            r: 0.75,
            max_iter: 150,
            eps: 0.01,
        }
    }
}

/// Steering + acceleration pair produced by the tracking stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingCommand {
    /// Front steering angle [rad].
    pub delta: f64,
    /// Longitudinal acceleration [m/s^2].
    pub accel: f64,
}

impl TrackingCommand {
    pub fn zero() -> Self {
        Self { delta: 0.0, accel: 0.0 }
    }
}

/// PD longitudinal gains and near-stop override thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongitudinalParams {
    /// Proportional speed gain [1/s].
    pub kp: f64,
    /// Near-stop distance threshold [m].
    pub d_th: f64,
    /// Near-stop speed threshold [m/s].
    pub v_th: f64,
    /// Override when closing on the goal too fast [m/s^2].
    pub a_strong: f64,
    /// Override when rolling backwards near the goal [m/s^2].
    pub a_gentle: f64,
}

impl Default for LongitudinalParams {
    fn default() -> Self {
        Self { kp: 2.0, d_th: 1.0, v_th: 0.3, a_strong: -4.0, a_gentle: 1.0 }
    }
}

/// Converged (or iteration-capped) Riccati solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiSolution {
    /// Fixed-point cost-to-go matrix.
    pub p: Matrix4<f64>,
    /// Feedback gain row: `delta = -k x + delta_ff`.
    pub k: RowVector4<f64>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrackingError {
    EmptyTrajectory,
}

impl fmt::Display for TrackingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyTrajectory => write!(f, "reference trajectory is empty"),
        }
    }
}

/// Tracking errors plus the matched reference index and remaining distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingErrors {
    pub err: LateralErrorState,
    /// Index of the nearest reference point.
    pub nearest: usize,
    /// Arc length remaining to the trajectory end [m].
    pub dist_to_goal: f64,
}

/// Half-width of the local nearest-point search window, in indices.
pub const SEARCH_WINDOW: usize = 20;

/// Locate the nearest reference point around `k_hint` and derive the lateral
/// error state.
///
/// `e_cg` is the signed lateral offset (left of path positive), `theta_e`
/// the wrapped heading difference; their rates come from the current speed,
/// yaw rate and the reference curvature.
pub fn compute_tracking_errors(
    x: &VehicleState,
    traj: &ReferenceTrajectory,
    k_hint: usize,
) -> Result<TrackingErrors, TrackingError> {
    if traj.states.is_empty() {
        return Err(TrackingError::EmptyTrajectory);
    }
    let n = traj.states.len();
    let lo = k_hint.saturating_sub(SEARCH_WINDOW);
    let hi = (k_hint + SEARCH_WINDOW).min(n - 1);
    let p = x.position();
    let mut best = lo;
    let mut best_d2 = f64::INFINITY;
    for j in lo..=hi {
        let d2 = (p - traj.states[j].position()).norm_squared();
        if d2 < best_d2 {
            best_d2 = d2;
            best = j;
        }
    }
    let r = &traj.states[best];
    let tangent = r.heading_vec();
    let normal = nalgebra::Vector2::new(-tangent.y, tangent.x);
    let offset = p - r.position();

    let e_cg = offset.dot(&normal);
    let theta_e = wrap_angle(x.theta - r.theta);
    let kappa = traj.curvature[best];
    let err = LateralErrorState {
        e_cg,
        e_cg_dot: x.v * theta_e.sin(),
        theta_e,
        theta_e_dot: x.omega - x.v * kappa,
    };

    let along = offset.dot(&tangent);
    let dist_to_goal = (traj.arc_length_from(best) - along).max(0.0);
    Ok(TrackingErrors { err, nearest: best, dist_to_goal })
}

/// Iterate the discrete Riccati recursion from `P0 = Q` to its fixed point.
///
/// Stops when the max-norm difference between iterates drops below `eps`;
/// if `max_iter` is reached the last iterate is returned with
/// `converged = false`. Iterates are symmetrized each pass.
pub fn solve_riccati(sys: &LinearSystem, w: &LqrWeights) -> RiccatiSolution {
    let a = sys.ad;
    let b = sys.bd;
    let mut p = w.q;
    let mut converged = false;
    let mut iterations = w.max_iter;
    for i in 0..w.max_iter {
        let pa = p * a;
        let pb = p * b;
        let s = w.r + (b.transpose() * pb)[(0, 0)];
        debug_assert!(s > 0.0, "R + B'PB must stay positive with R > 0, Q >= 0");
        let next = w.q + a.transpose() * pa - (a.transpose() * pb) * (pb.transpose() * a) / s;
        let next = (next + next.transpose()) * 0.5;
        let diff = (next - p).abs().max();
        p = next;
        if diff < w.eps {
            converged = true;
            iterations = i + 1;
            break;
        }
    }
    let pb = p * b;
    let s = w.r + (b.transpose() * pb)[(0, 0)];
    let k = (pb.transpose() * a) / s;
    RiccatiSolution { p, k, converged, iterations }
}

/// Curvature/speed feedforward steering.
///
/// `delta_ff = L k + k_v v^2 k - K_th (l_r k - l_f m v^2 k / (2 c_r L))`
/// with `k_v = l_r m / (2 c_f L) - l_f m / (2 c_r L)`; `K_th` is the
/// heading-error component of the LQR gain row. The velocity-dependent
/// terms flip sign in reverse.
pub fn feedforward_steer(
    p: &VehicleParams,
    v: f64,
    kappa: f64,
    k_gain: &RowVector4<f64>,
    reverse: bool,
) -> f64 {
    let l = p.wheelbase;
    let kv = p.lr * p.m / (2.0 * p.cf * l) - p.lf * p.m / (2.0 * p.cr * l);
    let sign = if reverse { -1.0 } else { 1.0 };
    let k_th = k_gain[2];
    l * kappa + sign * kv * v * v * kappa
        - k_th * (p.lr * kappa - sign * p.lf * p.m * v * v * kappa / (2.0 * p.cr * l))
}

/// `delta = clamp(-K x + delta_ff, +-max_steer)`.
pub fn lateral_control(
    err: &LateralErrorState,
    k_gain: &RowVector4<f64>,
    dff: f64,
    max_steer: f64,
) -> f64 {
    let fb = -(k_gain * err.as_vector())[(0, 0)];
    (fb + dff).clamp(-max_steer, max_steer)
}

/// PD speed tracking with the near-stop override, clamped to `+-max_accel`.
pub fn longitudinal_control(
    v: f64,
    v_ref: f64,
    d_goal: f64,
    lp: &LongitudinalParams,
    max_accel: f64,
) -> f64 {
    let a = if d_goal < lp.d_th && v > lp.v_th {
        lp.a_strong
    } else if d_goal < lp.d_th && v < -lp.v_th {
        lp.a_gentle
    } else {
        lp.kp * (v_ref - v)
    };
    a.clamp(-max_accel, max_accel)
}

/// Speed change [m/s] beyond which the cached gain is recomputed.
pub const GAIN_RESOLVE_DV: f64 = 0.5;

/// Per-vehicle controller context: nearest-point hint plus a speed-scheduled
/// Riccati gain cache.
#[derive(Debug, Clone)]
pub struct ControllerContext {
    pub k_hint: usize,
    cached: Option<(f64, RiccatiSolution)>,
    /// Forces a Riccati solve on every query when set.
    pub solve_every_step: bool,
}

impl ControllerContext {
    pub fn new(solve_every_step: bool) -> Self {
        Self { k_hint: 0, cached: None, solve_every_step }
    }

    /// Gain for the current speed, reusing the cached solution while the
    /// speed stays within [`GAIN_RESOLVE_DV`] of the last solve.
    pub fn gain(
        &mut self,
        params: &VehicleParams,
        weights: &LqrWeights,
        ts: f64,
        v: f64,
        tustin_input: bool,
    ) -> RiccatiSolution {
        let v_eff = v.max(V_FLOOR);
        if !self.solve_every_step {
            if let Some((v_last, sol)) = self.cached {
                if (v_eff - v_last).abs() <= GAIN_RESOLVE_DV {
                    return sol;
                }
            }
        }
        let cont = linearize_error_dynamics(params, v_eff);
        // ts > 0 always holds here; discretize cannot fail for these models.
        let sys = discretize(&cont, ts, tustin_input).expect("lateral model discretization");
        let sol = solve_riccati(&sys, weights);
        self.cached = Some((v_eff, sol));
        sol
    }
}
