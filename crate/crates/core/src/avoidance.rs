//! Time-weighted repulsive potential field. Predicted positions of the ego
//! vehicle and every tracked obstacle over a short horizon generate a summed
//! repulsive force, which blends into the nominal steering and speed
//! commands.

// f64 math comes from the trait in pure no_std graphs; std graphs
// resolve it inherently and would flag the import.
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::Vector2;

use crate::dynamics::{wrap_angle, VehicleState};

/// Kinematic track of one dynamic obstacle (another vehicle).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleTrack {
    pub pos: Vector2<f64>,
    pub vel: Vector2<f64>,
    pub acc: Vector2<f64>,
    /// Last known heading [rad]; orientation fallback when the speed is too
    /// low to infer it from the velocity.
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepulsiveParams {
    /// Detection range [m]; no contribution beyond it.
    pub d_detect: f64,
    /// Prediction horizon H [s].
    pub horizon: f64,
    /// Prediction step [s].
    pub dt_pred: f64,
    /// Scale applied to the summed force.
    pub gain: f64,
}

impl Default for RepulsiveParams {
    fn default() -> Self {
        Self { d_detect: 6.0, horizon: 1.0, dt_pred: 0.1, gain: 50.0 }
    }
}

/// Summed repulsive force and bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepulsiveForce {
    pub force: Vector2<f64>,
    pub magnitude: f64,
    /// Set when some predicted distance had to be clamped away from zero.
    pub coincident_clamped: bool,
}

/// `F = gain * sum_o sum_tau w(tau) (1/d - 1/d_detect) (dp / d)` with
/// `w(tau) = (H - tau)/H`, constant-velocity prediction for ego and
/// obstacles, and contributions only for `0 < d < d_detect`.
pub fn repulsive_force(
    ego: &VehicleState,
    obstacles: &[ObstacleTrack],
    rp: &RepulsiveParams,
) -> RepulsiveForce {
    let ego_vel = ego.velocity_vec();
    let steps = (rp.horizon / rp.dt_pred).round() as usize;
    let mut force = Vector2::zeros();
    let mut clamped = false;
    for ob in obstacles {
        for i in 0..=steps {
            let tau = i as f64 * rp.dt_pred;
            let w = (rp.horizon - tau) / rp.horizon;
            let dp = (ego.position() + ego_vel * tau) - (ob.pos + ob.vel * tau);
            let mut d = dp.norm();
            if d >= rp.d_detect {
                continue;
            }
            if d < 1e-3 {
                clamped = true;
                d = 1e-3;
            }
            force += dp * (w * (1.0 / d - 1.0 / rp.d_detect) / d);
        }
    }
    force *= rp.gain;
    RepulsiveForce { force, magnitude: force.norm(), coincident_clamped: clamped }
}

/// Steering/speed pair after blending with the avoidance action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendedCommand {
    pub delta: f64,
    pub speed: f64,
    /// Blending factor used, `min(1, |F|)`.
    pub lambda: f64,
}

/// Blend the nominal `(delta, speed)` with the avoidance heading:
/// `delta' = (1-l) delta + l (atan2(Fy, Fx) - theta)`, `v' = (1 - l/2) v`.
pub fn blend_commands(
    delta: f64,
    speed: f64,
    theta: f64,
    force: Vector2<f64>,
    max_steer: f64,
) -> BlendedCommand {
    let lambda = force.norm().min(1.0);
    if lambda == 0.0 {
        return BlendedCommand { delta, speed, lambda };
    }
    let dtheta_avoid = wrap_angle(force.y.atan2(force.x) - theta);
    let blended = ((1.0 - lambda) * delta + lambda * dtheta_avoid).clamp(-max_steer, max_steer);
    BlendedCommand { delta: blended, speed: (1.0 - 0.5 * lambda) * speed, lambda }
}
