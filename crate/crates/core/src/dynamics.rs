//! Vehicle models: the 5-state planar planning model, the 4-state lateral
//! error dynamics linearized about a reference, discretization, and an
//! oriented-rectangle collision test.

use core::fmt;

// f64 math comes from the trait in pure no_std graphs; std graphs
// resolve it inherently and would flag the import.
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{Matrix4, SMatrix, Vector2, Vector4};

/// Speed below which the 1/v terms of the error dynamics are clamped.
pub const V_FLOOR: f64 = 0.5;

/// Wrap an angle to the half-open interval (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * core::f64::consts::PI;
    let mut r = a % two_pi;
    if r <= -core::f64::consts::PI {
        r += two_pi;
    } else if r > core::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Planar pose and velocity of one vehicle: `[px, py, theta, v, omega]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    /// Position x [m].
    pub px: f64,
    /// Position y [m].
    pub py: f64,
    /// Heading [rad], kept in (-pi, pi].
    pub theta: f64,
    /// Linear speed [m/s].
    pub v: f64,
    /// Yaw rate [rad/s].
    pub omega: f64,
}

impl VehicleState {
    pub fn new(px: f64, py: f64, theta: f64, v: f64, omega: f64) -> Self {
        Self { px, py, theta: wrap_angle(theta), v, omega }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.px, self.py)
    }

    /// Unit vector along the heading.
    pub fn heading_vec(&self) -> Vector2<f64> {
        Vector2::new(self.theta.cos(), self.theta.sin())
    }

    /// Planar velocity `v * [cos theta, sin theta]`.
    pub fn velocity_vec(&self) -> Vector2<f64> {
        self.heading_vec() * self.v
    }

    pub fn is_finite(&self) -> bool {
        self.px.is_finite()
            && self.py.is_finite()
            && self.theta.is_finite()
            && self.v.is_finite()
            && self.omega.is_finite()
    }
}

/// Planning-model input `[a, alpha]`: longitudinal and angular acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanningControl {
    /// Longitudinal acceleration [m/s^2].
    pub a: f64,
    /// Angular acceleration [rad/s^2].
    pub alpha: f64,
}

impl PlanningControl {
    pub fn new(a: f64, alpha: f64) -> Self {
        Self { a, alpha }
    }

    pub fn zero() -> Self {
        Self { a: 0.0, alpha: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.alpha.is_finite()
    }
}

/// Lateral tracking error state `[e_cg, e_cg_dot, theta_e, theta_e_dot]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LateralErrorState {
    /// Lateral deviation [m], positive left of path.
    pub e_cg: f64,
    /// Lateral deviation rate [m/s].
    pub e_cg_dot: f64,
    /// Heading error [rad], wrapped to (-pi, pi].
    pub theta_e: f64,
    /// Heading error rate [rad/s].
    pub theta_e_dot: f64,
}

impl LateralErrorState {
    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.e_cg, self.e_cg_dot, self.theta_e, self.theta_e_dot)
    }
}

/// Physical vehicle parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    /// Mass [kg].
    pub m: f64,
    /// Yaw inertia [kg m^2].
    pub iz: f64,
    /// CG to front axle [m].
    pub lf: f64,
    /// CG to rear axle [m].
    pub lr: f64,
    /// Front cornering stiffness [N/rad].
    pub cf: f64,
    /// Rear cornering stiffness [N/rad].
    pub cr: f64,
    /// Wheelbase [m]; must equal lf + lr.
    pub wheelbase: f64,
    /// Body length [m].
    pub length: f64,
    /// Body width [m].
    pub width: f64,
    /// Acceleration limit [m/s^2].
    pub max_accel: f64,
    /// Steering limit [rad].
    pub max_steer: f64,
    /// Speed limit [m/s].
    pub max_speed: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            m: 1140.0,
            iz: 3436.24,
            lf: 1.165,
            lr: 1.165,
            cf: 155_495.0,
            cr: 155_495.0,
            wheelbase: 2.33,
            length: 4.42,
            width: 1.74,
            max_accel: 15.0,
            max_steer: 0.611,
            max_speed: 18.05,
        }
    }
}

impl VehicleParams {
    /// Check positivity and the wheelbase consistency invariant.
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = [
            self.m,
            self.iz,
            self.lf,
            self.lr,
            self.cf,
            self.cr,
            self.wheelbase,
            self.length,
            self.width,
            self.max_accel,
            self.max_steer,
            self.max_speed,
        ];
        if positive.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(DynamicsError::InvalidParams);
        }
        if (self.wheelbase - (self.lf + self.lr)).abs() > 1e-9 {
            return Err(DynamicsError::InvalidParams);
        }
        Ok(())
    }

    /// Radius of the circle circumscribing the body rectangle.
    pub fn circumradius(&self) -> f64 {
        0.5 * (self.length * self.length + self.width * self.width).sqrt()
    }
}

/// Continuous-time lateral error model `x_dot = Ac x + Bc delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousSystem {
    pub ac: Matrix4<f64>,
    pub bc: Vector4<f64>,
    /// Set when the linearization speed had to be clamped to [`V_FLOOR`].
    pub v_clamped: bool,
}

/// Continuous and discretized lateral error model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSystem {
    pub ac: Matrix4<f64>,
    pub bc: Vector4<f64>,
    pub ad: Matrix4<f64>,
    pub bd: Vector4<f64>,
    /// Sampling time [s].
    pub ts: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DynamicsError {
    /// A state or control input contained a non-finite value.
    NonFiniteInput,
    /// Step duration must be strictly positive.
    NonPositiveStep,
    /// Vehicle parameters violate their invariants.
    InvalidParams,
    /// `(I - Ts/2 Ac)` was singular; carries its determinant as diagnostic.
    SingularDiscretization { det: f64 },
}

impl fmt::Display for DynamicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonFiniteInput => write!(f, "non-finite model input"),
            Self::NonPositiveStep => write!(f, "step duration must be > 0"),
            Self::InvalidParams => write!(f, "invalid vehicle parameters"),
            Self::SingularDiscretization { det } => {
                write!(f, "singular bilinear transform (det = {det:e})")
            }
        }
    }
}

/// Forward-Euler update of the 5-state planning model.
///
/// Returns `[px + h v cos th, py + h v sin th, th + h w, v + h a, w + h al]`
/// with the heading renormalized and the speed saturated at `+-max_speed`.
pub fn step_planning_model(
    x: &VehicleState,
    u: &PlanningControl,
    h: f64,
    max_speed: f64,
) -> Result<VehicleState, DynamicsError> {
    if !(x.is_finite() && u.is_finite()) {
        return Err(DynamicsError::NonFiniteInput);
    }
    if !(h > 0.0) {
        return Err(DynamicsError::NonPositiveStep);
    }
    Ok(VehicleState {
        px: x.px + h * x.v * x.theta.cos(),
        py: x.py + h * x.v * x.theta.sin(),
        theta: wrap_angle(x.theta + h * x.omega),
        v: (x.v + h * u.a).clamp(-max_speed, max_speed),
        omega: x.omega + h * u.alpha,
    })
}

/// Jacobians `A = df/dx`, `B = df/du` of [`step_planning_model`].
///
/// When the speed update saturates, the corresponding partials are zero,
/// matching the clamped map.
pub fn planning_jacobians(
    x: &VehicleState,
    u: &PlanningControl,
    h: f64,
    max_speed: f64,
) -> (SMatrix<f64, 5, 5>, SMatrix<f64, 5, 2>) {
    let (s, c) = x.theta.sin_cos();
    let mut a = SMatrix::<f64, 5, 5>::identity();
    a[(0, 2)] = -h * x.v * s;
    a[(0, 3)] = h * c;
    a[(1, 2)] = h * x.v * c;
    a[(1, 3)] = h * s;
    a[(2, 4)] = h;

    let mut b = SMatrix::<f64, 5, 2>::zeros();
    let saturated = (x.v + h * u.a).abs() >= max_speed;
    if saturated {
        a[(3, 3)] = 0.0;
    } else {
        b[(3, 0)] = h;
    }
    b[(4, 1)] = h;
    (a, b)
}

/// Continuous-time lateral error dynamics linearized at speed `v`.
///
/// Speeds at or below [`V_FLOOR`] are clamped (and flagged) so the 1/v
/// entries never divide by zero.
pub fn linearize_error_dynamics(p: &VehicleParams, v: f64) -> ContinuousSystem {
    let v_clamped = !(v > V_FLOOR);
    let v = if v_clamped { V_FLOOR } else { v };

    let cs = p.cf + p.cr;
    let cross = p.lr * p.cr - p.lf * p.cf;
    let sq = p.lf * p.lf * p.cf + p.lr * p.lr * p.cr;

    let mut ac = Matrix4::zeros();
    ac[(0, 1)] = 1.0;
    ac[(1, 1)] = -cs / (p.m * v);
    ac[(1, 2)] = cs / p.m;
    ac[(1, 3)] = cross / (p.m * v);
    ac[(2, 3)] = 1.0;
    ac[(3, 1)] = cross / (p.iz * v);
    ac[(3, 2)] = -cross / p.iz;
    ac[(3, 3)] = -sq / (p.iz * v);

    let bc = Vector4::new(0.0, p.cf / p.m, 0.0, p.lf * p.cf / p.iz);

    ContinuousSystem { ac, bc, v_clamped }
}

/// Discretize the error model: `Ad` via the bilinear (Tustin) transform,
/// `Bd = Ts Bc` by default, or `Ts (I - Ts/2 Ac)^-1 Bc` with `tustin_input`.
pub fn discretize(
    sys: &ContinuousSystem,
    ts: f64,
    tustin_input: bool,
) -> Result<LinearSystem, DynamicsError> {
    if !(ts > 0.0) {
        return Err(DynamicsError::NonPositiveStep);
    }
    let half = 0.5 * ts;
    let minus = Matrix4::identity() - sys.ac * half;
    let plus = Matrix4::identity() + sys.ac * half;
    let inv = minus
        .try_inverse()
        .ok_or(DynamicsError::SingularDiscretization { det: minus.determinant() })?;
    let ad = inv * plus;
    let bd = if tustin_input { inv * sys.bc * ts } else { sys.bc * ts };
    Ok(LinearSystem { ac: sys.ac, bc: sys.bc, ad, bd, ts })
}

/// Execute a steering/acceleration command on the 5-state model.
///
/// Uses the small-angle kinematic bridge `omega_cmd = v delta / L`; the
/// angular acceleration is chosen so the yaw rate reaches `omega_cmd` after
/// one step, and the state advances through [`step_planning_model`].
pub fn apply_tracking_command(
    x: &VehicleState,
    delta: f64,
    accel: f64,
    h: f64,
    p: &VehicleParams,
) -> Result<VehicleState, DynamicsError> {
    if !(delta.is_finite() && accel.is_finite()) {
        return Err(DynamicsError::NonFiniteInput);
    }
    let omega_cmd = x.v * delta / p.wheelbase;
    let alpha = (omega_cmd - x.omega) / h;
    step_planning_model(x, &PlanningControl::new(accel, alpha), h, p.max_speed)
}

fn obb_corners(center: Vector2<f64>, theta: f64, length: f64, width: f64) -> [Vector2<f64>; 4] {
    let t = Vector2::new(theta.cos(), theta.sin()) * (0.5 * length);
    let n = Vector2::new(-theta.sin(), theta.cos()) * (0.5 * width);
    [center + t + n, center + t - n, center - t - n, center - t + n]
}

fn project(corners: &[Vector2<f64>; 4], axis: &Vector2<f64>) -> (f64, f64) {
    let mut lo = corners[0].dot(axis);
    let mut hi = lo;
    for c in &corners[1..] {
        let p = c.dot(axis);
        if p < lo {
            lo = p;
        }
        if p > hi {
            hi = p;
        }
    }
    (lo, hi)
}

/// Separating-axis overlap test between two heading-aligned body rectangles.
///
/// Exact tangency counts as *no* collision: strict interval overlap on every
/// candidate axis is required.
pub fn detect_collision(
    a: &VehicleState,
    ap: &VehicleParams,
    b: &VehicleState,
    bp: &VehicleParams,
) -> bool {
    let ca = obb_corners(a.position(), a.theta, ap.length, ap.width);
    let cb = obb_corners(b.position(), b.theta, bp.length, bp.width);
    let axes = [
        Vector2::new(a.theta.cos(), a.theta.sin()),
        Vector2::new(-a.theta.sin(), a.theta.cos()),
        Vector2::new(b.theta.cos(), b.theta.sin()),
        Vector2::new(-b.theta.sin(), b.theta.cos()),
    ];
    for axis in &axes {
        let (lo_a, hi_a) = project(&ca, axis);
        let (lo_b, hi_b) = project(&cb, axis);
        if hi_a <= lo_b || hi_b <= lo_a {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table_params() -> VehicleParams {
        VehicleParams { lf: 1.165, lr: 1.165, wheelbase: 2.33, ..VehicleParams::default() }
    }

    #[test]
    fn straight_constant_speed_motion() {
        let x = VehicleState::new(0.0, 0.0, 0.0, 10.0, 0.0);
        let next = step_planning_model(&x, &PlanningControl::zero(), 0.1, 18.05).unwrap();
        assert_eq!(next, VehicleState::new(1.0, 0.0, 0.0, 10.0, 0.0));
    }

    #[test]
    fn rest_is_a_fixed_point() {
        let x = VehicleState::new(0.0, 0.0, 0.0, 0.0, 0.0);
        let next = step_planning_model(&x, &PlanningControl::zero(), 0.1, 18.05).unwrap();
        assert_eq!(next, x);
    }

    #[test]
    fn motion_along_y_with_acceleration() {
        let x = VehicleState::new(0.0, 0.0, core::f64::consts::FRAC_PI_2, 2.0, 0.0);
        let next = step_planning_model(&x, &PlanningControl::new(1.0, 0.0), 0.5, 18.05).unwrap();
        assert_relative_eq!(next.px, 0.0, epsilon = 1e-12);
        assert_relative_eq!(next.py, 1.0, epsilon = 1e-12);
        assert_relative_eq!(next.theta, core::f64::consts::FRAC_PI_2);
        assert_relative_eq!(next.v, 2.5);
        assert_relative_eq!(next.omega, 0.0);
    }

    #[test]
    fn speed_saturates_at_limit() {
        let x = VehicleState::new(0.0, 0.0, 0.0, 18.0, 0.0);
        let next = step_planning_model(&x, &PlanningControl::new(10.0, 0.0), 0.5, 18.05).unwrap();
        assert_eq!(next.v, 18.05);
    }

    #[test]
    fn non_finite_input_rejected() {
        let x = VehicleState::new(f64::NAN, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(
            step_planning_model(&x, &PlanningControl::zero(), 0.1, 18.05),
            Err(DynamicsError::NonFiniteInput)
        );
        let x = VehicleState::new(0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(
            step_planning_model(&x, &PlanningControl::new(f64::INFINITY, 0.0), 0.1, 18.05),
            Err(DynamicsError::NonFiniteInput)
        );
        assert_eq!(
            step_planning_model(&x, &PlanningControl::zero(), 0.0, 18.05),
            Err(DynamicsError::NonPositiveStep)
        );
    }

    #[test]
    fn wrap_angle_half_open_interval() {
        assert_eq!(wrap_angle(core::f64::consts::PI), core::f64::consts::PI);
        assert_eq!(wrap_angle(-core::f64::consts::PI), core::f64::consts::PI);
        assert_relative_eq!(wrap_angle(3.0 * core::f64::consts::PI), core::f64::consts::PI);
        assert_relative_eq!(wrap_angle(-0.5), -0.5);
    }

    #[test]
    fn symmetric_vehicle_has_zero_cross_terms() {
        let sys = linearize_error_dynamics(&table_params(), 10.0);
        assert_eq!(sys.ac[(1, 3)], 0.0);
        assert_eq!(sys.ac[(3, 1)], 0.0);
        assert!(!sys.v_clamped);
    }

    #[test]
    fn table_input_matrix_entries() {
        let sys = linearize_error_dynamics(&table_params(), 10.0);
        assert_relative_eq!(sys.bc[1], 155_495.0 / 1140.0, max_relative = 1e-12);
        assert_relative_eq!(sys.bc[3], 1.165 * 155_495.0 / 3436.24, max_relative = 1e-12);
        assert_relative_eq!(sys.bc[1], 136.4, max_relative = 1e-3);
        assert_relative_eq!(sys.bc[3], 52.72, max_relative = 1e-3);
    }

    #[test]
    fn doubling_speed_halves_damping_entry() {
        let p = table_params();
        let s1 = linearize_error_dynamics(&p, 10.0);
        let s2 = linearize_error_dynamics(&p, 20.0);
        assert_relative_eq!(s2.ac[(1, 1)], 0.5 * s1.ac[(1, 1)], max_relative = 1e-12);
    }

    #[test]
    fn low_speed_is_clamped_and_flagged() {
        let sys = linearize_error_dynamics(&table_params(), 0.0);
        assert!(sys.v_clamped);
        assert!(sys.ac[(1, 1)].is_finite());
        let floor = linearize_error_dynamics(&table_params(), V_FLOOR + 1e-9);
        assert_relative_eq!(sys.ac[(1, 1)], floor.ac[(1, 1)], max_relative = 1e-6);
    }

    #[test]
    fn zero_dynamics_discretizes_to_identity() {
        let sys = ContinuousSystem {
            ac: Matrix4::zeros(),
            bc: Vector4::new(0.0, 1.0, 0.0, 2.0),
            v_clamped: false,
        };
        let d = discretize(&sys, 0.02, false).unwrap();
        assert_eq!(d.ad, Matrix4::identity());
        assert_eq!(d.bd, Vector4::new(0.0, 0.02, 0.0, 0.04));
    }

    #[test]
    fn scalar_bilinear_closed_form() {
        // A scalar block embedded in the (0,0) entry: Ad = (1 + a h/2)/(1 - a h/2).
        let a = -3.0;
        let ts = 0.1;
        let mut ac = Matrix4::zeros();
        ac[(0, 0)] = a;
        let sys = ContinuousSystem { ac, bc: Vector4::zeros(), v_clamped: false };
        let d = discretize(&sys, ts, false).unwrap();
        assert_relative_eq!(
            d.ad[(0, 0)],
            (1.0 + a * ts / 2.0) / (1.0 - a * ts / 2.0),
            max_relative = 1e-14
        );
    }

    #[test]
    fn tustin_input_variant() {
        let p = table_params();
        let sys = linearize_error_dynamics(&p, 10.0);
        let euler = discretize(&sys, 0.02, false).unwrap();
        let tustin = discretize(&sys, 0.02, true).unwrap();
        assert_eq!(euler.bd, sys.bc * 0.02);
        let expect = euler.ad.try_inverse().unwrap() * tustin.bd; // sanity: both finite
        assert!(expect.iter().all(|x| x.is_finite()));
        assert!((tustin.bd - euler.bd).norm() > 0.0);
    }

    #[test]
    fn identical_pose_collides() {
        let p = VehicleParams::default();
        let a = VehicleState::new(3.0, -2.0, 0.7, 0.0, 0.0);
        assert!(detect_collision(&a, &p, &a, &p));
    }

    #[test]
    fn far_apart_does_not_collide() {
        let p = VehicleParams::default();
        let a = VehicleState::new(0.0, 0.0, 0.3, 0.0, 0.0);
        let b = VehicleState::new(100.0, 0.0, 1.2, 0.0, 0.0);
        assert!(!detect_collision(&a, &p, &b, &p));
    }

    #[test]
    fn exact_tangency_is_no_collision() {
        let p = VehicleParams::default();
        let a = VehicleState::new(0.0, 0.0, 0.0, 0.0, 0.0);
        let b = VehicleState::new(4.42, 0.0, 0.0, 0.0, 0.0);
        assert!(!detect_collision(&a, &p, &b, &p));
        let c = VehicleState::new(4.41, 0.0, 0.0, 0.0, 0.0);
        assert!(detect_collision(&a, &p, &c, &p));
    }
}
