//! Scenario configuration: policy selection, demand specification, signal
//! plan and every module parameter, with defaults matching the reference
//! parameter set.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::{Euclid, Float};

use crate::avoidance::RepulsiveParams;
use crate::dynamics::VehicleParams;
use crate::fairness::FairnessParams;
use crate::geometry::{Approach, IntersectionGeometry, Movement};
use crate::safety::FilterParams;
use crate::tracking::{LongitudinalParams, LqrWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Proposed,
    AllWayStop,
    PretimedSignal,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Proposed => "proposed",
            Policy::AllWayStop => "all-way-stop",
            Policy::PretimedSignal => "pretimed-signal",
        }
    }
}

/// What non-authorized vehicles do under the proposed policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuthorityMode {
    /// Non-authorized vehicles keep tracking their reference speed but must
    /// yield through the avoidance stack; the authority holder skips the
    /// repulsive blend (default).
    YieldPriority,
    /// Non-authorized vehicles track `v_ref = 0` and brake to a stop along
    /// their lane.
    HaltNonAuthorized,
}

/// Per-approach movement fractions; must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovementSplit {
    pub left: f64,
    pub straight: f64,
    pub right: f64,
}

impl Default for MovementSplit {
    fn default() -> Self {
        Self { left: 0.25, straight: 0.5, right: 0.25 }
    }
}

impl MovementSplit {
    pub fn fraction(&self, m: Movement) -> f64 {
        match m {
            Movement::Left => self.left,
            Movement::Straight => self.straight,
            Movement::Right => self.right,
        }
    }
}

/// Total demand level and its distribution over approaches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandSpec {
    /// Total demand [veh/hr].
    pub level: f64,
    /// Nonnegative weights for (N, E, S, W).
    pub ratios: [f64; 4],
    pub split: MovementSplit,
}

impl DemandSpec {
    pub fn ratio(&self, a: Approach) -> f64 {
        match a {
            Approach::North => self.ratios[0],
            Approach::East => self.ratios[1],
            Approach::South => self.ratios[2],
            Approach::West => self.ratios[3],
        }
    }

    /// Arrival headway for one approach [s]; `None` for a zero-ratio leg.
    pub fn headway(&self, a: Approach) -> Option<f64> {
        let total: f64 = self.ratios.iter().sum();
        let share = self.ratio(a) / total;
        if share > 0.0 {
            Some(3600.0 / (self.level * share))
        } else {
            None
        }
    }
}

impl Default for DemandSpec {
    fn default() -> Self {
        Self { level: 990.0, ratios: [1.0, 1.0, 1.0, 1.0], split: MovementSplit::default() }
    }
}

/// One signal phase: green/yellow/all-red durations and the movements it
/// releases.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalPhase {
    pub green: f64,
    pub yellow: f64,
    pub all_red: f64,
    pub permits: Vec<(Approach, Movement)>,
}

impl SignalPhase {
    pub fn duration(&self) -> f64 {
        self.green + self.yellow + self.all_red
    }
}

/// Fixed-cycle phase plan.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalPlan {
    pub phases: Vec<SignalPhase>,
}

impl Default for SignalPlan {
    fn default() -> Self {
        // 60 s cycle: through(+right) and protected-left phases per axis.
        let through = |a: Approach, b: Approach| SignalPhase {
            green: 16.0,
            yellow: 3.0,
            all_red: 1.0,
            permits: vec![
                (a, Movement::Straight),
                (a, Movement::Right),
                (b, Movement::Straight),
                (b, Movement::Right),
            ],
        };
        let left = |a: Approach, b: Approach| SignalPhase {
            green: 7.0,
            yellow: 2.0,
            all_red: 1.0,
            permits: vec![(a, Movement::Left), (b, Movement::Left)],
        };
        Self {
            phases: vec![
                through(Approach::North, Approach::South),
                left(Approach::North, Approach::South),
                through(Approach::East, Approach::West),
                left(Approach::East, Approach::West),
            ],
        }
    }
}

impl SignalPlan {
    pub fn cycle(&self) -> f64 {
        self.phases.iter().map(SignalPhase::duration).sum()
    }

    /// Whether a movement faces a green indication at time `t` [s].
    pub fn is_green(&self, t: f64, approach: Approach, movement: Movement) -> bool {
        let cycle = self.cycle();
        if cycle <= 0.0 {
            return true;
        }
        let mut phase_t = Euclid::rem_euclid(&t, &cycle);
        for phase in &self.phases {
            if phase_t < phase.duration() {
                return phase_t < phase.green
                    && phase.permits.iter().any(|&(a, m)| a == approach && m == movement);
            }
            phase_t -= phase.duration();
        }
        false
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.phases.is_empty() {
            return Err(ConfigError("signal plan needs at least one phase"));
        }
        for p in &self.phases {
            if !(p.green > 0.0 && p.yellow >= 0.0 && p.all_red >= 0.0) {
                return Err(ConfigError("signal phase durations must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigError(pub &'static str);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid scenario config: {}", self.0)
    }
}

/// Complete simulation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub policy: Policy,
    pub authority_mode: AuthorityMode,
    pub demand: DemandSpec,
    /// Run horizon [s].
    pub horizon_s: f64,
    pub seed: u64,
    /// Control step [s].
    pub ts: f64,
    /// Common constant reference speed [m/s].
    pub v_nominal: f64,
    pub vehicle: VehicleParams,
    pub lqr: LqrWeights,
    pub longitudinal: LongitudinalParams,
    pub repulsive: RepulsiveParams,
    pub filter: FilterParams,
    pub fairness: FairnessParams,
    pub geometry: IntersectionGeometry,
    pub signal: SignalPlan,
    pub planner: crate::geometry::PlannerSettings,
    /// Use the Tustin-consistent input discretization instead of Euler.
    pub tustin_input: bool,
    /// Re-solve the Riccati recursion every step instead of gain caching.
    pub lqr_every_step: bool,
    /// Minimum clear distance at the spawn cell [m].
    pub spawn_gap: f64,
    /// Critical inter-vehicle distance threshold for safety metrics [m].
    pub critical_distance: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            policy: Policy::Proposed,
            authority_mode: AuthorityMode::YieldPriority,
            demand: DemandSpec::default(),
            horizon_s: 300.0,
            seed: 0,
            ts: 0.02,
            v_nominal: 8.0,
            vehicle: VehicleParams::default(),
            lqr: LqrWeights::default(),
            longitudinal: LongitudinalParams::default(),
            repulsive: RepulsiveParams::default(),
            filter: FilterParams::default(),
            fairness: FairnessParams::default(),
            geometry: IntersectionGeometry::default(),
            signal: SignalPlan::default(),
            planner: crate::geometry::PlannerSettings::default(),
            tustin_input: false,
            lqr_every_step: false,
            spawn_gap: 8.0,
            critical_distance: 2.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.horizon_s >= 0.0) {
            return Err(ConfigError("horizon must be >= 0"));
        }
        if !(self.ts > 0.0) {
            return Err(ConfigError("control step must be > 0"));
        }
        if !(self.v_nominal > 0.0 && self.v_nominal <= self.vehicle.max_speed) {
            return Err(ConfigError("nominal speed must be in (0, max_speed]"));
        }
        if !(self.demand.level > 0.0) {
            return Err(ConfigError("demand level must be > 0"));
        }
        if self.demand.ratios.iter().any(|r| *r < 0.0) {
            return Err(ConfigError("demand ratios must be nonnegative"));
        }
        if !self.demand.ratios.iter().any(|r| *r > 0.0) {
            return Err(ConfigError("at least one demand ratio must be positive"));
        }
        let split = self.demand.split;
        if ((split.left + split.straight + split.right) - 1.0).abs() > 1e-9 {
            return Err(ConfigError("movement split must sum to 1"));
        }
        if split.left < 0.0 || split.straight < 0.0 || split.right < 0.0 {
            return Err(ConfigError("movement split fractions must be nonnegative"));
        }
        self.vehicle.validate().map_err(|_| ConfigError("invalid vehicle parameters"))?;
        self.fairness.validate().map_err(|_| ConfigError("invalid fairness parameters"))?;
        self.signal.validate()?;
        if !(self.spawn_gap > 0.0) {
            return Err(ConfigError("spawn gap must be > 0"));
        }
        Ok(())
    }

    /// Number of control steps in the horizon.
    pub fn horizon_steps(&self) -> u64 {
        (self.horizon_s / self.ts).round() as u64
    }
}

/// Demand ratio presets used across the experiment grid.
pub mod presets {
    /// Balanced 1:1:1:1.
    pub const BALANCED: [f64; 4] = [1.0, 1.0, 1.0, 1.0];
    /// Unbalanced 4:2:1:1.
    pub const UNBALANCED: [f64; 4] = [4.0, 2.0, 1.0, 1.0];
    /// Highly unbalanced 4:3:1:0.
    pub const HIGHLY_UNBALANCED: [f64; 4] = [4.0, 3.0, 1.0, 0.0];
    /// Demand levels [veh/hr].
    pub const LOW: f64 = 990.0;
    pub const MEDIUM: f64 = 2010.0;
    pub const HIGH: f64 = 3600.0;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn default_signal_cycle_is_60s() {
        let plan = SignalPlan::default();
        assert!((plan.cycle() - 60.0).abs() < 1e-12);
    }

    #[test]
    fn signal_green_windows() {
        let plan = SignalPlan::default();
        // Phase 1: NS through green for the first 16 s.
        assert!(plan.is_green(0.0, Approach::North, Movement::Straight));
        assert!(plan.is_green(15.9, Approach::South, Movement::Right));
        assert!(!plan.is_green(17.0, Approach::North, Movement::Straight)); // yellow
        assert!(!plan.is_green(0.0, Approach::East, Movement::Straight));
        // Phase 2: NS protected left 20..27 s.
        assert!(plan.is_green(21.0, Approach::South, Movement::Left));
        assert!(!plan.is_green(21.0, Approach::South, Movement::Straight));
        // Phase 3: EW through 30..46 s.
        assert!(plan.is_green(31.0, Approach::East, Movement::Straight));
        // Wraps around the cycle.
        assert!(plan.is_green(60.5, Approach::North, Movement::Straight));
    }

    #[test]
    fn headways_follow_ratio_shares() {
        let d = DemandSpec { level: 990.0, ratios: [1.0; 4], split: MovementSplit::default() };
        let h = d.headway(Approach::North).unwrap();
        assert!((h - 3600.0 / 247.5).abs() < 1e-9);
        let z = DemandSpec { ratios: [4.0, 3.0, 1.0, 0.0], ..d };
        assert_eq!(z.headway(Approach::West), None);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = ScenarioConfig::default();
        cfg.demand.ratios = [0.0; 4];
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.demand.split = MovementSplit { left: 0.5, straight: 0.5, right: 0.5 };
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.fairness.alpha1 = 0.5;
        cfg.fairness.alpha2 = 0.5;
        cfg.fairness.alpha3 = 0.5;
        assert!(cfg.validate().is_err());
    }
}
