//! Scenario orchestration: demand generation and spawning, the per-step
//! execution loop wiring allocation, tracking, avoidance and the safety
//! filter, the two baseline policies, and run artifact collection.

// f64 math comes from the trait in pure no_std graphs; std graphs
// resolve it inherently and would flag the import.
#[allow(unused_imports)]
use num_traits::Float;

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;
use core::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use crate::avoidance::{blend_commands, repulsive_force, ObstacleTrack};
use crate::ddp::ReferenceTrajectory;
use crate::dynamics::{apply_tracking_command, detect_collision, DynamicsError, VehicleState};
use crate::fairness::{allocate, AllocationError, FairnessLedger, VehicleId};
use crate::geometry::{self, Approach, Movement, MovementId};
use crate::metrics;
use crate::safety::{filter, FilterMemory};
use crate::scenario::{AuthorityMode, ConfigError, Policy, ScenarioConfig};
use crate::tracking::{
    compute_tracking_errors, feedforward_steer, lateral_control, longitudinal_control,
    ControllerContext, TrackingCommand,
};

/// Comfortable deceleration used by the baseline stopping envelopes [m/s^2].
const B_COMFORT: f64 = 3.0;
/// Minimum bumper gap targeted by baseline car-following [m].
const G_MIN: f64 = 6.0;
/// Baselines aim to stop this far before the bar [m].
const STOP_OFFSET: f64 = 0.3;
/// A vehicle counts as stopped below this speed [m/s].
const STOP_SPEED: f64 = 0.1;
/// Required stop dwell before joining the FCFS queue [s].
const STOP_DWELL: f64 = 0.5;
/// Vehicles complete when this close to the trajectory end [m].
const DESPAWN_MARGIN: f64 = 0.5;
/// Car-following lookahead along the own path [m].
const FOLLOW_LOOKAHEAD: f64 = 40.0;
/// Lateral corridor within which another vehicle counts as a leader [m].
const FOLLOW_CORRIDOR: f64 = 2.0;
/// Abort when a vehicle strays this many lane widths from its path.
const OFF_PATH_LANES: f64 = 4.0;

/// One reference trajectory plus derived route bookkeeping.
#[derive(Debug, Clone)]
pub struct RouteTrack {
    pub traj: ReferenceTrajectory,
    /// Cumulative arc length per reference index [m].
    pub cum_s: Vec<f64>,
    pub total_s: f64,
    /// Arc position where the route enters the conflict box [m].
    pub s_bar: f64,
    /// Arc position where the route leaves the conflict box [m].
    pub s_box_exit: f64,
}

impl RouteTrack {
    pub fn new(traj: ReferenceTrajectory, geom: &crate::geometry::IntersectionGeometry) -> Self {
        let mut cum_s = Vec::with_capacity(traj.states.len());
        cum_s.push(0.0);
        for w in traj.states.windows(2) {
            let d = (w[1].position() - w[0].position()).norm();
            cum_s.push(cum_s.last().unwrap() + d);
        }
        let total_s = *cum_s.last().unwrap();
        let (s_bar, s_box_exit) = geom.box_window(&traj, 1.0);
        Self { traj, cum_s, total_s, s_bar, s_box_exit }
    }
}

/// Normalized reference trajectories for every route.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryLibrary {
    routes: BTreeMap<MovementId, RouteTrack>,
}

impl TrajectoryLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: MovementId, traj: ReferenceTrajectory, cfg: &ScenarioConfig) {
        self.routes.insert(id, RouteTrack::new(traj, &cfg.geometry));
    }

    pub fn get(&self, id: MovementId) -> Option<&RouteTrack> {
        self.routes.get(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &MovementId> {
        self.routes.keys()
    }

    /// Plan every route with the configured planner settings.
    pub fn build(cfg: &ScenarioConfig) -> Result<Self, crate::ddp::DdpError> {
        let mut lib = Self::new();
        for id in cfg.geometry.movements() {
            let traj =
                geometry::plan_route(&cfg.geometry, id, &cfg.vehicle, &cfg.planner, cfg.ts)?;
            lib.insert(id, traj, cfg);
        }
        Ok(lib)
    }
}

#[derive(Debug, Clone)]
pub enum SimError {
    Config(ConfigError),
    MissingTrajectory(MovementId),
    Dynamics(DynamicsError),
    Allocation(AllocationError),
    /// A vehicle left its path corridor; carries a state dump.
    OffPath { id: VehicleId, step: u64, state: VehicleState },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(e) => write!(f, "{e}"),
            Self::MissingTrajectory(id) => write!(f, "no planned trajectory for route {id}"),
            Self::Dynamics(e) => write!(f, "dynamics failure: {e}"),
            Self::Allocation(e) => write!(f, "allocation failure: {e}"),
            Self::OffPath { id, step, state } => write!(
                f,
                "vehicle {id} off path at step {step}: px={} py={} theta={} v={} omega={}",
                state.px, state.py, state.theta, state.v, state.omega
            ),
        }
    }
}

impl From<ConfigError> for SimError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

impl From<DynamicsError> for SimError {
    fn from(e: DynamicsError) -> Self {
        Self::Dynamics(e)
    }
}

impl From<AllocationError> for SimError {
    fn from(e: AllocationError) -> Self {
        Self::Allocation(e)
    }
}

#[derive(Debug, Clone)]
struct SimVehicle {
    id: VehicleId,
    movement: MovementId,
    state: VehicleState,
    ctrl: ControllerContext,
    filter_mem: FilterMemory,
    spawn_step: u64,
    /// Last applied longitudinal acceleration, for the obstacle track.
    last_accel: f64,
    /// Arc position along the own route [m], updated every step.
    s_pos: f64,
    stopped_since: Option<u64>,
    queued_at: Option<u64>,
    granted: bool,
}

/// Per-vehicle output row (state after the step, command applied during it).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleRow {
    pub t: u64,
    pub id: VehicleId,
    pub px: f64,
    pub py: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
    pub delta_cmd: f64,
    pub a_cmd: f64,
    pub authority: bool,
    pub min_h: Option<f64>,
    pub u2_norm: f64,
    pub beta: Option<f64>,
}

/// Per-step output row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRow {
    pub t: u64,
    pub winner: Option<VehicleId>,
    pub eligible: usize,
    pub winner_iau: f64,
    pub active: usize,
    pub min_gap: Option<f64>,
    pub min_h: Option<f64>,
    pub jfi: f64,
    pub gini: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionRecord {
    pub id: VehicleId,
    pub movement: MovementId,
    pub spawn_step: u64,
    pub complete_step: u64,
    pub transit_s: f64,
    pub free_flow_s: f64,
    pub delay_s: f64,
}

/// Everything a run produces, ready for metric reduction and serialization.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub policy: Policy,
    pub ts: f64,
    pub horizon_steps: u64,
    pub vehicle_rows: Vec<VehicleRow>,
    pub step_rows: Vec<StepRow>,
    pub completions: Vec<CompletionRecord>,
    pub collision_events: u64,
    /// Per-step minimum pairwise gap, only steps with >= 2 vehicles [m].
    pub step_min_gaps: Vec<f64>,
    pub scheduled: u64,
    pub spawned: u64,
    pub pending_at_end: u64,
    pub active_at_end: u64,
    /// Final cumulative authority counts (proposed policy only).
    pub authority_counts: Vec<u64>,
}

impl RunArtifacts {
    pub fn horizon_s(&self) -> f64 {
        self.ts * self.horizon_steps as f64
    }

    pub fn delays(&self) -> Vec<f64> {
        self.completions.iter().map(|c| c.delay_s).collect()
    }

    pub fn jfi_final(&self) -> Option<f64> {
        (!self.authority_counts.is_empty()).then(|| metrics::jain_index(&self.authority_counts))
    }

    pub fn gini_final(&self) -> Option<f64> {
        (!self.authority_counts.is_empty()).then(|| metrics::gini(&self.authority_counts))
    }
}

struct ApproachSpawner {
    approach: Approach,
    headway: Option<f64>,
    /// Next un-crossed headway multiple (1-based).
    next_k: u64,
    movement_counts: [u64; 3],
    straight_toggle: bool,
    pending: VecDeque<MovementId>,
}

impl ApproachSpawner {
    fn assign_movement(&mut self, split: &crate::scenario::MovementSplit) -> MovementId {
        const ORDER: [Movement; 3] = [Movement::Straight, Movement::Left, Movement::Right];
        let total: u64 = self.movement_counts.iter().sum();
        let mut best = Movement::Straight;
        let mut best_score = f64::NEG_INFINITY;
        for (i, m) in ORDER.iter().enumerate() {
            let score = split.fraction(*m) * (total + 1) as f64 - self.movement_counts[i] as f64;
            if score > best_score {
                best_score = score;
                best = *m;
            }
        }
        let idx = ORDER.iter().position(|m| *m == best).unwrap();
        self.movement_counts[idx] += 1;
        let lane = crate::geometry::IntersectionGeometry::lane_for(best, self.straight_toggle);
        if best == Movement::Straight {
            self.straight_toggle = !self.straight_toggle;
        }
        MovementId { approach: self.approach, movement: best, lane }
    }
}

/// The simulation world. Construct with [`Simulation::new`], advance with
/// [`Simulation::step`] and collect results with
/// [`Simulation::into_artifacts`].
pub struct Simulation {
    cfg: ScenarioConfig,
    library: TrajectoryLibrary,
    clock: u64,
    horizon_steps: u64,
    next_id: VehicleId,
    vehicles: Vec<SimVehicle>,
    spawners: Vec<ApproachSpawner>,
    ledger: FairnessLedger,
    rng: ChaCha8Rng,
    overlapping: BTreeSet<(VehicleId, VehicleId)>,
    collision_events: u64,
    scheduled: u64,
    spawned: u64,
    vehicle_rows: Vec<VehicleRow>,
    step_rows: Vec<StepRow>,
    completions: Vec<CompletionRecord>,
    step_min_gaps: Vec<f64>,
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig, library: TrajectoryLibrary) -> Result<Self, SimError> {
        cfg.validate()?;
        for id in cfg.geometry.movements() {
            if library.get(id).is_none() {
                return Err(SimError::MissingTrajectory(id));
            }
        }
        let spawners = Approach::ALL
            .iter()
            .map(|&approach| ApproachSpawner {
                approach,
                headway: cfg.demand.headway(approach),
                next_k: 1,
                movement_counts: [0; 3],
                straight_toggle: false,
                pending: VecDeque::new(),
            })
            .collect();
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let horizon_steps = cfg.horizon_steps();
        Ok(Self {
            cfg,
            library,
            clock: 0,
            horizon_steps,
            next_id: 0,
            vehicles: Vec::new(),
            spawners,
            ledger: FairnessLedger::new(),
            rng,
            overlapping: BTreeSet::new(),
            collision_events: 0,
            scheduled: 0,
            spawned: 0,
            vehicle_rows: Vec::new(),
            step_rows: Vec::new(),
            completions: Vec::new(),
            step_min_gaps: Vec::new(),
        })
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn is_done(&self) -> bool {
        self.clock >= self.horizon_steps
    }

    pub fn active_count(&self) -> usize {
        self.vehicles.len()
    }

    /// Place a vehicle at its route start immediately, outside the demand
    /// schedule. Useful for constructed scenarios.
    pub fn inject_vehicle(&mut self, movement: MovementId) -> Result<VehicleId, SimError> {
        let track =
            self.library.get(movement).ok_or(SimError::MissingTrajectory(movement))?;
        let start = track.traj.states[0];
        let id = self.next_id;
        self.next_id += 1;
        self.ledger.register(id);
        self.vehicles.push(SimVehicle {
            id,
            movement,
            state: start,
            ctrl: ControllerContext::new(self.cfg.lqr_every_step),
            filter_mem: FilterMemory::new(),
            spawn_step: self.clock,
            last_accel: 0.0,
            s_pos: 0.0,
            stopped_since: None,
            queued_at: None,
            granted: false,
        });
        self.scheduled += 1;
        self.spawned += 1;
        Ok(id)
    }

    /// One formatted line per vehicle, for development probes.
    pub fn debug_vehicles(&self) -> Vec<alloc::string::String> {
        use alloc::format;
        self.vehicles
            .iter()
            .map(|v| {
                let track = self.library.get(v.movement).expect("checked");
                format!(
                    "id {} {} s={:.1}/{:.1} bar={:.1} v={:.2} stopped={:?} queued={:?} granted={}",
                    v.id,
                    v.movement,
                    v.s_pos,
                    track.total_s,
                    track.s_bar,
                    v.state.v,
                    v.stopped_since,
                    v.queued_at,
                    v.granted
                )
            })
            .collect()
    }

    pub fn conservation_holds(&self) -> bool {
        let pending: u64 = self.spawners.iter().map(|s| s.pending.len() as u64).sum();
        self.spawned == self.completions.len() as u64 + self.vehicles.len() as u64
            && self.scheduled == self.spawned + pending
    }

    fn free_flow_s(&self, track: &RouteTrack) -> f64 {
        track.traj.duration() - DESPAWN_MARGIN / self.cfg.v_nominal
    }

    fn spawn(&mut self) {
        let now = self.clock as f64 * self.cfg.ts;
        for si in 0..self.spawners.len() {
            let Some(headway) = self.spawners[si].headway else { continue };
            while self.spawners[si].next_k as f64 * headway <= now {
                self.spawners[si].next_k += 1;
                let id = {
                    let split = self.cfg.demand.split;
                    self.spawners[si].assign_movement(&split)
                };
                self.spawners[si].pending.push_back(id);
                self.scheduled += 1;
            }
            // Place the queue head when its spawn cell is clear.
            while let Some(&movement) = self.spawners[si].pending.front() {
                let track = self.library.get(movement).expect("library checked at init");
                let start = track.traj.states[0];
                let clear = self.vehicles.iter().all(|v| {
                    (v.state.position() - start.position()).norm() >= self.cfg.spawn_gap
                });
                if !clear {
                    break;
                }
                self.spawners[si].pending.pop_front();
                let id = self.next_id;
                self.next_id += 1;
                self.ledger.register(id);
                self.vehicles.push(SimVehicle {
                    id,
                    movement,
                    state: start,
                    ctrl: ControllerContext::new(self.cfg.lqr_every_step),
                    filter_mem: FilterMemory::new(),
                    spawn_step: self.clock,
                    last_accel: 0.0,
                    s_pos: 0.0,
                    stopped_since: None,
                    queued_at: None,
                    granted: false,
                });
                self.spawned += 1;
            }
        }
    }

    /// FCFS stop-bar bookkeeping for the all-way-stop baseline.
    fn all_way_stop_bookkeeping(&mut self) {
        let t = self.clock;
        let dwell_steps = (STOP_DWELL / self.cfg.ts).round() as u64;
        for v in self.vehicles.iter_mut() {
            if v.granted {
                continue;
            }
            let track = self.library.get(v.movement).expect("checked");
            let d_bar = track.s_bar - v.s_pos;
            if d_bar <= 3.0 && d_bar >= -0.5 && v.state.v.abs() <= STOP_SPEED {
                if v.stopped_since.is_none() {
                    v.stopped_since = Some(t);
                }
                if v.queued_at.is_none()
                    && t.saturating_sub(v.stopped_since.unwrap()) >= dwell_steps
                {
                    v.queued_at = Some(t);
                }
            } else if v.state.v.abs() > STOP_SPEED {
                v.stopped_since = None;
            }
        }
        let occupied = self.vehicles.iter().any(|v| {
            let track = self.library.get(v.movement).expect("checked");
            v.granted && v.s_pos <= track.s_box_exit
        });
        if !occupied {
            // Longest-queued first; ties by approach order N, E, S, W, then id.
            let next = self
                .vehicles
                .iter_mut()
                .filter(|v| !v.granted && v.queued_at.is_some())
                .min_by_key(|v| (v.queued_at.unwrap(), v.movement.approach, v.id));
            if let Some(v) = next {
                v.granted = true;
            }
        }
    }

    /// Quadratic stopping envelope reaching zero just before `d` runs out.
    fn stop_profile(d: f64) -> f64 {
        (2.0 * B_COMFORT * (d - STOP_OFFSET).max(0.0)).sqrt()
    }

    /// Advance the world by one control step.
    pub fn step(&mut self) -> Result<(), SimError> {
        let t = self.clock;
        self.spawn();

        // Top layer: authority allocation (proposed policy only).
        let allocation = if self.cfg.policy == Policy::Proposed && !self.vehicles.is_empty() {
            let active: Vec<(VehicleId, f64)> =
                self.vehicles.iter().map(|v| (v.id, v.state.v)).collect();
            Some(allocate(
                &mut self.ledger,
                t,
                &active,
                &self.cfg.fairness,
                self.cfg.vehicle.max_speed,
                &mut self.rng,
            )?)
        } else {
            None
        };
        let winner = allocation.map(|a| a.winner);

        if self.cfg.policy == Policy::AllWayStop {
            self.all_way_stop_bookkeeping();
        }

        // Snapshot for read-only cross-vehicle queries.
        let tracks: Vec<(VehicleId, ObstacleTrack)> = self
            .vehicles
            .iter()
            .map(|v| {
                let t_hat = v.state.heading_vec();
                let n_hat = nalgebra::Vector2::new(-t_hat.y, t_hat.x);
                (
                    v.id,
                    ObstacleTrack {
                        pos: v.state.position(),
                        vel: v.state.velocity_vec(),
                        acc: t_hat * v.last_accel + n_hat * (v.state.v * v.state.omega),
                        heading: v.state.theta,
                        length: self.cfg.vehicle.length,
                        width: self.cfg.vehicle.width,
                    },
                )
            })
            .collect();

        struct Update {
            state: VehicleState,
            cmd: TrackingCommand,
            min_h: Option<f64>,
            u2_norm: f64,
            beta: Option<f64>,
            s_pos: f64,
            completed: bool,
        }

        let mut updates: Vec<Update> = Vec::with_capacity(self.vehicles.len());
        let mut step_min_h: Option<f64> = None;

        for i in 0..self.vehicles.len() {
            let cfg = &self.cfg;
            let track = self.library.get(self.vehicles[i].movement).expect("checked");
            let vehicle = &self.vehicles[i];
            let te = compute_tracking_errors(&vehicle.state, &track.traj, vehicle.ctrl.k_hint)
                .expect("library trajectories are non-empty");
            let s_pos = track.total_s - te.dist_to_goal;

            if te.err.e_cg.abs() > OFF_PATH_LANES * cfg.geometry.lane_width {
                return Err(SimError::OffPath { id: vehicle.id, step: t, state: vehicle.state });
            }

            if te.dist_to_goal <= DESPAWN_MARGIN {
                updates.push(Update {
                    state: vehicle.state,
                    cmd: TrackingCommand::zero(),
                    min_h: None,
                    u2_norm: 0.0,
                    beta: None,
                    s_pos,
                    completed: true,
                });
                continue;
            }

            let authority = winner == Some(vehicle.id);
            let idx = te.nearest;
            let kappa = track.traj.curvature[idx];
            let mut v_ref = track.traj.v_ref[idx];

            // Policy-specific reference speed shaping.
            match cfg.policy {
                Policy::Proposed => {
                    if cfg.authority_mode == AuthorityMode::HaltNonAuthorized && !authority {
                        v_ref = 0.0;
                    }
                }
                Policy::AllWayStop => {
                    if !vehicle.granted {
                        let d_bar = track.s_bar - s_pos;
                        if d_bar >= -0.5 {
                            v_ref = v_ref.min(Self::stop_profile(d_bar));
                        }
                    }
                }
                Policy::PretimedSignal => {
                    let green = cfg.signal.is_green(
                        t as f64 * cfg.ts,
                        vehicle.movement.approach,
                        vehicle.movement.movement,
                    );
                    if !green && s_pos < track.s_bar + 0.5 {
                        let d_bar = track.s_bar - s_pos;
                        v_ref = v_ref.min(Self::stop_profile(d_bar));
                    }
                }
            }

            // Baseline car-following on the shared road network.
            if cfg.policy != Policy::Proposed {
                if let Some(gap) = leader_gap(&self.vehicles, i, track, cfg.vehicle.length) {
                    v_ref = v_ref.min((2.0 * B_COMFORT * (gap - G_MIN).max(0.0)).sqrt());
                }
            }

            // Mutable phase: gain cache, filter memory, command assembly.
            let v = &mut self.vehicles[i];
            v.ctrl.k_hint = te.nearest;
            let sol = v.ctrl.gain(&cfg.vehicle, &cfg.lqr, cfg.ts, v.state.v, cfg.tustin_input);
            let dff = feedforward_steer(&cfg.vehicle, v.state.v, kappa, &sol.k, v.state.v < 0.0);
            let mut delta = lateral_control(&te.err, &sol.k, dff, cfg.vehicle.max_steer);

            let use_avoidance = cfg.policy == Policy::Proposed
                && (!authority || cfg.authority_mode == AuthorityMode::HaltNonAuthorized);
            if use_avoidance {
                // Only forward-arc obstacles repel: dodging a vehicle behind
                // locks ego and pursuer into a joint flight. Rear threats
                // remain covered by the safety filter.
                let heading = v.state.heading_vec();
                let pos = v.state.position();
                let others: Vec<ObstacleTrack> = tracks
                    .iter()
                    .filter(|(id, ob)| *id != v.id && (ob.pos - pos).dot(&heading) > -2.0)
                    .map(|(_, ob)| *ob)
                    .collect();
                let f = repulsive_force(&v.state, &others, &cfg.repulsive);
                let blended =
                    blend_commands(delta, v_ref, v.state.theta, f.force, cfg.vehicle.max_steer);
                delta = blended.delta;
                v_ref = blended.speed;
            }

            let accel = longitudinal_control(
                v.state.v,
                v_ref,
                te.dist_to_goal,
                &cfg.longitudinal,
                cfg.vehicle.max_accel,
            );
            let u1 = TrackingCommand { delta, accel };

            let (cmd, min_h, u2_norm, beta) = if cfg.policy == Policy::Proposed {
                let others: Vec<(u32, ObstacleTrack)> =
                    tracks.iter().filter(|(id, _)| *id != v.id).copied().collect();
                let (cmd, report) = filter(
                    &u1,
                    &v.state,
                    cfg.vehicle.wheelbase,
                    &others,
                    &cfg.filter,
                    &mut v.filter_mem,
                );
                let min_h = report.min_h.is_finite().then_some(report.min_h);
                (cmd, min_h, report.u2.norm(), Some(report.beta))
            } else {
                (u1, None, 0.0, None)
            };

            if let Some(h) = min_h {
                step_min_h = Some(step_min_h.map_or(h, |m: f64| m.min(h)));
            }

            let next = apply_tracking_command(&v.state, cmd.delta, cmd.accel, cfg.ts, &cfg.vehicle)?;
            updates.push(Update {
                state: next,
                cmd,
                min_h,
                u2_norm,
                beta,
                s_pos,
                completed: false,
            });
        }

        // Commit in vehicle order (ids ascend with insertion order).
        let mut completed_idx: Vec<usize> = Vec::new();
        for (i, up) in updates.into_iter().enumerate() {
            let authority = winner == Some(self.vehicles[i].id);
            if up.completed {
                completed_idx.push(i);
            } else {
                let v = &mut self.vehicles[i];
                v.state = up.state;
                v.last_accel = up.cmd.accel;
                v.s_pos = up.s_pos;
                self.vehicle_rows.push(VehicleRow {
                    t,
                    id: v.id,
                    px: v.state.px,
                    py: v.state.py,
                    theta: v.state.theta,
                    v: v.state.v,
                    omega: v.state.omega,
                    delta_cmd: up.cmd.delta,
                    a_cmd: up.cmd.accel,
                    authority,
                    min_h: up.min_h,
                    u2_norm: up.u2_norm,
                    beta: up.beta,
                });
            }
        }

        // Despawn completed vehicles (descending index keeps positions valid).
        for &i in completed_idx.iter().rev() {
            let v = self.vehicles.remove(i);
            let track = self.library.get(v.movement).expect("checked");
            let transit_s = (t.saturating_sub(v.spawn_step)) as f64 * self.cfg.ts;
            let free_flow_s = self.free_flow_s(track);
            self.completions.push(CompletionRecord {
                id: v.id,
                movement: v.movement,
                spawn_step: v.spawn_step,
                complete_step: t,
                transit_s,
                free_flow_s,
                delay_s: transit_s - free_flow_s,
            });
        }

        // Pairwise collision detection and gap statistics.
        let mut min_gap: Option<f64> = None;
        let radius = self.cfg.vehicle.circumradius();
        for i in 0..self.vehicles.len() {
            for j in (i + 1)..self.vehicles.len() {
                let (a, b) = (&self.vehicles[i], &self.vehicles[j]);
                let gap = ((a.state.position() - b.state.position()).norm() - 2.0 * radius)
                    .max(0.0);
                min_gap = Some(min_gap.map_or(gap, |m: f64| m.min(gap)));
                let pair = (a.id.min(b.id), a.id.max(b.id));
                if detect_collision(&a.state, &self.cfg.vehicle, &b.state, &self.cfg.vehicle) {
                    if self.overlapping.insert(pair) {
                        self.collision_events += 1;
                    }
                } else {
                    self.overlapping.remove(&pair);
                }
            }
        }
        if let Some(g) = min_gap {
            self.step_min_gaps.push(g);
        }

        let counts: Vec<u64> = self.ledger.counts().iter().map(|(_, c)| *c).collect();
        let (jfi, gini) = if self.cfg.policy == Policy::Proposed {
            (metrics::jain_index(&counts), metrics::gini(&counts))
        } else {
            (1.0, 0.0)
        };
        self.step_rows.push(StepRow {
            t,
            winner,
            eligible: allocation.map_or(0, |a| a.eligible),
            winner_iau: allocation.map_or(0.0, |a| a.winner_iau),
            active: self.vehicles.len(),
            min_gap,
            min_h: step_min_h,
            jfi,
            gini,
        });

        self.clock += 1;
        Ok(())
    }

    /// Run to the configured horizon.
    pub fn run_to_end(&mut self) -> Result<(), SimError> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(())
    }

    pub fn into_artifacts(self) -> RunArtifacts {
        let pending: u64 = self.spawners.iter().map(|s| s.pending.len() as u64).sum();
        let authority_counts = if self.cfg.policy == Policy::Proposed {
            self.ledger.counts().iter().map(|(_, c)| *c).collect()
        } else {
            Vec::new()
        };
        RunArtifacts {
            policy: self.cfg.policy,
            ts: self.cfg.ts,
            horizon_steps: self.horizon_steps,
            vehicle_rows: self.vehicle_rows,
            step_rows: self.step_rows,
            completions: self.completions,
            collision_events: self.collision_events,
            step_min_gaps: self.step_min_gaps,
            scheduled: self.scheduled,
            spawned: self.spawned,
            pending_at_end: pending,
            active_at_end: self.vehicles.len() as u64,
            authority_counts,
        }
    }
}

/// Gap to the nearest vehicle ahead on `track` (the ego route), if any.
fn leader_gap(
    vehicles: &[SimVehicle],
    me: usize,
    track: &RouteTrack,
    vehicle_length: f64,
) -> Option<f64> {
    let ego = &vehicles[me];
    let mut best: Option<f64> = None;
    for (wi, w) in vehicles.iter().enumerate() {
        if wi == me {
            continue;
        }
        let wp = w.state.position();
        let mut j = ego.ctrl.k_hint;
        while j < track.traj.states.len() {
            let s_j = track.cum_s[j];
            if s_j - ego.s_pos > FOLLOW_LOOKAHEAD {
                break;
            }
            if s_j > ego.s_pos + 0.5
                && (track.traj.states[j].position() - wp).norm() < FOLLOW_CORRIDOR
            {
                let gap = s_j - ego.s_pos - vehicle_length;
                best = Some(best.map_or(gap, |b: f64| b.min(gap)));
                break;
            }
            j += 3;
        }
    }
    best
}

/// Run a full scenario against a pre-built library and reduce it to
/// artifacts.
pub fn run_scenario(cfg: &ScenarioConfig, library: &TrajectoryLibrary) -> Result<RunArtifacts, SimError> {
    let mut sim = Simulation::new(cfg.clone(), library.clone())?;
    sim.run_to_end()?;
    Ok(sim.into_artifacts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::MovementSplit;

    fn tiny_cfg() -> ScenarioConfig {
        ScenarioConfig {
            horizon_s: 30.0,
            demand: crate::scenario::DemandSpec {
                level: 400.0,
                ratios: [1.0, 1.0, 1.0, 1.0],
                split: MovementSplit::default(),
            },
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn empty_world_only_advances_clock() {
        let mut cfg = tiny_cfg();
        cfg.horizon_s = 0.1;
        // Demand so sparse nothing spawns within the horizon.
        cfg.demand.level = 1.0;
        let lib = TrajectoryLibrary::build(&cfg).unwrap();
        let mut sim = Simulation::new(cfg, lib).unwrap();
        sim.step().unwrap();
        assert_eq!(sim.clock(), 1);
        assert_eq!(sim.active_count(), 0);
        assert!(sim.conservation_holds());
    }

    #[test]
    fn zero_horizon_produces_empty_artifacts() {
        let mut cfg = tiny_cfg();
        cfg.horizon_s = 0.0;
        let lib = TrajectoryLibrary::build(&cfg).unwrap();
        let art = run_scenario(&cfg, &lib).unwrap();
        assert_eq!(art.step_rows.len(), 0);
        assert_eq!(art.completions.len(), 0);
    }
}
