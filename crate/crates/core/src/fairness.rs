//! Centralized control-authority allocation by inequity-aversion utility.
//!
//! Each step the allocator scores every active vehicle with a payoff built
//! from its recent-control ratio, waiting time and time-since-last-control,
//! folds pairwise inequity penalties and a velocity-deviation bonus into the
//! utility, and grants authority to the argmax over the eligible set.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;

pub type VehicleId = u32;

/// Weights of the payoff and inequity-aversion utility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FairnessParams {
    /// Payoff weights for (recent ratio, waiting, urgency); must sum to 1.
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    /// Disadvantageous-inequality aversion, beta1 >= beta2.
    pub beta1: f64,
    /// Advantageous-inequality aversion.
    pub beta2: f64,
    /// Velocity-deviation bonus weight.
    pub delta: f64,
    /// Fairness window W [steps].
    pub window: u64,
    /// Eligibility cutoff on the recent-control ratio.
    pub r_threshold: f64,
}

impl Default for FairnessParams {
    fn default() -> Self {
        Self {
            alpha1: 0.3,
            alpha2: 0.4,
            alpha3: 0.3,
            beta1: 1.5,
            beta2: 0.5,
            delta: 0.3,
            window: 50,
            r_threshold: 0.5,
        }
    }
}

impl FairnessParams {
    pub fn validate(&self) -> Result<(), AllocationError> {
        if ((self.alpha1 + self.alpha2 + self.alpha3) - 1.0).abs() > 1e-9 {
            return Err(AllocationError::InvalidParams("alpha weights must sum to 1"));
        }
        if !(self.beta1 >= self.beta2 && self.beta2 >= 0.0) {
            return Err(AllocationError::InvalidParams("require beta1 >= beta2 >= 0"));
        }
        if self.window < 1 {
            return Err(AllocationError::InvalidParams("window must be >= 1"));
        }
        if !(self.r_threshold > 0.0 && self.r_threshold <= 1.0) {
            return Err(AllocationError::InvalidParams("r_threshold must be in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AllocationError {
    EmptyActiveSet,
    InvalidParams(&'static str),
}

impl fmt::Display for AllocationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyActiveSet => write!(f, "no active vehicles to allocate"),
            Self::InvalidParams(what) => write!(f, "invalid fairness parameters: {what}"),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct VehicleRecord {
    /// Grant steps inside the fairness window, oldest first.
    recent: VecDeque<u64>,
    /// Consecutive steps without authority.
    wait_steps: u64,
    /// Step of the last grant, if any.
    last_grant: Option<u64>,
    /// Cumulative grant count.
    count: u64,
}

/// Per-vehicle control history, waiting counters and grant totals.
#[derive(Debug, Clone, Default)]
pub struct FairnessLedger {
    records: BTreeMap<VehicleId, VehicleRecord>,
    total_grants: u64,
}

impl FairnessLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ensure a vehicle is tracked (idempotent).
    pub fn register(&mut self, id: VehicleId) {
        self.records.entry(id).or_default();
    }

    /// Cumulative grant count of one vehicle.
    pub fn count(&self, id: VehicleId) -> u64 {
        self.records.get(&id).map_or(0, |r| r.count)
    }

    /// Consecutive wait steps of one vehicle.
    pub fn wait_steps(&self, id: VehicleId) -> u64 {
        self.records.get(&id).map_or(0, |r| r.wait_steps)
    }

    /// Grant counts of every vehicle ever tracked, keyed by id.
    pub fn counts(&self) -> Vec<(VehicleId, u64)> {
        self.records.iter().map(|(id, r)| (*id, r.count)).collect()
    }

    pub fn total_grants(&self) -> u64 {
        self.total_grants
    }

    /// Recent-control ratio `|{t' in H_i : t - t' <= W}| / W`.
    pub fn recent_ratio(&self, id: VehicleId, t: u64, window: u64) -> f64 {
        let Some(rec) = self.records.get(&id) else { return 0.0 };
        let in_window =
            rec.recent.iter().filter(|&&g| t.saturating_sub(g) <= window).count();
        in_window as f64 / window as f64
    }

    /// Payoff `alpha1 r + alpha2 w + alpha3 u` with `w = min(1, tau/10)` and
    /// `u = min(1, (t - t_last)/10)`; never-granted vehicles score `u = 1`.
    pub fn payoff(&self, id: VehicleId, t: u64, params: &FairnessParams) -> f64 {
        let rec = self.records.get(&id);
        let r = self.recent_ratio(id, t, params.window);
        let w = (rec.map_or(0, |x| x.wait_steps) as f64 / 10.0).min(1.0);
        let u = match rec.and_then(|x| x.last_grant) {
            Some(last) => ((t.saturating_sub(last)) as f64 / 10.0).min(1.0),
            None => 1.0,
        };
        params.alpha1 * r + params.alpha2 * w + params.alpha3 * u
    }

    fn record_grant(&mut self, winner: VehicleId, t: u64, active: &[VehicleId], window: u64) {
        for id in active {
            let rec = self.records.entry(*id).or_default();
            if *id == winner {
                rec.recent.push_back(t);
                while let Some(&front) = rec.recent.front() {
                    if t.saturating_sub(front) > window {
                        rec.recent.pop_front();
                    } else {
                        break;
                    }
                }
                rec.wait_steps = 0;
                rec.last_grant = Some(t);
                rec.count += 1;
            } else {
                rec.wait_steps += 1;
            }
        }
        self.total_grants += 1;
    }
}

/// Inequity-aversion utility of vehicle `i` given every payoff:
/// `p_i - b1/(N-1) sum max(p_j - p_i, 0) - b2/(N-1) sum max(p_i - p_j, 0)
/// + delta v_i`. With a single vehicle both sums are skipped.
pub fn iau(payoffs: &[f64], i: usize, v_dev: f64, params: &FairnessParams) -> f64 {
    let n = payoffs.len();
    let p_i = payoffs[i];
    let mut util = p_i + params.delta * v_dev;
    if n > 1 {
        let mut behind = 0.0;
        let mut ahead = 0.0;
        for (j, p_j) in payoffs.iter().enumerate() {
            if j == i {
                continue;
            }
            behind += (p_j - p_i).max(0.0);
            ahead += (p_i - p_j).max(0.0);
        }
        let scale = 1.0 / (n - 1) as f64;
        util -= params.beta1 * scale * behind + params.beta2 * scale * ahead;
    }
    util
}

/// Normalized deviation of one speed from the mean of the active speeds,
/// clamped to [0, 1].
pub fn velocity_deviation(v_i: f64, speeds: &[f64], v_max: f64) -> f64 {
    if speeds.is_empty() {
        return 0.0;
    }
    let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
    ((v_i - mean).abs() / v_max).clamp(0.0, 1.0)
}

/// Outcome of one allocation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub winner: VehicleId,
    pub winner_iau: f64,
    /// Number of vehicles below the eligibility cutoff (before fallback).
    pub eligible: usize,
}

/// Grant authority for step `t` among `active = [(id, speed)]` and update
/// the ledger.
///
/// The very first grant of a run is drawn uniformly from the active set via
/// the run RNG; afterwards the winner is the IAU argmax over the eligible
/// set `{i : r_i < r_threshold}` (falling back to every vehicle), with ties
/// broken by longest wait, then lowest id.
pub fn allocate<R: RngCore>(
    ledger: &mut FairnessLedger,
    t: u64,
    active: &[(VehicleId, f64)],
    params: &FairnessParams,
    v_max: f64,
    rng: &mut R,
) -> Result<Allocation, AllocationError> {
    if active.is_empty() {
        return Err(AllocationError::EmptyActiveSet);
    }
    params.validate()?;
    let ids: Vec<VehicleId> = active.iter().map(|(id, _)| *id).collect();
    for id in &ids {
        ledger.register(*id);
    }

    if ledger.total_grants == 0 {
        let pick = (rng.next_u64() % ids.len() as u64) as usize;
        let winner = ids[pick];
        ledger.record_grant(winner, t, &ids, params.window);
        return Ok(Allocation { winner, winner_iau: 0.0, eligible: ids.len() });
    }

    let eligible: Vec<usize> = (0..ids.len())
        .filter(|&i| ledger.recent_ratio(ids[i], t, params.window) < params.r_threshold)
        .collect();
    let eligible_count = eligible.len();
    let pool: Vec<usize> =
        if eligible.is_empty() { (0..ids.len()).collect() } else { eligible };

    let payoffs: Vec<f64> = ids.iter().map(|id| ledger.payoff(*id, t, params)).collect();
    let speeds: Vec<f64> = active.iter().map(|(_, v)| *v).collect();

    let mut best: Option<(usize, f64)> = None;
    for &i in &pool {
        let v_dev = velocity_deviation(speeds[i], &speeds, v_max);
        let util = iau(&payoffs, i, v_dev, params);
        let better = match best {
            None => true,
            Some((bi, bu)) => {
                util > bu
                    || (util == bu
                        && (ledger.wait_steps(ids[i]) > ledger.wait_steps(ids[bi])
                            || (ledger.wait_steps(ids[i]) == ledger.wait_steps(ids[bi])
                                && ids[i] < ids[bi])))
            }
        };
        if better {
            best = Some((i, util));
        }
    }
    let (wi, util) = best.expect("non-empty pool");
    let winner = ids[wi];
    ledger.record_grant(winner, t, &ids, params.window);
    Ok(Allocation { winner, winner_iau: util, eligible: eligible_count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn seeded() -> StdRng {
        StdRng::seed_from_u64(7)
    }

    #[test]
    fn waiting_factor_caps_at_one() {
        let mut ledger = FairnessLedger::new();
        let params = FairnessParams { alpha1: 0.0, alpha2: 1.0, alpha3: 0.0, ..Default::default() };
        ledger.register(1);
        ledger.records.get_mut(&1).unwrap().wait_steps = 5;
        ledger.records.get_mut(&1).unwrap().last_grant = Some(0);
        assert_relative_eq!(ledger.payoff(1, 5, &params), 0.5);
        ledger.records.get_mut(&1).unwrap().wait_steps = 25;
        assert_relative_eq!(ledger.payoff(1, 25, &params), 1.0);
    }

    #[test]
    fn recent_ratio_counts_window_grants() {
        let mut ledger = FairnessLedger::new();
        ledger.register(1);
        let rec = ledger.records.get_mut(&1).unwrap();
        for g in 60..70 {
            rec.recent.push_back(g);
        }
        assert_relative_eq!(ledger.recent_ratio(1, 100, 50), 0.2);
    }

    #[test]
    fn payoff_equal_weights_hand_value() {
        // r = 0.2, w = 0.5, u = 1.0 with alpha = (1/3, 1/3, 1/3).
        let mut ledger = FairnessLedger::new();
        let params = FairnessParams {
            alpha1: 1.0 / 3.0,
            alpha2: 1.0 / 3.0,
            alpha3: 1.0 / 3.0,
            ..Default::default()
        };
        ledger.register(1);
        let rec = ledger.records.get_mut(&1).unwrap();
        for g in 90..100 {
            rec.recent.push_back(g);
        }
        rec.wait_steps = 5;
        rec.last_grant = None;
        let p = ledger.payoff(1, 100, &params);
        assert_relative_eq!(p, 0.5667, epsilon = 1e-4);
    }

    #[test]
    fn iau_equal_payoffs_is_identity() {
        let params = FairnessParams::default();
        let payoffs = [0.4, 0.4, 0.4];
        for i in 0..3 {
            assert_relative_eq!(iau(&payoffs, i, 0.0, &params), 0.4);
        }
    }

    #[test]
    fn iau_two_vehicle_hand_values() {
        let params = FairnessParams { beta1: 1.5, beta2: 0.5, ..Default::default() };
        let payoffs = [0.8, 0.4];
        assert_relative_eq!(iau(&payoffs, 0, 0.0, &params), 0.6);
        assert_relative_eq!(iau(&payoffs, 1, 0.0, &params), -0.2);
    }

    #[test]
    fn iau_shift_invariance() {
        let params = FairnessParams::default();
        let payoffs = [0.8, 0.4, 0.55];
        let shifted: Vec<f64> = payoffs.iter().map(|p| p + 0.17).collect();
        for i in 0..3 {
            assert_relative_eq!(
                iau(&shifted, i, 0.0, &params),
                iau(&payoffs, i, 0.0, &params) + 0.17,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn velocity_deviation_examples() {
        assert_eq!(velocity_deviation(5.0, &[5.0, 5.0, 5.0], 18.05), 0.0);
        let d = velocity_deviation(0.0, &[0.0, 10.0], 18.05);
        assert_relative_eq!(d, 5.0 / 18.05, epsilon = 1e-12);
        assert_eq!(velocity_deviation(25.0, &[5.0], 18.05), 1.0);
    }

    #[test]
    fn single_vehicle_always_wins() {
        let mut ledger = FairnessLedger::new();
        let params = FairnessParams::default();
        let mut rng = seeded();
        for t in 0..20 {
            let a = allocate(&mut ledger, t, &[(3, 8.0)], &params, 18.05, &mut rng).unwrap();
            assert_eq!(a.winner, 3);
        }
        assert_eq!(ledger.count(3), 20);
    }

    #[test]
    fn empty_active_set_is_an_error() {
        let mut ledger = FairnessLedger::new();
        let mut rng = seeded();
        assert_eq!(
            allocate(&mut ledger, 0, &[], &FairnessParams::default(), 18.05, &mut rng),
            Err(AllocationError::EmptyActiveSet)
        );
    }

    #[test]
    fn first_grant_is_rng_driven() {
        let params = FairnessParams::default();
        let active = [(0, 8.0), (1, 8.0), (2, 8.0), (3, 8.0)];
        let mut seen = alloc::collections::BTreeSet::new();
        for seed in 0..32u64 {
            let mut ledger = FairnessLedger::new();
            let mut rng = StdRng::seed_from_u64(seed);
            let a = allocate(&mut ledger, 0, &active, &params, 18.05, &mut rng).unwrap();
            seen.insert(a.winner);
        }
        assert!(seen.len() > 1, "initial grant should vary with the seed");
    }

    #[test]
    fn counts_sum_matches_steps() {
        let mut ledger = FairnessLedger::new();
        let params = FairnessParams::default();
        let mut rng = seeded();
        let active = [(0, 8.0), (1, 8.0), (2, 8.0)];
        for t in 0..100 {
            allocate(&mut ledger, t, &active, &params, 18.05, &mut rng).unwrap();
        }
        let total: u64 = ledger.counts().iter().map(|(_, c)| c).sum();
        assert_eq!(total, 100);
        assert_eq!(ledger.total_grants(), 100);
    }
}
