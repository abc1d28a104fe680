//! Fairness, safety, efficiency and real-time metrics over run artifacts.

use alloc::vec::Vec;

// f64 math comes from the trait in pure no_std graphs; std graphs
// resolve it inherently and would flag the import.
#[allow(unused_imports)]
use num_traits::Float;


/// Jain's fairness index `(sum c)^2 / (N sum c^2)`.
///
/// All-zero counts are defined as perfectly fair (1.0) so degenerate
/// start-of-run steps do not pollute the series.
pub fn jain_index(counts: &[u64]) -> f64 {
    let n = counts.len();
    if n == 0 {
        return 1.0;
    }
    let sum: f64 = counts.iter().map(|&c| c as f64).sum();
    if sum == 0.0 {
        return 1.0;
    }
    let sumsq: f64 = counts.iter().map(|&c| (c as f64) * (c as f64)).sum();
    sum * sum / (n as f64 * sumsq)
}

/// Gini coefficient `(1/N)(N + 1 - 2 sum (N+1-i) c*_i / sum c*_i)` over the
/// ascending-sorted counts; all-zero counts are defined as 0.
pub fn gini(counts: &[u64]) -> f64 {
    let n = counts.len();
    if n == 0 {
        return 0.0;
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let mut sorted: Vec<u64> = counts.to_vec();
    sorted.sort_unstable();
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &c)| (n - i) as f64 * c as f64) // rank i is 1-based: N+1-i == n-i
        .sum();
    (n as f64 + 1.0 - 2.0 * weighted / total as f64) / n as f64
}

/// Safety figures accumulated over a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetySummary {
    /// Smallest pairwise gap over all steps [m]; `None` when no step ever
    /// had two vehicles.
    pub min_distance: Option<f64>,
    /// Mean of the per-step minimum gaps over steps with >= 2 vehicles [m].
    pub avg_min_distance: Option<f64>,
    /// Steps where some pair was below the critical threshold.
    pub critical_steps: u64,
    /// Collision events reported by the detector.
    pub collisions: u64,
}

/// Reduce per-step minimum pairwise distances (one entry per step that had
/// at least two vehicles) against a critical threshold.
pub fn safety_summary(step_min_distances: &[f64], threshold: f64, collisions: u64) -> SafetySummary {
    if step_min_distances.is_empty() {
        return SafetySummary {
            min_distance: None,
            avg_min_distance: None,
            critical_steps: 0,
            collisions,
        };
    }
    let mut min = f64::INFINITY;
    let mut sum = 0.0;
    let mut critical = 0u64;
    for &d in step_min_distances {
        if d < min {
            min = d;
        }
        sum += d;
        if d < threshold {
            critical += 1;
        }
    }
    SafetySummary {
        min_distance: Some(min),
        avg_min_distance: Some(sum / step_min_distances.len() as f64),
        critical_steps: critical,
        collisions,
    }
}

/// Throughput and delay statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencySummary {
    pub completions: u64,
    /// Completions scaled to vehicles per hour.
    pub throughput: f64,
    pub avg_delay: Option<f64>,
    pub max_delay: Option<f64>,
    pub min_delay: Option<f64>,
    /// Population standard deviation of the delays.
    pub std_delay: Option<f64>,
}

/// `throughput = completions * 3600 / horizon_s`; delay statistics over the
/// per-vehicle (transit - free flow) values.
pub fn efficiency_summary(delays: &[f64], horizon_s: f64) -> EfficiencySummary {
    let completions = delays.len() as u64;
    let throughput = completions as f64 * 3600.0 / horizon_s;
    if delays.is_empty() {
        return EfficiencySummary {
            completions,
            throughput,
            avg_delay: None,
            max_delay: None,
            min_delay: None,
            std_delay: None,
        };
    }
    let n = delays.len() as f64;
    let avg = delays.iter().sum::<f64>() / n;
    let max = delays.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = delays.iter().cloned().fold(f64::INFINITY, f64::min);
    let var = delays.iter().map(|d| (d - avg) * (d - avg)).sum::<f64>() / n;
    EfficiencySummary {
        completions,
        throughput,
        avg_delay: Some(avg),
        max_delay: Some(max),
        min_delay: Some(min),
        std_delay: Some(var.sqrt()),
    }
}

/// Control-loop rate statistics [Hz].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyStats {
    pub avg: f64,
    pub min: f64,
    pub max: f64,
    /// 10th / 90th percentile by nearest rank.
    pub p10: f64,
    pub p90: f64,
}

/// Number of warm-up steps dropped before computing frequency statistics.
pub const FREQ_WARMUP: usize = 10;

fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = (q * n as f64).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

/// Convert per-step wall-clock durations [s] to rates and summarize them.
/// The first [`FREQ_WARMUP`] samples are excluded when enough data exists.
pub fn frequency_stats(durations_s: &[f64]) -> Option<FrequencyStats> {
    let data =
        if durations_s.len() > FREQ_WARMUP { &durations_s[FREQ_WARMUP..] } else { durations_s };
    if data.is_empty() {
        return None;
    }
    let mut hz: Vec<f64> = data.iter().map(|&d| 1.0 / d.max(1e-12)).collect();
    hz.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let avg = hz.iter().sum::<f64>() / hz.len() as f64;
    Some(FrequencyStats {
        avg,
        min: hz[0],
        max: hz[hz.len() - 1],
        p10: nearest_rank(&hz, 0.10),
        p90: nearest_rank(&hz, 0.90),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jain_perfect_equality() {
        assert_relative_eq!(jain_index(&[1, 1, 1, 1]), 1.0);
    }

    #[test]
    fn jain_single_monopolist() {
        assert_relative_eq!(jain_index(&[9, 0, 0, 0]), 0.25);
    }

    #[test]
    fn jain_mixed_counts() {
        assert_relative_eq!(jain_index(&[1, 2, 3]), 6.0 / 7.0, epsilon = 1e-12);
    }

    #[test]
    fn jain_all_zero_defined_as_one() {
        assert_eq!(jain_index(&[0, 0, 0]), 1.0);
    }

    #[test]
    fn gini_perfect_equality() {
        assert_eq!(gini(&[1, 1, 1]), 0.0);
    }

    #[test]
    fn gini_single_monopolist() {
        assert_relative_eq!(gini(&[0, 0, 1]), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn gini_permutation_invariant() {
        assert_eq!(gini(&[3, 1, 7, 2]), gini(&[7, 2, 3, 1]));
    }

    #[test]
    fn gini_all_zero_defined_as_zero() {
        assert_eq!(gini(&[0, 0]), 0.0);
    }

    #[test]
    fn safety_empty_series() {
        let s = safety_summary(&[], 2.0, 0);
        assert_eq!(s.min_distance, None);
        assert_eq!(s.critical_steps, 0);
    }

    #[test]
    fn safety_critical_counting() {
        let s = safety_summary(&[5.0, 1.9, 3.0], 2.0, 0);
        assert_eq!(s.critical_steps, 1);
        assert_relative_eq!(s.min_distance.unwrap(), 1.9);
        assert_relative_eq!(s.avg_min_distance.unwrap(), (5.0 + 1.9 + 3.0) / 3.0);
    }

    #[test]
    fn efficiency_hand_values() {
        let e = efficiency_summary(&[1.0, 3.0], 60.0);
        assert_relative_eq!(e.throughput, 120.0);
        assert_relative_eq!(e.avg_delay.unwrap(), 2.0);
        assert_relative_eq!(e.max_delay.unwrap(), 3.0);
        assert_relative_eq!(e.min_delay.unwrap(), 1.0);
        assert_relative_eq!(e.std_delay.unwrap(), 1.0);
    }

    #[test]
    fn efficiency_ten_in_a_minute() {
        let e = efficiency_summary(&[0.0; 10], 60.0);
        assert_relative_eq!(e.throughput, 600.0);
    }

    #[test]
    fn efficiency_empty() {
        let e = efficiency_summary(&[], 300.0);
        assert_eq!(e.throughput, 0.0);
        assert_eq!(e.avg_delay, None);
    }

    #[test]
    fn frequency_constant_rate() {
        let f = frequency_stats(&[0.005; 30]).unwrap();
        assert_relative_eq!(f.avg, 200.0);
        assert_relative_eq!(f.min, 200.0);
        assert_relative_eq!(f.max, 200.0);
        assert_relative_eq!(f.p10, 200.0);
        assert_relative_eq!(f.p90, 200.0);
    }

    #[test]
    fn frequency_small_sample_uses_all() {
        let f = frequency_stats(&[0.004, 0.005, 0.010]).unwrap();
        assert_relative_eq!(f.max, 250.0);
        assert_relative_eq!(f.min, 100.0);
    }

    #[test]
    fn frequency_percentile_ordering() {
        let durs: Vec<f64> = (1..=100).map(|i| 0.001 * i as f64).collect();
        let f = frequency_stats(&durs).unwrap();
        assert!(f.p10 <= f.avg && f.avg <= f.p90);
        assert!(f.min <= f.p10 && f.p90 <= f.max);
    }
}
