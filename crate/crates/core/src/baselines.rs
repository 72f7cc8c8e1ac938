//! Classical controllers: Max Pressure, Longest Queue First, fixed-time.
//!
//! All three are pure functions of their inputs and issue the same two
//! actions as the agent; min/max-green masking and yellow insertion are
//! applied by the signal plant, not here. With infinite-sink outgoing
//! lanes the downstream occupancy term of Max Pressure is identically
//! zero, so a phase's pressure reduces to the sum of its incoming queues.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControllerKind {
    MaxPressure,
    LongestQueueFirst,
    /// Cycle length in seconds; phase 0 gets the first half.
    FixedTime(u32),
}

/// Phase with the highest total incoming queue; ties go to phase 0.
pub fn max_pressure_action(queues: &[u32], phase_of_lane: &[u8]) -> u8 {
    debug_assert_eq!(queues.len(), phase_of_lane.len());
    let mut pressure = [0u64; 2];
    for (&q, &p) in queues.iter().zip(phase_of_lane.iter()) {
        pressure[(p & 1) as usize] += q as u64;
    }
    if pressure[1] > pressure[0] {
        1
    } else {
        0
    }
}

/// Phase serving the single longest queue; ties across lanes go to the
/// lower lane index, hence the lower phase index when queues are equal.
pub fn lqf_action(queues: &[u32], phase_of_lane: &[u8]) -> u8 {
    debug_assert_eq!(queues.len(), phase_of_lane.len());
    let mut best_lane = 0usize;
    for (i, &q) in queues.iter().enumerate() {
        if q > queues[best_lane] {
            best_lane = i;
        }
    }
    phase_of_lane[best_lane] & 1
}

/// Phase 0 during the first half of each cycle, phase 1 during the second.
pub fn fixed_time_action(clock: u64, cycle: u32) -> u8 {
    let cycle = cycle.max(2) as u64;
    if clock % cycle < cycle / 2 {
        0
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // N/S lanes on phase 0, E/W on phase 1.
    const PHASES: [u8; 4] = [0, 0, 1, 1];

    #[test]
    fn max_pressure_picks_heavier_phase() {
        assert_eq!(max_pressure_action(&[4, 2, 1, 1], &PHASES), 0);
        assert_eq!(max_pressure_action(&[0, 0, 0, 5], &PHASES), 1);
    }

    #[test]
    fn max_pressure_all_zero_ties_to_phase_zero() {
        assert_eq!(max_pressure_action(&[0, 0, 0, 0], &PHASES), 0);
        assert_eq!(max_pressure_action(&[3, 1, 2, 2], &PHASES), 0);
    }

    #[test]
    fn lqf_serves_longest_single_queue() {
        assert_eq!(lqf_action(&[3, 1, 7, 0], &PHASES), 1);
        assert_eq!(lqf_action(&[0, 4, 0, 0], &PHASES), 0);
        // Sum favors phase 1 but the longest lane is on phase 0.
        assert_eq!(lqf_action(&[5, 0, 4, 4], &PHASES), 0);
    }

    #[test]
    fn lqf_all_equal_ties_to_phase_zero() {
        assert_eq!(lqf_action(&[2, 2, 2, 2], &PHASES), 0);
        assert_eq!(lqf_action(&[0, 0, 0, 0], &PHASES), 0);
    }

    #[test]
    fn fixed_time_alternates_halves() {
        assert_eq!(fixed_time_action(0, 60), 0);
        assert_eq!(fixed_time_action(29, 60), 0);
        assert_eq!(fixed_time_action(30, 60), 1);
        assert_eq!(fixed_time_action(59, 60), 1);
        assert_eq!(fixed_time_action(60, 60), 0);
    }
}
