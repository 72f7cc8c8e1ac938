//! Two-phase signal machine with min/max-green masking and yellow
//! transitions.
//!
//! Phase 0 is North-South green, phase 1 East-West green. Switch requests
//! arrive once per control interval through `apply_action`; illegal
//! requests are masked, never rejected. A switch inserts a fixed yellow
//! during which both the old and new phase are red for crossing purposes.
//! Yellow seconds do not count toward the next phase's green time.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct SignalState {
    pub phase: u8,
    /// Seconds of green in the current phase. Frozen during yellow.
    pub phase_elapsed: u32,
    pub in_yellow: bool,
    pub yellow_remaining: u32,
    pub pending_phase: u8,
}

impl SignalState {
    pub fn new() -> Self {
        SignalState {
            phase: 0,
            phase_elapsed: 0,
            in_yellow: false,
            yellow_remaining: 0,
            pending_phase: 0,
        }
    }

    /// Whether lanes served by `phase` may cross the stop line right now.
    pub fn is_green(&self, phase: u8) -> bool {
        !self.in_yellow && self.phase == phase
    }

    fn begin_yellow(&mut self, to: u8, yellow: u32) {
        self.in_yellow = true;
        self.yellow_remaining = yellow;
        self.pending_phase = to;
    }

    /// Control-boundary action. Holding the current phase, or requesting a
    /// switch before `g_min` green seconds, keeps the green; a legal switch
    /// request begins yellow toward the requested phase; at `g_max` the
    /// switch is forced regardless of the action. During a yellow that
    /// spilled over a boundary the action is ignored entirely.
    pub fn apply_action(&mut self, action: u8, g_min: u32, g_max: u32, yellow: u32) {
        if self.in_yellow {
            return;
        }
        if self.phase_elapsed >= g_max {
            let to = 1 - self.phase;
            self.begin_yellow(to, yellow);
            return;
        }
        if action != self.phase && self.phase_elapsed >= g_min {
            self.begin_yellow(action, yellow);
        }
    }

    /// End-of-sub-step time accounting. The pre-call state is what vehicles
    /// faced during the sub-step. Commits the pending phase when yellow runs
    /// out and forces a yellow the instant green time reaches `g_max`, so
    /// `phase_elapsed` can never exceed it.
    pub fn advance(&mut self, dt: u32, g_max: u32, yellow: u32) {
        if self.in_yellow {
            self.yellow_remaining = self.yellow_remaining.saturating_sub(dt);
            if self.yellow_remaining == 0 {
                self.phase = self.pending_phase;
                self.in_yellow = false;
                self.phase_elapsed = 0;
            }
        } else {
            self.phase_elapsed += dt;
            if self.phase_elapsed >= g_max {
                let to = 1 - self.phase;
                self.begin_yellow(to, yellow);
            }
        }
    }
}

impl Default for SignalState {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const G_MIN: u32 = 5;
    const G_MAX: u32 = 50;
    const YELLOW: u32 = 2;

    #[test]
    fn switch_before_min_green_is_masked() {
        let mut s = SignalState::new();
        s.phase_elapsed = 3;
        s.apply_action(1, G_MIN, G_MAX, YELLOW);
        assert_eq!(s.phase, 0);
        assert!(!s.in_yellow);
    }

    #[test]
    fn legal_switch_begins_yellow() {
        let mut s = SignalState::new();
        s.phase_elapsed = 10;
        s.apply_action(1, G_MIN, G_MAX, YELLOW);
        assert!(s.in_yellow);
        assert_eq!(s.yellow_remaining, 2);
        assert_eq!(s.pending_phase, 1);
        assert_eq!(s.phase, 0);
    }

    #[test]
    fn max_green_forces_switch_despite_hold() {
        let mut s = SignalState::new();
        s.phase_elapsed = 50;
        s.apply_action(0, G_MIN, G_MAX, YELLOW);
        assert!(s.in_yellow);
        assert_eq!(s.pending_phase, 1);
    }

    #[test]
    fn holding_same_phase_keeps_green() {
        let mut s = SignalState::new();
        s.phase_elapsed = 20;
        s.apply_action(0, G_MIN, G_MAX, YELLOW);
        assert!(!s.in_yellow);
        assert_eq!(s.phase, 0);
    }

    #[test]
    fn yellow_lasts_exactly_two_advances_then_commits() {
        let mut s = SignalState::new();
        s.phase_elapsed = 10;
        s.apply_action(1, G_MIN, G_MAX, YELLOW);
        assert!(s.is_green(0) == false && s.is_green(1) == false);
        s.advance(1, G_MAX, YELLOW);
        assert!(s.in_yellow && s.yellow_remaining == 1);
        s.advance(1, G_MAX, YELLOW);
        assert!(!s.in_yellow);
        assert_eq!(s.phase, 1);
        assert_eq!(s.phase_elapsed, 0);
        assert!(s.is_green(1));
    }

    #[test]
    fn green_time_never_exceeds_max() {
        let mut s = SignalState::new();
        for _ in 0..200 {
            s.advance(1, G_MAX, YELLOW);
            assert!(s.phase_elapsed <= G_MAX);
        }
    }
}
