//! State vector construction and the four reward functions.
//!
//! The observation is [phase one-hot (2), min-green flag, per-lane density
//! (4), per-lane queue (4)], every component in [0, 1]. Rewards are computed
//! from the same interval measurements: the momentum reward is the mean of
//! (optionally mass-scaled) vehicle speeds in the detection zones, the
//! waiting and queue rewards are plain negated totals, and the differential
//! waiting reward is the step-to-step drop in total accumulated waiting.

use serde::{Deserialize, Serialize};

use crate::sim::vehicle::REFERENCE_MASS_KG;
use crate::sim::{SimConfig, StepMeasurements, ZoneVehicle, N_LANES};
use crate::sim::signal::SignalState;

pub const OBS_LEN: usize = 2 + 1 + 2 * N_LANES;

/// A state vector as fed to a controller. Traffic observations always have
/// length `OBS_LEN`; the container stays generic so the learning stack can
/// drive other MDPs (the tabular test environments in particular).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Selects which reward signal a learning run optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Mbrf { mass_scaling: bool },
    NegWaiting,
    NegQueue,
    DiffWaiting,
}

impl RewardKind {
    pub fn label(&self) -> &'static str {
        match self {
            RewardKind::Mbrf { .. } => "mbrf",
            RewardKind::NegWaiting => "wait",
            RewardKind::NegQueue => "queue",
            RewardKind::DiffWaiting => "diff",
        }
    }
}

/// Per-episode reward bookkeeping; only the differential waiting reward
/// carries state (the previous-wait accumulator, zero at episode start).
#[derive(Debug, Clone)]
pub struct RewardState {
    pub kind: RewardKind,
    prev_wait: f64,
}

impl RewardState {
    pub fn new(kind: RewardKind) -> Self {
        RewardState {
            kind,
            prev_wait: 0.0,
        }
    }

    pub fn compute(&mut self, meas: &StepMeasurements) -> f64 {
        match self.kind {
            RewardKind::Mbrf { mass_scaling } => mbrf_reward(&meas.zone_vehicles, mass_scaling),
            RewardKind::NegWaiting => neg_waiting_reward(meas.total_wait),
            RewardKind::NegQueue => neg_queue_reward(meas.halted_total),
            RewardKind::DiffWaiting => {
                let (r, next) = diff_waiting_reward(self.prev_wait, meas.total_wait);
                self.prev_wait = next;
                r
            }
        }
    }
}

/// Builds the agent's state vector from the last interval's measurements
/// and the signal state at the decision boundary.
pub fn build_observation(
    meas: &StepMeasurements,
    signal: &SignalState,
    config: &SimConfig,
) -> Observation {
    let mut v = vec![0.0; OBS_LEN];
    v[signal.phase as usize & 1] = 1.0;
    v[2] = if signal.phase_elapsed >= config.g_min {
        1.0
    } else {
        0.0
    };
    let capacity = config.lane_capacity() as f64;
    for i in 0..N_LANES {
        v[3 + i] = meas.mean_density[i].clamp(0.0, 1.0);
        v[3 + N_LANES + i] = (meas.mean_halted[i] / capacity).clamp(0.0, 1.0);
    }
    Observation(v)
}

/// Observation at clock zero, before any interval has run.
pub fn initial_observation(signal: &SignalState, config: &SimConfig) -> Observation {
    build_observation(&StepMeasurements::default(), signal, config)
}

/// Mean of mass-weighted speeds over the detection-zone vehicles. With
/// scaling off every weight is 1 and this is the mean speed; with it on,
/// weights are mass relative to a 1500 kg car. Empty zone yields 0.
pub fn mbrf_reward(zone_vehicles: &[ZoneVehicle], mass_scaling: bool) -> f64 {
    if zone_vehicles.is_empty() {
        return 0.0;
    }
    let sum: f64 = zone_vehicles
        .iter()
        .map(|z| {
            let weight = if mass_scaling {
                z.mass / REFERENCE_MASS_KG
            } else {
                1.0
            };
            weight * z.mean_speed
        })
        .sum();
    sum / zone_vehicles.len() as f64
}

pub fn neg_waiting_reward(total_wait: f64) -> f64 {
    -total_wait
}

pub fn neg_queue_reward(halted_total: u32) -> f64 {
    -(halted_total as f64)
}

/// Returns the reward and the updated previous-wait accumulator.
pub fn diff_waiting_reward(prev_wait: f64, curr_wait: f64) -> (f64, f64) {
    (prev_wait - curr_wait, curr_wait)
}
