//! Episode-scoped environment: one simulator rollout seen through the MDP
//! interface (observation in, action in, reward out), with metric
//! accumulation and optional tracing attached.

use crate::dqn::discounted_return;
use crate::error::Result;
use crate::metrics::{EpisodeReport, MetricsAccumulator};
use crate::reward::{build_observation, initial_observation, Observation, RewardKind, RewardState};
use crate::sim::{init_sim, SimConfig, SimState, N_LANES};
use crate::trace::EpisodeTrace;

pub struct Env {
    pub sim: SimState,
    reward: RewardState,
    metrics: MetricsAccumulator,
    obs: Observation,
    queue_snapshot: [u32; N_LANES],
    rewards: Vec<f64>,
    steps_done: u32,
    total_steps: u32,
}

impl Env {
    /// Fresh episode. `demand_seed` replaces the config seed so every
    /// episode draws its own arrival rates and traffic.
    pub fn new(base: &SimConfig, kind: RewardKind, demand_seed: u64, trace: bool) -> Result<Env> {
        let config = SimConfig {
            seed: demand_seed,
            ..base.clone()
        };
        let total_steps = config.steps_per_episode();
        let mut sim = init_sim(config)?;
        if trace {
            sim.enable_trace();
        }
        let obs = initial_observation(&sim.signal, &sim.config);
        Ok(Env {
            sim,
            reward: RewardState::new(kind),
            metrics: MetricsAccumulator::new(),
            obs,
            queue_snapshot: [0; N_LANES],
            rewards: Vec::with_capacity(total_steps as usize),
            steps_done: 0,
            total_steps,
        })
    }

    pub fn observation(&self) -> &Observation {
        &self.obs
    }

    /// Interval-end halted counts per lane, for the classical controllers.
    pub fn queues(&self) -> [u32; N_LANES] {
        self.queue_snapshot
    }

    pub fn clock(&self) -> u64 {
        self.sim.clock
    }

    pub fn done(&self) -> bool {
        self.steps_done >= self.total_steps
    }

    /// Advances one control interval; returns (reward, terminal).
    pub fn step(&mut self, action: u8) -> (f64, bool) {
        debug_assert!(!self.done());
        let meas = self.sim.step(action);
        let r = self.reward.compute(&meas);
        self.metrics.accumulate(&meas);
        self.obs = build_observation(&meas, &self.sim.signal, &self.sim.config);
        self.queue_snapshot = meas.queue_snapshot;
        self.rewards.push(r);
        self.steps_done += 1;
        (r, self.done())
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Wraps up the episode: discounted return under `gamma`, full report,
    /// and the trace if one was recorded.
    pub fn finish(mut self, gamma: f64, seed: u64) -> (EpisodeReport, Option<EpisodeTrace>) {
        let ret = discounted_return(&self.rewards, gamma);
        let trace = self.sim.take_trace();
        (self.metrics.finish(ret, seed), trace)
    }
}

/// A policy for driving evaluation episodes.
pub enum Controller<'a> {
    Greedy(&'a crate::neural::Mlp),
    MaxPressure,
    LongestQueueFirst,
    FixedTime(u32),
}

impl Controller<'_> {
    pub fn act(&self, env: &Env) -> u8 {
        match self {
            Controller::Greedy(net) => crate::dqn::greedy_action(net, env.observation()),
            Controller::MaxPressure => {
                crate::baselines::max_pressure_action(&env.queues(), &phase_map(env))
            }
            Controller::LongestQueueFirst => {
                crate::baselines::lqf_action(&env.queues(), &phase_map(env))
            }
            Controller::FixedTime(cycle) => crate::baselines::fixed_time_action(env.clock(), *cycle),
        }
    }
}

fn phase_map(env: &Env) -> [u8; N_LANES] {
    let mut map = [0u8; N_LANES];
    for (i, lane) in env.sim.lanes.iter().enumerate() {
        map[i] = lane.served_by_phase;
    }
    map
}

/// Runs one full episode under a controller. The reward kind only feeds the
/// logged return; classical controllers never see it.
pub fn run_episode(
    base: &SimConfig,
    kind: RewardKind,
    controller: &Controller,
    demand_seed: u64,
    gamma: f64,
    trace: bool,
) -> Result<(EpisodeReport, Option<EpisodeTrace>)> {
    let mut env = Env::new(base, kind, demand_seed, trace)?;
    while !env.done() {
        let action = controller.act(&env);
        env.step(action);
    }
    Ok(env.finish(gamma, demand_seed))
}
