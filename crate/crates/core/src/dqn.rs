//! The learning agent: replay buffer, epsilon-greedy policy, TD targets,
//! batched train step with a periodically synchronized target network, and
//! the full training loop against the intersection environment.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::episode::Env;
use crate::error::{Error, Result};
use crate::neural::{copy_parameters, Adam, Gradients, Mlp};
use crate::reward::{Observation, RewardKind, OBS_LEN};
use crate::sim::SimConfig;
use crate::streams;

pub const N_ACTIONS: usize = 2;
pub const HIDDEN: usize = 64;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Hyperparams {
    pub alpha: f64,
    pub gamma: f64,
    pub target_sync_interval: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_horizon: u64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Transitions gathered before gradient steps begin.
    pub learn_start: usize,
    pub total_train_steps: u64,
    pub eval_frequency: u64,
    /// Greedy episodes per in-training evaluation point.
    pub train_eval_episodes: u32,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            alpha: 0.001,
            gamma: 0.99,
            target_sync_interval: 500,
            epsilon_start: 0.05,
            epsilon_end: 0.01,
            epsilon_decay_horizon: 80_000,
            replay_capacity: 50_000,
            batch_size: 32,
            learn_start: 1_000,
            total_train_steps: 100_000,
            eval_frequency: 10_000,
            train_eval_episodes: 3,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(format!(
                "gamma ({}) must be in (0, 1]",
                self.gamma
            )));
        }
        if self.epsilon_end > self.epsilon_start {
            return Err(Error::config(format!(
                "epsilon_end ({}) must be <= epsilon_start ({})",
                self.epsilon_end, self.epsilon_start
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return Err(Error::config("epsilon bounds must lie in [0, 1]"));
        }
        if self.batch_size == 0 || self.batch_size > self.replay_capacity {
            return Err(Error::config(format!(
                "batch_size ({}) must be in [1, replay_capacity ({})]",
                self.batch_size, self.replay_capacity
            )));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::config("alpha must be positive"));
        }
        if self.target_sync_interval == 0 {
            return Err(Error::config("target_sync_interval must be positive"));
        }
        if self.eval_frequency == 0 {
            return Err(Error::config("eval_frequency must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Observation,
    pub action: u8,
    pub reward: f64,
    pub next_obs: Observation,
    pub terminal: bool,
}

/// Bounded FIFO ring. Once full, each insert evicts exactly the oldest
/// element.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    data: Vec<Transition>,
    capacity: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer {
            data: Vec::with_capacity(capacity.min(1 << 20)),
            capacity,
            inserted: 0,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            let slot = (self.inserted % self.capacity as u64) as usize;
            self.data[slot] = t;
        }
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn get(&self, idx: usize) -> &Transition {
        &self.data[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.data.iter()
    }
}

/// Linear decay from epsilon_start at step 0 to epsilon_end at the horizon,
/// constant afterward.
pub fn epsilon_at(step: u64, hp: &Hyperparams) -> f64 {
    if hp.epsilon_decay_horizon == 0 || step >= hp.epsilon_decay_horizon {
        return hp.epsilon_end;
    }
    let frac = step as f64 / hp.epsilon_decay_horizon as f64;
    hp.epsilon_start + (hp.epsilon_end - hp.epsilon_start) * frac
}

/// Argmax with ties broken toward the lower index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn greedy_action(net: &Mlp, obs: &Observation) -> u8 {
    let q = net.forward(obs.as_slice()).expect("observation length");
    argmax(&q) as u8
}

/// Epsilon-greedy: with probability epsilon a uniform random action,
/// otherwise the greedy one.
pub fn select_action(net: &Mlp, obs: &Observation, epsilon: f64, rng: &mut ChaCha8Rng) -> u8 {
    let coin: f64 = rng.gen();
    if coin < epsilon {
        rng.gen_range(0..net.output_len() as u64) as u8
    } else {
        greedy_action(net, obs)
    }
}

/// Bootstrapped target from the frozen network: reward alone on terminal
/// transitions, reward + gamma * max_a Q_target(s', a) otherwise.
pub fn td_target(target_net: &Mlp, transition: &Transition, gamma: f64) -> f64 {
    if transition.terminal {
        return transition.reward;
    }
    let q = target_net
        .forward(transition.next_obs.as_slice())
        .expect("observation length");
    let max_q = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    transition.reward + gamma * max_q
}

/// Sum of gamma^k * r_k over the sequence.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    let mut total = 0.0;
    let mut factor = 1.0;
    for &r in rewards {
        total += factor * r;
        factor *= gamma;
    }
    total
}

pub struct Agent {
    pub net: Mlp,
    pub target: Mlp,
    pub opt: Adam,
    pub buffer: ReplayBuffer,
    pub hp: Hyperparams,
    /// Completed gradient steps.
    pub train_steps: u64,
    replay_rng: ChaCha8Rng,
    grads: Gradients,
}

impl Agent {
    /// Standard traffic-control architecture: OBS_LEN -> 64 -> 64 -> 2.
    pub fn new(hp: Hyperparams, seed: u64) -> Result<Agent> {
        Agent::with_sizes(hp, seed, &[OBS_LEN, HIDDEN, HIDDEN, N_ACTIONS])
    }

    pub fn with_sizes(hp: Hyperparams, seed: u64, sizes: &[usize]) -> Result<Agent> {
        hp.validate()?;
        let mut init_rng = streams::stream(seed, "init", 0);
        let net = Mlp::new(sizes, &mut init_rng);
        let mut target = Mlp::zeros(sizes);
        copy_parameters(&net, &mut target)?;
        let opt = Adam::new(&net, hp.alpha);
        let buffer = ReplayBuffer::new(hp.replay_capacity);
        let grads = Gradients::zeros(&net);
        Ok(Agent {
            net,
            target,
            opt,
            buffer,
            hp,
            train_steps: 0,
            replay_rng: streams::stream(seed, "replay", 0),
            grads,
        })
    }

    /// One batched gradient step. Returns the mean TD loss, or `None` when
    /// the buffer is still below max(batch_size, learn_start) — a skip
    /// signal, not an error. Synchronizes the target network exactly at
    /// every `target_sync_interval`-th completed step.
    pub fn train_step(&mut self) -> Option<f64> {
        if self.buffer.len() < self.hp.batch_size.max(self.hp.learn_start) {
            return None;
        }
        self.grads.clear();
        let mut loss_sum = 0.0;
        for _ in 0..self.hp.batch_size {
            let idx = self.replay_rng.gen_range(0..self.buffer.len());
            let transition = self.buffer.get(idx);
            let target = td_target(&self.target, transition, self.hp.gamma);
            let loss = self
                .net
                .backward(
                    transition.obs.as_slice(),
                    transition.action as usize,
                    target,
                    &mut self.grads,
                )
                .expect("transition shapes");
            loss_sum += loss;
        }
        let scale = 1.0 / self.hp.batch_size as f64;
        self.opt.step(&mut self.net, &self.grads, scale);
        self.train_steps += 1;
        if self.train_steps % self.hp.target_sync_interval == 0 {
            copy_parameters(&self.net, &mut self.target).expect("same architecture");
            debug_assert!(self.net.params_finite());
        }
        Some(loss_sum * scale)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainLogRow {
    pub step: u64,
    pub epsilon: f64,
    /// Mean TD loss since the previous row; 0 before learning starts.
    pub mean_td_loss: f64,
    pub eval_return: f64,
    pub eval_waiting: f64,
    pub eval_queue: f64,
    pub eval_throughput: f64,
    pub eval_travel_time: f64,
    pub eval_co2: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<TrainLogRow>,
}

/// Trains a DQN against the intersection under the given reward. Demand is
/// re-randomized every episode from the train-demand stream; every
/// `eval_frequency` environment steps (including step 0) the greedy policy
/// is evaluated on eval-demand seeds disjoint from training and logged.
pub fn run_training(
    base: &SimConfig,
    kind: RewardKind,
    hp: Hyperparams,
    seed: u64,
) -> Result<(Mlp, TrainingLog)> {
    base.validate()?;
    let mut agent = Agent::new(hp.clone(), seed)?;
    let mut explore_rng = streams::stream(seed, "explore", 0);
    let mut log = TrainingLog::default();

    let mut episode_index = 0u64;
    let mut env = Env::new(base, kind, streams::derive_seed(seed, "train-demand", 0), false)?;
    let mut loss_sum = 0.0;
    let mut loss_count = 0u64;
    let mut eval_round = 0u64;

    for step in 0..=hp.total_train_steps {
        if step % hp.eval_frequency == 0 || step == hp.total_train_steps {
            let mean_loss = if loss_count > 0 {
                loss_sum / loss_count as f64
            } else {
                0.0
            };
            let row = evaluate_greedy(base, kind, &agent.net, &hp, seed, eval_round, step, mean_loss)?;
            log.rows.push(row);
            loss_sum = 0.0;
            loss_count = 0;
            eval_round += 1;
            if step == hp.total_train_steps {
                break;
            }
        }

        let epsilon = epsilon_at(step, &hp);
        let action = select_action(&agent.net, env.observation(), epsilon, &mut explore_rng);
        let obs = env.observation().clone();
        let (reward, terminal) = env.step(action);
        let next_obs = env.observation().clone();
        agent.buffer.push(Transition {
            obs,
            action,
            reward,
            next_obs,
            terminal,
        });
        if let Some(loss) = agent.train_step() {
            loss_sum += loss;
            loss_count += 1;
        }
        if terminal {
            episode_index += 1;
            env = Env::new(
                base,
                kind,
                streams::derive_seed(seed, "train-demand", episode_index),
                false,
            )?;
        }
    }
    Ok((agent.net, log))
}

/// Demand seed used by the `eval_round`-th in-training evaluation's
/// `k`-th episode. Disjoint from the train-demand stream by label.
pub fn training_eval_demand_seed(seed: u64, eval_round: u64, episodes: u64, k: u64) -> u64 {
    streams::derive_seed(seed, "eval-demand", eval_round * episodes + k)
}

#[allow(clippy::too_many_arguments)]
fn evaluate_greedy(
    base: &SimConfig,
    kind: RewardKind,
    net: &Mlp,
    hp: &Hyperparams,
    seed: u64,
    eval_round: u64,
    step: u64,
    mean_loss: f64,
) -> Result<TrainLogRow> {
    let episodes = hp.train_eval_episodes.max(1) as u64;
    let mut sums = [0.0f64; 6];
    for k in 0..episodes {
        let demand = training_eval_demand_seed(seed, eval_round, episodes, k);
        let (report, _) = crate::episode::run_episode(
            base,
            kind,
            &crate::episode::Controller::Greedy(net),
            demand,
            hp.gamma,
            false,
        )?;
        sums[0] += report.episode_return;
        sums[1] += report.mean_waiting;
        sums[2] += report.mean_queue;
        sums[3] += report.throughput as f64;
        sums[4] += report.mean_travel_time;
        sums[5] += report.co2_total;
    }
    let n = episodes as f64;
    Ok(TrainLogRow {
        step,
        epsilon: epsilon_at(step, hp),
        mean_td_loss: mean_loss,
        eval_return: sums[0] / n,
        eval_waiting: sums[1] / n,
        eval_queue: sums[2] / n,
        eval_throughput: sums[3] / n,
        eval_travel_time: sums[4] / n,
        eval_co2: sums[5] / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(values: &[f64]) -> Observation {
        Observation(values.to_vec())
    }

    fn tiny_hp() -> Hyperparams {
        Hyperparams {
            replay_capacity: 64,
            batch_size: 4,
            learn_start: 4,
            total_train_steps: 12,
            eval_frequency: 6,
            epsilon_decay_horizon: 10,
            train_eval_episodes: 1,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn epsilon_schedule_endpoints_and_midpoint() {
        let hp = Hyperparams::default();
        assert_eq!(epsilon_at(0, &hp), 0.05);
        assert_eq!(epsilon_at(hp.epsilon_decay_horizon, &hp), 0.01);
        assert_eq!(epsilon_at(hp.epsilon_decay_horizon * 2, &hp), 0.01);
        let mid = epsilon_at(hp.epsilon_decay_horizon / 2, &hp);
        assert!((mid - 0.03).abs() < 1e-12);
    }

    #[test]
    fn epsilon_is_monotone_nonincreasing() {
        let hp = Hyperparams::default();
        let mut last = f64::INFINITY;
        for step in (0..120_000).step_by(997) {
            let e = epsilon_at(step, &hp);
            assert!(e <= last);
            last = e;
        }
    }

    #[test]
    fn greedy_action_argmax_and_tiebreak() {
        let mut net = Mlp::zeros(&[2, 2]);
        // Identity-ish: w = [[1,0],[0,2]] so q(one-hot 0) = [1, 0].
        net.set_param(0, 1.0);
        net.set_param(3, 2.0);
        assert_eq!(greedy_action(&net, &obs(&[1.0, 0.0])), 0);
        assert_eq!(greedy_action(&net, &obs(&[0.0, 1.0])), 1);
        // All-zero network ties; lower index wins.
        let zeros = Mlp::zeros(&[2, 2]);
        assert_eq!(greedy_action(&zeros, &obs(&[1.0, 0.0])), 0);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let net = Mlp::zeros(&[2, 2]);
        let mut rng = streams::stream(7, "explore", 0);
        let draws = 10_000;
        let mut ones = 0u32;
        for _ in 0..draws {
            if select_action(&net, &obs(&[1.0, 0.0]), 1.0, &mut rng) == 1 {
                ones += 1;
            }
        }
        let freq = ones as f64 / draws as f64;
        assert!((freq - 0.5).abs() < 0.03, "freq {freq}");
    }

    #[test]
    fn td_target_cases() {
        let mut net = Mlp::zeros(&[2, 2]);
        net.set_param(0, 2.0); // q(s0) = [2, 0]
        net.set_param(2, 4.0); // row 1 weight on input 0 -> q(s0)[1] = 4
        let terminal = Transition {
            obs: obs(&[1.0, 0.0]),
            action: 0,
            reward: 3.5,
            next_obs: obs(&[1.0, 0.0]),
            terminal: true,
        };
        assert_eq!(td_target(&net, &terminal, 0.99), 3.5);

        let nonterminal = Transition {
            terminal: false,
            reward: 1.0,
            ..terminal.clone()
        };
        // max q = 4 -> 1 + 0.99 * 4 = 4.96
        assert!((td_target(&net, &nonterminal, 0.99) - 4.96).abs() < 1e-12);
        assert_eq!(td_target(&net, &nonterminal, 0.0), 1.0);
    }

    #[test]
    fn td_target_ignores_next_obs_when_terminal() {
        let net = Mlp::zeros(&[2, 2]);
        let base = Transition {
            obs: obs(&[1.0, 0.0]),
            action: 1,
            reward: -2.0,
            next_obs: obs(&[0.0, 1.0]),
            terminal: true,
        };
        let mut perturbed = base.clone();
        perturbed.next_obs = obs(&[123.0, -55.0]);
        assert_eq!(td_target(&net, &base, 0.99), td_target(&net, &perturbed, 0.99));
    }

    #[test]
    fn discounted_return_matches_naive_loop() {
        assert_eq!(discounted_return(&[1.0, 1.0, 1.0], 0.5), 1.75);
        assert_eq!(discounted_return(&[2.0, 3.0, 4.0], 1.0), 9.0);
        let mut rng = streams::stream(3, "test", 0);
        let rewards: Vec<f64> = (0..40).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let gamma: f64 = 0.97;
        let naive: f64 = rewards
            .iter()
            .enumerate()
            .map(|(k, r)| gamma.powi(k as i32) * r)
            .sum();
        assert!((discounted_return(&rewards, gamma) - naive).abs() < 1e-12);
    }

    #[test]
    fn replay_buffer_fifo_eviction() {
        let mut buf = ReplayBuffer::new(8);
        for i in 0..20 {
            buf.push(Transition {
                obs: obs(&[i as f64]),
                action: 0,
                reward: i as f64,
                next_obs: obs(&[0.0]),
                terminal: false,
            });
        }
        assert_eq!(buf.len(), 8);
        let mut rewards: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        rewards.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rewards, (12..20).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn train_step_skips_until_learn_start() {
        let hp = tiny_hp();
        let mut agent = Agent::with_sizes(hp, 1, &[2, 4, 2]).unwrap();
        assert!(agent.train_step().is_none());
        for i in 0..3 {
            agent.buffer.push(Transition {
                obs: obs(&[1.0, 0.0]),
                action: 0,
                reward: i as f64,
                next_obs: obs(&[0.0, 1.0]),
                terminal: false,
            });
        }
        assert!(agent.train_step().is_none());
        agent.buffer.push(Transition {
            obs: obs(&[1.0, 0.0]),
            action: 1,
            reward: 0.0,
            next_obs: obs(&[0.0, 1.0]),
            terminal: true,
        });
        assert!(agent.train_step().is_some());
        assert_eq!(agent.train_steps, 1);
    }

    #[test]
    fn converged_batch_has_zero_loss_and_static_params() {
        let hp = Hyperparams {
            replay_capacity: 16,
            batch_size: 4,
            learn_start: 4,
            ..Hyperparams::default()
        };
        let mut agent = Agent::with_sizes(hp, 2, &[2, 4, 2]).unwrap();
        // Terminal transitions whose reward equals the current Q-value are
        // already at the stationary point.
        for _ in 0..8 {
            let o = obs(&[1.0, 0.0]);
            let q = agent.net.forward(o.as_slice()).unwrap();
            agent.buffer.push(Transition {
                obs: o.clone(),
                action: 0,
                reward: q[0],
                next_obs: o,
                terminal: true,
            });
        }
        let before = agent.net.clone();
        let loss = agent.train_step().unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(agent.net, before);
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let cfg = SimConfig {
            arrival_rate_range: (0.05, 0.15),
            ..SimConfig::default()
        };
        let run = || {
            let (net, log) =
                run_training(&cfg, RewardKind::NegQueue, tiny_hp(), 99).unwrap();
            (
                serde_json::to_string(&net).unwrap(),
                serde_json::to_string(&log).unwrap(),
            )
        };
        let (net_a, log_a) = run();
        let (net_b, log_b) = run();
        assert_eq!(net_a, net_b);
        assert_eq!(log_a, log_b);
    }

    #[test]
    fn zero_train_steps_logs_only_initial_evaluation() {
        let cfg = SimConfig {
            arrival_rate_range: (0.05, 0.05),
            ..SimConfig::default()
        };
        let hp = Hyperparams {
            total_train_steps: 0,
            train_eval_episodes: 1,
            ..Hyperparams::default()
        };
        let (net, log) = run_training(
            &cfg,
            RewardKind::Mbrf {
                mass_scaling: false,
            },
            hp,
            5,
        )
        .unwrap();
        assert_eq!(log.rows.len(), 1);
        assert_eq!(log.rows[0].step, 0);
        // Untrained network: identical to a fresh one from the same seed.
        let fresh = Agent::new(Hyperparams::default(), 5).unwrap();
        assert_eq!(net, fresh.net);
    }
}
