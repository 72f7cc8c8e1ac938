//! Discrete-time microsimulation of a four-arm single intersection.
//!
//! Four incoming lanes (N, S, E, W), one per approach; N/S release on phase
//! 0, E/W on phase 1. Time advances in 1 s sub-steps grouped into 5 s
//! control intervals. Each sub-step spawns Poisson arrivals, moves vehicles
//! under the kinematic model, transfers stop-line crossers into a fixed-time
//! junction traversal, and accrues waiting and CO2. Outgoing lanes are
//! infinite sinks. Everything is driven by named ChaCha streams, so a
//! (config, seed, action sequence) triple reproduces an episode bit for bit.

pub mod signal;
pub mod vehicle;

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::emissions::{co2_rate, EmissionParams};
use crate::error::{Error, Result};
use crate::streams;
use crate::trace::{EpisodeTrace, EventKind, EventRow, SignalRow, VehicleRow};

use signal::SignalState;
use vehicle::{advance_vehicle, canonical_classes, stopping_distance, Vehicle, VehicleClass};

pub const N_LANES: usize = 4;
pub const APPROACH_NAMES: [&str; N_LANES] = ["N", "S", "E", "W"];

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SimConfig {
    /// Minimum green seconds before a switch request is honored.
    pub g_min: u32,
    /// Green seconds at which a switch is forced.
    pub g_max: u32,
    pub yellow: u32,
    /// Seconds between agent decisions.
    pub control_interval: u32,
    pub sim_step: u32,
    pub lane_length: f64,
    /// Zone upstream of each stop line whose vehicles feed the momentum
    /// reward, meters.
    pub detection_zone: f64,
    pub min_gap: f64,
    /// Desired time gap behind a leader, seconds; governs saturation flow.
    pub time_headway: f64,
    /// Below this speed a vehicle counts as halted/waiting.
    pub halt_speed_threshold: f64,
    pub episode_duration: u32,
    /// Seconds a crossing vehicle spends inside the junction before exiting.
    pub junction_traversal: u32,
    /// Per-approach arrival rate is drawn uniformly from this range once per
    /// episode, vehicles/second.
    pub arrival_rate_range: (f64, f64),
    pub classes: Vec<VehicleClass>,
    /// Spawn probability per class, parallel to `classes`.
    pub class_mixture: Vec<f64>,
    pub emissions: EmissionParams,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            g_min: 5,
            g_max: 50,
            yellow: 2,
            control_interval: 5,
            sim_step: 1,
            lane_length: 300.0,
            detection_zone: 100.0,
            min_gap: 2.5,
            time_headway: 1.0,
            halt_speed_threshold: 0.1,
            episode_duration: 1000,
            junction_traversal: 2,
            arrival_rate_range: (0.10, 0.45),
            classes: canonical_classes(),
            class_mixture: vec![1.0, 0.0, 0.0, 0.0],
            emissions: EmissionParams::default(),
            seed: 0,
        }
    }
}

/// Car / truck / bus / motorcycle shares for the mixed-traffic scenario.
pub fn heterogeneous_mixture() -> Vec<f64> {
    vec![0.5, 0.2, 0.15, 0.15]
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.g_min >= self.g_max {
            return Err(Error::config(format!(
                "g_min ({}) must be < g_max ({})",
                self.g_min, self.g_max
            )));
        }
        if self.sim_step == 0 || self.control_interval == 0 {
            return Err(Error::config("sim_step and control_interval must be positive"));
        }
        if self.control_interval % self.sim_step != 0 {
            return Err(Error::config(format!(
                "control_interval ({}) must be a multiple of sim_step ({})",
                self.control_interval, self.sim_step
            )));
        }
        if self.yellow > self.control_interval {
            return Err(Error::config(format!(
                "yellow ({}) must be <= control_interval ({})",
                self.yellow, self.control_interval
            )));
        }
        if self.yellow == 0 || self.yellow % self.sim_step != 0 {
            return Err(Error::config(format!(
                "yellow ({}) must be a positive multiple of sim_step ({})",
                self.yellow, self.sim_step
            )));
        }
        if self.episode_duration % self.control_interval != 0 {
            return Err(Error::config(format!(
                "episode_duration ({}) must be a multiple of control_interval ({})",
                self.episode_duration, self.control_interval
            )));
        }
        if !(self.lane_length > 0.0) {
            return Err(Error::config("lane_length must be positive"));
        }
        if !(self.detection_zone > 0.0) || self.detection_zone > self.lane_length {
            return Err(Error::config(format!(
                "detection_zone ({}) must be in (0, lane_length ({})]",
                self.detection_zone, self.lane_length
            )));
        }
        if self.min_gap < 0.0 {
            return Err(Error::config("min_gap must be non-negative"));
        }
        if self.time_headway < 0.0 {
            return Err(Error::config("time_headway must be non-negative"));
        }
        if !(self.halt_speed_threshold > 0.0) {
            return Err(Error::config("halt_speed_threshold must be positive"));
        }
        let (lo, hi) = self.arrival_rate_range;
        if !(lo >= 0.0 && hi >= lo) {
            return Err(Error::config(format!(
                "arrival_rate_range ({lo}, {hi}) must satisfy 0 <= low <= high"
            )));
        }
        if self.classes.is_empty() {
            return Err(Error::config("classes must not be empty"));
        }
        for c in &self.classes {
            if !(c.mass > 0.0 && c.length > 0.0 && c.max_speed > 0.0)
                || !(c.max_accel > 0.0 && c.max_decel > 0.0)
            {
                return Err(Error::config(format!(
                    "class {} has a non-positive parameter",
                    c.name
                )));
            }
        }
        if self.class_mixture.len() != self.classes.len() {
            return Err(Error::config(format!(
                "class_mixture has {} entries for {} classes",
                self.class_mixture.len(),
                self.classes.len()
            )));
        }
        if self.class_mixture.iter().any(|&p| p < 0.0) {
            return Err(Error::config("class_mixture probabilities must be non-negative"));
        }
        let total: f64 = self.class_mixture.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!(
                "class_mixture sums to {total}, expected 1"
            )));
        }
        Ok(())
    }

    /// Vehicles that fit nose-to-tail on one lane at car spacing; the queue
    /// normalization constant.
    pub fn lane_capacity(&self) -> u32 {
        let reference = self
            .classes
            .iter()
            .find(|c| c.name == "car")
            .unwrap_or(&self.classes[0]);
        let per_vehicle = reference.length + self.min_gap;
        ((self.lane_length / per_vehicle).floor() as u32).max(1)
    }

    pub fn substeps_per_interval(&self) -> u32 {
        self.control_interval / self.sim_step
    }

    pub fn steps_per_episode(&self) -> u32 {
        self.episode_duration / self.control_interval
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LaneState {
    pub id: u8,
    pub approach: &'static str,
    pub length: f64,
    pub served_by_phase: u8,
    pub vehicles: VecDeque<Vehicle>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CrossingVehicle {
    pub vehicle: Vehicle,
    pub exit_clock: u64,
    pub crossing_speed: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimState {
    pub config: SimConfig,
    pub clock: u64,
    pub lanes: Vec<LaneState>,
    pub signal: SignalState,
    pub arrival_rates: [f64; N_LANES],
    demand_rng: ChaCha8Rng,
    /// Vehicles mid-traversal between stop line and exit.
    pub junction: VecDeque<CrossingVehicle>,
    pub spawned_count: u64,
    pub exited_count: u64,
    pub blocked_count: u64,
    pub travel_time_sum: f64,
    pub co2_total: f64,
    next_vehicle_id: u64,
    #[serde(skip)]
    pub trace: Option<EpisodeTrace>,
}

/// Aggregates returned by one control-interval step.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StepMeasurements {
    /// Mean normalized occupancy per lane over the interval's sub-steps.
    pub mean_density: [f64; N_LANES],
    /// Mean halted-vehicle count per lane over the interval's sub-steps.
    pub mean_halted: [f64; N_LANES],
    /// Halted vehicles per lane at interval end.
    pub queue_snapshot: [u32; N_LANES],
    /// Total halted vehicles at interval end.
    pub halted_total: u32,
    /// Sum of cumulative waiting over in-network vehicles at interval end.
    pub total_wait: f64,
    /// One entry per vehicle observed in a detection zone this interval,
    /// in vehicle-id order: (mass, interval-mean speed).
    pub zone_vehicles: Vec<ZoneVehicle>,
    /// Grams emitted during the interval.
    pub co2_increment: f64,
    /// Seconds of waiting accrued during the interval.
    pub wait_increment: f64,
    pub spawned: u32,
    pub blocked: u32,
    pub exited: u32,
    pub exit_travel_times: Vec<f64>,
    /// Total halted count at the end of each sub-step.
    pub halted_samples: Vec<u32>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ZoneVehicle {
    pub mass: f64,
    pub mean_speed: f64,
}

struct ZoneAcc {
    mass: f64,
    speed_sum: f64,
    samples: u32,
}

/// Builds the initial state: empty lanes, clock zero, phase 0 green, and
/// per-approach arrival rates drawn from the seeded rate stream.
pub fn init_sim(config: SimConfig) -> Result<SimState> {
    config.validate()?;
    let mut rate_rng = streams::stream(config.seed, "arrival-rates", 0);
    let (lo, hi) = config.arrival_rate_range;
    let mut arrival_rates = [0.0; N_LANES];
    for rate in arrival_rates.iter_mut() {
        *rate = if hi > lo { rate_rng.gen_range(lo..hi) } else { lo };
    }
    let demand_rng = streams::stream(config.seed, "demand", 0);
    let lanes = (0..N_LANES as u8)
        .map(|i| LaneState {
            id: i,
            approach: APPROACH_NAMES[i as usize],
            length: config.lane_length,
            served_by_phase: if i < 2 { 0 } else { 1 },
            vehicles: VecDeque::new(),
        })
        .collect();
    Ok(SimState {
        config,
        clock: 0,
        lanes,
        signal: SignalState::new(),
        arrival_rates,
        demand_rng,
        junction: VecDeque::new(),
        spawned_count: 0,
        exited_count: 0,
        blocked_count: 0,
        travel_time_sum: 0.0,
        co2_total: 0.0,
        next_vehicle_id: 1,
        trace: None,
    })
}

impl SimState {
    pub fn enable_trace(&mut self) {
        self.trace = Some(EpisodeTrace::default());
    }

    pub fn take_trace(&mut self) -> Option<EpisodeTrace> {
        self.trace.take()
    }

    pub fn vehicles_in_lanes(&self) -> u64 {
        self.lanes.iter().map(|l| l.vehicles.len() as u64).sum()
    }

    /// spawned = in-network + exited, exactly.
    pub fn conservation_holds(&self) -> bool {
        self.spawned_count == self.vehicles_in_lanes() + self.junction.len() as u64 + self.exited_count
    }

    /// Applies the (masked) action, then advances one full control interval.
    pub fn step(&mut self, action: u8) -> StepMeasurements {
        self.signal.apply_action(
            action & 1,
            self.config.g_min,
            self.config.g_max,
            self.config.yellow,
        );
        let substeps = self.config.substeps_per_interval();
        let mut acc = IntervalAcc::new();
        for _ in 0..substeps {
            self.substep(&mut acc);
        }
        debug_assert!(self.conservation_holds());
        self.finish_interval(acc, substeps)
    }

    fn substep(&mut self, acc: &mut IntervalAcc) {
        let dt = self.config.sim_step as f64;
        let t_end = self.clock + self.config.sim_step as u64;

        // Arrivals.
        let mut spawned_now = 0u32;
        let mut blocked_now = 0u32;
        for lane_idx in 0..N_LANES {
            let lambda = self.arrival_rates[lane_idx] * dt;
            let count = if lambda > 0.0 {
                let poisson = Poisson::new(lambda).expect("positive lambda");
                poisson.sample(&mut self.demand_rng) as u64
            } else {
                0
            };
            for _ in 0..count {
                let class_idx = self.sample_class();
                if self.try_spawn(lane_idx, class_idx) {
                    spawned_now += 1;
                } else {
                    blocked_now += 1;
                    self.blocked_count += 1;
                    if let Some(trace) = self.trace.as_mut() {
                        trace.events.push(EventRow {
                            t: t_end,
                            kind: EventKind::Blocked,
                            id: 0,
                            lane: lane_idx as u8,
                            value: 0.0,
                        });
                    }
                }
            }
        }

        // Kinematics, front to back, leaders first.
        let min_gap = self.config.min_gap;
        let headway = self.config.time_headway;
        for lane in &mut self.lanes {
            let green = self.signal.is_green(lane.served_by_phase);
            let mut leader_rear: Option<f64> = None;
            for veh in lane.vehicles.iter_mut() {
                let class = &self.config.classes[veh.class as usize];
                let (gap, h) = match leader_rear {
                    Some(rear) => (rear - min_gap - veh.position, headway),
                    None => (f64::INFINITY, 0.0),
                };
                let stop_dist = lane.length - veh.position;
                advance_vehicle(veh, class, gap, h, stop_dist, green, dt);
                leader_rear = Some(veh.position - class.length);
            }
        }

        // Stop-line crossings enter the junction.
        let traversal = self.config.junction_traversal as u64;
        for lane_idx in 0..N_LANES {
            let green = self.signal.is_green(self.lanes[lane_idx].served_by_phase);
            loop {
                let crossed = match self.lanes[lane_idx].vehicles.front() {
                    Some(v) => v.position > self.lanes[lane_idx].length,
                    None => false,
                };
                if !crossed {
                    break;
                }
                debug_assert!(green, "vehicle crossed the stop line on red");
                let vehicle = self.lanes[lane_idx].vehicles.pop_front().expect("nonempty");
                let crossing_speed = vehicle.speed;
                if let Some(trace) = self.trace.as_mut() {
                    trace.events.push(EventRow {
                        t: t_end,
                        kind: EventKind::Crossing,
                        id: vehicle.id,
                        lane: lane_idx as u8,
                        value: crossing_speed,
                    });
                }
                self.junction.push_back(CrossingVehicle {
                    vehicle,
                    exit_clock: t_end + traversal,
                    crossing_speed,
                });
            }
        }

        // Junction exits.
        let mut exits_now = 0u32;
        while self
            .junction
            .front()
            .map_or(false, |c| c.exit_clock <= t_end)
        {
            let mut crossing = self.junction.pop_front().expect("nonempty");
            crossing.vehicle.exited = true;
            let travel = (t_end - crossing.vehicle.spawn_time) as f64;
            self.exited_count += 1;
            self.travel_time_sum += travel;
            exits_now += 1;
            acc.exit_travel_times.push(travel);
            if let Some(trace) = self.trace.as_mut() {
                trace.events.push(EventRow {
                    t: t_end,
                    kind: EventKind::Exit,
                    id: crossing.vehicle.id,
                    lane: crossing.vehicle.lane,
                    value: travel,
                });
            }
        }

        // Waiting, emissions, and interval sampling.
        let halt = self.config.halt_speed_threshold;
        let zone_start = self.config.lane_length - self.config.detection_zone;
        let mut co2_now = 0.0;
        let mut wait_now = 0.0;
        let mut halted_total = 0u32;
        let mut queues = [0u32; N_LANES];
        let mut densities = [0.0f64; N_LANES];
        for (lane_idx, lane) in self.lanes.iter_mut().enumerate() {
            let mut occupied = 0.0;
            for veh in lane.vehicles.iter_mut() {
                let class = &self.config.classes[veh.class as usize];
                if veh.speed < halt {
                    veh.cumulative_wait += dt;
                    wait_now += dt;
                    queues[lane_idx] += 1;
                }
                co2_now += co2_rate(veh.speed, veh.accel, class, &self.config.emissions) * dt;
                occupied += class.length + min_gap;
                if veh.position >= zone_start {
                    let entry = acc.zone.entry(veh.id).or_insert(ZoneAcc {
                        mass: class.mass,
                        speed_sum: 0.0,
                        samples: 0,
                    });
                    entry.speed_sum += veh.speed;
                    entry.samples += 1;
                }
            }
            densities[lane_idx] = (occupied / lane.length).clamp(0.0, 1.0);
            halted_total += queues[lane_idx];
        }
        for crossing in &self.junction {
            let class = &self.config.classes[crossing.vehicle.class as usize];
            co2_now += co2_rate(crossing.crossing_speed, 0.0, class, &self.config.emissions) * dt;
        }
        self.co2_total += co2_now;

        acc.co2 += co2_now;
        acc.wait_added += wait_now;
        acc.spawned += spawned_now;
        acc.blocked += blocked_now;
        acc.exited += exits_now;
        acc.halted_samples.push(halted_total);
        for i in 0..N_LANES {
            acc.density_sum[i] += densities[i];
            acc.halted_sum[i] += queues[i] as f64;
        }
        acc.last_queues = queues;

        if let Some(trace) = self.trace.as_mut() {
            trace.signal.push(SignalRow {
                t: t_end,
                phase: self.signal.phase,
                in_yellow: self.signal.in_yellow,
                queues,
                densities,
                spawns: spawned_now,
                exits: exits_now,
            });
            for lane in &self.lanes {
                for veh in &lane.vehicles {
                    trace.vehicles.push(VehicleRow {
                        t: t_end,
                        id: veh.id,
                        lane: lane.id,
                        class: veh.class,
                        position: veh.position,
                        speed: veh.speed,
                    });
                }
            }
        }

        self.signal
            .advance(self.config.sim_step, self.config.g_max, self.config.yellow);
        self.clock = t_end;
    }

    fn finish_interval(&self, acc: IntervalAcc, substeps: u32) -> StepMeasurements {
        let n = substeps as f64;
        let mut meas = StepMeasurements {
            queue_snapshot: acc.last_queues,
            halted_total: acc.last_queues.iter().sum(),
            co2_increment: acc.co2,
            wait_increment: acc.wait_added,
            spawned: acc.spawned,
            blocked: acc.blocked,
            exited: acc.exited,
            exit_travel_times: acc.exit_travel_times,
            halted_samples: acc.halted_samples,
            ..Default::default()
        };
        for i in 0..N_LANES {
            meas.mean_density[i] = acc.density_sum[i] / n;
            meas.mean_halted[i] = acc.halted_sum[i] / n;
        }
        let mut total_wait = 0.0;
        for lane in &self.lanes {
            for veh in &lane.vehicles {
                total_wait += veh.cumulative_wait;
            }
        }
        for crossing in &self.junction {
            total_wait += crossing.vehicle.cumulative_wait;
        }
        meas.total_wait = total_wait;
        meas.zone_vehicles = acc
            .zone
            .into_values()
            .map(|z| ZoneVehicle {
                mass: z.mass,
                mean_speed: z.speed_sum / z.samples as f64,
            })
            .collect();
        meas
    }

    fn sample_class(&mut self) -> u8 {
        let u: f64 = self.demand_rng.gen();
        let mut cumulative = 0.0;
        for (idx, &p) in self.config.class_mixture.iter().enumerate() {
            cumulative += p;
            if u < cumulative {
                return idx as u8;
            }
        }
        (self.config.class_mixture.len() - 1) as u8
    }

    /// Places a vehicle at the lane entry if the headway admits a state from
    /// which it can still brake behind the current rearmost vehicle.
    fn try_spawn(&mut self, lane_idx: usize, class_idx: u8) -> bool {
        let class = &self.config.classes[class_idx as usize];
        let entry_position = class.length;
        let speed = class.entry_speed();
        let lane = &mut self.lanes[lane_idx];
        if let Some(last) = lane.vehicles.back() {
            let last_class = &self.config.classes[last.class as usize];
            let free = (last.position - last_class.length) - self.config.min_gap - entry_position;
            let dt = self.config.sim_step as f64;
            let required =
                stopping_distance(speed, class.max_decel, dt) + self.config.time_headway * speed;
            if free < required {
                return false;
            }
        }
        let id = self.next_vehicle_id;
        self.next_vehicle_id += 1;
        let vehicle = Vehicle {
            id,
            class: class_idx,
            lane: lane_idx as u8,
            position: entry_position,
            speed,
            accel: 0.0,
            spawn_time: self.clock,
            cumulative_wait: 0.0,
            exited: false,
        };
        lane.vehicles.push_back(vehicle);
        self.spawned_count += 1;
        if let Some(trace) = self.trace.as_mut() {
            trace.events.push(EventRow {
                t: self.clock + self.config.sim_step as u64,
                kind: EventKind::Spawn,
                id,
                lane: lane_idx as u8,
                value: speed,
            });
        }
        true
    }
}

struct IntervalAcc {
    density_sum: [f64; N_LANES],
    halted_sum: [f64; N_LANES],
    last_queues: [u32; N_LANES],
    halted_samples: Vec<u32>,
    zone: BTreeMap<u64, ZoneAcc>,
    co2: f64,
    wait_added: f64,
    spawned: u32,
    blocked: u32,
    exited: u32,
    exit_travel_times: Vec<f64>,
}

impl IntervalAcc {
    fn new() -> Self {
        IntervalAcc {
            density_sum: [0.0; N_LANES],
            halted_sum: [0.0; N_LANES],
            last_queues: [0; N_LANES],
            halted_samples: Vec::new(),
            zone: BTreeMap::new(),
            co2: 0.0,
            wait_added: 0.0,
            spawned: 0,
            blocked: 0,
            exited: 0,
            exit_travel_times: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_config(seed: u64) -> SimConfig {
        SimConfig {
            arrival_rate_range: (0.0, 0.0),
            seed,
            ..SimConfig::default()
        }
    }

    #[test]
    fn identical_seeds_give_identical_states() {
        let a = init_sim(SimConfig {
            seed: 42,
            ..SimConfig::default()
        })
        .unwrap();
        let b = init_sim(SimConfig {
            seed: 42,
            ..SimConfig::default()
        })
        .unwrap();
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn invalid_green_bounds_rejected() {
        let cfg = SimConfig {
            g_min: 50,
            g_max: 5,
            ..SimConfig::default()
        };
        let err = init_sim(cfg).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("g_min") && msg.contains("g_max"), "{msg}");
    }

    #[test]
    fn degenerate_mixture_spawns_only_cars() {
        let cfg = SimConfig {
            arrival_rate_range: (0.3, 0.3),
            seed: 7,
            ..SimConfig::default()
        };
        let mut sim = init_sim(cfg).unwrap();
        for _ in 0..100 {
            sim.step(0);
        }
        assert!(sim.spawned_count > 0);
        for lane in &sim.lanes {
            for veh in &lane.vehicles {
                assert_eq!(veh.class, 0);
            }
        }
    }

    #[test]
    fn empty_network_step_is_all_zero() {
        let mut sim = init_sim(quiet_config(1)).unwrap();
        let meas = sim.step(0);
        assert_eq!(meas.halted_total, 0);
        assert_eq!(meas.total_wait, 0.0);
        assert_eq!(meas.co2_increment, 0.0);
        assert_eq!(meas.exited, 0);
        assert!(meas.zone_vehicles.is_empty());
        assert_eq!(meas.mean_density, [0.0; N_LANES]);
    }

    #[test]
    fn zero_rate_never_spawns() {
        let mut sim = init_sim(quiet_config(3)).unwrap();
        for _ in 0..200 {
            sim.step((sim.clock / 30 % 2) as u8);
        }
        assert_eq!(sim.spawned_count, 0);
        assert_eq!(sim.blocked_count, 0);
    }

    #[test]
    fn car_at_green_stop_line_exits_within_interval() {
        let mut sim = init_sim(quiet_config(1)).unwrap();
        sim.lanes[0].vehicles.push_back(Vehicle {
            id: 99,
            class: 0,
            lane: 0,
            position: sim.config.lane_length,
            speed: 0.0,
            accel: 0.0,
            spawn_time: 0,
            cumulative_wait: 0.0,
            exited: false,
        });
        sim.spawned_count += 1;
        let meas = sim.step(0);
        assert_eq!(meas.exited, 1);
        assert_eq!(sim.exited_count, 1);
        assert!(sim.conservation_holds());
        // Crossed during the first sub-step, traversed for 2 s.
        assert_eq!(meas.exit_travel_times, vec![3.0]);
    }

    #[test]
    fn car_on_red_lane_accrues_full_interval_wait() {
        let mut sim = init_sim(quiet_config(1)).unwrap();
        // Lane 2 (E) faces red while phase 0 holds.
        sim.lanes[2].vehicles.push_back(Vehicle {
            id: 7,
            class: 0,
            lane: 2,
            position: sim.config.lane_length,
            speed: 0.0,
            accel: 0.0,
            spawn_time: 0,
            cumulative_wait: 0.0,
            exited: false,
        });
        sim.spawned_count += 1;
        let meas = sim.step(0);
        assert_eq!(meas.queue_snapshot[2], 1);
        assert_eq!(meas.mean_halted[2], 1.0);
        assert_eq!(sim.lanes[2].vehicles[0].cumulative_wait, 5.0);
        assert_eq!(meas.total_wait, 5.0);
    }

    #[test]
    fn expected_spawns_match_rate() {
        // lambda = 0.1 veh/s for every approach, 1000 s horizon: the mean
        // spawn count per approach over 100 seeded episodes lands within
        // 10% of 100.
        let mut total = 0u64;
        let episodes = 100;
        for seed in 0..episodes {
            let cfg = SimConfig {
                arrival_rate_range: (0.1, 0.1),
                seed,
                ..SimConfig::default()
            };
            let mut sim = init_sim(cfg).unwrap();
            for step in 0..sim.config.steps_per_episode() {
                // Alternate phases to keep lanes from saturating.
                sim.step(((step / 6) % 2) as u8);
            }
            total += sim.spawned_count + sim.blocked_count;
        }
        let per_approach = total as f64 / (episodes * N_LANES as u64) as f64;
        assert!(
            (per_approach - 100.0).abs() < 10.0,
            "mean arrivals per approach: {per_approach}"
        );
    }

    #[test]
    fn class_mixture_frequencies_within_three_points() {
        let cfg = SimConfig {
            arrival_rate_range: (0.2, 0.2),
            class_mixture: heterogeneous_mixture(),
            seed: 11,
            ..SimConfig::default()
        };
        let mut counts = [0u64; 4];
        let mut sim = init_sim(cfg.clone()).unwrap();
        let mut episode = 0u64;
        while counts.iter().sum::<u64>() < 2000 {
            for step in 0..sim.config.steps_per_episode() {
                sim.step(((step / 6) % 2) as u8);
            }
            for lane in &sim.lanes {
                for veh in &lane.vehicles {
                    counts[veh.class as usize] += 1;
                }
            }
            // Count exited vehicles by rerunning is awkward; sample standing
            // traffic across episodes instead.
            episode += 1;
            sim = init_sim(SimConfig {
                seed: cfg.seed + episode,
                ..cfg.clone()
            })
            .unwrap();
        }
        let total: u64 = counts.iter().sum();
        let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        let expected = heterogeneous_mixture();
        for (f, e) in freqs.iter().zip(expected.iter()) {
            assert!((f - e).abs() < 0.03, "freqs {freqs:?}");
        }
    }

    #[test]
    fn conservation_and_ordering_invariants_under_load() {
        let cfg = SimConfig {
            arrival_rate_range: (0.25, 0.25),
            class_mixture: heterogeneous_mixture(),
            seed: 5,
            ..SimConfig::default()
        };
        let mut sim = init_sim(cfg).unwrap();
        for step in 0..sim.config.steps_per_episode() {
            sim.step((step % 13 % 2) as u8);
            assert!(sim.conservation_holds());
            for lane in &sim.lanes {
                let mut prev: Option<&Vehicle> = None;
                for veh in &lane.vehicles {
                    assert!(veh.position <= lane.length + 1e-9);
                    assert!(veh.speed >= 0.0);
                    let class = &sim.config.classes[veh.class as usize];
                    assert!(veh.speed <= class.max_speed + 1e-12);
                    if let Some(p) = prev {
                        let leader_class = &sim.config.classes[p.class as usize];
                        let spacing = p.position - veh.position;
                        assert!(
                            spacing >= leader_class.length + sim.config.min_gap - 1e-9,
                            "spacing {spacing}"
                        );
                    }
                    prev = Some(veh);
                }
            }
        }
        assert!(sim.spawned_count > 100);
    }

    #[test]
    fn saturated_lane_blocks_spawns() {
        let cfg = SimConfig {
            arrival_rate_range: (0.5, 0.5),
            seed: 2,
            ..SimConfig::default()
        };
        let mut sim = init_sim(cfg).unwrap();
        // Hold phase 0 forever; E/W lanes jam and block.
        for _ in 0..sim.config.steps_per_episode() {
            sim.step(0);
        }
        assert!(sim.blocked_count > 0);
        let cap = sim.config.lane_capacity() as usize;
        for lane in &sim.lanes[2..] {
            assert!(lane.vehicles.len() <= cap + 1);
        }
    }

    #[test]
    fn deterministic_episode_trace() {
        let run = |seed: u64| {
            let cfg = SimConfig {
                arrival_rate_range: (0.1, 0.3),
                seed,
                ..SimConfig::default()
            };
            let mut sim = init_sim(cfg).unwrap();
            sim.enable_trace();
            for step in 0..sim.config.steps_per_episode() {
                sim.step((step % 7 % 2) as u8);
            }
            serde_json::to_string(&sim.take_trace().unwrap()).unwrap()
        };
        assert_eq!(run(123), run(123));
        assert_ne!(run(123), run(124));
    }
}
