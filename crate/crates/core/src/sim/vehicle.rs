//! Vehicle classes and the longitudinal kinematic model.
//!
//! Single-file motion per lane: each vehicle moves toward the lowest of its
//! free-flow speed, a gap-safe speed behind its leader, and (on red or
//! yellow) a stop-line-safe speed, with acceleration and deceleration
//! bounded per class. Positions advance by the trapezoidal mean of old and
//! new speed. The safe-speed rule accounts for the discrete braking
//! trajectory, so spacing and stop-line constraints hold at every sub-step,
//! not just in the continuum limit.

use serde::{Deserialize, Serialize};

/// Reference mass against which heterogeneous momentum and emissions scale.
pub const REFERENCE_MASS_KG: f64 = 1500.0;

/// Constrained speeds below this snap to zero. Without the snap the
/// barrier-approach dynamics crawl forever at millimeters per second;
/// queued vehicles must actually stop.
pub const CREEP_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VehicleClass {
    pub name: String,
    pub mass: f64,
    pub length: f64,
    pub max_speed: f64,
    pub max_accel: f64,
    /// Positive magnitude of the braking bound.
    pub max_decel: f64,
    /// mass / 1500; multiplies the emission rate.
    pub emission_scale: f64,
}

impl VehicleClass {
    pub fn new(
        name: &str,
        mass: f64,
        length: f64,
        max_speed: f64,
        max_accel: f64,
        max_decel: f64,
    ) -> Self {
        VehicleClass {
            name: name.to_string(),
            mass,
            length,
            max_speed,
            max_accel,
            max_decel,
            emission_scale: mass / REFERENCE_MASS_KG,
        }
    }

    /// Speed at which vehicles of this class enter the lane.
    pub fn entry_speed(&self) -> f64 {
        0.5 * self.max_speed
    }
}

/// The four canonical classes: car, truck, bus, motorcycle.
pub fn canonical_classes() -> Vec<VehicleClass> {
    vec![
        VehicleClass::new("car", 1500.0, 5.0, 13.89, 2.6, 4.5),
        VehicleClass::new("truck", 8000.0, 10.0, 11.11, 1.2, 4.0),
        VehicleClass::new("bus", 12000.0, 12.0, 11.11, 1.0, 4.0),
        VehicleClass::new("motorcycle", 200.0, 2.5, 13.89, 3.0, 5.0),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Vehicle {
    pub id: u64,
    /// Index into the configured class list.
    pub class: u8,
    pub lane: u8,
    /// Front-bumper distance from the lane entry, meters.
    pub position: f64,
    pub speed: f64,
    /// Acceleration applied over the last sub-step, m/s^2.
    pub accel: f64,
    pub spawn_time: u64,
    pub cumulative_wait: f64,
    pub exited: bool,
}

/// Distance covered by the maximal-braking trajectory that starts at `speed`
/// and loses `decel * dt` per sub-step, with trapezoidal position updates.
/// Exact for the discrete dynamics; larger than v^2/(2b) when the speed is
/// not a multiple of `decel * dt`.
pub fn stopping_distance(speed: f64, decel: f64, dt: f64) -> f64 {
    if speed <= 0.0 {
        return 0.0;
    }
    let bdt = decel * dt;
    let n = (speed / bdt).floor();
    dt * (speed * (n + 0.5) - bdt * n * (n + 1.0) / 2.0)
}

/// Largest new speed in [0, cap] such that this sub-step's advance plus the
/// subsequent worst-case braking distance plus a `headway`-seconds buffer
/// at the new speed stays within `dist` of the barrier. Solved per
/// braking-step branch; the constraint function is continuous and strictly
/// increasing in the new speed, so the bound is unique. `headway` is the
/// time-gap kept behind a leader (zero for fixed barriers like stop lines).
pub fn safe_speed(speed: f64, dist: f64, decel: f64, dt: f64, cap: f64, headway: f64) -> f64 {
    if dist <= 0.0 {
        return 0.0;
    }
    if 0.5 * (speed + cap) * dt + stopping_distance(cap, decel, dt) + headway * cap <= dist {
        return cap;
    }
    let bdt = decel * dt;
    let mut n = 0.0f64;
    loop {
        let top = (n + 1.0) * bdt;
        let cand = (dist - 0.5 * speed * dt + decel * dt * dt * n * (n + 1.0) / 2.0)
            / (dt * (n + 1.0) + headway);
        if cand <= top || top >= cap {
            return cand.clamp(0.0, cap);
        }
        n += 1.0;
    }
}

/// One kinematic sub-step. `leader_gap` is the free distance ahead of the
/// front bumper before minimum spacing is violated (infinite when leading);
/// `headway` is the time-gap kept behind the leader on top of that;
/// `stop_line_distance` is the distance to the stop line, binding only when
/// the lane faces red or yellow. The advance is hard-capped at the nearest
/// binding barrier so spacing and red-light constraints can never be
/// crossed, even from hand-built states the safe-speed rule would not reach.
pub fn advance_vehicle(
    vehicle: &mut Vehicle,
    class: &VehicleClass,
    leader_gap: f64,
    headway: f64,
    stop_line_distance: f64,
    facing_green: bool,
    dt: f64,
) {
    let cap = (vehicle.speed + class.max_accel * dt).min(class.max_speed);
    let mut target = safe_speed(vehicle.speed, leader_gap, class.max_decel, dt, cap, headway);
    if !facing_green {
        target = target.min(safe_speed(
            vehicle.speed,
            stop_line_distance,
            class.max_decel,
            dt,
            cap,
            0.0,
        ));
    }
    let floor = (vehicle.speed - class.max_decel * dt).max(0.0);
    let mut new_speed = target.clamp(floor.min(cap), cap);
    if new_speed < CREEP_SPEED && new_speed < cap {
        new_speed = 0.0;
    }

    let mut limit = leader_gap;
    if !facing_green {
        limit = limit.min(stop_line_distance);
    }
    let advance = (0.5 * (vehicle.speed + new_speed) * dt).min(limit.max(0.0));

    vehicle.accel = (new_speed - vehicle.speed) / dt;
    vehicle.speed = new_speed;
    vehicle.position += advance;
}
