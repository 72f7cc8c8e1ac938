//! Per-sub-step episode traces, used by test oracles and the `--trace` flag.
//!
//! Three record kinds: signal rows (one per simulated second, with the
//! signal state that governed that second and post-update lane aggregates),
//! vehicle rows (one per lane vehicle per second), and events (spawns,
//! blocked arrivals, stop-line crossings, junction exits).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_LANES: usize = 4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalRow {
    /// End of the sub-step this row describes, seconds.
    pub t: u64,
    pub phase: u8,
    pub in_yellow: bool,
    /// Halted vehicles per lane at sub-step end.
    pub queues: [u32; N_LANES],
    /// Normalized occupancy per lane at sub-step end.
    pub densities: [f64; N_LANES],
    pub spawns: u32,
    pub exits: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VehicleRow {
    pub t: u64,
    pub id: u64,
    pub lane: u8,
    pub class: u8,
    pub position: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Spawn,
    Blocked,
    Crossing,
    Exit,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::Spawn => "spawn",
            EventKind::Blocked => "blocked",
            EventKind::Crossing => "crossing",
            EventKind::Exit => "exit",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventRow {
    pub t: u64,
    pub kind: EventKind,
    pub id: u64,
    pub lane: u8,
    /// Spawn: initial speed. Crossing: crossing speed. Exit: travel time.
    pub value: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub signal: Vec<SignalRow>,
    pub vehicles: Vec<VehicleRow>,
    pub events: Vec<EventRow>,
}

impl EpisodeTrace {
    /// Writes `signal_trace.csv`, `vehicle_trace.csv`, and `events.csv`
    /// under `dir`. Floats use the shortest round-trip representation, so
    /// parsing them back is exact.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        let signal_path = dir.join("signal_trace.csv");
        let mut out = String::new();
        out.push_str("t,phase,in_yellow,queue_n,queue_s,queue_e,queue_w,density_n,density_s,density_e,density_w,spawns,exits\n");
        for r in &self.signal {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.t,
                r.phase,
                r.in_yellow as u8,
                r.queues[0],
                r.queues[1],
                r.queues[2],
                r.queues[3],
                r.densities[0],
                r.densities[1],
                r.densities[2],
                r.densities[3],
                r.spawns,
                r.exits,
            ));
        }
        write_file(&signal_path, &out)?;

        let vehicle_path = dir.join("vehicle_trace.csv");
        let mut out = String::new();
        out.push_str("t,id,lane,class,position,speed\n");
        for r in &self.vehicles {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.t, r.id, r.lane, r.class, r.position, r.speed
            ));
        }
        write_file(&vehicle_path, &out)?;

        let events_path = dir.join("events.csv");
        let mut out = String::new();
        out.push_str("t,kind,id,lane,value\n");
        for r in &self.events {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.t,
                r.kind.label(),
                r.id,
                r.lane,
                r.value
            ));
        }
        write_file(&events_path, &out)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))
}
