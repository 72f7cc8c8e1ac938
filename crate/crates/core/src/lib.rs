//! Single-intersection traffic-signal control workbench.
//!
//! A seeded discrete-time microsimulator of a four-arm intersection drives
//! DQN agents trained under four selectable rewards (momentum, waiting,
//! queue, differential waiting) and three classical controllers (Max
//! Pressure, Longest Queue First, fixed-time). The experiment layer runs
//! multi-seed comparisons and writes CSV summaries of waiting time, queue
//! length, throughput, travel time, and CO2.

pub mod baselines;
pub mod dqn;
pub mod emissions;
pub mod episode;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod neural;
pub mod reward;
pub mod sim;
pub mod streams;
pub mod trace;

pub use error::Error;
