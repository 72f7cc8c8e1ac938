//! Episode-level metric accumulation.
//!
//! Five evaluation metrics per episode: mean waiting time over completed
//! vehicles, time-averaged total queue length, throughput, mean travel
//! time, and total CO2. Waiting accrued by vehicles still queued at episode
//! end stays in the numerator; the denominator is completed vehicles.

use serde::{Deserialize, Serialize};

use crate::sim::StepMeasurements;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpisodeReport {
    pub mean_waiting: f64,
    pub mean_queue: f64,
    pub throughput: u64,
    pub mean_travel_time: f64,
    pub co2_total: f64,
    pub episode_return: f64,
    pub seed: u64,
}

impl EpisodeReport {
    pub fn is_consistent(&self) -> bool {
        self.mean_waiting >= 0.0
            && self.mean_queue >= 0.0
            && self.mean_travel_time >= 0.0
            && self.co2_total >= 0.0
            && [
                self.mean_waiting,
                self.mean_queue,
                self.mean_travel_time,
                self.co2_total,
                self.episode_return,
            ]
            .iter()
            .all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    wait_accrued: f64,
    halted_sum: f64,
    substeps: u64,
    throughput: u64,
    travel_sum: f64,
    co2: f64,
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Folds in one control interval's measurements; the per-sub-step halted
    /// samples keep the queue metric a true time average.
    pub fn accumulate(&mut self, meas: &StepMeasurements) {
        self.wait_accrued += meas.wait_increment;
        for &h in &meas.halted_samples {
            self.halted_sum += h as f64;
            self.substeps += 1;
        }
        self.throughput += meas.exited as u64;
        self.travel_sum += meas.exit_travel_times.iter().sum::<f64>();
        self.co2 += meas.co2_increment;
    }

    pub fn finish(self, episode_return: f64, seed: u64) -> EpisodeReport {
        let completed = self.throughput as f64;
        EpisodeReport {
            mean_waiting: if completed > 0.0 {
                self.wait_accrued / completed
            } else {
                0.0
            },
            mean_queue: if self.substeps > 0 {
                self.halted_sum / self.substeps as f64
            } else {
                0.0
            },
            throughput: self.throughput,
            mean_travel_time: if completed > 0.0 {
                self.travel_sum / completed
            } else {
                0.0
            },
            co2_total: self.co2,
            episode_return,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_episode_is_all_zero() {
        let acc = MetricsAccumulator::new();
        let report = acc.finish(0.0, 1);
        assert_eq!(report.mean_waiting, 0.0);
        assert_eq!(report.mean_queue, 0.0);
        assert_eq!(report.throughput, 0);
        assert_eq!(report.mean_travel_time, 0.0);
        assert_eq!(report.co2_total, 0.0);
        assert!(report.is_consistent());
    }

    #[test]
    fn queue_metric_is_time_average() {
        let mut acc = MetricsAccumulator::new();
        let mut meas = StepMeasurements::default();
        meas.halted_samples = vec![0, 2, 4, 4, 0];
        acc.accumulate(&meas);
        let report = acc.finish(0.0, 0);
        assert_eq!(report.mean_queue, 2.0);
    }

    #[test]
    fn waiting_denominator_is_completed_vehicles() {
        let mut acc = MetricsAccumulator::new();
        let mut meas = StepMeasurements::default();
        meas.wait_increment = 30.0;
        meas.exited = 2;
        meas.exit_travel_times = vec![12.0, 20.0];
        acc.accumulate(&meas);
        let report = acc.finish(0.0, 0);
        assert_eq!(report.mean_waiting, 15.0);
        assert_eq!(report.mean_travel_time, 16.0);
        assert_eq!(report.throughput, 2);
    }
}
