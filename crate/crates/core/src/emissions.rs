//! CO2 surrogate model.
//!
//! Polynomial speed/acceleration rate in the style of microscopic emission
//! models, scaled per class by mass relative to a 1500 kg car. Absolute
//! grams are not calibrated against any external inventory; only ratios and
//! orderings across controllers are meaningful.

use serde::{Deserialize, Serialize};

use crate::sim::vehicle::VehicleClass;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EmissionParams {
    /// Idle rate, g/s.
    pub beta0: f64,
    /// Linear speed term, g per m.
    pub beta1: f64,
    /// Quadratic speed term.
    pub beta2: f64,
    /// Cubic speed term.
    pub beta3: f64,
    /// Positive-acceleration coupling.
    pub beta4: f64,
}

impl Default for EmissionParams {
    fn default() -> Self {
        EmissionParams {
            beta0: 0.45,
            beta1: 0.03,
            beta2: 0.002,
            beta3: 0.0001,
            beta4: 0.06,
        }
    }
}

/// Instantaneous emission rate in g/s for one vehicle. Idling emits
/// `beta0 * mass_scale`; the rate is strictly increasing in speed and
/// positive acceleration costs extra. Deceleration adds nothing.
pub fn co2_rate(speed: f64, accel: f64, class: &VehicleClass, p: &EmissionParams) -> f64 {
    let v = speed.max(0.0);
    let poly = p.beta0
        + p.beta1 * v
        + p.beta2 * v * v
        + p.beta3 * v * v * v
        + p.beta4 * accel.max(0.0) * v;
    class.emission_scale * p.beta0.max(poly)
}
