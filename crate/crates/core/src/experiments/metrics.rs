//! Scalar metrics over telemetry and summary statistics over runs.

use serde::{Deserialize, Serialize};

use super::telemetry::TelemetryRecord;

/// Trapezoidal integral of `f` over the telemetry time stamps.
pub fn trapezoid(telemetry: &[TelemetryRecord], f: impl Fn(&TelemetryRecord) -> f64) -> f64 {
    telemetry.windows(2).map(|w| 0.5 * (w[1].t - w[0].t) * (f(&w[0]) + f(&w[1]))).sum()
}

/// `∫ u_actᵀ u_act dt`.
pub fn energy_metric(telemetry: &[TelemetryRecord]) -> f64 {
    trapezoid(telemetry, |r| r.u_act_norm * r.u_act_norm)
}

/// `∫ ‖τ_b‖ dt` of the applied base torque.
pub fn torque_integral(telemetry: &[TelemetryRecord]) -> f64 {
    trapezoid(telemetry, |r| r.torque_norm)
}

/// First time after which `f` stays below `threshold` until the end of the
/// telemetry; `None` if the last sample is not below it.
pub fn convergence_time(telemetry: &[TelemetryRecord], threshold: f64, f: impl Fn(&TelemetryRecord) -> f64) -> Option<f64> {
    let mut t = None;
    for r in telemetry.iter().rev() {
        if f(r) < threshold {
            t = Some(r.t);
        } else {
            break;
        }
    }
    t
}

/// Mean of the defined (non-NaN) axis-distance samples.
pub fn mean_axis_distance(telemetry: &[TelemetryRecord]) -> Option<f64> {
    let v: Vec<f64> = telemetry.iter().map(|r| r.axis_distance).filter(|x| !x.is_nan()).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn peak(telemetry: &[TelemetryRecord], f: impl Fn(&TelemetryRecord) -> f64) -> f64 {
    telemetry.iter().map(f).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistics {
    pub count: usize,
    pub mean: f64,
    /// Unbiased (n−1) variance; zero for a single sample.
    pub variance: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Statistics {
    /// Quantiles by linear interpolation between order statistics. `None` on
    /// an empty sample.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        let quantile = |p: f64| {
            let h = p * (n - 1) as f64;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self {
            count: n,
            mean,
            variance,
            min: v[0],
            q25: quantile(0.25),
            median: quantile(0.5),
            q75: quantile(0.75),
            max: v[n - 1],
        })
    }
}
