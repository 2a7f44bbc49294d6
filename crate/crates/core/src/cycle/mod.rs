//! Forecast/analysis cycling with look-ahead meshes.

mod lah;
mod run;

use std::sync::Arc;

use crate::mesh::Mesh1D;

pub use lah::{accumulate_step, build_lah_metric, pre_forecast, AccumulatedMetric, MeshPolicy, PreForecast};
pub use run::{
    build_model, initial_ensemble, run_cycle_method_a, run_cycle_method_b, run_twin, run_twin_with, CycleContext,
    Truth, TwinRun,
};

/// Wall-clock seconds per phase of one cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub pre_forecast: f64,
    pub mesh: f64,
    pub interpolation: f64,
    pub forecast: f64,
    pub analysis: f64,
}

impl PhaseTimings {
    pub fn total(&self) -> f64 {
        self.pre_forecast + self.mesh + self.interpolation + self.forecast + self.analysis
    }
}

/// Diagnostics of one cycle, taken at its analysis time.
#[derive(Debug, Clone)]
pub struct CycleRecord {
    pub cycle: usize,
    pub time: f64,
    /// Analysis mean against the truth, per component.
    pub rmse: Vec<f64>,
    pub forecast_rmse: Vec<f64>,
    pub spread: Vec<f64>,
    /// Accepted forecast steps per member.
    pub steps: Vec<usize>,
    /// Accepted steps of the small-ensemble pre-forecasts.
    pub pre_steps: Vec<usize>,
    /// Mesh the analysis was computed on.
    pub mesh: Arc<Mesh1D>,
    /// Member-state interpolations performed.
    pub interpolations: usize,
    pub nodes_without_obs: usize,
    pub timings: PhaseTimings,
}

/// Centered moving average over a time window of width `window`; the window
/// is truncated at the ends of the series.
pub fn moving_average(times: &[f64], values: &[f64], window: f64) -> Vec<f64> {
    assert_eq!(times.len(), values.len());
    let half = 0.5 * window * (1.0 + 1e-12);
    let mut lo = 0;
    let mut hi = 0;
    let mut out = Vec::with_capacity(values.len());
    for &t in times {
        while hi < times.len() && times[hi] <= t + half {
            hi += 1;
        }
        while times[lo] < t - half {
            lo += 1;
        }
        out.push(values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64);
    }
    out
}

/// Per-component analysis RMSE smoothed over `window`.
pub fn rmse_series(records: &[CycleRecord], window: f64) -> Vec<Vec<f64>> {
    let times: Vec<f64> = records.iter().map(|r| r.time).collect();
    let nc = records.first().map_or(0, |r| r.rmse.len());
    (0..nc)
        .map(|c| {
            let v: Vec<f64> = records.iter().map(|r| r.rmse[c]).collect();
            moving_average(&times, &v, window)
        })
        .collect()
}

impl TwinRun {
    /// Time-averaged analysis RMSE per component over cycles `skip..`.
    pub fn mean_rmse(&self, skip: usize) -> Vec<f64> {
        let tail = &self.records[skip.min(self.records.len())..];
        let nc = self.records.first().map_or(0, |r| r.rmse.len());
        (0..nc)
            .map(|c| tail.iter().map(|r| r.rmse[c]).sum::<f64>() / tail.len().max(1) as f64)
            .collect()
    }

    /// Total accepted forecast steps per member over the run.
    pub fn steps_per_member(&self) -> Vec<usize> {
        let ne = self.records.first().map_or(0, |r| r.steps.len());
        (0..ne).map(|i| self.records.iter().map(|r| r.steps[i]).sum()).collect()
    }

    pub fn total_timings(&self) -> PhaseTimings {
        self.records.iter().fold(PhaseTimings::default(), |a, r| PhaseTimings {
            pre_forecast: a.pre_forecast + r.timings.pre_forecast,
            mesh: a.mesh + r.timings.mesh,
            interpolation: a.interpolation + r.timings.interpolation,
            forecast: a.forecast + r.timings.forecast,
            analysis: a.analysis + r.timings.analysis,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn moving_average_cases() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 1e-4).collect();
        let flat = vec![0.3; 100];
        for v in moving_average(&t, &flat, 0.005) {
            assert_abs_diff_eq!(v, 0.3, epsilon = 1e-15);
        }
        let v: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        assert_eq!(moving_average(&t, &v, 0.5e-4), v);
    }

    #[test]
    fn sawtooth_flattens_to_mean() {
        let t: Vec<f64> = (0..2000).map(|i| i as f64 * 1e-4).collect();
        // period 10 cycles, mean 0.5
        let v: Vec<f64> = (0..2000).map(|i| (i % 10) as f64 / 9.0).collect();
        let avg = moving_average(&t, &v, 0.05);
        for a in &avg[300..1700] {
            assert!((a - 0.5).abs() < 0.005, "{a}");
        }
    }
}
