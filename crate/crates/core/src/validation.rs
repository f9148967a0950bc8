//! Batch trajectory evaluation on a held-out log.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::TimeSeriesLog;
use crate::error::{Error, Result};
use crate::forecast::{predict_trajectory, trajectory_error, Method, Trajectory};
use crate::library::ModelLibrary;
use crate::linalg::{median, quantile};

/// `count` evenly spaced forecast origins `t` such that the regressor history
/// and the `n_p`-step truth both fit inside a log of length `len`.
pub fn trajectory_starts(len: usize, n_p: usize, max_lag: usize, count: usize) -> Result<Vec<usize>> {
    let lo = max_lag;
    let hi = len.checked_sub(n_p + 1).filter(|&h| h >= lo).ok_or(Error::LogTooShort {
        len,
        needed: max_lag + n_p + 1,
    })?;
    if count == 0 {
        return Ok(Vec::new());
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let span = (hi - lo) as f64;
    let mut starts: Vec<usize> = (0..count)
        .map(|i| lo + (span * i as f64 / (count - 1) as f64).round() as usize)
        .collect();
    starts.dedup();
    Ok(starts)
}

/// Forecast from origin `t` of `log`, returning the trajectory and its truth
/// `y(t) … y(t + n_p)`.
pub fn forecast_at(log: &TimeSeriesLog, t: usize, n_p: usize, library: &ModelLibrary, method: Method) -> Result<(Trajectory, Vec<f64>)> {
    let lag = library.layout().max_lag();
    if t < lag || t + n_p >= log.len() {
        return Err(Error::InvalidArgument(format!("forecast origin {t} out of range")));
    }
    let tail = log.slice(t - lag..t + 1);
    let traj = predict_trajectory(&tail, &log.u[t + 1..t + n_p], n_p, library, method)?;
    Ok((traj, log.y[t..=t + n_p].to_vec()))
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryRecord {
    pub start: usize,
    pub method: Method,
    pub zeta: f64,
    pub interp_metric: f64,
    pub zero_fraction: f64,
    pub iterations: Vec<usize>,
    /// Steps whose 95% interval contains the truth.
    pub covered: usize,
    pub steps: usize,
    pub converged: bool,
    pub wall_time_ms: f64,
}

pub fn evaluate(log: &TimeSeriesLog, t: usize, n_p: usize, library: &ModelLibrary, method: Method) -> Result<TrajectoryRecord> {
    let (traj, truth) = forecast_at(log, t, n_p, library, method)?;
    let zeta = trajectory_error(&truth, &traj.y_hat)?;
    let covered = traj
        .interval95
        .iter()
        .zip(&truth[1..])
        .filter(|(&(lo, hi), &y)| lo <= y && y <= hi)
        .count();
    Ok(TrajectoryRecord {
        start: t,
        method,
        zeta,
        interp_metric: traj.mean_interp_metric(),
        zero_fraction: traj.zero_fraction.iter().sum::<f64>() / n_p as f64,
        iterations: traj.iterations.clone(),
        covered,
        steps: n_p,
        converged: traj.all_converged(),
        wall_time_ms: traj.wall_time.as_secs_f64() * 1e3,
    })
}

/// Evaluate every method on every origin, in parallel across origins.
pub fn run_validation(log: &TimeSeriesLog, library: &ModelLibrary, n_p: usize, starts: &[usize], methods: &[Method]) -> Result<Vec<TrajectoryRecord>> {
    let jobs: Vec<(usize, Method)> = starts.iter().flat_map(|&t| methods.iter().map(move |&m| (t, m))).collect();
    jobs.into_par_iter().map(|(t, m)| evaluate(log, t, n_p, library, m)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub mean: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
        Self {
            q1: quantile(&mut v, 0.25),
            median: quantile(&mut v, 0.5),
            q3: quantile(&mut v, 0.75),
            mean,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub trajectories: usize,
    pub zeta: Quartiles,
    pub interp_metric: Quartiles,
    pub zero_fraction: Quartiles,
    pub iterations_median: f64,
    pub iterations_p90: f64,
    pub iterations_max: usize,
    pub coverage: f64,
    pub nonconverged: usize,
    pub wall_time_ms_median: f64,
}

pub fn summarize(records: &[TrajectoryRecord], method: Method) -> MethodSummary {
    let rs: Vec<&TrajectoryRecord> = records.iter().filter(|r| r.method == method).collect();
    let col = |f: fn(&TrajectoryRecord) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let mut iters: Vec<f64> = rs.iter().flat_map(|r| r.iterations.iter().map(|&i| i as f64)).collect();
    let steps: usize = rs.iter().map(|r| r.steps).sum();
    let covered: usize = rs.iter().map(|r| r.covered).sum();
    MethodSummary {
        method,
        trajectories: rs.len(),
        zeta: Quartiles::of(&col(|r| r.zeta)),
        interp_metric: Quartiles::of(&col(|r| r.interp_metric)),
        zero_fraction: Quartiles::of(&col(|r| r.zero_fraction)),
        iterations_median: median(&mut iters),
        iterations_p90: quantile(&mut iters, 0.9),
        iterations_max: rs.iter().flat_map(|r| r.iterations.iter().copied()).max().unwrap_or(0),
        coverage: covered as f64 / steps.max(1) as f64,
        nonconverged: rs.iter().filter(|r| !r.converged).count(),
        wall_time_ms_median: median(&mut col(|r| r.wall_time_ms)),
    }
}

/// Per-trajectory `(interp_metric, ζ)` pairs as CSV.
pub fn write_scatter_csv<W: Write>(records: &[TrajectoryRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["start", "method", "interp_metric", "zeta", "zero_fraction"])?;
    for r in records {
        w.write_record(&[
            r.start.to_string(),
            r.method.name().to_string(),
            r.interp_metric.to_string(),
            r.zeta.to_string(),
            r.zero_fraction.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_cover_the_valid_range() {
        let s = trajectory_starts(1000, 40, 4, 5).unwrap();
        assert_eq!(s, vec![4, 243, 482, 720, 959]);
        assert!(trajectory_starts(40, 40, 4, 3).is_err());
        assert_eq!(trajectory_starts(100, 10, 4, 1).unwrap(), vec![4]);
    }

    #[test]
    fn quartiles() {
        let q = Quartiles::of(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!((q.q1, q.median, q.q3, q.mean), (2.0, 3.0, 4.0, 3.0));
    }
}
