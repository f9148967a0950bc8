//! Online recursive multi-step prediction against a model library.

use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::TimeSeriesLog;
use crate::error::{Error, Result};
use crate::kadmm::{kadmm_solve, recover_weights};
use crate::kriging::{adaptive_penalties, constraint_matrix, constraint_rhs, factor_zone_kkt, interval95, prediction_variance, solve_uk};
use crate::library::ModelLibrary;
use crate::preprocess::sq_dist;
use crate::variogram::{gamma_matrix, gamma_vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Adaptive-lasso kriging solved by K-ADMM.
    Kadmm,
    /// Standard universal kriging with the zone's cached factorization.
    UniversalKriging,
    /// Standard universal kriging that rebuilds and factors the saddle-point
    /// system at every step, as a generic solver would.
    DenseReference,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Kadmm => "kadmm",
            Method::UniversalKriging => "uk",
            Method::DenseReference => "dense_reference",
        }
    }
}

/// Nearest zone centroid in standardized space; ties go to the lower index.
pub fn select_cluster(z_std: &[f64], library: &ModelLibrary) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, zone) in library.zones.iter().enumerate() {
        let d = sq_dist(z_std, zone.centroid());
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

/// `Σ|λ_i| − 1`: zero for convex combinations, positive with negative weights.
pub fn interpolation_metric(lambda: &DVector<f64>) -> f64 {
    lambda.iter().map(|v| v.abs()).sum::<f64>() - 1.0
}

#[derive(Clone, Debug)]
pub struct StepPrediction {
    pub zone: usize,
    /// Standardized prediction.
    pub y_std: f64,
    /// Prediction-error variance in standardized units.
    pub variance_std: f64,
    pub lambda: DVector<f64>,
    pub nonzeros: usize,
    pub interp_metric: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl StepPrediction {
    pub fn zero_fraction(&self) -> f64 {
        1.0 - self.nonzeros as f64 / self.lambda.len() as f64
    }
}

/// One-step-ahead prediction from a standardized regressor.
pub fn predict_step(z_std: &[f64], library: &ModelLibrary, method: Method) -> Result<StepPrediction> {
    let dim = library.layout().dim();
    if z_std.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: z_std.len() });
    }
    let j = select_cluster(z_std, library);
    let zone = &library.zones[j];
    let q = zone.whitening.apply(z_std);
    let gamma_0 = gamma_vector(&zone.record.variogram, &zone.coords_iso, &q);
    let r0 = constraint_rhs(&q);
    let p = &library.params;

    let (lambda, iterations, converged) = match method {
        Method::UniversalKriging => (solve_uk(&zone.uk, &gamma_0, &r0).map_err(|e| e.in_zone(j))?.lambda, 0, true),
        Method::DenseReference => {
            let gamma_d = gamma_matrix(&zone.record.variogram, &zone.coords_iso);
            let factor = factor_zone_kkt(&gamma_d, &constraint_matrix(&zone.coords_iso)).map_err(|e| e.in_zone(j))?;
            (solve_uk(&factor, &gamma_0, &r0)?.lambda, 0, true)
        }
        Method::Kadmm => {
            let prior = solve_uk(&zone.uk, &gamma_0, &r0).map_err(|e| e.in_zone(j))?;
            let beta = adaptive_penalties(&prior.lambda, p.epsilon, p.beta_cap)?;
            let res = kadmm_solve(&zone.spectral, &gamma_0, &r0, &beta, &p.admm()).map_err(|e| e.in_zone(j))?;
            if !res.converged {
                log::warn!("zone {j}: K-ADMM stopped after {} iterations without converging", res.iterations);
            }
            let w = recover_weights(&res, p.threshold);
            (w.lambda, res.iterations, res.converged)
        }
    };

    let y_std = lambda.dot(&DVector::from_column_slice(&zone.record.outputs));
    let variance = prediction_variance(&lambda, &zone.gamma_d, &gamma_0)?;
    let nonzeros = lambda.iter().filter(|v| **v != 0.0).count();
    Ok(StepPrediction {
        zone: j,
        y_std,
        variance_std: variance.value,
        interp_metric: interpolation_metric(&lambda),
        lambda,
        nonzeros,
        iterations,
        converged,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Predictions in output units.
    pub y_hat: Vec<f64>,
    /// Variance in squared output units.
    pub variance: Vec<f64>,
    pub interval95: Vec<(f64, f64)>,
    pub zone_ids: Vec<usize>,
    pub nonzeros: Vec<usize>,
    pub zero_fraction: Vec<f64>,
    pub interp_metric: Vec<f64>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    pub wall_time: Duration,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.y_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_hat.is_empty()
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    pub fn mean_interp_metric(&self) -> f64 {
        self.interp_metric.iter().sum::<f64>() / self.len() as f64
    }

    /// CSV with columns `step,y_hat,lo,hi,zone,nnz,interp_metric,iters`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["step", "y_hat", "lo", "hi", "zone", "nnz", "interp_metric", "iters"])?;
        for l in 0..self.len() {
            w.write_record(&[
                (l + 1).to_string(),
                self.y_hat[l].to_string(),
                self.interval95[l].0.to_string(),
                self.interval95[l].1.to_string(),
                self.zone_ids[l].to_string(),
                self.nonzeros[l].to_string(),
                self.interp_metric[l].to_string(),
                self.iterations[l].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Predict `n_p` steps ahead from the end of `tail`.
///
/// The last row of `tail` is time `t`; it must hold at least `max(n_a, n_b)+1`
/// rows. `future_u[l − 1]` is the planned input `u(t + l)` for
/// `l = 1 … n_p − 1`. Regressors use predicted outputs for times after `t`
/// and measured values otherwise.
pub fn predict_trajectory(
    tail: &TimeSeriesLog,
    future_u: &[Vec<f64>],
    n_p: usize,
    library: &ModelLibrary,
    method: Method,
) -> Result<Trajectory> {
    let start = Instant::now();
    let layout = library.layout();
    let needed = layout.max_lag() + 1;
    if tail.len() < needed {
        return Err(Error::LogTooShort { len: tail.len(), needed });
    }
    if tail.input_dim() != layout.m {
        return Err(Error::DimensionMismatch {
            expected: layout.m,
            got: tail.input_dim(),
        });
    }
    if n_p == 0 {
        return Err(Error::InvalidArgument("prediction horizon must be at least one step".into()));
    }
    if future_u.len() + 1 < n_p {
        return Err(Error::LogTooShort {
            len: future_u.len(),
            needed: n_p - 1,
        });
    }
    let scaler = &library.scaler;
    let std_y = scaler.std[0];

    let first = tail.len() - needed;
    let mut ys: Vec<f64> = tail.y[first..].iter().map(|&v| scaler.transform_y(v)).collect();
    let mut us: Vec<Vec<f64>> = tail.u[first..]
        .iter()
        .chain(future_u.iter().take(n_p - 1))
        .map(|row| row.iter().enumerate().map(|(c, &v)| scaler.transform_u(c, v)).collect())
        .collect();
    if us.iter().any(|row| row.len() != layout.m) {
        return Err(Error::DimensionMismatch {
            expected: layout.m,
            got: us.iter().map(Vec::len).find(|&l| l != layout.m).unwrap_or(0),
        });
    }
    us.truncate(needed + n_p - 1);

    let mut out = Trajectory {
        y_hat: Vec::with_capacity(n_p),
        variance: Vec::with_capacity(n_p),
        interval95: Vec::with_capacity(n_p),
        zone_ids: Vec::with_capacity(n_p),
        nonzeros: Vec::with_capacity(n_p),
        zero_fraction: Vec::with_capacity(n_p),
        interp_metric: Vec::with_capacity(n_p),
        iterations: Vec::with_capacity(n_p),
        converged: Vec::with_capacity(n_p),
        wall_time: Duration::ZERO,
    };
    let mut z = vec![0.0; layout.dim()];
    for l in 0..n_p {
        // Index of time t + l in the local buffers.
        let k = needed - 1 + l;
        for lag in 0..=layout.n_a {
            z[lag] = ys[k - lag];
        }
        for lag in 0..=layout.n_b {
            let off = layout.input_offset(lag);
            z[off..off + layout.m].copy_from_slice(&us[k - lag]);
        }
        let step = predict_step(&z, library, method)?;
        ys.push(step.y_std);

        let y_hat = scaler.inverse_y(step.y_std);
        let variance = step.variance_std * std_y * std_y;
        out.y_hat.push(y_hat);
        out.variance.push(variance);
        out.interval95.push(interval95(y_hat, variance));
        out.zone_ids.push(step.zone);
        out.nonzeros.push(step.nonzeros);
        out.zero_fraction.push(step.zero_fraction());
        out.interp_metric.push(step.interp_metric);
        out.iterations.push(step.iterations);
        out.converged.push(step.converged);
    }
    out.wall_time = start.elapsed();
    Ok(out)
}

/// Trapezoidal relative error over the horizon. `y_true` holds
/// `y(t) … y(t + n_p)`; the left endpoint `ŷ(t|t) = y(t)` has zero error.
pub fn trajectory_error(y_true: &[f64], y_hat: &[f64]) -> Result<f64> {
    let n_p = y_hat.len();
    if n_p == 0 || y_true.len() != n_p + 1 {
        return Err(Error::DimensionMismatch {
            expected: n_p + 1,
            got: y_true.len(),
        });
    }
    if let Some(step) = y_true.iter().position(|v| v.abs() < 1e-12) {
        return Err(Error::ZeroTruth { step });
    }
    let rel = |l: usize| {
        if l == 0 {
            0.0
        } else {
            (y_true[l] - y_hat[l - 1]).abs() / y_true[l].abs()
        }
    };
    let total: f64 = (1..=n_p).map(|l| rel(l) + rel(l - 1)).sum();
    // T_s / (2T) with T = n_p T_s.
    Ok(total / (2.0 * n_p as f64))
}
