//! Wall-clock comparison of K-ADMM against the per-step dense reference,
//! plus sign-pattern enumeration on tiny subsampled zones.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::data::TimeSeriesLog;
use crate::error::{Error, Result};
use crate::forecast::{select_cluster, Method};
use crate::kadmm::{kadmm_solve, spectral_decompose};
use crate::kriging::{adaptive_penalties, constraint_matrix, constraint_rhs, factor_zone_kkt, solve_uk};
use crate::library::ModelLibrary;
use crate::linalg::median;
use crate::oracle::enumerate_solve;
use crate::preprocess::sq_dist;
use crate::validation::forecast_at;
use crate::variogram::build_matrices;

#[derive(Clone, Debug, Serialize)]
pub struct TimingRow {
    pub method: String,
    pub runs: usize,
    pub max_ms: f64,
    pub median_ms: f64,
    pub min_ms: f64,
}

impl TimingRow {
    pub fn from_samples(method: impl Into<String>, ms: &[f64]) -> Self {
        let mut v = ms.to_vec();
        Self {
            method: method.into(),
            runs: v.len(),
            max_ms: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min_ms: v.iter().copied().fold(f64::INFINITY, f64::min),
            median_ms: median(&mut v),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub rows: Vec<TimingRow>,
}

impl BenchReport {
    pub fn row(&self, method: &str) -> Option<&TimingRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Ratio of median times, `slow / fast`.
    pub fn speedup(&self, slow: &str, fast: &str) -> Option<f64> {
        Some(self.row(slow)?.median_ms / self.row(fast)?.median_ms)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["method", "runs", "max_ms", "median_ms", "min_ms"])?;
        for r in &self.rows {
            w.write_record(&[
                r.method.clone(),
                r.runs.to_string(),
                format!("{:.4}", r.max_ms),
                format!("{:.4}", r.median_ms),
                format!("{:.4}", r.min_ms),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(pool.install(f))
}

/// Time full trajectories from each origin, `n_rep` times per method.
pub fn bench_trajectories(
    log: &TimeSeriesLog,
    library: &ModelLibrary,
    n_p: usize,
    starts: &[usize],
    methods: &[Method],
    n_rep: usize,
) -> Result<BenchReport> {
    single_threaded(|| {
        let mut rows = Vec::new();
        for &method in methods {
            let mut ms = Vec::with_capacity(starts.len() * n_rep);
            for _ in 0..n_rep {
                for &t in starts {
                    let (traj, _) = forecast_at(log, t, n_p, library, method)?;
                    ms.push(traj.wall_time.as_secs_f64() * 1e3);
                }
            }
            rows.push(TimingRow::from_samples(method.name(), &ms));
        }
        Ok(BenchReport { rows })
    })?
}

/// Restrict the zone active at each origin to its leading whitened
/// coordinates and the `n_data` training points nearest the query, then time
/// enumeration and K-ADMM on the resulting regularized problem with adaptive
/// penalties. At most `n_data − 3` coordinates are kept so the unbiasedness
/// constraints leave a feasible set with some freedom.
pub fn bench_tiny(log: &TimeSeriesLog, library: &ModelLibrary, starts: &[usize], n_data: usize) -> Result<BenchReport> {
    let layout = library.layout();
    let std_log = library.scaler.transform(log)?;
    let p = &library.params;
    single_threaded(|| {
        let (mut oracle_ms, mut kadmm_ms) = (Vec::new(), Vec::new());
        for &t in starts {
            if t < layout.max_lag() || t >= log.len() {
                return Err(Error::InvalidArgument(format!("origin {t} out of range")));
            }
            let z = layout.regressor_at(&std_log, t);
            let zone = &library.zones[select_cluster(&z, library)];
            let keep = n_data.saturating_sub(3).clamp(1, z.len());
            let q = zone.whitening.apply(&z)[..keep].to_vec();
            let reduced: Vec<&[f64]> = zone.coords_iso.iter().map(|c| &c[..keep]).collect();
            let mut order: Vec<usize> = (0..zone.size()).collect();
            order.sort_by(|&a, &b| sq_dist(reduced[a], &q).total_cmp(&sq_dist(reduced[b], &q)));
            let coords: Vec<Vec<f64>> = order[..n_data.min(order.len())].iter().map(|&i| reduced[i].to_vec()).collect();
            let mats = build_matrices(&zone.record.variogram, &coords, &q);
            let r = constraint_matrix(&coords);
            let r0 = constraint_rhs(&q);
            let prior = solve_uk(&factor_zone_kkt(&mats.gamma_d, &r)?, &mats.gamma_0, &r0)?;
            let beta = adaptive_penalties(&prior.lambda, p.epsilon, p.beta_cap)?;

            let start = Instant::now();
            enumerate_solve(&mats.gamma_d, &mats.gamma_0, &r, &r0, &beta.beta)?;
            oracle_ms.push(start.elapsed().as_secs_f64() * 1e3);

            let start = Instant::now();
            let form = spectral_decompose(&mats.gamma_d, &r, p.rho)?;
            kadmm_solve(&form, &mats.gamma_0, &r0, &beta, &p.admm())?;
            kadmm_ms.push(start.elapsed().as_secs_f64() * 1e3);
        }
        Ok(BenchReport {
            rows: vec![
                TimingRow::from_samples(format!("enumeration_n{n_data}"), &oracle_ms),
                TimingRow::from_samples(format!("kadmm_n{n_data}"), &kadmm_ms),
            ],
        })
    })?
}
