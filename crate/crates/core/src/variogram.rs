//! Empirical semivariogram, exponential model fitting and the semivariance
//! matrices used by the kriging system.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::sq_dist;

/// Binned semivariance estimates. Bins without pairs have a zero count and a
/// zero estimate; their lag is the bin midpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalVariogram {
    pub lag_centers: Vec<f64>,
    pub gamma_hat: Vec<f64>,
    pub pair_counts: Vec<u64>,
}

impl EmpiricalVariogram {
    pub fn is_empty_bin(&self, k: usize) -> bool {
        self.pair_counts[k] == 0
    }

    pub fn nonempty_bins(&self) -> usize {
        self.pair_counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn total_pairs(&self) -> u64 {
        self.pair_counts.iter().sum()
    }
}

/// Semivariogram estimate over one or more groups of points; pairs are only
/// formed within a group.
pub fn empirical_semivariogram_pooled(groups: &[(&[Vec<f64>], &[f64])], n_lags: usize) -> Result<EmpiricalVariogram> {
    if n_lags == 0 {
        return Err(Error::InvalidArgument("n_lags must be positive".into()));
    }
    let mut pairs = Vec::new();
    for (coords, residuals) in groups {
        if coords.len() != residuals.len() {
            return Err(Error::DimensionMismatch {
                expected: coords.len(),
                got: residuals.len(),
            });
        }
        for i in 0..coords.len() {
            for j in i + 1..coords.len() {
                let d = sq_dist(&coords[i], &coords[j]).sqrt();
                let g = 0.5 * (residuals[i] - residuals[j]).powi(2);
                pairs.push((d, g));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("semivariogram needs at least two points".into()));
    }
    let max_d = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    let width = if max_d > 0.0 { max_d / n_lags as f64 } else { 1.0 };
    let mut sum_g = vec![0.0; n_lags];
    let mut sum_d = vec![0.0; n_lags];
    let mut counts = vec![0u64; n_lags];
    for (d, g) in pairs {
        let k = ((d / width) as usize).min(n_lags - 1);
        sum_g[k] += g;
        sum_d[k] += d;
        counts[k] += 1;
    }
    let mut lag_centers = Vec::with_capacity(n_lags);
    let mut gamma_hat = Vec::with_capacity(n_lags);
    for k in 0..n_lags {
        if counts[k] > 0 {
            lag_centers.push(sum_d[k] / counts[k] as f64);
            gamma_hat.push(sum_g[k] / counts[k] as f64);
        } else {
            lag_centers.push((k as f64 + 0.5) * width);
            gamma_hat.push(0.0);
        }
    }
    Ok(EmpiricalVariogram {
        lag_centers,
        gamma_hat,
        pair_counts: counts,
    })
}

pub fn empirical_semivariogram(coords: &[Vec<f64>], residuals: &[f64], n_lags: usize) -> Result<EmpiricalVariogram> {
    empirical_semivariogram_pooled(&[(coords, residuals)], n_lags)
}

/// Exponential semivariogram with sill `theta`, range `phi` and nugget
/// `varpi`:
///
/// `γ(h) = (θ − ϖ)(1 − exp(−3h/φ)) + ϖ` for `h > 0`, and `γ(0) = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariogramModel {
    pub theta: f64,
    pub phi: f64,
    pub varpi: f64,
}

impl VariogramModel {
    pub fn new(theta: f64, phi: f64, varpi: f64) -> Result<Self> {
        if !(theta >= varpi && varpi >= 0.0 && phi > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "variogram needs theta >= varpi >= 0 and phi > 0 (got {theta}, {phi}, {varpi})"
            )));
        }
        Ok(Self { theta, phi, varpi })
    }

    pub fn eval(&self, h: f64) -> f64 {
        eval_model(self, h)
    }
}

pub fn eval_model(model: &VariogramModel, h: f64) -> f64 {
    if h == 0.0 {
        return 0.0;
    }
    (model.theta - model.varpi) * (1.0 - (-3.0 * h / model.phi).exp()) + model.varpi
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariogramFit {
    pub model: VariogramModel,
    /// Pair-weighted squared error of the fit over nonempty bins.
    pub loss: f64,
    /// Set when the estimates are flat and the range is arbitrary.
    pub degenerate: bool,
}

struct Bins {
    h: Vec<f64>,
    g: Vec<f64>,
    w: Vec<f64>,
}

impl Bins {
    /// Best `(θ, ϖ, loss)` for a fixed range under `θ ≥ ϖ ≥ 0`.
    fn profile(&self, phi: f64) -> (f64, f64, f64) {
        let (mut sff, mut sfe, mut see, mut sfg, mut seg, mut sw, mut swg) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let mut basis = Vec::with_capacity(self.h.len());
        for ((&h, &g), &w) in self.h.iter().zip(&self.g).zip(&self.w) {
            let e = (-3.0 * h / phi).exp();
            let f = 1.0 - e;
            basis.push((f, e));
            sff += w * f * f;
            sfe += w * f * e;
            see += w * e * e;
            sfg += w * f * g;
            seg += w * e * g;
            sw += w;
            swg += w * g;
        }
        let loss = |theta: f64, varpi: f64| -> f64 {
            basis
                .iter()
                .zip(&self.g)
                .zip(&self.w)
                .map(|(((f, e), g), w)| w * (g - theta * f - varpi * e).powi(2))
                .sum()
        };
        let mut candidates = Vec::with_capacity(4);
        let det = sff * see - sfe * sfe;
        if det.abs() > 1e-300 {
            let theta = (sfg * see - seg * sfe) / det;
            let varpi = (seg * sff - sfg * sfe) / det;
            if theta >= varpi && varpi >= 0.0 {
                candidates.push((theta, varpi));
            }
        }
        if sff > 0.0 {
            candidates.push(((sfg / sff).max(0.0), 0.0));
        }
        let flat = (swg / sw).max(0.0);
        candidates.push((flat, flat));
        candidates
            .into_iter()
            .map(|(t, v)| (t, v, loss(t, v)))
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .unwrap()
    }
}

/// Pair-count weighted least-squares fit of the exponential model.
///
/// The range is searched on a log grid and refined by golden section; sill
/// and nugget are solved in closed form for each candidate range.
pub fn fit_exponential(emp: &EmpiricalVariogram) -> Result<VariogramFit> {
    let mut bins = Bins {
        h: Vec::new(),
        g: Vec::new(),
        w: Vec::new(),
    };
    for k in 0..emp.lag_centers.len() {
        if emp.pair_counts[k] > 0 {
            bins.h.push(emp.lag_centers[k]);
            bins.g.push(emp.gamma_hat[k]);
            bins.w.push(emp.pair_counts[k] as f64);
        }
    }
    if bins.h.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "variogram fit needs at least 3 nonempty bins, got {}",
            bins.h.len()
        )));
    }
    let h_max = bins.h.iter().copied().fold(0.0, f64::max);
    let h_min = bins.h.iter().copied().filter(|&h| h > 0.0).fold(f64::INFINITY, f64::min);

    let g0 = bins.g[0];
    if bins.g.iter().all(|&g| (g - g0).abs() <= 1e-14 * g0.abs().max(f64::MIN_POSITIVE)) {
        log::warn!("flat empirical semivariogram; range is arbitrary");
        let model = VariogramModel {
            theta: g0,
            phi: h_max.max(f64::MIN_POSITIVE),
            varpi: g0,
        };
        return Ok(VariogramFit {
            model,
            loss: 0.0,
            degenerate: true,
        });
    }

    let lo = (0.1 * h_min.min(h_max)).max(1e-12).ln();
    let hi = (30.0 * h_max).max(1e-9).ln();
    let eval = |log_phi: f64| bins.profile(log_phi.exp()).2;
    const GRID: usize = 120;
    let grid: Vec<f64> = (0..GRID).map(|i| lo + (hi - lo) * i as f64 / (GRID - 1) as f64).collect();
    let losses: Vec<f64> = grid.iter().map(|&x| eval(x)).collect();
    let best = (0..GRID).min_by(|&a, &b| losses[a].total_cmp(&losses[b])).unwrap();
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(GRID - 1)]);

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d);
        }
    }
    let mut log_phi = 0.5 * (a + b);
    if losses[best] < eval(log_phi) {
        log_phi = grid[best];
    }
    let phi = log_phi.exp();
    let (theta, varpi, loss) = bins.profile(phi);
    Ok(VariogramFit {
        model: VariogramModel { theta, phi, varpi },
        loss,
        degenerate: false,
    })
}

/// Semivariance matrix `(Γ_D)_ij = γ(‖z_i − z_j‖)` with a zero diagonal.
pub fn gamma_matrix(model: &VariogramModel, coords: &[Vec<f64>]) -> DMatrix<f64> {
    let n = coords.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = eval_model(model, sq_dist(&coords[i], &coords[j]).sqrt());
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Semivariances `(Γ_0)_i = γ(‖z_0 − z_i‖)` between a query and the data.
pub fn gamma_vector(model: &VariogramModel, coords: &[Vec<f64>], query: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        coords.len(),
        coords.iter().map(|c| eval_model(model, sq_dist(c, query).sqrt())),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct GammaMatrices {
    pub gamma_d: DMatrix<f64>,
    pub gamma_0: DVector<f64>,
}

pub fn build_matrices(model: &VariogramModel, coords: &[Vec<f64>], query: &[f64]) -> GammaMatrices {
    GammaMatrices {
        gamma_d: gamma_matrix(model, coords),
        gamma_0: gamma_vector(model, coords, query),
    }
}
