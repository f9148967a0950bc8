//! Standard universal kriging through the saddle-point system
//!
//! ```text
//! [ −Γ_D  Rᵀ ] [ λ ]   [ −Γ_0 ]
//! [  R    0  ] [ ϱ ] = [  r_0 ]
//! ```
//!
//! plus adaptive-lasso penalties and the prediction-error variance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseLu;

/// Two-sided 95% Gaussian quantile.
pub const Z_95: f64 = 1.96;

/// Unbiasedness constraint matrix with columns `[z_iᵀ, 1]ᵀ`.
pub fn constraint_matrix(coords: &[Vec<f64>]) -> DMatrix<f64> {
    let n = coords.len();
    let dim = coords.first().map_or(0, Vec::len);
    DMatrix::from_fn(dim + 1, n, |r, c| if r == dim { 1.0 } else { coords[c][r] })
}

/// Right-hand side `[z_0ᵀ, 1]ᵀ` for a query.
pub fn constraint_rhs(query: &[f64]) -> DVector<f64> {
    let mut r0 = DVector::zeros(query.len() + 1);
    r0.rows_mut(0, query.len()).copy_from_slice(query);
    r0[query.len()] = 1.0;
    r0
}

/// Cached LU factorization of one zone's saddle-point matrix.
#[derive(Clone, Debug)]
pub struct UkFactor {
    lu: DenseLu,
    kkt: DMatrix<f64>,
    n_data: usize,
}

impl UkFactor {
    pub fn n_data(&self) -> usize {
        self.n_data
    }

    pub fn n_constraints(&self) -> usize {
        self.kkt.nrows() - self.n_data
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.kkt
    }

    pub fn factorization_residual(&self) -> f64 {
        self.lu.factorization_residual(&self.kkt)
    }
}

pub fn saddle_point_matrix(gamma_d: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = gamma_d.nrows();
    if gamma_d.ncols() != n || r.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: r.ncols(),
        });
    }
    let p = r.nrows();
    let mut kkt = DMatrix::zeros(n + p, n + p);
    kkt.view_mut((0, 0), (n, n)).copy_from(&(-gamma_d));
    kkt.view_mut((0, n), (n, p)).copy_from(&r.transpose());
    kkt.view_mut((n, 0), (p, n)).copy_from(r);
    Ok(kkt)
}

pub fn factor_zone_kkt(gamma_d: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<UkFactor> {
    let kkt = saddle_point_matrix(gamma_d, r)?;
    let lu = DenseLu::new(kkt.clone())?;
    Ok(UkFactor {
        lu,
        kkt,
        n_data: gamma_d.nrows(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct UkSolution {
    pub lambda: DVector<f64>,
    /// Multipliers of the unbiasedness constraints.
    pub rho_dual: DVector<f64>,
    /// `‖K x − b‖∞` of the saddle-point solve.
    pub kkt_residual: f64,
}

pub fn solve_uk(factor: &UkFactor, gamma_0: &DVector<f64>, r0: &DVector<f64>) -> Result<UkSolution> {
    let n = factor.n_data;
    if gamma_0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: gamma_0.len(),
        });
    }
    if r0.len() != factor.n_constraints() {
        return Err(Error::DimensionMismatch {
            expected: factor.n_constraints(),
            got: r0.len(),
        });
    }
    let mut rhs = DVector::zeros(factor.kkt.nrows());
    rhs.rows_mut(0, n).copy_from(&(-gamma_0));
    rhs.rows_mut(n, r0.len()).copy_from(r0);
    let x = factor.lu.solve(&rhs)?;
    let kkt_residual = (&factor.kkt * &x - &rhs).amax();
    Ok(UkSolution {
        lambda: x.rows(0, n).into_owned(),
        rho_dual: x.rows(n, r0.len()).into_owned(),
        kkt_residual,
    })
}

/// Floor on `|λ_UK,i|` that defines the default penalty cap `ε / floor`.
pub const LAMBDA_FLOOR: f64 = 1e-8;

pub fn default_beta_cap(epsilon: f64) -> f64 {
    epsilon / LAMBDA_FLOOR
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyVector {
    pub beta: Vec<f64>,
    pub epsilon: f64,
    pub beta_cap: f64,
}

impl PenaltyVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            beta: vec![0.0; n],
            epsilon: 0.0,
            beta_cap: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }
}

/// Adaptive-lasso weights `β_i = min(ε / |λ_UK,i|, cap)`.
pub fn adaptive_penalties(lambda_uk: &DVector<f64>, epsilon: f64, beta_cap: f64) -> Result<PenaltyVector> {
    if !(epsilon >= 0.0) || !(beta_cap >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "penalty scale and cap must be nonnegative (got {epsilon}, {beta_cap})"
        )));
    }
    let beta = lambda_uk
        .iter()
        .map(|&l| {
            if epsilon == 0.0 {
                0.0
            } else if l == 0.0 {
                beta_cap
            } else {
                (epsilon / l.abs()).min(beta_cap)
            }
        })
        .collect();
    Ok(PenaltyVector {
        beta,
        epsilon,
        beta_cap,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Variance {
    pub value: f64,
    /// Raw value before clamping at zero.
    pub raw: f64,
    /// Raw value was below −1e-8.
    pub clamped: bool,
}

/// Prediction-error variance `2 Γ_0ᵀλ − λᵀ Γ_D λ`, clamped at zero.
pub fn prediction_variance(lambda: &DVector<f64>, gamma_d: &DMatrix<f64>, gamma_0: &DVector<f64>) -> Result<Variance> {
    if lambda.len() != gamma_d.nrows() || lambda.len() != gamma_0.len() {
        return Err(Error::DimensionMismatch {
            expected: gamma_d.nrows(),
            got: lambda.len(),
        });
    }
    let raw = 2.0 * gamma_0.dot(lambda) - lambda.dot(&(gamma_d * lambda));
    let clamped = raw < -1e-8;
    if clamped {
        log::warn!("negative prediction variance {raw:.3e} clamped to zero");
    }
    Ok(Variance {
        value: raw.max(0.0),
        raw,
        clamped,
    })
}

/// Nominal 95% interval around a prediction.
pub fn interval95(y_hat: f64, variance: f64) -> (f64, f64) {
    let half = Z_95 * variance.max(0.0).sqrt();
    (y_hat - half, y_hat + half)
}
