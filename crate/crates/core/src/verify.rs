//! Self-checks of the solver against independent references: a grid search
//! for the proximal operator, sign-pattern enumeration for the regularized
//! problem, and the universal kriging system for zero penalties.

use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::kadmm::{kadmm_solve, prox_psi, spectral_decompose, AdmmSettings};
use crate::kriging::{constraint_matrix, constraint_rhs, factor_zone_kkt, solve_uk, PenaltyVector};
use crate::oracle::{enumerate_solve, objective};
use crate::variogram::{build_matrices, GammaMatrices, VariogramModel};

pub const PROX_TOL: f64 = 1e-7;
pub const OBJECTIVE_TOL: f64 = 1e-7;
pub const WEIGHT_TOL: f64 = 1e-5;
pub const REDUCTION_TOL: f64 = 1e-6;
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Settings tight enough that solver error is far below the check tolerances.
pub fn tight_settings() -> AdmmSettings {
    AdmmSettings {
        eps_pri: 1e-11,
        eps_dual: 1e-11,
        max_iter: 200_000,
    }
}

fn prox_objective(w: f64, beta: f64, c: f64, x: f64) -> f64 {
    w * x * x + beta * x.abs() - c * x
}

/// Lowest objective over the grid `lo + i·step`, `i = 0..=n`. The objective
/// is convex, so the first index with a nonnegative forward difference is
/// the grid minimizer.
pub fn grid_minimum(w: f64, beta: f64, c: f64, lo: f64, step: f64, n: usize) -> f64 {
    let f = |i: usize| prox_objective(w, beta, c, lo + i as f64 * step);
    let (mut a, mut b) = (0usize, n);
    while a < b {
        let mid = (a + b) / 2;
        if f(mid + 1) >= f(mid) {
            b = mid;
        } else {
            a = mid + 1;
        }
    }
    f(a)
}

#[derive(Clone, Debug, Serialize)]
pub struct ProxReport {
    pub samples: usize,
    /// Largest `obj(prox) − best grid objective`; negative when the closed
    /// form always wins.
    pub max_excess: f64,
}

/// Compare the closed-form prox with a grid search over `[−10, 10]` at step
/// `1e-4` on random `(w, β, c)`.
pub fn prox_against_grid(samples: usize, seed: u64) -> ProxReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_excess = f64::NEG_INFINITY;
    for _ in 0..samples {
        let w = 10.0 - rng.random_range(0.0..10.0);
        let beta = rng.random_range(0.0..=10.0);
        let c = rng.random_range(-10.0..=10.0);
        let x = prox_psi(w, beta, c);
        let grid = grid_minimum(w, beta, c, -10.0, 1e-4, 200_000);
        max_excess = max_excess.max(prox_objective(w, beta, c, x) - grid);
    }
    ProxReport { samples, max_excess }
}

/// A small regularized kriging problem with random geometry, variogram and
/// penalties.
#[derive(Clone, Debug)]
pub struct TinyInstance {
    pub coords: Vec<Vec<f64>>,
    pub query: Vec<f64>,
    pub model: VariogramModel,
    pub mats: GammaMatrices,
    pub r0: DVector<f64>,
    pub beta: Vec<f64>,
}

pub fn random_model<R: Rng>(rng: &mut R) -> VariogramModel {
    let theta = rng.random_range(0.5..2.0);
    let phi = rng.random_range(0.3..3.0);
    let varpi = rng.random_range(0.0..0.3) * theta;
    VariogramModel::new(theta, phi, varpi).expect("sampled parameters are admissible")
}

/// `n_data` points in the unit cube of dimension `dim`, plus a query.
pub fn random_instance<R: Rng>(rng: &mut R, n_data: usize, dim: usize, beta_max: f64) -> TinyInstance {
    let point = |rng: &mut R| (0..dim).map(|_| rng.random_range(0.0..1.0)).collect::<Vec<f64>>();
    let coords: Vec<Vec<f64>> = (0..n_data).map(|_| point(rng)).collect();
    let query = point(rng);
    let model = random_model(rng);
    let mats = build_matrices(&model, &coords, &query);
    let r0 = constraint_rhs(&query);
    let beta = (0..n_data).map(|_| rng.random_range(0.0..=beta_max)).collect();
    TinyInstance { coords, query, model, mats, r0, beta }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub instances: usize,
    pub max_objective_gap: f64,
    pub max_weight_gap: f64,
    /// Instances where either solver errored or K-ADMM did not converge.
    pub failures: usize,
}

/// K-ADMM against sign-pattern enumeration on random instances with
/// `N ∈ [3, 8]` and `n ∈ [1, 3]`, keeping `n + 1 < N` so the constraints
/// leave a nontrivial feasible set.
pub fn solver_vs_oracle(instances: usize, seed: u64, rho: f64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport {
        instances,
        max_objective_gap: 0.0,
        max_weight_gap: 0.0,
        failures: 0,
    };
    for _ in 0..instances {
        let n_data = rng.random_range(3..=8);
        let dim = rng.random_range(1..=3.min(n_data - 2));
        let inst = random_instance(&mut rng, n_data, dim, 0.1);
        match compare_with_oracle(&inst, rho) {
            Ok((obj_gap, weight_gap)) => {
                report.max_objective_gap = report.max_objective_gap.max(obj_gap);
                if let Some(g) = weight_gap {
                    report.max_weight_gap = report.max_weight_gap.max(g);
                }
            }
            Err(e) => {
                log::warn!("oracle comparison failed: {e}");
                report.failures += 1;
            }
        }
    }
    report
}

/// Objective gap and, for a unique optimum, the weight gap.
pub fn compare_with_oracle(inst: &TinyInstance, rho: f64) -> Result<(f64, Option<f64>)> {
    let r = constraint_matrix(&inst.coords);
    let GammaMatrices { gamma_d, gamma_0 } = &inst.mats;
    let oracle = enumerate_solve(gamma_d, gamma_0, &r, &inst.r0, &inst.beta)?;
    let form = spectral_decompose(gamma_d, &r, rho)?;
    let penalties = PenaltyVector {
        beta: inst.beta.clone(),
        epsilon: 0.0,
        beta_cap: 0.0,
    };
    let res = kadmm_solve(&form, gamma_0, &inst.r0, &penalties, &tight_settings())?;
    if !res.converged {
        return Err(crate::Error::SolverDidNotConverge { iterations: res.iterations });
    }
    let gap = (objective(&res.lambda, gamma_d, gamma_0, &inst.beta) - oracle.objective).abs();
    let weights = oracle.unique.then(|| (&res.lambda - &oracle.lambda).amax());
    Ok((gap, weights))
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionReport {
    pub zones: usize,
    pub max_weight_gap: f64,
    pub max_feasibility_kadmm: f64,
    pub max_feasibility_uk: f64,
    pub failures: usize,
}

/// K-ADMM with zero penalties against the universal kriging solve on random
/// zones of `size` points in dimension `dim`.
pub fn beta_zero_reduction(zones: usize, size: usize, dim: usize, seed: u64, rho: f64) -> ReductionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ReductionReport {
        zones,
        max_weight_gap: 0.0,
        max_feasibility_kadmm: 0.0,
        max_feasibility_uk: 0.0,
        failures: 0,
    };
    for _ in 0..zones {
        let inst = random_instance(&mut rng, size, dim, 0.0);
        let r = constraint_matrix(&inst.coords);
        let GammaMatrices { gamma_d, gamma_0 } = &inst.mats;
        let run = || -> Result<(f64, f64, f64)> {
            let uk = solve_uk(&factor_zone_kkt(gamma_d, &r)?, gamma_0, &inst.r0)?;
            let form = spectral_decompose(gamma_d, &r, rho)?;
            let res = kadmm_solve(&form, gamma_0, &inst.r0, &PenaltyVector::zeros(size), &tight_settings())?;
            Ok((
                (&res.lambda - &uk.lambda).amax(),
                (&r * &res.lambda - &inst.r0).amax(),
                (&r * &uk.lambda - &inst.r0).amax(),
            ))
        };
        match run() {
            Ok((gap, fk, fu)) => {
                report.max_weight_gap = report.max_weight_gap.max(gap);
                report.max_feasibility_kadmm = report.max_feasibility_kadmm.max(fk);
                report.max_feasibility_uk = report.max_feasibility_uk.max(fu);
            }
            Err(e) => {
                log::warn!("zero-penalty comparison failed: {e}");
                report.failures += 1;
            }
        }
    }
    report
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub metric: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub seconds: f64,
}

/// The full suite behind the `verify` subcommand.
pub fn run_suite(seed: u64, rho: f64) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let t = Instant::now();
    let prox = prox_against_grid(100_000, seed);
    out.push(CheckOutcome {
        name: "prox_vs_grid",
        passed: prox.max_excess <= PROX_TOL,
        metric: prox.max_excess,
        tolerance: PROX_TOL,
        cases: prox.samples,
        seconds: t.elapsed().as_secs_f64(),
    });

    let t = Instant::now();
    let oracle = solver_vs_oracle(100, seed.wrapping_add(1), rho);
    let secs = t.elapsed().as_secs_f64();
    out.push(CheckOutcome {
        name: "kadmm_vs_enumeration_objective",
        passed: oracle.failures == 0 && oracle.max_objective_gap <= OBJECTIVE_TOL,
        metric: oracle.max_objective_gap,
        tolerance: OBJECTIVE_TOL,
        cases: oracle.instances,
        seconds: secs,
    });
    out.push(CheckOutcome {
        name: "kadmm_vs_enumeration_weights",
        passed: oracle.failures == 0 && oracle.max_weight_gap <= WEIGHT_TOL,
        metric: oracle.max_weight_gap,
        tolerance: WEIGHT_TOL,
        cases: oracle.instances,
        seconds: secs,
    });

    let t = Instant::now();
    let red = beta_zero_reduction(10, 250, 10, seed.wrapping_add(2), rho);
    let secs = t.elapsed().as_secs_f64();
    out.push(CheckOutcome {
        name: "zero_penalty_matches_uk",
        passed: red.failures == 0 && red.max_weight_gap <= REDUCTION_TOL,
        metric: red.max_weight_gap,
        tolerance: REDUCTION_TOL,
        cases: red.zones,
        seconds: secs,
    });
    out.push(CheckOutcome {
        name: "unbiasedness_constraints",
        passed: red.failures == 0 && red.max_feasibility_kadmm.max(red.max_feasibility_uk) <= FEASIBILITY_TOL,
        metric: red.max_feasibility_kadmm.max(red.max_feasibility_uk),
        tolerance: FEASIBILITY_TOL,
        cases: red.zones,
        seconds: secs,
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_minimum_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (w, beta, c) = (rng.random_range(0.1..5.0), rng.random_range(0.0..3.0), rng.random_range(-4.0..4.0));
            let scan = (0..=2000)
                .map(|i| prox_objective(w, beta, c, -1.0 + i as f64 * 1e-3))
                .fold(f64::INFINITY, f64::min);
            assert_eq!(grid_minimum(w, beta, c, -1.0, 1e-3, 2000), scan);
        }
    }

    #[test]
    fn small_suite_passes() {
        assert!(prox_against_grid(2000, 1).max_excess <= PROX_TOL);
        let o = solver_vs_oracle(10, 2, 0.5);
        assert_eq!(o.failures, 0);
        assert!(o.max_objective_gap <= OBJECTIVE_TOL, "{o:?}");
        let r = beta_zero_reduction(2, 60, 3, 3, 0.5);
        assert_eq!(r.failures, 0);
        assert!(r.max_weight_gap <= REDUCTION_TOL, "{r:?}");
    }
}
