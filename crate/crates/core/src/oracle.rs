//! Brute-force reference solver and first-order optimality certificate for
//! the regularized kriging problem
//!
//! ```text
//! min  −λᵀΓ_Dλ + 2Γ_0ᵀλ + Σ β_i |λ_i|   s.t.  Rλ = r_0.
//! ```
//!
//! Both are independent of the spectral machinery in [`crate::kadmm`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::sym_eigen;

/// Largest instance [`enumerate_solve`] accepts.
pub const MAX_ENUMERATION_SIZE: usize = 10;

/// Regularized objective value.
pub fn objective(lambda: &DVector<f64>, gamma_d: &DMatrix<f64>, gamma_0: &DVector<f64>, beta: &[f64]) -> f64 {
    let l1: f64 = lambda.iter().zip(beta).map(|(l, b)| b * l.abs()).sum();
    -lambda.dot(&(gamma_d * lambda)) + 2.0 * gamma_0.dot(lambda) + l1
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Certificate {
    /// `max |g_i + β_i sign(λ_i) + (Rᵀμ)_i|` over active coordinates.
    pub stationarity_residual: f64,
    /// `‖Rλ − r_0‖∞`.
    pub feasibility_residual: f64,
    /// Inactive coordinates with `|g_i + (Rᵀμ)_i| > β_i + tol`.
    pub subgradient_violations: usize,
    /// Largest `|g_i + (Rᵀμ)_i| − β_i` over inactive coordinates.
    pub max_subgradient_excess: f64,
    pub tol: f64,
}

impl Certificate {
    pub fn is_valid(&self) -> bool {
        self.stationarity_residual <= self.tol && self.feasibility_residual <= self.tol && self.subgradient_violations == 0
    }
}

/// Check the first-order conditions at `lambda`. Coordinates with
/// `|λ_i| <= tol` are treated as inactive.
pub fn certify(
    lambda: &DVector<f64>,
    gamma_d: &DMatrix<f64>,
    gamma_0: &DVector<f64>,
    r: &DMatrix<f64>,
    r0: &DVector<f64>,
    beta: &[f64],
    tol: f64,
) -> Certificate {
    let n = lambda.len();
    let g = gamma_d * lambda * -2.0 + gamma_0 * 2.0;
    let active = |i: usize| lambda[i].abs() > tol;
    let support: Vec<usize> = (0..n).filter(|&i| active(i)).collect();

    let p = r.nrows();
    let mut a = DMatrix::zeros(support.len(), p);
    let mut b = DVector::zeros(support.len());
    for (row, &i) in support.iter().enumerate() {
        a.row_mut(row).copy_from(&r.column(i).transpose());
        b[row] = -(g[i] + beta[i] * lambda[i].signum());
    }
    let mu = if support.is_empty() {
        DVector::zeros(p)
    } else {
        a.clone()
            .svd(true, true)
            .solve(&b, 1e-12 * a.amax().max(1.0))
            .unwrap_or_else(|_| DVector::zeros(p))
    };
    let rt_mu = r.transpose() * &mu;

    let stationarity_residual = support
        .iter()
        .map(|&i| (g[i] + beta[i] * lambda[i].signum() + rt_mu[i]).abs())
        .fold(0.0, f64::max);
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    for i in (0..n).filter(|&i| !active(i)) {
        let excess = (g[i] + rt_mu[i]).abs() - beta[i];
        max_excess = max_excess.max(excess);
        if excess > tol {
            violations += 1;
        }
    }
    Certificate {
        stationarity_residual,
        feasibility_residual: (r * lambda - r0).amax(),
        subgradient_violations: violations,
        max_subgradient_excess: if max_excess.is_finite() { max_excess } else { 0.0 },
        tol,
    }
}

#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub lambda: DVector<f64>,
    pub objective: f64,
    pub certificate: Certificate,
    /// Sign patterns whose face minimizer was sign-consistent and certified.
    pub candidates: usize,
    /// The smooth part is strictly convex on the feasible set, so the
    /// minimizer is unique.
    pub unique: bool,
}

/// Orthonormal basis of `null(a)` from the eigenvectors of `aᵀa`.
fn null_space(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eigen(&a.tr_mul(a))?;
    let cutoff = 1e-10 * vals.amax().max(1.0);
    let cols: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] <= cutoff).collect();
    Ok(DMatrix::from_fn(a.ncols(), cols.len(), |r, c| vecs[(r, cols[c])]))
}

/// Minimizer of the smooth objective with linear offset on the face where
/// only `free` coordinates may be nonzero. `None` if the face is infeasible
/// or the reduced Hessian is not positive definite.
fn face_minimizer(
    free: &[usize],
    signs: &[f64],
    gamma_d: &DMatrix<f64>,
    gamma_0: &DVector<f64>,
    r: &DMatrix<f64>,
    r0: &DVector<f64>,
    beta: &[f64],
) -> Result<Option<DVector<f64>>> {
    let m = free.len();
    let n = gamma_d.nrows();
    if m == 0 {
        return Ok(None);
    }
    let r_f = DMatrix::from_fn(r.nrows(), m, |i, j| r[(i, free[j])]);
    let svd = r_f.clone().svd(true, true);
    let particular = svd
        .solve(r0, 1e-12 * r_f.amax().max(1.0))
        .map_err(|_| Error::EigenFailure)?;
    if (&r_f * &particular - r0).amax() > 1e-9 {
        return Ok(None);
    }
    let h_full = DMatrix::from_fn(m, m, |i, j| -gamma_d[(free[i], free[j])]);
    let c = DVector::from_fn(m, |i, _| 2.0 * gamma_0[free[i]] + beta[free[i]] * signs[i]);
    let z = null_space(&r_f)?;
    let lam_f = if z.ncols() == 0 {
        particular
    } else {
        let h = z.transpose() * &h_full * &z;
        let grad0 = z.transpose() * (&h_full * &particular * 2.0 + &c);
        let Some(chol) = h.clone().cholesky() else {
            return Ok(None);
        };
        let theta = chol.solve(&(-grad0 * 0.5));
        particular + z * theta
    };
    let mut lambda = DVector::zeros(n);
    for (k, &i) in free.iter().enumerate() {
        lambda[i] = lam_f[k];
    }
    Ok(Some(lambda))
}

/// Exhaustive solve over all `3^N` sign patterns. Each pattern fixes zeros
/// and the sign of the ℓ1 term, leaving an equality-constrained quadratic
/// solved in the nullspace of the active constraint columns.
pub fn enumerate_solve(
    gamma_d: &DMatrix<f64>,
    gamma_0: &DVector<f64>,
    r: &DMatrix<f64>,
    r0: &DVector<f64>,
    beta: &[f64],
) -> Result<OracleSolution> {
    let n = gamma_d.nrows();
    if n > MAX_ENUMERATION_SIZE {
        return Err(Error::InvalidArgument(format!(
            "enumeration limited to N <= {MAX_ENUMERATION_SIZE}, got {n}"
        )));
    }
    for len in [gamma_0.len(), beta.len(), r.ncols()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    let scale = gamma_d.amax().max(gamma_0.amax()).max(1.0);
    let tol = 1e-8 * scale;

    let mut best: Option<(f64, DVector<f64>, Certificate)> = None;
    let mut candidates = 0;
    let patterns = 3usize.pow(n as u32);
    let mut free = Vec::with_capacity(n);
    let mut signs = Vec::with_capacity(n);
    for code in 0..patterns {
        free.clear();
        signs.clear();
        let mut c = code;
        for i in 0..n {
            match c % 3 {
                1 => {
                    free.push(i);
                    signs.push(1.0);
                }
                2 => {
                    free.push(i);
                    signs.push(-1.0);
                }
                _ => {}
            }
            c /= 3;
        }
        let Some(lambda) = face_minimizer(&free, &signs, gamma_d, gamma_0, r, r0, beta)? else {
            continue;
        };
        if free.iter().zip(&signs).any(|(&i, &s)| s * lambda[i] <= 0.0) {
            continue;
        }
        let cert = certify(&lambda, gamma_d, gamma_0, r, r0, beta, tol);
        if !cert.is_valid() {
            continue;
        }
        candidates += 1;
        let f = objective(&lambda, gamma_d, gamma_0, beta);
        if best.as_ref().is_none_or(|(bf, _, _)| f < *bf) {
            best = Some((f, lambda, cert));
        }
    }
    let (objective, lambda, certificate) = best.ok_or(Error::NoValidPattern)?;

    let z = null_space(r)?;
    let unique = z.ncols() == 0 || {
        let h = z.transpose() * (-gamma_d) * &z;
        sym_eigen(&h)?.0[0] > 1e-10 * scale
    };
    Ok(OracleSolution {
        lambda,
        objective,
        certificate,
        candidates,
        unique,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kriging::{constraint_matrix, constraint_rhs, factor_zone_kkt, solve_uk};
    use crate::variogram::{gamma_matrix, gamma_vector, VariogramModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Instance {
        gamma_d: DMatrix<f64>,
        gamma_0: DVector<f64>,
        r: DMatrix<f64>,
        r0: DVector<f64>,
    }

    fn instance(coords: &[Vec<f64>], query: &[f64], model: &VariogramModel) -> Instance {
        Instance {
            gamma_d: gamma_matrix(model, coords),
            gamma_0: gamma_vector(model, coords, query),
            r: constraint_matrix(coords),
            r0: constraint_rhs(query),
        }
    }

    fn random_instance(n: usize, dim: usize, seed: u64) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let query: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect();
        instance(&coords, &query, &VariogramModel::new(1.0, 1.5, 0.1).unwrap())
    }

    #[test]
    fn zero_penalty_matches_uk() {
        let inst = random_instance(4, 1, 7);
        let sol = enumerate_solve(&inst.gamma_d, &inst.gamma_0, &inst.r, &inst.r0, &[0.0; 4]).unwrap();
        let uk = solve_uk(&factor_zone_kkt(&inst.gamma_d, &inst.r).unwrap(), &inst.gamma_0, &inst.r0).unwrap();
        assert!((&sol.lambda - &uk.lambda).amax() < 1e-9);
        assert!(sol.unique);
    }

    #[test]
    fn large_penalty_selects_sparse_vertex() {
        // Intercept-only constraint (Σλ = 1) on two symmetric points.
        let m = VariogramModel::new(1.0, 2.0, 0.0).unwrap();
        let coords = vec![vec![-1.0], vec![1.0]];
        let gamma_d = gamma_matrix(&m, &coords);
        let gamma_0 = gamma_vector(&m, &coords, &[0.0]);
        let r = DMatrix::from_element(1, 2, 1.0);
        let r0 = DVector::from_element(1, 1.0);
        let b = 2.0 * m.eval(2.0) + 1.0;
        let sol = enumerate_solve(&gamma_d, &gamma_0, &r, &r0, &[0.0, b]).unwrap();
        assert!((sol.lambda[0] - 1.0).abs() < 1e-12 && sol.lambda[1] == 0.0);
    }

    #[test]
    fn pinned_single_weight() {
        let gamma_d = DMatrix::zeros(1, 1);
        let gamma_0 = DVector::from_element(1, 0.3);
        let r = DMatrix::from_element(1, 1, 1.0);
        let r0 = DVector::from_element(1, 1.0);
        for beta in [0.0, 1.0, 100.0] {
            let sol = enumerate_solve(&gamma_d, &gamma_0, &r, &r0, &[beta]).unwrap();
            assert!((sol.lambda[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn collinear_midpoint() {
        let m = VariogramModel::new(1.0, 3.0, 0.0).unwrap();
        let coords = vec![vec![0.0], vec![1.0], vec![2.5]];
        let inst = instance(&coords, &[0.5], &m);
        let sol = enumerate_solve(&inst.gamma_d, &inst.gamma_0, &inst.r, &inst.r0, &[0.0; 3]).unwrap();
        let uk = solve_uk(&factor_zone_kkt(&inst.gamma_d, &inst.r).unwrap(), &inst.gamma_0, &inst.r0).unwrap();
        assert!((&sol.lambda - &uk.lambda).amax() < 1e-8);
    }

    #[test]
    fn certificate_self_consistent_and_sensitive() {
        let inst = random_instance(6, 2, 11);
        let beta = [0.02, 0.05, 0.0, 0.08, 0.01, 0.03];
        let sol = enumerate_solve(&inst.gamma_d, &inst.gamma_0, &inst.r, &inst.r0, &beta).unwrap();
        let cert = certify(&sol.lambda, &inst.gamma_d, &inst.gamma_0, &inst.r, &inst.r0, &beta, 1e-8);
        assert!(cert.is_valid(), "{cert:?}");

        // Perturb one nonzero coordinate and project back onto Rλ = r_0.
        let k = (0..6).find(|&i| sol.lambda[i] != 0.0).unwrap();
        let mut lam = sol.lambda.clone();
        lam[k] += 1e-2;
        let rrt = &inst.r * inst.r.transpose();
        let corr = inst.r.transpose() * rrt.lu().solve(&(&inst.r * &lam - &inst.r0)).unwrap();
        lam -= corr;
        let cert = certify(&lam, &inst.gamma_d, &inst.gamma_0, &inst.r, &inst.r0, &beta, 1e-8);
        assert!(cert.feasibility_residual < 1e-12);
        assert!(cert.stationarity_residual > 1e-4, "{cert:?}");
    }

    #[test]
    fn uk_weights_certify() {
        let inst = random_instance(30, 3, 12);
        let uk = solve_uk(&factor_zone_kkt(&inst.gamma_d, &inst.r).unwrap(), &inst.gamma_0, &inst.r0).unwrap();
        let cert = certify(&uk.lambda, &inst.gamma_d, &inst.gamma_0, &inst.r, &inst.r0, &[0.0; 30], 1e-8);
        assert!(cert.is_valid(), "{cert:?}");
    }

    #[test]
    fn rejects_large_instances() {
        let inst = random_instance(11, 1, 1);
        assert!(enumerate_solve(&inst.gamma_d, &inst.gamma_0, &inst.r, &inst.r0, &[0.0; 11]).is_err());
    }
}
