//! K-ADMM: ADMM on the spectrally diagonalized regularized kriging problem.
//!
//! With `−Γ_D = Q D Qᵀ` and `ν = Qᵀλ`, the regularized problem
//!
//! ```text
//! min  −λᵀΓ_Dλ + 2Γ_0ᵀλ + Σ β_i |λ_i|   s.t.  Rλ = r_0
//! ```
//!
//! becomes `min νᵀDν + 2ξᵀν + Σ β_i |α_i|` subject to `R̃ν = r_0`, `Qν = α`,
//! where `ξ = QᵀΓ_0` and `R̃ = RQ`. Each iteration solves the equality
//! constrained ν-step through one cached factorization of
//!
//! ```text
//! [ 2D + ρI  R̃ᵀ ] [ ν ]   [ −2ξ − Qᵀη + ρQᵀα ]
//! [   R̃      0  ] [ ς ] = [        r_0        ]
//! ```
//!
//! then an element-wise soft-threshold for α and a dual ascent step for η.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kriging::PenaltyVector;
use crate::linalg::{sym_eigen, DenseLu};

/// Minimizer of `w x² + β|x| − c x` for `w > 0`, `β ≥ 0`.
#[inline]
pub fn prox_psi(w: f64, beta: f64, c: f64) -> f64 {
    let shrunk = (c.abs() - beta).max(0.0);
    if shrunk == 0.0 {
        0.0
    } else {
        c.signum() * shrunk / (2.0 * w)
    }
}

/// Coefficient matrix of the ν-step.
pub fn nu_step_matrix(d: &DVector<f64>, r_tilde: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let n = d.len();
    let p = r_tilde.nrows();
    let mut m = DMatrix::zeros(n + p, n + p);
    for i in 0..n {
        m[(i, i)] = 2.0 * d[i] + rho;
    }
    m.view_mut((0, n), (n, p)).copy_from(&r_tilde.transpose());
    m.view_mut((n, 0), (p, n)).copy_from(r_tilde);
    m
}

/// Factorization of the ν-step matrix.
///
/// When every `2d_i + ρ` is safely away from zero the system is reduced onto
/// the small Schur complement `R̃ (2D + ρI)⁻¹ R̃ᵀ`; otherwise the full matrix
/// is LU-factored.
#[derive(Clone, Debug)]
enum NuFactor {
    Schur { h_inv: DVector<f64>, schur: DenseLu },
    Dense(DenseLu),
}

/// Smallest `|2d_i + ρ| / max_j |2d_j + ρ|` for which the Schur path is used.
const SCHUR_PIVOT_RATIO: f64 = 1e-6;

impl NuFactor {
    fn new(d: &DVector<f64>, r_tilde: &DMatrix<f64>, rho: f64) -> Result<Self> {
        let h = d.map(|v| 2.0 * v + rho);
        let min_h = h.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        if min_h > SCHUR_PIVOT_RATIO * h.amax() {
            let h_inv = h.map(|v| 1.0 / v);
            let scaled = DMatrix::from_fn(r_tilde.nrows(), r_tilde.ncols(), |i, j| r_tilde[(i, j)] * h_inv[j]);
            if let Ok(schur) = DenseLu::new(scaled * r_tilde.transpose()) {
                return Ok(NuFactor::Schur { h_inv, schur });
            }
        }
        Ok(NuFactor::Dense(DenseLu::new(nu_step_matrix(d, r_tilde, rho))?))
    }

    /// Overwrite `nu` and `sigma` with the solution for top right-hand side
    /// `top` and constraint right-hand side `r0`.
    fn solve(
        &self,
        r_tilde: &DMatrix<f64>,
        top: &DVector<f64>,
        r0: &DVector<f64>,
        nu: &mut DVector<f64>,
        sigma: &mut DVector<f64>,
    ) -> Result<()> {
        match self {
            NuFactor::Schur { h_inv, schur } => {
                nu.copy_from(top);
                nu.component_mul_assign(h_inv);
                sigma.copy_from(r0);
                sigma.gemv(1.0, r_tilde, nu, -1.0);
                schur.solve_in_place(sigma)?;
                for (j, v) in nu.iter_mut().enumerate() {
                    *v -= h_inv[j] * r_tilde.column(j).dot(sigma);
                }
            }
            NuFactor::Dense(lu) => {
                let n = nu.len();
                let p = r0.len();
                let mut rhs = DVector::zeros(n + p);
                rhs.rows_mut(0, n).copy_from(top);
                rhs.rows_mut(n, p).copy_from(r0);
                lu.solve_in_place(&mut rhs)?;
                nu.copy_from(&rhs.rows(0, n));
                sigma.copy_from(&rhs.rows(n, p));
            }
        }
        Ok(())
    }
}

/// Zone data that K-ADMM reuses across every query: the eigenpairs of
/// `−Γ_D`, the rotated constraints and the factored ν-step matrix for one ρ.
#[derive(Clone, Debug)]
pub struct SpectralForm {
    pub q: DMatrix<f64>,
    pub d: DVector<f64>,
    pub r_tilde: DMatrix<f64>,
    pub rho: f64,
    factor: NuFactor,
}

impl SpectralForm {
    pub fn n_data(&self) -> usize {
        self.d.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.r_tilde.nrows()
    }

    /// `‖QᵀQ − I‖_F`.
    pub fn orthogonality_error(&self) -> f64 {
        let n = self.n_data();
        (self.q.tr_mul(&self.q) - DMatrix::identity(n, n)).norm()
    }

    /// `‖QDQᵀ + Γ_D‖_F / ‖Γ_D‖_F`.
    pub fn reconstruction_error(&self, gamma_d: &DMatrix<f64>) -> f64 {
        let recon = &self.q * DMatrix::from_diagonal(&self.d) * self.q.transpose();
        (recon + gamma_d).norm() / gamma_d.norm()
    }

    /// Solve the ν-step system for a given top right-hand side; returns `(ν, ς)`.
    pub fn nu_step(&self, top: &DVector<f64>, r0: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_dims(top.len(), r0.len())?;
        let mut nu = DVector::zeros(self.n_data());
        let mut sigma = DVector::zeros(r0.len());
        self.factor.solve(&self.r_tilde, top, r0, &mut nu, &mut sigma)?;
        Ok((nu, sigma))
    }

    /// Whether the ν-step is solved through the Schur complement.
    pub fn uses_schur(&self) -> bool {
        matches!(self.factor, NuFactor::Schur { .. })
    }

    fn check_dims(&self, n: usize, p: usize) -> Result<()> {
        if n != self.n_data() {
            return Err(Error::DimensionMismatch {
                expected: self.n_data(),
                got: n,
            });
        }
        if p != self.n_constraints() {
            return Err(Error::DimensionMismatch {
                expected: self.n_constraints(),
                got: p,
            });
        }
        Ok(())
    }
}

pub fn spectral_decompose(gamma_d: &DMatrix<f64>, r: &DMatrix<f64>, rho: f64) -> Result<SpectralForm> {
    let n = gamma_d.nrows();
    if gamma_d.ncols() != n || r.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: r.ncols(),
        });
    }
    if (gamma_d - gamma_d.transpose()).amax() > 1e-12 * gamma_d.amax() {
        return Err(Error::InvalidArgument("semivariance matrix is not symmetric".into()));
    }
    if !(rho >= 0.0) {
        return Err(Error::InvalidArgument(format!("rho must be nonnegative, got {rho}")));
    }
    let (d, q) = sym_eigen(&(-gamma_d))?;
    let r_tilde = r * &q;
    let factor = NuFactor::new(&d, &r_tilde, rho)?;
    Ok(SpectralForm {
        q,
        d,
        r_tilde,
        rho,
        factor,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmmSettings {
    pub eps_pri: f64,
    pub eps_dual: f64,
    pub max_iter: usize,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            eps_pri: 1e-5,
            eps_dual: 1e-5,
            max_iter: 5000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KadmmResult {
    pub nu: DVector<f64>,
    pub alpha: DVector<f64>,
    pub eta: DVector<f64>,
    /// `Qν` before any truncation.
    pub lambda: DVector<f64>,
    pub iterations: usize,
    pub r_hist: Vec<f64>,
    pub s_hist: Vec<f64>,
    pub converged: bool,
}

impl KadmmResult {
    /// Primal/dual residual history as `iteration,r,s` CSV.
    pub fn write_history_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["iteration", "r", "s"])?;
        for (k, (r, s)) in self.r_hist.iter().zip(&self.s_hist).enumerate() {
            w.write_record(&[(k + 1).to_string(), r.to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Run K-ADMM from `α = 0`, `η = 0` with the ρ baked into `form`.
///
/// Hitting `max_iter` is not an error: the last iterate is returned with
/// `converged = false`.
pub fn kadmm_solve(
    form: &SpectralForm,
    gamma_0: &DVector<f64>,
    r0: &DVector<f64>,
    beta: &PenaltyVector,
    settings: &AdmmSettings,
) -> Result<KadmmResult> {
    let n = form.n_data();
    form.check_dims(gamma_0.len(), r0.len())?;
    form.check_dims(beta.len(), r0.len())?;
    let rho = form.rho;
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument("K-ADMM requires rho > 0".into()));
    }

    let minus_two_xi = form.q.tr_mul(gamma_0) * -2.0;
    let mut alpha = DVector::zeros(n);
    let mut eta = DVector::zeros(n);
    // Qᵀ(ρα − η), zero at the start.
    let mut rotated = DVector::zeros(n);
    let mut scaled = DVector::zeros(n);
    let mut qnu = DVector::zeros(n);
    let mut nu = DVector::zeros(n);
    let mut top = DVector::zeros(n);
    let mut sigma = DVector::zeros(r0.len());
    let mut r_hist = Vec::new();
    let mut s_hist = Vec::new();
    let mut converged = false;

    for _ in 0..settings.max_iter {
        top.copy_from(&minus_two_xi);
        top += &rotated;
        form.factor.solve(&form.r_tilde, &top, r0, &mut nu, &mut sigma)?;
        qnu.gemv(1.0, &form.q, &nu, 0.0);

        let mut r_sq = 0.0;
        let mut da_sq = 0.0;
        for i in 0..n {
            let a_new = prox_psi(0.5 * rho, beta.beta[i], rho * qnu[i] + eta[i]);
            let gap = qnu[i] - a_new;
            eta[i] += rho * gap;
            r_sq += gap * gap;
            da_sq += (a_new - alpha[i]) * (a_new - alpha[i]);
            alpha[i] = a_new;
        }
        let r = r_sq.sqrt();
        // ‖ρQᵀ(α⁺ − α)‖ = ρ‖α⁺ − α‖ for orthogonal Q.
        let s = rho * da_sq.sqrt();
        r_hist.push(r);
        s_hist.push(s);

        scaled.copy_from(&eta);
        scaled.axpy(rho, &alpha, -1.0);
        rotated.gemv_tr(1.0, &form.q, &scaled, 0.0);

        if r <= settings.eps_pri && s <= settings.eps_dual {
            converged = true;
            break;
        }
    }

    Ok(KadmmResult {
        lambda: qnu,
        nu,
        alpha,
        eta,
        iterations: r_hist.len(),
        r_hist,
        s_hist,
        converged,
    })
}

/// Final weights with small entries truncated.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseWeights {
    pub lambda: DVector<f64>,
    pub nonzeros: usize,
}

impl SparseWeights {
    pub fn zero_fraction(&self) -> f64 {
        1.0 - self.nonzeros as f64 / self.lambda.len() as f64
    }
}

/// `λ = Qν` with entries of magnitude below `threshold` set to zero; the
/// remaining weights are not renormalized.
pub fn recover_weights(result: &KadmmResult, threshold: f64) -> SparseWeights {
    let lambda = result.lambda.map(|v| if v.abs() < threshold { 0.0 } else { v });
    let nonzeros = lambda.iter().filter(|v| **v != 0.0).count();
    SparseWeights { lambda, nonzeros }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kriging::{constraint_matrix, constraint_rhs, factor_zone_kkt, solve_uk};
    use crate::linalg::condition_number_1;
    use crate::variogram::{gamma_matrix, gamma_vector, VariogramModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zone(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
    }

    #[test]
    fn prox_reference_cases() {
        assert_eq!(prox_psi(1.0, 3.0, 2.5), 0.0);
        assert_eq!(prox_psi(1.0, 3.0, -3.0), 0.0);
        assert_eq!(prox_psi(0.25, 0.0, 1.5), 3.0);
        assert_eq!(prox_psi(0.5, 1.0, 3.0), 2.0);

        // Grid oracle for (w, β, c) = (0.5, 1, 3) over [−10, 10], step 1e-4.
        let f = |x: f64| 0.5 * x * x + (x.abs()) - 3.0 * x;
        let best = (0..=200_000)
            .map(|k| -10.0 + k as f64 * 1e-4)
            .min_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap();
        assert!((best - 2.0).abs() < 1e-4);
    }

    #[test]
    fn two_by_two_spectrum() {
        let g = 0.7;
        let gamma = DMatrix::from_row_slice(2, 2, &[0.0, g, g, 0.0]);
        let r = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let form = spectral_decompose(&gamma, &r, 0.5).unwrap();
        assert!((form.d[0] + g).abs() < 1e-14 && (form.d[1] - g).abs() < 1e-14);
    }

    #[test]
    fn spectral_invariants_on_random_zone() {
        let coords = zone(50, 3, 1);
        let m = VariogramModel::new(1.0, 3.0, 0.1).unwrap();
        let g = gamma_matrix(&m, &coords);
        let form = spectral_decompose(&g, &constraint_matrix(&coords), 0.5).unwrap();
        assert!(form.orthogonality_error() < 1e-10);
        assert!(form.reconstruction_error(&g) < 1e-10);
        assert!(form.d[0] < 0.0);
        assert!(form.d.sum().abs() < 1e-10);
    }

    #[test]
    fn rho_improves_conditioning() {
        // A near-duplicate pair without nugget gives −Γ_D an eigenvalue many
        // orders of magnitude below the rest.
        let mut coords = zone(30, 2, 2);
        let mut twin = coords[0].clone();
        twin[0] += 1e-10;
        coords.push(twin);
        let m = VariogramModel::new(1.0, 2.0, 0.0).unwrap();
        let g = gamma_matrix(&m, &coords);
        let r = constraint_matrix(&coords);
        let form = spectral_decompose(&g, &r, 0.5).unwrap();
        let spread = form.d.amax() / form.d.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        assert!(spread > 1e10, "eigenvalue spread {spread:e}");
        let c0 = condition_number_1(&nu_step_matrix(&form.d, &form.r_tilde, 0.0));
        let c5 = condition_number_1(&nu_step_matrix(&form.d, &form.r_tilde, 0.5));
        assert!(c0 / c5 >= 1e2, "cond(ρ=0) = {c0:e}, cond(ρ=0.5) = {c5:e}");
    }

    #[test]
    fn zero_penalty_matches_uk() {
        let coords = zone(40, 2, 3);
        let m = VariogramModel::new(1.0, 2.0, 0.2).unwrap();
        let g = gamma_matrix(&m, &coords);
        let r = constraint_matrix(&coords);
        let form = spectral_decompose(&g, &r, 0.5).unwrap();
        let uk = factor_zone_kkt(&g, &r).unwrap();
        let q = vec![0.4, -0.3];
        let g0 = gamma_vector(&m, &coords, &q);
        let r0 = constraint_rhs(&q);
        let settings = AdmmSettings {
            eps_pri: 1e-12,
            eps_dual: 1e-12,
            max_iter: 20_000,
        };
        let res = kadmm_solve(&form, &g0, &r0, &PenaltyVector::zeros(40), &settings).unwrap();
        assert!(res.converged);
        let lam_uk = solve_uk(&uk, &g0, &r0).unwrap().lambda;
        assert!((&res.lambda - lam_uk).amax() < 1e-6);
        assert!((&r * &res.lambda - r0).amax() < 1e-9);
    }

    #[test]
    fn nu_step_stationarity_and_feasibility() {
        let coords = zone(25, 2, 4);
        let m = VariogramModel::new(1.0, 2.0, 0.05).unwrap();
        let g = gamma_matrix(&m, &coords);
        let form = spectral_decompose(&g, &constraint_matrix(&coords), 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let top = DVector::from_fn(25, |_, _| rng.random_range(-1.0..1.0));
        let r0 = constraint_rhs(&[0.2, 0.1]);
        let (nu, sigma) = form.nu_step(&top, &r0).unwrap();
        let h = form.d.map(|d| 2.0 * d + 0.5);
        let stat = h.component_mul(&nu) + form.r_tilde.transpose() * sigma - top;
        assert!(stat.amax() <= 1e-10);
        assert!((&form.r_tilde * nu - r0).amax() <= 1e-9);
    }

    #[test]
    fn schur_and_dense_paths_agree() {
        let coords = zone(40, 3, 8);
        let m = VariogramModel::new(1.0, 1.5, 0.1).unwrap();
        let form = spectral_decompose(&gamma_matrix(&m, &coords), &constraint_matrix(&coords), 0.5).unwrap();
        assert!(form.uses_schur());
        let dense = NuFactor::Dense(DenseLu::new(nu_step_matrix(&form.d, &form.r_tilde, 0.5)).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let top = DVector::from_fn(40, |_, _| rng.random_range(-1.0..1.0));
        let r0 = constraint_rhs(&[0.1, -0.3, 0.2]);
        let (nu, sigma) = form.nu_step(&top, &r0).unwrap();
        let (mut nu_d, mut sigma_d) = (DVector::zeros(40), DVector::zeros(4));
        dense.solve(&form.r_tilde, &top, &r0, &mut nu_d, &mut sigma_d).unwrap();
        assert!((nu - nu_d).amax() < 1e-10);
        assert!((sigma - sigma_d).amax() < 1e-10);

        // A pivot at zero forces the dense path.
        let mut d = form.d.clone();
        d[0] = -0.25;
        assert!(matches!(NuFactor::new(&d, &form.r_tilde, 0.5), Ok(NuFactor::Dense(_))));
    }

    #[test]
    fn truncation() {
        let res = KadmmResult {
            nu: DVector::zeros(3),
            alpha: DVector::zeros(3),
            eta: DVector::zeros(3),
            lambda: DVector::from_vec(vec![0.5, 5e-5, 0.49995]),
            iterations: 1,
            r_hist: vec![0.0],
            s_hist: vec![0.0],
            converged: true,
        };
        let none = recover_weights(&res, 0.0);
        assert_eq!(none.lambda, res.lambda);
        assert_eq!(none.nonzeros, 3);
        let cut = recover_weights(&res, 1e-4);
        assert_eq!(cut.lambda[1], 0.0);
        assert_eq!(cut.nonzeros, 2);
        let keep = recover_weights(&res, 1e-5);
        assert_eq!(keep.lambda, res.lambda);
    }

    #[test]
    fn history_csv() {
        let res = KadmmResult {
            nu: DVector::zeros(1),
            alpha: DVector::zeros(1),
            eta: DVector::zeros(1),
            lambda: DVector::zeros(1),
            iterations: 2,
            r_hist: vec![0.5, 0.25],
            s_hist: vec![1.0, 0.125],
            converged: false,
        };
        let mut buf = Vec::new();
        res.write_history_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iteration,r,s\n1,0.5,1\n2,0.25,0.125\n");
    }
}
