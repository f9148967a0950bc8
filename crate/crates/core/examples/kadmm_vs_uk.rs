//! Weights from universal kriging and from adaptive-lasso kriging on the
//! same random zone of 250 points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kriging_admm::forecast::interpolation_metric;
use kriging_admm::kadmm::{kadmm_solve, recover_weights, spectral_decompose, AdmmSettings};
use kriging_admm::kriging::{adaptive_penalties, constraint_matrix, constraint_rhs, default_beta_cap, factor_zone_kkt, solve_uk};
use kriging_admm::variogram::{build_matrices, VariogramModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dim = 4;
    let coords: Vec<Vec<f64>> = (0..250).map(|_| (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
    let query: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect();
    let model = VariogramModel::new(1.0, 2.0, 0.05)?;

    let mats = build_matrices(&model, &coords, &query);
    let r = constraint_matrix(&coords);
    let r0 = constraint_rhs(&query);

    let uk = solve_uk(&factor_zone_kkt(&mats.gamma_d, &r)?, &mats.gamma_0, &r0)?;
    let epsilon = 5e-5;
    let beta = adaptive_penalties(&uk.lambda, epsilon, default_beta_cap(epsilon))?;

    let form = spectral_decompose(&mats.gamma_d, &r, 0.5)?;
    println!("eigenvalues of -Gamma_D in [{:.3e}, {:.3e}]", form.d.min(), form.d.max());
    let res = kadmm_solve(&form, &mats.gamma_0, &r0, &beta, &AdmmSettings::default())?;
    let sparse = recover_weights(&res, 1e-4);

    let negative = |l: &nalgebra::DVector<f64>| l.iter().filter(|v| **v < 0.0).count();
    println!("{:>6} {:>10} {:>10} {:>8} {:>12}", "", "nonzeros", "negative", "sum", "sum|l|-1");
    println!("{:>6} {:>10} {:>10} {:>8.4} {:>12.4}", "UK", 250, negative(&uk.lambda), uk.lambda.sum(), interpolation_metric(&uk.lambda));
    println!(
        "{:>6} {:>10} {:>10} {:>8.4} {:>12.4}",
        "K-ADMM",
        sparse.nonzeros,
        negative(&sparse.lambda),
        sparse.lambda.sum(),
        interpolation_metric(&sparse.lambda)
    );
    println!("\nK-ADMM: {} iterations, converged {}", res.iterations, res.converged);
    println!("final residuals r {:.2e}, s {:.2e}", res.r_hist.last().unwrap(), res.s_hist.last().unwrap());
    Ok(())
}
