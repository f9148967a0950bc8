//! Fit an exponential semivariogram to a sampled Gaussian field.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use kriging_admm::variogram::{empirical_semivariogram, eval_model, fit_exponential, VariogramModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = VariogramModel::new(1.0, 0.8, 0.1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let unit = Uniform::new(0.0, 4.0)?;

    // Sample a zero-mean field with covariance θ − γ(h) on scattered points.
    let n = 900;
    let coords: Vec<Vec<f64>> = (0..n).map(|_| vec![unit.sample(&mut rng), unit.sample(&mut rng)]).collect();
    let cov = DMatrix::from_fn(n, n, |i, j| {
        let h = ((coords[i][0] - coords[j][0]).powi(2) + (coords[i][1] - coords[j][1]).powi(2)).sqrt();
        truth.theta - eval_model(&truth, h)
    });
    let chol = cov.cholesky().ok_or("covariance not positive definite")?;
    let white = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let field = chol.l() * white;

    let emp = empirical_semivariogram(&coords, field.as_slice(), 40)?;
    let fit = fit_exponential(&emp)?;

    println!("{:>8} {:>10} {:>8} {:>10}", "lag", "gamma_hat", "pairs", "fit");
    for k in (0..emp.lag_centers.len()).step_by(4) {
        let h = emp.lag_centers[k];
        println!("{h:8.3} {:10.4} {:8} {:10.4}", emp.gamma_hat[k], emp.pair_counts[k], eval_model(&fit.model, h));
    }
    println!("\ntrue   theta {:.3} phi {:.3} varpi {:.3}", truth.theta, truth.phi, truth.varpi);
    println!("fitted theta {:.3} phi {:.3} varpi {:.3} (loss {:.3e})", fit.model.theta, fit.model.phi, fit.model.varpi, fit.loss);
    Ok(())
}
