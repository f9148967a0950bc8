//! Forecast one 0.5 s trajectory with K-ADMM and with universal kriging and
//! compare both with the simulated truth.

use kriging_admm::config::RunConfig;
use kriging_admm::datagen::{simulate, training_excitation, validation_excitation, SurrogateSystem};
use kriging_admm::forecast::{trajectory_error, Method};
use kriging_admm::library::build_from_log;
use kriging_admm::validation::forecast_at;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig {
        train_len: 7_505,
        ..RunConfig::default()
    };
    let sys = SurrogateSystem::default();
    let train = simulate(&sys, &training_excitation(cfg.f_s, cfg.train_len, cfg.amplitude, cfg.data_seed)?, cfg.data_seed)?;
    let val = simulate(&sys, &validation_excitation(cfg.f_s, 2_000, cfg.amplitude, cfg.validation_seed)?, cfg.validation_seed)?;
    let (lib, _) = build_from_log(&train, &cfg)?;

    let t = 800;
    let (kadmm, truth) = forecast_at(&val, t, cfg.n_p, &lib, Method::Kadmm)?;
    let (uk, _) = forecast_at(&val, t, cfg.n_p, &lib, Method::UniversalKriging)?;

    println!("{:>4} {:>10} {:>10} {:>10} {:>21} {:>5} {:>5}", "step", "truth", "K-ADMM", "UK", "95% interval", "nnz", "iters");
    for l in (0..cfg.n_p).step_by(4) {
        let (lo, hi) = kadmm.interval95[l];
        println!(
            "{:>4} {:>10.4} {:>10.4} {:>10.4} [{lo:>9.4}, {hi:>9.4}] {:>5} {:>5}",
            l + 1,
            truth[l + 1],
            kadmm.y_hat[l],
            uk.y_hat[l],
            kadmm.nonzeros[l],
            kadmm.iterations[l]
        );
    }
    println!(
        "\nzeta: K-ADMM {:.3e}, UK {:.3e}; K-ADMM took {:.2?}",
        trajectory_error(&truth, &kadmm.y_hat)?,
        trajectory_error(&truth, &uk.y_hat)?,
        kadmm.wall_time
    );
    Ok(())
}
