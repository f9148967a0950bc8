//! Batch evaluation of K-ADMM and universal kriging on held-out
//! trajectories, summarized by quartiles.

use kriging_admm::config::RunConfig;
use kriging_admm::datagen::{simulate, training_excitation, validation_excitation, SurrogateSystem};
use kriging_admm::forecast::Method;
use kriging_admm::library::build_from_log;
use kriging_admm::validation::{run_validation, summarize, trajectory_starts};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig {
        train_len: 7_505,
        validation_len: 8_000,
        n_trajectories: 60,
        ..RunConfig::default()
    };
    let sys = SurrogateSystem::default();
    let train = simulate(&sys, &training_excitation(cfg.f_s, cfg.train_len, cfg.amplitude, cfg.data_seed)?, cfg.data_seed)?;
    let val = simulate(
        &sys,
        &validation_excitation(cfg.f_s, cfg.validation_len, cfg.amplitude, cfg.validation_seed)?,
        cfg.validation_seed,
    )?;
    let (lib, _) = build_from_log(&train, &cfg)?;

    let starts = trajectory_starts(val.len(), cfg.n_p, lib.layout().max_lag(), cfg.n_trajectories)?;
    let records = run_validation(&val, &lib, cfg.n_p, &starts, &[Method::Kadmm, Method::UniversalKriging])?;

    println!("{:>8} {:>11} {:>11} {:>11} {:>9} {:>7} {:>9}", "method", "zeta q1", "median", "q3", "interp", "zeros", "coverage");
    for m in [Method::Kadmm, Method::UniversalKriging] {
        let s = summarize(&records, m);
        println!(
            "{:>8} {:>11.3e} {:>11.3e} {:>11.3e} {:>9.3} {:>6.1}% {:>8.1}%",
            m.name(),
            s.zeta.q1,
            s.zeta.median,
            s.zeta.q3,
            s.interp_metric.median,
            100.0 * s.zero_fraction.median,
            100.0 * s.coverage
        );
    }
    let k = summarize(&records, Method::Kadmm);
    println!("\nK-ADMM iterations per step: median {}, 90th percentile {}, max {}", k.iterations_median, k.iterations_p90, k.iterations_max);
    Ok(())
}
