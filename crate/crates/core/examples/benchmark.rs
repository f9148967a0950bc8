//! Single-threaded timing of full trajectories: K-ADMM against a solver
//! that rebuilds and factors the dense saddle-point system at every step,
//! plus enumeration against K-ADMM on eight-point subproblems.

use kriging_admm::bench::{bench_tiny, bench_trajectories};
use kriging_admm::config::RunConfig;
use kriging_admm::datagen::{simulate, training_excitation, validation_excitation, SurrogateSystem};
use kriging_admm::forecast::Method;
use kriging_admm::library::build_from_log;
use kriging_admm::validation::trajectory_starts;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig {
        train_len: 7_505,
        ..RunConfig::default()
    };
    let sys = SurrogateSystem::default();
    let train = simulate(&sys, &training_excitation(cfg.f_s, cfg.train_len, cfg.amplitude, cfg.data_seed)?, cfg.data_seed)?;
    let val = simulate(&sys, &validation_excitation(cfg.f_s, 4_000, cfg.amplitude, cfg.validation_seed)?, cfg.validation_seed)?;
    let (lib, _) = build_from_log(&train, &cfg)?;

    let starts = trajectory_starts(val.len(), cfg.n_p, lib.layout().max_lag(), 20)?;
    let mut report = bench_trajectories(&val, &lib, cfg.n_p, &starts, &[Method::Kadmm, Method::DenseReference], 1)?;
    report.rows.extend(bench_tiny(&val, &lib, &starts, 8)?.rows);

    report.write_csv(std::io::stdout())?;
    println!(
        "\nspeedup over dense reference: {:.1}x; over enumeration (N = 8): {:.0}x",
        report.speedup("dense_reference", "kadmm").unwrap_or(f64::NAN),
        report.speedup("enumeration_n8", "kadmm_n8").unwrap_or(f64::NAN)
    );
    Ok(())
}
