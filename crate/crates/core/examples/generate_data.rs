//! Simulate the surrogate plant under the training and validation
//! schedules and write both logs as CSV.
//!
//! ```text
//! cargo run --release --example generate_data -- /tmp/logs
//! ```

use std::fs::File;
use std::path::PathBuf;

use kriging_admm::config::RunConfig;
use kriging_admm::datagen::{simulate, training_excitation, validation_excitation, SurrogateSystem};

fn describe(name: &str, y: &[f64]) {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let std = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    println!("{name:>10}: {} samples, mean {mean:.4} Hz, std {:.1} mHz, range [{lo:.4}, {hi:.4}]", y.len(), std * 1e3);
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&dir)?;
    let cfg = RunConfig::default();
    let sys = SurrogateSystem::default();

    let train = simulate(&sys, &training_excitation(cfg.f_s, cfg.train_len, cfg.amplitude, cfg.data_seed)?, cfg.data_seed)?;
    let val = simulate(
        &sys,
        &validation_excitation(cfg.f_s, cfg.validation_len, cfg.amplitude, cfg.validation_seed)?,
        cfg.validation_seed,
    )?;
    describe("training", &train.y);
    describe("validation", &val.y);

    train.write_csv(File::create(dir.join("train.csv"))?)?;
    val.write_csv(File::create(dir.join("validation.csv"))?)?;
    println!("wrote {}", dir.display());
    Ok(())
}
