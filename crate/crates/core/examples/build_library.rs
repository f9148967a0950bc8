//! Build a model library from a simulated training log, print per-zone
//! diagnostics, and check that saving and reloading is lossless.

use kriging_admm::config::RunConfig;
use kriging_admm::datagen::{simulate, training_excitation, SurrogateSystem};
use kriging_admm::library::{build_from_log, ModelLibrary};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig {
        train_len: 7_505,
        ..RunConfig::default()
    };
    let input = training_excitation(cfg.f_s, cfg.train_len, cfg.amplitude, cfg.data_seed)?;
    let log = simulate(&SurrogateSystem::default(), &input, cfg.data_seed)?;

    let start = std::time::Instant::now();
    let (lib, data) = build_from_log(&log, &cfg)?;
    println!(
        "{} zones from {} training samples in {:.2?} ({} held out)",
        lib.n_zones(),
        data.train.len(),
        start.elapsed(),
        data.test.len()
    );

    println!("{:>4} {:>5} {:>8} {:>8} {:>8} {:>12}", "zone", "size", "theta", "phi", "varpi", "eig spread");
    for d in lib.diagnostics().iter().take(8) {
        println!("{:>4} {:>5} {:>8.4} {:>8.4} {:>8.4} {:>12.3e}", d.zone, d.size, d.theta, d.phi, d.varpi, d.eigen_spread);
    }

    let path = std::env::temp_dir().join("kriging_admm_example_library.json");
    lib.save(&path)?;
    let reloaded = ModelLibrary::load(&path)?;
    let same = reloaded.to_json()? == lib.to_json()?;
    println!("\nsaved {} ({} bytes), reload identical: {same}", path.display(), std::fs::metadata(&path)?.len());
    Ok(())
}
