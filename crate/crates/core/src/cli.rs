//! Command-line front end. Machine-readable output goes to files or stdout,
//! human summaries to stderr.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::bench::{bench_tiny, bench_trajectories};
use crate::config::{ConfigOverrides, RunConfig};
use crate::data::TimeSeriesLog;
use crate::datagen::{simulate, training_excitation, validation_excitation, SurrogateSystem};
use crate::error::{Error, Result};
use crate::forecast::{predict_trajectory, Method};
use crate::library::{build_from_log, ModelLibrary};
use crate::validation::{run_validation, summarize, trajectory_starts, write_scatter_csv};
use crate::variogram::eval_model;
use crate::verify::run_suite;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "kriging-admm", version, about = "Sparse kriging forecasts solved by K-ADMM")]
pub struct Cli {
    /// Flat TOML configuration; flags of the same name override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LogKind {
    /// Chirp plus pseudo-random sequence.
    Train,
    /// Random steps.
    Validation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Kadmm,
    Uk,
    Dense,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Kadmm => Method::Kadmm,
            MethodArg::Uk => Method::UniversalKriging,
            MethodArg::Dense => Method::DenseReference,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate the surrogate plant and write a log CSV.
    Generate {
        #[arg(long, value_enum, default_value = "train")]
        kind: LogKind,
        /// TOML file with surrogate coefficients.
        #[arg(long)]
        system: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Zone, whiten, and fit a training log into a model library.
    BuildLibrary {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the train/test index split as JSON.
        #[arg(long)]
        split: Option<PathBuf>,
        /// Per-zone diagnostics CSV (stdout if omitted).
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Empirical and fitted semivariogram per zone as CSV.
    FitVariogram {
        #[arg(long)]
        library: PathBuf,
        /// Single zone; all zones if omitted.
        #[arg(long)]
        zone: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Forecast one trajectory from a log tail and planned inputs.
    Predict {
        #[arg(long)]
        library: PathBuf,
        /// Log CSV whose last row is the forecast origin.
        #[arg(long)]
        tail: PathBuf,
        /// CSV with columns `u_1..u_m` holding u(t+1) onward.
        #[arg(long)]
        future: PathBuf,
        #[arg(long, value_enum, default_value = "kadmm")]
        method: MethodArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Batch trajectory errors on a held-out log.
    Validate {
        #[arg(long)]
        library: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "kadmm,uk")]
        methods: Vec<MethodArg>,
        /// Per-trajectory (interp_metric, zeta) CSV.
        #[arg(long)]
        scatter: Option<PathBuf>,
        /// Summary JSON (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the solver against its reference implementations.
    Verify {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Time K-ADMM against the dense reference, single-threaded.
    Bench {
        #[arg(long)]
        library: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value_t = 1)]
        n_rep: usize,
        /// Trajectory origins to time.
        #[arg(long, default_value_t = 20)]
        trajectories: usize,
        /// Zone size for the enumeration timing; 0 skips it.
        #[arg(long, default_value_t = 8)]
        tiny: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn read_log(path: &Path) -> Result<TimeSeriesLog> {
    TimeSeriesLog::read_csv(BufReader::new(File::open(path)?))
}

/// Rows of the `u_*` columns of a CSV.
pub fn read_inputs_csv<R: io::Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_reader(reader);
    let cols: Vec<usize> = r.headers()?.iter().enumerate().filter(|(_, h)| h.starts_with("u_")).map(|(i, _)| i).collect();
    if cols.is_empty() {
        return Err(Error::InvalidArgument("input CSV has no `u_*` columns".into()));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            cols.iter()
                .map(|&i| rec[i].trim().parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad number `{}`: {e}", &rec[i]))))
                .collect()
        })
        .collect()
}

pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&cli.overrides)?;
    Ok(cfg)
}

fn generate(cfg: &RunConfig, kind: LogKind, system: &Option<PathBuf>, out: &Option<PathBuf>) -> Result<i32> {
    let sys = match system {
        Some(p) => toml::from_str(&std::fs::read_to_string(p)?).map_err(|e| Error::Config(e.to_string()))?,
        None => SurrogateSystem::default(),
    };
    let (input, seed) = match kind {
        LogKind::Train => (training_excitation(cfg.f_s, cfg.train_len, cfg.amplitude, cfg.data_seed)?, cfg.data_seed),
        LogKind::Validation => (
            validation_excitation(cfg.f_s, cfg.validation_len, cfg.amplitude, cfg.validation_seed)?,
            cfg.validation_seed,
        ),
    };
    let log = simulate(&sys, &input, seed)?;
    log.write_csv(output(out)?)?;
    eprintln!("wrote {} samples", log.len());
    Ok(EXIT_OK)
}

fn build(cfg: &RunConfig, log: &Path, out: &Path, split: &Option<PathBuf>, diagnostics: &Option<PathBuf>) -> Result<i32> {
    let log = read_log(log)?;
    let (lib, data) = build_from_log(&log, cfg)?;
    lib.save(out)?;
    if let Some(p) = split {
        std::fs::write(p, data.split.to_json()?)?;
    }
    let mut w = csv::Writer::from_writer(output(diagnostics)?);
    for d in lib.diagnostics() {
        w.serialize(d)?;
    }
    w.flush()?;
    eprintln!(
        "built {} zones from {} training samples ({} held out)",
        lib.n_zones(),
        data.train.len(),
        data.test.len()
    );
    Ok(EXIT_OK)
}

fn fit_variogram(library: &Path, zone: Option<usize>, out: &Option<PathBuf>) -> Result<i32> {
    let lib = ModelLibrary::load(library)?;
    let zones: Vec<usize> = match zone {
        Some(j) if j >= lib.n_zones() => {
            return Err(Error::InvalidArgument(format!("zone {j} out of range, library has {}", lib.n_zones())))
        }
        Some(j) => vec![j],
        None => (0..lib.n_zones()).collect(),
    };
    let mut w = csv::Writer::from_writer(output(out)?);
    w.write_record(["zone", "lag", "gamma_hat", "pairs", "fit"])?;
    for j in zones {
        let rec = &lib.zones[j].record;
        let emp = &rec.empirical;
        for k in 0..emp.lag_centers.len() {
            let h = emp.lag_centers[k];
            w.write_record(&[
                j.to_string(),
                h.to_string(),
                emp.gamma_hat[k].to_string(),
                emp.pair_counts[k].to_string(),
                eval_model(&rec.variogram, h).to_string(),
            ])?;
        }
        eprintln!(
            "zone {j}: theta {:.4e} phi {:.4e} varpi {:.4e} loss {:.3e}",
            rec.variogram.theta, rec.variogram.phi, rec.variogram.varpi, rec.fit_loss
        );
    }
    w.flush()?;
    Ok(EXIT_OK)
}

fn predict(cfg: &RunConfig, library: &Path, tail: &Path, future: &Path, method: Method, out: &Option<PathBuf>) -> Result<i32> {
    let lib = ModelLibrary::load(library)?;
    let tail = read_log(tail)?;
    let future = read_inputs_csv(BufReader::new(File::open(future)?))?;
    let traj = predict_trajectory(&tail, &future, cfg.n_p, &lib, method)?;
    traj.write_csv(output(out)?)?;
    eprintln!("{} steps in {:.2?}", traj.len(), traj.wall_time);
    if traj.all_converged() {
        Ok(EXIT_OK)
    } else {
        eprintln!("some steps did not converge");
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn validate(cfg: &RunConfig, library: &Path, log: &Path, methods: &[MethodArg], scatter: &Option<PathBuf>, out: &Option<PathBuf>) -> Result<i32> {
    let lib = ModelLibrary::load(library)?;
    let log = read_log(log)?;
    let starts = trajectory_starts(log.len(), cfg.n_p, lib.layout().max_lag(), cfg.n_trajectories)?;
    let methods: Vec<Method> = methods.iter().map(|&m| m.into()).collect();
    let records = run_validation(&log, &lib, cfg.n_p, &starts, &methods)?;
    let summaries: Vec<_> = methods.iter().map(|&m| summarize(&records, m)).collect();
    for s in &summaries {
        eprintln!(
            "{:>16}: median zeta {:.4e} (q1 {:.4e}, q3 {:.4e}), interp {:.3}, zeros {:.1}%, coverage {:.1}%",
            s.method.name(),
            s.zeta.median,
            s.zeta.q1,
            s.zeta.q3,
            s.interp_metric.median,
            100.0 * s.zero_fraction.median,
            100.0 * s.coverage
        );
    }
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, &summaries)?;
    writeln!(w)?;
    w.flush()?;
    if let Some(p) = scatter {
        write_scatter_csv(&records, BufWriter::new(File::create(p)?))?;
    }
    Ok(EXIT_OK)
}

fn verify(cfg: &RunConfig, seed: u64) -> Result<i32> {
    let outcomes = run_suite(seed, cfg.rho);
    let mut w = csv::Writer::from_writer(io::stdout());
    for o in &outcomes {
        w.serialize(o)?;
        eprintln!(
            "{} {:<32} metric {:.3e} tol {:.0e} ({} cases, {:.2}s)",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.metric,
            o.tolerance,
            o.cases,
            o.seconds
        );
    }
    w.flush()?;
    Ok(if outcomes.iter().all(|o| o.passed) { EXIT_OK } else { EXIT_FAILURE })
}

fn bench(cfg: &RunConfig, library: &Path, log: &Path, n_rep: usize, trajectories: usize, tiny: usize, out: &Option<PathBuf>) -> Result<i32> {
    let lib = ModelLibrary::load(library)?;
    let log = read_log(log)?;
    let starts = trajectory_starts(log.len(), cfg.n_p, lib.layout().max_lag(), trajectories)?;
    let mut report = bench_trajectories(&log, &lib, cfg.n_p, &starts, &[Method::Kadmm, Method::DenseReference], n_rep.max(1))?;
    if tiny > 0 {
        report.rows.extend(bench_tiny(&log, &lib, &starts, tiny)?.rows);
    }
    report.write_csv(output(out)?)?;
    if let Some(s) = report.speedup(Method::DenseReference.name(), Method::Kadmm.name()) {
        eprintln!("median speedup over dense reference: {s:.2}x");
    }
    Ok(EXIT_OK)
}

pub fn run(cli: &Cli) -> Result<i32> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Generate { kind, system, out } => generate(&cfg, *kind, system, out),
        Command::BuildLibrary { log, out, split, diagnostics } => build(&cfg, log, out, split, diagnostics),
        Command::FitVariogram { library, zone, out } => fit_variogram(library, *zone, out),
        Command::Predict { library, tail, future, method, out } => predict(&cfg, library, tail, future, (*method).into(), out),
        Command::Validate { library, log, methods, scatter, out } => validate(&cfg, library, log, methods, scatter, out),
        Command::Verify { seed } => verify(&cfg, *seed),
        Command::Bench { library, log, n_rep, trajectories, tiny, out } => bench(&cfg, library, log, *n_rep, *trajectories, *tiny, out),
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Config(_) => EXIT_CONFIG,
        Error::SolverDidNotConverge { .. } => EXIT_NOT_CONVERGED,
        _ => EXIT_FAILURE,
    }
}

/// Parse arguments, run, and map the outcome to an exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arguments_parse() {
        let cli = Cli::try_parse_from(["kriging-admm", "predict", "--library", "l.json", "--tail", "t.csv", "--future", "f.csv", "--rho", "1.5"]).unwrap();
        assert_eq!(cli.overrides.rho, Some(1.5));
        assert!(matches!(cli.command, Command::Predict { method: MethodArg::Kadmm, .. }));
        let cli = Cli::try_parse_from(["kriging-admm", "--n_p", "80", "validate", "--library", "l", "--log", "v", "--methods", "uk,dense"]).unwrap();
        assert_eq!(cli.overrides.n_p, Some(80));
        match cli.command {
            Command::Validate { methods, .. } => assert_eq!(methods, vec![MethodArg::Uk, MethodArg::Dense]),
            _ => panic!(),
        }
        assert!(Cli::try_parse_from(["kriging-admm", "verify", "--bogus", "1"]).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::SolverDidNotConverge { iterations: 3 }.in_zone(2)), EXIT_NOT_CONVERGED);
        assert_eq!(exit_code(&Error::SingularKkt), EXIT_FAILURE);
    }

    #[test]
    fn inputs_csv() {
        let rows = read_inputs_csv("t,u_1,u_2\n0,0.1,0.2\n1,0.3,0.4\n".as_bytes()).unwrap();
        assert_eq!(rows, vec![vec![0.1, 0.2], vec![0.3, 0.4]]);
        assert!(read_inputs_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
