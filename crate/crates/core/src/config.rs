//! Run configuration: a flat TOML document whose keys double as command-line
//! flags.

use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kadmm::AdmmSettings;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_a: usize,
    pub n_b: usize,
    pub n_p: usize,
    pub f_s: f64,
    /// Number of zones; 0 picks `round(N / zone_size)`.
    pub k: usize,
    pub zone_size: usize,
    pub rho: f64,
    pub epsilon: f64,
    /// Upper bound on each penalty; 0 means `epsilon / 1e-8`.
    pub beta_cap: f64,
    pub eps_pri: f64,
    pub eps_dual: f64,
    pub max_iter: usize,
    pub threshold: f64,
    pub n_lags: usize,
    pub kmeans_max_iter: usize,
    pub amplitude: f64,
    pub train_len: usize,
    pub validation_len: usize,
    pub n_test: usize,
    pub n_trajectories: usize,
    pub data_seed: u64,
    pub validation_seed: u64,
    pub split_seed: u64,
    pub cluster_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_a: 2,
            n_b: 4,
            n_p: 40,
            f_s: 80.0,
            k: 0,
            zone_size: 250,
            rho: 0.5,
            epsilon: 5e-5,
            beta_cap: 0.0,
            eps_pri: 1e-5,
            eps_dual: 1e-5,
            max_iter: 5000,
            threshold: 1e-4,
            n_lags: 200,
            kmeans_max_iter: 100,
            amplitude: 0.05,
            train_len: 30_313,
            validation_len: 24_000,
            n_test: 500,
            n_trajectories: 200,
            data_seed: 1,
            validation_seed: 2,
            split_seed: 3,
            cluster_seed: 4,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_p", self.n_p as f64),
            ("f_s", self.f_s),
            ("zone_size", self.zone_size as f64),
            ("rho", self.rho),
            ("eps_pri", self.eps_pri),
            ("eps_dual", self.eps_dual),
            ("max_iter", self.max_iter as f64),
            ("n_lags", self.n_lags as f64),
            ("kmeans_max_iter", self.kmeans_max_iter as f64),
            ("amplitude", self.amplitude),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("epsilon", self.epsilon), ("beta_cap", self.beta_cap), ("threshold", self.threshold)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn admm(&self) -> AdmmSettings {
        AdmmSettings {
            eps_pri: self.eps_pri,
            eps_dual: self.eps_dual,
            max_iter: self.max_iter,
        }
    }

    pub fn effective_beta_cap(&self) -> f64 {
        if self.beta_cap > 0.0 {
            self.beta_cap
        } else {
            crate::kriging::default_beta_cap(self.epsilon)
        }
    }

    /// Zone count for `n` training samples.
    pub fn zones_for(&self, n: usize) -> usize {
        let auto = ((n as f64) / self.zone_size as f64).round().max(1.0) as usize;
        let k = if self.k == 0 { auto } else { self.k };
        if self.k != 0 && (n as f64 / k as f64 - self.zone_size as f64).abs() > 0.2 * self.zone_size as f64 {
            log::warn!(
                "K = {k} gives about {} points per zone, target is {}",
                n / k.max(1),
                self.zone_size
            );
        }
        k.min(n).max(1)
    }

    pub fn apply(&mut self, o: &ConfigOverrides) -> Result<()> {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { self.$f = v; } )* };
        }
        set!(
            n_a, n_b, n_p, f_s, k, zone_size, rho, epsilon, beta_cap, eps_pri, eps_dual, max_iter, threshold, n_lags,
            kmeans_max_iter, amplitude, train_len, validation_len, n_test, n_trajectories, data_seed, validation_seed,
            split_seed, cluster_seed
        );
        self.validate()
    }
}

/// One optional flag per configuration key.
#[derive(Args, Clone, Debug, Default)]
#[command(rename_all = "snake_case")]
pub struct ConfigOverrides {
    #[arg(long, global = true)]
    pub n_a: Option<usize>,
    #[arg(long, global = true)]
    pub n_b: Option<usize>,
    #[arg(long, global = true)]
    pub n_p: Option<usize>,
    #[arg(long, global = true)]
    pub f_s: Option<f64>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub zone_size: Option<usize>,
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub beta_cap: Option<f64>,
    #[arg(long, global = true)]
    pub eps_pri: Option<f64>,
    #[arg(long, global = true)]
    pub eps_dual: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[arg(long, global = true)]
    pub n_lags: Option<usize>,
    #[arg(long, global = true)]
    pub kmeans_max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub amplitude: Option<f64>,
    #[arg(long, global = true)]
    pub train_len: Option<usize>,
    #[arg(long, global = true)]
    pub validation_len: Option<usize>,
    #[arg(long, global = true)]
    pub n_test: Option<usize>,
    #[arg(long, global = true)]
    pub n_trajectories: Option<usize>,
    #[arg(long, global = true)]
    pub data_seed: Option<u64>,
    #[arg(long, global = true)]
    pub validation_seed: Option<u64>,
    #[arg(long, global = true)]
    pub split_seed: Option<u64>,
    #[arg(long, global = true)]
    pub cluster_seed: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_constants() {
        let c = RunConfig::default();
        assert_eq!((c.n_a, c.n_b, c.n_p), (2, 4, 40));
        assert_eq!(c.f_s, 80.0);
        assert_eq!(c.rho, 0.5);
        assert_eq!(c.epsilon, 5e-5);
        assert_eq!((c.eps_pri, c.eps_dual), (1e-5, 1e-5));
        assert_eq!(c.threshold, 1e-4);
        assert_eq!(c.n_lags, 200);
        assert_eq!(c.n_test, 500);
        assert_eq!(c.zones_for(29_798), 119);
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
        let partial = RunConfig::from_toml("rho = 1.5\nn_p = 80\n").unwrap();
        assert_eq!(partial.rho, 1.5);
        assert_eq!(partial.n_p, 80);
        assert_eq!(partial.n_a, 2);
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        assert!(RunConfig::from_toml("rho = -1.0").is_err());
    }

    #[test]
    fn overrides() {
        let mut c = RunConfig::default();
        let o = ConfigOverrides {
            epsilon: Some(0.0),
            k: Some(3),
            ..Default::default()
        };
        c.apply(&o).unwrap();
        assert_eq!(c.epsilon, 0.0);
        assert_eq!(c.zones_for(900), 3);
        assert!(c.apply(&ConfigOverrides { rho: Some(0.0), ..Default::default() }).is_err());
    }
}
