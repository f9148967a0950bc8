//! Offline model library: zoning, per-zone whitening and variogram fitting,
//! cached factorizations, and JSON persistence.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::{build_regressors, dedup_samples, split, DatasetSplit, RegressorLayout, RegressorSample, Scaler, TimeSeriesLog};
use crate::error::{Error, Result};
use crate::kadmm::{spectral_decompose, AdmmSettings, SpectralForm};
use crate::kriging::{constraint_matrix, factor_zone_kkt, UkFactor};
use crate::preprocess::{balanced_kmeans, fit_trend, whiten, Whitening};
use crate::variogram::{empirical_semivariogram, fit_exponential, gamma_matrix, EmpiricalVariogram, VariogramModel};

pub const LIBRARY_FORMAT_VERSION: u32 = 1;

/// Solver and model settings that travel with a library.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LibraryParams {
    pub layout: RegressorLayout,
    pub rho: f64,
    pub epsilon: f64,
    pub beta_cap: f64,
    pub eps_pri: f64,
    pub eps_dual: f64,
    pub max_iter: usize,
    pub threshold: f64,
    pub n_lags: usize,
}

impl LibraryParams {
    pub fn from_config(cfg: &RunConfig, m: usize) -> Self {
        Self {
            layout: RegressorLayout::new(cfg.n_a, cfg.n_b, m),
            rho: cfg.rho,
            epsilon: cfg.epsilon,
            beta_cap: cfg.effective_beta_cap(),
            eps_pri: cfg.eps_pri,
            eps_dual: cfg.eps_dual,
            max_iter: cfg.max_iter,
            threshold: cfg.threshold,
            n_lags: cfg.n_lags,
        }
    }

    pub fn admm(&self) -> AdmmSettings {
        AdmmSettings {
            eps_pri: self.eps_pri,
            eps_dual: self.eps_dual,
            max_iter: self.max_iter,
        }
    }
}

/// Persisted part of one zone. Everything else is rebuilt at load time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoneRecord {
    /// Standardized regressors.
    pub coords: Vec<Vec<f64>>,
    /// Standardized targets.
    pub outputs: Vec<f64>,
    pub centroid: Vec<f64>,
    /// Whitening matrix, row-major.
    pub transform: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
    pub trend_intercept: f64,
    pub trend_slope: Vec<f64>,
    pub variogram: VariogramModel,
    pub fit_loss: f64,
    pub degenerate_fit: bool,
    pub empirical: EmpiricalVariogram,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LibraryFile {
    pub format_version: u32,
    pub params: LibraryParams,
    pub scaler: Scaler,
    pub zones: Vec<ZoneRecord>,
}

/// One validity zone with its cached query-independent data.
#[derive(Clone, Debug)]
pub struct ClusterModel {
    pub record: ZoneRecord,
    pub whitening: Whitening,
    pub coords_iso: Vec<Vec<f64>>,
    pub gamma_d: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub spectral: SpectralForm,
    pub uk: UkFactor,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZoneDiagnostics {
    pub zone: usize,
    pub size: usize,
    pub theta: f64,
    pub phi: f64,
    pub varpi: f64,
    pub fit_loss: f64,
    /// `max|d_i| / min|d_i|` over the eigenvalues of `−Γ_D`.
    pub eigen_spread: f64,
    pub min_eigenvalue: f64,
}

impl ClusterModel {
    pub fn assemble(record: ZoneRecord, rho: f64) -> Result<Self> {
        let dim = record.centroid.len();
        if record.transform.len() != dim || record.transform.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: record.transform.len(),
            });
        }
        let whitening = Whitening {
            centroid: DVector::from_column_slice(&record.centroid),
            transform: DMatrix::from_fn(dim, dim, |i, j| record.transform[i][j]),
            variances: DVector::from_column_slice(&record.variances),
        };
        let coords_iso: Vec<Vec<f64>> = record.coords.iter().map(|z| whitening.apply(z)).collect();
        let gamma_d = gamma_matrix(&record.variogram, &coords_iso);
        let r = constraint_matrix(&coords_iso);
        let uk = factor_zone_kkt(&gamma_d, &r)?;
        let spectral = spectral_decompose(&gamma_d, &r, rho)?;
        Ok(Self {
            record,
            whitening,
            coords_iso,
            gamma_d,
            r,
            spectral,
            uk,
        })
    }

    pub fn size(&self) -> usize {
        self.record.outputs.len()
    }

    pub fn centroid(&self) -> &[f64] {
        &self.record.centroid
    }

    pub fn diagnostics(&self, zone: usize) -> ZoneDiagnostics {
        let d = &self.spectral.d;
        let min_abs = d.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        let v = self.record.variogram;
        ZoneDiagnostics {
            zone,
            size: self.size(),
            theta: v.theta,
            phi: v.phi,
            varpi: v.varpi,
            fit_loss: self.record.fit_loss,
            eigen_spread: d.amax() / min_abs,
            min_eigenvalue: d.min(),
        }
    }
}

/// Fit one zone from standardized samples.
pub fn fit_zone(coords: Vec<Vec<f64>>, outputs: Vec<f64>, n_lags: usize, rho: f64) -> Result<ClusterModel> {
    let (w, iso) = whiten(&coords)?;
    let trend = fit_trend(&iso, &outputs)?;
    let empirical = empirical_semivariogram(&iso, &trend.residuals, n_lags)?;
    let fit = fit_exponential(&empirical)?;
    if fit.degenerate {
        log::warn!("degenerate variogram fit (all bins equal)");
    }
    let dim = w.centroid.len();
    let record = ZoneRecord {
        coords,
        outputs,
        centroid: w.centroid.as_slice().to_vec(),
        transform: (0..dim).map(|i| w.transform.row(i).iter().copied().collect()).collect(),
        variances: w.variances.as_slice().to_vec(),
        trend_intercept: trend.intercept,
        trend_slope: trend.slope,
        variogram: fit.model,
        fit_loss: fit.loss,
        degenerate_fit: fit.degenerate,
        empirical,
    };
    ClusterModel::assemble(record, rho)
}

#[derive(Clone, Debug)]
pub struct ModelLibrary {
    pub params: LibraryParams,
    pub scaler: Scaler,
    pub zones: Vec<ClusterModel>,
}

impl ModelLibrary {
    pub fn n_zones(&self) -> usize {
        self.zones.len()
    }

    pub fn layout(&self) -> RegressorLayout {
        self.params.layout
    }

    pub fn diagnostics(&self) -> Vec<ZoneDiagnostics> {
        self.zones.iter().enumerate().map(|(j, z)| z.diagnostics(j)).collect()
    }

    pub fn to_file(&self) -> LibraryFile {
        LibraryFile {
            format_version: LIBRARY_FORMAT_VERSION,
            params: self.params.clone(),
            scaler: self.scaler.clone(),
            zones: self.zones.iter().map(|z| z.record.clone()).collect(),
        }
    }

    pub fn from_file(file: LibraryFile) -> Result<Self> {
        if file.format_version != LIBRARY_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "library format version {} is not supported (expected {LIBRARY_FORMAT_VERSION})",
                file.format_version
            )));
        }
        if file.zones.is_empty() {
            return Err(Error::Config("library has no zones".into()));
        }
        let rho = file.params.rho;
        let zones = file
            .zones
            .into_par_iter()
            .enumerate()
            .map(|(j, rec)| ClusterModel::assemble(rec, rho).map_err(|e| e.in_zone(j)))
            .collect::<Result<Vec<_>>>()?;
        let dim = file.params.layout.dim();
        if let Some(j) = zones.iter().position(|z| z.centroid().len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: zones[j].centroid().len(),
            }
            .in_zone(j));
        }
        Ok(Self {
            params: file.params,
            scaler: file.scaler,
            zones,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Standardized training and test samples drawn from one raw log.
#[derive(Clone, Debug)]
pub struct TrainingData {
    pub scaler: Scaler,
    pub layout: RegressorLayout,
    pub train: Vec<RegressorSample>,
    pub test: Vec<RegressorSample>,
    pub split: DatasetSplit,
}

/// Regressors from a raw log, duplicates dropped, split into train/test, and
/// standardized with statistics from the training split only.
pub fn prepare_training(log: &TimeSeriesLog, cfg: &RunConfig) -> Result<TrainingData> {
    let layout = RegressorLayout::new(cfg.n_a, cfg.n_b, log.input_dim());
    let samples = dedup_samples(build_regressors(log, cfg.n_a, cfg.n_b)?);
    let n_test = cfg.n_test.min(samples.len().saturating_sub(1));
    let split = split(samples.len(), cfg.split_seed, n_test)?;
    let raw_train: Vec<&RegressorSample> = split.train.iter().map(|&i| &samples[i]).collect();
    let scaler = Scaler::fit_samples(&raw_train, &layout)?;
    let train = raw_train.iter().map(|s| scaler.transform_sample(s, &layout)).collect();
    let test = split.test.iter().map(|&i| scaler.transform_sample(&samples[i], &layout)).collect();
    Ok(TrainingData {
        scaler,
        layout,
        train,
        test,
        split,
    })
}

/// Zone the standardized training samples and fit every zone in parallel.
pub fn build_library(train: &[RegressorSample], scaler: Scaler, params: LibraryParams, k: usize, seed: u64, kmeans_max_iter: usize) -> Result<ModelLibrary> {
    let dim = params.layout.dim();
    if let Some(s) = train.iter().find(|s| s.z.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: s.z.len() });
    }
    let points: Vec<Vec<f64>> = train.iter().map(|s| s.z.clone()).collect();
    let clustering = balanced_kmeans(&points, k, seed, kmeans_max_iter)?;
    let members = clustering.members();
    let zones = members
        .into_par_iter()
        .enumerate()
        .map(|(j, idx)| {
            let coords = idx.iter().map(|&i| train[i].z.clone()).collect();
            let outputs = idx.iter().map(|&i| train[i].y).collect();
            fit_zone(coords, outputs, params.n_lags, params.rho).map_err(|e| e.in_zone(j))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelLibrary { params, scaler, zones })
}

/// `prepare_training` followed by `build_library` with the configured zone count.
pub fn build_from_log(log: &TimeSeriesLog, cfg: &RunConfig) -> Result<(ModelLibrary, TrainingData)> {
    let data = prepare_training(log, cfg)?;
    let k = cfg.zones_for(data.train.len());
    let params = LibraryParams::from_config(cfg, log.input_dim());
    let lib = build_library(&data.train, data.scaler.clone(), params, k, cfg.cluster_seed, cfg.kmeans_max_iter)?;
    Ok((lib, data))
}
