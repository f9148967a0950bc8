//! Time-series logs, z-score scaling, ARX regressors and dataset splits.

use std::collections::HashSet;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled record of a scalar output and an `m`-channel input.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesLog {
    pub t: Vec<u64>,
    pub y: Vec<f64>,
    /// `u[k]` holds the `m` input channels at time `t[k]`.
    pub u: Vec<Vec<f64>>,
}

impl TimeSeriesLog {
    pub fn new(y: Vec<f64>, u: Vec<Vec<f64>>) -> Result<Self> {
        if y.len() != u.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                got: u.len(),
            });
        }
        let m = u.first().map_or(0, Vec::len);
        if let Some(row) = u.iter().find(|row| row.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: row.len(),
            });
        }
        if y.iter().chain(u.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("log contains non-finite values".into()));
        }
        let t = (0..y.len() as u64).collect();
        Ok(Self { t, y, u })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.u.first().map_or(0, Vec::len)
    }

    /// Sub-log over `range`, keeping the original time stamps.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            t: self.t[range.clone()].to_vec(),
            y: self.y[range.clone()].to_vec(),
            u: self.u[range].to_vec(),
        }
    }

    /// Channel `c` as a column: channel 0 is the output, `1..=m` the inputs.
    fn channel(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |k| if c == 0 { self.y[k] } else { self.u[k][c - 1] })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string(), "y".to_string()];
        header.extend((1..=self.input_dim()).map(|i| format!("u_{i}")));
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut rec = vec![self.t[k].to_string(), self.y[k].to_string()];
            rec.extend(self.u[k].iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 2 || &header[0] != "t" || &header[1] != "y" {
            return Err(Error::InvalidArgument(
                "CSV header must start with `t,y`".into(),
            ));
        }
        let m = header.len() - 2;
        let (mut t, mut y, mut u) = (Vec::new(), Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("bad number `{}`: {e}", &rec[i])))
            };
            t.push(parse(0)? as u64);
            y.push(parse(1)?);
            u.push((0..m).map(|j| parse(j + 2)).collect::<Result<Vec<_>>>()?);
        }
        let mut log = Self::new(y, u)?;
        log.t = t;
        Ok(log)
    }
}

/// Per-channel z-score parameters. Channel 0 is the output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let mut mean = Vec::with_capacity(columns.len());
        let mut std = Vec::with_capacity(columns.len());
        for (c, col) in columns.iter().enumerate() {
            let n = col.len() as f64;
            if col.len() < 2 {
                return Err(Error::ConstantChannel { channel: c });
            }
            let mu = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0);
            let sd = var.sqrt();
            if !(sd > 0.0) || sd <= 1e-14 * mu.abs() {
                return Err(Error::ConstantChannel { channel: c });
            }
            mean.push(mu);
            std.push(sd);
        }
        Ok(Self { mean, std })
    }

    /// Fit on every sample of a log.
    pub fn fit(log: &TimeSeriesLog) -> Result<Self> {
        let cols: Vec<Vec<f64>> = (0..=log.input_dim())
            .map(|c| log.channel(c).collect())
            .collect();
        Self::from_columns(&cols)
    }

    /// Fit on the time steps that anchor the given samples (their current
    /// output and input), so statistics only see the training split.
    pub fn fit_samples(samples: &[&RegressorSample], layout: &RegressorLayout) -> Result<Self> {
        let mut cols = vec![Vec::with_capacity(samples.len()); layout.m + 1];
        for s in samples {
            cols[0].push(s.z[0]);
            for j in 0..layout.m {
                cols[j + 1].push(s.z[layout.input_offset(0) + j]);
            }
        }
        Self::from_columns(&cols)
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_y(&self, y: f64) -> f64 {
        (y - self.mean[0]) / self.std[0]
    }

    pub fn inverse_y(&self, y: f64) -> f64 {
        y * self.std[0] + self.mean[0]
    }

    pub fn transform_u(&self, channel: usize, u: f64) -> f64 {
        (u - self.mean[channel + 1]) / self.std[channel + 1]
    }

    pub fn transform(&self, log: &TimeSeriesLog) -> Result<TimeSeriesLog> {
        self.check_channels(log)?;
        Ok(TimeSeriesLog {
            t: log.t.clone(),
            y: log.y.iter().map(|&v| self.transform_y(v)).collect(),
            u: log
                .u
                .iter()
                .map(|row| row.iter().enumerate().map(|(j, &v)| self.transform_u(j, v)).collect())
                .collect(),
        })
    }

    pub fn inverse_transform(&self, log: &TimeSeriesLog) -> Result<TimeSeriesLog> {
        self.check_channels(log)?;
        Ok(TimeSeriesLog {
            t: log.t.clone(),
            y: log.y.iter().map(|&v| self.inverse_y(v)).collect(),
            u: log
                .u
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .map(|(j, &v)| v * self.std[j + 1] + self.mean[j + 1])
                        .collect()
                })
                .collect(),
        })
    }

    /// Standardize a raw regressor sample laid out per `layout`.
    pub fn transform_sample(&self, sample: &RegressorSample, layout: &RegressorLayout) -> RegressorSample {
        let mut z = sample.z.clone();
        for v in z.iter_mut().take(layout.n_a + 1) {
            *v = self.transform_y(*v);
        }
        for lag in 0..=layout.n_b {
            let off = layout.input_offset(lag);
            for j in 0..layout.m {
                z[off + j] = self.transform_u(j, z[off + j]);
            }
        }
        RegressorSample {
            z,
            y: self.transform_y(sample.y),
            time: sample.time,
        }
    }

    fn check_channels(&self, log: &TimeSeriesLog) -> Result<()> {
        if log.input_dim() + 1 != self.channels() {
            return Err(Error::DimensionMismatch {
                expected: self.channels(),
                got: log.input_dim() + 1,
            });
        }
        Ok(())
    }
}

/// Fit a scaler on the whole log and return the standardized copy.
pub fn standardize(log: &TimeSeriesLog) -> Result<(TimeSeriesLog, Scaler)> {
    let scaler = Scaler::fit(log)?;
    Ok((scaler.transform(log)?, scaler))
}

/// ARX orders and input width. The regressor at time `t` is
/// `[y(t) … y(t−n_a), u(t) … u(t−n_b)]`, inputs stored lag by lag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressorLayout {
    pub n_a: usize,
    pub n_b: usize,
    pub m: usize,
}

impl RegressorLayout {
    pub fn new(n_a: usize, n_b: usize, m: usize) -> Self {
        Self { n_a, n_b, m }
    }

    pub fn dim(&self) -> usize {
        (self.n_a + 1) + self.m * (self.n_b + 1)
    }

    /// Longest lag referenced by a regressor.
    pub fn max_lag(&self) -> usize {
        self.n_a.max(self.n_b)
    }

    /// Index of input channel 0 at lag `lag` inside a regressor.
    pub fn input_offset(&self, lag: usize) -> usize {
        self.n_a + 1 + lag * self.m
    }

    /// Regressor anchored at index `k` of `log`.
    pub fn regressor_at(&self, log: &TimeSeriesLog, k: usize) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.dim());
        z.extend((0..=self.n_a).map(|lag| log.y[k - lag]));
        for lag in 0..=self.n_b {
            z.extend_from_slice(&log.u[k - lag]);
        }
        z
    }
}

/// One regressor vector with its next-step target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressorSample {
    pub z: Vec<f64>,
    pub y: f64,
    /// Log index the regressor is anchored at; the target is `y(time + 1)`.
    pub time: usize,
}

pub fn build_regressors(log: &TimeSeriesLog, n_a: usize, n_b: usize) -> Result<Vec<RegressorSample>> {
    let layout = RegressorLayout::new(n_a, n_b, log.input_dim());
    let first = layout.max_lag();
    let needed = first + 2;
    if log.len() < needed {
        return Err(Error::LogTooShort {
            len: log.len(),
            needed,
        });
    }
    Ok((first..log.len() - 1)
        .map(|k| RegressorSample {
            z: layout.regressor_at(log, k),
            y: log.y[k + 1],
            time: k,
        })
        .collect())
}

/// Drop samples whose regressor repeats an earlier one bit-for-bit; kriging
/// needs distinct coordinates.
pub fn dedup_samples(samples: Vec<RegressorSample>) -> Vec<RegressorSample> {
    let mut seen = HashSet::with_capacity(samples.len());
    samples
        .into_iter()
        .filter(|s| seen.insert(s.z.iter().map(|v| v.to_bits()).collect::<Vec<u64>>()))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Validation data comes from a separate log, so this is usually empty.
    pub validation: Vec<usize>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Random train/test partition of `total` sample indices.
pub fn split(total: usize, seed: u64, n_test: usize) -> Result<DatasetSplit> {
    if n_test >= total {
        return Err(Error::InvalidArgument(format!(
            "n_test = {n_test} must be smaller than the {total} available samples"
        )));
    }
    let mut idx: Vec<usize> = (0..total).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(DatasetSplit {
        train,
        test,
        validation: Vec::new(),
        seed,
    })
}
