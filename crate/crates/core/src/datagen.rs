//! Surrogate plant and excitation signals used to produce training and
//! validation logs.
//!
//! The plant is a stable second-order resonator driven by a first-order lag
//! of a linear mix of the two inputs, followed by a static cubic output map
//! around the nominal frequency plus white measurement noise:
//!
//! ```text
//! v(k) = c·v(k−1) + (1−c)·(g·sat(u(k)))
//! s(k) = a1·s(k−1) + a2·s(k−2) + b0·v(k−1)
//! y(k) = y_nom + l·s(k) − q·s(k)³ + e(k)
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::data::TimeSeriesLog;
use crate::error::{Error, Result};

pub const SURROGATE_VERSION: u32 = 2;

/// Coefficients of the surrogate plant. The defaults are the versioned
/// reference configuration used by the acceptance suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateSystem {
    pub version: u32,
    pub nominal_output: f64,
    pub fs: f64,
    pub resonance_hz: f64,
    pub damping: f64,
    /// Static gain from the mixed input to the resonator output.
    pub dc_gain: f64,
    /// Pole of the input lag (0 = no lag).
    pub lag_pole: f64,
    pub input_mix: Vec<f64>,
    pub linear_gain: f64,
    pub cubic_gain: f64,
    pub noise_std: f64,
    pub saturation_limit: f64,
    pub blowup_bound: f64,
}

impl Default for SurrogateSystem {
    fn default() -> Self {
        Self {
            version: SURROGATE_VERSION,
            nominal_output: 50.0,
            fs: 80.0,
            resonance_hz: 3.0,
            damping: 0.3,
            dc_gain: 6.0,
            lag_pole: 0.5,
            input_mix: vec![1.0, 0.6],
            linear_gain: 0.2,
            cubic_gain: 0.5,
            noise_std: 0.011,
            saturation_limit: 0.1,
            blowup_bound: 1e6,
        }
    }
}

impl SurrogateSystem {
    /// Resonator recursion coefficients `(a1, a2, b0)`.
    pub fn resonator(&self) -> (f64, f64, f64) {
        let wn = 2.0 * PI * self.resonance_hz / self.fs;
        let wd = wn * (1.0 - self.damping * self.damping).sqrt();
        let r = (-self.damping * wn).exp();
        let a1 = 2.0 * r * wd.cos();
        let a2 = -r * r;
        (a1, a2, self.dc_gain * (1.0 - a1 - a2))
    }

    fn output_map(&self, s: f64) -> f64 {
        self.nominal_output + self.linear_gain * s - self.cubic_gain * s * s * s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExcitationKind {
    Chirp,
    Prs,
    Step,
    Mixed,
}

/// Two-channel (d/q) excitation sampled at the plant rate.
#[derive(Clone, Debug, PartialEq)]
pub struct ExcitationSignal {
    pub kind: ExcitationKind,
    pub amplitude: f64,
    pub samples: Vec<Vec<f64>>,
}

impl ExcitationSignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn zeros(len: usize, channels: usize) -> Self {
        Self {
            kind: ExcitationKind::Step,
            amplitude: 0.0,
            samples: vec![vec![0.0; channels]; len],
        }
    }

    /// Repeat every sample `factor` times (lowers the bit rate of a PRS).
    pub fn held(&self, factor: usize) -> Self {
        Self {
            kind: self.kind,
            amplitude: self.amplitude,
            samples: self
                .samples
                .iter()
                .flat_map(|s| std::iter::repeat_n(s.clone(), factor.max(1)))
                .collect(),
        }
    }

    /// Periodic extension / truncation to exactly `len` samples.
    pub fn tiled(&self, len: usize) -> Self {
        Self {
            kind: self.kind,
            amplitude: self.amplitude,
            samples: self.samples.iter().cycle().take(len).cloned().collect(),
        }
    }

    /// Sample-wise sum; the shorter signal is zero-padded.
    pub fn superpose(&self, other: &Self) -> Self {
        let len = self.len().max(other.len());
        let channels = self.samples.first().or(other.samples.first()).map_or(0, Vec::len);
        let samples = (0..len)
            .map(|k| {
                (0..channels)
                    .map(|c| {
                        self.samples.get(k).map_or(0.0, |s| s[c])
                            + other.samples.get(k).map_or(0.0, |s| s[c])
                    })
                    .collect()
            })
            .collect();
        Self {
            kind: ExcitationKind::Mixed,
            amplitude: self.amplitude + other.amplitude,
            samples,
        }
    }
}

/// Linear frequency sweep from `f0` to `f1` over `duration` seconds; channel
/// d carries the sine and channel q the cosine of the sweep phase.
pub fn chirp(f0: f64, f1: f64, duration: f64, fs: f64, amplitude: f64) -> Result<ExcitationSignal> {
    if f1 >= fs / 2.0 {
        return Err(Error::NyquistViolation {
            f1,
            nyquist: fs / 2.0,
        });
    }
    if !(f0 > 0.0 && f0 <= f1 && duration > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "chirp requires 0 < f0 <= f1 and a positive duration (got f0={f0}, f1={f1}, T={duration})"
        )));
    }
    let n = (duration * fs).round() as usize + 1;
    let sweep_rate = (f1 - f0) / duration;
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 / fs;
            let phase = 2.0 * PI * (f0 * t + 0.5 * sweep_rate * t * t);
            vec![amplitude * phase.sin(), amplitude * phase.cos()]
        })
        .collect();
    Ok(ExcitationSignal {
        kind: ExcitationKind::Chirp,
        amplitude,
        samples,
    })
}

/// Instantaneous frequency of [`chirp`] at time `t`.
pub fn chirp_frequency(f0: f64, f1: f64, duration: f64, t: f64) -> f64 {
    f0 + (f1 - f0) * t / duration
}

// Primitive feedback polynomials x^n + … + 1, listed as tap exponents.
const LFSR_TAPS: [&[u32]; 19] = [
    &[2, 1],
    &[3, 2],
    &[4, 3],
    &[5, 3],
    &[6, 5],
    &[7, 6],
    &[8, 6, 5, 4],
    &[9, 5],
    &[10, 7],
    &[11, 9],
    &[12, 6, 4, 1],
    &[13, 4, 3, 1],
    &[14, 5, 3, 1],
    &[15, 14],
    &[16, 15, 13, 4],
    &[17, 14],
    &[18, 11],
    &[19, 6, 2, 1],
    &[20, 17],
];

/// Fibonacci linear-feedback shift register producing a maximum-length
/// sequence of period `2^order − 1`.
#[derive(Clone, Debug)]
pub struct Lfsr {
    order: u32,
    mask: u32,
    state: u32,
}

impl Lfsr {
    pub fn new(order: u32, seed: u64) -> Result<Self> {
        if !(2..=20).contains(&order) {
            return Err(Error::InvalidArgument(format!(
                "LFSR order must lie in 2..=20, got {order}"
            )));
        }
        let period = (1u64 << order) - 1;
        let mask = LFSR_TAPS[order as usize - 2]
            .iter()
            .fold(0u32, |m, &tap| m | 1 << (order - tap));
        Ok(Self {
            order,
            mask,
            state: (seed % period + 1) as u32,
        })
    }

    pub fn period(&self) -> usize {
        (1usize << self.order) - 1
    }

    pub fn state(&self) -> u32 {
        self.state
    }

    pub fn next_bit(&mut self) -> bool {
        let out = self.state & 1 == 1;
        let feedback = (self.state & self.mask).count_ones() & 1;
        self.state = (self.state >> 1) | (feedback << (self.order - 1));
        out
    }
}

/// Maximum-length binary sequence taking values ±`amplitude`, one bit per
/// sample; the two channels use independently seeded registers.
pub fn prs(register_order: u32, n_samples: usize, amplitude: f64, seed: u64) -> Result<ExcitationSignal> {
    let mut d = Lfsr::new(register_order, seed)?;
    let mut q = Lfsr::new(register_order, seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1))?;
    let level = |b: bool| if b { amplitude } else { -amplitude };
    let samples = (0..n_samples)
        .map(|_| vec![level(d.next_bit()), level(q.next_bit())])
        .collect();
    Ok(ExcitationSignal {
        kind: ExcitationKind::Prs,
        amplitude,
        samples,
    })
}

/// Piecewise-constant signal with `n_steps` random levels per channel, each
/// held between 0.5 s and 1.5 s.
pub fn step_battery(n_steps: usize, fs: f64, amplitude_range: (f64, f64), seed: u64) -> Result<ExcitationSignal> {
    let (lo, hi) = amplitude_range;
    if !(lo <= hi) || n_steps == 0 {
        return Err(Error::InvalidArgument(format!(
            "step battery needs n_steps >= 1 and lo <= hi (got {n_steps}, [{lo}, {hi}])"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_hold = (0.5 * fs).ceil() as usize;
    let mut samples = Vec::new();
    for _ in 0..n_steps {
        let hold = rng.random_range(min_hold..=3 * min_hold);
        let level: Vec<f64> = (0..2)
            .map(|_| if lo == hi { lo } else { rng.random_range(lo..=hi) })
            .collect();
        samples.extend(std::iter::repeat_n(level, hold));
    }
    Ok(ExcitationSignal {
        kind: ExcitationKind::Step,
        amplitude: lo.abs().max(hi.abs()),
        samples,
    })
}

/// Run the plant from rest over the whole excitation.
pub fn simulate(system: &SurrogateSystem, input: &ExcitationSignal, seed: u64) -> Result<TimeSeriesLog> {
    if input.samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("excitation contains non-finite samples".into()));
    }
    let channels = input.samples.first().map_or(system.input_mix.len(), Vec::len);
    if channels != system.input_mix.len() {
        return Err(Error::DimensionMismatch {
            expected: system.input_mix.len(),
            got: channels,
        });
    }
    let (a1, a2, b0) = system.resonator();
    let c = system.lag_pole;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, system.noise_std.max(0.0))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;

    // [s(k), s(k−1), v(k), v(k−1)]
    let mut state = [0.0f64; 4];
    let mut y = Vec::with_capacity(input.len());
    for (k, u) in input.samples.iter().enumerate() {
        let drive: f64 = u
            .iter()
            .zip(&system.input_mix)
            .map(|(ui, g)| g * ui.clamp(-system.saturation_limit, system.saturation_limit))
            .sum();
        let s = a1 * state[0] + a2 * state[1] + b0 * state[2];
        let v = c * state[2] + (1.0 - c) * drive;
        state = [s, state[0], v, state[2]];
        let norm = state.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm <= system.blowup_bound) {
            return Err(Error::NumericalBlowup { step: k, norm });
        }
        let e = if system.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        y.push(system.output_map(s) + e);
    }
    TimeSeriesLog::new(y, input.samples.clone())
}

/// Chirp + PRS schedule for training/test data: repeated 0.1–15 Hz sweeps
/// superposed on a PRS whose bits are held three samples, each at half the
/// amplitude budget.
pub fn training_excitation(fs: f64, n_samples: usize, amplitude: f64, seed: u64) -> Result<ExcitationSignal> {
    let sweep = chirp(0.1, 15.0, 40.0, fs, 0.5 * amplitude)?.tiled(n_samples);
    let hold = 3;
    let bits = prs(11, n_samples.div_ceil(hold), 0.5 * amplitude, seed)?.held(hold);
    let mut mixed = sweep.superpose(&bits.tiled(n_samples));
    mixed.amplitude = amplitude;
    Ok(mixed)
}

/// Random-step schedule for validation data.
pub fn validation_excitation(fs: f64, n_samples: usize, amplitude: f64, seed: u64) -> Result<ExcitationSignal> {
    let avg_hold = fs; // 0.5–1.5 s holds average one second
    let n_steps = n_samples / avg_hold as usize + 2;
    let mut steps = step_battery(n_steps, fs, (-amplitude, amplitude), seed)?;
    while steps.len() < n_samples {
        let more = step_battery(n_steps, fs, (-amplitude, amplitude), seed.wrapping_add(steps.len() as u64))?;
        steps.samples.extend(more.samples);
    }
    steps.samples.truncate(n_samples);
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_chirp_is_a_sinusoid() {
        let sig = chirp(1.0, 1.0, 2.0, 80.0, 1.0).unwrap();
        for (k, s) in sig.samples.iter().enumerate() {
            let t = k as f64 / 80.0;
            assert!((s[0] - (2.0 * PI * t).sin()).abs() < 1e-12);
        }
        let peak = sig.samples.iter().map(|s| s[0].abs().max(s[1].abs())).fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chirp_band_and_nyquist() {
        let sig = chirp(0.1, 15.0, 10.0, 80.0, 0.05).unwrap();
        assert!(sig.samples.iter().flatten().all(|v| v.abs() <= 0.05 + 1e-15));
        assert_eq!(chirp_frequency(0.1, 15.0, 10.0, 0.0), 0.1);
        assert_eq!(chirp_frequency(0.1, 15.0, 10.0, 10.0), 15.0);
        assert!(matches!(chirp(0.1, 50.0, 1.0, 80.0, 1.0), Err(Error::NyquistViolation { .. })));
        assert!(matches!(chirp(0.1, 40.0, 1.0, 80.0, 1.0), Err(Error::NyquistViolation { .. })));
    }

    #[test]
    fn lfsr_is_maximum_length_for_every_order() {
        for order in 2..=20u32 {
            let mut reg = Lfsr::new(order, 0).unwrap();
            let start = reg.state();
            let period = reg.period();
            let mut steps = 0usize;
            loop {
                reg.next_bit();
                steps += 1;
                if reg.state() == start {
                    break;
                }
                assert!(steps < period, "order {order} repeats early");
            }
            assert_eq!(steps, period, "order {order}");
        }
    }

    #[test]
    fn prs_period_and_balance() {
        let sig = prs(3, 14, 1.0, 5).unwrap();
        let d: Vec<f64> = sig.samples.iter().map(|s| s[0]).collect();
        assert_eq!(d[..7], d[7..]);

        // One period of the order-4 sequence: 8 highs and 7 lows.
        let sig = prs(4, 15, 1.0, 3).unwrap();
        let highs = sig.samples.iter().filter(|s| s[0] > 0.0).count();
        assert_eq!((highs, 15 - highs), (8, 7));

        let sig = prs(7, 500, 0.05, 1).unwrap();
        assert!(sig.samples.iter().flatten().all(|&v| v == 0.05 || v == -0.05));
    }

    #[test]
    fn step_battery_properties() {
        let one = step_battery(1, 80.0, (-0.05, 0.05), 1).unwrap();
        assert!(one.samples.iter().all(|s| *s == one.samples[0]));
        assert!(one.len() >= 40);

        let a = step_battery(20, 80.0, (-0.05, 0.05), 9).unwrap();
        let b = step_battery(20, 80.0, (-0.05, 0.05), 9).unwrap();
        assert_eq!(a, b);
        assert!(a.samples.iter().flatten().all(|v| v.abs() <= 0.05));

        // Every run of a constant level lasts at least half a second.
        let mut run = 1;
        let mut runs = Vec::new();
        for k in 1..a.len() {
            if a.samples[k] == a.samples[k - 1] {
                run += 1;
            } else {
                runs.push(run);
                run = 1;
            }
        }
        assert!(runs.iter().all(|&r| r >= 40));
    }

    #[test]
    fn equilibrium_without_input_or_noise() {
        let sys = SurrogateSystem { noise_std: 0.0, ..Default::default() };
        let log = simulate(&sys, &ExcitationSignal::zeros(500, 2), 0).unwrap();
        assert!(log.y.iter().all(|&v| v == 50.0));
    }

    #[test]
    fn impulse_response_decays() {
        let sys = SurrogateSystem { noise_std: 0.0, ..Default::default() };
        let mut input = ExcitationSignal::zeros(2000, 2);
        input.samples[0] = vec![0.05, 0.05];
        let log = simulate(&sys, &input, 0).unwrap();
        assert!(log.y.iter().any(|&v| (v - 50.0).abs() > 1e-3));
        assert!(log.y[400..].iter().all(|&v| (v - 50.0).abs() < 1e-3));
    }

    #[test]
    fn simulation_is_deterministic() {
        let sys = SurrogateSystem::default();
        let input = training_excitation(80.0, 1000, 0.05, 4).unwrap();
        let a = simulate(&sys, &input, 11).unwrap();
        let b = simulate(&sys, &input, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, simulate(&sys, &input, 12).unwrap());
    }

    #[test]
    fn excitation_schedules_respect_amplitude() {
        let train = training_excitation(80.0, 5000, 0.05, 2).unwrap();
        assert_eq!(train.len(), 5000);
        assert!(train.samples.iter().flatten().all(|v| v.abs() <= 0.05 + 1e-12));
        let val = validation_excitation(80.0, 3000, 0.05, 2).unwrap();
        assert_eq!(val.len(), 3000);
        assert!(val.samples.iter().flatten().all(|v| v.abs() <= 0.05));
    }

    #[test]
    fn blowup_detected_for_unstable_coefficients() {
        let sys = SurrogateSystem { damping: -0.2, noise_std: 0.0, blowup_bound: 1e3, ..Default::default() };
        let input = training_excitation(80.0, 20_000, 0.05, 1).unwrap();
        assert!(matches!(simulate(&sys, &input, 0), Err(Error::NumericalBlowup { .. })));
    }

    #[test]
    fn zero_input_noise_level() {
        let log = simulate(&SurrogateSystem::default(), &ExcitationSignal::zeros(20_000, 2), 7).unwrap();
        let mean = log.y.iter().sum::<f64>() / log.len() as f64;
        let std = (log.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / log.len() as f64).sqrt();
        assert!((0.010..=0.030).contains(&std), "std {std}");
        assert!((mean - 50.0).abs() < 1e-3);
    }

    #[test]
    fn chirp_driven_output_energy_is_below_15_hz() {
        use rustfft::{num_complex::Complex, FftPlanner};
        let n = 1 << 14;
        let input = chirp(0.1, 15.0, 40.0, 80.0, 0.05).unwrap().tiled(n);
        let sys = SurrogateSystem { noise_std: 0.0, ..Default::default() };
        let log = simulate(&sys, &input, 3).unwrap();
        let mean = log.y.iter().sum::<f64>() / n as f64;
        let mut buf: Vec<Complex<f64>> = log.y.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
        FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
        let cutoff = (15.0 / 80.0 * n as f64) as usize;
        let power = |r: std::ops::Range<usize>| buf[r].iter().map(|c| c.norm_sqr()).sum::<f64>();
        let fraction = power(1..cutoff + 1) / power(1..n / 2);
        assert!(fraction > 0.99, "fraction {fraction}");
    }
}
