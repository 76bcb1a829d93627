//! Amplitude spectra and short-time Fourier transforms of state signals.
//!
//! Signals are mean-removed before transforming. One-sided amplitudes are
//! scaled so that a unit-amplitude sinusoid sitting on a bin center reads 1.0:
//! interior bins get `2|X_k|/N`, the DC and Nyquist bins `|X_k|/N`. STFT
//! frames use the same convention with `N` replaced by the window sum.
//! Magnitudes are stored raw; log scaling is left to presentation.

use std::f64::consts::{PI, TAU};
use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::dynamics::{simulate, SimulationConfig};
use crate::error::{Error, Result};
use crate::matrix::SkewMatrix;
use crate::table;

/// Shortest signal accepted by [`amplitude_spectrum`].
pub const MIN_SIGNAL_LEN: usize = 16;
pub const DEFAULT_STFT_WINDOW: usize = 4096;
pub const DEFAULT_STFT_HOP: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub freqs_hz: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub sample_rate_hz: f64,
    /// 0-based index of the state component the signal came from.
    pub source_component: usize,
}

impl SpectrumReport {
    pub fn bin_width_hz(&self) -> f64 {
        self.freqs_hz.get(1).copied().unwrap_or(self.sample_rate_hz)
    }

    /// Largest non-DC bin as `(index, frequency)`.
    pub fn peak(&self) -> (usize, f64) {
        let idx = argmax(&self.amplitude[1..]) + 1;
        (idx, self.freqs_hz[idx])
    }

    /// Tallest non-DC bin divided by the second tallest one.
    pub fn peak_ratio(&self) -> f64 {
        let (mut first, mut second) = (0.0f64, 0.0f64);
        for &a in &self.amplitude[1..] {
            if a > first {
                second = first;
                first = a;
            } else if a > second {
                second = a;
            }
        }
        if second > 0.0 {
            first / second
        } else {
            f64::INFINITY
        }
    }

    /// CSV with header `freq_hz,amplitude`.
    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> io::Result<()> {
        table::write_header(w, &["freq_hz", "amplitude"])?;
        for (f, a) in self.freqs_hz.iter().zip(&self.amplitude) {
            table::write_row(w, [*f, *a])?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StftReport {
    /// Frame centers.
    pub times_s: Vec<f64>,
    pub freqs_hz: Vec<f64>,
    /// `magnitude[frame][bin]`.
    pub magnitude: Vec<Vec<f64>>,
    pub window_len: usize,
    pub hop: usize,
}

impl StftReport {
    /// Frequency of the tallest non-DC bin in each frame.
    pub fn frame_peaks(&self) -> Vec<f64> {
        self.magnitude
            .iter()
            .map(|frame| self.freqs_hz[argmax(&frame[1..]) + 1])
            .collect()
    }

    /// Long-form CSV with header `t,freq_hz,magnitude`.
    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> io::Result<()> {
        table::write_header(w, &["t", "freq_hz", "magnitude"])?;
        for (t, frame) in self.times_s.iter().zip(&self.magnitude) {
            for (f, m) in self.freqs_hz.iter().zip(frame) {
                table::write_row(w, [*t, *f, *m])?;
            }
        }
        Ok(())
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

fn check_rate(sample_rate_hz: f64) -> Result<()> {
    if sample_rate_hz.is_finite() && sample_rate_hz > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("sample rate must be finite and > 0, got {sample_rate_hz}")))
    }
}

fn mean_removed(signal: &[f64]) -> Result<Vec<f64>> {
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("signal"));
    }
    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    Ok(signal.iter().map(|v| v - mean).collect())
}

/// One-sided magnitudes `c_k·|X_k| / norm` for `k = 0..=n/2`.
fn one_sided(spectrum: &[Complex64], norm: f64) -> Vec<f64> {
    let n = spectrum.len();
    (0..=n / 2)
        .map(|k| {
            let edge = k == 0 || (n.is_multiple_of(2) && k == n / 2);
            let c = if edge { 1.0 } else { 2.0 };
            c * spectrum[k].norm() / norm
        })
        .collect()
}

/// Full-signal DFT amplitude spectrum.
pub fn amplitude_spectrum(signal: &[f64], sample_rate_hz: f64) -> Result<SpectrumReport> {
    if signal.len() < MIN_SIGNAL_LEN {
        return Err(Error::invalid(format!(
            "signal needs at least {MIN_SIGNAL_LEN} samples, got {}",
            signal.len()
        )));
    }
    check_rate(sample_rate_hz)?;
    let centered = mean_removed(signal)?;
    let n = centered.len();
    let mut buf: Vec<Complex64> = centered.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let amplitude = one_sided(&buf, n as f64);
    let freqs_hz = (0..amplitude.len()).map(|k| k as f64 * sample_rate_hz / n as f64).collect();
    Ok(SpectrumReport {
        freqs_hz,
        amplitude,
        sample_rate_hz,
        source_component: 0,
    })
}

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (TAU * i as f64 / n as f64).cos())
        .collect()
}

/// Hann-windowed STFT with frames starting every `hop` samples; only frames
/// that fit entirely inside the signal are kept.
pub fn stft(signal: &[f64], sample_rate_hz: f64, window_len: usize, hop: usize) -> Result<StftReport> {
    check_rate(sample_rate_hz)?;
    if window_len < 2 {
        return Err(Error::invalid("window_len must be at least 2"));
    }
    if window_len > signal.len() {
        return Err(Error::invalid(format!(
            "window of {window_len} samples is longer than the signal ({})",
            signal.len()
        )));
    }
    if hop == 0 || hop > window_len {
        return Err(Error::invalid(format!("hop must be in 1..={window_len}, got {hop}")));
    }
    let centered = mean_removed(signal)?;
    let window = hann_window(window_len);
    let window_sum: f64 = window.iter().sum();
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(window_len);

    let starts: Vec<usize> = (0..=signal.len() - window_len).step_by(hop).collect();
    let magnitude: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&start| {
            let mut buf: Vec<Complex64> = centered[start..start + window_len]
                .iter()
                .zip(&window)
                .map(|(s, w)| Complex64::new(s * w, 0.0))
                .collect();
            fft.process(&mut buf);
            one_sided(&buf, window_sum)
        })
        .collect();

    let bins = window_len / 2 + 1;
    Ok(StftReport {
        times_s: starts
            .iter()
            .map(|&s| (s as f64 + 0.5 * window_len as f64) / sample_rate_hz)
            .collect(),
        freqs_hz: (0..bins)
            .map(|k| k as f64 * sample_rate_hz / window_len as f64)
            .collect(),
        magnitude,
        window_len,
        hop,
    })
}

/// Cosine similarity of two equally sized amplitude spectra.
pub fn spectral_similarity(a: &SpectrumReport, b: &SpectrumReport) -> Result<f64> {
    if a.amplitude.len() != b.amplitude.len() {
        return Err(Error::DimensionMismatch {
            expected: a.amplitude.len(),
            got: b.amplitude.len(),
        });
    }
    let dot: f64 = a.amplitude.iter().zip(&b.amplitude).map(|(p, q)| p * q).sum();
    let na: f64 = a.amplitude.iter().map(|p| p * p).sum::<f64>().sqrt();
    let nb: f64 = b.amplitude.iter().map(|q| q * q).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na * nb))
}

/// Initial state of the frequency-response template before the `1/w_m` scaling.
pub const FREQUENCY_TEMPLATE_X0: [f64; 2] = [0.25, 0.0];

/// Template for frequency-response runs: RK4 at `τ = 0.001` for 10⁵ steps,
/// every sample kept, starting from [`FREQUENCY_TEMPLATE_X0`]. RK4 is used
/// because forward Euler grows the linear orbit by `(1 + ω²τ²)^{1/2}` per step,
/// which at 5–25 Hz overflows long before 10⁵ steps.
pub fn frequency_template() -> SimulationConfig {
    let placeholder = SkewMatrix::block_diagonal(&[1.0]).expect("non-empty frequency list");
    SimulationConfig::new(placeholder, ActivationKind::Identity, FREQUENCY_TEMPLATE_X0.to_vec())
        .with_integrator(crate::dynamics::Integrator::Rk4)
        .with_steps(100_000)
        .with_record_stride(1)
        .with_threshold(1e6)
}

/// Config for a 2-D oscillator at `freq_hz` with weight multiplier `w_m`.
///
/// The matrix is the single block with `ω = 2π·freq_hz`, so the linear regime
/// rotates at exactly `freq_hz`. The initial state is the template's divided by
/// `w_m`. Substituting `y = w_m·x` turns `ẋ = σ(Ax)` into
/// `ẏ = w_m·σ(Ay / w_m)`: weights scaled by `w_m` on the way out and `1/w_m`
/// on the way in, which keeps the linear frequency and pushes saturation out
/// by a factor `w_m`.
pub fn frequency_response_config(
    freq_hz: f64,
    activation: ActivationKind,
    w_m: f64,
    template: &SimulationConfig,
) -> Result<SimulationConfig> {
    if !(freq_hz.is_finite() && freq_hz > 0.0) {
        return Err(Error::invalid(format!("frequency must be finite and > 0, got {freq_hz}")));
    }
    if !(w_m.is_finite() && w_m > 0.0) {
        return Err(Error::invalid(format!("w_m must be finite and > 0, got {w_m}")));
    }
    if template.x0.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: template.x0.len(),
        });
    }
    let mut cfg = template.clone();
    cfg.matrix = SkewMatrix::block_diagonal(&[2.0 * PI * freq_hz])?;
    cfg.activation = activation;
    cfg.x0 = template.x0.iter().map(|v| v / w_m).collect();
    Ok(cfg)
}

/// Simulates [`frequency_response_config`] and returns the spectrum of `x₁`.
pub fn frequency_response_experiment(
    freq_hz: f64,
    activation: ActivationKind,
    w_m: f64,
    template: &SimulationConfig,
) -> Result<SpectrumReport> {
    let cfg = frequency_response_config(freq_hz, activation, w_m, template)?;
    let traj = simulate(&cfg)?;
    let rate = 1.0 / (cfg.tau * cfg.record_stride as f64);
    amplitude_spectrum(&traj.component(0)?, rate)
}
