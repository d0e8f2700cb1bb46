//! Reference-signal synthesis, framing and per-tone amplitude extraction.
//!
//! The default geometry is 44100 Hz with 4410-sample frames, which gives a bin
//! width of exactly 10 Hz. The four reference tones (300/500/700/900 Hz) then
//! land on bin centres and a rectangular window recovers their amplitudes
//! without leakage.

pub mod wav;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_SAMPLE_RATE_HZ: u32 = 44_100;
pub const DEFAULT_FRAME_LEN: usize = 4_410;
pub const REFERENCE_FREQS_HZ: [f64; 4] = [300.0, 500.0, 700.0, 900.0];
pub const REFERENCE_TONE_AMPLITUDE: f64 = 0.6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("NyquistViolation: {freq_hz} Hz is not below half of {sample_rate_hz} Hz")]
    NyquistViolation { freq_hz: f64, sample_rate_hz: u32 },
    #[error("EmptyToneList: at least one tone is required")]
    EmptyToneList,
    #[error("FrameTooLong: frame of {frame_len} samples exceeds waveform of {len}")]
    FrameTooLong { frame_len: usize, len: usize },
    #[error("FrameTooShort: frame has {len} samples, need at least 2")]
    FrameTooShort { len: usize },
    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
}

/// Mono time-domain audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub sample_rate_hz: u32,
    pub samples: Vec<f64>,
}

impl Waveform {
    pub fn new(sample_rate_hz: u32, samples: Vec<f64>) -> Self {
        Self { sample_rate_hz, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }

    fn nyquist_hz(&self) -> f64 {
        f64::from(self.sample_rate_hz) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneSpec {
    pub frequency_hz: f64,
    pub amplitude: f64,
}

impl ToneSpec {
    pub fn new(frequency_hz: f64, amplitude: f64) -> Self {
        Self { frequency_hz, amplitude }
    }
}

/// The four reference tones at their nominal amplitude.
pub fn reference_tones() -> Vec<ToneSpec> {
    REFERENCE_FREQS_HZ
        .iter()
        .map(|&f| ToneSpec::new(f, REFERENCE_TONE_AMPLITUDE))
        .collect()
}

/// Amplitudes of the four reference tones: the model input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralFeatures {
    pub a300: f64,
    pub a500: f64,
    pub a700: f64,
    pub a900: f64,
}

impl SpectralFeatures {
    pub fn new(a300: f64, a500: f64, a700: f64, a900: f64) -> Self {
        Self { a300, a500, a700, a900 }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.a300, self.a500, self.a700, self.a900]
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// Output of [`synth_reference`]: the rendered waveform and the gain applied
/// to keep it inside `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub waveform: Waveform,
    pub scale: f64,
}

/// Sum of zero-phase sines. When the tone amplitudes sum above 1 the whole
/// waveform is scaled by `1 / sum` (the four-tone reference is scaled by 1/2.4).
pub fn synth_reference(
    tones: &[ToneSpec],
    sample_rate_hz: u32,
    duration_s: f64,
) -> Result<Synthesis, DspError> {
    if tones.is_empty() {
        return Err(DspError::EmptyToneList);
    }
    if sample_rate_hz == 0 {
        return Err(DspError::InvalidArgument("sample rate must be positive".into()));
    }
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(DspError::InvalidArgument(format!("duration must be positive, got {duration_s}")));
    }
    let nyquist = f64::from(sample_rate_hz) / 2.0;
    for t in tones {
        if !(t.frequency_hz > 0.0 && t.frequency_hz < nyquist) {
            return Err(DspError::NyquistViolation { freq_hz: t.frequency_hz, sample_rate_hz });
        }
        if !(0.0..=1.0).contains(&t.amplitude) {
            return Err(DspError::InvalidArgument(format!(
                "tone amplitude {} outside [0, 1]",
                t.amplitude
            )));
        }
    }

    let n_samples = (duration_s * f64::from(sample_rate_hz)).round() as usize;
    if n_samples == 0 {
        return Err(DspError::InvalidArgument("duration shorter than one sample".into()));
    }
    let total: f64 = tones.iter().map(|t| t.amplitude).sum();
    let scale = if total > 1.0 { 1.0 / total } else { 1.0 };
    let fs = f64::from(sample_rate_hz);

    let samples = (0..n_samples)
        .map(|n| {
            let s: f64 = tones
                .iter()
                .map(|t| t.amplitude * (std::f64::consts::TAU * t.frequency_hz * n as f64 / fs).sin())
                .sum();
            s * scale
        })
        .collect();

    Ok(Synthesis { waveform: Waveform::new(sample_rate_hz, samples), scale })
}

/// Consecutive frames of `frame_len` samples advancing by `hop`. A trailing
/// partial frame is dropped.
pub fn frame(w: &Waveform, frame_len: usize, hop: usize) -> Result<Vec<Waveform>, DspError> {
    if frame_len == 0 || hop == 0 {
        return Err(DspError::InvalidArgument("frame length and hop must be positive".into()));
    }
    if frame_len > w.len() {
        return Err(DspError::FrameTooLong { frame_len, len: w.len() });
    }
    let count = (w.len() - frame_len) / hop + 1;
    Ok((0..count)
        .map(|i| {
            let start = i * hop;
            Waveform::new(w.sample_rate_hz, w.samples[start..start + frame_len].to_vec())
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Rectangular,
    /// Periodic Hann; amplitudes are divided by the window's coherent gain.
    Hann,
}

impl std::str::FromStr for Window {
    type Err = DspError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rect" | "rectangular" => Ok(Window::Rectangular),
            "hann" => Ok(Window::Hann),
            other => Err(DspError::InvalidArgument(format!("unknown window '{other}'"))),
        }
    }
}

/// Full complex DFT, `X_k = sum_n x_n exp(-i 2 pi k n / N)`, unnormalised.
pub fn dft(samples: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Index of the DFT bin nearest to `freq_hz`.
pub fn nearest_bin(freq_hz: f64, frame_len: usize, sample_rate_hz: u32) -> usize {
    (freq_hz * frame_len as f64 / f64::from(sample_rate_hz)).round() as usize
}

/// Single-sided amplitudes `(2/N)|X_k|` at the bins nearest to each target.
pub fn bin_amplitudes(
    frame: &Waveform,
    targets_hz: &[f64],
    window: Window,
) -> Result<Vec<f64>, DspError> {
    let n = frame.len();
    if n < 2 {
        return Err(DspError::FrameTooShort { len: n });
    }
    for &f in targets_hz {
        if !(f > 0.0 && f < frame.nyquist_hz()) {
            return Err(DspError::NyquistViolation { freq_hz: f, sample_rate_hz: frame.sample_rate_hz });
        }
    }

    let (spectrum, gain) = match window {
        Window::Rectangular => (dft(&frame.samples), 1.0),
        Window::Hann => {
            let w: Vec<f64> = (0..n)
                .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
                .collect();
            let gain = w.iter().sum::<f64>() / n as f64;
            let x: Vec<f64> = frame.samples.iter().zip(&w).map(|(s, w)| s * w).collect();
            (dft(&x), gain)
        }
    };

    Ok(targets_hz
        .iter()
        .map(|&f| {
            let k = nearest_bin(f, n, frame.sample_rate_hz).min(n - 1);
            2.0 / n as f64 * spectrum[k].norm() / gain
        })
        .collect())
}

/// Amplitudes of the four reference tones in one frame.
pub fn dft_amplitudes(frame: &Waveform, targets_hz: &[f64; 4]) -> Result<SpectralFeatures, DspError> {
    dft_amplitudes_windowed(frame, targets_hz, Window::Rectangular)
}

pub fn dft_amplitudes_windowed(
    frame: &Waveform,
    targets_hz: &[f64; 4],
    window: Window,
) -> Result<SpectralFeatures, DspError> {
    let a = bin_amplitudes(frame, targets_hz, window)?;
    Ok(SpectralFeatures::new(a[0], a[1], a[2], a[3]))
}

/// Frame a capture and extract one feature row per frame.
pub fn featurize(
    w: &Waveform,
    frame_len: usize,
    hop: usize,
    window: Window,
) -> Result<Vec<SpectralFeatures>, DspError> {
    frame(w, frame_len, hop)?
        .iter()
        .map(|f| dft_amplitudes_windowed(f, &REFERENCE_FREQS_HZ, window))
        .collect()
}
