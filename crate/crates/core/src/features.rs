//! Per-frame feature extraction.
//!
//! Acoustic features (zero-crossing rate, short-time energy, RMS, spectral
//! centroid and bandwidth, MFCCs) and per-axis magnetometer moments (mean,
//! population standard deviation, skewness, excess kurtosis), assembled into
//! a fixed-layout [`FeatureVector`].

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gcode::MovementLabel;
use crate::ingest::{align_channels, IngestError, SensorTrace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("frame needs at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("silent frame")]
    SilentFrame,
    #[error("degenerate axis: zero variance")]
    DegenerateAxis,
    #[error("invalid config: {0}")]
    Config(String),
}

/// One window of both channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub start_time: f64,
    pub acoustic: Vec<f64>,
    pub magnetic: Vec<[f64; 3]>,
    pub acoustic_rate: f64,
}

/// Fraction of adjacent sample pairs whose product is negative.
pub fn zcr(x: &[f64]) -> Result<f64, FeatureError> {
    if x.len() < 2 {
        return Err(FeatureError::TooShort { needed: 2, got: x.len() });
    }
    let crossings = x.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
    Ok(crossings as f64 / (x.len() - 1) as f64)
}

/// Sum of squares over the whole frame (rectangular window).
pub fn short_time_energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (short_time_energy(x) / x.len() as f64).sqrt()
}

/// One-sided magnitude spectrum, bins `0..=N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFrame {
    pub frequencies: Vec<f64>,
    pub magnitudes: Vec<f64>,
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

pub fn spectrum(x: &[f64], rate: f64) -> Result<SpectrumFrame, FeatureError> {
    if x.len() < 2 {
        return Err(FeatureError::TooShort { needed: 2, got: x.len() });
    }
    let fft = FftPlanner::new().plan_fft_forward(x.len());
    Ok(windowed_spectrum(x, rate, &hann(x.len()), fft.as_ref()))
}

fn windowed_spectrum(x: &[f64], rate: f64, window: &[f64], fft: &dyn Fft<f64>) -> SpectrumFrame {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().zip(window).map(|(v, w)| Complex::new(v * w, 0.0)).collect();
    fft.process(&mut buf);
    let bins = n / 2 + 1;
    SpectrumFrame {
        frequencies: (0..bins).map(|k| k as f64 * rate / n as f64).collect(),
        magnitudes: buf[..bins].iter().map(|c| c.norm()).collect(),
    }
}

pub fn spectral_centroid(sf: &SpectrumFrame) -> Result<f64, FeatureError> {
    let total: f64 = sf.magnitudes.iter().sum();
    if !(total > 0.0) {
        return Err(FeatureError::SilentFrame);
    }
    let weighted: f64 = sf.frequencies.iter().zip(&sf.magnitudes).map(|(f, m)| f * m).sum();
    Ok(weighted / total)
}

pub fn spectral_bandwidth(sf: &SpectrumFrame) -> Result<f64, FeatureError> {
    let c = spectral_centroid(sf)?;
    let total: f64 = sf.magnitudes.iter().sum();
    let spread: f64 = sf.frequencies.iter().zip(&sf.magnitudes).map(|(f, m)| (f - c) * (f - c) * m).sum();
    Ok((spread / total).sqrt())
}

/// Truncated, renormalized Gaussian with radius `⌈3σ⌉`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    pub sigma: f64,
    pub radius: usize,
    /// Weights for offsets `-radius..=radius`.
    pub weights: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(sigma: f64) -> Result<Self, FeatureError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(FeatureError::Config(format!("sigma must be positive, got {sigma}")));
        }
        let radius = (3.0 * sigma).ceil() as usize;
        let raw: Vec<f64> = (-(radius as i64)..=radius as i64)
            .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let sum: f64 = raw.iter().sum();
        Ok(GaussianKernel { sigma, radius, weights: raw.into_iter().map(|w| w / sum).collect() })
    }
}

/// Half-sample symmetric index folding: `d c b a | a b c d | d c b a`.
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// Convolve with a normalized Gaussian, reflecting at the edges.
/// Output has the input's length and the same mean.
pub fn gaussian_smooth(series: &[f64], sigma: f64) -> Result<Vec<f64>, FeatureError> {
    let kernel = GaussianKernel::new(sigma)?;
    Ok(smooth_with(series, &kernel))
}

fn smooth_with(series: &[f64], kernel: &GaussianKernel) -> Vec<f64> {
    let n = series.len();
    if n == 0 {
        return Vec::new();
    }
    let r = kernel.radius as i64;
    (0..n as i64)
        .map(|i| {
            kernel
                .weights
                .iter()
                .zip(-r..=r)
                .map(|(w, d)| w * series[reflect(i + d, n)])
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfccConfig {
    pub n_mels: usize,
    pub n_coeffs: usize,
    pub fmin: f64,
    /// Upper filterbank edge; Nyquist when unset.
    pub fmax: Option<f64>,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig { n_mels: 26, n_coeffs: 13, fmin: 0.0, fmax: None, log_floor: 1e-10 }
    }
}

impl MfccConfig {
    fn upper(&self, rate: f64) -> f64 {
        self.fmax.unwrap_or(rate / 2.0)
    }

    pub fn validate(&self, rate: f64) -> Result<(), FeatureError> {
        let fmax = self.upper(rate);
        if self.n_mels == 0 || self.n_coeffs == 0 || self.n_coeffs > self.n_mels {
            return Err(FeatureError::Config(format!(
                "need 0 < n_coeffs ({}) <= n_mels ({})",
                self.n_coeffs, self.n_mels
            )));
        }
        if !(0.0 <= self.fmin && self.fmin < fmax) {
            return Err(FeatureError::Config(format!("need 0 <= fmin ({}) < fmax ({fmax})", self.fmin)));
        }
        if fmax > rate / 2.0 {
            return Err(FeatureError::Config(format!("fmax {fmax} Hz exceeds Nyquist {} Hz", rate / 2.0)));
        }
        if !(self.log_floor > 0.0) {
            return Err(FeatureError::Config("log_floor must be positive".into()));
        }
        Ok(())
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular HTK-mel filters evaluated at the spectrum's bin frequencies.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// `filters[m][k]` weight of bin `k` in band `m`.
    filters: Vec<Vec<f64>>,
}

impl MelFilterbank {
    pub fn new(cfg: &MfccConfig, frequencies: &[f64], rate: f64) -> Result<Self, FeatureError> {
        cfg.validate(rate)?;
        let (lo, hi) = (hz_to_mel(cfg.fmin), hz_to_mel(cfg.upper(rate)));
        let edges: Vec<f64> = (0..cfg.n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
            .collect();
        let filters = (0..cfg.n_mels)
            .map(|m| {
                let (l, c, u) = (edges[m], edges[m + 1], edges[m + 2]);
                frequencies
                    .iter()
                    .map(|&f| {
                        if f > l && f <= c {
                            (f - l) / (c - l)
                        } else if f > c && f < u {
                            (u - f) / (u - c)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(MelFilterbank { filters })
    }

    /// Mel power spectrum `S(m)` from magnitudes.
    pub fn apply(&self, magnitudes: &[f64]) -> Vec<f64> {
        self.filters
            .iter()
            .map(|w| w.iter().zip(magnitudes).map(|(w, m)| w * m * m).sum())
            .collect()
    }
}

/// `MFCC(n) = Σ_{m=1..M} ln(max(S(m), floor)) · cos(n (m − ½) π / M)` for `n = 1..=n_coeffs`.
pub fn cepstrum(mel_power: &[f64], n_coeffs: usize, log_floor: f64) -> Vec<f64> {
    let m_total = mel_power.len() as f64;
    let logs: Vec<f64> = mel_power.iter().map(|s| s.max(log_floor).ln()).collect();
    (1..=n_coeffs)
        .map(|n| {
            logs.iter()
                .enumerate()
                .map(|(m, l)| l * (n as f64 * (m as f64 + 0.5) * PI / m_total).cos())
                .sum()
        })
        .collect()
}

pub fn mfcc(x: &[f64], rate: f64, cfg: &MfccConfig) -> Result<Vec<f64>, FeatureError> {
    let sf = spectrum(x, rate)?;
    let bank = MelFilterbank::new(cfg, &sf.frequencies, rate)?;
    Ok(cepstrum(&bank.apply(&sf.magnitudes), cfg.n_coeffs, cfg.log_floor))
}

/// Population moments of one magnetometer axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisMoments {
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

pub fn axis_moments(xs: &[f64]) -> Result<AxisMoments, FeatureError> {
    if xs.len() < 2 {
        return Err(FeatureError::TooShort { needed: 2, got: xs.len() });
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let std = m2.sqrt();
    if m2 <= 1e-24 * mean.abs().max(1.0).powi(2) {
        return Err(FeatureError::DegenerateAxis);
    }
    Ok(AxisMoments { mean, std, skewness: m3 / m2.powf(1.5), kurtosis: m4 / (m2 * m2) - 3.0 })
}

/// Mean and standard deviation never fail; skewness and kurtosis of a
/// degenerate axis are reported as zero with `degenerate` set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagneticStats {
    pub axes: [AxisMoments; 3],
    pub degenerate: bool,
}

impl MagneticStats {
    pub fn to_array(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for (i, a) in self.axes.iter().enumerate() {
            out[i * 4..i * 4 + 4].copy_from_slice(&[a.mean, a.std, a.skewness, a.kurtosis]);
        }
        out
    }
}

pub fn magnetic_stats(samples: &[[f64; 3]]) -> Result<MagneticStats, FeatureError> {
    if samples.len() < 2 {
        return Err(FeatureError::TooShort { needed: 2, got: samples.len() });
    }
    let mut degenerate = false;
    let mut axes = [AxisMoments { mean: 0.0, std: 0.0, skewness: 0.0, kurtosis: 0.0 }; 3];
    for (c, slot) in axes.iter_mut().enumerate() {
        let xs: Vec<f64> = samples.iter().map(|s| s[c]).collect();
        *slot = match axis_moments(&xs) {
            Ok(m) => m,
            Err(FeatureError::DegenerateAxis) => {
                degenerate = true;
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                AxisMoments { mean, std: 0.0, skewness: 0.0, kurtosis: 0.0 }
            }
            Err(e) => return Err(e),
        };
    }
    Ok(MagneticStats { axes, degenerate })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub mfcc: MfccConfig,
    /// Gaussian σ, in magnetometer samples, applied to the raw magnetometer
    /// series before framing. Zero disables smoothing.
    pub magnetic_sigma: f64,
    pub frame_ms: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { mfcc: MfccConfig::default(), magnetic_sigma: 2.0, frame_ms: crate::ingest::DEFAULT_FRAME_MS }
    }
}

/// Column layout of a feature vector for a given MFCC count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub n_coeffs: usize,
}

impl FeatureLayout {
    pub const SCALAR_COUNT: usize = 5;
    pub const MAGNETIC_COUNT: usize = 12;

    pub fn new(n_coeffs: usize) -> Self {
        FeatureLayout { n_coeffs }
    }

    pub fn dimension(&self) -> usize {
        Self::SCALAR_COUNT + self.n_coeffs + Self::MAGNETIC_COUNT
    }

    pub fn acoustic(&self) -> Vec<usize> {
        (0..Self::SCALAR_COUNT + self.n_coeffs).collect()
    }

    pub fn magnetic(&self) -> Vec<usize> {
        (Self::SCALAR_COUNT + self.n_coeffs..self.dimension()).collect()
    }

    pub fn all(&self) -> Vec<usize> {
        (0..self.dimension()).collect()
    }

    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> =
            ["zcr", "ste", "rms", "centroid", "bandwidth"].iter().map(|s| s.to_string()).collect();
        names.extend((1..=self.n_coeffs).map(|n| format!("mfcc{n}")));
        for axis in ["bx", "by", "bz"] {
            for stat in ["mean", "std", "skew", "kurt"] {
                names.push(format!("{axis}_{stat}"));
            }
        }
        names
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// Set when a silent spectrum or degenerate axis forced zeros.
    pub degenerate: bool,
}

/// Caches the FFT plan, window, and filterbank for one frame geometry.
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    rate: f64,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    bank: MelFilterbank,
}

impl FeatureExtractor {
    pub fn new(cfg: FeatureConfig, frame_len: usize, rate: f64) -> Result<Self, FeatureError> {
        if frame_len < 2 {
            return Err(FeatureError::TooShort { needed: 2, got: frame_len });
        }
        let fft = FftPlanner::new().plan_fft_forward(frame_len);
        let bins: Vec<f64> = (0..frame_len / 2 + 1).map(|k| k as f64 * rate / frame_len as f64).collect();
        let bank = MelFilterbank::new(&cfg.mfcc, &bins, rate)?;
        Ok(FeatureExtractor { cfg, rate, window: hann(frame_len), fft, bank })
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout::new(self.cfg.mfcc.n_coeffs)
    }

    pub fn extract(&self, frame: &Frame) -> Result<FeatureVector, FeatureError> {
        let x = &frame.acoustic;
        if x.len() != self.window.len() {
            return Err(FeatureError::Config(format!(
                "frame has {} samples, extractor expects {}",
                x.len(),
                self.window.len()
            )));
        }
        let layout = self.layout();
        let mut values = Vec::with_capacity(layout.dimension());
        let mut degenerate = false;

        let ste = short_time_energy(x);
        values.extend([zcr(x)?, ste, (ste / x.len() as f64).sqrt()]);

        let sf = windowed_spectrum(x, self.rate, &self.window, self.fft.as_ref());
        match (spectral_centroid(&sf), spectral_bandwidth(&sf)) {
            (Ok(c), Ok(b)) => {
                values.extend([c, b]);
                values.extend(cepstrum(&self.bank.apply(&sf.magnitudes), self.cfg.mfcc.n_coeffs, self.cfg.mfcc.log_floor));
            }
            _ => {
                degenerate = true;
                values.extend(std::iter::repeat_n(0.0, 2 + self.cfg.mfcc.n_coeffs));
            }
        }

        let stats = magnetic_stats(&frame.magnetic)?;
        degenerate |= stats.degenerate;
        values.extend(stats.to_array());
        debug_assert_eq!(values.len(), layout.dimension());
        Ok(FeatureVector { values, degenerate })
    }
}

/// One-off extraction for a single frame.
pub fn build_feature_vector(frame: &Frame, cfg: &FeatureConfig) -> Result<FeatureVector, FeatureError> {
    FeatureExtractor::new(*cfg, frame.acoustic.len(), frame.acoustic_rate)?.extract(frame)
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Smooth the magnetometer channel, frame the trace, and extract every frame.
pub fn extract_features(trace: &SensorTrace, cfg: &FeatureConfig) -> Result<Vec<FeatureVector>, ExtractError> {
    let smoothed;
    let source = if cfg.magnetic_sigma > 0.0 && !trace.magnetic.is_empty() {
        let kernel = GaussianKernel::new(cfg.magnetic_sigma)?;
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|c| smooth_with(&trace.magnetic.iter().map(|s| s[c]).collect::<Vec<_>>(), &kernel))
            .collect();
        smoothed = SensorTrace {
            magnetic: (0..trace.magnetic.len()).map(|i| [cols[0][i], cols[1][i], cols[2][i]]).collect(),
            acoustic: trace.acoustic.clone(),
            ..*trace
        };
        &smoothed
    } else {
        trace
    };
    let frames = align_channels(source, cfg.frame_ms)?;
    let Some(first) = frames.first() else {
        return Ok(Vec::new());
    };
    let extractor = FeatureExtractor::new(*cfg, first.acoustic.len(), trace.acoustic_rate)?;
    Ok(frames.par_iter().map(|f| extractor.extract(f)).collect::<Result<Vec<_>, _>>()?)
}

/// Feature table with a header row `frame_idx,label,<feature names>`. The
/// label column is empty when no labels are given.
pub fn write_features_csv<W: std::io::Write>(
    vectors: &[FeatureVector],
    labels: Option<&[MovementLabel]>,
    layout: FeatureLayout,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "frame_idx,label,{}", layout.names().join(","))?;
    for (i, v) in vectors.iter().enumerate() {
        let label = labels.and_then(|l| l.get(i)).map(ToString::to_string).unwrap_or_default();
        write!(out, "{i},{label}")?;
        for x in &v.values {
            write!(out, ",{x}")?;
        }
        writeln!(out)?;
    }
    out.flush()
}
