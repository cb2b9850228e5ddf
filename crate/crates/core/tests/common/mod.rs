//! Brute-force reference implementations and seeded input generators shared
//! by the integration tests. Nothing here calls into the library's DSP code.

#![allow(dead_code)]

use std::f64::consts::PI;

use printleak::features::{FeatureConfig, Frame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const RATE: f64 = 8000.0;
pub const FRAME_LEN: usize = 800;
pub const MAG_PER_FRAME: usize = 10;

/// Random frame: a few sinusoids plus white noise, and a drifting noisy
/// magnetometer triple.
pub fn random_frame(rng: &mut ChaCha8Rng, index: usize) -> Frame {
    let noise = Normal::new(0.0, rng.random_range(0.01..0.5)).unwrap();
    let tones: Vec<(f64, f64, f64)> = (0..rng.random_range(1..4))
        .map(|_| (rng.random_range(50.0..3900.0), rng.random_range(0.05..1.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    let acoustic = (0..FRAME_LEN)
        .map(|n| {
            let t = n as f64 / RATE;
            tones.iter().map(|(f, a, p)| a * (2.0 * PI * f * t + p).sin()).sum::<f64>() + noise.sample(rng)
        })
        .collect();
    let base = [rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0)];
    let mag_noise = Normal::new(0.0, rng.random_range(0.1..3.0)).unwrap();
    let magnetic = (0..MAG_PER_FRAME)
        .map(|i| {
            let drift = i as f64 * 0.3;
            [base[0] + drift + mag_noise.sample(rng), base[1] - drift + mag_noise.sample(rng), base[2] + mag_noise.sample(rng)]
        })
        .collect();
    Frame { index, start_time: index as f64 * 0.1, acoustic, magnetic, acoustic_rate: RATE }
}

pub fn random_frames(seed: u64, n: usize) -> Vec<Frame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| random_frame(&mut rng, i)).collect()
}

pub fn zcr(x: &[f64]) -> f64 {
    let mut count = 0usize;
    for n in 1..x.len() {
        if x[n] * x[n - 1] < 0.0 {
            count += 1;
        }
    }
    count as f64 / (x.len() - 1) as f64
}

pub fn ste(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in x {
        s += v * v;
    }
    s
}

pub fn rms(x: &[f64]) -> f64 {
    (ste(x) / x.len() as f64).sqrt()
}

/// Hann-windowed one-sided magnitude spectrum by direct DFT summation.
pub fn dft_magnitudes(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let w: Vec<f64> = (0..n).map(|i| x[i] * (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())).collect();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, v) in w.iter().enumerate() {
                // Reduce k·i mod n before scaling to keep the phase exact.
                let phase = 2.0 * PI * ((k * i) % n) as f64 / n as f64;
                re += v * phase.cos();
                im -= v * phase.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

pub fn bin_frequencies(n: usize, rate: f64) -> Vec<f64> {
    (0..=n / 2).map(|k| k as f64 * rate / n as f64).collect()
}

pub fn centroid(freqs: &[f64], mags: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..mags.len() {
        num += freqs[k] * mags[k];
        den += mags[k];
    }
    num / den
}

pub fn bandwidth(freqs: &[f64], mags: &[f64]) -> f64 {
    let c = centroid(freqs, mags);
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..mags.len() {
        num += (freqs[k] - c).powi(2) * mags[k];
        den += mags[k];
    }
    (num / den).sqrt()
}

/// Gaussian density with the normalising constant, sampled at integer
/// offsets `-r..=r` with `r = ceil(3σ)`, then rescaled to unit sum.
pub fn gaussian_weights(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let g: Vec<f64> = (-r..=r)
        .map(|x| (1.0 / (2.0 * PI * sigma * sigma).sqrt()) * (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = g.iter().sum();
    g.into_iter().map(|v| v / total).collect()
}

/// Convolution over an explicitly mirrored copy of the series.
pub fn gaussian_smooth(series: &[f64], sigma: f64) -> Vec<f64> {
    let w = gaussian_weights(sigma);
    let r = w.len() / 2;
    let n = series.len();
    let mut mirrored: Vec<f64> = series.iter().rev().cloned().collect();
    mirrored.extend_from_slice(series);
    mirrored.extend(series.iter().rev());
    // Keep mirroring for kernels wider than the series.
    while mirrored.len() < n + 2 * r + 2 * n {
        let rev: Vec<f64> = mirrored.iter().rev().cloned().collect();
        mirrored = [rev.clone(), mirrored, rev].concat();
    }
    let centre = (mirrored.len() - n) / 2;
    (0..n)
        .map(|i| w.iter().enumerate().map(|(j, wj)| wj * mirrored[centre + i + j - r]).sum())
        .collect()
}

fn mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn inv_mel(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// MFCC with HTK triangles over power, natural log, and the cosine sum.
pub fn mfcc(x: &[f64], rate: f64, n_mels: usize, n_coeffs: usize, fmin: f64, fmax: f64, floor: f64) -> Vec<f64> {
    let mags = dft_magnitudes(x);
    let freqs = bin_frequencies(x.len(), rate);
    let (lo, hi) = (mel(fmin), mel(fmax));
    let pts: Vec<f64> = (0..n_mels + 2).map(|i| inv_mel(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64)).collect();
    let mut s = vec![0.0; n_mels];
    for m in 0..n_mels {
        for k in 0..mags.len() {
            let f = freqs[k];
            let w = if f > pts[m] && f <= pts[m + 1] {
                (f - pts[m]) / (pts[m + 1] - pts[m])
            } else if f > pts[m + 1] && f < pts[m + 2] {
                (pts[m + 2] - f) / (pts[m + 2] - pts[m + 1])
            } else {
                0.0
            };
            s[m] += w * mags[k] * mags[k];
        }
    }
    let big_m = n_mels as f64;
    (1..=n_coeffs)
        .map(|n| {
            let mut c = 0.0;
            for m in 1..=n_mels {
                c += s[m - 1].max(floor).ln() * (n as f64 * (m as f64 - 0.5) * PI / big_m).cos();
            }
            c
        })
        .collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

pub fn skewness(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

pub fn kurtosis(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

/// Every column of a feature vector for `frame`, computed from the oracles.
pub fn feature_vector(frame: &Frame, cfg: &FeatureConfig) -> Vec<f64> {
    let x = &frame.acoustic;
    let mags = dft_magnitudes(x);
    let freqs = bin_frequencies(x.len(), frame.acoustic_rate);
    let mut v = vec![zcr(x), ste(x), rms(x), centroid(&freqs, &mags), bandwidth(&freqs, &mags)];
    let fmax = cfg.mfcc.fmax.unwrap_or(frame.acoustic_rate / 2.0);
    v.extend(mfcc(x, frame.acoustic_rate, cfg.mfcc.n_mels, cfg.mfcc.n_coeffs, cfg.mfcc.fmin, fmax, cfg.mfcc.log_floor));
    for c in 0..3 {
        let axis: Vec<f64> = frame.magnetic.iter().map(|s| s[c]).collect();
        v.extend([mean(&axis), std(&axis), skewness(&axis), kurtosis(&axis)]);
    }
    v
}

/// `|a − b| / max(|b|, scale)`.
pub fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / b.abs().max(scale).max(f64::MIN_POSITIVE)
}

/// Largest relative error between a library feature vector and the oracle.
/// Cepstral coefficients are measured against the largest coefficient of
/// the frame, since individual coefficients can sit arbitrarily close to 0.
pub fn max_feature_error(got: &[f64], want: &[f64], n_coeffs: usize) -> (f64, usize) {
    assert_eq!(got.len(), want.len());
    let mfcc_range = 5..5 + n_coeffs;
    let mfcc_scale = want[mfcc_range.clone()].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = (0.0, 0);
    for i in 0..got.len() {
        let scale = if mfcc_range.contains(&i) { mfcc_scale } else { 0.0 };
        let e = rel_err(got[i], want[i], scale);
        if e > worst.0 {
            worst = (e, i);
        }
    }
    worst
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    assert!(!xs.is_empty());
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Three Gaussian blobs in four dimensions, 100 points each.
pub fn blobs(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres = [[0.0, 0.0, 0.0, 0.0], [3.0, 3.0, 0.0, 1.0], [-3.0, 2.0, 2.0, -1.0]];
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, centre) in centres.iter().enumerate() {
        for _ in 0..100 {
            rows.push(centre.iter().map(|m| m + normal.sample(&mut rng)).collect());
            labels.push(c);
        }
    }
    (rows, labels)
}

pub fn xor() -> (Vec<Vec<f64>>, Vec<usize>) {
    (vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]], vec![0, 1, 1, 0])
}

/// Two interleaved classes over three features, `n` points.
pub fn small_dataset(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
    let labels = rows.iter().map(|r| usize::from(r[0] * r[1] + (r[2] * 2.0).sin() > 0.0)).collect();
    (rows, labels)
}
