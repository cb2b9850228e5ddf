//! Forward emission model: synthesize a [`SensorTrace`] from a toolpath.
//!
//! Each segment sounds a tone whose fundamental depends on the moving axis
//! and speed class, detuned upward for positive travel. The tone is louder
//! at higher feed. Extruding segments add broadband hiss. The magnetometer
//! sees a dipole riding on the nozzle whose moment points along the
//! direction of travel, so its sign flips with direction and its magnitude
//! falls off with the cube of the nozzle-to-sensor distance.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gcode::{MovementLabel, Plane, SpeedClass, Toolpath, Vec3, DEFAULT_SPEED_BOUNDARY};
use crate::ingest::{magnetic_len_for, FramePlan, IngestError, SensorTrace};

/// Distance at which the stepper field peaks near 20 µT.
pub const REFERENCE_DISTANCE_CM: f64 = 15.0;
pub const DISTANCE_PRESETS_CM: [f64; 3] = [15.0, 20.0, 30.0];

/// Feed at which a tone has amplitude `tone_amplitude`.
const REFERENCE_FEED: f64 = 600.0;
const HARMONIC_RATIO: f64 = 0.35;
const RIPPLE_DEPTH: f64 = 0.15;
/// Ripple frequency per mm/s of feed.
const RIPPLE_HZ_PER_MM_S: f64 = 0.9;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("toolpath is empty")]
    EmptyToolpath,
    #[error("toolpath is not contiguous")]
    NotContiguous,
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("config file: {0}")]
    Parse(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Tone fundamentals in Hz per (axis, speed class).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToneMap {
    pub x_slow: f64,
    pub x_fast: f64,
    pub y_slow: f64,
    pub y_fast: f64,
    pub z_slow: f64,
    pub z_fast: f64,
    /// Relative upward detune for XRight, YUp and rising Z.
    pub direction_detune: f64,
}

impl Default for ToneMap {
    fn default() -> Self {
        ToneMap {
            x_slow: 420.0,
            x_fast: 1130.0,
            y_slow: 590.0,
            y_fast: 1530.0,
            z_slow: 260.0,
            z_fast: 760.0,
            direction_detune: 0.03,
        }
    }
}

impl ToneMap {
    fn all(&self) -> [f64; 6] {
        [self.x_slow, self.x_fast, self.y_slow, self.y_fast, self.z_slow, self.z_fast]
    }

    /// Fundamental for a movement with the given displacement.
    pub fn frequency(&self, label: &MovementLabel, delta: Vec3) -> f64 {
        let fast = label.speed() == SpeedClass::Fast;
        let (base, positive) = match (label.plane(), label.axis()) {
            (Plane::Z, _) => (if fast { self.z_fast } else { self.z_slow }, delta.z > 0.0),
            (_, Some(crate::gcode::Axis::X)) => (if fast { self.x_fast } else { self.x_slow }, delta.x > 0.0),
            _ => (if fast { self.y_fast } else { self.y_slow }, delta.y > 0.0),
        };
        if positive {
            base * (1.0 + self.direction_detune)
        } else {
            base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub acoustic_rate: f64,
    pub magnetic_rate: f64,
    pub distance_cm: f64,
    /// Sensor position in cm relative to the bed origin. When unset the
    /// sensor sits `distance_cm` from the origin at 45° in the bed plane.
    pub sensor_pos: Option<Vec3>,
    /// Acoustic noise floor at the reference distance, dB re. unit amplitude.
    /// `-inf` disables acoustic noise.
    pub noise_db: f64,
    /// Magnetometer noise standard deviation.
    pub mag_noise_ut: f64,
    /// Tone amplitude at 600 mm/min.
    pub tone_amplitude: f64,
    /// Extrusion hiss level relative to the tone.
    pub hiss_db: f64,
    /// Stepper field magnitude at closest approach for the 15 cm preset.
    pub peak_field_ut: f64,
    pub speed_boundary: f64,
    /// Time into the toolpath at which recording starts, seconds.
    pub record_start_s: f64,
    pub tones: ToneMap,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            acoustic_rate: crate::ingest::DEFAULT_ACOUSTIC_RATE,
            magnetic_rate: crate::ingest::DEFAULT_MAGNETIC_RATE,
            distance_cm: REFERENCE_DISTANCE_CM,
            sensor_pos: None,
            noise_db: -30.0,
            mag_noise_ut: 2.0,
            tone_amplitude: 0.1,
            hiss_db: -10.0,
            peak_field_ut: 20.0,
            speed_boundary: DEFAULT_SPEED_BOUNDARY,
            record_start_s: 0.0,
            tones: ToneMap::default(),
        }
    }
}

impl SimConfig {
    pub fn at_distance(distance_cm: f64) -> Self {
        SimConfig { distance_cm, ..SimConfig::default() }
    }

    /// Same geometry with every noise source switched off.
    pub fn noiseless(mut self) -> Self {
        self.noise_db = f64::NEG_INFINITY;
        self.mag_noise_ut = 0.0;
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sensor_position(&self) -> Vec3 {
        self.sensor_pos.unwrap_or_else(|| preset_position(self.distance_cm))
    }

    /// Acoustic noise standard deviation after distance attenuation.
    pub fn acoustic_noise_std(&self) -> f64 {
        let ratio = self.distance_cm / REFERENCE_DISTANCE_CM;
        10f64.powf(self.noise_db / 20.0) * ratio * ratio
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(self.acoustic_rate >= 1000.0) || !(self.magnetic_rate > 0.0) || self.magnetic_rate > self.acoustic_rate {
            return bad(format!("rates {} / {} Hz are invalid", self.acoustic_rate, self.magnetic_rate));
        }
        if !(self.distance_cm > 0.0 && self.distance_cm.is_finite()) {
            return bad(format!("distance {} cm must be positive", self.distance_cm));
        }
        if !(self.mag_noise_ut >= 0.0) || self.noise_db.is_nan() || self.noise_db == f64::INFINITY {
            return bad("noise levels must be finite and non-negative (noise_db may be -inf)".into());
        }
        if !(self.tone_amplitude >= 0.0 && self.peak_field_ut >= 0.0) {
            return bad("amplitudes must be non-negative".into());
        }
        let tones = self.tones.all();
        let nyquist = self.acoustic_rate / 2.0;
        for (i, a) in tones.iter().enumerate() {
            if !(*a > 0.0 && a * (1.0 + self.tones.direction_detune) * 2.0 < nyquist) {
                return bad(format!("tone {a} Hz must be positive with its harmonic below Nyquist"));
            }
            if tones[..i].contains(a) {
                return bad(format!("tone {a} Hz is assigned to two (axis, speed) pairs"));
            }
        }
        if !(self.record_start_s >= 0.0 && self.record_start_s.is_finite()) {
            return bad(format!("record start {} s must be non-negative", self.record_start_s));
        }
        if let Some(p) = self.sensor_pos {
            if !p.is_finite() {
                return bad("sensor position must be finite".into());
            }
        }
        Ok(())
    }
}

fn preset_position(distance_cm: f64) -> Vec3 {
    Vec3::new(-distance_cm * FRAC_1_SQRT_2, -distance_cm * FRAC_1_SQRT_2, 0.0)
}

/// `3(m̂·r̂)r̂ − m̂` for unit `m` and `r`.
fn dipole_shape(m: Vec3, r_hat: Vec3) -> Vec3 {
    r_hat * (3.0 * m.dot(r_hat)) - m
}

/// Cumulative segment end times in seconds.
fn segment_times(t: &Toolpath) -> Vec<f64> {
    t.segments
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s.duration();
            Some(*acc)
        })
        .collect()
}

/// Sample index at which each segment starts and the last one ends, with
/// recording starting `start` seconds in. Segments wholly before the start
/// get empty ranges.
fn sample_bounds(times: &[f64], rate: f64, start: f64) -> Vec<usize> {
    std::iter::once(0).chain(times.iter().map(|t| ((t - start) * rate).round().max(0.0) as usize)).collect()
}

fn check_toolpath(t: &Toolpath, cfg: &SimConfig) -> Result<(), SimError> {
    if t.is_empty() {
        return Err(SimError::EmptyToolpath);
    }
    if !t.is_contiguous() {
        return Err(SimError::NotContiguous);
    }
    if cfg.record_start_s >= t.duration() {
        return Err(SimError::Config(format!(
            "record start {} s is past the end of the {} s toolpath",
            cfg.record_start_s,
            t.duration()
        )));
    }
    Ok(())
}

pub fn simulate_emissions(t: &Toolpath, cfg: &SimConfig) -> Result<SensorTrace, SimError> {
    cfg.validate()?;
    check_toolpath(t, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let ar = cfg.acoustic_rate;
    let times = segment_times(t);
    let bounds = sample_bounds(&times, ar, cfg.record_start_s);
    let n = *bounds.last().unwrap_or(&0);

    let mut acoustic = vec![0.0; n];
    let mut phase = 0.0_f64;
    let hiss_ratio = 10f64.powf(cfg.hiss_db / 20.0);
    for (i, seg) in t.segments.iter().enumerate() {
        let freq = cfg.tones.frequency(&seg.label, seg.displacement());
        let amp = cfg.tone_amplitude * (seg.feed / REFERENCE_FEED).sqrt();
        let hiss = if seg.extruding {
            amp * ((1.0 + HARMONIC_RATIO * HARMONIC_RATIO) / 2.0).sqrt() * hiss_ratio
        } else {
            0.0
        };
        let step = 2.0 * PI * freq / ar;
        for x in &mut acoustic[bounds[i]..bounds[i + 1]] {
            *x = amp * (phase.sin() + HARMONIC_RATIO * (2.0 * phase).sin());
            if hiss > 0.0 {
                *x += hiss * unit.sample(&mut rng);
            }
            phase = (phase + step) % (2.0 * PI);
        }
    }
    let noise = cfg.acoustic_noise_std();
    if noise > 0.0 {
        for x in &mut acoustic {
            *x += noise * unit.sample(&mut rng);
        }
    }

    let mr = cfg.magnetic_rate;
    let n_mag = magnetic_len_for(n, ar, mr);
    let sensor = cfg.sensor_position();
    let ref_pos = preset_position(REFERENCE_DISTANCE_CM);
    let ref_r = Vec3::ZERO - ref_pos;
    let ref_shape = dipole_shape(Vec3::new(1.0, 0.0, 0.0), ref_r * (1.0 / ref_r.norm())).norm();
    let moment = cfg.peak_field_ut * REFERENCE_DISTANCE_CM.powi(3) / ref_shape;

    let mut magnetic = Vec::with_capacity(n_mag);
    let mut seg_idx = 0;
    for k in 0..n_mag {
        let time = cfg.record_start_s + k as f64 / mr;
        while seg_idx + 1 < t.segments.len() && time >= times[seg_idx] {
            seg_idx += 1;
        }
        let seg = &t.segments[seg_idx];
        let seg_start = if seg_idx == 0 { 0.0 } else { times[seg_idx - 1] };
        let frac = ((time - seg_start) / seg.duration()).clamp(0.0, 1.0);
        let nozzle_cm = (seg.start + seg.displacement() * frac) * 0.1;
        let r = nozzle_cm - sensor;
        let dist = r.norm().max(1e-6);
        let travel = seg.displacement() * (1.0 / seg.length());
        let ripple = 1.0 + RIPPLE_DEPTH * (2.0 * PI * RIPPLE_HZ_PER_MM_S * seg.feed / 60.0 * time).sin();
        let b = dipole_shape(travel, r * (1.0 / dist)) * (moment * ripple / dist.powi(3));
        let mut sample = [b.x, b.y, b.z];
        if cfg.mag_noise_ut > 0.0 {
            for c in &mut sample {
                *c += cfg.mag_noise_ut * unit.sample(&mut rng);
            }
        }
        magnetic.push(sample);
    }

    Ok(SensorTrace { acoustic, acoustic_rate: ar, magnetic, magnetic_rate: mr, start_time: cfg.record_start_s })
}

/// Ground-truth label for every frame the simulated trace will yield.
///
/// Each frame takes the label of the segment covering most of its acoustic
/// samples; ties go to the earlier segment.
pub fn label_trace(t: &Toolpath, cfg: &SimConfig, frame_ms: f64) -> Result<Vec<MovementLabel>, SimError> {
    check_toolpath(t, cfg)?;
    let ar = cfg.acoustic_rate;
    let bounds = sample_bounds(&segment_times(t), ar, cfg.record_start_s);
    let n = *bounds.last().unwrap_or(&0);
    let plan = FramePlan::new(ar, cfg.magnetic_rate, frame_ms)?;
    let n_frames = plan.frame_count(n, magnetic_len_for(n, ar, cfg.magnetic_rate));

    let mut labels = Vec::with_capacity(n_frames);
    let mut first = 0;
    for i in 0..n_frames {
        let (a, _) = plan.starts(i);
        let b = a + plan.acoustic_len;
        while bounds[first + 1] <= a {
            first += 1;
        }
        let mut best = (0usize, first);
        let mut s = first;
        while s < t.segments.len() && bounds[s] < b {
            let overlap = bounds[s + 1].min(b).saturating_sub(bounds[s].max(a));
            if overlap > best.0 {
                best = (overlap, s);
            }
            s += 1;
        }
        labels.push(t.segments[best.1].label);
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcode::{parse_gcode, to_toolpath, Direction, Header};

    fn path(g: &str) -> Toolpath {
        to_toolpath(&parse_gcode(g).unwrap(), Vec3::ZERO, DEFAULT_SPEED_BOUNDARY).unwrap()
    }

    #[test]
    fn determinism_for_fixed_seed() {
        let t = path("G1 X10 F1800\nG1 Y5 E1\nG1 Z1 F60");
        let cfg = SimConfig { seed: 42, ..SimConfig::default() };
        assert_eq!(simulate_emissions(&t, &cfg).unwrap(), simulate_emissions(&t, &cfg).unwrap());
        let other = simulate_emissions(&t, &SimConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(other, simulate_emissions(&t, &SimConfig { seed: 42, ..SimConfig::default() }).unwrap());
    }

    #[test]
    fn duration_matches_kinematics() {
        let t = path("G1 X10 F1800\nG1 X0");
        assert_eq!(t.segments[1].label.direction(), Some(Direction::XLeft));
        let single = Toolpath { segments: vec![t.segments[1].clone()], origin: t.segments[1].start };
        let trace = simulate_emissions(&single, &SimConfig::default()).unwrap();
        assert!((trace.duration() - 1.0 / 3.0).abs() <= 1.0 / trace.acoustic_rate);
    }

    #[test]
    fn empty_toolpath_rejected() {
        assert!(matches!(simulate_emissions(&Toolpath::default(), &SimConfig::default()), Err(SimError::EmptyToolpath)));
    }

    #[test]
    fn duplicate_tones_rejected() {
        let mut cfg = SimConfig::default();
        cfg.tones.y_fast = cfg.tones.x_slow;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_overrides() {
        let cfg = SimConfig::from_toml_str("seed = 9\ndistance_cm = 30.0\n[tones]\nx_slow = 400.0\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.tones.x_slow, 400.0);
        assert_eq!(cfg.tones.y_slow, ToneMap::default().y_slow);
        assert!((cfg.sensor_position().norm() - 30.0).abs() < 1e-12);
        assert!(SimConfig::from_toml_str("bogus = 1").is_err());
        assert!(SimConfig::from_toml_str("noise_db = -inf").is_ok());
    }

    #[test]
    fn labels_one_per_frame() {
        let t = path("G1 X60 F3600\nG1 X0");
        let single = Toolpath { segments: vec![t.segments[1].clone()], origin: t.segments[1].start };
        let labels = label_trace(&single, &SimConfig::default(), 100.0).unwrap();
        assert_eq!(labels.len(), 10);
        assert!(labels.iter().all(|l| l.direction() == Some(Direction::XLeft)));
    }

    #[test]
    fn straddling_frame_takes_majority() {
        // 0.56 s XLeft then 0.44 s YUp: frame 5 is 60 ms XLeft / 40 ms YUp.
        let t = path("G1 X100 F6000\nG1 X94.4 F600\nG1 Y4.4");
        let tail = Toolpath { segments: t.segments[1..].to_vec(), origin: t.segments[1].start };
        let labels = label_trace(&tail, &SimConfig::default(), 100.0).unwrap();
        assert_eq!(labels.len(), 10);
        assert_eq!(labels[5].direction(), Some(Direction::XLeft));
        assert_eq!(labels[6].direction(), Some(Direction::YUp));
        assert_eq!(labels[5].header(), Header::Positioning);
    }

    #[test]
    fn tone_frequency_detunes_positive_travel() {
        let tones = ToneMap::default();
        let right = MovementLabel::xy(Direction::XRight, Header::Printing, SpeedClass::Slow);
        let left = MovementLabel::xy(Direction::XLeft, Header::Printing, SpeedClass::Slow);
        assert_eq!(tones.frequency(&left, Vec3::new(-1.0, 0.0, 0.0)), 420.0);
        assert!((tones.frequency(&right, Vec3::new(1.0, 0.0, 0.0)) - 432.6).abs() < 1e-9);
    }
}
