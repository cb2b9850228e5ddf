//! End-to-end experiments: calibration recordings, cascade training, and the
//! three-layer square reconstructed at each distance preset.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::{extract_features, ExtractError, FeatureConfig, FeatureVector};
use crate::gcode::{origin_hint, parse_gcode, square_gcode, to_toolpath, GcodeError, MovementLabel, Toolpath, Vec3};
use crate::reconstruct::{ReconstructConfig, ReconstructError, ReconstructionReport};
use crate::simulate::{label_trace, simulate_emissions, SimConfig, SimError, DISTANCE_PRESETS_CM};
use crate::taxonomy::{
    evaluate_cascade, save_cascade, train_cascade, CascadeError, CascadeModel, CascadeParams, EvaluationReport,
};

/// Calibration blocks used when none are specified; about ten minutes of motion.
pub const DEFAULT_CALIBRATION_BLOCKS: usize = 25;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Gcode(#[from] GcodeError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
    #[error("{frames} feature frames but {labels} labels")]
    FrameMismatch { frames: usize, labels: usize },
}

/// Calibration G-code: each block visits every direction at both speeds,
/// printing and travelling, then bobs the Z axis.
///
/// Slow moves are 10 mm at 600 mm/min (one second each); fast moves are
/// 10 mm at 3000 mm/min and alternate direction so each direction gets as
/// many frames as at slow speed. All moves stay inside the 10 mm square so
/// the magnetic geometry matches the reconstruction target.
pub fn calibration_gcode(blocks: usize) -> String {
    let mut g = String::new();
    g.push_str("; calibration sweep\n; origin X0.000 Y0.000 Z0.200\nG90\nG21\nM82\n");
    let mut e = 0.0;
    let mut z = 0.2;
    let mut mv = |g: &mut String, axis: char, to: f64, feed: u32, print: bool| {
        if print {
            e += 10.0 * crate::gcode::EXTRUSION_PER_MM;
            let _ = writeln!(g, "G1 {axis}{to:.3} E{e:.5} F{feed}");
        } else {
            let _ = writeln!(g, "G1 {axis}{to:.3} F{feed}");
        }
    };
    for _ in 0..blocks {
        for print in [true, false] {
            for (axis, to) in [('X', 10.0), ('Y', 10.0), ('X', 0.0), ('Y', 0.0)] {
                mv(&mut g, axis, to, 600, print);
            }
            for axis in ['X', 'Y'] {
                for _ in 0..5 {
                    mv(&mut g, axis, 10.0, 3000, print);
                    mv(&mut g, axis, 0.0, 3000, print);
                }
            }
        }
        for _ in 0..4 {
            z += 1.0;
            let _ = writeln!(g, "G1 Z{z:.3} F60");
            z -= 1.0;
            let _ = writeln!(g, "G1 Z{z:.3} F60");
        }
    }
    g.push_str("M400\n");
    g
}

/// Parse G-code text and interpret it from its origin comment (or zero).
pub fn load_toolpath(text: &str, speed_boundary: f64) -> Result<Toolpath, GcodeError> {
    let cmds = parse_gcode(text)?;
    let origin = origin_hint(&cmds).unwrap_or(Vec3::ZERO);
    to_toolpath(&cmds, origin, speed_boundary)
}

pub fn calibration_toolpath(blocks: usize) -> Toolpath {
    load_toolpath(&calibration_gcode(blocks), crate::gcode::DEFAULT_SPEED_BOUNDARY).expect("generated G-code is valid")
}

pub fn square_toolpath() -> Toolpath {
    load_toolpath(&square_gcode(), crate::gcode::DEFAULT_SPEED_BOUNDARY).expect("generated G-code is valid")
}

/// Features and ground-truth labels for a simulated recording of `t`.
pub fn simulate_features(
    t: &Toolpath,
    sim: &SimConfig,
    features: &FeatureConfig,
) -> Result<(Vec<FeatureVector>, Vec<MovementLabel>), ExperimentError> {
    let trace = simulate_emissions(t, sim)?;
    let vectors = extract_features(&trace, features)?;
    let labels = label_trace(t, sim, features.frame_ms)?;
    if vectors.len() != labels.len() {
        return Err(ExperimentError::FrameMismatch { frames: vectors.len(), labels: labels.len() });
    }
    Ok((vectors, labels))
}

#[derive(Debug, Clone)]
pub struct ReproOptions {
    pub seed: u64,
    pub calibration_blocks: usize,
    pub distances_cm: Vec<f64>,
    /// Template for every run; seed and distance are overridden.
    pub sim: SimConfig,
    pub features: FeatureConfig,
    pub cascade: CascadeParams,
    pub reconstruct: ReconstructConfig,
    /// Start the square recording at a seeded offset within the first frame,
    /// so segment boundaries fall inside frames. The offset depends only on
    /// the seed, so every distance sees the same timing.
    pub random_start: bool,
}

impl Default for ReproOptions {
    fn default() -> Self {
        ReproOptions {
            seed: 0,
            calibration_blocks: DEFAULT_CALIBRATION_BLOCKS,
            distances_cm: DISTANCE_PRESETS_CM.to_vec(),
            sim: SimConfig::default(),
            features: FeatureConfig::default(),
            cascade: CascadeParams::default(),
            reconstruct: ReconstructConfig::default(),
            random_start: true,
        }
    }
}

impl ReproOptions {
    /// No sensor noise and frame-aligned recordings.
    pub fn noiseless(mut self) -> Self {
        self.sim = self.sim.noiseless();
        self.random_start = false;
        self
    }
}

#[derive(Debug, Clone)]
pub struct DistanceRun {
    pub distance_cm: f64,
    pub cascade: CascadeModel,
    /// Cascade evaluated frame by frame on the square recording.
    pub square_evaluation: EvaluationReport,
    pub report: ReconstructionReport,
}

impl DistanceRun {
    pub fn mte_percent(&self) -> f64 {
        self.report.mte_percent().expect("original supplied")
    }

    pub fn cascade_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        save_cascade(&self.cascade, &mut out).expect("writing to memory");
        out
    }
}

#[derive(Debug, Clone)]
pub struct ReproReport {
    pub seed: u64,
    pub runs: Vec<DistanceRun>,
}

/// Seeds for the calibration and square recordings. Every distance shares
/// them, so runs differ only in how distance scales signal and noise.
fn recording_seeds(seed: u64) -> (u64, u64) {
    let base = seed.wrapping_mul(1_000_003);
    (base, base ^ 0x5EED_5EED)
}

/// Train on a calibration recording, then reconstruct the square, at one distance.
pub fn run_distance(opts: &ReproOptions, distance_cm: f64) -> Result<DistanceRun, ExperimentError> {
    let (cal_seed, square_seed) = recording_seeds(opts.seed);
    let mut sim = SimConfig { distance_cm, seed: cal_seed, ..opts.sim.clone() };
    let (vectors, labels) = simulate_features(&calibration_toolpath(opts.calibration_blocks), &sim, &opts.features)?;
    let mut params = opts.cascade;
    params.gbdt.seed = opts.seed;
    let cascade = train_cascade(&vectors, &labels, opts.features, &params)?;

    sim.seed = square_seed;
    sim.record_start_s = if opts.random_start {
        ChaCha8Rng::seed_from_u64(opts.seed).random_range(0.0..opts.features.frame_ms / 1000.0)
    } else {
        0.0
    };
    let square = square_toolpath();
    let (sq_vectors, sq_labels) = simulate_features(&square, &sim, &opts.features)?;
    let predicted = cascade.classify_frames(&sq_vectors)?;
    let square_evaluation = evaluate_cascade(&cascade, &sq_vectors, &sq_labels)?;
    let report = ReconstructionReport::build(
        &predicted,
        square.origin,
        &opts.reconstruct,
        Some(&square),
        Some(square_evaluation.clone()),
    )?;
    Ok(DistanceRun { distance_cm, cascade, square_evaluation, report })
}

pub fn repro_square(opts: &ReproOptions) -> Result<ReproReport, ExperimentError> {
    let runs = opts
        .distances_cm
        .iter()
        .map(|&d| run_distance(opts, d))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ReproReport { seed: opts.seed, runs })
}

impl ReproReport {
    pub fn mte_row(&self) -> Vec<f64> {
        self.runs.iter().map(DistanceRun::mte_percent).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "seed,distance_cm,mte_percent,mte_length_weighted,mte_signed,matched,missing,spurious,\
             layer,axial,dir_x,dir_y,header,speed,mean_accuracy\n",
        );
        for r in &self.runs {
            let m = r.report.mte.as_ref().expect("original supplied");
            let _ = write!(
                out,
                "{},{},{:.4},{:.4},{:.4},{},{},{}",
                self.seed,
                r.distance_cm,
                m.mte_percent,
                m.length_weighted_percent,
                m.signed_percent,
                m.pairs.len(),
                m.unmatched_original.len(),
                m.unmatched_reconstructed.len()
            );
            for n in r.cascade.nodes() {
                let _ = write!(out, ",{:.6}", n.accuracy());
            }
            let _ = writeln!(out, ",{:.6}", r.cascade.mean_accuracy());
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "square reconstruction, seed {}", self.seed);
        let _ = write!(out, "{:<22}", "distance (cm)");
        for r in &self.runs {
            let _ = write!(out, "{:>9}", r.distance_cm);
        }
        let _ = write!(out, "\n{:<22}", "MTE (%)");
        for r in &self.runs {
            let _ = write!(out, "{:>9.2}", r.mte_percent());
        }
        let _ = write!(out, "\n{:<22}", "mean node accuracy (%)");
        for r in &self.runs {
            let _ = write!(out, "{:>9.2}", 100.0 * r.cascade.mean_accuracy());
        }
        out.push('\n');
        for r in &self.runs {
            let _ = writeln!(out, "\n== {} cm ==", r.distance_cm);
            out.push_str(&crate::taxonomy::training_report(&r.cascade));
            out.push_str(&r.report.to_text());
        }
        out
    }
}
