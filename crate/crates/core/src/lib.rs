//! Acoustic and magnetic side-channel reconstruction of 3D-printer G-code.
//!
//! The pipeline runs G-code → simulated sensor trace → per-frame features →
//! a cascade of gradient-boosted trees over the movement taxonomy →
//! reconstructed toolpath, scored with Mean Tendency Error.

pub mod cli;
pub mod experiment;
pub mod features;
pub mod gbdt;
pub mod gcode;
pub mod ingest;
pub mod reconstruct;
pub mod simulate;
pub mod taxonomy;

pub use features::{extract_features, FeatureConfig, FeatureLayout, FeatureVector};
pub use gcode::{emit_gcode, parse_gcode, to_toolpath, MovementLabel, Toolpath, Vec3};
pub use ingest::{read_sensor_csv, write_sensor_csv, SensorTrace};
pub use reconstruct::{mean_tendency_error, ReconstructConfig, ReconstructionReport};
pub use simulate::{label_trace, simulate_emissions, SimConfig};
pub use taxonomy::{train_cascade, CascadeModel, CascadeParams};
