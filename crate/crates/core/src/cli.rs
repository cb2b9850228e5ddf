//! The `printleak` command line.
//!
//! Every subcommand reads an optional TOML config (`--config`) whose
//! sections mirror the library's config structs; command-line flags override
//! it. Exit codes: 0 success, 1 usage, 2 bad input data, 3 model problems.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::experiment::{
    calibration_gcode, load_toolpath, repro_square, ExperimentError, ReproOptions, DEFAULT_CALIBRATION_BLOCKS,
};
use crate::features::{extract_features, write_features_csv, ExtractError, FeatureConfig, FeatureLayout};
use crate::gcode::{emit_gcode, square_gcode, Toolpath, Vec3};
use crate::ingest::{read_labels_csv, read_sensor_csv, write_labels_csv, write_sensor_csv, CsvOptions, SensorTrace};
use crate::reconstruct::{overlay_csv, overlay_svg, ReconstructConfig, ReconstructionReport};
use crate::simulate::{label_trace, simulate_emissions, SimConfig, DISTANCE_PRESETS_CM};
use crate::taxonomy::{
    evaluate_cascade, load_cascade, save_cascade, train_cascade, training_report, CascadeError, CascadeModel,
    CascadeParams,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_MODEL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Model(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Model(_) => EXIT_MODEL,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Model(m) => m,
        }
    }
}

impl From<ExtractError> for CliError {
    fn from(e: ExtractError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CascadeError> for CliError {
    fn from(e: CascadeError) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Cascade(c) => c.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Config file layout. Every section and key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub simulate: SimConfig,
    pub features: FeatureConfig,
    pub train: CascadeParams,
    pub reconstruct: ReconstructConfig,
    pub repro: ReproSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReproSection {
    pub seed: u64,
    pub calibration_blocks: usize,
    pub distances_cm: Vec<f64>,
}

impl Default for ReproSection {
    fn default() -> Self {
        ReproSection { seed: 0, calibration_blocks: DEFAULT_CALIBRATION_BLOCKS, distances_cm: DISTANCE_PRESETS_CM.to_vec() }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                Self::from_toml_str(&text)
            }
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "printleak", version, about = "Reconstruct 3D-printer G-code from acoustic and magnetic side channels")]
pub struct Cli {
    /// TOML config file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a sensor trace and per-frame labels from G-code.
    Simulate(SimulateArgs),
    /// Extract per-frame features from a trace to CSV.
    Features(FeaturesArgs),
    /// Train the six-node cascade on a labeled trace.
    Train(TrainArgs),
    /// Label every frame of a trace with a trained cascade.
    Classify(ClassifyArgs),
    /// Rebuild G-code from a trace and score it against the original.
    Reconstruct(ReconstructArgs),
    /// Per-node accuracy of a cascade on a labeled trace.
    Evaluate(EvaluateArgs),
    /// Train and reconstruct the 10 mm square at every distance preset.
    ReproSquare(ReproArgs),
}

#[derive(Debug, Args)]
pub struct SimOverrides {
    /// RNG seed for sensor noise.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sensor distance in cm (presets: 15, 20, 30).
    #[arg(long, value_name = "CM")]
    pub distance: Option<f64>,
    /// Acoustic noise floor at 15 cm, dB.
    #[arg(long, value_name = "DB", allow_hyphen_values = true)]
    pub noise_db: Option<f64>,
    /// Magnetometer noise standard deviation, µT.
    #[arg(long, value_name = "UT")]
    pub mag_noise_ut: Option<f64>,
    /// Disable every noise source.
    #[arg(long)]
    pub noiseless: bool,
}

impl SimOverrides {
    fn apply(&self, mut cfg: SimConfig) -> SimConfig {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = self.distance {
            cfg.distance_cm = d;
        }
        if let Some(n) = self.noise_db {
            cfg.noise_db = n;
        }
        if let Some(m) = self.mag_noise_ut {
            cfg.mag_noise_ut = m;
        }
        if self.noiseless {
            cfg = cfg.noiseless();
        }
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Builtin {
    /// The calibration sweep used for training.
    Calibration,
    /// The three-layer 10 mm square.
    Square,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Input G-code.
    #[arg(long, value_name = "FILE", required_unless_present = "builtin", conflicts_with = "builtin")]
    pub gcode: Option<PathBuf>,
    /// Use a built-in toolpath instead of a G-code file.
    #[arg(long, value_enum)]
    pub builtin: Option<Builtin>,
    /// Calibration blocks for `--builtin calibration`.
    #[arg(long, default_value_t = DEFAULT_CALIBRATION_BLOCKS)]
    pub blocks: usize,
    /// Output sensor trace CSV.
    #[arg(long, value_name = "FILE")]
    pub trace: PathBuf,
    /// Output per-frame label CSV.
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,
    /// Also write the G-code that was simulated.
    #[arg(long, value_name = "FILE")]
    pub emit_gcode: Option<PathBuf>,
    #[command(flatten)]
    pub sim: SimOverrides,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long, value_name = "FILE")]
    pub trace: PathBuf,
    /// Optional labels to include as a column.
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_name = "MS")]
    pub frame_ms: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "FILE")]
    pub trace: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub labels: PathBuf,
    /// Output cascade file.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Write the accuracy report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Seed for the train/held-out split and subsampling.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "MS")]
    pub frame_ms: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long, value_name = "FILE")]
    pub trace: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Output label CSV.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long, value_name = "FILE")]
    pub trace: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Output G-code.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Original G-code to score against.
    #[arg(long, value_name = "FILE")]
    pub original: Option<PathBuf>,
    /// Ground-truth labels, for per-node accuracies in the report.
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,
    /// Start position `X,Y,Z` in mm; defaults to the original's origin, else zero.
    #[arg(long, value_name = "X,Y,Z", allow_hyphen_values = true)]
    pub start: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Per-segment length errors.
    #[arg(long, value_name = "FILE")]
    pub segments_csv: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub overlay_svg: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub overlay_csv: Option<PathBuf>,
    /// Majority-vote window in frames (odd).
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    pub trace: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub labels: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Text report; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Confusion counts as CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for reports, cascades, G-code and overlays.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Disable noise and start the recording on a frame boundary.
    #[arg(long)]
    pub noiseless: bool,
}

fn open_input(p: &Path) -> CliResult<BufReader<File>> {
    File::open(p).map(BufReader::new).map_err(|e| CliError::Usage(format!("cannot open {}: {e}", p.display())))
}

fn read_text(p: &Path) -> CliResult<String> {
    fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))
}

fn write_file(p: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(p, bytes).map_err(|e| CliError::Data(format!("cannot write {}: {e}", p.display())))
}

fn create(p: &Path) -> CliResult<BufWriter<File>> {
    File::create(p).map(BufWriter::new).map_err(|e| CliError::Data(format!("cannot create {}: {e}", p.display())))
}

fn read_trace(p: &Path, cfg: &RunConfig) -> CliResult<SensorTrace> {
    let opts = CsvOptions { acoustic_rate: None, magnetic_rate: cfg.simulate.magnetic_rate };
    read_sensor_csv(open_input(p)?, opts).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
}

fn read_labels(p: &Path) -> CliResult<Vec<crate::gcode::MovementLabel>> {
    read_labels_csv(open_input(p)?).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
}

fn read_gcode(p: &Path, speed_boundary: f64) -> CliResult<Toolpath> {
    load_toolpath(&read_text(p)?, speed_boundary).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
}

fn read_cascade(p: &Path) -> CliResult<CascadeModel> {
    load_cascade(open_input(p)?).map_err(|e| CliError::Model(format!("{}: {e}", p.display())))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_start(s: &str) -> CliResult<Vec3> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--start expects X,Y,Z, got {s:?}")))?;
    match v[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err(CliError::Usage(format!("--start expects three numbers, got {s:?}"))),
    }
}

fn cmd_simulate(a: &SimulateArgs, cfg: &RunConfig) -> CliResult<()> {
    let sim = a.sim.apply(cfg.simulate.clone());
    sim.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let toolpath = match (&a.gcode, a.builtin) {
        (Some(p), _) => read_gcode(p, sim.speed_boundary)?,
        (None, Some(Builtin::Calibration)) => {
            load_toolpath(&calibration_gcode(a.blocks), sim.speed_boundary).map_err(|e| CliError::Data(e.to_string()))?
        }
        (None, Some(Builtin::Square)) => {
            load_toolpath(&square_gcode(), sim.speed_boundary).map_err(|e| CliError::Data(e.to_string()))?
        }
        (None, None) => return Err(CliError::Usage("one of --gcode or --builtin is required".into())),
    };
    let data = |e: crate::simulate::SimError| CliError::Data(e.to_string());
    let trace = simulate_emissions(&toolpath, &sim).map_err(data)?;
    write_sensor_csv(&trace, create(&a.trace)?).map_err(|e| CliError::Data(e.to_string()))?;
    if let Some(p) = &a.labels {
        let labels = label_trace(&toolpath, &sim, cfg.features.frame_ms).map_err(data)?;
        write_labels_csv(&labels, create(p)?).map_err(|e| CliError::Data(e.to_string()))?;
    }
    if let Some(p) = &a.emit_gcode {
        write_file(p, emit_gcode(&toolpath).as_bytes())?;
    }
    eprintln!("simulated {} segments, {:.3} s", toolpath.len(), trace.duration());
    Ok(())
}

fn feature_config(cfg: &RunConfig, frame_ms: Option<f64>) -> FeatureConfig {
    let mut f = cfg.features;
    if let Some(ms) = frame_ms {
        f.frame_ms = ms;
    }
    f
}

fn cmd_features(a: &FeaturesArgs, cfg: &RunConfig) -> CliResult<()> {
    let fc = feature_config(cfg, a.frame_ms);
    let trace = read_trace(&a.trace, cfg)?;
    let vectors = extract_features(&trace, &fc)?;
    let labels = a.labels.as_deref().map(read_labels).transpose()?;
    if let Some(l) = &labels {
        if l.len() != vectors.len() {
            return Err(CliError::Data(format!("{} labels for {} frames", l.len(), vectors.len())));
        }
    }
    let layout = FeatureLayout::new(fc.mfcc.n_coeffs);
    write_features_csv(&vectors, labels.as_deref(), layout, create(&a.out)?)
        .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(())
}

fn cmd_train(a: &TrainArgs, cfg: &RunConfig) -> CliResult<()> {
    let fc = feature_config(cfg, a.frame_ms);
    let mut params = cfg.train;
    if let Some(r) = a.rounds {
        params.gbdt.n_rounds = r;
    }
    if let Some(d) = a.depth {
        params.gbdt.max_depth = d;
    }
    if let Some(lr) = a.learning_rate {
        params.gbdt.learning_rate = lr;
    }
    if let Some(s) = a.seed {
        params.gbdt.seed = s;
    }
    params.gbdt.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let trace = read_trace(&a.trace, cfg)?;
    let labels = read_labels(&a.labels)?;
    let vectors = extract_features(&trace, &fc)?;
    if labels.len() != vectors.len() {
        return Err(CliError::Data(format!("{} labels for {} frames", labels.len(), vectors.len())));
    }
    let cascade = train_cascade(&vectors, &labels, fc, &params)?;
    let mut out = create(&a.model)?;
    save_cascade(&cascade, &mut out)?;
    out.flush().map_err(|e| CliError::Data(e.to_string()))?;
    emit(a.report.as_deref(), &training_report(&cascade))
}

fn classify_trace(trace_path: &Path, model: &CascadeModel, cfg: &RunConfig) -> CliResult<Vec<crate::gcode::MovementLabel>> {
    let trace = read_trace(trace_path, cfg)?;
    let vectors = extract_features(&trace, &model.feature_config)?;
    Ok(model.classify_frames(&vectors)?)
}

fn cmd_classify(a: &ClassifyArgs, cfg: &RunConfig) -> CliResult<()> {
    let model = read_cascade(&a.model)?;
    let labels = classify_trace(&a.trace, &model, cfg)?;
    write_labels_csv(&labels, create(&a.out)?).map_err(|e| CliError::Data(e.to_string()))
}

fn cmd_reconstruct(a: &ReconstructArgs, cfg: &RunConfig) -> CliResult<()> {
    let model = read_cascade(&a.model)?;
    let mut rc = cfg.reconstruct;
    rc.frame_ms = model.feature_config.frame_ms;
    if let Some(w) = a.window {
        rc.window = w;
    }
    rc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let original = a.original.as_deref().map(|p| read_gcode(p, cfg.simulate.speed_boundary)).transpose()?;
    let start = match (&a.start, &original) {
        (Some(s), _) => parse_start(s)?,
        (None, Some(o)) => o.origin,
        (None, None) => Vec3::ZERO,
    };
    let trace = read_trace(&a.trace, cfg)?;
    let vectors = extract_features(&trace, &model.feature_config)?;
    let predicted = model.classify_frames(&vectors)?;
    let evaluation = match &a.labels {
        Some(p) => {
            let truth = read_labels(p)?;
            if truth.len() != vectors.len() {
                return Err(CliError::Data(format!("{} labels for {} frames", truth.len(), vectors.len())));
            }
            Some(evaluate_cascade(&model, &vectors, &truth)?)
        }
        None => None,
    };
    let report = ReconstructionReport::build(&predicted, start, &rc, original.as_ref(), evaluation)
        .map_err(|e| CliError::Data(e.to_string()))?;
    write_file(&a.out, emit_gcode(&report.reconstructed).as_bytes())?;
    if let Some(p) = &a.segments_csv {
        write_file(p, report.segments_csv().as_bytes())?;
    }
    if let Some(p) = &a.overlay_svg {
        write_file(p, overlay_svg(&report.overlay).as_bytes())?;
    }
    if let Some(p) = &a.overlay_csv {
        write_file(p, overlay_csv(&report.overlay).as_bytes())?;
    }
    emit(a.report.as_deref(), &report.to_text())
}

fn cmd_evaluate(a: &EvaluateArgs, cfg: &RunConfig) -> CliResult<()> {
    let model = read_cascade(&a.model)?;
    let trace = read_trace(&a.trace, cfg)?;
    let vectors = extract_features(&trace, &model.feature_config)?;
    let truth = read_labels(&a.labels)?;
    if truth.len() != vectors.len() {
        return Err(CliError::Data(format!("{} labels for {} frames", truth.len(), vectors.len())));
    }
    let report = evaluate_cascade(&model, &vectors, &truth)?;
    if let Some(p) = &a.csv {
        write_file(p, report.to_csv().as_bytes())?;
    }
    emit(a.report.as_deref(), &report.to_text())
}

fn cmd_repro(a: &ReproArgs, cfg: &RunConfig) -> CliResult<()> {
    let mut opts = ReproOptions {
        seed: a.seed.unwrap_or(cfg.repro.seed),
        calibration_blocks: a.blocks.unwrap_or(cfg.repro.calibration_blocks),
        distances_cm: cfg.repro.distances_cm.clone(),
        sim: cfg.simulate.clone(),
        features: cfg.features,
        cascade: cfg.train,
        reconstruct: cfg.reconstruct,
        random_start: true,
    };
    if a.noiseless {
        opts = opts.noiseless();
    }
    if opts.distances_cm.is_empty() || opts.calibration_blocks == 0 {
        return Err(CliError::Usage("need at least one distance and one calibration block".into()));
    }
    let report = repro_square(&opts)?;
    let text = report.to_text();
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
        write_file(&dir.join("report.txt"), text.as_bytes())?;
        write_file(&dir.join("report.csv"), report.to_csv().as_bytes())?;
        write_file(&dir.join("original.gcode"), square_gcode().as_bytes())?;
        for run in &report.runs {
            let tag = format!("{}cm", run.distance_cm);
            write_file(&dir.join(format!("cascade_{tag}.plc")), &run.cascade_bytes())?;
            write_file(&dir.join(format!("reconstructed_{tag}.gcode")), emit_gcode(&run.report.reconstructed).as_bytes())?;
            write_file(&dir.join(format!("segments_{tag}.csv")), run.report.segments_csv().as_bytes())?;
            write_file(&dir.join(format!("overlay_{tag}.svg")), overlay_svg(&run.report.overlay).as_bytes())?;
            write_file(&dir.join(format!("overlay_{tag}.csv")), overlay_csv(&run.report.overlay).as_bytes())?;
        }
    }
    print!("{text}");
    Ok(())
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, &cfg),
        Command::Features(a) => cmd_features(a, &cfg),
        Command::Train(a) => cmd_train(a, &cfg),
        Command::Classify(a) => cmd_classify(a, &cfg),
        Command::Reconstruct(a) => cmd_reconstruct(a, &cfg),
        Command::Evaluate(a) => cmd_evaluate(a, &cfg),
        Command::ReproSquare(a) => cmd_repro(a, &cfg),
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
/// Help and version requests print and exit 0; parse failures exit 1.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
