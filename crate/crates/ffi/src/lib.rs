//! C ABI over `printleak`.
//!
//! Objects cross the boundary as opaque handles created by `plk_*` constructors
//! and released with the matching `plk_*_free`. Fallible calls return a
//! [`PlkStatus`]; on failure `plk_last_error` describes the most recent error
//! on the calling thread. Strings returned to the caller are released with
//! `plk_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use printleak::experiment::{calibration_gcode, load_toolpath};
use printleak::gcode::{emit_gcode, square_gcode, Toolpath, Vec3, DEFAULT_SPEED_BOUNDARY};
use printleak::ingest::{read_sensor_csv, write_sensor_csv, CsvOptions, SensorTrace};
use printleak::reconstruct::{ReconstructConfig, ReconstructionReport};
use printleak::simulate::{label_trace, simulate_emissions, SimConfig};
use printleak::taxonomy::{load_cascade, save_cascade, train_cascade, CascadeModel, CascadeParams};
use printleak::extract_features;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlkStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// An argument was out of range or a string was not UTF-8.
    InvalidArgument = 2,
    /// G-code could not be parsed or interpreted.
    Gcode = 3,
    /// The simulator rejected its toolpath or options.
    Simulation = 4,
    /// A trace, label set or feature matrix was malformed.
    Data = 5,
    /// Training failed or a cascade file is invalid.
    Model = 6,
    /// A file could not be opened, read or written.
    Io = 7,
    /// Rust panicked; the handle arguments should be treated as unusable.
    Panic = 8,
}

/// A parsed toolpath.
pub struct PlkToolpath {
    inner: Toolpath,
}

/// A recorded or simulated sensor trace.
pub struct PlkTrace {
    inner: SensorTrace,
}

/// A trained six-node classifier cascade.
pub struct PlkCascade {
    inner: CascadeModel,
}

/// Simulation settings. Obtain defaults from `plk_sim_options_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlkSimOptions {
    pub seed: u64,
    pub distance_cm: f64,
    /// Acoustic noise floor at 15 cm, dB.
    pub noise_db: f64,
    /// Magnetometer noise standard deviation, µT.
    pub mag_noise_ut: f64,
    /// Seconds into the toolpath at which recording starts.
    pub record_start_s: f64,
    /// Disable every noise source.
    pub noiseless: bool,
}

impl PlkSimOptions {
    fn to_config(self) -> SimConfig {
        let cfg = SimConfig {
            seed: self.seed,
            distance_cm: self.distance_cm,
            noise_db: self.noise_db,
            mag_noise_ut: self.mag_noise_ut,
            record_start_s: self.record_start_s,
            ..SimConfig::default()
        };
        if self.noiseless {
            cfg.noiseless()
        } else {
            cfg
        }
    }
}

type Failure = (PlkStatus, String);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("NUL bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Run `f`, recording any error or panic as the thread's last error.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> PlkStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PlkStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("panic: {msg}"));
            PlkStatus::Panic
        }
    }
}

fn err<E: std::fmt::Display>(status: PlkStatus) -> impl Fn(E) -> Failure {
    move |e| (status, e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err((PlkStatus::NullArgument, format!("{name} is NULL")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (PlkStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| (PlkStatus::NullArgument, format!("{name} is NULL")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| (PlkStatus::NullArgument, format!("{name} is NULL")))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn plk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL after a success.
/// The pointer is valid until the next `plk_*` call on the same thread.
#[no_mangle]
pub extern "C" fn plk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn plk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default simulation options.
#[no_mangle]
pub extern "C" fn plk_sim_options_default() -> PlkSimOptions {
    let d = SimConfig::default();
    PlkSimOptions {
        seed: d.seed,
        distance_cm: d.distance_cm,
        noise_db: d.noise_db,
        mag_noise_ut: d.mag_noise_ut,
        record_start_s: d.record_start_s,
        noiseless: false,
    }
}

/// Parse G-code text into a toolpath. An `; origin X.. Y.. Z..` comment sets
/// the start position; otherwise the nozzle starts at zero.
///
/// # Safety
/// `gcode` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plk_toolpath_from_gcode(gcode: *const c_char, out: *mut *mut PlkToolpath) -> PlkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let text = str_arg(gcode, "gcode")?;
        let inner = load_toolpath(text, DEFAULT_SPEED_BOUNDARY).map_err(err(PlkStatus::Gcode))?;
        *out = boxed(PlkToolpath { inner });
        Ok(())
    })
}

/// The built-in three-layer 10 mm square.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plk_toolpath_square(out: *mut *mut PlkToolpath) -> PlkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let inner = load_toolpath(&square_gcode(), DEFAULT_SPEED_BOUNDARY).map_err(err(PlkStatus::Gcode))?;
        *out = boxed(PlkToolpath { inner });
        Ok(())
    })
}

/// The built-in calibration sweep, `blocks` blocks of 24 s each.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plk_toolpath_calibration(blocks: usize, out: *mut *mut PlkToolpath) -> PlkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if blocks == 0 {
            return Err((PlkStatus::InvalidArgument, "blocks must be positive".into()));
        }
        let inner = load_toolpath(&calibration_gcode(blocks), DEFAULT_SPEED_BOUNDARY).map_err(err(PlkStatus::Gcode))?;
        *out = boxed(PlkToolpath { inner });
        Ok(())
    })
}

/// Number of motion segments; 0 for NULL.
///
/// # Safety
/// `t` must be NULL or a live toolpath handle.
#[no_mangle]
pub unsafe extern "C" fn plk_toolpath_segment_count(t: *const PlkToolpath) -> usize {
    t.as_ref().map_or(0, |t| t.inner.len())
}

/// Total motion time in seconds; 0 for NULL.
///
/// # Safety
/// `t` must be NULL or a live toolpath handle.
#[no_mangle]
pub unsafe extern "C" fn plk_toolpath_duration(t: *const PlkToolpath) -> f64 {
    t.as_ref().map_or(0.0, |t| t.inner.duration())
}

/// Render a toolpath as G-code. Free the result with `plk_string_free`.
///
/// # Safety
/// `t` must be a live toolpath handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plk_toolpath_to_gcode(t: *const PlkToolpath, out: *mut *mut c_char) -> PlkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let t = ref_arg(t, "toolpath")?;
        let s = CString::new(emit_gcode(&t.inner)).map_err(err(PlkStatus::Data))?;
        *out = s.into_raw();
        Ok(())
    })
}

/// # Safety
/// `t` must be NULL or a toolpath handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn plk_toolpath_free(t: *mut PlkToolpath) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Simulate the sensor recording of a toolpath.
///
/// # Safety
/// `t` must be a live toolpath handle, `opts` readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plk_simulate(
    t: *const PlkToolpath,
    opts: *const PlkSimOptions,
    out: *mut *mut PlkTrace,
) -> PlkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let t = ref_arg(t, "toolpath")?;
        let opts = ref_arg(opts, "opts")?;
        let inner = simulate_emissions(&t.inner, &opts.to_config()).map_err(err(PlkStatus::Simulation))?;
        *out = boxed(PlkTrace { inner });
        Ok(())
    })
}

/// Read a sensor CSV (`time_s,ax,bx_uT,by_uT,bz_uT`).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plk_trace_read_csv(path: *const c_char, out: *mut *mut PlkTrace) -> PlkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let f = File::open(path).map_err(|e| (PlkStatus::Io, format!("{path}: {e}")))?;
        let inner = read_sensor_csv(BufReader::new(f), CsvOptions::default())
            .map_err(|e| (PlkStatus::Data, format!("{path}: {e}")))?;
        *out = boxed(PlkTrace { inner });
        Ok(())
    })
}

/// # Safety
/// `trace` must be a live trace handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn plk_trace_write_csv(trace: *const PlkTrace, path: *const c_char) -> PlkStatus {
    guard(|| {
        let trace = ref_arg(trace, "trace")?;
        let path = str_arg(path, "path")?;
        let f = File::create(path).map_err(|e| (PlkStatus::Io, format!("{path}: {e}")))?;
        let mut w = BufWriter::new(f);
        write_sensor_csv(&trace.inner, &mut w).map_err(err(PlkStatus::Io))?;
        w.flush().map_err(err(PlkStatus::Io))
    })
}

/// Recorded time in seconds; 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn plk_trace_duration(trace: *const PlkTrace) -> f64 {
    trace.as_ref().map_or(0.0, |t| t.inner.duration())
}

/// # Safety
/// `trace` must be NULL or a trace handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn plk_trace_free(trace: *mut PlkTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Train a cascade on `trace`, labelled from the toolpath that produced it.
/// `opts` must match the options the trace was recorded with; `seed` drives
/// the train/held-out split.
///
/// # Safety
/// Handles must be live, `opts` readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plk_cascade_train(
    t: *const PlkToolpath,
    trace: *const PlkTrace,
    opts: *const PlkSimOptions,
    seed: u64,
    out: *mut *mut PlkCascade,
) -> PlkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let t = ref_arg(t, "toolpath")?;
        let trace = ref_arg(trace, "trace")?;
        let opts = ref_arg(opts, "opts")?;
        let mut params = CascadeParams::default();
        params.gbdt.seed = seed;
        let fc = Default::default();
        let vectors = extract_features(&trace.inner, &fc).map_err(err(PlkStatus::Data))?;
        let labels = label_trace(&t.inner, &opts.to_config(), fc.frame_ms).map_err(err(PlkStatus::Simulation))?;
        if labels.len() != vectors.len() {
            return Err((PlkStatus::Data, format!("{} labels for {} frames", labels.len(), vectors.len())));
        }
        let inner = train_cascade(&vectors, &labels, fc, &params).map_err(err(PlkStatus::Model))?;
        *out = boxed(PlkCascade { inner });
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plk_cascade_load(path: *const c_char, out: *mut *mut PlkCascade) -> PlkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let f = File::open(path).map_err(|e| (PlkStatus::Io, format!("{path}: {e}")))?;
        let inner = load_cascade(BufReader::new(f)).map_err(|e| (PlkStatus::Model, format!("{path}: {e}")))?;
        *out = boxed(PlkCascade { inner });
        Ok(())
    })
}

/// # Safety
/// `c` must be a live cascade handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn plk_cascade_save(c: *const PlkCascade, path: *const c_char) -> PlkStatus {
    guard(|| {
        let c = ref_arg(c, "cascade")?;
        let path = str_arg(path, "path")?;
        let f = File::create(path).map_err(|e| (PlkStatus::Io, format!("{path}: {e}")))?;
        let mut w = BufWriter::new(f);
        save_cascade(&c.inner, &mut w).map_err(err(PlkStatus::Io))?;
        w.flush().map_err(err(PlkStatus::Io))
    })
}

/// Number of classifier nodes; 0 for NULL.
///
/// # Safety
/// `c` must be NULL or a live cascade handle.
#[no_mangle]
pub unsafe extern "C" fn plk_cascade_node_count(c: *const PlkCascade) -> usize {
    c.as_ref().map_or(0, |c| c.inner.nodes().len())
}

/// Held-out accuracy of node `index` (order: layer, axial, dir_x, dir_y,
/// header, speed).
///
/// # Safety
/// `c` must be a live cascade handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plk_cascade_node_accuracy(c: *const PlkCascade, index: usize, out: *mut f64) -> PlkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let c = ref_arg(c, "cascade")?;
        let node = c
            .inner
            .nodes()
            .get(index)
            .ok_or_else(|| (PlkStatus::InvalidArgument, format!("node index {index} out of range")))?;
        *out = node.accuracy();
        Ok(())
    })
}

/// # Safety
/// `c` must be NULL or a cascade handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn plk_cascade_free(c: *mut PlkCascade) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Classify every frame of `trace` and rebuild the toolpath. When `original`
/// is given, the reconstruction starts at its origin and `mte_percent`
/// receives the Mean Tendency Error; otherwise it starts at zero and
/// `mte_percent` receives NaN. `mte_percent` may be NULL.
///
/// # Safety
/// `c` and `trace` must be live handles, `original` NULL or live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plk_reconstruct(
    c: *const PlkCascade,
    trace: *const PlkTrace,
    original: *const PlkToolpath,
    out: *mut *mut PlkToolpath,
    mte_percent: *mut f64,
) -> PlkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let c = ref_arg(c, "cascade")?;
        let trace = ref_arg(trace, "trace")?;
        let original = original.as_ref().map(|o| &o.inner);
        let vectors = extract_features(&trace.inner, &c.inner.feature_config).map_err(err(PlkStatus::Data))?;
        let predicted = c.inner.classify_frames(&vectors).map_err(err(PlkStatus::Model))?;
        let cfg = ReconstructConfig { frame_ms: c.inner.feature_config.frame_ms, ..ReconstructConfig::default() };
        let start = original.map_or(Vec3::ZERO, |o| o.origin);
        let report =
            ReconstructionReport::build(&predicted, start, &cfg, original, None).map_err(err(PlkStatus::Data))?;
        if let Some(m) = mte_percent.as_mut() {
            *m = report.mte_percent().unwrap_or(f64::NAN);
        }
        *out = boxed(PlkToolpath { inner: report.reconstructed });
        Ok(())
    })
}
