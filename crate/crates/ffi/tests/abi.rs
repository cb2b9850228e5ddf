use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use printleak_ffi::*;

fn last_error() -> String {
    let p = plk_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn noiseless() -> PlkSimOptions {
    PlkSimOptions { noiseless: true, ..plk_sim_options_default() }
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(plk_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn gcode_round_trip() {
    let src = CString::new("; origin X0 Y0 Z0.2\nG1 X10 F600\nG1 Y10 E0.3 F600\n").unwrap();
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(plk_toolpath_from_gcode(src.as_ptr(), &mut t), PlkStatus::Ok);
        assert!(plk_last_error().is_null());
        assert_eq!(plk_toolpath_segment_count(t), 2);
        assert!((plk_toolpath_duration(t) - 2.0).abs() < 1e-12);
        let mut s = ptr::null_mut();
        assert_eq!(plk_toolpath_to_gcode(t, &mut s), PlkStatus::Ok);
        let text = CStr::from_ptr(s).to_str().unwrap().to_owned();
        plk_string_free(s);
        let again = CString::new(text).unwrap();
        let mut t2 = ptr::null_mut();
        assert_eq!(plk_toolpath_from_gcode(again.as_ptr(), &mut t2), PlkStatus::Ok);
        assert_eq!(plk_toolpath_segment_count(t2), 2);
        plk_toolpath_free(t2);
        plk_toolpath_free(t);
    }
}

#[test]
fn null_arguments_are_reported() {
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(plk_toolpath_from_gcode(ptr::null(), &mut t), PlkStatus::NullArgument);
        assert!(last_error().contains("gcode"));
        assert!(t.is_null());
        assert_eq!(plk_toolpath_square(ptr::null_mut()), PlkStatus::NullArgument);
        assert_eq!(plk_toolpath_segment_count(ptr::null()), 0);
        assert_eq!(plk_cascade_node_count(ptr::null()), 0);
        plk_toolpath_free(ptr::null_mut());
        plk_trace_free(ptr::null_mut());
        plk_cascade_free(ptr::null_mut());
        plk_string_free(ptr::null_mut());
    }
}

#[test]
fn bad_gcode_is_gcode_error() {
    let src = CString::new("G1 Xabc\n").unwrap();
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(plk_toolpath_from_gcode(src.as_ptr(), &mut t), PlkStatus::Gcode);
    }
    assert!(t.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn invalid_options_are_simulation_errors() {
    let mut t = ptr::null_mut();
    let mut trace = ptr::null_mut();
    let opts = PlkSimOptions { distance_cm: -1.0, ..plk_sim_options_default() };
    unsafe {
        assert_eq!(plk_toolpath_square(&mut t), PlkStatus::Ok);
        assert_eq!(plk_simulate(t, &opts, &mut trace), PlkStatus::Simulation);
        assert!(trace.is_null());
        plk_toolpath_free(t);
    }
}

#[test]
fn missing_files_are_io_errors_and_garbage_models_are_model_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = CString::new(dir.path().join("nope.plc").to_str().unwrap()).unwrap();
    let garbage_path = dir.path().join("garbage.plc");
    std::fs::write(&garbage_path, b"not a cascade").unwrap();
    let garbage = CString::new(garbage_path.to_str().unwrap()).unwrap();
    let mut c = ptr::null_mut();
    unsafe {
        assert_eq!(plk_cascade_load(missing.as_ptr(), &mut c), PlkStatus::Io);
        assert_eq!(plk_cascade_load(garbage.as_ptr(), &mut c), PlkStatus::Model);
        assert_eq!(plk_trace_read_csv(garbage.as_ptr(), &mut ptr::null_mut()), PlkStatus::Data);
    }
    assert!(c.is_null());
}

#[test]
fn noiseless_square_reconstructs_exactly_and_survives_files() {
    let dir = tempfile::tempdir().unwrap();
    let opts = noiseless();
    unsafe {
        let (mut cal, mut cal_trace, mut cascade) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(plk_toolpath_calibration(4, &mut cal), PlkStatus::Ok);
        assert_eq!(plk_simulate(cal, &opts, &mut cal_trace), PlkStatus::Ok);
        assert!((plk_trace_duration(cal_trace) - 96.0).abs() < 1e-9);
        assert_eq!(plk_cascade_train(cal, cal_trace, &opts, 7, &mut cascade), PlkStatus::Ok);
        assert_eq!(plk_cascade_node_count(cascade), 6);
        for i in 0..6 {
            let mut acc = 0.0;
            assert_eq!(plk_cascade_node_accuracy(cascade, i, &mut acc), PlkStatus::Ok);
            assert_eq!(acc, 1.0, "node {i}");
        }
        let mut acc = 0.0;
        assert_eq!(plk_cascade_node_accuracy(cascade, 6, &mut acc), PlkStatus::InvalidArgument);

        let model = CString::new(dir.path().join("m.plc").to_str().unwrap()).unwrap();
        assert_eq!(plk_cascade_save(cascade, model.as_ptr()), PlkStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(plk_cascade_load(model.as_ptr(), &mut loaded), PlkStatus::Ok);

        let (mut square, mut sq_trace) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(plk_toolpath_square(&mut square), PlkStatus::Ok);
        assert_eq!(plk_simulate(square, &opts, &mut sq_trace), PlkStatus::Ok);
        let csv = CString::new(dir.path().join("sq.csv").to_str().unwrap()).unwrap();
        assert_eq!(plk_trace_write_csv(sq_trace, csv.as_ptr()), PlkStatus::Ok);
        let mut reread = ptr::null_mut();
        assert_eq!(plk_trace_read_csv(csv.as_ptr(), &mut reread), PlkStatus::Ok);

        let mut rebuilt = ptr::null_mut();
        let mut mte = -1.0;
        assert_eq!(plk_reconstruct(loaded, reread, square, &mut rebuilt, &mut mte), PlkStatus::Ok);
        assert_eq!(mte, 0.0);
        assert_eq!(plk_toolpath_segment_count(rebuilt), plk_toolpath_segment_count(square));

        let mut unscored = ptr::null_mut();
        assert_eq!(plk_reconstruct(cascade, sq_trace, ptr::null(), &mut unscored, &mut mte), PlkStatus::Ok);
        assert!(mte.is_nan());

        for t in [cal, square, rebuilt, unscored] {
            plk_toolpath_free(t);
        }
        for t in [cal_trace, sq_trace, reread] {
            plk_trace_free(t);
        }
        plk_cascade_free(cascade);
        plk_cascade_free(loaded);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/printleak.h")).unwrap();
    for name in [
        "typedef struct PlkToolpath PlkToolpath;",
        "typedef struct PlkTrace PlkTrace;",
        "typedef struct PlkCascade PlkCascade;",
        "PLK_STATUS_OK = 0",
        "PLK_STATUS_PANIC = 8",
        "plk_last_error(void)",
        "plk_reconstruct(",
        "plk_cascade_train(",
        "plk_string_free(",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Compile the C example against the header and static library when a C
/// compiler and the archive are available.
#[test]
fn c_example_builds_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let archive = profile_dir.join("libprintleak_ffi.a");
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    if !archive.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or {}", archive.display());
        return;
    }
    let out = tempfile::tempdir().unwrap();
    let bin = out.path().join("square");
    let status = Command::new("cc")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("examples/square.c"))
        .arg(&archive)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.contains("MTE 0.00%"), "{stdout}");
}
