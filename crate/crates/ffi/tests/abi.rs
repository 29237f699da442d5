use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use maids_ffi::*;

fn benchmarks() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/benchmarks")
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe {
        maids_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn bound_and_errors() {
    let mut b = 0.0;
    let st = unsafe { maids_bound(1, 2, 2, 2, 3, 100, 1, 0.0, 0.0, &mut b) };
    assert_eq!(st, MaidsStatus::Ok);
    assert!((b - 2.06e4).abs() < 100.0);
    let st = unsafe { maids_bound(3, 2, 2, 2, 3, 100, 1, -1.0, 0.0, &mut b) };
    assert_eq!(st, MaidsStatus::InvalidArgument);
    assert!(last_error().contains("nonnegative"));
    let st = unsafe { maids_bound(1, 2, 2, 2, 3, 100, 1, 0.0, 0.0, ptr::null_mut()) };
    assert_eq!(st, MaidsStatus::NullPointer);
}

#[test]
fn env_round_trip() {
    let text = std::fs::read_to_string(benchmarks().join("envs/reveal_0.json")).unwrap();
    let json = CString::new(text).unwrap();
    let mut env = ptr::null_mut();
    assert_eq!(unsafe { maids_env_from_json(json.as_ptr(), &mut env) }, MaidsStatus::Ok);
    let (mut h, mut s, mut a, mut b) = (0, 0, 0, 0);
    assert_eq!(unsafe { maids_env_dims(env, &mut h, &mut s, &mut a, &mut b) }, MaidsStatus::Ok);
    assert_eq!((h, s, a, b), (2, 2, 2, 2));
    let mut v = f64::NAN;
    assert_eq!(unsafe { maids_env_nash_value(env, &mut v) }, MaidsStatus::Ok);
    assert!(v.is_finite() && (0.0..=2.0).contains(&v));
    unsafe { maids_env_free(env) };

    let bad = CString::new("{\"horizon\": 1}").unwrap();
    let mut env = ptr::null_mut();
    assert_eq!(unsafe { maids_env_from_json(bad.as_ptr(), &mut env) }, MaidsStatus::Json);
    assert!(env.is_null());
    assert_eq!(unsafe { maids_env_from_json(ptr::null(), &mut env) }, MaidsStatus::NullPointer);
}

#[test]
fn experiment_matches_core() {
    let path = benchmarks().join("zero_sum_random.json");
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { maids_config_load(cpath.as_ptr(), &mut cfg) }, MaidsStatus::Ok);
    assert_eq!(unsafe { maids_config_set_episodes(cfg, 30) }, MaidsStatus::Ok);
    let mut rep = ptr::null_mut();
    assert_eq!(unsafe { maids_run(cfg, &mut rep) }, MaidsStatus::Ok);

    let mut core_cfg = maids_core::harness::ExperimentConfig::load(&path).unwrap();
    core_cfg.episodes = 30;
    let core = maids_core::harness::run_experiment(&core_cfg).unwrap();

    let (mut algs, mut eps) = (0, 0);
    assert_eq!(unsafe { maids_report_shape(rep, &mut algs, &mut eps) }, MaidsStatus::Ok);
    assert_eq!((algs, eps), (core.algorithms.len(), 30));
    for (i, a) in core.algorithms.iter().enumerate() {
        let (mut m, mut se) = (0.0, 0.0);
        assert_eq!(unsafe { maids_report_final_regret(rep, i, &mut m, &mut se) }, MaidsStatus::Ok);
        assert_eq!(m, a.final_mean());
        let mut c = 0.0;
        assert_eq!(unsafe { maids_report_cum_regret(rep, i, 9, &mut c) }, MaidsStatus::Ok);
        assert_eq!(c, a.mean_cum_regret[9]);
    }
    let mut c = 0.0;
    assert_eq!(unsafe { maids_report_cum_regret(rep, algs, 0, &mut c) }, MaidsStatus::OutOfRange);

    let mut csv = ptr::null_mut();
    assert_eq!(unsafe { maids_report_csv(rep, &mut csv) }, MaidsStatus::Ok);
    let text = unsafe { CStr::from_ptr(csv) }.to_bytes().to_vec();
    assert_eq!(text, maids_core::harness::csv_bytes(&core).unwrap());
    unsafe { maids_string_free(csv) };

    let dir = tempfile::tempdir().unwrap();
    let cdir = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { maids_report_write(rep, cdir.as_ptr()) }, MaidsStatus::Ok);
    assert!(dir.path().join("report.json").exists());

    unsafe {
        maids_report_free(rep);
        maids_config_free(cfg);
    }
}

#[test]
fn header_is_current_and_c_links() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(crate_dir.join("include/maids.h")).unwrap();
    for name in ["maids_bound", "maids_run", "maids_report_free", "MAIDS_STATUS_OUT_OF_RANGE", "typedef struct MaidsEnv MaidsEnv"] {
        assert!(header.contains(name), "{name} missing from header");
    }

    // target/<profile>/deps/abi-* -> target/<profile>/libmaids_ffi.a
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libmaids_ffi.a");
    assert!(lib.exists(), "static library not built at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(crate_dir.join("examples/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("a C compiler named cc");
    assert!(status.success());
    let out = Command::new(&exe).arg(benchmarks().join("zero_sum_finite.json")).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("algorithm 2 regret"));
    assert!(stdout.trim_end().ends_with(&format!("ok {}", env!("CARGO_PKG_VERSION"))));
}
