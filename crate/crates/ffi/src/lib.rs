//! C ABI over maids-core.
//!
//! Every fallible call returns a `MaidsStatus`. On failure the message is
//! kept per thread and can be read with `maids_last_error`. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use maids_core::bounds::{theoretical_bounds, BoundDims, CompressionExtra, Theorem};
use maids_core::env::KernelEnv;
use maids_core::harness::{csv_bytes, report_json, run_experiment, write_outputs, ExperimentConfig, RegretReport};
use maids_core::mg::{solve_nash, TabularZeroSumMG};
use maids_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaidsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Json = 4,
    Io = 5,
    EnumerationTooLarge = 6,
    DegeneratePosterior = 7,
    Solver = 8,
    OutOfRange = 9,
    Panic = 10,
}

/// Zero-sum tabular Markov game.
pub struct MaidsEnv(TabularZeroSumMG);

/// Parsed experiment configuration.
pub struct MaidsConfig(ExperimentConfig);

/// Finished experiment together with the configuration that produced it.
pub struct MaidsReport {
    config: ExperimentConfig,
    report: RegretReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> MaidsStatus {
    match e {
        Error::InvalidArgument(_) => MaidsStatus::InvalidArgument,
        Error::Json(_) => MaidsStatus::Json,
        Error::Io(_) => MaidsStatus::Io,
        Error::EnumerationTooLarge { .. } => MaidsStatus::EnumerationTooLarge,
        Error::DegeneratePosterior(_) => MaidsStatus::DegeneratePosterior,
        Error::ConvergenceFailure { .. } | Error::Infeasible | Error::Unbounded => MaidsStatus::Solver,
    }
}

type Outcome = Result<(), (MaidsStatus, String)>;

fn fail<T>(status: MaidsStatus, msg: impl Into<String>) -> Result<T, (MaidsStatus, String)> {
    Err((status, msg.into()))
}

trait Lift<T> {
    fn lift(self) -> Result<T, (MaidsStatus, String)>;
}

impl<T> Lift<T> for maids_core::Result<T> {
    fn lift(self) -> Result<T, (MaidsStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn guard(f: impl FnOnce() -> Outcome) -> MaidsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            MaidsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside maids-core".into());
            MaidsStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, (MaidsStatus, String)> {
    if p.is_null() {
        return fail(MaidsStatus::NullPointer, "null string");
    }
    CStr::from_ptr(p).to_str().or_else(|_| fail(MaidsStatus::InvalidUtf8, "string is not UTF-8"))
}

unsafe fn put<T>(out: *mut T, v: T) -> Outcome {
    if out.is_null() {
        return fail(MaidsStatus::NullPointer, "null output pointer");
    }
    out.write(v);
    Ok(())
}

unsafe fn get<'a, T>(p: *const T) -> Result<&'a T, (MaidsStatus, String)> {
    p.as_ref().map_or_else(|| fail(MaidsStatus::NullPointer, "null handle"), Ok)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn maids_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn maids_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn maids_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Regret bound for theorem `thm` (1 to 4), natural log. `information`
/// and `epsilon` are used by theorem 3 only.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn maids_bound(
    thm: u8,
    states: usize,
    actions_max: usize,
    actions_min: usize,
    horizon: usize,
    episodes: usize,
    players: usize,
    information: f64,
    epsilon: f64,
    out: *mut f64,
) -> MaidsStatus {
    guard(|| {
        let which = Theorem::from_number(thm).lift()?;
        let d = BoundDims {
            states,
            actions_max,
            actions_min,
            horizon,
            episodes,
            players,
        };
        let extra = (which == Theorem::Thm3).then_some(CompressionExtra { information, epsilon });
        put(out, theoretical_bounds(&d, which, extra).lift()?)
    })
}

/// Parses a zero-sum environment from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn maids_env_from_json(json: *const c_char, out: *mut *mut MaidsEnv) -> MaidsStatus {
    guard(|| {
        let env = TabularZeroSumMG::from_json(text(json)?).lift()?;
        put(out, Box::into_raw(Box::new(MaidsEnv(env))))
    })
}

/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn maids_env_free(env: *mut MaidsEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Writes horizon, states and the two action counts.
///
/// # Safety
/// `env` must be a live handle and the outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn maids_env_dims(
    env: *const MaidsEnv,
    horizon: *mut usize,
    states: *mut usize,
    actions_max: *mut usize,
    actions_min: *mut usize,
) -> MaidsStatus {
    guard(|| {
        let d = get(env)?.0.dims();
        put(horizon, d.horizon)?;
        put(states, d.num_states)?;
        put(actions_max, d.actions_max)?;
        put(actions_min, d.actions_min)
    })
}

/// Nash value at the initial state.
///
/// # Safety
/// `env` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn maids_env_nash_value(env: *const MaidsEnv, out: *mut f64) -> MaidsStatus {
    guard(|| {
        let e = &get(env)?.0;
        let sol = solve_nash(e).lift()?;
        put(out, sol.value(e.initial_state()))
    })
}

/// Loads an experiment config from a file; relative environment paths
/// resolve against the file's directory.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn maids_config_load(path: *const c_char, out: *mut *mut MaidsConfig) -> MaidsStatus {
    guard(|| {
        let cfg = ExperimentConfig::load(Path::new(text(path)?)).lift()?;
        put(out, Box::into_raw(Box::new(MaidsConfig(cfg))))
    })
}

/// Parses an experiment config from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn maids_config_from_json(json: *const c_char, out: *mut *mut MaidsConfig) -> MaidsStatus {
    guard(|| {
        let cfg = ExperimentConfig::from_json(text(json)?).lift()?;
        put(out, Box::into_raw(Box::new(MaidsConfig(cfg))))
    })
}

/// Overrides the episode count.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn maids_config_set_episodes(config: *mut MaidsConfig, episodes: usize) -> MaidsStatus {
    guard(|| {
        let Some(c) = config.as_mut() else {
            return fail(MaidsStatus::NullPointer, "null handle");
        };
        if episodes == 0 {
            return fail(MaidsStatus::InvalidArgument, "episodes must be positive");
        }
        c.0.episodes = episodes;
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn maids_config_free(config: *mut MaidsConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the experiment. The config handle stays owned by the caller.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn maids_run(config: *const MaidsConfig, out: *mut *mut MaidsReport) -> MaidsStatus {
    guard(|| {
        let config = get(config)?.0.clone();
        let report = run_experiment(&config).lift()?;
        put(out, Box::into_raw(Box::new(MaidsReport { config, report })))
    })
}

/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn maids_report_free(report: *mut MaidsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `report` must be a live handle and the outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn maids_report_shape(report: *const MaidsReport, algorithms: *mut usize, episodes: *mut usize) -> MaidsStatus {
    guard(|| {
        let r = &get(report)?.report;
        put(algorithms, r.algorithms.len())?;
        put(episodes, r.episodes)
    })
}

/// Mean cumulative regret over prior draws after `episode + 1` episodes.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn maids_report_cum_regret(report: *const MaidsReport, algorithm: usize, episode: usize, out: *mut f64) -> MaidsStatus {
    guard(|| {
        let r = &get(report)?.report;
        let Some(v) = r.algorithms.get(algorithm).and_then(|a| a.mean_cum_regret.get(episode)) else {
            return fail(MaidsStatus::OutOfRange, format!("no entry for algorithm {algorithm}, episode {episode}"));
        };
        put(out, *v)
    })
}

/// Final cumulative regret: mean and standard error across prior draws.
///
/// # Safety
/// `report` must be a live handle and the outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn maids_report_final_regret(
    report: *const MaidsReport,
    algorithm: usize,
    mean: *mut f64,
    stderr: *mut f64,
) -> MaidsStatus {
    guard(|| {
        let r = &get(report)?.report;
        let Some(a) = r.algorithms.get(algorithm) else {
            return fail(MaidsStatus::OutOfRange, format!("no algorithm {algorithm}"));
        };
        put(mean, a.final_mean())?;
        put(stderr, a.final_stderr())
    })
}

/// Report as JSON. Free the result with `maids_string_free`.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn maids_report_json(report: *const MaidsReport, out: *mut *mut c_char) -> MaidsStatus {
    guard(|| {
        let r = get(report)?;
        let s = report_json(&r.config, &r.report).lift()?;
        put(out, CString::new(s).unwrap_or_default().into_raw())
    })
}

/// Per-episode CSV. Free the result with `maids_string_free`.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn maids_report_csv(report: *const MaidsReport, out: *mut *mut c_char) -> MaidsStatus {
    guard(|| {
        let bytes = csv_bytes(&get(report)?.report).lift()?;
        put(out, CString::new(bytes).unwrap_or_default().into_raw())
    })
}

/// Writes `regret.csv` and `report.json` into `dir`.
///
/// # Safety
/// `report` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn maids_report_write(report: *const MaidsReport, dir: *const c_char) -> MaidsStatus {
    guard(|| {
        let r = get(report)?;
        write_outputs(&r.config, &r.report, Path::new(text(dir)?)).lift()
    })
}
