//! C ABI over the `tofml` simulator.
//!
//! Every fallible function returns a [`TofmlStatus`]. On failure the message
//! is kept per thread and can be copied out with
//! [`tofml_last_error_message`]. Handles are opaque and owned by the caller
//! until passed to their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use tofml::env::{Env, RoundDecision};
use tofml::harness::{build_env, run_experiment, ExperimentConfig};
use tofml::metrics::{vol_accuracy, vol_energy, vol_time, AouState};
use tofml::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TofmlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    DimensionMismatch = 4,
    NumericAbort = 5,
    Io = 6,
    Format = 7,
    Mismatch = 8,
    Panic = 9,
}

/// Simulation environment handle.
pub struct TofmlEnv {
    env: Env,
}

/// Scalar outcome of one environment step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TofmlStepResult {
    pub reward: f64,
    /// Unclipped weighted value of learning.
    pub objective: f64,
    /// Mean personalised accuracy after the round.
    pub mean_accuracy: f64,
    pub round_time: f64,
    pub feasible: bool,
    pub done: bool,
}

/// Final-episode summary of a run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TofmlRunSummary {
    pub episodes: usize,
    pub final_reward: f64,
    pub final_reward_ma20: f64,
    pub final_vol_ma20: f64,
    pub final_accuracy: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> TofmlStatus {
    match e {
        Error::DimensionMismatch { .. } => TofmlStatus::DimensionMismatch,
        Error::EmptyBatch | Error::InvalidArgument(_) => TofmlStatus::InvalidArgument,
        Error::NonFinite(_) | Error::NumericAbort { .. } => TofmlStatus::NumericAbort,
        Error::InvalidConfig(_) => TofmlStatus::InvalidConfig,
        Error::Format { .. } => TofmlStatus::Format,
        Error::Mismatch(_) => TofmlStatus::Mismatch,
        Error::Io { .. } => TofmlStatus::Io,
    }
}

struct Failure(TofmlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(TofmlStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording its error and converting panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TofmlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            TofmlStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            TofmlStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(TofmlStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn copy_state(src: &[f64], dst: &mut [f64]) -> Result<(), Failure> {
    if dst.len() != src.len() {
        return Err(Error::DimensionMismatch {
            context: "state buffer",
            expected: src.len(),
            actual: dst.len(),
        }
        .into());
    }
    dst.copy_from_slice(src);
    Ok(())
}

fn parse_config(toml: *const c_char) -> Result<ExperimentConfig, Failure> {
    let text = unsafe { str_arg(toml, "config")? };
    Ok(ExperimentConfig::from_toml(text)?)
}

/// Copies the calling thread's last error message into `buf` as a
/// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
/// message length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn tofml_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tofml_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds an environment from a TOML configuration (empty string for the
/// defaults) and stores the handle in `*out`.
///
/// # Safety
/// `config_toml` must be a valid C string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tofml_env_new(config_toml: *const c_char, out: *mut *mut TofmlEnv) -> TofmlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = parse_config(config_toml)?;
        let env = build_env(&cfg)?;
        *out = Box::into_raw(Box::new(TofmlEnv { env }));
        Ok(())
    })
}

/// Releases an environment. Null is ignored.
///
/// # Safety
/// `env` must come from [`tofml_env_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tofml_env_free(env: *mut TofmlEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Number of devices, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tofml_env_num_devices(env: *const TofmlEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.num_devices())
}

/// Length of the encoded state vector, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tofml_env_state_len(env: *const TofmlEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.state_len())
}

/// Starts an episode and writes the encoded initial state.
///
/// # Safety
/// `env` must be a live handle; `state` must be valid for `state_len` writes.
#[no_mangle]
pub unsafe extern "C" fn tofml_env_reset(
    env: *mut TofmlEnv,
    seed: u64,
    state: *mut f64,
    state_len: usize,
) -> TofmlStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        let out = slice_out(state, state_len, "state")?;
        let s = env.env.reset(seed)?;
        copy_state(&s.encoded, out)
    })
}

/// Executes one round. `mask`, `power` and `freq` hold one entry per
/// device; a nonzero mask byte schedules the device. The next encoded
/// state is written to `next_state`.
///
/// # Safety
/// `env` must be a live handle, the input arrays valid for `devices`
/// reads, `result` valid for a write and `next_state` for `state_len`
/// writes.
#[no_mangle]
pub unsafe extern "C" fn tofml_env_step(
    env: *mut TofmlEnv,
    mask: *const u8,
    power: *const f64,
    freq: *const f64,
    devices: usize,
    result: *mut TofmlStepResult,
    next_state: *mut f64,
    state_len: usize,
) -> TofmlStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        let result = result.as_mut().ok_or_else(|| null("result"))?;
        let decision = RoundDecision {
            mask: slice_arg(mask, devices, "mask")?.iter().map(|&z| z != 0).collect(),
            power: slice_arg(power, devices, "power")?.to_vec(),
            freq: slice_arg(freq, devices, "freq")?.to_vec(),
        };
        let out_state = slice_out(next_state, state_len, "next_state")?;
        let out = env.env.step(&decision)?;
        copy_state(&out.next_state.encoded, out_state)?;
        *result = TofmlStepResult {
            reward: out.reward,
            objective: out.info.objective,
            mean_accuracy: out.info.mean_accuracy,
            round_time: out.info.costs.round_time,
            feasible: out.info.feasible,
            done: out.done,
        };
        Ok(())
    })
}

/// Runs a full experiment. Files are written under `out_dir` unless it is
/// null.
///
/// # Safety
/// `config_toml` must be a valid C string, `out_dir` null or a valid C
/// string, and `summary` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn tofml_run_experiment(
    config_toml: *const c_char,
    out_dir: *const c_char,
    summary: *mut TofmlRunSummary,
) -> TofmlStatus {
    guard(|| {
        let cfg = parse_config(config_toml)?;
        let dir = if out_dir.is_null() {
            None
        } else {
            Some(Path::new(str_arg(out_dir, "out_dir")?))
        };
        let record = run_experiment(&cfg, dir)?;
        if let Some(s) = summary.as_mut() {
            let last = record.episodes.last().expect("validated configs run at least one episode");
            *s = TofmlRunSummary {
                episodes: record.episodes.len(),
                final_reward: last.reward,
                final_reward_ma20: last.reward_ma,
                final_vol_ma20: last.vol_ma,
                final_accuracy: last.final_accuracy,
            };
        }
        Ok(())
    })
}

/// Weighted value of learning of one device:
/// `η1·V^A − η2·V^T − η3·V^E`.
#[no_mangle]
pub extern "C" fn tofml_vol(
    accuracy: f64,
    acc_req: f64,
    round_time: f64,
    t_max: f64,
    energy: f64,
    e_max: f64,
    eta_accuracy: f64,
    eta_time: f64,
    eta_energy: f64,
) -> f64 {
    eta_accuracy * vol_accuracy(accuracy, acc_req) - eta_time * vol_time(round_time, t_max)
        - eta_energy * vol_energy(energy, e_max)
}

/// Advances ages of update in place: scheduled devices reset to 1, the
/// others grow by 1.
///
/// # Safety
/// `ages` and `mask` must be valid for `devices` elements.
#[no_mangle]
pub unsafe extern "C" fn tofml_update_aou(ages: *mut u64, mask: *const u8, devices: usize) -> TofmlStatus {
    guard(|| {
        let ages = slice_out(ages, devices, "ages")?;
        let mask: Vec<bool> = slice_arg(mask, devices, "mask")?.iter().map(|&z| z != 0).collect();
        let mut state = AouState { ages: ages.to_vec() };
        state.update(&mask)?;
        ages.copy_from_slice(&state.ages);
        Ok(())
    })
}
