//! C ABI for the allocator.
//!
//! Conventions: every fallible function returns an [`NslStatus`]; on failure
//! a message is stored per thread and can be copied out with
//! [`nsl_last_error`]. Results are written through out-pointers. Objects
//! (`NslTable`, `NslConfig`, `NslAllocation`) are opaque and owned by the
//! caller once created; release them with their `_free` function. Powers are
//! linear watts unless a name says dBm; mean SNRs are linear, per watt.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use noma_slice::alloc::{AllocationResult, Algorithm};
use noma_slice::channel::{distance_from_mean_snr, mean_snr_from_distance, Geometry};
use noma_slice::exper::{allocate_drop, ScenarioConfig, SchemeSpec, SweepPoint};
use noma_slice::grid::AccessScheme;
use noma_slice::outage::{estimate_outage, single_freq_power, Interference, OutageLookup, OutageTable, TableAxes, TableParams};
use noma_slice::waterfill::{embb_power, il_power, sic_power, waterfill, ParallelChannels};
use noma_slice::Error;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NslStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    Infeasible = 3,
    InfeasibleLatency = 4,
    UndefinedInterferenceLimited = 5,
    OutOfModel = 6,
    TableExhausted = 7,
    NotCovered = 8,
    TableMismatch = 9,
    TableFormat = 10,
    Config = 11,
    Io = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NslScheme {
    Oma = 0,
    Noma = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NslAlgorithm {
    Feasible = 0,
    Bcd = 1,
}

/// Monte Carlo outage estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NslOutageEstimate {
    pub p_hat: f64,
    pub outages: u64,
    pub trials: u64,
    /// Three binomial standard errors.
    pub ci_halfwidth: f64,
}

/// Scalar summary of an allocation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NslAllocationSummary {
    pub frequencies: usize,
    pub urllc_frequencies: usize,
    pub total_w: f64,
    pub embb_w: f64,
    pub urllc_w: f64,
    pub embb_rate: f64,
    pub urllc_rate: f64,
    pub table_power_dbm: f64,
    pub evidence: NslOutageEstimate,
    pub sic_satisfied: bool,
    pub iterations: usize,
}

/// Outage look-up table.
pub struct NslTable(OutageTable);

/// Scenario configuration.
pub struct NslConfig(ScenarioConfig);

/// Result of one allocation.
pub struct NslAllocation(AllocationResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn status_of(e: &Error) -> NslStatus {
    match e {
        Error::InvalidArgument(_) => NslStatus::InvalidArgument,
        Error::InfeasibleLatency { .. } => NslStatus::InfeasibleLatency,
        Error::Infeasible(_) => NslStatus::Infeasible,
        Error::UndefinedInterferenceLimited => NslStatus::UndefinedInterferenceLimited,
        Error::OutOfModel { .. } => NslStatus::OutOfModel,
        Error::TableExhausted { .. } => NslStatus::TableExhausted,
        Error::NotCovered(_) => NslStatus::NotCovered,
        Error::TableMismatch(_) => NslStatus::TableMismatch,
        Error::TableFormat(_) => NslStatus::TableFormat,
        Error::Config(_) => NslStatus::Config,
        Error::Io(_) | Error::Csv(_) => NslStatus::Io,
    }
}

struct Fail(NslStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

type FfiResult = Result<(), Fail>;

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> FfiResult) -> NslStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            NslStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NslStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(NslStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(NslStatus::InvalidArgument, msg.into())
}

unsafe fn input<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn output<'a>(p: *mut f64, n: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, n))
}

unsafe fn write<T>(p: *mut T, v: T, what: &str) -> FfiResult {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

fn scheme(s: NslScheme) -> AccessScheme {
    match s {
        NslScheme::Oma => AccessScheme::Oma,
        NslScheme::Noma => AccessScheme::Noma,
    }
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length
/// excluding the terminator, so a caller can size a second attempt.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn nsl_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nsl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Water-filling over `n` parallel channels with positive `gains` for a
/// total of `target_bits`. Writes `n` powers and the water level.
///
/// # Safety
/// `gains` and `powers` must point to `n` doubles; `level` may be null.
#[no_mangle]
pub unsafe extern "C" fn nsl_waterfill(
    gains: *const f64,
    n: usize,
    target_bits: f64,
    powers: *mut f64,
    level: *mut f64,
) -> NslStatus {
    guard(|| {
        let g = input(gains, n, "gains")?;
        let out = output(powers, n, "powers")?;
        let wf = waterfill(&ParallelChannels::new(g.to_vec(), target_bits)?)?;
        out.copy_from_slice(&wf.powers);
        if !level.is_null() {
            level.write(wf.level);
        }
        Ok(())
    })
}

/// Minimum eMBB powers reaching `rate` on average over `n` channels.
///
/// # Safety
/// `snr` and `powers` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn nsl_embb_power(snr: *const f64, n: usize, rate: f64, powers: *mut f64) -> NslStatus {
    guard(|| {
        let p = embb_power(input(snr, n, "snr")?, rate)?;
        output(powers, n, "powers")?.copy_from_slice(&p);
        Ok(())
    })
}

/// Minimum URLLC powers letting the eMBB receiver cancel the URLLC stream.
///
/// # Safety
/// `embb_power`, `embb_snr` and `powers` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn nsl_sic_power(
    scheme_kind: NslScheme,
    embb_power: *const f64,
    embb_snr: *const f64,
    n: usize,
    rate: f64,
    powers: *mut f64,
) -> NslStatus {
    guard(|| {
        let p = sic_power(scheme(scheme_kind), input(embb_power, n, "embb_power")?, input(embb_snr, n, "embb_snr")?, rate)?;
        output(powers, n, "powers")?.copy_from_slice(&p);
        Ok(())
    })
}

/// Interference-limited URLLC power bound.
///
/// # Safety
/// `embb_power` and `powers` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn nsl_il_power(embb_power: *const f64, n: usize, rate: f64, powers: *mut f64) -> NslStatus {
    guard(|| {
        let p = il_power(input(embb_power, n, "embb_power")?, rate)?;
        output(powers, n, "powers")?.copy_from_slice(&p);
        Ok(())
    })
}

/// Closed-form single-resource URLLC power for outage `epsilon`.
///
/// # Safety
/// `power` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nsl_single_freq_power(
    rate: f64,
    mean_snr: f64,
    epsilon: f64,
    embb_power: f64,
    power: *mut f64,
) -> NslStatus {
    guard(|| write(power, single_freq_power(rate, mean_snr, epsilon, embb_power)?, "power"))
}

/// Distance [m] at which the mean SNR equals `mean_snr_db`, default geometry.
///
/// # Safety
/// `distance_m` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nsl_distance_from_snr_db(mean_snr_db: f64, distance_m: *mut f64) -> NslStatus {
    guard(|| {
        if !mean_snr_db.is_finite() {
            return Err(invalid("SNR must be finite"));
        }
        let g = Geometry::default();
        let snr = 10f64.powf(mean_snr_db / 10.0);
        write(distance_m, distance_from_mean_snr(snr, &g, g.noise_w()), "distance_m")
    })
}

/// Linear mean SNR per watt at `distance_m`, default geometry.
///
/// # Safety
/// `mean_snr` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nsl_mean_snr_from_distance(distance_m: f64, mean_snr: *mut f64) -> NslStatus {
    guard(|| {
        let g = Geometry::default();
        write(mean_snr, mean_snr_from_distance(distance_m, &g, g.noise_w())?, "mean_snr")
    })
}

/// Monte Carlo outage estimate for `n` URLLC frequencies.
///
/// # Safety
/// `urllc_power` and `embb_power` must point to `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nsl_estimate_outage(
    urllc_power: *const f64,
    embb_power: *const f64,
    n: usize,
    mean_snr: f64,
    rate: f64,
    trials: u64,
    seed: u64,
    out: *mut NslOutageEstimate,
) -> NslStatus {
    guard(|| {
        let e = estimate_outage(input(urllc_power, n, "urllc_power")?, input(embb_power, n, "embb_power")?, mean_snr, rate, trials, seed)?;
        write(out, NslOutageEstimate { p_hat: e.p_hat, outages: e.outages, trials: e.trials, ci_halfwidth: e.ci_halfwidth }, "out")
    })
}

/// Builds a table on the power grid `power_min_dbm..=power_max_dbm` with
/// interference rows on the same grid plus the interference-free row.
///
/// # Safety
/// `table` must be a valid pointer; the new handle is written there.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn nsl_table_build(
    mean_snr: f64,
    freqs: usize,
    rate: f64,
    trials: u64,
    seed: u64,
    power_min_dbm: f64,
    power_max_dbm: f64,
    power_step_db: f64,
    table: *mut *mut NslTable,
) -> NslStatus {
    guard(|| {
        if table.is_null() {
            return Err(null("table"));
        }
        let params = TableParams { mean_snr, freqs, rate, minislots: 1, trials, seed };
        let axes = TableAxes::uniform(power_min_dbm, power_max_dbm, power_step_db)?;
        let t = OutageTable::build(params, axes)?;
        table.write(Box::into_raw(Box::new(NslTable(t))));
        Ok(())
    })
}

/// Loads a table saved in either encoding.
///
/// # Safety
/// `path` must be a NUL-terminated string; `table` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nsl_table_load(path: *const c_char, table: *mut *mut NslTable) -> NslStatus {
    guard(|| {
        let p = text(path, "path")?;
        if table.is_null() {
            return Err(null("table"));
        }
        let t = OutageTable::load(p)?;
        table.write(Box::into_raw(Box::new(NslTable(t))));
        Ok(())
    })
}

/// Saves a table; a `.bin` or `.nsot` extension selects the binary encoding.
///
/// # Safety
/// `table` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn nsl_table_save(table: *const NslTable, path: *const c_char) -> NslStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        t.0.save(text(path, "path")?)?;
        Ok(())
    })
}

/// Smallest grid power [dBm] meeting `epsilon` at interference `embb_power` watts.
///
/// # Safety
/// `table` must come from this library; `power_dbm` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nsl_table_min_feasible_power(
    table: *const NslTable,
    embb_power: f64,
    epsilon: f64,
    power_dbm: *mut f64,
) -> NslStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        write(power_dbm, t.0.min_feasible_power(embb_power, epsilon)?, "power_dbm")
    })
}

/// Tabulated outage at grid point (`power_dbm`, `interference_dbm`); pass
/// `has_interference = false` for the interference-free row.
///
/// # Safety
/// `table` must come from this library; `p_hat` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nsl_table_value(
    table: *const NslTable,
    power_dbm: f64,
    has_interference: bool,
    interference_dbm: f64,
    p_hat: *mut f64,
) -> NslStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        let row = if has_interference { Interference::Dbm(interference_dbm) } else { Interference::None };
        let v = t.0.lookup(power_dbm, row).ok_or_else(|| Fail(NslStatus::NotCovered, "no such grid point".into()))?;
        write(p_hat, v, "p_hat")
    })
}

/// # Safety
/// `table` must be null or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nsl_table_free(table: *mut NslTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Default configuration.
#[no_mangle]
pub extern "C" fn nsl_config_default() -> *mut NslConfig {
    Box::into_raw(Box::new(NslConfig(ScenarioConfig::default())))
}

/// Parses a TOML configuration; missing fields take their defaults.
///
/// # Safety
/// `toml` must be NUL-terminated; `config` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nsl_config_from_toml(toml: *const c_char, config: *mut *mut NslConfig) -> NslStatus {
    guard(|| {
        let cfg = ScenarioConfig::from_toml(text(toml, "toml")?)?;
        if config.is_null() {
            return Err(null("config"));
        }
        config.write(Box::into_raw(Box::new(NslConfig(cfg))));
        Ok(())
    })
}

/// Overrides the trial counts; zero leaves a count unchanged.
///
/// # Safety
/// `config` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn nsl_config_set_trials(
    config: *mut NslConfig,
    table_trials: u64,
    crn_trials: u64,
    evidence_trials: u64,
) -> NslStatus {
    guard(|| {
        let c = &mut config.as_mut().ok_or_else(|| null("config"))?.0;
        if table_trials > 0 {
            c.table.trials = table_trials;
        }
        if crn_trials > 0 {
            c.bcd.crn_trials = crn_trials as usize;
        }
        if evidence_trials > 0 {
            c.evidence_trials = evidence_trials;
        }
        Ok(())
    })
}

/// Sets the outage target and base seed.
///
/// # Safety
/// `config` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn nsl_config_set_target(config: *mut NslConfig, epsilon: f64, seed: u64) -> NslStatus {
    guard(|| {
        let c = &mut config.as_mut().ok_or_else(|| null("config"))?.0;
        let mut next = c.clone();
        next.traffic.epsilon = epsilon;
        next.seed = seed;
        next.validate()?;
        *c = next;
        Ok(())
    })
}

/// # Safety
/// `config` must be null or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nsl_config_free(config: *mut NslConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Allocates fading realization `drop` for users at the given distances.
/// `scheme` is `noma`, `noma-<k>` or `o-<k>`. `table` may be null, in which
/// case the needed table rows are estimated on the fly.
///
/// # Safety
/// `config` must come from this library; `table` must be null or come from
/// this library; `scheme` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nsl_allocate(
    config: *const NslConfig,
    scheme_name: *const c_char,
    algorithm: NslAlgorithm,
    urllc_distance_m: f64,
    embb_distance_m: f64,
    drop_index: u64,
    table: *const NslTable,
    out: *mut *mut NslAllocation,
) -> NslStatus {
    guard(|| {
        let cfg = &config.as_ref().ok_or_else(|| null("config"))?.0;
        let spec: SchemeSpec = text(scheme_name, "scheme")?.parse()?;
        if out.is_null() {
            return Err(null("out"));
        }
        let algo = match algorithm {
            NslAlgorithm::Feasible => Algorithm::Feasible,
            NslAlgorithm::Bcd => Algorithm::Bcd,
        };
        let point = SweepPoint::at_distances(&cfg.geometry, urllc_distance_m, embb_distance_m)?;
        let t = table.as_ref().map(|t| &t.0 as &dyn OutageLookup);
        let r = allocate_drop(cfg, &spec, &point, drop_index as usize, algo, t)?;
        out.write(Box::into_raw(Box::new(NslAllocation(r))));
        Ok(())
    })
}

/// # Safety
/// `allocation` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nsl_allocation_summary(
    allocation: *const NslAllocation,
    out: *mut NslAllocationSummary,
) -> NslStatus {
    guard(|| {
        let r = &allocation.as_ref().ok_or_else(|| null("allocation"))?.0;
        let e = r.evidence;
        let s = NslAllocationSummary {
            frequencies: r.embb_power.len(),
            urllc_frequencies: r.sets.urllc_freqs.len(),
            total_w: r.total_w,
            embb_w: r.embb_total_w,
            urllc_w: r.urllc_total_w,
            embb_rate: r.embb_rate,
            urllc_rate: r.urllc_rate,
            table_power_dbm: r.table_power_dbm,
            evidence: NslOutageEstimate { p_hat: e.p_hat, outages: e.outages, trials: e.trials, ci_halfwidth: e.ci_halfwidth },
            sic_satisfied: r.sic_satisfied,
            iterations: r.iterations,
        };
        write(out, s, "out")
    })
}

/// Copies per-frequency eMBB, URLLC and SIC-floor powers (each `len`
/// entries, `len` equal to the grid size). Any output may be null.
///
/// # Safety
/// `allocation` must come from this library; non-null outputs must point to
/// `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nsl_allocation_powers(
    allocation: *const NslAllocation,
    embb: *mut f64,
    urllc: *mut f64,
    sic: *mut f64,
    len: usize,
) -> NslStatus {
    guard(|| {
        let r = &allocation.as_ref().ok_or_else(|| null("allocation"))?.0;
        let n = r.embb_power.len();
        if len < n {
            return Err(Fail(NslStatus::BufferTooSmall, format!("need {n} entries, got {len}")));
        }
        for (dst, src) in [(embb, &r.embb_power), (urllc, &r.urllc_power), (sic, &r.sic_power)] {
            if !dst.is_null() {
                slice::from_raw_parts_mut(dst, n).copy_from_slice(src.as_slice());
            }
        }
        Ok(())
    })
}

/// Copies the allocation as JSON into `buf`. Returns the JSON length
/// excluding the terminator; if that is `>= len` the output was truncated.
///
/// # Safety
/// `allocation` must come from this library; `buf` must be null or point to
/// `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn nsl_allocation_json(allocation: *const NslAllocation, buf: *mut c_char, len: usize) -> usize {
    let Some(a) = allocation.as_ref() else { return 0 };
    let json = serde_json::to_string(&a.0).unwrap_or_default();
    if !buf.is_null() && len > 0 {
        let n = json.len().min(len - 1);
        ptr::copy_nonoverlapping(json.as_ptr().cast::<c_char>(), buf, n);
        *buf.add(n) = 0;
    }
    json.len()
}

/// # Safety
/// `allocation` must be null or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nsl_allocation_free(allocation: *mut NslAllocation) {
    if !allocation.is_null() {
        drop(Box::from_raw(allocation));
    }
}
