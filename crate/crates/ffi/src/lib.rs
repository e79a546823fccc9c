//! C ABI over the simulator.
//!
//! Traces, configurations and reports cross the boundary as opaque handles
//! that the caller releases with the matching `*_free` function. Every call
//! returns a [`CmdsimStatus`]; on failure [`cmdsim_last_error`] describes the
//! most recent error on the calling thread. Strings returned through out
//! parameters are owned by the caller and released with
//! [`cmdsim_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cmdsim::controller::{compare, run};
use cmdsim::report::{emit, Format, TrafficReport};
use cmdsim::trace::{format_trace, generate_trace, parse_trace_str, GenParams, TraceRecord};
use cmdsim::verify::verify;
use cmdsim::{Mode, SimConfig, SimError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmdsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Config = 4,
    TraceViolation = 5,
    Invariant = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmdsimMode {
    Baseline = 0,
    Dedup = 1,
    DedupCar = 2,
    Cmd = 3,
}

impl From<CmdsimMode> for Mode {
    fn from(m: CmdsimMode) -> Self {
        match m {
            CmdsimMode::Baseline => Mode::Baseline,
            CmdsimMode::Dedup => Mode::Dedup,
            CmdsimMode::DedupCar => Mode::DedupCar,
            CmdsimMode::Cmd => Mode::Cmd,
        }
    }
}

/// Synthetic trace parameters; see the generator documentation.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CmdsimGenParams {
    pub seed: u64,
    pub n_blocks: u64,
    pub n_records: u64,
    pub write_fraction: f64,
    pub intra_prob: f64,
    pub inter_pool_size: u64,
    pub readonly_set_size: u64,
    pub readonly_rereads: u64,
    pub mask_distribution: [f64; 4],
}

impl From<&GenParams> for CmdsimGenParams {
    fn from(p: &GenParams) -> Self {
        CmdsimGenParams {
            seed: p.seed,
            n_blocks: p.n_blocks,
            n_records: p.n_records as u64,
            write_fraction: p.write_fraction,
            intra_prob: p.intra_prob,
            inter_pool_size: p.inter_pool_size as u64,
            readonly_set_size: p.readonly_set_size,
            readonly_rereads: p.readonly_rereads as u64,
            mask_distribution: p.mask_distribution,
        }
    }
}

impl From<&CmdsimGenParams> for GenParams {
    fn from(p: &CmdsimGenParams) -> Self {
        GenParams {
            seed: p.seed,
            n_blocks: p.n_blocks,
            n_records: p.n_records as usize,
            write_fraction: p.write_fraction,
            intra_prob: p.intra_prob,
            inter_pool_size: p.inter_pool_size as usize,
            readonly_set_size: p.readonly_set_size,
            readonly_rereads: p.readonly_rereads as usize,
            mask_distribution: p.mask_distribution,
        }
    }
}

/// Traffic counters of one run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CmdsimCounts {
    pub write: u64,
    pub data_read: u64,
    pub read_only: u64,
    pub metadata_read: u64,
    pub metadata_write: u64,
    pub dedup_read: u64,
    pub car_copy: u64,
    pub fifo_hit: u64,
    pub l2_hit: u64,
    pub l2_miss: u64,
    pub offchip_total: u64,
    pub intra_removed: u64,
    pub inter_removed: u64,
    pub unique_writes: u64,
}

/// Opaque parsed or generated trace.
pub struct CmdsimTrace {
    records: Vec<TraceRecord>,
}

/// Opaque simulator configuration.
pub struct CmdsimConfig {
    config: SimConfig,
}

/// Opaque traffic report of one run.
pub struct CmdsimReport {
    report: TrafficReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(CmdsimStatus, String);

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let status = match &e {
            SimError::Parse { .. } => CmdsimStatus::Parse,
            SimError::InvalidParams(_) => CmdsimStatus::InvalidArgument,
            SimError::Config(_) => CmdsimStatus::Config,
            SimError::TraceViolation { .. } => CmdsimStatus::TraceViolation,
            SimError::Invariant(_) => CmdsimStatus::Invariant,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CmdsimStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CmdsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CmdsimStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CmdsimStatus::Panic
        }
    }
}

unsafe fn arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn arg_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CmdsimStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    let slot = arg_mut(out, "out")?;
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let slot = arg_mut(out, "out")?;
    let c = CString::new(s).map_err(|_| Failure(CmdsimStatus::Invariant, "string holds a NUL byte".into()))?;
    *slot = c.into_raw();
    Ok(())
}

fn mode_from(raw: u32) -> Result<Mode, Failure> {
    let m = match raw {
        0 => CmdsimMode::Baseline,
        1 => CmdsimMode::Dedup,
        2 => CmdsimMode::DedupCar,
        3 => CmdsimMode::Cmd,
        _ => return Err(Failure(CmdsimStatus::InvalidArgument, format!("unknown mode {raw}"))),
    };
    Ok(m.into())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cmdsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn cmdsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_gen_params_default(out: *mut CmdsimGenParams) -> CmdsimStatus {
    guard(|| {
        *arg_mut(out, "out")? = CmdsimGenParams::from(&GenParams::default());
        Ok(())
    })
}

/// # Safety
/// `params` must point to a valid struct; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_trace_generate(params: *const CmdsimGenParams, out: *mut *mut CmdsimTrace) -> CmdsimStatus {
    guard(|| {
        let params = GenParams::from(arg(params, "params")?);
        let records = generate_trace(&params)?;
        put(out, CmdsimTrace { records })
    })
}

/// Parses the text trace format.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_trace_parse(text_in: *const c_char, out: *mut *mut CmdsimTrace) -> CmdsimStatus {
    guard(|| {
        let records = parse_trace_str(text(text_in, "text")?)?;
        put(out, CmdsimTrace { records })
    })
}

/// # Safety
/// `trace` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_trace_len(trace: *const CmdsimTrace, out: *mut usize) -> CmdsimStatus {
    guard(|| {
        *arg_mut(out, "out")? = arg(trace, "trace")?.records.len();
        Ok(())
    })
}

/// Canonical text form; free the result with [`cmdsim_string_free`].
///
/// # Safety
/// `trace` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_trace_to_text(trace: *const CmdsimTrace, out: *mut *mut c_char) -> CmdsimStatus {
    guard(|| put_string(out, format_trace(&arg(trace, "trace")?.records)))
}

/// # Safety
/// `trace` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_trace_free(trace: *mut CmdsimTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Default configuration: 4 MiB 16-way L2 over 8 partitions.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_config_default(out: *mut *mut CmdsimConfig) -> CmdsimStatus {
    guard(|| put(out, CmdsimConfig { config: SimConfig::default() }))
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_config_from_json(json: *const c_char, out: *mut *mut CmdsimConfig) -> CmdsimStatus {
    guard(|| {
        let config = SimConfig::from_json(text(json, "json")?)?;
        put(out, CmdsimConfig { config })
    })
}

/// # Safety
/// `config` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_config_to_json(config: *const CmdsimConfig, out: *mut *mut c_char) -> CmdsimStatus {
    guard(|| put_string(out, arg(config, "config")?.config.to_json()))
}

unsafe fn edit(config: *mut CmdsimConfig, f: impl FnOnce(&mut SimConfig)) -> CmdsimStatus {
    guard(|| {
        let handle = arg_mut(config, "config")?;
        let mut next = handle.config.clone();
        f(&mut next);
        next.validate()?;
        handle.config = next;
        Ok(())
    })
}

/// Rejected (and the handle left unchanged) if the geometry becomes invalid.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_config_set_partitions(config: *mut CmdsimConfig, n: usize) -> CmdsimStatus {
    edit(config, |c| c.cache.n_partitions = n)
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_config_set_l2_bytes(config: *mut CmdsimConfig, bytes: u64) -> CmdsimStatus {
    edit(config, |c| c.cache.capacity_bytes = bytes)
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_config_set_assoc(config: *mut CmdsimConfig, ways: usize) -> CmdsimStatus {
    edit(config, |c| c.cache.associativity = ways)
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_config_set_fifo_entries(config: *mut CmdsimConfig, entries: usize) -> CmdsimStatus {
    edit(config, |c| c.cache.fifo_entries_per_partition = entries)
}

/// Hash-store entries per partition; 0 means unbounded.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_config_set_hash_entries(config: *mut CmdsimConfig, entries: usize) -> CmdsimStatus {
    edit(config, |c| c.hash_entries = (entries > 0).then_some(entries))
}

/// # Safety
/// `config` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_config_free(config: *mut CmdsimConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Simulates `mode` (a [`CmdsimMode`] value).
///
/// # Safety
/// `trace` and `config` must be live handles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_run(
    trace: *const CmdsimTrace,
    config: *const CmdsimConfig,
    mode: u32,
    out: *mut *mut CmdsimReport,
) -> CmdsimStatus {
    guard(|| {
        let trace = arg(trace, "trace")?;
        let config = arg(config, "config")?;
        let report = run(&trace.records, &config.config, mode_from(mode)?)?;
        put(out, CmdsimReport { report })
    })
}

/// # Safety
/// `report` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_report_counts(report: *const CmdsimReport, out: *mut CmdsimCounts) -> CmdsimStatus {
    guard(|| {
        let r = &arg(report, "report")?.report;
        let (c, d) = (&r.counts, &r.dedup);
        *arg_mut(out, "out")? = CmdsimCounts {
            write: c.write,
            data_read: c.data_read,
            read_only: c.read_only,
            metadata_read: c.metadata_read,
            metadata_write: c.metadata_write,
            dedup_read: c.dedup_read,
            car_copy: c.car_copy,
            fifo_hit: c.fifo_hit,
            l2_hit: c.l2_hit,
            l2_miss: c.l2_miss,
            offchip_total: r.derived.offchip_total,
            intra_removed: d.intra_removed,
            inter_removed: d.inter_removed,
            unique_writes: d.unique_writes,
        };
        Ok(())
    })
}

/// `format` is 0 for JSON, 1 for CSV.
///
/// # Safety
/// `report` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_report_emit(report: *const CmdsimReport, format: u32, out: *mut *mut c_char) -> CmdsimStatus {
    guard(|| {
        let format = match format {
            0 => Format::Json,
            1 => Format::Csv,
            f => return Err(Failure(CmdsimStatus::InvalidArgument, format!("unknown format {f}"))),
        };
        put_string(out, emit(&arg(report, "report")?.report, format)?)
    })
}

/// # Safety
/// `report` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_report_free(report: *mut CmdsimReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// All four modes side by side, as JSON.
///
/// # Safety
/// `trace` and `config` must be live handles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_compare_json(
    trace: *const CmdsimTrace,
    config: *const CmdsimConfig,
    out: *mut *mut c_char,
) -> CmdsimStatus {
    guard(|| {
        let trace = arg(trace, "trace")?;
        let config = arg(config, "config")?;
        let report = compare(&trace.records, &config.config, &Mode::ALL)?;
        put_string(out, report.emit(Format::Json)?)
    })
}

/// Checks the simulator against the oracle. `*equivalent` is 1 when they
/// agree; otherwise 0 and [`cmdsim_last_error`] names the first divergence.
///
/// # Safety
/// `trace` and `config` must be live handles; `equivalent` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_verify(
    trace: *const CmdsimTrace,
    config: *const CmdsimConfig,
    equivalent: *mut i32,
) -> CmdsimStatus {
    guard(|| {
        let trace = arg(trace, "trace")?;
        let config = arg(config, "config")?;
        let slot = arg_mut(equivalent, "equivalent")?;
        match verify(&trace.records, &config.config)? {
            None => *slot = 1,
            Some(d) => {
                *slot = 0;
                set_error(d.to_string());
            }
        }
        Ok(())
    })
}

/// Serializes the default generator parameters as JSON, mainly for tooling.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cmdsim_gen_params_default_json(out: *mut *mut c_char) -> CmdsimStatus {
    guard(|| {
        let json = serde_json::to_string_pretty(&GenParams::default())
            .map_err(|e| Failure(CmdsimStatus::Invariant, e.to_string()))?;
        put_string(out, json)
    })
}
