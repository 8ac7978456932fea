//! C interface to the gridsplit engine.
//!
//! Handles are opaque and owned by the caller: every `*_new`/`*_from_*`/
//! `gs_run` result must be released with its `*_free`. Functions return a
//! [`GsStatus`]; on failure the message is available from
//! [`gs_last_error_message`] on the same thread. Strings returned to the
//! caller are released with [`gs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gridsplit::costmodel::{Catalog, CostConfig};
use gridsplit::harness::{run_method, Inputs, RunOutput};
use gridsplit::netmodel::{build_tree, NetworkDoc, NetworkTree};
use gridsplit::partitioner::Method;
use gridsplit::synthgen::{generate, ScenarioSpec};
use gridsplit::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidNetwork = 4,
    InvalidConfig = 5,
    InvalidCatalog = 6,
    CapacityExceeded = 7,
    InconsistentTotals = 8,
    InvalidArgument = 9,
    Engine = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsMethod {
    TopDown = 0,
    BottomUp = 1,
}

/// Consumer counts of a finished run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GsCounts {
    pub grid: usize,
    pub offgrid: usize,
    pub microgrid: usize,
    pub isolated: usize,
}

/// Annual costs of a finished run, $/yr.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GsTotals {
    pub grid: f64,
    pub offgrid: f64,
    pub total: f64,
    pub all_grid: f64,
}

pub struct GsNetwork {
    tree: NetworkTree,
}

pub struct GsConfig {
    config: CostConfig,
}

pub struct GsCatalog {
    catalog: Catalog,
}

pub struct GsResult {
    out: RunOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> GsStatus {
    match e {
        Error::CycleDetected(_)
        | Error::MultipleRoots(..)
        | Error::NoRoot
        | Error::NonConsumerLeaf(_)
        | Error::ConsumerWithChildren(_)
        | Error::DanglingParentRef { .. }
        | Error::DuplicateNodeId(_)
        | Error::InvalidNode { .. }
        | Error::UnknownNode(_) => GsStatus::InvalidNetwork,
        Error::InvalidLifetime(_) | Error::InvalidRate(_) | Error::InvalidConfig(_) => GsStatus::InvalidConfig,
        Error::InvalidCatalog(_) | Error::InvalidLookupTable(_) => GsStatus::InvalidCatalog,
        Error::CapacityExceedsCatalog { .. } => GsStatus::CapacityExceeded,
        Error::InconsistentTotals { .. } => GsStatus::InconsistentTotals,
        Error::Parse { .. } => GsStatus::Parse,
        Error::InfeasibleSpec(_) | Error::InvalidSweep(_) => GsStatus::InvalidArgument,
        _ => GsStatus::Engine,
    }
}

/// Runs `body`, turning errors and panics into a status plus message.
fn guard(body: impl FnOnce() -> Result<(), (GsStatus, String)>) -> GsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            GsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GsStatus::Panic
        }
    }
}

fn engine(e: Error) -> (GsStatus, String) {
    (status_of(&e), format!("{}: {e}", e.class()))
}

fn null(what: &str) -> (GsStatus, String) {
    (GsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, (GsStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (GsStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn give<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn gs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn gs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Networks

/// Parses and validates a network document.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_network_from_json(json: *const c_char, out: *mut *mut GsNetwork) -> GsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let doc = NetworkDoc::from_json(text(json, "json")?).map_err(engine)?;
        give(out, GsNetwork {
            tree: build_tree(&doc).map_err(engine)?,
        });
        Ok(())
    })
}

/// Builds a synthetic network: the default thousand-consumer scenario, or
/// the 6688-consumer one when `full_scale` is true.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_network_generate(seed: u64, full_scale: bool, out: *mut *mut GsNetwork) -> GsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = if full_scale {
            ScenarioSpec::full_scale(seed)
        } else {
            ScenarioSpec::default_scenario(seed)
        };
        let doc = generate(&spec).map_err(engine)?;
        give(out, GsNetwork {
            tree: build_tree(&doc).map_err(engine)?,
        });
        Ok(())
    })
}

/// Number of consumers, or 0 for null.
///
/// # Safety
/// `network` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gs_network_consumer_count(network: *const GsNetwork) -> usize {
    network.as_ref().map_or(0, |n| n.tree.consumer_ids.len())
}

/// # Safety
/// `network` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gs_network_free(network: *mut GsNetwork) {
    release(network)
}

// ---------------------------------------------------------------------------
// Configuration and catalog

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_config_default(out: *mut *mut GsConfig) -> GsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        give(out, GsConfig {
            config: CostConfig::default(),
        });
        Ok(())
    })
}

/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_config_from_json(json: *const c_char, out: *mut *mut GsConfig) -> GsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = CostConfig::from_json(text(json, "json")?).map_err(engine)?;
        give(out, GsConfig { config });
        Ok(())
    })
}

/// Sets the diesel price, $/L. The handle is unchanged on failure.
///
/// # Safety
/// `config` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gs_config_set_fuel_cost(config: *mut GsConfig, usd_per_l: f64) -> GsStatus {
    guard(|| {
        let c = config.as_mut().ok_or_else(|| null("config"))?;
        let next = CostConfig {
            fuel_cost_usd_per_l: usd_per_l,
            ..c.config.clone()
        };
        next.validate().map_err(engine)?;
        c.config = next;
        Ok(())
    })
}

/// Sets the grid reliability in [0, 1]. The handle is unchanged on failure.
///
/// # Safety
/// `config` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gs_config_set_grid_reliability(config: *mut GsConfig, reliability: f64) -> GsStatus {
    guard(|| {
        let c = config.as_mut().ok_or_else(|| null("config"))?;
        let next = CostConfig {
            grid_reliability: reliability,
            ..c.config.clone()
        };
        next.validate().map_err(engine)?;
        c.config = next;
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gs_config_free(config: *mut GsConfig) {
    release(config)
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_catalog_default(out: *mut *mut GsCatalog) -> GsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        give(out, GsCatalog {
            catalog: Catalog::default(),
        });
        Ok(())
    })
}

/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_catalog_from_json(json: *const c_char, out: *mut *mut GsCatalog) -> GsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let catalog = Catalog::from_json(text(json, "json")?).map_err(engine)?;
        give(out, GsCatalog { catalog });
        Ok(())
    })
}

/// # Safety
/// `catalog` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gs_catalog_free(catalog: *mut GsCatalog) {
    release(catalog)
}

// ---------------------------------------------------------------------------
// Runs

/// Partitions the network with the chosen engine. The network handle is not
/// modified and can be run again.
///
/// # Safety
/// The input handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_run(
    network: *const GsNetwork,
    config: *const GsConfig,
    catalog: *const GsCatalog,
    method: GsMethod,
    out: *mut *mut GsResult,
) -> GsStatus {
    guard(|| {
        let n = network.as_ref().ok_or_else(|| null("network"))?;
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        let k = catalog.as_ref().ok_or_else(|| null("catalog"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inputs = Inputs::new(n.tree.clone(), c.config.clone(), k.catalog.clone()).map_err(engine)?;
        let m = match method {
            GsMethod::TopDown => Method::TopDown,
            GsMethod::BottomUp => Method::BottomUp,
        };
        give(out, GsResult {
            out: run_method(&inputs, m).map_err(engine)?,
        });
        Ok(())
    })
}

/// # Safety
/// `result` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_result_counts(result: *const GsResult, out: *mut GsCounts) -> GsStatus {
    guard(|| {
        let r = &result.as_ref().ok_or_else(|| null("result"))?.out;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = GsCounts {
            grid: r.result.ongrid_consumers.len(),
            offgrid: r.result.offgrid_consumers.len(),
            microgrid: r.summary.microgrids.customers,
            isolated: r.summary.isolated.customers,
        };
        Ok(())
    })
}

/// # Safety
/// `result` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_result_totals(result: *const GsResult, out: *mut GsTotals) -> GsStatus {
    guard(|| {
        let r = &result.as_ref().ok_or_else(|| null("result"))?.out.result;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = GsTotals {
            grid: r.grid_cost_usd_yr,
            offgrid: r.offgrid_cost_usd_yr,
            total: r.total_cost_usd_yr,
            all_grid: r.all_grid_cost_usd_yr,
        };
        Ok(())
    })
}

/// Copies the input ids of off-grid consumers, ascending, into `ids` (up to
/// `capacity` of them) and stores the full count in `count`. Call with a
/// null `ids` to size the buffer.
///
/// # Safety
/// `result` must be a live handle; `ids` must be null or hold `capacity`
/// elements; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_result_offgrid_ids(
    result: *const GsResult,
    ids: *mut u64,
    capacity: usize,
    count: *mut usize,
) -> GsStatus {
    guard(|| {
        let r = &result.as_ref().ok_or_else(|| null("result"))?.out;
        let count = count.as_mut().ok_or_else(|| null("count"))?;
        let mut labels: Vec<u64> = r.result.offgrid_consumers.iter().map(|&c| r.tree.label(c)).collect();
        labels.sort_unstable();
        *count = labels.len();
        if !ids.is_null() {
            let n = labels.len().min(capacity);
            std::slice::from_raw_parts_mut(ids, n).copy_from_slice(&labels[..n]);
        }
        Ok(())
    })
}

/// The per-system-type summary as JSON. Free with [`gs_string_free`].
///
/// # Safety
/// `result` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_result_summary_json(result: *const GsResult, out: *mut *mut c_char) -> GsStatus {
    guard(|| {
        let r = &result.as_ref().ok_or_else(|| null("result"))?.out;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = owned_string(r.summary.to_json());
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gs_result_free(result: *mut GsResult) {
    release(result)
}
