//! C ABI over the safedrive library.
//!
//! Handles are opaque pointers created by `*_new` functions and released by
//! the matching `*_free`. Every fallible function returns an [`SdStatus`];
//! on failure `sd_last_error` describes the error of the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use safedrive::eval::safety_oracle;
use safedrive::memory::{Embedder, HashEmbedder, NewRecord, Outcome, VectorStore};
use safedrive::risk_assessor::{calibrate_thresholds, classify_risk, risk_notification, RiskLevel, RiskThresholds};
use safedrive::scene::{DatasetTag, LaneContext, Scene};
use safedrive::{Action, AppConfig, VehicleClass, VehicleState};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdVehicleClass {
    Sedan = 0,
    Truck = 1,
    Bus = 2,
    Motorcycle = 3,
    Vru = 4,
    Other = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdAction {
    Accelerate = 0,
    Decelerate = 1,
    LaneChangeLeft = 2,
    LaneChangeRight = 3,
    TurnLeft = 4,
    TurnRight = 5,
    Idle = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdRiskLevel {
    Low = 0,
    Medium = 1,
    High = 2,
}

/// State of one road user. Angles in radians, lengths in meters, speed in
/// m/s.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdVehicle {
    pub id: i64,
    pub vehicle_class: SdVehicleClass,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub steering: f64,
    pub width: f64,
    pub length: f64,
    pub wheelbase: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdQpr {
    pub total: f64,
    pub front: f64,
    pub rear: f64,
}

/// `min_ttc` is `INFINITY` when nothing closes in.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdVerdict {
    pub safe: bool,
    pub min_ttc: f64,
    pub induced_decel: f64,
}

/// Configuration, thresholds included. Opaque.
pub struct SdConfig {
    config: AppConfig,
    thresholds: RiskThresholds,
}

/// Vector store with the offline hash embedder. Opaque.
pub struct SdStore {
    store: VectorStore,
    embedder: HashEmbedder,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(SdStatus, String);

fn fail<T>(status: SdStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SdStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SdStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: caller passes null or a valid pointer
    unsafe { p.as_ref() }.ok_or_else(|| Failure(SdStatus::NullPointer, format!("{what} is null")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: caller passes null or a valid, exclusive pointer
    unsafe { p.as_mut() }.ok_or_else(|| Failure(SdStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(SdStatus::NullPointer, format!("{what} is null"));
    }
    // SAFETY: caller guarantees `n` readable elements
    Ok(unsafe { std::slice::from_raw_parts(p, n) })
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(SdStatus::NullPointer, format!("{what} is null"));
    }
    // SAFETY: caller passes a nul-terminated string
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure(SdStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Copies `text` plus a nul into `buf`, always reporting the needed length
/// (excluding the nul) through `len`.
unsafe fn write_text(text: &str, buf: *mut c_char, cap: usize, len: *mut usize) -> Result<(), Failure> {
    if !len.is_null() {
        // SAFETY: checked non-null
        unsafe { *len = text.len() };
    }
    if cap < text.len() + 1 {
        return fail(SdStatus::BufferTooSmall, format!("{} bytes needed", text.len() + 1));
    }
    if buf.is_null() {
        return fail(SdStatus::NullPointer, "buffer is null");
    }
    // SAFETY: buf has at least cap >= len + 1 bytes
    unsafe {
        ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
        *buf.add(text.len()) = 0;
    }
    Ok(())
}

fn class_of(c: SdVehicleClass) -> VehicleClass {
    match c {
        SdVehicleClass::Sedan => VehicleClass::Sedan,
        SdVehicleClass::Truck => VehicleClass::Truck,
        SdVehicleClass::Bus => VehicleClass::Bus,
        SdVehicleClass::Motorcycle => VehicleClass::Motorcycle,
        SdVehicleClass::Vru => VehicleClass::Vru,
        SdVehicleClass::Other => VehicleClass::Other,
    }
}

fn action_of(a: SdAction) -> Action {
    match a {
        SdAction::Accelerate => Action::Accelerate,
        SdAction::Decelerate => Action::Decelerate,
        SdAction::LaneChangeLeft => Action::LaneChangeLeft,
        SdAction::LaneChangeRight => Action::LaneChangeRight,
        SdAction::TurnLeft => Action::TurnLeft,
        SdAction::TurnRight => Action::TurnRight,
        SdAction::Idle => Action::Idle,
    }
}

fn state_of(v: &SdVehicle) -> Result<VehicleState, Failure> {
    let s = VehicleState {
        id: v.id,
        class: class_of(v.vehicle_class),
        x: v.x,
        y: v.y,
        heading: v.heading,
        speed: v.speed,
        steering: v.steering,
        width: v.width,
        length: v.length,
        wheelbase: v.wheelbase,
    };
    s.validate()
        .map_err(|e| Failure(SdStatus::InvalidArgument, format!("vehicle {}: {e}", v.id)))?;
    Ok(s)
}

unsafe fn scene_states(
    ego: *const SdVehicle,
    others: *const SdVehicle,
    n: usize,
) -> Result<(VehicleState, Vec<VehicleState>), Failure> {
    // SAFETY: forwarded caller contract
    let ego = state_of(unsafe { deref(ego, "ego") }?)?;
    let others = unsafe { slice(others, n, "others") }?
        .iter()
        .map(state_of)
        .collect::<Result<_, _>>()?;
    Ok((ego, others))
}

fn config_handle(config: AppConfig) -> Result<*mut SdConfig, Failure> {
    let thresholds = config
        .resolve_thresholds()
        .map_err(|e| Failure(SdStatus::InvalidArgument, e.to_string()))?;
    Ok(Box::into_raw(Box::new(SdConfig { config, thresholds })))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn sd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf`.
///
/// # Safety
/// `buf` must have `cap` writable bytes; `len` may be null.
#[no_mangle]
pub unsafe extern "C" fn sd_last_error(buf: *mut c_char, cap: usize, len: *mut usize) -> SdStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().as_ref().map(|m| m.to_string_lossy().into_owned()));
    // SAFETY: forwarded caller contract
    match unsafe { write_text(msg.as_deref().unwrap_or(""), buf, cap, len) } {
        Ok(()) => SdStatus::Ok,
        Err(Failure(status, _)) => status,
    }
}

/// Default configuration with the shipped thresholds.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sd_config_new_default(out: *mut *mut SdConfig) -> SdStatus {
    guard(|| {
        // SAFETY: forwarded caller contract
        let out = unsafe { deref_mut(out, "out") }?;
        *out = config_handle(AppConfig::default())?;
        Ok(())
    })
}

/// Configuration from a JSON document. A `thresholds_path` is read relative
/// to the working directory.
///
/// # Safety
/// `json` must be nul-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sd_config_from_json(json: *const c_char, out: *mut *mut SdConfig) -> SdStatus {
    guard(|| {
        // SAFETY: forwarded caller contract
        let (text, out) = unsafe { (str_arg(json, "json")?, deref_mut(out, "out")?) };
        let config = AppConfig::from_json(text).map_err(|e| Failure(SdStatus::Parse, e.to_string()))?;
        *out = config_handle(config)?;
        Ok(())
    })
}

/// # Safety
/// `config` must come from `sd_config_*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sd_config_free(config: *mut SdConfig) {
    if !config.is_null() {
        // SAFETY: created by Box::into_raw in config_handle
        drop(unsafe { Box::from_raw(config) });
    }
}

/// Omnidirectional QPR of `ego` against `n` other vehicles.
///
/// # Safety
/// Pointers must be valid; `others` must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn sd_qpr_total(
    config: *const SdConfig,
    ego: *const SdVehicle,
    others: *const SdVehicle,
    n: usize,
    out: *mut SdQpr,
) -> SdStatus {
    guard(|| {
        // SAFETY: forwarded caller contract
        let (c, (ego, others), out) =
            unsafe { (deref(config, "config")?, scene_states(ego, others, n)?, deref_mut(out, "out")?) };
        let r = c.config.risk.qpr_total(&ego, &others, &c.config.grid.around(&ego));
        *out = SdQpr {
            total: r.total,
            front: r.front,
            rear: r.rear,
        };
        Ok(())
    })
}

/// Risk level of a QPR value under the configured thresholds.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sd_classify_risk(config: *const SdConfig, qpr: f64, out: *mut SdRiskLevel) -> SdStatus {
    guard(|| {
        // SAFETY: forwarded caller contract
        let (c, out) = unsafe { (deref(config, "config")?, deref_mut(out, "out")?) };
        *out = match classify_risk(qpr, &c.thresholds) {
            RiskLevel::Low => SdRiskLevel::Low,
            RiskLevel::Medium => SdRiskLevel::Medium,
            RiskLevel::High => SdRiskLevel::High,
        };
        Ok(())
    })
}

/// Textual risk notification of a scene. Returns `BufferTooSmall` with the
/// needed length in `len` when `cap` is insufficient.
///
/// # Safety
/// Pointers must be valid; `buf` must have `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sd_risk_notification(
    config: *const SdConfig,
    ego: *const SdVehicle,
    others: *const SdVehicle,
    n: usize,
    buf: *mut c_char,
    cap: usize,
    len: *mut usize,
) -> SdStatus {
    guard(|| {
        // SAFETY: forwarded caller contract
        let (c, (ego, others)) = unsafe { (deref(config, "config")?, scene_states(ego, others, n)?) };
        let report = c.config.risk.qpr_total(&ego, &others, &c.config.grid.around(&ego));
        let text = risk_notification(&report, &c.thresholds, &c.config.notifications)
            .map_err(|e| Failure(SdStatus::InvalidArgument, e.to_string()))?
            .to_text();
        // SAFETY: forwarded caller contract
        unsafe { write_text(&text, buf, cap, len) }
    })
}

/// Nearest-rank 30th and 70th percentiles of `n` samples.
///
/// # Safety
/// `samples` must hold `n` values; outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn sd_calibrate(samples: *const f64, n: usize, t_low: *mut f64, t_high: *mut f64) -> SdStatus {
    guard(|| {
        // SAFETY: forwarded caller contract
        let (samples, lo, hi) =
            unsafe { (slice(samples, n, "samples")?, deref_mut(t_low, "t_low")?, deref_mut(t_high, "t_high")?) };
        let t = calibrate_thresholds(samples, Default::default())
            .map_err(|e| Failure(SdStatus::InvalidArgument, e.to_string()))?;
        (*lo, *hi) = (t.t_low, t.t_high);
        Ok(())
    })
}

/// Safety-oracle verdict for `action` in a highway scene where the ego and
/// every other vehicle carry their lane ids (`lanes[0]` is the ego's,
/// `lanes[1..=n]` the others'; pass null when unknown).
///
/// # Safety
/// Pointers must be valid; `others` must hold `n` and `lanes` `n + 1`
/// elements when non-null.
#[no_mangle]
pub unsafe extern "C" fn sd_safety_check(
    config: *const SdConfig,
    ego: *const SdVehicle,
    others: *const SdVehicle,
    lanes: *const i32,
    n: usize,
    action: SdAction,
    out: *mut SdVerdict,
) -> SdStatus {
    guard(|| {
        // SAFETY: forwarded caller contract
        let (c, (ego, others), out) =
            unsafe { (deref(config, "config")?, scene_states(ego, others, n)?, deref_mut(out, "out")?) };
        let lanes: Vec<Option<i32>> = if lanes.is_null() {
            vec![None; n + 1]
        } else {
            // SAFETY: forwarded caller contract
            unsafe { slice(lanes, n + 1, "lanes") }?.iter().map(|&l| Some(l)).collect()
        };
        let context = LaneContext::Lanes {
            current: lanes[0].unwrap_or(0),
            left: 0,
            right: 0,
        };
        let scene = Scene::from_states(
            ego,
            lanes[0],
            others.into_iter().zip(lanes[1..].iter().copied()),
            context,
            "",
            DatasetTag::Highway,
        );
        let v = safety_oracle(&scene, action_of(action), &c.config.oracle, &c.config.idm);
        *out = SdVerdict {
            safe: v.safe,
            min_ttc: v.min_ttc,
            induced_decel: v.induced_decel,
        };
        Ok(())
    })
}

/// Empty store with a hash embedder of `dimension` (0 selects the default).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sd_store_new(dimension: usize, out: *mut *mut SdStore) -> SdStatus {
    guard(|| {
        // SAFETY: forwarded caller contract
        let out = unsafe { deref_mut(out, "out") }?;
        let embedder = if dimension == 0 {
            HashEmbedder::default()
        } else {
            HashEmbedder::new(dimension)
        };
        let store = VectorStore::for_embedder(&embedder);
        *out = Box::into_raw(Box::new(SdStore { store, embedder }));
        Ok(())
    })
}

/// Loads a store file written by `sd_store_save` or the library.
///
/// # Safety
/// `path` must be nul-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sd_store_load(path: *const c_char, out: *mut *mut SdStore) -> SdStatus {
    guard(|| {
        // SAFETY: forwarded caller contract
        let (path, out) = unsafe { (str_arg(path, "path")?, deref_mut(out, "out")?) };
        let store = VectorStore::load(path).map_err(|e| Failure(SdStatus::Io, e.to_string()))?;
        let embedder = HashEmbedder::new(store.dimension());
        if store.embedder_tag() != embedder.tag() {
            return fail(
                SdStatus::InvalidArgument,
                format!("store was built with embedder {:?}", store.embedder_tag()),
            );
        }
        *out = Box::into_raw(Box::new(SdStore { store, embedder }));
        Ok(())
    })
}

/// # Safety
/// `store` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn sd_store_save(store: *const SdStore, path: *const c_char) -> SdStatus {
    guard(|| {
        // SAFETY: forwarded caller contract
        let (s, path) = unsafe { (deref(store, "store")?, str_arg(path, "path")?) };
        s.store.save(path).map_err(|e| Failure(SdStatus::Io, e.to_string()))
    })
}

/// # Safety
/// `store` must come from `sd_store_new` or `sd_store_load` and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn sd_store_free(store: *mut SdStore) {
    if !store.is_null() {
        // SAFETY: created by Box::into_raw
        drop(unsafe { Box::from_raw(store) });
    }
}

/// Number of records, 0 for a null handle.
///
/// # Safety
/// `store` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn sd_store_len(store: *const SdStore) -> usize {
    // SAFETY: forwarded caller contract
    unsafe { store.as_ref() }.map_or(0, |s| s.store.len())
}

/// Appends a correct-outcome record; its id is written to `id`.
///
/// # Safety
/// Strings must be nul-terminated; pointers valid.
#[no_mangle]
pub unsafe extern "C" fn sd_store_add(
    store: *mut SdStore,
    scene_text: *const c_char,
    reasoning: *const c_char,
    action: SdAction,
    id: *mut u64,
) -> SdStatus {
    guard(|| {
        // SAFETY: forwarded caller contract
        let (s, text, reasoning, id) = unsafe {
            (
                deref_mut(store, "store")?,
                str_arg(scene_text, "scene_text")?,
                str_arg(reasoning, "reasoning")?,
                deref_mut(id, "id")?,
            )
        };
        let embedding = s
            .embedder
            .embed(text)
            .map_err(|e| Failure(SdStatus::InvalidArgument, e.to_string()))?;
        *id = s
            .store
            .update(NewRecord {
                scene_text: text.to_string(),
                embedding,
                risk_text: String::new(),
                reasoning: reasoning.to_string(),
                action: action_of(action),
                outcome: Outcome::Correct,
                reflection: None,
                created_at: s.store.len() as u64,
            })
            .map_err(|e| Failure(SdStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Up to `k` most similar records. Ids and cosine similarities go to
/// `ids` and `similarities` (both `k` long); the count to `found`.
///
/// # Safety
/// `ids` and `similarities` must have `k` writable elements.
#[no_mangle]
pub unsafe extern "C" fn sd_store_retrieve(
    store: *const SdStore,
    query: *const c_char,
    k: usize,
    ids: *mut u64,
    similarities: *mut f64,
    found: *mut usize,
) -> SdStatus {
    guard(|| {
        // SAFETY: forwarded caller contract
        let (s, query, found) =
            unsafe { (deref(store, "store")?, str_arg(query, "query")?, deref_mut(found, "found")?) };
        if k > 0 && (ids.is_null() || similarities.is_null()) {
            return fail(SdStatus::NullPointer, "output arrays are null");
        }
        let hits = s
            .store
            .retrieve(&s.embedder, query, k)
            .map_err(|e| Failure(SdStatus::InvalidArgument, e.to_string()))?;
        for (i, (record, sim)) in hits.iter().enumerate() {
            // SAFETY: i < hits.len() <= k
            unsafe {
                *ids.add(i) = record.record_id;
                *similarities.add(i) = *sim;
            }
        }
        *found = hits.len();
        Ok(())
    })
}
