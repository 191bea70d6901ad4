//! C interface to landopt predictors and prescriptors.
//!
//! Objects are opaque handles created by `*_load` or `*_from_json` and
//! released with the matching `*_free`. Every fallible call returns a
//! [`LandoptStatus`]; on failure, [`landopt_last_error`] describes what went
//! wrong on the calling thread. Land-type arrays use the canonical order
//! primf, primn, secdf, secdn, urban, c3ann, c4ann, c3per, c4per, c3nfx,
//! pastr, range; recommendation arrays use the modifiable order secdf, secdn,
//! c3ann, c4ann, c3per, c3nfx, pastr, range.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use landopt::evolution::evaluate_candidate;
use landopt::land::{CellContext, LandUseVector, FILE_TOLERANCE, N_MODIFIABLE, N_TYPES};
use landopt::predictors::{ElucModel, Predictor};
use landopt::prescriptor::{prescribe, PrescriptorFile, PrescriptorNet};
use landopt::{ActionDelta, Error};

/// Number of land types in a usage or delta array.
pub const LANDOPT_N_TYPES: usize = 12;
/// Number of entries in a recommendation array.
pub const LANDOPT_N_MODIFIABLE: usize = 8;

const _: () = assert!(LANDOPT_N_TYPES == N_TYPES && LANDOPT_N_MODIFIABLE == N_MODIFIABLE);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandoptStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad input value, e.g. fractions that do not sum to one or a non-UTF-8 string.
    InvalidArgument = 2,
    Io = 3,
    /// A file or JSON string could not be parsed into a model.
    Parse = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

/// One cell in one year.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LandoptContext {
    pub lat: f64,
    pub lon: f64,
    /// Hectares.
    pub area: f64,
    pub year: i32,
    pub fractions: [f64; LANDOPT_N_TYPES],
    pub nonland: f64,
}

/// A loaded ELUC predictor.
pub struct LandoptPredictor {
    model: Predictor,
    model_id: CString,
}

/// A loaded prescriptor network.
pub struct LandoptPrescriptor {
    file: PrescriptorFile,
    net: PrescriptorNet,
    prescriptor_id: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nuls were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(LandoptStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => LandoptStatus::Io,
            Error::Json(_) | Error::Csv(_) | Error::Parse { .. } | Error::NoRows { .. } => {
                LandoptStatus::Parse
            }
            _ => LandoptStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(LandoptStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(LandoptStatus::InvalidArgument, message.into())
}

/// Runs `f`, records any failure or panic as the thread's last error and
/// converts it to a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LandoptStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LandoptStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal error: {message}"));
            LandoptStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn to_context(c: &LandoptContext) -> Result<CellContext, Failure> {
    let ctx = CellContext {
        cell_id: String::new(),
        lat: c.lat,
        lon: c.lon,
        area: c.area,
        year: c.year,
        usage: LandUseVector::new(c.fractions, c.nonland),
    };
    ctx.validate(FILE_TOLERANCE)?;
    Ok(ctx)
}

fn new_predictor(model: Predictor) -> Result<Box<LandoptPredictor>, Failure> {
    let model_id =
        CString::new(model.model_id()).map_err(|_| invalid("model id contains a nul byte"))?;
    Ok(Box::new(LandoptPredictor { model, model_id }))
}

fn new_prescriptor(file: PrescriptorFile) -> Result<Box<LandoptPrescriptor>, Failure> {
    let net = file.net()?;
    let prescriptor_id = CString::new(file.prescriptor_id.as_str())
        .map_err(|_| invalid("prescriptor id contains a nul byte"))?;
    Ok(Box::new(LandoptPrescriptor {
        file,
        net,
        prescriptor_id,
    }))
}

/// Message for the last failed call on this thread, or NULL if the last
/// call succeeded. The pointer stays valid until the next landopt call on
/// the same thread.
#[no_mangle]
pub extern "C" fn landopt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn landopt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a predictor saved as JSON at `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn landopt_predictor_load(
    path: *const c_char,
    out: *mut *mut LandoptPredictor,
) -> LandoptStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        *out = Box::into_raw(new_predictor(Predictor::load(path)?)?);
        Ok(())
    })
}

/// Builds a predictor from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn landopt_predictor_from_json(
    json: *const c_char,
    out: *mut *mut LandoptPredictor,
) -> LandoptStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let json = str_arg(json, "json")?;
        *out = Box::into_raw(new_predictor(Predictor::from_json(json)?)?);
        Ok(())
    })
}

/// The predictor's model id, valid as long as the handle is.
///
/// # Safety
/// `predictor` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn landopt_predictor_model_id(
    predictor: *const LandoptPredictor,
) -> *const c_char {
    predictor
        .as_ref()
        .map_or(ptr::null(), |p| p.model_id.as_ptr())
}

/// Predicted ELUC (tC/ha) of applying `delta` (12 entries) to `context`.
///
/// # Safety
/// Pointers must be valid; `delta` must point to 12 doubles.
#[no_mangle]
pub unsafe extern "C" fn landopt_predictor_predict(
    predictor: *const LandoptPredictor,
    context: *const LandoptContext,
    delta: *const f64,
    out_eluc: *mut f64,
) -> LandoptStatus {
    guard(|| {
        let p = ref_arg(predictor, "predictor")?;
        let ctx = to_context(ref_arg(context, "context")?)?;
        let delta = ref_arg(delta.cast::<[f64; N_TYPES]>(), "delta")?;
        let out = out_arg(out_eluc, "out_eluc")?;
        *out = p.model.predict(&ctx, &ActionDelta { deltas: *delta })?;
        Ok(())
    })
}

/// Releases a predictor. NULL is ignored.
///
/// # Safety
/// `predictor` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn landopt_predictor_free(predictor: *mut LandoptPredictor) {
    if !predictor.is_null() {
        drop(Box::from_raw(predictor));
    }
}

/// Loads a prescriptor saved as JSON at `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn landopt_prescriptor_load(
    path: *const c_char,
    out: *mut *mut LandoptPrescriptor,
) -> LandoptStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        *out = Box::into_raw(new_prescriptor(PrescriptorFile::load(path)?)?);
        Ok(())
    })
}

/// Builds a prescriptor from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn landopt_prescriptor_from_json(
    json: *const c_char,
    out: *mut *mut LandoptPrescriptor,
) -> LandoptStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let json = str_arg(json, "json")?;
        *out = Box::into_raw(new_prescriptor(PrescriptorFile::from_json(json)?)?);
        Ok(())
    })
}

/// The prescriptor's id, valid as long as the handle is.
///
/// # Safety
/// `prescriptor` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn landopt_prescriptor_id(
    prescriptor: *const LandoptPrescriptor,
) -> *const c_char {
    prescriptor
        .as_ref()
        .map_or(ptr::null(), |p| p.prescriptor_id.as_ptr())
}

/// Writes the recommended fractions for the 8 modifiable types into
/// `out_targets`. They sum to the context's modifiable budget.
///
/// # Safety
/// Pointers must be valid; `out_targets` must have room for 8 doubles.
#[no_mangle]
pub unsafe extern "C" fn landopt_prescriptor_prescribe(
    prescriptor: *const LandoptPrescriptor,
    context: *const LandoptContext,
    out_targets: *mut f64,
) -> LandoptStatus {
    guard(|| {
        let p = ref_arg(prescriptor, "prescriptor")?;
        let ctx = to_context(ref_arg(context, "context")?)?;
        let out = out_arg(out_targets.cast::<[f64; N_MODIFIABLE]>(), "out_targets")?;
        *out = prescribe(&p.net, &ctx).targets;
        Ok(())
    })
}

/// Prescribes for `context` and scores the result with `predictor`:
/// predicted ELUC (tC/ha) and percent of land changed.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn landopt_prescriptor_evaluate(
    prescriptor: *const LandoptPrescriptor,
    predictor: *const LandoptPredictor,
    context: *const LandoptContext,
    out_eluc: *mut f64,
    out_change: *mut f64,
) -> LandoptStatus {
    guard(|| {
        let presc = ref_arg(prescriptor, "prescriptor")?;
        let pred = ref_arg(predictor, "predictor")?;
        let ctx = to_context(ref_arg(context, "context")?)?;
        let eluc = out_arg(out_eluc, "out_eluc")?;
        let change = out_arg(out_change, "out_change")?;
        let o = evaluate_candidate(&presc.file.genome, &[ctx], &pred.model)?;
        *eluc = o.eluc_mean;
        *change = o.change_mean;
        Ok(())
    })
}

/// Releases a prescriptor. NULL is ignored.
///
/// # Safety
/// `prescriptor` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn landopt_prescriptor_free(prescriptor: *mut LandoptPrescriptor) {
    if !prescriptor.is_null() {
        drop(Box::from_raw(prescriptor));
    }
}
