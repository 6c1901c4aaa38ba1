//! C ABI over the `svdinstn` library.
//!
//! Tensors and models cross the boundary as opaque handles that the caller
//! releases with the matching `*_free` function. Every fallible call returns
//! an [`SvdStatus`]; on failure the message is available from
//! [`svd_last_error_message`] until the next failing call on the same thread.
//! Strings returned through out-parameters are owned by the caller and freed
//! with [`svd_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use svdinstn::completion::{complete, CompletionConfig, ObservationMask};
use svdinstn::solver::{decompose, SolverConfig};
use svdinstn::{evaluate, io, DenseTensor, Error, SvdInsTnModel};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SvdStatus {
    Ok = 0,
    InvalidArgument = 1,
    Numerical = 2,
    Invariant = 3,
    DegenerateRank = 4,
    Format = 5,
    Io = 6,
    NullPointer = 7,
    Panic = 8,
}

/// Opaque dense tensor.
pub struct SvdTensor(DenseTensor);

/// Opaque fitted network.
pub struct SvdModel(SvdInsTnModel);

/// Solver settings. A `data_scale` of zero or less solves on the data as
/// given.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SvdSolverOptions {
    pub gamma: f64,
    pub rho: f64,
    pub mu: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub max_outer: usize,
    pub inner_admm_iters: usize,
    pub data_scale: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SvdCompletionOptions {
    pub solver: SvdSolverOptions,
    pub max_iters: usize,
    pub tol: f64,
}

impl From<&SolverConfig> for SvdSolverOptions {
    fn from(c: &SolverConfig) -> Self {
        Self {
            gamma: c.gamma,
            rho: c.rho,
            mu: c.mu,
            beta: c.beta,
            epsilon: c.epsilon,
            tol: c.tol,
            max_outer: c.max_outer,
            inner_admm_iters: c.inner_admm_iters,
            data_scale: c.data_scale.unwrap_or(0.0),
        }
    }
}

impl From<&SvdSolverOptions> for SolverConfig {
    fn from(o: &SvdSolverOptions) -> Self {
        Self {
            gamma: o.gamma,
            rho: o.rho,
            mu: o.mu,
            beta: o.beta,
            epsilon: o.epsilon,
            tol: o.tol,
            max_outer: o.max_outer,
            inner_admm_iters: o.inner_admm_iters,
            data_scale: (o.data_scale > 0.0).then_some(o.data_scale),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SvdStatus {
    match err {
        Error::InvalidArgument(_) => SvdStatus::InvalidArgument,
        Error::Numerical(_) => SvdStatus::Numerical,
        Error::Invariant(_) => SvdStatus::Invariant,
        Error::DegenerateRank { .. } => SvdStatus::DegenerateRank,
        Error::Format(_) => SvdStatus::Format,
        Error::Io(_) => SvdStatus::Io,
    }
}

struct Failure(SvdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SvdStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SvdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SvdStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {message}"));
            SvdStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure(SvdStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("interior nuls removed").into_raw()
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn svd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn svd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn svd_solver_options_default() -> SvdSolverOptions {
    (&SolverConfig::default()).into()
}

#[no_mangle]
pub extern "C" fn svd_completion_options_default() -> SvdCompletionOptions {
    let c = CompletionConfig::default();
    SvdCompletionOptions {
        solver: (&c.solver).into(),
        max_iters: c.max_iters,
        tol: c.tol,
    }
}

/// Copies `order` dims and `∏ dims` entries (first index fastest) into a new
/// tensor.
///
/// # Safety
/// `dims` must point to `order` values and `data` to the product of them.
#[no_mangle]
pub unsafe extern "C" fn svd_tensor_new(
    order: usize,
    dims: *const usize,
    data: *const f64,
    out: *mut *mut SvdTensor,
) -> SvdStatus {
    guard(|| {
        if dims.is_null() || data.is_null() {
            return Err(null("dims or data"));
        }
        let shape = std::slice::from_raw_parts(dims, order).to_vec();
        let len = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Failure(SvdStatus::InvalidArgument, "tensor size overflows".into()))?;
        let values = std::slice::from_raw_parts(data, len).to_vec();
        write_out(out, SvdTensor(DenseTensor::new(shape, values)?), "out")
    })
}

/// # Safety
/// `path` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn svd_tensor_load(path: *const c_char, out: *mut *mut SvdTensor) -> SvdStatus {
    guard(|| write_out(out, SvdTensor(io::load_tensor(path_arg(path)?)?), "out"))
}

/// # Safety
/// `tensor` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn svd_tensor_save(tensor: *const SvdTensor, path: *const c_char) -> SvdStatus {
    guard(|| Ok(io::save_tensor(path_arg(path)?, &borrow(tensor, "tensor")?.0)?))
}

/// Order of the tensor, or 0 for a null handle.
///
/// # Safety
/// `tensor` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn svd_tensor_order(tensor: *const SvdTensor) -> usize {
    tensor.as_ref().map_or(0, |t| t.0.order())
}

/// Number of entries, or 0 for a null handle.
///
/// # Safety
/// `tensor` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn svd_tensor_len(tensor: *const SvdTensor) -> usize {
    tensor.as_ref().map_or(0, |t| t.0.len())
}

/// Copies the dims into `dims`, which holds `capacity` values.
///
/// # Safety
/// `tensor` must be a live handle and `dims` writable for `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn svd_tensor_dims(tensor: *const SvdTensor, dims: *mut usize, capacity: usize) -> SvdStatus {
    guard(|| {
        let t = &borrow(tensor, "tensor")?.0;
        copy_out(t.shape(), dims, capacity)
    })
}

/// Copies the entries (first index fastest) into `data`, which holds
/// `capacity` values.
///
/// # Safety
/// `tensor` must be a live handle and `data` writable for `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn svd_tensor_data(tensor: *const SvdTensor, data: *mut f64, capacity: usize) -> SvdStatus {
    guard(|| {
        let t = &borrow(tensor, "tensor")?.0;
        copy_out(t.data(), data, capacity)
    })
}

unsafe fn copy_out<T: Copy>(src: &[T], dst: *mut T, capacity: usize) -> Result<(), Failure> {
    if dst.is_null() {
        return Err(null("output buffer"));
    }
    if capacity < src.len() {
        return Err(Failure(
            SvdStatus::InvalidArgument,
            format!("buffer holds {capacity} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// # Safety
/// `tensor` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn svd_tensor_free(tensor: *mut SvdTensor) {
    if !tensor.is_null() {
        drop(Box::from_raw(tensor));
    }
}

/// Searches a network for `x`. On success `out_model` receives the model and,
/// when non-null, `out_report` a JSON report and `out_converged` whether the
/// tolerance was reached before the sweep cap.
///
/// # Safety
/// Handles must be live; out-pointers must be writable or (where noted) null.
#[no_mangle]
pub unsafe extern "C" fn svd_decompose(
    x: *const SvdTensor,
    options: *const SvdSolverOptions,
    out_model: *mut *mut SvdModel,
    out_report: *mut *mut c_char,
    out_converged: *mut bool,
) -> SvdStatus {
    guard(|| {
        let x = &borrow(x, "tensor")?.0;
        let config = SolverConfig::from(borrow(options, "options")?);
        if out_model.is_null() {
            return Err(null("out_model"));
        }
        let (model, report) = decompose(x, &config)?;
        if !out_report.is_null() {
            *out_report = to_c_string(svdinstn::report::to_json(&report)?);
        }
        if !out_converged.is_null() {
            *out_converged = report.converged;
        }
        write_out(out_model, SvdModel(model), "out_model")
    })
}

/// Completes `observed` on the positions where `mask` is nonzero. Observed
/// entries of the output equal the input bit for bit.
///
/// # Safety
/// Handles must be live; `out_tensor` writable; `out_report` and
/// `out_converged` writable or null.
#[no_mangle]
pub unsafe extern "C" fn svd_complete(
    observed: *const SvdTensor,
    mask: *const SvdTensor,
    options: *const SvdCompletionOptions,
    out_tensor: *mut *mut SvdTensor,
    out_report: *mut *mut c_char,
    out_converged: *mut bool,
) -> SvdStatus {
    guard(|| {
        let f = &borrow(observed, "observed")?.0;
        let mask = ObservationMask::from_tensor(&borrow(mask, "mask")?.0)?;
        let o = borrow(options, "options")?;
        let config = CompletionConfig {
            solver: (&o.solver).into(),
            max_iters: o.max_iters,
            tol: o.tol,
        };
        if out_tensor.is_null() {
            return Err(null("out_tensor"));
        }
        let (output, _, report) = complete(f, &mask, &config)?;
        if !out_report.is_null() {
            *out_report = to_c_string(svdinstn::report::to_json(&report)?);
        }
        if !out_converged.is_null() {
            *out_converged = report.converged;
        }
        write_out(out_tensor, SvdTensor(output), "out_tensor")
    })
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn svd_model_evaluate(model: *const SvdModel, out: *mut *mut SvdTensor) -> SvdStatus {
    guard(|| write_out(out, SvdTensor(evaluate(&borrow(model, "model")?.0)), "out"))
}

/// Order of the model, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn svd_model_order(model: *const SvdModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.order())
}

/// Copies the upper triangle of the rank matrix, edges `(0,1), (0,2), …` in
/// lexicographic order, into `ranks` (`N(N-1)/2` values).
///
/// # Safety
/// `model` must be a live handle and `ranks` writable for `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn svd_model_ranks(model: *const SvdModel, ranks: *mut usize, capacity: usize) -> SvdStatus {
    guard(|| copy_out(borrow(model, "model")?.0.ranks().entries(), ranks, capacity))
}

/// # Safety
/// `model` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn svd_model_save(model: *const SvdModel, path: *const c_char) -> SvdStatus {
    guard(|| Ok(io::save_model(path_arg(path)?, &borrow(model, "model")?.0)?))
}

/// # Safety
/// `path` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn svd_model_load(path: *const c_char, out: *mut *mut SvdModel) -> SvdStatus {
    guard(|| write_out(out, SvdModel(io::load_model(path_arg(path)?)?), "out"))
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn svd_model_free(model: *mut SvdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Frees a string returned through an out-parameter.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn svd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
