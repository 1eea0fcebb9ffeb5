//! C ABI for `optdesign`.
//!
//! Designs and models are opaque handles created and freed through this API.
//! Every function returns an [`OdStatus`]; on failure a message is available
//! from [`od_last_error_message`] on the same thread. Strings returned by the
//! library are freed with [`od_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use optdesign::cli::exit_code;
use optdesign::design::{make_grid, ExperimentalRegion, ParamPoint};
use optdesign::equivalence::{sensitivity, verify_local_optimality};
use optdesign::infomat::{criterion_value, info_matrix, Criterion};
use optdesign::io::{design_to_string, parse_design_str, LoadedDesign};
use optdesign::model::{solve_logistic_ustar, Family, ModelSpec};
use optdesign::optimizer::{optimize, OptimizerConfig};
use optdesign::transfer::{transfer_to_intercept, transfer_to_no_intercept};
use optdesign::Error;

pub const OD_CRITERION_D: i32 = 0;
pub const OD_CRITERION_A: i32 = 1;
pub const OD_TO_NO_INTERCEPT: i32 = 0;
pub const OD_TO_INTERCEPT: i32 = 1;

/// Status codes; 0-4 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdStatus {
    Ok = 0,
    CheckFailed = 1,
    InputError = 2,
    Singular = 3,
    NoConvergence = 4,
    NullPointer = 5,
    Panic = 6,
}

/// A design together with the model block it was loaded with, if any.
pub struct OdDesign {
    inner: LoadedDesign,
}

pub struct OdModel {
    spec: ModelSpec,
    beta: ParamPoint,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> OdStatus {
    match exit_code(err) {
        1 => OdStatus::CheckFailed,
        3 => OdStatus::Singular,
        4 => OdStatus::NoConvergence,
        _ => OdStatus::InputError,
    }
}

fn guard(f: impl FnOnce() -> Result<(), OdStatus>) -> OdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OdStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside optdesign");
            OdStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, OdStatus>;
}

impl<T> OrStatus<T> for optdesign::Result<T> {
    fn or_status(self) -> Result<T, OdStatus> {
        self.map_err(|e| {
            set_error(&e.to_string());
            status_of(&e)
        })
    }
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, OdStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null pointer argument");
        OdStatus::NullPointer
    })
}

unsafe fn out_ref<'a, T>(p: *mut T) -> Result<&'a mut T, OdStatus> {
    p.as_mut().ok_or_else(|| {
        set_error("null output pointer");
        OdStatus::NullPointer
    })
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], OdStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        set_error("null array argument");
        return Err(OdStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, OdStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(OdStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string is not valid UTF-8");
        OdStatus::InputError
    })
}

fn criterion(c: i32) -> Result<Criterion, OdStatus> {
    match c {
        OD_CRITERION_D => Ok(Criterion::D),
        OD_CRITERION_A => Ok(Criterion::A),
        other => {
            set_error(&format!("unknown criterion code {other}"));
            Err(OdStatus::InputError)
        }
    }
}

fn into_handle<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message for the last failed call on this thread. Valid until the next call.
#[no_mangle]
pub extern "C" fn od_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn od_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a JSON design file. `truncate <= 0` uses the default bound for unbounded axes.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn od_design_from_json(json: *const c_char, truncate: f64, out: *mut *mut OdDesign) -> OdStatus {
    guard(|| {
        let text = str_arg(json)?;
        let out = out_ref(out)?;
        let bound = (truncate > 0.0).then_some(truncate);
        let inner = parse_design_str(text, bound).or_status()?;
        *out = into_handle(OdDesign { inner });
        Ok(())
    })
}

/// Serializes a design (and its model block) to JSON. Free the result with [`od_string_free`].
///
/// # Safety
/// `design` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn od_design_to_json(design: *const OdDesign, out: *mut *mut c_char) -> OdStatus {
    guard(|| {
        let d = deref(design)?;
        let out = out_ref(out)?;
        let model = d.inner.model.as_ref().map(|(m, b)| (m, b));
        let text = design_to_string(&d.inner.design, model).or_status()?;
        *out = CString::new(text).map_err(|_| OdStatus::InputError)?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `design` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn od_design_free(design: *mut OdDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// # Safety
/// `design` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn od_design_shape(design: *const OdDesign, len: *mut usize, dim: *mut usize) -> OdStatus {
    guard(|| {
        let d = deref(design)?;
        *out_ref(len)? = d.inner.design.len();
        *out_ref(dim)? = d.inner.design.dim();
        Ok(())
    })
}

/// Copies support point `i` into `x` (length `dim`) and its weight into `w`.
///
/// # Safety
/// `design` must be a live handle, `x` must hold `dim` doubles, `w` must be writable.
#[no_mangle]
pub unsafe extern "C" fn od_design_point(
    design: *const OdDesign,
    i: usize,
    x: *mut f64,
    dim: usize,
    w: *mut f64,
) -> OdStatus {
    guard(|| {
        let d = deref(design)?;
        let pts = d.inner.design.points();
        let p = pts.get(i).ok_or_else(|| {
            set_error(&format!("point index {i} out of range ({} points)", pts.len()));
            OdStatus::InputError
        })?;
        if dim != p.x.len() || x.is_null() {
            set_error("x buffer has the wrong length");
            return Err(OdStatus::InputError);
        }
        ptr::copy_nonoverlapping(p.x.as_ptr(), x, dim);
        *out_ref(w)? = p.w;
        Ok(())
    })
}

/// Builds a model. `beta` is the full parameter vector with the intercept first
/// when `with_intercept`; for E-max and exponential models the slope part is `(β₁, β₂)`.
///
/// # Safety
/// `family` must be a NUL-terminated string, `beta` must hold `beta_len` doubles,
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn od_model_new(
    family: *const c_char,
    with_intercept: bool,
    dim: usize,
    beta: *const f64,
    beta_len: usize,
    out: *mut *mut OdModel,
) -> OdStatus {
    guard(|| {
        let family: Family = str_arg(family)?.parse().or_status()?;
        let beta = slice(beta, beta_len)?;
        let out = out_ref(out)?;
        let spec = ModelSpec::new(family, with_intercept, dim).or_status()?;
        let beta = match (with_intercept, beta.split_first()) {
            (true, Some((b0, rest))) => ParamPoint::with_intercept(*b0, rest.to_vec()),
            (true, None) => {
                set_error("beta is empty");
                return Err(OdStatus::InputError);
            }
            (false, _) => ParamPoint::without_intercept(beta.to_vec()),
        };
        spec.check_params(&beta).or_status()?;
        *out = into_handle(OdModel { spec, beta });
        Ok(())
    })
}

/// The model block stored in a design file.
///
/// # Safety
/// `design` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn od_design_model(design: *const OdDesign, out: *mut *mut OdModel) -> OdStatus {
    guard(|| {
        let d = deref(design)?;
        let out = out_ref(out)?;
        let (spec, beta) = d.inner.model().or_status()?;
        *out = into_handle(OdModel {
            spec: *spec,
            beta: beta.clone(),
        });
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn od_model_free(model: *mut OdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// `det(M⁻¹)` for D, `tr(M⁻¹)` for A.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn od_criterion(
    design: *const OdDesign,
    model: *const OdModel,
    which: i32,
    out: *mut f64,
) -> OdStatus {
    guard(|| {
        let d = deref(design)?;
        let m = deref(model)?;
        let which = criterion(which)?;
        let out = out_ref(out)?;
        let info = info_matrix(&d.inner.design, &m.spec, &m.beta).or_status()?;
        *out = criterion_value(&info, which).or_status()?;
        Ok(())
    })
}

/// Sensitivity `ψ(x)` of the design.
///
/// # Safety
/// Handles must be live; `x` must hold `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn od_sensitivity(
    design: *const OdDesign,
    model: *const OdModel,
    which: i32,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> OdStatus {
    guard(|| {
        let d = deref(design)?;
        let m = deref(model)?;
        let which = criterion(which)?;
        let x = slice(x, dim)?;
        let out = out_ref(out)?;
        *out = sensitivity(&d.inner.design, &m.spec, &m.beta, x, which).or_status()?;
        Ok(())
    })
}

/// Equivalence check on a `grid_res` lattice over the design's region.
/// Returns `Ok` when it passes and `CheckFailed` otherwise; `max_excess` is set in both cases.
///
/// # Safety
/// Handles must be live; `max_excess` must be writable.
#[no_mangle]
pub unsafe extern "C" fn od_verify(
    design: *const OdDesign,
    model: *const OdModel,
    which: i32,
    grid_res: usize,
    slack: f64,
    max_excess: *mut f64,
) -> OdStatus {
    guard(|| {
        let d = deref(design)?;
        let m = deref(model)?;
        let which = criterion(which)?;
        let out = out_ref(max_excess)?;
        let grid = make_grid(d.inner.design.region(), grid_res).or_status()?;
        let rep = verify_local_optimality(&d.inner.design, &m.spec, &m.beta, which, &grid, slack).or_status()?;
        *out = rep.max_excess();
        if rep.passed {
            Ok(())
        } else {
            set_error(&format!(
                "equivalence condition fails (max excess {:e})",
                rep.max_excess()
            ));
            Err(OdStatus::CheckFailed)
        }
    })
}

/// Transfers a design between the intercept and no-intercept models.
/// `model` describes the family and `β`; its intercept flag is ignored. On
/// `Ok` the result is certified and written to `out` together with the target model.
///
/// # Safety
/// Handles must be live; `out` and `origin_weight` must be writable.
#[no_mangle]
pub unsafe extern "C" fn od_transfer(
    design: *const OdDesign,
    model: *const OdModel,
    which: i32,
    direction: i32,
    grid_res: usize,
    slack: f64,
    out: *mut *mut OdDesign,
    origin_weight: *mut f64,
) -> OdStatus {
    guard(|| {
        let d = deref(design)?;
        let m = deref(model)?;
        let which = criterion(which)?;
        let out = out_ref(out)?;
        let ow = out_ref(origin_weight)?;
        let grid = make_grid(d.inner.design.region(), grid_res).or_status()?;
        let spec = m.spec.intercept_model();
        let beta = ParamPoint::with_intercept(m.beta.beta0(), m.beta.slope.clone());
        let (rep, target) = match direction {
            OD_TO_NO_INTERCEPT => (
                transfer_to_no_intercept(&d.inner.design, &spec, &beta, which, &grid, slack).or_status()?,
                (spec.no_intercept_model(), beta.tilde()),
            ),
            OD_TO_INTERCEPT => (
                transfer_to_intercept(&d.inner.design, &spec, &beta, which, &grid, slack).or_status()?,
                (spec, beta.clone()),
            ),
            other => {
                set_error(&format!("unknown direction code {other}"));
                return Err(OdStatus::InputError);
            }
        };
        *ow = rep.origin_weight;
        *out = into_handle(OdDesign {
            inner: LoadedDesign {
                design: rep.result,
                model: Some(target),
            },
        });
        if rep.verified {
            Ok(())
        } else {
            set_error("transferred design did not pass verification");
            Err(OdStatus::CheckFailed)
        }
    })
}

/// Multiplicative algorithm on a `grid_res` lattice over the box `[lower, upper]`,
/// with default iteration limit, tolerance and prune threshold.
///
/// # Safety
/// `model` must be live; `lower`/`upper` must hold `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn od_optimize(
    model: *const OdModel,
    lower: *const f64,
    upper: *const f64,
    dim: usize,
    grid_res: usize,
    which: i32,
    out: *mut *mut OdDesign,
) -> OdStatus {
    guard(|| {
        let m = deref(model)?;
        let which = criterion(which)?;
        let lower = slice(lower, dim)?.to_vec();
        let upper = slice(upper, dim)?.to_vec();
        let out = out_ref(out)?;
        let region = ExperimentalRegion::new_box(lower, upper).or_status()?;
        let grid = make_grid(&region, grid_res).or_status()?;
        let res = optimize(&m.spec, &m.beta, &OptimizerConfig::new(grid, which)).or_status()?;
        *out = into_handle(OdDesign {
            inner: LoadedDesign {
                design: res.design,
                model: Some((m.spec, m.beta.clone())),
            },
        });
        Ok(())
    })
}

/// Root of `2 + u + 2eᵘ − u eᵘ` for `u > 2`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn od_ustar(out: *mut f64) -> OdStatus {
    guard(|| {
        *out_ref(out)? = solve_logistic_ustar();
        Ok(())
    })
}
