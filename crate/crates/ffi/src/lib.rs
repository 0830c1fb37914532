//! C interface to the `ylab` solvers.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns a
//! `YlabStatus`; on failure the message is kept per thread and can be fetched
//! with `ylab_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ylab::analysis;
use ylab::curvature::curvature_report;
use ylab::pde::{self, GridField};
use ylab::radial::{self, RadialSolution};
use ylab::{Domain, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidDomain = 3,
    Precondition = 4,
    SolverFailed = 5,
    Overflow = 6,
    PointAtInfinity = 7,
    BufferTooSmall = 8,
    Panic = 9,
    Other = 10,
}

/// Opaque domain handle.
pub struct YlabDomain(Domain);

/// Opaque grid solution handle.
pub struct YlabField(GridField);

/// Opaque radial solution handle.
pub struct YlabRadial(RadialSolution);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct YlabSolveInfo {
    pub iterations: usize,
    pub unknowns: usize,
    pub residual_inf: f64,
    pub wall_time: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct YlabCurvatureSummary {
    pub min_ricci: f64,
    pub max_ricci: f64,
    pub min_sectional: f64,
    pub max_sectional: f64,
    pub trace_defect_max: f64,
    pub residual_max: f64,
    pub reported_nodes: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> YlabStatus {
    match e {
        Error::InvalidDomain(_) => YlabStatus::InvalidDomain,
        Error::Precondition(_) | Error::FitWindow { .. } | Error::NonSmooth { .. } => YlabStatus::Precondition,
        Error::Divergence { .. } | Error::Stall(_) | Error::Projection { .. } => YlabStatus::SolverFailed,
        Error::Overflow(_) => YlabStatus::Overflow,
        Error::PointAtInfinity => YlabStatus::PointAtInfinity,
        _ => YlabStatus::Other,
    }
}

fn guard(f: impl FnOnce() -> Result<(), YlabStatus>) -> YlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => YlabStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            YlabStatus::Panic
        }
    }
}

fn fail(e: Error) -> YlabStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> YlabStatus {
    set_error(format!("{what} is null"));
    YlabStatus::NullPointer
}

unsafe fn slice_in<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], YlabStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], YlabStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), YlabStatus> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, YlabStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or null. The caller owns
/// the string and must release it with `ylab_string_free`.
#[no_mangle]
pub extern "C" fn ylab_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(s) => s.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ylab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Static version string; do not free.
#[no_mangle]
pub extern "C" fn ylab_version() -> *const c_char {
    static V: &[u8] = concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes();
    V.as_ptr().cast()
}

/// # Safety
/// `center` must point to `n` doubles (or be null for the origin); `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ylab_domain_ball(n: usize, center: *const f64, radius: f64, out: *mut *mut YlabDomain) -> YlabStatus {
    guard(|| {
        let c = if center.is_null() { vec![0.0; n] } else { slice_in(center, n, "center")?.to_vec() };
        let d = Domain::ball(n, c, radius).map_err(fail)?;
        put(out, Box::into_raw(Box::new(YlabDomain(d))), "out")
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ylab_domain_annulus(n: usize, r0: f64, outer: f64, out: *mut *mut YlabDomain) -> YlabStatus {
    guard(|| {
        let d = Domain::annulus(n, r0, outer).map_err(fail)?;
        put(out, Box::into_raw(Box::new(YlabDomain(d))), "out")
    })
}

/// # Safety
/// `axes` must point to `n` doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ylab_domain_ellipsoid(axes: *const f64, n: usize, out: *mut *mut YlabDomain) -> YlabStatus {
    guard(|| {
        let a = slice_in(axes, n, "axes")?.to_vec();
        let d = Domain::ellipsoid(a).map_err(fail)?;
        put(out, Box::into_raw(Box::new(YlabDomain(d))), "out")
    })
}

/// # Safety
/// `d` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ylab_domain_free(d: *mut YlabDomain) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// # Safety
/// `d` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn ylab_domain_dim(d: *const YlabDomain) -> usize {
    d.as_ref().map_or(0, |d| d.0.dim())
}

/// Positive inside, zero on the boundary, negative outside.
///
/// # Safety
/// `x` must point to `dim` doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ylab_domain_signed_distance(d: *const YlabDomain, x: *const f64, out: *mut f64) -> YlabStatus {
    guard(|| {
        let d = handle(d, "domain")?;
        let x = slice_in(x, d.0.dim(), "x")?;
        let s = d.0.signed_distance(x).map_err(fail)?;
        put(out, s, "out")
    })
}

/// Nearest boundary point of `x`, its interior unit normal and mean curvature
/// (sum of principal curvatures).
///
/// # Safety
/// `x`, `position` and `normal` must point to `dim` doubles; `mean_curvature`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ylab_domain_project(
    d: *const YlabDomain,
    x: *const f64,
    position: *mut f64,
    normal: *mut f64,
    mean_curvature: *mut f64,
) -> YlabStatus {
    guard(|| {
        let d = handle(d, "domain")?;
        let n = d.0.dim();
        let x = slice_in(x, n, "x")?;
        let p = d.0.project(x).map_err(fail)?;
        slice_out(position, n, "position")?.copy_from_slice(&p.boundary.position);
        slice_out(normal, n, "normal")?.copy_from_slice(&p.boundary.interior_normal);
        put(mean_curvature, p.boundary.mean_curvature, "mean_curvature")
    })
}

/// Grid solve of `v Δv = (n/2)(|∇v|² − 1)` with mesh width `h`.
///
/// # Safety
/// `out` must be a valid pointer; `info` may be null.
#[no_mangle]
pub unsafe extern "C" fn ylab_solve_v(
    d: *const YlabDomain,
    h: f64,
    tol: f64,
    out: *mut *mut YlabField,
    info: *mut YlabSolveInfo,
) -> YlabStatus {
    guard(|| {
        let d = handle(d, "domain")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (field, rep) = pde::solve_v(&d.0, h, tol).map_err(fail)?;
        if !info.is_null() {
            info.write(YlabSolveInfo {
                iterations: rep.iterations,
                unknowns: rep.unknowns,
                residual_inf: rep.residual_inf,
                wall_time: rep.wall_time,
            });
        }
        put(out, Box::into_raw(Box::new(YlabField(field))), "out")
    })
}

/// # Safety
/// `f` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ylab_field_free(f: *mut YlabField) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Number of interior nodes (the unknowns of the solve).
///
/// # Safety
/// `f` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn ylab_field_interior_count(f: *const YlabField) -> usize {
    f.as_ref().map_or(0, |f| f.0.interior_indices().len())
}

/// Multilinear interpolation of `v` at `x`.
///
/// # Safety
/// `x` must point to `n` doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ylab_field_value_at(f: *const YlabField, x: *const f64, out: *mut f64) -> YlabStatus {
    guard(|| {
        let f = handle(f, "field")?;
        let x = slice_in(x, f.0.n, "x")?;
        match f.0.interpolate(x) {
            Some(v) => put(out, v, "out"),
            None => {
                set_error(format!("{x:?} is outside the solved region"));
                Err(YlabStatus::InvalidArgument)
            }
        }
    })
}

/// Ricci and sectional extremes over interior nodes at depth ≥ 2h.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ylab_field_curvature(f: *const YlabField, out: *mut YlabCurvatureSummary) -> YlabStatus {
    guard(|| {
        let f = handle(f, "field")?;
        let (r, _) = curvature_report(&f.0, "ffi").map_err(fail)?;
        put(
            out,
            YlabCurvatureSummary {
                min_ricci: r.min_ricci,
                max_ricci: r.max_ricci,
                min_sectional: r.sectional_range[0],
                max_sectional: r.sectional_range[1],
                trace_defect_max: r.trace_defect_max,
                residual_max: r.residual_max,
                reported_nodes: r.reported_nodes,
            },
            "out",
        )
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ylab_radial_ball(n: usize, radius: f64, out: *mut *mut YlabRadial) -> YlabStatus {
    guard(|| {
        let s = radial::solve_ball(n, radius).map_err(fail)?;
        put(out, Box::into_raw(Box::new(YlabRadial(s))), "out")
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ylab_radial_annulus(n: usize, r0: f64, outer: f64, tol: f64, out: *mut *mut YlabRadial) -> YlabStatus {
    guard(|| {
        let s = radial::solve_annulus(n, r0, outer, tol).map_err(fail)?;
        put(out, Box::into_raw(Box::new(YlabRadial(s))), "out")
    })
}

/// # Safety
/// `s` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ylab_radial_free(s: *mut YlabRadial) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn ylab_radial_len(s: *const YlabRadial) -> usize {
    s.as_ref().map_or(0, |s| s.0.r.len())
}

/// Copies the mesh and profile into caller buffers of capacity `cap`.
///
/// # Safety
/// `r` and `v` must point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ylab_radial_copy(s: *const YlabRadial, r: *mut f64, v: *mut f64, cap: usize) -> YlabStatus {
    guard(|| {
        let s = handle(s, "solution")?;
        let len = s.0.r.len();
        if cap < len {
            set_error(format!("buffer holds {cap} values, need {len}"));
            return Err(YlabStatus::BufferTooSmall);
        }
        slice_out(r, len, "r")?.copy_from_slice(&s.0.r);
        slice_out(v, len, "v")?.copy_from_slice(&s.0.v);
        Ok(())
    })
}

/// Largest Ricci eigenvalue and the radius where it occurs.
///
/// # Safety
/// `value` and `at` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ylab_radial_max_ricci(s: *const YlabRadial, value: *mut f64, at: *mut f64) -> YlabStatus {
    guard(|| {
        let s = handle(s, "solution")?;
        let (m, r) = radial::max_ricci(&s.0);
        put(value, m, "value")?;
        put(at, r, "at")
    })
}

/// `y = T(x)`, with `y` of length `n + 1`.
///
/// # Safety
/// `x` must point to `n` doubles and `y` to `n + 1`.
#[no_mangle]
pub unsafe extern "C" fn ylab_stereographic_lift(x: *const f64, n: usize, y: *mut f64) -> YlabStatus {
    guard(|| {
        let x = slice_in(x, n, "x")?;
        slice_out(y, n + 1, "y")?.copy_from_slice(&analysis::stereographic_lift(x));
        Ok(())
    })
}

/// `x = T⁻¹(y)`, with `y` of length `n + 1`. Fails at the north pole.
///
/// # Safety
/// `y` must point to `n + 1` doubles and `x` to `n`.
#[no_mangle]
pub unsafe extern "C" fn ylab_stereographic_project(y: *const f64, n: usize, x: *mut f64) -> YlabStatus {
    guard(|| {
        let y = slice_in(y, n + 1, "y")?;
        let p = analysis::stereographic_project(y).map_err(fail)?;
        slice_out(x, n, "x")?.copy_from_slice(&p);
        Ok(())
    })
}

/// Runs the convex-domain inequality checks; `pass` receives 1 or 0 and
/// `sectional_gap` the strict negativity margin.
///
/// # Safety
/// `pass` and `sectional_gap` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ylab_verify_convex(
    d: *const YlabDomain,
    h: f64,
    tol: f64,
    pass: *mut i32,
    sectional_gap: *mut f64,
) -> YlabStatus {
    guard(|| {
        let d = handle(d, "domain")?;
        let v = analysis::verify_convex(&d.0, h, tol).map_err(fail)?;
        put(pass, i32::from(v.pass), "pass")?;
        put(sectional_gap, v.sectional_gap, "sectional_gap")
    })
}
