//! C ABI for `wg-lift`.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns a
//! [`WgStatus`]; on failure `wg_last_error_message` describes the error
//! for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wg_lift::config::StudyConfig;
use wg_lift::mesh::{MeshFamily, PolytopalMesh};
use wg_lift::study::{run_study, ConvergenceReport};
use wg_lift::WgError;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Geometry = 3,
    Certificate = 4,
    SolveFailed = 5,
    Io = 6,
    Internal = 7,
}

/// Error columns of a convergence report.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WgColumn {
    /// `‖u - u_0‖`
    L2 = 0,
    /// `‖Q_0 u - u_0‖`
    L2Projection = 1,
    /// `‖u - L_h u_h‖`
    L2Lift = 2,
    /// `|u - u_0|_{1,h}`
    H1 = 3,
    /// `|||Q_h u - u_h|||`
    EnergyProjection = 4,
    /// `|u - L_h u_h|_{1,h}`
    H1Lift = 5,
}

/// Opaque mesh handle.
pub struct WgMesh {
    inner: PolytopalMesh,
}

/// Opaque convergence report handle.
pub struct WgReport {
    inner: ConvergenceReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &WgError) -> WgStatus {
    match e {
        WgError::Level { source, .. } => status_of(source),
        WgError::Config { .. } | WgError::UnsupportedDegree { .. } => WgStatus::InvalidArgument,
        WgError::InvalidMesh(_)
        | WgError::DegenerateCell { .. }
        | WgError::SingularGram { .. }
        | WgError::EmptyLambdaSpace { .. }
        | WgError::RankDeadband { .. }
        | WgError::MeshParse { .. } => WgStatus::Geometry,
        WgError::CertificateFailure { .. } => WgStatus::Certificate,
        WgError::SolveFailed(_) => WgStatus::SolveFailed,
        WgError::Io(_) => WgStatus::Io,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (WgStatus, String)>) -> WgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WgStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            WgStatus::Internal
        }
    }
}

fn lib_err(e: WgError) -> (WgStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (WgStatus, String) {
    (WgStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (WgStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (WgStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Generates a mesh of the named family (`quad`, `mixed` or `wedge`).
///
/// # Safety
/// `family` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wg_mesh_generate(
    family: *const c_char,
    level: u32,
    out: *mut *mut WgMesh,
) -> WgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let family: MeshFamily = read_str(family, "family")?.parse().map_err(lib_err)?;
        if level > 9 {
            return Err((
                WgStatus::InvalidArgument,
                format!("level {level} is beyond the supported range 0..=9"),
            ));
        }
        let mesh = Box::new(WgMesh {
            inner: family.generate(level),
        });
        *out = Box::into_raw(mesh);
        Ok(())
    })
}

/// # Safety
/// `mesh` must be null or a handle from `wg_mesh_generate`.
#[no_mangle]
pub unsafe extern "C" fn wg_mesh_dim(mesh: *const WgMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.inner.dim)
}

/// # Safety
/// `mesh` must be null or a handle from `wg_mesh_generate`.
#[no_mangle]
pub unsafe extern "C" fn wg_mesh_num_vertices(mesh: *const WgMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.inner.vertices.len())
}

/// # Safety
/// `mesh` must be null or a handle from `wg_mesh_generate`.
#[no_mangle]
pub unsafe extern "C" fn wg_mesh_num_cells(mesh: *const WgMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.inner.num_cells())
}

/// # Safety
/// `mesh` must be null or a handle from `wg_mesh_generate`.
#[no_mangle]
pub unsafe extern "C" fn wg_mesh_num_faces(mesh: *const WgMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.inner.num_faces())
}

/// Largest cell diameter.
///
/// # Safety
/// `mesh` must be null or a handle from `wg_mesh_generate`.
#[no_mangle]
pub unsafe extern "C" fn wg_mesh_size(mesh: *const WgMesh) -> f64 {
    mesh.as_ref().map_or(f64::NAN, |m| m.inner.mesh_size())
}

/// # Safety
/// `mesh` must be null or a handle from `wg_mesh_generate` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wg_mesh_free(mesh: *mut WgMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Runs a convergence study on levels `level_min..=level_max` with the
/// default exact solution of the family's dimension.
///
/// # Safety
/// `family` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wg_study_run(
    family: *const c_char,
    k: u32,
    level_min: u32,
    level_max: u32,
    out: *mut *mut WgReport,
) -> WgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let family: MeshFamily = read_str(family, "family")?.parse().map_err(lib_err)?;
        let mut config = StudyConfig::new(family, k as usize);
        config.levels = level_min..=level_max;
        config.validate().map_err(lib_err)?;
        let report = run_study(&config).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(WgReport { inner: report }));
        Ok(())
    })
}

/// # Safety
/// `report` must be null or a handle from `wg_study_run`.
#[no_mangle]
pub unsafe extern "C" fn wg_report_num_levels(report: *const WgReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.levels.len())
}

/// Mesh size of level `index` (0-based within the report).
///
/// # Safety
/// `report` must be a handle from `wg_study_run`; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wg_report_h(
    report: *const WgReport,
    index: usize,
    out: *mut f64,
) -> WgStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let l = r.inner.levels.get(index).ok_or_else(|| bad_index(index))?;
        *out.as_mut().ok_or_else(|| null("out"))? = l.h;
        Ok(())
    })
}

fn bad_index(index: usize) -> (WgStatus, String) {
    (
        WgStatus::InvalidArgument,
        format!("level index {index} out of range"),
    )
}

/// Error of `column` on level `index`.
///
/// # Safety
/// `report` must be a handle from `wg_study_run`; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wg_report_error(
    report: *const WgReport,
    index: usize,
    column: WgColumn,
    out: *mut f64,
) -> WgStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let l = r.inner.levels.get(index).ok_or_else(|| bad_index(index))?;
        *out.as_mut().ok_or_else(|| null("out"))? = l.errors[column as usize];
        Ok(())
    })
}

/// Rate of `column` between levels `index - 1` and `index`; fails for
/// `index == 0`.
///
/// # Safety
/// `report` must be a handle from `wg_study_run`; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wg_report_rate(
    report: *const WgReport,
    index: usize,
    column: WgColumn,
    out: *mut f64,
) -> WgStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let rate = r
            .inner
            .rates(column as usize)
            .get(index)
            .copied()
            .flatten()
            .ok_or_else(|| bad_index(index))?;
        *out.as_mut().ok_or_else(|| null("out"))? = rate;
        Ok(())
    })
}

/// The report as CSV; release with `wg_string_free`. Returns null when
/// `report` is null.
///
/// # Safety
/// `report` must be null or a handle from `wg_study_run`.
#[no_mangle]
pub unsafe extern "C" fn wg_report_csv(report: *const WgReport) -> *mut c_char {
    match report.as_ref() {
        Some(r) => CString::new(r.inner.to_csv()).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `report` must be null or a handle from `wg_study_run` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wg_report_free(report: *mut WgReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
