//! C ABI over the thin obstacle laboratory.
//!
//! Fields are opaque handles created and destroyed here; every function
//! returns a status code and writes results through out-pointers. The last
//! error message per thread is available through `sg_last_error_message`.

use signorini::epi::epi_gain;
use signorini::field::ScalarField;
use signorini::grid::Grid;
use signorini::poly::Poly2m;
use signorini::profiles::BlowupProfile;
use signorini::projection::dist_to_cone32;
use signorini::quad::{boundary_mass, dirichlet_energy, weiss_energy};
use signorini::solver::{solve, SignoriniProblem, SolverOptions};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    SgOk = 0,
    SgNullPointer = 1,
    SgInvalidArgument = 2,
    SgIoError = 3,
    SgNumericsError = 4,
}

/// Opaque grid-sampled scalar field.
pub struct SgField {
    inner: ScalarField,
}

/// Solver outcome summary.
#[repr(C)]
pub struct SgSolveReport {
    pub iterations: u64,
    pub final_update: f64,
    pub converged: bool,
    /// Max of |u * one-sided normal slope| over the contact plane.
    pub complementarity: f64,
}

/// Outcome of one epiperimetric gain measurement.
#[repr(C)]
pub struct SgEpiGain {
    /// Boundary adjusted energy of the homogeneous datum.
    pub g_c: f64,
    /// Boundary adjusted energy of the constrained minimizer.
    pub g_v: f64,
    /// 1 - g_v/g_c; meaningful only when `has_kappa` is set.
    pub kappa: f64,
    pub has_kappa: bool,
    /// The datum energy sat below the discretization noise floor.
    pub cone_like: bool,
    pub solver_converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: SgStatus, err: impl std::fmt::Display) -> SgStatus {
    let msg = CString::new(err.to_string()).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = msg);
    status
}

fn fail_of(err: signorini::Error) -> SgStatus {
    let status = match &err {
        signorini::Error::Io(_) | signorini::Error::Format(_) => SgStatus::SgIoError,
        _ => SgStatus::SgInvalidArgument,
    };
    fail(status, err)
}

/// Message of the most recent error on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

unsafe fn point3(p: *const f64) -> Option<[f64; 3]> {
    if p.is_null() {
        return None;
    }
    Some([*p, *p.add(1), *p.add(2)])
}

fn boxed(field: ScalarField, out: *mut *mut SgField) -> SgStatus {
    let handle = Box::new(SgField { inner: field });
    unsafe { *out = Box::into_raw(handle) };
    SgStatus::SgOk
}

/// Sample lambda h_e on a fresh grid; the direction is given by its angle
/// inside the thin plane (n = 2 keeps the sign of the cosine).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sg_field_cone(
    dim: u32,
    resolution: u32,
    radius: f64,
    lambda: f64,
    angle_rad: f64,
    out: *mut *mut SgField,
) -> SgStatus {
    if out.is_null() {
        return fail(SgStatus::SgNullPointer, "null out pointer");
    }
    let grid = match Grid::new(dim as usize, resolution as usize, radius) {
        Ok(g) => g,
        Err(e) => return fail_of(e),
    };
    let e = BlowupProfile::direction_from_angle(dim as usize, angle_rad);
    let profile = match BlowupProfile::new(lambda, e, dim as usize) {
        Ok(p) => p,
        Err(e) => return fail_of(e),
    };
    boxed(profile.sample(grid), out)
}

/// Sample an even harmonic 2m-homogeneous polynomial given by coefficients
/// over the canonical basis.
///
/// # Safety
/// `coeffs` must point to `coeff_count` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sg_field_poly2m(
    dim: u32,
    resolution: u32,
    radius: f64,
    m: u32,
    coeffs: *const f64,
    coeff_count: usize,
    out: *mut *mut SgField,
) -> SgStatus {
    if out.is_null() || coeffs.is_null() {
        return fail(SgStatus::SgNullPointer, "null pointer");
    }
    let grid = match Grid::new(dim as usize, resolution as usize, radius) {
        Ok(g) => g,
        Err(e) => return fail_of(e),
    };
    let coeffs = std::slice::from_raw_parts(coeffs, coeff_count).to_vec();
    let poly = match Poly2m::new(dim as usize, m as usize, coeffs) {
        Ok(p) => p,
        Err(e) => return fail_of(e),
    };
    boxed(poly.sample(grid), out)
}

/// Read a field from the flat binary format.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sg_field_read(path: *const c_char, out: *mut *mut SgField) -> SgStatus {
    if path.is_null() || out.is_null() {
        return fail(SgStatus::SgNullPointer, "null pointer");
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(s) => s,
        Err(_) => return fail(SgStatus::SgInvalidArgument, "path is not valid UTF-8"),
    };
    match signorini::io::read_field(std::path::Path::new(path)) {
        Ok(f) => boxed(f, out),
        Err(e) => fail_of(e),
    }
}

/// Write a field in the flat binary format (with its JSON sidecar).
///
/// # Safety
/// `field` must be a live handle, `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sg_field_write(field: *const SgField, path: *const c_char) -> SgStatus {
    if field.is_null() || path.is_null() {
        return fail(SgStatus::SgNullPointer, "null pointer");
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(s) => s,
        Err(_) => return fail(SgStatus::SgInvalidArgument, "path is not valid UTF-8"),
    };
    match signorini::io::write_field(std::path::Path::new(path), &(*field).inner) {
        Ok(()) => SgStatus::SgOk,
        Err(e) => fail_of(e),
    }
}

/// Release a field handle.
///
/// # Safety
/// `field` must be a handle from this library or null (ignored).
#[no_mangle]
pub unsafe extern "C" fn sg_field_free(field: *mut SgField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Grid metadata of a field.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sg_field_info(
    field: *const SgField,
    dim: *mut u32,
    resolution: *mut u32,
    radius: *mut f64,
) -> SgStatus {
    if field.is_null() || dim.is_null() || resolution.is_null() || radius.is_null() {
        return fail(SgStatus::SgNullPointer, "null pointer");
    }
    let g = (*field).inner.grid();
    *dim = g.dim() as u32;
    *resolution = g.resolution() as u32;
    *radius = g.radius();
    SgStatus::SgOk
}

/// Multilinear interpolation at a point (3 doubles; trailing entries of
/// lower-dimensional points are ignored).
///
/// # Safety
/// `point` must hold 3 doubles; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sg_field_eval(
    field: *const SgField,
    point: *const f64,
    out: *mut f64,
) -> SgStatus {
    let (Some(p), false, false) = (point3(point), field.is_null(), out.is_null()) else {
        return fail(SgStatus::SgNullPointer, "null pointer");
    };
    match (*field).inner.try_interp(p) {
        Ok(v) => {
            *out = v;
            SgStatus::SgOk
        }
        Err(e) => fail_of(e),
    }
}

/// Solve the thin obstacle problem with the handle's samples as the datum.
/// `tol`, `omega` and `max_iters` at zero select the defaults.
///
/// # Safety
/// `datum` must be a live handle; `solution` and `report` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sg_solve(
    datum: *const SgField,
    tol: f64,
    omega: f64,
    max_iters: u64,
    solution: *mut *mut SgField,
    report: *mut SgSolveReport,
) -> SgStatus {
    if datum.is_null() || solution.is_null() || report.is_null() {
        return fail(SgStatus::SgNullPointer, "null pointer");
    }
    let mut opts = SolverOptions::default();
    if tol > 0.0 {
        opts.tol = tol;
    }
    if omega > 0.0 {
        opts.omega = omega;
    }
    opts.max_iters = max_iters as usize;
    let problem = match SignoriniProblem::new((*datum).inner.clone()) {
        Ok(p) => p,
        Err(e) => return fail_of(e),
    };
    match solve(&problem, &opts) {
        Ok(sol) => {
            *report = SgSolveReport {
                iterations: sol.iterations as u64,
                final_update: sol.final_update,
                converged: sol.converged,
                complementarity: sol.complementarity.max_product,
            };
            boxed(sol.field, solution)
        }
        Err(e) => fail_of(e),
    }
}

/// D(r) = ∫_{B_r(center)} |∇u|^2.
///
/// # Safety
/// `center` must hold 3 doubles; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sg_dirichlet_energy(
    field: *const SgField,
    center: *const f64,
    r: f64,
    out: *mut f64,
) -> SgStatus {
    let (Some(c), false, false) = (point3(center), field.is_null(), out.is_null()) else {
        return fail(SgStatus::SgNullPointer, "null pointer");
    };
    match dirichlet_energy(&(*field).inner, c, r) {
        Ok(v) => {
            *out = v;
            SgStatus::SgOk
        }
        Err(e) => fail_of(e),
    }
}

/// H(r) = ∫_{∂B_r(center)} u^2.
///
/// # Safety
/// As for [`sg_dirichlet_energy`].
#[no_mangle]
pub unsafe extern "C" fn sg_boundary_mass(
    field: *const SgField,
    center: *const f64,
    r: f64,
    out: *mut f64,
) -> SgStatus {
    let (Some(c), false, false) = (point3(center), field.is_null(), out.is_null()) else {
        return fail(SgStatus::SgNullPointer, "null pointer");
    };
    match boundary_mass(&(*field).inner, c, r) {
        Ok(v) => {
            *out = v;
            SgStatus::SgOk
        }
        Err(e) => fail_of(e),
    }
}

/// Almgren frequency N(r) = r D(r) / H(r).
///
/// # Safety
/// As for [`sg_dirichlet_energy`].
#[no_mangle]
pub unsafe extern "C" fn sg_frequency(
    field: *const SgField,
    center: *const f64,
    r: f64,
    out: *mut f64,
) -> SgStatus {
    let (Some(c), false, false) = (point3(center), field.is_null(), out.is_null()) else {
        return fail(SgStatus::SgNullPointer, "null pointer");
    };
    let u = &(*field).inner;
    match (dirichlet_energy(u, c, r), boundary_mass(u, c, r)) {
        (Ok(d), Ok(h)) if h > 1e-14 => {
            *out = r * d / h;
            SgStatus::SgOk
        }
        (Ok(_), Ok(_)) => fail(SgStatus::SgNumericsError, "vanishing trace: N undefined"),
        (Err(e), _) | (_, Err(e)) => fail_of(e),
    }
}

/// Weiss boundary adjusted energy W_lambda(r).
///
/// # Safety
/// As for [`sg_dirichlet_energy`].
#[no_mangle]
pub unsafe extern "C" fn sg_weiss_energy(
    field: *const SgField,
    center: *const f64,
    r: f64,
    lambda: f64,
    out: *mut f64,
) -> SgStatus {
    let (Some(c), false, false) = (point3(center), field.is_null(), out.is_null()) else {
        return fail(SgStatus::SgNullPointer, "null pointer");
    };
    match weiss_energy(&(*field).inner, c, r, lambda) {
        Ok(v) => {
            *out = v;
            SgStatus::SgOk
        }
        Err(e) => fail_of(e),
    }
}

/// H1 projection onto the 3/2 blowup cone: amplitude, direction (3 doubles)
/// and distance.
///
/// # Safety
/// `direction` must hold 3 doubles; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sg_cone_fit(
    field: *const SgField,
    lambda: *mut f64,
    direction: *mut f64,
    dist: *mut f64,
) -> SgStatus {
    if field.is_null() || lambda.is_null() || direction.is_null() || dist.is_null() {
        return fail(SgStatus::SgNullPointer, "null pointer");
    }
    match dist_to_cone32(&(*field).inner) {
        Ok(fit) => {
            *lambda = fit.lambda;
            for a in 0..3 {
                *direction.add(a) = fit.e[a];
            }
            *dist = fit.dist;
            SgStatus::SgOk
        }
        Err(e) => fail_of(e),
    }
}

/// Epiperimetric gain of a homogeneous datum at the given homogeneity.
///
/// # Safety
/// `datum` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sg_epi_gain(
    datum: *const SgField,
    lambda_hom: f64,
    out: *mut SgEpiGain,
) -> SgStatus {
    if datum.is_null() || out.is_null() {
        return fail(SgStatus::SgNullPointer, "null pointer");
    }
    match epi_gain(&(*datum).inner, lambda_hom, &SolverOptions::default()) {
        Ok(g) => {
            *out = SgEpiGain {
                g_c: g.g_c,
                g_v: g.g_v,
                kappa: g.kappa.unwrap_or(f64::NAN),
                has_kappa: g.kappa.is_some(),
                cone_like: g.cone_like,
                solver_converged: g.solver_converged,
            };
            SgStatus::SgOk
        }
        Err(e) => fail_of(e),
    }
}

/// Contact-set size and free boundary point count of a solved field.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sg_free_boundary_counts(
    field: *const SgField,
    zero_tol: f64,
    contact_nodes: *mut u64,
    boundary_points: *mut u64,
) -> SgStatus {
    if field.is_null() || contact_nodes.is_null() || boundary_points.is_null() {
        return fail(SgStatus::SgNullPointer, "null pointer");
    }
    let u = &(*field).inner;
    let tol = if zero_tol > 0.0 { zero_tol } else { signorini::free_boundary::DEFAULT_ZERO_TOL };
    let mask = signorini::free_boundary::coincidence_set(u, tol);
    let pts = signorini::free_boundary::free_boundary_points(u, &mask, tol);
    *contact_nodes = mask.count() as u64;
    *boundary_points = pts.len() as u64;
    SgStatus::SgOk
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cone_solve_roundtrip_through_the_abi() {
        unsafe {
            let mut field: *mut SgField = std::ptr::null_mut();
            let status = sg_field_cone(2, 65, 1.0, 1.0, 0.0, &mut field);
            assert!(status == SgStatus::SgOk);

            let (mut dim, mut res, mut radius) = (0u32, 0u32, 0f64);
            assert!(sg_field_info(field, &mut dim, &mut res, &mut radius) == SgStatus::SgOk);
            assert_eq!((dim, res), (2, 65));

            let mut sol: *mut SgField = std::ptr::null_mut();
            let mut report = SgSolveReport {
                iterations: 0,
                final_update: 0.0,
                converged: false,
                complementarity: 0.0,
            };
            assert!(sg_solve(field, 0.0, 0.0, 0, &mut sol, &mut report) == SgStatus::SgOk);
            assert!(report.converged);
            assert!(report.complementarity < 1e-6);

            let center = [0.0f64, 0.0, 0.0];
            let mut n = 0.0f64;
            assert!(sg_frequency(sol, center.as_ptr(), 0.5, &mut n) == SgStatus::SgOk);
            assert!((n - 1.5).abs() < 2e-2, "N = {n}");

            let mut lambda = 0.0;
            let mut e = [0.0f64; 3];
            let mut dist = 0.0;
            assert!(sg_cone_fit(sol, &mut lambda, e.as_mut_ptr(), &mut dist) == SgStatus::SgOk);
            assert!((lambda - 1.0).abs() < 5e-2);
            assert_eq!(e[0], 1.0);

            sg_field_free(sol);
            sg_field_free(field);
        }
    }

    #[test]
    fn errors_set_message_and_status() {
        unsafe {
            let mut field: *mut SgField = std::ptr::null_mut();
            let status = sg_field_cone(2, 64, 1.0, 1.0, 0.0, &mut field); // even resolution
            assert!(status == SgStatus::SgInvalidArgument);
            let msg = CStr::from_ptr(sg_last_error_message());
            assert!(msg.to_str().unwrap().contains("odd"));
            assert!(sg_field_eval(std::ptr::null(), std::ptr::null(), std::ptr::null_mut())
                == SgStatus::SgNullPointer);
        }
    }

    #[test]
    fn generated_header_covers_the_surface() {
        let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("include")
            .join("signorini.h");
        let text = std::fs::read_to_string(header).expect("header generated by build.rs");
        for symbol in [
            "sg_field_cone",
            "sg_field_poly2m",
            "sg_field_read",
            "sg_field_write",
            "sg_field_free",
            "sg_field_info",
            "sg_field_eval",
            "sg_solve",
            "sg_dirichlet_energy",
            "sg_boundary_mass",
            "sg_frequency",
            "sg_weiss_energy",
            "sg_cone_fit",
            "sg_epi_gain",
            "sg_free_boundary_counts",
            "sg_last_error_message",
            "typedef struct SgField SgField",
        ] {
            assert!(text.contains(symbol), "header lacks `{symbol}`");
        }
    }
}
