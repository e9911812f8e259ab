//! C ABI over `recurlab`.
//!
//! Every fallible function returns an [`RlStatus`] and writes its result
//! through an out pointer. On failure the message is kept per thread and
//! read with [`rl_last_error_message`]. Handles are opaque and owned by the
//! caller until passed to the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use recurlab::grid::discretize;
use recurlab::{
    build_cover, hitting_score, iterate, recurrence_score, towerize, Error, GridPermutation, GridSpec, Horizon,
    Observable, Point, RateSequence, Space, SystemMap,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SpaceMismatch = 3,
    /// Parameters below what the grid can resolve.
    Infeasible = 4,
    Io = 5,
    GuaranteeViolated = 6,
    Panic = 7,
}

/// A measure-preserving map.
pub struct RlSystem(SystemMap);

/// A bijection of the cells of a dyadic grid.
pub struct RlPermutation(GridPermutation);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RlStatus {
    match e {
        Error::SpaceMismatch { .. } | Error::DimensionMismatch { .. } | Error::CoverMismatch => RlStatus::SpaceMismatch,
        Error::DeltaTooSmall { .. } | Error::GridTooLarge { .. } => RlStatus::Infeasible,
        Error::GuaranteeViolated(_) => RlStatus::GuaranteeViolated,
        Error::Io(_) | Error::BadFormat(_) => RlStatus::Io,
        _ => RlStatus::InvalidArgument,
    }
}

struct Fail(RlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RlStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> RlStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => RlStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {message}"));
            RlStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or valid for reads of `len` values.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or point to a live handle.
unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

/// # Safety
/// `out` must be null or valid for one write.
unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Identity map on the `dim`-torus.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rl_system_identity(dim: usize, out: *mut *mut RlSystem) -> RlStatus {
    guard(|| {
        if dim == 0 {
            return Err(Fail(RlStatus::InvalidArgument, "dim must be positive".into()));
        }
        put(out, boxed(RlSystem(SystemMap::identity(Space::torus(dim)))), "out")
    })
}

/// Rotation `x -> x + alpha` on the `dim`-torus.
///
/// # Safety
/// `alpha` must hold `dim` values and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rl_system_rotation(alpha: *const f64, dim: usize, out: *mut *mut RlSystem) -> RlStatus {
    guard(|| {
        let alpha = slice(alpha, dim, "alpha")?;
        put(out, boxed(RlSystem(SystemMap::rotation(alpha.to_vec())?)), "out")
    })
}

/// Toral automorphism with the row-major `dim x dim` integer matrix.
///
/// # Safety
/// `matrix` must hold `dim * dim` values and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rl_system_automorphism(matrix: *const i64, dim: usize, out: *mut *mut RlSystem) -> RlStatus {
    guard(|| {
        let flat = slice(matrix, dim.checked_mul(dim).unwrap_or(0), "matrix")?;
        let rows: Vec<Vec<i64>> = flat.chunks(dim.max(1)).map(<[i64]>::to_vec).collect();
        put(out, boxed(RlSystem(SystemMap::toral_automorphism(&rows)?)), "out")
    })
}

/// The cat map `[[2, 1], [1, 1]]` on the 2-torus.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rl_system_cat(out: *mut *mut RlSystem) -> RlStatus {
    guard(|| put(out, boxed(RlSystem(SystemMap::cat_map())), "out"))
}

/// The map acting on cell centers by `perm`. The permutation is copied.
///
/// # Safety
/// `perm` must be a live handle and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rl_system_from_permutation(perm: *const RlPermutation, out: *mut *mut RlSystem) -> RlStatus {
    guard(|| {
        let perm = handle(perm, "perm")?;
        put(out, boxed(RlSystem(SystemMap::grid(perm.0.clone()))), "out")
    })
}

/// # Safety
/// `sys` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_system_free(sys: *mut RlSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Dimension of the state space, or 0 for a null handle.
///
/// # Safety
/// `sys` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rl_system_dim(sys: *const RlSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.0.space().dim())
}

/// Writes `T^n x` into `out`.
///
/// # Safety
/// `x` and `out` must each hold `dim` values.
#[no_mangle]
pub unsafe extern "C" fn rl_iterate(sys: *const RlSystem, x: *const f64, dim: usize, n: u64, out: *mut f64) -> RlStatus {
    guard(|| {
        let sys = handle(sys, "sys")?;
        let x = Point::new(sys.0.space(), slice(x, dim, "x")?.to_vec())?;
        if out.is_null() {
            return Err(null("out"));
        }
        let y = iterate(&sys.0, &x, n)?;
        ptr::copy_nonoverlapping(y.coords().as_ptr(), out, dim);
        Ok(())
    })
}

fn horizon(start: u64, end: u64) -> Result<Horizon, Fail> {
    Ok(Horizon::new(start, end)?)
}

/// `min_{start <= n <= end} n^beta d(T^n x, x)` with `f = Id`.
///
/// # Safety
/// `x` must hold `dim` values and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rl_recurrence_score(
    sys: *const RlSystem,
    x: *const f64,
    dim: usize,
    beta: f64,
    start: u64,
    end: u64,
    out: *mut f64,
) -> RlStatus {
    guard(|| {
        let sys = handle(sys, "sys")?;
        let x = Point::new(sys.0.space(), slice(x, dim, "x")?.to_vec())?;
        let rate = RateSequence::power(beta)?;
        let s = recurrence_score(&sys.0, &Observable::Identity, &rate, &x, horizon(start, end)?)?;
        put(out, s, "out")
    })
}

/// `min_{start <= n <= end} n^beta d(T^n x, y)` with `f = Id`.
///
/// # Safety
/// `x` and `y` must hold `dim` values and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rl_hitting_score(
    sys: *const RlSystem,
    x: *const f64,
    y: *const f64,
    dim: usize,
    beta: f64,
    start: u64,
    end: u64,
    out: *mut f64,
) -> RlStatus {
    guard(|| {
        let sys = handle(sys, "sys")?;
        let space = sys.0.space();
        let x = Point::new(space, slice(x, dim, "x")?.to_vec())?;
        let y = Point::new(space, slice(y, dim, "y")?.to_vec())?;
        let rate = RateSequence::power(beta)?;
        let s = hitting_score(&sys.0, &Observable::Identity, &rate, &x, &y, horizon(start, end)?)?;
        put(out, s, "out")
    })
}

/// Nearest bijection of the level-`level` grid to `sys`.
///
/// # Safety
/// `sys` must be a live handle and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rl_discretize(sys: *const RlSystem, level: u32, out: *mut *mut RlPermutation) -> RlStatus {
    guard(|| {
        let sys = handle(sys, "sys")?;
        let grid = GridSpec::new(sys.0.space(), level)?;
        put(out, boxed(RlPermutation(discretize(&sys.0, grid)?)), "out")
    })
}

/// Number of cells.
///
/// # Safety
/// `perm` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rl_permutation_len(perm: *const RlPermutation) -> usize {
    perm.as_ref().map_or(0, |p| p.0.len())
}

/// Copies the forward cell array into `out`, which holds `len` entries.
///
/// # Safety
/// `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn rl_permutation_forward(perm: *const RlPermutation, out: *mut u32, len: usize) -> RlStatus {
    guard(|| {
        let perm = handle(perm, "perm")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if len != perm.0.len() {
            return Err(Fail(
                RlStatus::InvalidArgument,
                format!("buffer holds {len} entries, permutation has {}", perm.0.len()),
            ));
        }
        ptr::copy_nonoverlapping(perm.0.forward().as_ptr(), out, len);
        Ok(())
    })
}

/// Fraction of cells whose cycle length is at most `period`.
///
/// # Safety
/// `perm` must be a live handle and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rl_period_fraction(perm: *const RlPermutation, period: u64, out: *mut f64) -> RlStatus {
    guard(|| {
        let perm = handle(perm, "perm")?;
        put(out, perm.0.cycle_decomposition().fraction(period), "out")
    })
}

/// Tower redirect of `perm` at scale `delta`. Writes the new permutation
/// and its sup displacement from `perm`; `max_displacement` may be null.
///
/// # Safety
/// `perm` must be a live handle and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rl_towerize(
    perm: *const RlPermutation,
    delta: f64,
    epsilon: f64,
    out: *mut *mut RlPermutation,
    max_displacement: *mut f64,
) -> RlStatus {
    guard(|| {
        let perm = handle(perm, "perm")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cover = build_cover(*perm.0.grid(), delta, epsilon)?;
        let report = towerize(&perm.0, &cover)?;
        if !max_displacement.is_null() {
            max_displacement.write(report.max_displacement);
        }
        out.write(boxed(RlPermutation(report.permutation)));
        Ok(())
    })
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RlStatus::InvalidArgument, "path is not UTF-8".into()))
}

/// Reads a GPRM file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rl_permutation_load(path_c: *const c_char, out: *mut *mut RlPermutation) -> RlStatus {
    guard(|| {
        let file = File::open(path(path_c)?).map_err(Error::from)?;
        let perm = GridPermutation::read_from(BufReader::new(file))?;
        put(out, boxed(RlPermutation(perm)), "out")
    })
}

/// Writes a GPRM file.
///
/// # Safety
/// `perm` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rl_permutation_save(perm: *const RlPermutation, path_c: *const c_char) -> RlStatus {
    guard(|| {
        let perm = handle(perm, "perm")?;
        let file = File::create(path(path_c)?).map_err(Error::from)?;
        perm.0.write_to(BufWriter::new(file))?;
        Ok(())
    })
}

/// # Safety
/// `perm` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_permutation_free(perm: *mut RlPermutation) {
    if !perm.is_null() {
        drop(Box::from_raw(perm));
    }
}
