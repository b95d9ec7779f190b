//! C ABI for `vnrecur`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` and
//! released by the matching `*_free`. Every fallible call returns a
//! [`VnStatus`]; on failure a description is available from
//! [`vn_last_error_message`] on the same thread.
//!
//! Elements are exchanged as packed entries: block after block, each block
//! row-major, real and imaginary parts in separate arrays of length
//! `vn_algebra_dimension`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use num_complex::Complex64;
use vnrecur::algebra::{AlgebraElement, BlockAlgebra};
use vnrecur::classical::{classical_recurrence, ClassicalSystem};
use vnrecur::dynamics::BoundedQuantumSystem;
use vnrecur::matrix::ComplexMatrix;
use vnrecur::recurrence::continuous_scan;
use vnrecur::runner::{env_tolerance, run, RunOptions};
use vnrecur::scenario::{bundled, parse, prepare, ScenarioError};

/// Result codes. The nonzero values 2–4 agree with the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InvariantFailure = 3,
    Io = 4,
    Panic = 5,
}

/// A block algebra `⊕ M_{n_k}` with its weighted trace.
pub struct VnAlgebra {
    inner: BlockAlgebra,
}

/// An element of a [`VnAlgebra`].
pub struct VnElement {
    inner: AlgebraElement,
}

/// A Hamiltonian system on a [`VnAlgebra`].
pub struct VnSystem {
    inner: BoundedQuantumSystem,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: VnStatus, msg: impl Into<String>) -> VnStatus {
    set_error(msg.into());
    status
}

fn from_core(e: vnrecur::Error) -> VnStatus {
    from_scenario(e.into())
}

fn from_scenario(e: ScenarioError) -> VnStatus {
    let status = match e.exit_code() {
        2 => VnStatus::InvalidInput,
        3 => VnStatus::InvariantFailure,
        _ => VnStatus::Io,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning panics into [`VnStatus::Panic`].
fn guard(f: impl FnOnce() -> VnStatus) -> VnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(VnStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(VnStatus::NullPointer, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, VnStatus> {
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(VnStatus::InvalidInput, format!("{what} is not valid UTF-8")))
}

fn boxed<T>(value: T, out: *mut *mut T) -> VnStatus {
    // SAFETY: callers check `out` for null first.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    VnStatus::Ok
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates an algebra with `n_blocks` blocks of sizes `dims`. `weights` may
/// be null for the default weights `n_k² / Σ n_j²`.
///
/// # Safety
/// `dims` (and `weights` unless null) must point to `n_blocks` values; `out`
/// must be a valid place to store the handle.
#[no_mangle]
pub unsafe extern "C" fn vn_algebra_new(
    dims: *const usize,
    weights: *const f64,
    n_blocks: usize,
    out: *mut *mut VnAlgebra,
) -> VnStatus {
    non_null!(dims, out);
    guard(|| {
        let dims = slice::from_raw_parts(dims, n_blocks).to_vec();
        let alg = if weights.is_null() {
            BlockAlgebra::with_default_weights(dims)
        } else {
            BlockAlgebra::new(dims, slice::from_raw_parts(weights, n_blocks).to_vec())
        };
        match alg {
            Ok(inner) => boxed(VnAlgebra { inner }, out),
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `alg` must be null or a handle from [`vn_algebra_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vn_algebra_free(alg: *mut VnAlgebra) {
    if !alg.is_null() {
        drop(Box::from_raw(alg));
    }
}

/// `Σ n_k²`, the number of packed entries of an element; 0 for null.
///
/// # Safety
/// `alg` must be null or a live algebra handle.
#[no_mangle]
pub unsafe extern "C" fn vn_algebra_dimension(alg: *const VnAlgebra) -> usize {
    alg.as_ref().map_or(0, |a| a.inner.dimension())
}

/// Builds an element from packed entries; `im` may be null for a real
/// element.
///
/// # Safety
/// `re` (and `im` unless null) must point to `len` values; `alg` must be a
/// live algebra handle and `out` a valid place to store the handle.
#[no_mangle]
pub unsafe extern "C" fn vn_element_new(
    alg: *const VnAlgebra,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut VnElement,
) -> VnStatus {
    non_null!(alg, re, out);
    guard(|| {
        let alg = &(*alg).inner;
        if len != alg.dimension() {
            return fail(
                VnStatus::InvalidInput,
                format!("{len} entries given, algebra needs {}", alg.dimension()),
            );
        }
        let re = slice::from_raw_parts(re, len);
        let im = (!im.is_null()).then(|| slice::from_raw_parts(im, len));
        let mut offset = 0;
        let mut blocks = Vec::with_capacity(alg.num_blocks());
        for &n in alg.dims() {
            let data = (offset..offset + n * n)
                .map(|i| Complex64::new(re[i], im.map_or(0.0, |v| v[i])))
                .collect();
            offset += n * n;
            match ComplexMatrix::from_vec(n, n, data) {
                Ok(m) => blocks.push(m),
                Err(e) => return from_core(e),
            }
        }
        match alg.element(blocks) {
            Ok(inner) => boxed(VnElement { inner }, out),
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `el` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vn_element_free(el: *mut VnElement) {
    if !el.is_null() {
        drop(Box::from_raw(el));
    }
}

/// Copies the packed entries of `el` into `re` and `im` (each of length
/// `len`, which must equal the algebra dimension).
///
/// # Safety
/// `el` must be a live element handle; `re` and `im` must have room for
/// `len` values.
#[no_mangle]
pub unsafe extern "C" fn vn_element_entries(el: *const VnElement, re: *mut f64, im: *mut f64, len: usize) -> VnStatus {
    non_null!(el, re, im);
    guard(|| {
        let entries: Vec<Complex64> = (*el)
            .inner
            .blocks()
            .iter()
            .flat_map(|b| b.as_slice().to_vec())
            .collect();
        if entries.len() != len {
            return fail(
                VnStatus::InvalidInput,
                format!("buffer of length {len}, element has {} entries", entries.len()),
            );
        }
        let re = slice::from_raw_parts_mut(re, len);
        let im = slice::from_raw_parts_mut(im, len);
        for (i, z) in entries.iter().enumerate() {
            re[i] = z.re;
            im[i] = z.im;
        }
        VnStatus::Ok
    })
}

/// Normalized weighted trace `tr(A)`.
///
/// # Safety
/// `alg` and `el` must be live handles; `re` and `im` valid places to store
/// the result.
#[no_mangle]
pub unsafe extern "C" fn vn_element_trace(
    alg: *const VnAlgebra,
    el: *const VnElement,
    re: *mut f64,
    im: *mut f64,
) -> VnStatus {
    non_null!(alg, el, re, im);
    guard(|| match (*alg).inner.trace(&(*el).inner) {
        Ok(t) => {
            *re = t.re;
            *im = t.im;
            VnStatus::Ok
        }
        Err(e) => from_core(e),
    })
}

/// Hamiltonian system `(𝔐, H)`; `H` must be Hermitian.
///
/// # Safety
/// `alg` and `hamiltonian` must be live handles and `out` a valid place to
/// store the handle.
#[no_mangle]
pub unsafe extern "C" fn vn_system_new(
    alg: *const VnAlgebra,
    hamiltonian: *const VnElement,
    out: *mut *mut VnSystem,
) -> VnStatus {
    non_null!(alg, hamiltonian, out);
    guard(|| {
        let alg = &(*alg).inner;
        if let Err(e) = alg.check(&(*hamiltonian).inner) {
            return from_core(e);
        }
        match BoundedQuantumSystem::new(alg.clone(), (*hamiltonian).inner.clone()) {
            Ok(inner) => boxed(VnSystem { inner }, out),
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `sys` must be null or a handle from [`vn_system_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vn_system_free(sys: *mut VnSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// `τ_t(A) = U_t* A U_t` as a new element.
///
/// # Safety
/// `sys` and `el` must be live handles and `out` a valid place to store the
/// handle.
#[no_mangle]
pub unsafe extern "C" fn vn_system_evolve(
    sys: *const VnSystem,
    t: f64,
    el: *const VnElement,
    out: *mut *mut VnElement,
) -> VnStatus {
    non_null!(sys, el, out);
    guard(|| match (*sys).inner.evolve(t, &(*el).inner) {
        Ok(inner) => boxed(VnElement { inner }, out),
        Err(e) => from_core(e),
    })
}

/// Samples `tr(P τ_t(P))` at the `n` times in `t_grid` into `values`.
/// The algebra must be a factor and `p` a projection.
///
/// # Safety
/// `sys` and `p` must be live handles; `t_grid` and `values` must hold `n`
/// values.
#[no_mangle]
pub unsafe extern "C" fn vn_continuous_scan(
    sys: *const VnSystem,
    p: *const VnElement,
    t_grid: *const f64,
    n: usize,
    values: *mut f64,
) -> VnStatus {
    non_null!(sys, p, t_grid, values);
    guard(|| {
        let grid = slice::from_raw_parts(t_grid, n);
        match continuous_scan(&(*sys).inner, &(*p).inner, grid) {
            Ok(scan) => {
                let out = slice::from_raw_parts_mut(values, n);
                for (o, (_, c)) in out.iter_mut().zip(&scan.samples) {
                    *o = *c;
                }
                VnStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Overlaps `μ(S ∩ T⁻ⁿ(S))` for `n = 1..=n_max` of a measure-preserving map
/// on `m` points. `first` receives the least `n` with a positive overlap,
/// or 0 when there is none in range.
///
/// # Safety
/// `weights` and `map` must hold `m` values, `subset` `subset_len` values,
/// `overlaps` room for `n_max` values; `first` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vn_classical_recurrence(
    weights: *const f64,
    map: *const usize,
    m: usize,
    subset: *const usize,
    subset_len: usize,
    n_max: usize,
    overlaps: *mut f64,
    first: *mut usize,
) -> VnStatus {
    non_null!(weights, map, overlaps, first);
    if subset.is_null() && subset_len > 0 {
        return fail(VnStatus::NullPointer, "`subset` is null");
    }
    guard(|| {
        let sys = match ClassicalSystem::new(
            slice::from_raw_parts(weights, m).to_vec(),
            slice::from_raw_parts(map, m).to_vec(),
        ) {
            Ok(s) => s,
            Err(e) => return from_core(e),
        };
        let indices = if subset_len == 0 {
            &[][..]
        } else {
            slice::from_raw_parts(subset, subset_len)
        };
        let rec = match sys.subset(indices).and_then(|s| classical_recurrence(&sys, &s, n_max)) {
            Ok(r) => r,
            Err(e) => return from_core(e),
        };
        slice::from_raw_parts_mut(overlaps, n_max).copy_from_slice(&rec.overlaps);
        *first = rec.first_n.unwrap_or(0);
        VnStatus::Ok
    })
}

/// Runs a scenario file, or a bundled scenario by name, writing its outputs
/// to `out_dir`. `tol ≤ 0` selects `VNRECUR_TOL` or the built-in default.
///
/// # Safety
/// `scenario` and `out_dir` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn vn_scenario_run(scenario: *const c_char, out_dir: *const c_char, tol: f64) -> VnStatus {
    non_null!(scenario, out_dir);
    guard(|| {
        let source = match str_arg(scenario, "scenario") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let out = match str_arg(out_dir, "out_dir") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let result = (|| {
            let text = if Path::new(source).exists() {
                std::fs::read_to_string(source).map_err(|e| ScenarioError::Io(format!("{source}: {e}")))?
            } else {
                bundled(source)
                    .map(str::to_owned)
                    .ok_or_else(|| ScenarioError::Io(format!("{source}: no such file or bundled scenario")))?
            };
            let tol = if tol > 0.0 { tol } else { env_tolerance()? };
            let prepared = prepare(parse(&text)?)?;
            run(
                &prepared,
                Path::new(out),
                &RunOptions {
                    tol,
                    ..RunOptions::default()
                },
            )
        })();
        match result {
            Ok(_) => VnStatus::Ok,
            Err(e) => from_scenario(e),
        }
    })
}
