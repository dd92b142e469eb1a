//! C interface to the `shapeopt` library.
//!
//! Objects are opaque handles created by `*_new`/`*_load` functions and
//! released with the matching `*_free`. Every fallible function returns a
//! [`ShapeoptStatus`]; on failure a message is kept per thread and can be
//! read with [`shapeopt_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use shapeopt::kkt::KKTState;
use shapeopt::mesh::{load_gmsh, TagMap, TriMesh};
use shapeopt::run::{self, Problem};
use shapeopt::solver::{continuation, ContinuationLog};
use shapeopt::{parse_config, Error, RunConfig};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeoptStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Mesh = 4,
    Config = 5,
    Numerical = 6,
    /// The continuation gave up; a result handle is still returned.
    Aborted = 7,
    Panic = 8,
}

/// A loaded reference mesh.
pub struct ShapeoptMesh {
    mesh: TriMesh,
}

/// Configuration plus assembled operators.
pub struct ShapeoptProblem {
    problem: Problem,
}

/// Outcome of an optimization run.
pub struct ShapeoptResult {
    log: ContinuationLog,
    n_vertices: usize,
}

/// One accepted problem of the continuation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShapeoptEntry {
    pub alpha: f64,
    pub newton_iterations: u32,
    pub objective: f64,
    pub dissipation: f64,
    pub volume_defect: f64,
    pub barycenter_defect: [f64; 2],
    pub min_jacobian: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(ShapeoptStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => ShapeoptStatus::Io,
            Error::MeshFormat { .. }
            | Error::UnknownTag(_)
            | Error::MissingTag(_)
            | Error::DesignLoop
            | Error::InvalidMesh(_)
            | Error::DegenerateEdge(_) => ShapeoptStatus::Mesh,
            Error::Config(_) => ShapeoptStatus::Config,
            Error::Dimension(_) => ShapeoptStatus::InvalidArgument,
            Error::ContinuationAborted(_) => ShapeoptStatus::Aborted,
            _ => ShapeoptStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<ShapeoptStatus, Failure>) -> ShapeoptStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => {
            if status == ShapeoptStatus::Ok {
                set_error("");
            }
            status
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ShapeoptStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(ShapeoptStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    Ok(PathBuf::from(str_arg(p, what)?))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            ShapeoptStatus::InvalidArgument,
            format!("{what} is not UTF-8"),
        )
    })
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn shapeopt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread; empty after a success.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn shapeopt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Default configuration as JSON; release with [`shapeopt_string_free`].
#[no_mangle]
pub extern "C" fn shapeopt_default_config_json() -> *mut c_char {
    CString::new(RunConfig::default().to_json())
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn shapeopt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a GMSH file with the default physical tags 1-4 (inflow, outflow,
/// wall, design).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn shapeopt_mesh_load(
    path: *const c_char,
    out: *mut *mut ShapeoptMesh,
) -> ShapeoptStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = path_arg(path, "path")?;
        let mesh = load_gmsh(&path, &TagMap::default())?;
        *out = Box::into_raw(Box::new(ShapeoptMesh { mesh }));
        Ok(ShapeoptStatus::Ok)
    })
}

/// # Safety
/// `mesh` must come from [`shapeopt_mesh_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn shapeopt_mesh_free(mesh: *mut ShapeoptMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// # Safety
/// `mesh` must be a live handle; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn shapeopt_mesh_counts(
    mesh: *const ShapeoptMesh,
    n_vertices: *mut usize,
    n_triangles: *mut usize,
    n_design_edges: *mut usize,
) -> ShapeoptStatus {
    guard(|| {
        let m = &handle(mesh, "mesh")?.mesh;
        for (p, v) in [
            (n_vertices, m.n_vertices()),
            (n_triangles, m.n_triangles()),
            (n_design_edges, m.design_loop().len()),
        ] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(ShapeoptStatus::Ok)
    })
}

/// Builds a problem from a JSON config file (mesh path inside).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn shapeopt_problem_from_file(
    path: *const c_char,
    out: *mut *mut ShapeoptProblem,
) -> ShapeoptStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = parse_config(path_arg(path, "path")?)?;
        let problem = Problem::new(&cfg)?;
        *out = Box::into_raw(Box::new(ShapeoptProblem { problem }));
        Ok(ShapeoptStatus::Ok)
    })
}

/// Builds a problem on an already loaded mesh; the config's `mesh` key is
/// ignored. `config_json` may be null for defaults.
///
/// # Safety
/// `mesh` must be a live handle, `config_json` null or NUL-terminated,
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn shapeopt_problem_new(
    mesh: *const ShapeoptMesh,
    config_json: *const c_char,
    out: *mut *mut ShapeoptProblem,
) -> ShapeoptStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let m = &handle(mesh, "mesh")?.mesh;
        let cfg = if config_json.is_null() {
            RunConfig::default()
        } else {
            RunConfig::from_json(str_arg(config_json, "config_json")?)?
        };
        let problem = Problem::from_mesh(&cfg, m)?;
        *out = Box::into_raw(Box::new(ShapeoptProblem { problem }));
        Ok(ShapeoptStatus::Ok)
    })
}

/// # Safety
/// `problem` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn shapeopt_problem_free(problem: *mut ShapeoptProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Dissipation of the Stokes flow around the undeformed obstacle.
///
/// # Safety
/// `problem` must be a live handle and `dissipation` writable.
#[no_mangle]
pub unsafe extern "C" fn shapeopt_solve_state(
    problem: *const ShapeoptProblem,
    dissipation: *mut f64,
) -> ShapeoptStatus {
    guard(|| {
        let p = &handle(problem, "problem")?.problem;
        let out = out_arg(dissipation, "dissipation")?;
        *out = run::reference_state(p)?.1.dissipation;
        Ok(ShapeoptStatus::Ok)
    })
}

/// Largest relative error between the Jacobian and finite differences of
/// the residual over the fixed direction set.
///
/// # Safety
/// `problem` must be a live handle and `max_rel_error` writable.
#[no_mangle]
pub unsafe extern "C" fn shapeopt_check_derivatives(
    problem: *const ShapeoptProblem,
    max_rel_error: *mut f64,
) -> ShapeoptStatus {
    guard(|| {
        let p = &handle(problem, "problem")?.problem;
        let out = out_arg(max_rel_error, "max_rel_error")?;
        let checks = run::check_derivatives(p)?;
        *out = checks
            .iter()
            .map(|(_, c)| c.max_rel_error)
            .fold(0.0, f64::max);
        Ok(ShapeoptStatus::Ok)
    })
}

/// Runs the continuation. With a non-null `output_dir` the history, Newton
/// log and VTK files are written there. Returns `Aborted` (with `*out`
/// set) when the continuation gives up.
///
/// # Safety
/// `problem` must be a live handle, `output_dir` null or NUL-terminated,
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn shapeopt_optimize(
    problem: *const ShapeoptProblem,
    output_dir: *const c_char,
    out: *mut *mut ShapeoptResult,
) -> ShapeoptStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let p = &handle(problem, "problem")?.problem;
        let log = if output_dir.is_null() {
            continuation(&p.system, &p.config.continuation(), &mut |_, _, _| {})?
        } else {
            let dir = path_arg(output_dir, "output_dir")?;
            run::optimize(p, Path::new(&dir))?.log
        };
        let aborted = log.aborted.clone();
        *out = Box::into_raw(Box::new(ShapeoptResult {
            log,
            n_vertices: p.mesh().n_vertices(),
        }));
        match aborted {
            Some(reason) => Err(Failure(ShapeoptStatus::Aborted, reason)),
            None => Ok(ShapeoptStatus::Ok),
        }
    })
}

/// # Safety
/// `result` must come from [`shapeopt_optimize`] or be null.
#[no_mangle]
pub unsafe extern "C" fn shapeopt_result_free(result: *mut ShapeoptResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of accepted problems; 0 for a null handle.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn shapeopt_result_len(result: *const ShapeoptResult) -> usize {
    result.as_ref().map_or(0, |r| r.log.entries.len())
}

/// # Safety
/// `result` must be a live handle and `entry` writable.
#[no_mangle]
pub unsafe extern "C" fn shapeopt_result_entry(
    result: *const ShapeoptResult,
    index: usize,
    entry: *mut ShapeoptEntry,
) -> ShapeoptStatus {
    guard(|| {
        let r = handle(result, "result")?;
        let out = out_arg(entry, "entry")?;
        let e = r.log.entries.get(index).ok_or_else(|| {
            Failure(
                ShapeoptStatus::InvalidArgument,
                format!(
                    "entry {index} out of range ({} entries)",
                    r.log.entries.len()
                ),
            )
        })?;
        *out = ShapeoptEntry {
            alpha: e.alpha,
            newton_iterations: e.report.iterations as u32,
            objective: e.objective,
            dissipation: e.dissipation,
            volume_defect: e.volume_defect,
            barycenter_defect: e.barycenter_defect,
            min_jacobian: e.min_jacobian,
        };
        Ok(ShapeoptStatus::Ok)
    })
}

/// Copies the final vertex displacements, interleaved `(x, y)`, into
/// `buf`. `*needed` receives the required length (`2 * n_vertices`);
/// a null `buf` only queries it.
///
/// # Safety
/// `result` must be a live handle, `needed` writable, and `buf` null or
/// valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn shapeopt_result_displacement(
    result: *const ShapeoptResult,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> ShapeoptStatus {
    guard(|| {
        let r = handle(result, "result")?;
        let need = out_arg(needed, "needed")?;
        *need = 2 * r.n_vertices;
        if buf.is_null() {
            return Ok(ShapeoptStatus::Ok);
        }
        if len < *need {
            return Err(Failure(
                ShapeoptStatus::InvalidArgument,
                format!("buffer holds {len} values, {} needed", *need),
            ));
        }
        let st: &KKTState = r.log.final_state().ok_or_else(|| {
            Failure(
                ShapeoptStatus::InvalidArgument,
                "no accepted problem".into(),
            )
        })?;
        let out = std::slice::from_raw_parts_mut(buf, *need);
        for i in 0..r.n_vertices {
            let d = st.w.node_value(i);
            out[2 * i] = d[0];
            out[2 * i + 1] = d[1];
        }
        Ok(ShapeoptStatus::Ok)
    })
}
