//! C ABI for the nexfam library.
//!
//! Objects cross the boundary as opaque handles created by `*_new` /
//! `*_load` / `*_solve` and released with the matching `*_free`. Every
//! fallible call returns a status code; on failure a message describing the
//! error is available from `nexfam_last_error` on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nexfam::bundle::Bundle;
use nexfam::family::{AnyModel, GaussianLinearModel, LogisticModel};
use nexfam::graph::{spectral_gap, EmpiricalGraph};
use nexfam::signal::NodeSignal;
use nexfam::solver::{objective, solve, PrimalUpdate, SolveResult, SolverConfig};
use nexfam::training::TrainingSet;
use nexfam::Error;

/// Return code of every fallible call; zero means success.
pub type NexfamStatus = i32;

pub const NEXFAM_OK: NexfamStatus = 0;
/// A required pointer argument was null.
pub const NEXFAM_ERR_NULL_POINTER: NexfamStatus = 1;
/// Bad argument values, shapes or configuration.
pub const NEXFAM_ERR_INVALID_ARGUMENT: NexfamStatus = 2;
/// The graph is not connected.
pub const NEXFAM_ERR_DISCONNECTED: NexfamStatus = 3;
/// The solver failed numerically (non-finite iterate, step-size or contraction violation).
pub const NEXFAM_ERR_NUMERICAL: NexfamStatus = 4;
/// A file could not be read or parsed.
pub const NEXFAM_ERR_IO: NexfamStatus = 5;
/// The caller's output buffer is shorter than the result.
pub const NEXFAM_ERR_BUFFER_TOO_SMALL: NexfamStatus = 6;
/// A Rust panic was caught at the boundary; the handle arguments should be considered lost.
pub const NEXFAM_ERR_PANIC: NexfamStatus = 7;

/// Primal update: contraction iteration to the scheduled accuracy.
pub const NEXFAM_PRIMAL_FIXED_POINT: c_int = 0;
/// Primal update: a single Newton step.
pub const NEXFAM_PRIMAL_NEWTON_STEP: c_int = 1;
/// Primal update: exact minimizer, quadratic models only.
pub const NEXFAM_PRIMAL_CLOSED_FORM: c_int = 2;

/// Undirected weighted graph.
pub struct NexfamGraph(EmpiricalGraph);

/// Per-node likelihood (Gaussian or logistic).
pub struct NexfamModel(AnyModel);

/// Graph, model and training set loaded from a bundle directory.
pub struct NexfamBundle(Bundle);

/// Output of one primal-dual solve.
pub struct NexfamSolution {
    result: SolveResult,
    objective: f64,
}

/// Solver settings; obtain defaults from `nexfam_solver_options_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NexfamSolverOptions {
    pub lambda: f64,
    /// Primal step scale in (0, 1).
    pub tau: f64,
    pub max_iterations: usize,
    /// Relative-change stopping threshold; zero or negative disables it.
    pub tolerance: f64,
    /// One of the `NEXFAM_PRIMAL_*` constants.
    pub primal_update: c_int,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

enum Failure {
    Null(&'static str),
    Lib(Error),
    Buffer { need: usize, got: usize },
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn status(&self) -> NexfamStatus {
        match self {
            Failure::Null(_) => NEXFAM_ERR_NULL_POINTER,
            Failure::Buffer { .. } => NEXFAM_ERR_BUFFER_TOO_SMALL,
            Failure::Invalid(_) => NEXFAM_ERR_INVALID_ARGUMENT,
            Failure::Lib(e) => match e {
                Error::Disconnected { .. } => NEXFAM_ERR_DISCONNECTED,
                Error::ContractionViolated { .. }
                | Error::StepSize { .. }
                | Error::NonFinite { .. }
                | Error::Singular(_) => NEXFAM_ERR_NUMERICAL,
                Error::Io { .. } | Error::Parse { .. } | Error::Json { .. } => NEXFAM_ERR_IO,
                _ => NEXFAM_ERR_INVALID_ARGUMENT,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Null(what) => format!("null pointer passed for {what}"),
            Failure::Lib(e) => e.to_string(),
            Failure::Buffer { need, got } => format!("output buffer holds {got} values, {need} needed"),
            Failure::Invalid(msg) => msg.clone(),
        }
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NexfamStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NEXFAM_OK,
        Ok(Err(fail)) => {
            set_last_error(&fail.message());
            fail.status()
        }
        Err(_) => {
            set_last_error("internal panic in nexfam");
            NEXFAM_ERR_PANIC
        }
    }
}

/// Borrows `len` elements at `p`; a null pointer is allowed only when `len` is 0.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the most recent failure on the calling thread, or null if none.
/// The string stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn nexfam_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nexfam_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Defaults: `lambda = 1`, `tau = 0.9`, 1000 iterations, no tolerance, fixed-point updates.
#[no_mangle]
pub extern "C" fn nexfam_solver_options_default() -> NexfamSolverOptions {
    let d = SolverConfig::default();
    NexfamSolverOptions {
        lambda: d.lambda,
        tau: d.tau,
        max_iterations: d.max_iterations,
        tolerance: 0.0,
        primal_update: NEXFAM_PRIMAL_FIXED_POINT,
    }
}

/// Builds a graph on nodes `0..node_count` from `edge_count` edges
/// `(low[k], high[k], weight[k])`.
///
/// # Safety
/// `low`, `high` and `weight` must each point to `edge_count` readable values;
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn nexfam_graph_new(
    node_count: usize,
    low: *const usize,
    high: *const usize,
    weight: *const f64,
    edge_count: usize,
    out: *mut *mut NexfamGraph,
) -> NexfamStatus {
    guard(|| {
        let lo = slice(low, edge_count, "low")?;
        let hi = slice(high, edge_count, "high")?;
        let w = slice(weight, edge_count, "weight")?;
        let edges: Vec<(usize, usize, f64)> = (0..edge_count).map(|k| (lo[k], hi[k], w[k])).collect();
        store(out, NexfamGraph(EmpiricalGraph::new(node_count, &edges)?))
    })
}

/// # Safety
/// `graph` must be null or a handle from `nexfam_graph_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nexfam_graph_free(graph: *mut NexfamGraph) {
    free(graph);
}

/// # Safety
/// `graph` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nexfam_graph_counts(
    graph: *const NexfamGraph,
    nodes: *mut usize,
    edges: *mut usize,
) -> NexfamStatus {
    guard(|| {
        let g = &borrow(graph, "graph")?.0;
        if nodes.is_null() || edges.is_null() {
            return Err(Failure::Null("nodes/edges"));
        }
        *nodes = g.node_count();
        *edges = g.edge_count();
        Ok(())
    })
}

/// Total variation of the signal `w` (row-major `node_count x dim`).
///
/// # Safety
/// `graph` must be a live handle, `w` must hold `node_count * dim` values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn nexfam_graph_tv_norm(
    graph: *const NexfamGraph,
    w: *const f64,
    dim: usize,
    out: *mut f64,
) -> NexfamStatus {
    guard(|| {
        let g = &borrow(graph, "graph")?.0;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let data = slice(w, g.node_count() * dim, "w")?;
        let signal = NodeSignal::from_flat(dim, data.to_vec())?;
        *out = g.tv_norm(&signal, None)?;
        Ok(())
    })
}

/// Smallest nonzero Laplacian eigenvalue.
///
/// # Safety
/// `graph` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nexfam_graph_spectral_gap(graph: *const NexfamGraph, out: *mut f64) -> NexfamStatus {
    guard(|| {
        let g = &borrow(graph, "graph")?.0;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = spectral_gap(g)?;
        Ok(())
    })
}

/// Gaussian linear model. `features` is row-major `node_count x dim`;
/// a NaN label marks an unobserved node; `variances` may be null (all ones).
///
/// # Safety
/// `features` must hold `node_count * dim` values, `labels` `node_count` values,
/// `variances` null or `node_count` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nexfam_gaussian_model_new(
    node_count: usize,
    dim: usize,
    features: *const f64,
    labels: *const f64,
    variances: *const f64,
    out: *mut *mut NexfamModel,
) -> NexfamStatus {
    guard(|| {
        let x = slice(features, node_count * dim, "features")?.to_vec();
        let y = slice(labels, node_count, "labels")?.to_vec();
        let s = if variances.is_null() {
            None
        } else {
            Some(slice(variances, node_count, "variances")?.to_vec())
        };
        let model = GaussianLinearModel::new(dim, x, y, s)?;
        store(out, NexfamModel(AnyModel::Gaussian(model)))
    })
}

/// Logistic model with labels `+1`, `-1` (or `0` for the negative class); NaN marks unobserved.
///
/// # Safety
/// `features` must hold `node_count * dim` values, `labels` `node_count` values;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nexfam_logistic_model_new(
    node_count: usize,
    dim: usize,
    features: *const f64,
    labels: *const f64,
    out: *mut *mut NexfamModel,
) -> NexfamStatus {
    guard(|| {
        let x = slice(features, node_count * dim, "features")?.to_vec();
        let y = slice(labels, node_count, "labels")?;
        let model = LogisticModel::from_binary_labels(dim, x, y)?;
        store(out, NexfamModel(AnyModel::Logistic(model)))
    })
}

/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn nexfam_model_free(model: *mut NexfamModel) {
    free(model);
}

fn solver_config(opts: &NexfamSolverOptions) -> Result<SolverConfig, Failure> {
    let primal_update = match opts.primal_update {
        NEXFAM_PRIMAL_FIXED_POINT => PrimalUpdate::FixedPoint,
        NEXFAM_PRIMAL_NEWTON_STEP => PrimalUpdate::NewtonStep,
        NEXFAM_PRIMAL_CLOSED_FORM => PrimalUpdate::ClosedForm,
        other => return Err(Failure::Invalid(format!("unknown primal update mode {other}"))),
    };
    Ok(SolverConfig {
        lambda: opts.lambda,
        tau: opts.tau,
        max_iterations: opts.max_iterations,
        tolerance: (opts.tolerance > 0.0).then_some(opts.tolerance),
        primal_update,
        ..SolverConfig::default()
    })
}

fn run_solver(
    g: &EmpiricalGraph,
    model: &AnyModel,
    training: &TrainingSet,
    opts: &NexfamSolverOptions,
) -> Result<NexfamSolution, Failure> {
    let cfg = solver_config(opts)?;
    let result = solve(g, model.as_dyn(), training, &cfg)?;
    let objective = objective(g, model.as_dyn(), training, &result.weights, cfg.lambda)?;
    Ok(NexfamSolution { result, objective })
}

/// Fits the network Lasso with the primal-dual solver. `training` lists the
/// `training_len` labelled node indices.
///
/// # Safety
/// `graph` and `model` must be live handles, `training` must hold
/// `training_len` values, `options` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nexfam_solve(
    graph: *const NexfamGraph,
    model: *const NexfamModel,
    training: *const usize,
    training_len: usize,
    options: *const NexfamSolverOptions,
    out: *mut *mut NexfamSolution,
) -> NexfamStatus {
    guard(|| {
        let g = &borrow(graph, "graph")?.0;
        let m = &borrow(model, "model")?.0;
        let opts = borrow(options, "options")?;
        let nodes = slice(training, training_len, "training")?;
        let train = TrainingSet::new(g.node_count(), nodes.iter().copied())?;
        store(out, run_solver(g, m, &train, opts)?)
    })
}

/// Loads a bundle directory written by `nexfam gen`.
///
/// # Safety
/// `dir` must be a NUL-terminated path and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nexfam_bundle_load(dir: *const c_char, out: *mut *mut NexfamBundle) -> NexfamStatus {
    guard(|| {
        if dir.is_null() {
            return Err(Failure::Null("dir"));
        }
        let path = CStr::from_ptr(dir)
            .to_str()
            .map_err(|_| Failure::Invalid("bundle path is not valid UTF-8".into()))?;
        store(out, NexfamBundle(Bundle::read(Path::new(path))?))
    })
}

/// Node count and signal dimension of a bundle.
///
/// # Safety
/// `bundle` must be a live handle; `nodes` and `dim` writable.
#[no_mangle]
pub unsafe extern "C" fn nexfam_bundle_shape(
    bundle: *const NexfamBundle,
    nodes: *mut usize,
    dim: *mut usize,
) -> NexfamStatus {
    guard(|| {
        let b = &borrow(bundle, "bundle")?.0;
        if nodes.is_null() || dim.is_null() {
            return Err(Failure::Null("nodes/dim"));
        }
        *nodes = b.graph.node_count();
        *dim = b.dim();
        Ok(())
    })
}

/// Fits a loaded bundle with its own training set.
///
/// # Safety
/// `bundle` must be a live handle, `options` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nexfam_bundle_solve(
    bundle: *const NexfamBundle,
    options: *const NexfamSolverOptions,
    out: *mut *mut NexfamSolution,
) -> NexfamStatus {
    guard(|| {
        let b = &borrow(bundle, "bundle")?.0;
        let opts = borrow(options, "options")?;
        store(out, run_solver(&b.graph, &b.model, &b.training, opts)?)
    })
}

/// # Safety
/// `bundle` must be null or a live bundle handle.
#[no_mangle]
pub unsafe extern "C" fn nexfam_bundle_free(bundle: *mut NexfamBundle) {
    free(bundle);
}

/// Copies the fitted weights (row-major `nodes x dim`) into `out`, which
/// must have room for `capacity` values. `written` receives the number needed.
///
/// # Safety
/// `solution` must be a live handle, `out` writable for `capacity` values and `written` writable.
#[no_mangle]
pub unsafe extern "C" fn nexfam_solution_weights(
    solution: *const NexfamSolution,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> NexfamStatus {
    guard(|| {
        let s = borrow(solution, "solution")?;
        let w = s.result.weights.as_slice();
        if written.is_null() {
            return Err(Failure::Null("written"));
        }
        *written = w.len();
        if capacity < w.len() {
            return Err(Failure::Buffer {
                need: w.len(),
                got: capacity,
            });
        }
        if !w.is_empty() {
            if out.is_null() {
                return Err(Failure::Null("out"));
            }
            ptr::copy_nonoverlapping(w.as_ptr(), out, w.len());
        }
        Ok(())
    })
}

/// Iterations run, whether the tolerance stopped the run, and the final objective.
///
/// # Safety
/// `solution` must be a live handle; the three output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn nexfam_solution_summary(
    solution: *const NexfamSolution,
    iterations: *mut usize,
    converged: *mut c_int,
    objective: *mut f64,
) -> NexfamStatus {
    guard(|| {
        let s = borrow(solution, "solution")?;
        if iterations.is_null() || converged.is_null() || objective.is_null() {
            return Err(Failure::Null("iterations/converged/objective"));
        }
        *iterations = s.result.history.len();
        *converged = c_int::from(s.result.converged);
        *objective = s.objective;
        Ok(())
    })
}

/// # Safety
/// `solution` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn nexfam_solution_free(solution: *mut NexfamSolution) {
    free(solution);
}
