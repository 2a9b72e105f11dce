//! C ABI over the oodlens engine.
//!
//! Every fallible function returns an [`OodStatus`]; on failure the message is
//! kept per thread and read with [`oodlens_last_error`]. Layouts and trained
//! detectors are opaque handles released with their `_free` function.
//! Arrays are row-major; sizes are element counts.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use oodlens::dataset::FeatureMatrix;
use oodlens::ensemble::{self, ClassifierSpec, ScoreOptions};
use oodlens::grid::{self, GridAssignment, LayoutOptions};
use oodlens::lap::{self, CostMatrix};
use oodlens::{metrics, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OodStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Precondition = 3,
    Infeasible = 4,
    Degenerate = 5,
    UndefinedMetric = 6,
    Internal = 7,
    Panic = 8,
}

impl From<&Error> for OodStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Precondition(_) => OodStatus::Precondition,
            Error::Infeasible { .. } => OodStatus::Infeasible,
            Error::Degenerate(_) | Error::DegenerateLabels { .. } => OodStatus::Degenerate,
            Error::UndefinedMetric(_) => OodStatus::UndefinedMetric,
            Error::Internal(_) | Error::Io { .. } => OodStatus::Internal,
            _ => OodStatus::InvalidInput,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(OodStatus);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = OodStatus::from(&e);
        set_error(e.to_string());
        Fail(status)
    }
}

fn null(what: &str) -> Fail {
    set_error(format!("{what} is null"));
    Fail(OodStatus::NullPointer)
}

fn invalid(msg: impl Into<String>) -> Fail {
    set_error(msg.into());
    Fail(OodStatus::InvalidInput)
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> OodStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OodStatus::Ok,
        Ok(Err(Fail(s))) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            OodStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn out_scalar<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

fn checked_len(a: usize, b: usize) -> Result<usize, Fail> {
    a.checked_mul(b).ok_or_else(|| invalid("size overflow"))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn oodlens_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn oodlens_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------------------
// assignment

/// Solves the `n × n` assignment problem on `costs`. Writes the column of
/// each row to `out_perm[n]` and the total cost to `out_cost`.
///
/// # Safety
/// `costs` must point to `n*n` doubles, `out_perm` to `n` writable slots.
#[no_mangle]
pub unsafe extern "C" fn oodlens_lap_solve_dense(
    costs: *const f64,
    n: usize,
    out_perm: *mut usize,
    out_cost: *mut f64,
) -> OodStatus {
    guard(|| {
        let c = input(costs, checked_len(n, n)?, "costs")?;
        let perm = output(out_perm, n, "out_perm")?;
        let total = out_scalar(out_cost, "out_cost")?;
        let m = CostMatrix::new(n, c.to_vec())?;
        let a = lap::solve_dense(&m)?;
        perm.copy_from_slice(&a.perm);
        *total = a.total_cost;
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// layout

/// Grid assignment of a 2D point set.
pub struct OodLayout {
    inner: GridAssignment,
}

/// Packs `n_points` points (`xy[2*n_points]`, interleaved) into the smallest
/// square grid holding them, using the kNN-sparsified solver with `k`
/// neighbours (clamped to the cell count). Set `with_baseline` to also solve
/// the dense problem and record the cost ratio.
///
/// # Safety
/// `xy` must point to `2*n_points` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oodlens_layout_compute(
    xy: *const f64,
    n_points: usize,
    k: usize,
    with_baseline: bool,
    out: *mut *mut OodLayout,
) -> OodStatus {
    guard(|| {
        let raw = input(xy, checked_len(n_points, 2)?, "xy")?;
        let slot = out_scalar(out, "out")?;
        let points: Vec<[f64; 2]> = raw.chunks_exact(2).map(|p| [p[0], p[1]]).collect();
        let inner = grid::layout_with(&points, &LayoutOptions { k, with_baseline })?;
        *slot = Box::into_raw(Box::new(OodLayout { inner }));
        Ok(())
    })
}

/// Grid rows and columns.
///
/// # Safety
/// `layout` must come from [`oodlens_layout_compute`]; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn oodlens_layout_grid(layout: *const OodLayout, out_m: *mut usize, out_n: *mut usize) -> OodStatus {
    guard(|| {
        let l = layout.as_ref().ok_or_else(|| null("layout"))?;
        *out_scalar(out_m, "out_m")? = l.inner.m;
        *out_scalar(out_n, "out_n")? = l.inner.n;
        Ok(())
    })
}

/// Row-major cell index of every input point.
///
/// # Safety
/// `out_cells` must have room for `len` entries; `len` must equal the point count.
#[no_mangle]
pub unsafe extern "C" fn oodlens_layout_cells(layout: *const OodLayout, out_cells: *mut usize, len: usize) -> OodStatus {
    guard(|| {
        let l = layout.as_ref().ok_or_else(|| null("layout"))?;
        if len != l.inner.cell_of_sample.len() {
            return Err(invalid(format!("buffer holds {len}, layout has {} points", l.inner.cell_of_sample.len())));
        }
        output(out_cells, len, "out_cells")?.copy_from_slice(&l.inner.cell_of_sample);
        Ok(())
    })
}

/// Total assignment cost, the k actually used and the cost ratio (NaN unless
/// the baseline was requested).
///
/// # Safety
/// `layout` must come from [`oodlens_layout_compute`]; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn oodlens_layout_stats(
    layout: *const OodLayout,
    out_total_cost: *mut f64,
    out_k: *mut usize,
    out_cr: *mut f64,
) -> OodStatus {
    guard(|| {
        let l = layout.as_ref().ok_or_else(|| null("layout"))?;
        *out_scalar(out_total_cost, "out_total_cost")? = l.inner.total_cost;
        *out_scalar(out_k, "out_k")? = l.inner.k_used;
        *out_scalar(out_cr, "out_cr")? = l.inner.report.cr.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// # Safety
/// `layout` must come from [`oodlens_layout_compute`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn oodlens_layout_free(layout: *mut OodLayout) {
    if !layout.is_null() {
        drop(Box::from_raw(layout));
    }
}

// ---------------------------------------------------------------------------
// scoring

/// Entropy of the averaged class distribution for each sample.
/// `probs` holds `n_samples × n_models × n_classes` probabilities.
///
/// # Safety
/// `probs` must hold the stated number of doubles, `out_scores` `n_samples`.
#[no_mangle]
pub unsafe extern "C" fn oodlens_entropy_scores(
    probs: *const f64,
    n_samples: usize,
    n_models: usize,
    n_classes: usize,
    out_scores: *mut f64,
) -> OodStatus {
    guard(|| {
        if n_models == 0 || n_classes == 0 {
            return Err(invalid("n_models and n_classes must be positive"));
        }
        let per_sample = checked_len(n_models, n_classes)?;
        let p = input(probs, checked_len(n_samples, per_sample)?, "probs")?;
        let out = output(out_scores, n_samples, "out_scores")?;
        for (s, o) in p.chunks_exact(per_sample).zip(out.iter_mut()) {
            let dists: Vec<&[f64]> = s.chunks_exact(n_classes).collect();
            *o = ensemble::ensemble_score(&dists).1;
        }
        Ok(())
    })
}

unsafe fn metric_inputs<'a>(scores: *const f64, is_ood: *const u8, n: usize) -> Result<(&'a [f64], Vec<bool>), Fail> {
    let s = input(scores, n, "scores")?;
    let y = input(is_ood, n, "is_ood")?.iter().map(|&b| b != 0).collect();
    Ok((s, y))
}

/// # Safety
/// `scores` and `is_ood` must hold `n` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oodlens_auroc(scores: *const f64, is_ood: *const u8, n: usize, out: *mut f64) -> OodStatus {
    guard(|| {
        let (s, y) = metric_inputs(scores, is_ood, n)?;
        *out_scalar(out, "out")? = metrics::auroc(s, &y)?;
        Ok(())
    })
}

/// # Safety
/// `scores` and `is_ood` must hold `n` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oodlens_aupr(scores: *const f64, is_ood: *const u8, n: usize, out: *mut f64) -> OodStatus {
    guard(|| {
        let (s, y) = metric_inputs(scores, is_ood, n)?;
        *out_scalar(out, "out")? = metrics::aupr(s, &y)?;
        Ok(())
    })
}

/// # Safety
/// `scores` and `is_ood` must hold `n` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oodlens_prec_at_k(
    scores: *const f64,
    is_ood: *const u8,
    n: usize,
    k: usize,
    out: *mut f64,
) -> OodStatus {
    guard(|| {
        let (s, y) = metric_inputs(scores, is_ood, n)?;
        *out_scalar(out, "out")? = metrics::prec_at_k(s, &y, k)?;
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// detector

/// Logistic-regression family over one feature matrix.
pub struct OodDetector {
    classifiers: Vec<ClassifierSpec>,
    dim: usize,
    n_classes: usize,
}

/// Trains `n_models` classifiers (regularization coefficients spread over
/// 1e-5..1e5) on `x[n × dim]` with class labels in `0..n_classes`.
///
/// # Safety
/// `x` must hold `n*dim` doubles, `labels` `n` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oodlens_detector_train(
    x: *const f64,
    n: usize,
    dim: usize,
    labels: *const usize,
    n_classes: usize,
    n_models: usize,
    out: *mut *mut OodDetector,
) -> OodStatus {
    guard(|| {
        let data = input(x, checked_len(n, dim)?, "x")?;
        let y = input(labels, n, "labels")?;
        let slot = out_scalar(out, "out")?;
        let m = FeatureMatrix::new("features", n, dim, data.to_vec())?;
        let coefficients = ensemble::select_coefficients(n_models)?;
        let classifiers = ensemble::train_family(&[m], y, n_classes, &coefficients)?;
        *slot = Box::into_raw(Box::new(OodDetector {
            classifiers,
            dim,
            n_classes,
        }));
        Ok(())
    })
}

/// Number of classifiers in the family (duplicated coefficients collapse).
///
/// # Safety
/// `detector` must come from [`oodlens_detector_train`].
#[no_mangle]
pub unsafe extern "C" fn oodlens_detector_size(detector: *const OodDetector, out: *mut usize) -> OodStatus {
    guard(|| {
        let d = detector.as_ref().ok_or_else(|| null("detector"))?;
        *out_scalar(out, "out")? = d.classifiers.len();
        Ok(())
    })
}

/// OoD score (nats), task confidence and predicted class for `x[n × dim]`.
/// `out_confidence` and `out_class` may be null.
///
/// # Safety
/// `x` must hold `n*dim` doubles; non-null outputs must have room for `n` entries.
#[no_mangle]
pub unsafe extern "C" fn oodlens_detector_score(
    detector: *const OodDetector,
    x: *const f64,
    n: usize,
    dim: usize,
    out_scores: *mut f64,
    out_confidence: *mut f64,
    out_class: *mut usize,
) -> OodStatus {
    guard(|| {
        let d = detector.as_ref().ok_or_else(|| null("detector"))?;
        if dim != d.dim {
            return Err(invalid(format!("dim = {dim}, detector was trained on {}", d.dim)));
        }
        let data = input(x, checked_len(n, dim)?, "x")?;
        let scores = output(out_scores, n, "out_scores")?;
        let m = FeatureMatrix::new("features", n, dim, data.to_vec())?;
        let ids: Vec<usize> = (0..n).collect();
        let table = ensemble::score(&d.classifiers, &[m], &ids, &ScoreOptions::default())?;
        debug_assert_eq!(table.n_classes, d.n_classes);
        for (o, r) in scores.iter_mut().zip(&table.rows) {
            *o = r.ood_score;
        }
        if !out_confidence.is_null() {
            for (o, r) in output(out_confidence, n, "out_confidence")?.iter_mut().zip(&table.rows) {
                *o = r.confidence;
            }
        }
        if !out_class.is_null() {
            for (o, r) in output(out_class, n, "out_class")?.iter_mut().zip(&table.rows) {
                *o = r.predicted_class;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `detector` must come from [`oodlens_detector_train`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn oodlens_detector_free(detector: *mut OodDetector) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}
