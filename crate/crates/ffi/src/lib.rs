//! C interface to the `modelspace` engine.
//!
//! Objects cross the boundary as opaque handles created by a `ms_*_new`,
//! `ms_*_load` or `ms_search` call and released with the matching `ms_*_free`.
//! Every fallible function returns an [`MsStatus`]; on failure the message is
//! available from [`ms_last_error`] on the same thread. Covariate indices are
//! 0-based on this side of the interface.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use modelspace::datasets::{augment_correlated, load_csv, AugmentSpec};
use modelspace::design::compute_r_squared;
use modelspace::evidence::{build_quadrature, log_bf_vs_null};
use modelspace::priors::size_distribution;
use modelspace::search::{enumerate_limited, EvidenceEngine, SearchLimits};
use modelspace::{
    BetaMode, DesignData, Error, ErrorCategory, ModelKey, PriorSpec, PruneRule, SearchReport, WPriorSpec,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    NumericalError = 4,
    ConfigError = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsPriorFamily {
    /// `param1 = a`, `param2 = b`.
    BetaBinomial = 0,
    /// `param1 = a`, `b = p^param2`.
    BetaBinomialPPower = 1,
    /// `param1 = rho`.
    Children = 2,
    /// `param1 = eta`.
    Descendant = 3,
    /// `param1 = lambda`.
    PoissonLimit = 4,
}

/// Model-space prior; unused parameters are ignored.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MsPrior {
    pub family: MsPriorFamily,
    pub param1: f64,
    pub param2: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsWPrior {
    Intrinsic = 0,
    /// Uses the accompanying rate `b`.
    ZellnerSiow = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsRuleKind {
    None = 0,
    Local = 1,
    Global = 2,
    Path = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MsRule {
    pub kind: MsRuleKind,
    /// Threshold in `(0, 1)`; ignored for `None`.
    pub epsilon: f64,
}

/// Regression data: response, intercept plus forced covariates, tested
/// covariates.
pub struct MsDesign(DesignData);

/// Outcome of a search.
pub struct MsReport(SearchReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(MsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.category() {
            ErrorCategory::Data => MsStatus::DataError,
            ErrorCategory::Numerical => MsStatus::NumericalError,
            ErrorCategory::Config => MsStatus::ConfigError,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MsStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in modelspace".into());
            set_last_error(&message);
            MsStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(MsStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(MsStatus::InvalidArgument, message.into())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string(p: *const c_char, what: &str) -> Result<String, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn prior_spec(prior: &MsPrior) -> Result<PriorSpec, Failure> {
    let spec = match prior.family {
        MsPriorFamily::BetaBinomial => {
            PriorSpec::BetaBinomial { a: prior.param1, b_mode: BetaMode::Fixed(prior.param2) }
        }
        MsPriorFamily::BetaBinomialPPower => {
            PriorSpec::BetaBinomial { a: prior.param1, b_mode: BetaMode::PPower(prior.param2) }
        }
        MsPriorFamily::Children => PriorSpec::Children { rho: prior.param1 },
        MsPriorFamily::Descendant => PriorSpec::Descendant { eta: prior.param1 },
        MsPriorFamily::PoissonLimit => PriorSpec::PoissonLimit { lambda: prior.param1 },
    };
    spec.validate()?;
    Ok(spec)
}

fn wprior_spec(family: MsWPrior, b: f64) -> Result<WPriorSpec, Failure> {
    let spec = match family {
        MsWPrior::Intrinsic => WPriorSpec::intrinsic(),
        MsWPrior::ZellnerSiow => WPriorSpec::zellner_siow(b),
    };
    spec.validate()?;
    Ok(spec)
}

fn prune_rule(rule: MsRule) -> Result<PruneRule, Failure> {
    let rule = match rule.kind {
        MsRuleKind::None => PruneRule::None,
        MsRuleKind::Local => PruneRule::Local(rule.epsilon),
        MsRuleKind::Global => PruneRule::Global(rule.epsilon),
        MsRuleKind::Path => PruneRule::Path(rule.epsilon),
    };
    rule.validate()?;
    Ok(rule)
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ms_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a design with an intercept from `y` (length `n`) and the column-major
/// `n × p` matrix `x`.
///
/// # Safety
/// `y` must point to `n` doubles, `x` to `n * p` doubles and `out` to writable
/// storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ms_design_new(
    y: *const f64,
    x: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut MsDesign,
) -> MsStatus {
    guard(|| {
        let len = n.checked_mul(p).ok_or_else(|| invalid("n * p overflows"))?;
        let y = slice(y, n, "y")?;
        let x = slice(x, len, "x")?;
        let design = DesignData::with_intercept(
            nalgebra::DVector::from_column_slice(y),
            nalgebra::DMatrix::zeros(n, 0),
            nalgebra::DMatrix::from_column_slice(n, p, x),
        )?;
        write(out, Box::into_raw(Box::new(MsDesign(design))), "out")
    })
}

/// Loads a CSV file with a header row; every column except `y_column` becomes
/// a tested covariate.
///
/// # Safety
/// `path` and `y_column` must be NUL-terminated strings and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ms_design_load_csv(
    path: *const c_char,
    y_column: *const c_char,
    out: *mut *mut MsDesign,
) -> MsStatus {
    guard(|| {
        let design = load_csv(string(path, "path")?, &string(y_column, "y_column")?, &[])?;
        write(out, Box::into_raw(Box::new(MsDesign(design))), "out")
    })
}

/// Appends `copies` correlated copies of each of the first `base_columns`
/// covariates.
///
/// # Safety
/// `design` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ms_design_augment(
    design: *const MsDesign,
    base_columns: usize,
    copies: usize,
    seed: u64,
    out: *mut *mut MsDesign,
) -> MsStatus {
    guard(|| {
        let design = deref(design, "design")?;
        let augmented = augment_correlated(&design.0, &AugmentSpec::new(base_columns, copies, seed))?;
        write(out, Box::into_raw(Box::new(MsDesign(augmented))), "out")
    })
}

/// # Safety
/// `design` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_design_free(design: *mut MsDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// # Safety
/// `design` must be a live handle; each output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn ms_design_dims(
    design: *const MsDesign,
    n: *mut usize,
    p0: *mut usize,
    p: *mut usize,
) -> MsStatus {
    guard(|| {
        let d = &deref(design, "design")?.0;
        for (out, value) in [(n, d.n()), (p0, d.p0()), (p, d.p())] {
            if !out.is_null() {
                out.write(value);
            }
        }
        Ok(())
    })
}

/// Coefficient of determination of the model with the given covariates.
///
/// # Safety
/// `indices` must point to `len` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_r_squared(
    design: *const MsDesign,
    indices: *const usize,
    len: usize,
    out: *mut f64,
) -> MsStatus {
    guard(|| {
        let d = &deref(design, "design")?.0;
        let indices = slice(indices, len, "indices")?;
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("indices contain duplicates"));
        }
        let model = ModelKey::from_indices(sorted);
        write(out, compute_r_squared(d, &model)?, "out")
    })
}

/// Log Bayes factor of a model with `size` tested covariates against the
/// base model, using the default quadrature order of the w-prior.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_log_bf_vs_null(
    r2: f64,
    size: usize,
    n: usize,
    p0: usize,
    family: MsWPrior,
    b: f64,
    out: *mut f64,
) -> MsStatus {
    guard(|| {
        let wprior = wprior_spec(family, b)?;
        let rule = build_quadrature(wprior, wprior.default_order())?;
        write(out, log_bf_vs_null(r2, size, n, p0, &wprior, &rule)?, "out")
    })
}

/// Writes `log π_p(s)` for `s = 0..=p` into `out`, which holds `p + 1` values.
///
/// # Safety
/// `prior` must be valid and `out` must have room for `p + 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn ms_prior_log_pmf(prior: *const MsPrior, p: usize, out: *mut f64) -> MsStatus {
    guard(|| {
        let spec = prior_spec(deref(prior, "prior")?)?;
        let dist = size_distribution(&spec, p)?;
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(dist.log_pmf().as_ptr(), out, dist.log_pmf().len());
        Ok(())
    })
}

/// Runs the search with the intrinsic w-prior. `max_visited = 0` means no
/// limit.
///
/// # Safety
/// `design` and `prior` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ms_search(
    design: *const MsDesign,
    prior: *const MsPrior,
    rule: MsRule,
    max_visited: usize,
    out: *mut *mut MsReport,
) -> MsStatus {
    guard(|| {
        let d = &deref(design, "design")?.0;
        let spec = prior_spec(deref(prior, "prior")?)?;
        let rule = prune_rule(rule)?;
        let engine = EvidenceEngine::new(d, spec, WPriorSpec::intrinsic(), None)?;
        let limits = SearchLimits { max_visited: (max_visited > 0).then_some(max_visited), time_limit: None };
        let report = enumerate_limited(&engine, rule, limits)?;
        write(out, Box::into_raw(Box::new(MsReport(report))), "out")
    })
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_report_free(report: *mut MsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Visited and considered model counts, models needed for 90% of the
/// posterior, and whether a limit stopped the search. Outputs may be null.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_report_counts(
    report: *const MsReport,
    visited: *mut usize,
    considered: *mut usize,
    to_cover_90: *mut usize,
    truncated: *mut bool,
) -> MsStatus {
    guard(|| {
        let r = &deref(report, "report")?.0;
        for (out, value) in [(visited, r.n_visited), (considered, r.n_considered), (to_cover_90, r.n_to_cover_90)] {
            if !out.is_null() {
                out.write(value);
            }
        }
        if !truncated.is_null() {
            truncated.write(r.truncated);
        }
        Ok(())
    })
}

/// Copies the modal model's covariates into `out` (capacity `cap`) and its
/// size into `len`. Fails with `InvalidArgument` when `cap` is too small;
/// `len` is still set.
///
/// # Safety
/// `report` must be live, `out` must have room for `cap` values and `len`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_report_modal(
    report: *const MsReport,
    out: *mut usize,
    cap: usize,
    len: *mut usize,
) -> MsStatus {
    guard(|| {
        let modal = deref(report, "report")?.0.modal.indices();
        write(len, modal.len(), "len")?;
        if modal.len() > cap {
            return Err(invalid(format!("modal model has {} covariates, buffer holds {cap}", modal.len())));
        }
        if !modal.is_empty() {
            if out.is_null() {
                return Err(null("out"));
            }
            ptr::copy_nonoverlapping(modal.as_ptr(), out, modal.len());
        }
        Ok(())
    })
}

/// Posterior probability of the modal model.
///
/// # Safety
/// `report` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ms_report_modal_probability(report: *const MsReport, out: *mut f64) -> MsStatus {
    guard(|| {
        let r = &deref(report, "report")?.0;
        write(out, r.posterior(&r.modal).unwrap_or(0.0), "out")
    })
}

/// Copies the `p` inclusion probabilities into `out`.
///
/// # Safety
/// `report` must be live and `out` must have room for `p` doubles.
#[no_mangle]
pub unsafe extern "C" fn ms_report_inclusion(report: *const MsReport, out: *mut f64, p: usize) -> MsStatus {
    guard(|| {
        let incl = &deref(report, "report")?.0.inclusion_prob;
        if p != incl.len() {
            return Err(invalid(format!("report covers {} covariates, caller passed {p}", incl.len())));
        }
        if p > 0 {
            if out.is_null() {
                return Err(null("out"));
            }
            ptr::copy_nonoverlapping(incl.as_ptr(), out, p);
        }
        Ok(())
    })
}

/// Serializes the full report as JSON. Release the string with
/// [`ms_string_free`].
///
/// # Safety
/// `report` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ms_report_to_json(report: *const MsReport, out: *mut *mut c_char) -> MsStatus {
    guard(|| {
        let r = &deref(report, "report")?.0;
        let text = serde_json::to_string(r).map_err(Error::from)?;
        let c = CString::new(text).map_err(|_| invalid("report contains a NUL byte"))?;
        write(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
