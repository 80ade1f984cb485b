//! C ABI for `mbvge`.
//!
//! Models and fits are opaque heap objects created by `mbvge_*_new` /
//! `mbvge_fit` and released with the matching `*_free`. Every fallible call
//! returns an [`MbvgeStatus`]; on failure a description is available from
//! [`mbvge_last_error_message`] on the same thread until the next failing
//! call. Panics never cross the boundary.
//!
//! Parameter vectors are nine doubles in the order
//! `p, a1, a2, a3, l1, b1, b2, b3, l2`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use mbvge::dependence::{dependence_summary, CopulaModel};
use mbvge::em::{em_fit, EmConfig, EmError, FitResult, InitStrategy};
use mbvge::{BvgePair, MixtureParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbvgeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    InvalidData = 3,
    /// Every observation is a tie; the model cannot be fitted.
    ModelInadequacy = 4,
    Numeric = 5,
    Panic = 6,
}

/// A mixture model.
pub struct MbvgeModel {
    params: MixtureParams,
}

/// The result of a fit.
pub struct MbvgeFit {
    fit: FitResult,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MbvgeFitOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub fp_damping: f64,
    /// 0: random starting values, 1: moment-based starting values.
    pub init: u32,
    pub tie_tol: f64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MbvgeDependence {
    pub kendall_tau: f64,
    pub spearman_rho: f64,
    pub tail_lower: f64,
    pub tail_upper: f64,
    /// Published closed forms, unverified and possibly out of range.
    pub kendall_tau_verbatim: f64,
    pub spearman_rho_verbatim: f64,
    pub tail_upper_verbatim: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn guard<F: FnOnce() -> Result<(), (MbvgeStatus, String)>>(f: F) -> MbvgeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MbvgeStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MbvgeStatus::Panic
        }
    }
}

fn null(what: &str) -> (MbvgeStatus, String) {
    (MbvgeStatus::NullPointer, format!("{what} is null"))
}

/// Message of the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mbvge_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `params` must point to nine readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mbvge_model_new(params: *const f64, out: *mut *mut MbvgeModel) -> MbvgeStatus {
    guard(|| {
        if params.is_null() {
            return Err(null("params"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let mut v = [0.0; 9];
        v.copy_from_slice(std::slice::from_raw_parts(params, 9));
        let m = MixtureParams::from_array(v).map_err(|e| (MbvgeStatus::InvalidParameter, e.to_string()))?;
        *out = Box::into_raw(Box::new(MbvgeModel { params: m }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`mbvge_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mbvge_model_free(model: *mut MbvgeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn model_ref<'a>(model: *const MbvgeModel) -> Result<&'a MixtureParams, (MbvgeStatus, String)> {
    model.as_ref().map(|m| &m.params).ok_or_else(|| null("model"))
}

/// Log density at `(x1, x2)`; exact ties use the diagonal density.
///
/// # Safety
/// `model` must be a live model and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mbvge_model_log_density(
    model: *const MbvgeModel,
    x1: f64,
    x2: f64,
    out: *mut f64,
) -> MbvgeStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        if !(x1.is_finite() && x2.is_finite()) {
            return Err((MbvgeStatus::InvalidData, format!("non-finite point ({x1}, {x2})")));
        }
        *out = m.ln_density(&BvgePair::new(x1, x2, 0.0));
        Ok(())
    })
}

/// Joint CDF at `(x1, x2)`.
///
/// # Safety
/// `model` must be a live model and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mbvge_model_cdf(model: *const MbvgeModel, x1: f64, x2: f64, out: *mut f64) -> MbvgeStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = m.cdf(x1, x2);
        Ok(())
    })
}

/// Probability of a tie, `P(X1 = X2)`.
///
/// # Safety
/// `model` must be a live model and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mbvge_model_singular_mass(model: *const MbvgeModel, out: *mut f64) -> MbvgeStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = m.singular_mass();
        Ok(())
    })
}

/// Draw `n` pairs. The stream is the same as the command-line `sample` with
/// the same seed. `labels` may be null.
///
/// # Safety
/// `x1` and `x2` must have room for `n` doubles and `labels`, if not null,
/// for `n` bytes.
#[no_mangle]
pub unsafe extern "C" fn mbvge_model_sample(
    model: *const MbvgeModel,
    seed: u64,
    n: usize,
    x1: *mut f64,
    x2: *mut f64,
    labels: *mut u8,
) -> MbvgeStatus {
    guard(|| {
        let m = model_ref(model)?;
        if n == 0 {
            return Ok(());
        }
        if x1.is_null() || x2.is_null() {
            return Err(null("output buffer"));
        }
        let draws = m.sample_seeded(n, seed);
        let o1 = std::slice::from_raw_parts_mut(x1, n);
        let o2 = std::slice::from_raw_parts_mut(x2, n);
        for (k, d) in draws.iter().enumerate() {
            o1[k] = d.pair.x1;
            o2[k] = d.pair.x2;
        }
        if !labels.is_null() {
            let ol = std::slice::from_raw_parts_mut(labels, n);
            for (k, d) in draws.iter().enumerate() {
                ol[k] = d.label;
            }
        }
        Ok(())
    })
}

/// Rank correlations and tail indices of the copula of the mixture
/// distribution.
///
/// # Safety
/// `model` must be a live model and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mbvge_dependence(model: *const MbvgeModel, out: *mut MbvgeDependence) -> MbvgeStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = dependence_summary(m, CopulaModel::Distribution);
        *out = MbvgeDependence {
            kendall_tau: s.kendall_numeric.value,
            spearman_rho: s.spearman_numeric.value,
            tail_lower: s.tail.lower,
            tail_upper: s.tail.upper_numeric,
            kendall_tau_verbatim: s.kendall_verbatim,
            spearman_rho_verbatim: s.spearman_verbatim,
            tail_upper_verbatim: s.tail.upper_verbatim,
        };
        Ok(())
    })
}

/// Default fit options.
#[no_mangle]
pub extern "C" fn mbvge_fit_options_default() -> MbvgeFitOptions {
    let c = EmConfig::default();
    MbvgeFitOptions {
        rel_tol: c.rel_tol,
        max_iter: c.max_iter,
        fp_tol: c.fp_tol,
        fp_max_iter: c.fp_max_iter,
        fp_damping: c.fp_damping,
        init: 0,
        tie_tol: c.tie_tol,
        seed: c.seed,
    }
}

/// Fit the mixture to `n` pairs. `options` may be null for the defaults.
///
/// # Safety
/// `x1` and `x2` must point to `n` readable doubles, `options` (if not null)
/// to a valid struct, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mbvge_fit(
    x1: *const f64,
    x2: *const f64,
    n: usize,
    options: *const MbvgeFitOptions,
    out: *mut *mut MbvgeFit,
) -> MbvgeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if n > 0 && (x1.is_null() || x2.is_null()) {
            return Err(null("data"));
        }
        let o = options.as_ref().copied().unwrap_or_else(|| mbvge_fit_options_default());
        let cfg = EmConfig {
            rel_tol: o.rel_tol,
            max_iter: o.max_iter,
            fp_tol: o.fp_tol,
            fp_max_iter: o.fp_max_iter,
            fp_damping: o.fp_damping,
            init: match o.init {
                0 => InitStrategy::Random,
                1 => InitStrategy::Moment,
                k => return Err((MbvgeStatus::InvalidParameter, format!("unknown init strategy {k}"))),
            },
            tie_tol: o.tie_tol,
            seed: o.seed,
            ..EmConfig::default()
        };
        let pairs: Vec<(f64, f64)> = if n == 0 {
            Vec::new()
        } else {
            let a = std::slice::from_raw_parts(x1, n);
            let b = std::slice::from_raw_parts(x2, n);
            a.iter().copied().zip(b.iter().copied()).collect()
        };
        let fit = em_fit(&pairs, &cfg, None).map_err(|e| {
            let status = match e {
                EmError::AllTies => MbvgeStatus::ModelInadequacy,
                EmError::Config(_) | EmError::Param(_) => MbvgeStatus::InvalidParameter,
                _ => MbvgeStatus::InvalidData,
            };
            (status, e.to_string())
        })?;
        if !fit.loglik().is_finite() {
            return Err((MbvgeStatus::Numeric, "log-likelihood is not finite".into()));
        }
        *out = Box::into_raw(Box::new(MbvgeFit { fit }));
        Ok(())
    })
}

/// # Safety
/// `fit` must come from [`mbvge_fit`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mbvge_fit_free(fit: *mut MbvgeFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

unsafe fn fit_ref<'a>(fit: *const MbvgeFit) -> Result<&'a FitResult, (MbvgeStatus, String)> {
    fit.as_ref().map(|f| &f.fit).ok_or_else(|| null("fit"))
}

/// The nine estimates.
///
/// # Safety
/// `fit` must be live and `out` must have room for nine doubles.
#[no_mangle]
pub unsafe extern "C" fn mbvge_fit_estimates(fit: *const MbvgeFit, out: *mut f64) -> MbvgeStatus {
    guard(|| {
        let f = fit_ref(fit)?;
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, 9).copy_from_slice(&f.params.to_array());
        Ok(())
    })
}

/// Final log-likelihood, iteration count and convergence flag. Any of the
/// output pointers may be null.
///
/// # Safety
/// `fit` must be live; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mbvge_fit_info(
    fit: *const MbvgeFit,
    loglik: *mut f64,
    iterations: *mut usize,
    converged: *mut bool,
) -> MbvgeStatus {
    guard(|| {
        let f = fit_ref(fit)?;
        if let Some(l) = loglik.as_mut() {
            *l = f.loglik();
        }
        if let Some(i) = iterations.as_mut() {
            *i = f.iterations;
        }
        if let Some(c) = converged.as_mut() {
            *c = f.converged;
        }
        Ok(())
    })
}

/// Create a model from the fitted parameters.
///
/// # Safety
/// `fit` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mbvge_fit_model(fit: *const MbvgeFit, out: *mut *mut MbvgeModel) -> MbvgeStatus {
    guard(|| {
        let f = fit_ref(fit)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(MbvgeModel { params: f.params }));
        Ok(())
    })
}
