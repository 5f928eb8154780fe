//! C ABI over the similarity pipeline: opaque handles, status codes and a
//! thread-local last-error message. Every pointer handed out by this library
//! must be released with its matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use fedsim_core::datagen::{read_cache, read_csv, Dataset};
use fedsim_core::harness::{classify_collaboration, Collaboration};
use fedsim_core::metric::{pairwise_ot_similarity, MetricConfig, SimilarityReport};
use fedsim_core::privacy::{check_privacy_budget, private_pairwise_similarity, zcdp_to_dp, PrivacyBudget};
use fedsim_core::probe::{read_params, run_probe_round, Activation, ModelParams, ModelSpec, TrainOpts};
use fedsim_core::Error;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FedsimStatus {
    FedsimOk = 0,
    FedsimInvalidArgument = 1,
    FedsimComputationFailed = 2,
    FedsimPrivacyGateRefused = 3,
    FedsimIoError = 4,
    FedsimNullPointer = 5,
}

/// Collaboration bands from the normalized cost.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FedsimBand {
    FedsimBeneficial = 0,
    FedsimUncertain = 1,
    FedsimDetrimental = 2,
}

/// Opaque dataset handle.
pub struct FedsimDataset(Dataset);

/// Opaque probe-model handle.
pub struct FedsimModel(ModelParams);

/// Opaque similarity-report handle.
pub struct FedsimReport(SimilarityReport);

/// Metric knobs; zero/negative fields fall back to defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FedsimMetricOptions {
    pub feature_weight: f64,
    pub label_weight: f64,
    pub epsilon: f64,
    pub min_class_samples: usize,
    pub override_stat_floor: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).ok();
    });
}

fn status_for(err: &Error) -> FedsimStatus {
    match err {
        Error::BudgetGate { .. } => FedsimStatus::FedsimPrivacyGateRefused,
        Error::Io(_) | Error::Csv(_) | Error::BadFormat(_) => FedsimStatus::FedsimIoError,
        Error::InvalidInput(_) | Error::DimensionMismatch(_) | Error::Config(_) => {
            FedsimStatus::FedsimInvalidArgument
        }
        _ => FedsimStatus::FedsimComputationFailed,
    }
}

fn fail(err: &Error) -> FedsimStatus {
    set_error(&err.to_string());
    status_for(err)
}

/// # Safety
/// `ptr` must be a valid NUL-terminated string.
unsafe fn c_str<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fedsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent error on this thread, or NULL. The returned
/// string must be released with `fedsim_string_free`.
#[no_mangle]
pub extern "C" fn fedsim_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => msg.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must have been returned by a fedsim function and not freed before.
#[no_mangle]
pub unsafe extern "C" fn fedsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn load_dataset_inner(
    path: *const c_char,
    out: *mut *mut FedsimDataset,
    loader: fn(&Path) -> fedsim_core::Result<Dataset>,
) -> FedsimStatus {
    if out.is_null() {
        set_error("output pointer is null");
        return FedsimStatus::FedsimNullPointer;
    }
    let Some(path) = c_str(path) else {
        set_error("path is null or not UTF-8");
        return FedsimStatus::FedsimNullPointer;
    };
    match loader(Path::new(path)) {
        Ok(d) => {
            *out = Box::into_raw(Box::new(FedsimDataset(d)));
            FedsimStatus::FedsimOk
        }
        Err(e) => fail(&e),
    }
}

/// Load a dataset from CSV with a `f0..f{p-1},label` header.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fedsim_dataset_load_csv(
    path: *const c_char,
    out: *mut *mut FedsimDataset,
) -> FedsimStatus {
    load_dataset_inner(path, out, |p| read_csv(p, None))
}

/// Load a dataset from the versioned binary cache format.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fedsim_dataset_load_cache(
    path: *const c_char,
    out: *mut *mut FedsimDataset,
) -> FedsimStatus {
    load_dataset_inner(path, out, read_cache)
}

/// Number of samples; 0 for a null handle.
#[no_mangle]
pub extern "C" fn fedsim_dataset_rows(d: *const FedsimDataset) -> usize {
    if d.is_null() {
        return 0;
    }
    unsafe { (*d).0.n() }
}

/// Feature dimension; 0 for a null handle.
#[no_mangle]
pub extern "C" fn fedsim_dataset_dim(d: *const FedsimDataset) -> usize {
    if d.is_null() {
        return 0;
    }
    unsafe { (*d).0.dim() }
}

/// Class count; 0 for a null handle.
#[no_mangle]
pub extern "C" fn fedsim_dataset_classes(d: *const FedsimDataset) -> usize {
    if d.is_null() {
        return 0;
    }
    unsafe { (*d).0.n_classes() }
}

/// Release a dataset handle.
///
/// # Safety
/// `d` must have come from a fedsim loader and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fedsim_dataset_free(d: *mut FedsimDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Load probe-model parameters from the versioned binary format.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fedsim_model_load(
    path: *const c_char,
    out: *mut *mut FedsimModel,
) -> FedsimStatus {
    if out.is_null() {
        set_error("output pointer is null");
        return FedsimStatus::FedsimNullPointer;
    }
    let Some(path) = c_str(path) else {
        set_error("path is null or not UTF-8");
        return FedsimStatus::FedsimNullPointer;
    };
    match read_params(Path::new(path)) {
        Ok(m) => {
            *out = Box::into_raw(Box::new(FedsimModel(m)));
            FedsimStatus::FedsimOk
        }
        Err(e) => fail(&e),
    }
}

/// Release a model handle.
///
/// # Safety
/// `m` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fedsim_model_free(m: *mut FedsimModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Run the single federated probe round over two clients and return the
/// aggregated global model. `hidden` lists the hidden-layer widths; the last
/// entry is the activation dimension. `use_relu` false selects tanh.
///
/// # Safety
/// All pointers must be valid; `hidden` must point at `n_hidden` entries.
#[no_mangle]
pub unsafe extern "C" fn fedsim_probe_round(
    a: *const FedsimDataset,
    b: *const FedsimDataset,
    hidden: *const usize,
    n_hidden: usize,
    use_relu: bool,
    learning_rate: f64,
    batch_size: usize,
    epochs: usize,
    seed: u64,
    out: *mut *mut FedsimModel,
) -> FedsimStatus {
    if a.is_null() || b.is_null() || hidden.is_null() || out.is_null() || n_hidden == 0 {
        set_error("null handle or empty hidden widths");
        return FedsimStatus::FedsimNullPointer;
    }
    let widths = std::slice::from_raw_parts(hidden, n_hidden).to_vec();
    let (d_a, d_b) = (&(*a).0, &(*b).0);
    let spec = ModelSpec {
        input: d_a.dim(),
        hidden: widths,
        classes: d_a.n_classes().max(d_b.n_classes()),
        activation: if use_relu { Activation::Relu } else { Activation::Tanh },
        seed,
    };
    let opts = TrainOpts {
        learning_rate,
        batch_size,
        epochs,
        prox_mu: 0.0,
        seed,
    };
    match run_probe_round(&[d_a.clone(), d_b.clone()], &spec, &opts) {
        Ok(probe) => {
            *out = Box::into_raw(Box::new(FedsimModel(probe.global)));
            FedsimStatus::FedsimOk
        }
        Err(e) => fail(&e),
    }
}

fn metric_config_from(opts: *const FedsimMetricOptions) -> MetricConfig {
    let mut cfg = MetricConfig::default();
    if opts.is_null() {
        return cfg;
    }
    let o = unsafe { *opts };
    if o.feature_weight > 0.0 {
        cfg.feature_weight = o.feature_weight;
    }
    if o.label_weight > 0.0 {
        cfg.label_weight = o.label_weight;
    }
    if o.epsilon > 0.0 {
        cfg.epsilon = o.epsilon;
    }
    if o.min_class_samples > 0 {
        cfg.min_class_samples = o.min_class_samples;
    }
    cfg.override_stat_floor = o.override_stat_floor;
    cfg
}

/// Pairwise similarity between two datasets under a probe model. `opts` may
/// be NULL for defaults.
///
/// # Safety
/// All handle pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fedsim_similarity(
    a: *const FedsimDataset,
    b: *const FedsimDataset,
    model: *const FedsimModel,
    opts: *const FedsimMetricOptions,
    out: *mut *mut FedsimReport,
) -> FedsimStatus {
    if a.is_null() || b.is_null() || model.is_null() || out.is_null() {
        set_error("null handle");
        return FedsimStatus::FedsimNullPointer;
    }
    let cfg = metric_config_from(opts);
    match pairwise_ot_similarity(&(*a).0, &(*b).0, &(*model).0, &cfg) {
        Ok(report) => {
            *out = Box::into_raw(Box::new(FedsimReport(report)));
            FedsimStatus::FedsimOk
        }
        Err(e) => fail(&e),
    }
}

/// Similarity through the privacy-preserving path (SMC feature costs plus
/// zCDP-noised class statistics). Fails with
/// `FEDSIM_STATUS_FEDSIM_PRIVACY_GATE_REFUSED` when `rho` violates the
/// reconstruction-infeasibility gate and `allow_weak_privacy` is false.
///
/// # Safety
/// All handle pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fedsim_similarity_private(
    a: *const FedsimDataset,
    b: *const FedsimDataset,
    model: *const FedsimModel,
    opts: *const FedsimMetricOptions,
    rho: f64,
    delta: f64,
    allow_weak_privacy: bool,
    seed: u64,
    out: *mut *mut FedsimReport,
) -> FedsimStatus {
    if a.is_null() || b.is_null() || model.is_null() || out.is_null() {
        set_error("null handle");
        return FedsimStatus::FedsimNullPointer;
    }
    let cfg = metric_config_from(opts);
    let budget = match PrivacyBudget::new(rho, delta) {
        Ok(b) => b,
        Err(e) => return fail(&e),
    };
    match private_pairwise_similarity(
        &(*a).0,
        &(*b).0,
        &(*model).0,
        &cfg,
        &budget,
        allow_weak_privacy,
        seed,
    ) {
        Ok((report, _transcripts)) => {
            *out = Box::into_raw(Box::new(FedsimReport(report)));
            FedsimStatus::FedsimOk
        }
        Err(e) => fail(&e),
    }
}

/// The normalized cost in [0,1]; NaN for a null handle.
#[no_mangle]
pub extern "C" fn fedsim_report_s_tilde(r: *const FedsimReport) -> f64 {
    if r.is_null() {
        return f64::NAN;
    }
    unsafe { (*r).0.s_tilde }
}

/// Number of shared classes that entered the aggregate.
#[no_mangle]
pub extern "C" fn fedsim_report_class_count(r: *const FedsimReport) -> usize {
    if r.is_null() {
        return 0;
    }
    unsafe { (*r).0.per_class.len() }
}

/// Serialize the report to JSON. The returned string must be released with
/// `fedsim_string_free`.
///
/// # Safety
/// `r` must be a valid report handle.
#[no_mangle]
pub unsafe extern "C" fn fedsim_report_to_json(r: *const FedsimReport) -> *mut c_char {
    if r.is_null() {
        return ptr::null_mut();
    }
    match (*r).0.to_json() {
        Ok(json) => CString::new(json.replace('\0', " "))
            .map(CString::into_raw)
            .unwrap_or(ptr::null_mut()),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// Release a report handle.
///
/// # Safety
/// `r` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fedsim_report_free(r: *mut FedsimReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Classify a normalized cost into a collaboration band.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fedsim_classify(s_tilde: f64, out: *mut FedsimBand) -> FedsimStatus {
    if out.is_null() {
        set_error("output pointer is null");
        return FedsimStatus::FedsimNullPointer;
    }
    match classify_collaboration(s_tilde) {
        Ok(band) => {
            *out = match band {
                Collaboration::Beneficial => FedsimBand::FedsimBeneficial,
                Collaboration::Uncertain => FedsimBand::FedsimUncertain,
                Collaboration::Detrimental => FedsimBand::FedsimDetrimental,
            };
            FedsimStatus::FedsimOk
        }
        Err(e) => fail(&e),
    }
}

/// Evaluate the reconstruction-infeasibility gate `rho < 6 sqrt(d) / n`.
///
/// # Safety
/// `out_pass` and `out_threshold` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn fedsim_check_privacy_budget(
    rho: f64,
    d: usize,
    n: usize,
    out_pass: *mut bool,
    out_threshold: *mut f64,
) -> FedsimStatus {
    if out_pass.is_null() || out_threshold.is_null() {
        set_error("output pointer is null");
        return FedsimStatus::FedsimNullPointer;
    }
    match check_privacy_budget(rho, d, n) {
        Ok(check) => {
            *out_pass = check.pass;
            *out_threshold = check.threshold;
            FedsimStatus::FedsimOk
        }
        Err(e) => fail(&e),
    }
}

/// Convert a zCDP budget to the epsilon of an (epsilon, delta) guarantee.
///
/// # Safety
/// `out_epsilon` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fedsim_zcdp_to_dp(
    rho: f64,
    delta: f64,
    out_epsilon: *mut f64,
) -> FedsimStatus {
    if out_epsilon.is_null() {
        set_error("output pointer is null");
        return FedsimStatus::FedsimNullPointer;
    }
    match zcdp_to_dp(rho, delta) {
        Ok(eps) => {
            *out_epsilon = eps;
            FedsimStatus::FedsimOk
        }
        Err(e) => fail(&e),
    }
}
