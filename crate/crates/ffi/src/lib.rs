//! C ABI over the scrapflow library.
//!
//! Conventions shared by every function:
//!
//! * The return value is an [`SfStatus`]; results come back through out
//!   pointers, which are written only on success.
//! * On failure a description is available from [`sf_last_error`] on the
//!   same thread until the next call into this library.
//! * Objects are opaque handles created by a `*_new`/`*_from_*` function and
//!   released with the matching `*_free`; freeing NULL is a no-op.
//! * Strings returned to the caller are owned by the caller and must be
//!   released with [`sf_string_free`].
//! * Panics never cross the boundary; they surface as `SF_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use scrapflow::backbone::{disparity_alpha, extract_backbone, BackboneParams};
use scrapflow::export::{network_table, Format};
use scrapflow::extrapolate::{additional_companies, CapacityPlan, EmpiricalCdf, FirmCoefficient};
use scrapflow::regression::{ols_through_origin, Covariance, RegressionFit};
use scrapflow::trade::{build_network, filter_commodity, parse_trade_records};
use scrapflow::trade::{TimeWindow, TradeNetwork, TradeSchema};
use scrapflow::Error;

/// Outcome of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A file could not be opened or read.
    Io = 3,
    /// Input data did not match the expected layout.
    Parse = 4,
    /// An argument was outside its valid range.
    Domain = 5,
    /// Inconsistent configuration.
    Config = 6,
    /// The design matrix is rank deficient.
    Singular = 7,
    /// Fewer observations than regressors.
    InsufficientData = 8,
    /// An input that must not be empty was.
    Empty = 9,
    /// An internal error; please report it.
    Panic = 10,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    let message = CString::new(message).expect("NUL bytes replaced");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn status_of(err: &Error) -> SfStatus {
    match err {
        Error::Io { .. } => SfStatus::Io,
        Error::Csv(_) | Error::Schema(_) => SfStatus::Parse,
        Error::Domain(_) | Error::UndefinedCorrelation(_) => SfStatus::Domain,
        Error::Config(_) | Error::MissingRegressor(_) | Error::UnknownFormat { .. } => {
            SfStatus::Config
        }
        Error::SingularDesign { .. } => SfStatus::Singular,
        Error::InsufficientData { .. } => SfStatus::InsufficientData,
        Error::Empty(_) => SfStatus::Empty,
    }
}

/// Failure inside a guarded call: a status plus its message.
struct Failure(SfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SfStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SfStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal error: {message}"));
            SfStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(SfStatus::NullPointer, format!("{what} is NULL")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be NULL or point to a NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    non_null(p, what)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SfStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// # Safety
/// `p` must be NULL or point to `len` readable values.
unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(SfStatus::Parse, "output contains a NUL byte".into()))
}

/// Message describing the last failure on this thread, or NULL.
///
/// The pointer stays valid until the next call into this library from the
/// same thread; do not free it.
#[no_mangle]
pub extern "C" fn sf_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer returned by this library that has not been
/// freed yet.
#[no_mangle]
pub unsafe extern "C" fn sf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Disparity-filter significance of an edge carrying share `p` of a node's
/// strength, where the node has `k` edges in that direction.
///
/// # Safety
/// `out` must be NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sf_disparity_alpha(p: f64, k: usize, out: *mut f64) -> SfStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = disparity_alpha(p, k)?;
        Ok(())
    })
}

/// A windowed, directed trade network.
pub struct SfNetwork(TradeNetwork);

/// Read a trade flow file (columns t,i,j,k,v,q), keep commodity codes starting
/// with `prefix`, and average flows over the years `start_year..=end_year`.
///
/// # Safety
/// `path` and `prefix` must be NUL-terminated strings; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn sf_network_from_csv(
    path: *const c_char,
    prefix: *const c_char,
    start_year: i32,
    end_year: i32,
    out: *mut *mut SfNetwork,
) -> SfStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let prefix = str_arg(prefix, "prefix")?;
        non_null(out, "out")?;
        let window = TimeWindow::new(start_year, end_year)?;
        let file = File::open(path).map_err(|e| Failure(SfStatus::Io, format!("{path}: {e}")))?;
        let (records, _) = parse_trade_records(BufReader::new(file), &TradeSchema::default())?;
        let records = filter_commodity(&records, prefix);
        *out = Box::into_raw(Box::new(SfNetwork(build_network(&records, window))));
        Ok(())
    })
}

/// # Safety
/// `network` must be NULL or a handle that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn sf_network_free(network: *mut SfNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// # Safety
/// `network` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sf_network_edge_count(
    network: *const SfNetwork,
    out: *mut usize,
) -> SfStatus {
    guard(|| {
        non_null(network, "network")?;
        non_null(out, "out")?;
        *out = (*network).0.edge_count();
        Ok(())
    })
}

/// Sum of all edge weights (tonnes per year).
///
/// # Safety
/// `network` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sf_network_total_weight(
    network: *const SfNetwork,
    out: *mut f64,
) -> SfStatus {
    guard(|| {
        non_null(network, "network")?;
        non_null(out, "out")?;
        *out = (*network).0.total_weight();
        Ok(())
    })
}

/// New network holding the edges significant at level `alpha` at either
/// endpoint.
///
/// # Safety
/// `network` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sf_network_backbone(
    network: *const SfNetwork,
    alpha: f64,
    out: *mut *mut SfNetwork,
) -> SfStatus {
    guard(|| {
        non_null(network, "network")?;
        non_null(out, "out")?;
        let backbone = extract_backbone(&(*network).0, &BackboneParams::new(alpha)?)?;
        *out = Box::into_raw(Box::new(SfNetwork(backbone)));
        Ok(())
    })
}

/// Edge list as CSV (exporter,importer,tonnes_per_year); free the result with
/// [`sf_string_free`].
///
/// # Safety
/// `network` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sf_network_to_csv(
    network: *const SfNetwork,
    out: *mut *mut c_char,
) -> SfStatus {
    guard(|| {
        non_null(network, "network")?;
        non_null(out, "out")?;
        let csv = network_table(&(*network).0).render(Format::Csv)?;
        *out = into_c_string(csv)?;
        Ok(())
    })
}

/// A fitted no-intercept least-squares model.
pub struct SfRegression(RegressionFit);

/// Fit `y = X b` without intercept. `x` is row-major with `n_rows` rows and
/// `n_cols` columns; `robust` selects heteroskedasticity-robust (HC1)
/// standard errors.
///
/// # Safety
/// `x` must point to `n_rows * n_cols` values, `y` to `n_rows` values; `out`
/// must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sf_regression_fit(
    x: *const f64,
    y: *const f64,
    n_rows: usize,
    n_cols: usize,
    robust: bool,
    out: *mut *mut SfRegression,
) -> SfStatus {
    guard(|| {
        non_null(out, "out")?;
        let cells = n_rows
            .checked_mul(n_cols)
            .ok_or_else(|| Failure(SfStatus::Domain, "matrix size overflows".into()))?;
        let x = slice_arg(x, cells, "x")?;
        let y = slice_arg(y, n_rows, "y")?;
        let rows: Vec<Vec<f64>> = if n_cols == 0 {
            vec![Vec::new(); n_rows]
        } else {
            x.chunks(n_cols).map(<[f64]>::to_vec).collect()
        };
        let names: Vec<String> = (0..n_cols).map(|i| format!("x{i}")).collect();
        let covariance = if robust {
            Covariance::Robust
        } else {
            Covariance::Classical
        };
        let fit = ols_through_origin(&rows, y, &names, covariance)?;
        *out = Box::into_raw(Box::new(SfRegression(fit)));
        Ok(())
    })
}

/// # Safety
/// `fit` must be NULL or a handle that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn sf_regression_free(fit: *mut SfRegression) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Estimate, standard error, t statistic and two-sided p-value of
/// coefficient `index`. Any of the out pointers may be NULL.
///
/// # Safety
/// `fit` must be a live handle; non-NULL out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sf_regression_coefficient(
    fit: *const SfRegression,
    index: usize,
    estimate: *mut f64,
    std_error: *mut f64,
    t_stat: *mut f64,
    p_value: *mut f64,
) -> SfStatus {
    guard(|| {
        non_null(fit, "fit")?;
        let coefficients = &(*fit).0.coefficients;
        let c = coefficients.get(index).ok_or_else(|| {
            Failure(
                SfStatus::Domain,
                format!(
                    "coefficient {index} out of range for {}",
                    coefficients.len()
                ),
            )
        })?;
        for (slot, value) in [
            (estimate, c.estimate),
            (std_error, c.std_error),
            (t_stat, c.t_stat),
            (p_value, c.p_value),
        ] {
            if !slot.is_null() {
                *slot = value;
            }
        }
        Ok(())
    })
}

/// Uncentered R² and its adjusted value. Either out pointer may be NULL.
///
/// # Safety
/// `fit` must be a live handle; non-NULL out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sf_regression_r2(
    fit: *const SfRegression,
    r2: *mut f64,
    adjusted_r2: *mut f64,
) -> SfStatus {
    guard(|| {
        non_null(fit, "fit")?;
        if !r2.is_null() {
            *r2 = (*fit).0.r2;
        }
        if !adjusted_r2.is_null() {
            *adjusted_r2 = (*fit).0.adjusted_r2;
        }
        Ok(())
    })
}

/// Prediction for one row of `n_values` regressor values.
///
/// # Safety
/// `fit` must be a live handle, `values` must point to `n_values` values and
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sf_regression_predict(
    fit: *const SfRegression,
    values: *const f64,
    n_values: usize,
    out: *mut f64,
) -> SfStatus {
    guard(|| {
        non_null(fit, "fit")?;
        non_null(out, "out")?;
        let values = slice_arg(values, n_values, "values")?;
        *out = (*fit).0.predict_values(values)?;
        Ok(())
    })
}

/// Empirical distribution of a sample.
pub struct SfEcdf(EmpiricalCdf);

/// # Safety
/// `values` must point to `n` values; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sf_ecdf_new(
    values: *const f64,
    n: usize,
    out: *mut *mut SfEcdf,
) -> SfStatus {
    guard(|| {
        non_null(out, "out")?;
        let values = slice_arg(values, n, "values")?;
        let cdf = EmpiricalCdf::new(values.iter().copied())?;
        *out = Box::into_raw(Box::new(SfEcdf(cdf)));
        Ok(())
    })
}

/// # Safety
/// `cdf` must be NULL or a handle that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn sf_ecdf_free(cdf: *mut SfEcdf) {
    if !cdf.is_null() {
        drop(Box::from_raw(cdf));
    }
}

/// Fraction of sample values `<= x`.
///
/// # Safety
/// `cdf` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sf_ecdf_cdf(cdf: *const SfEcdf, x: f64, out: *mut f64) -> SfStatus {
    guard(|| {
        non_null(cdf, "cdf")?;
        non_null(out, "out")?;
        *out = (*cdf).0.cdf(x);
        Ok(())
    })
}

/// Smallest sample value whose cumulative share reaches `u`, for `u` in
/// [0, 1).
///
/// # Safety
/// `cdf` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sf_ecdf_inverse(cdf: *const SfEcdf, u: f64, out: *mut f64) -> SfStatus {
    guard(|| {
        non_null(cdf, "cdf")?;
        non_null(out, "out")?;
        *out = (*cdf).0.inverse(u)?;
        Ok(())
    })
}

/// Company count implied by a planned capacity.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SfCompanyEstimate {
    /// planned / coefficient.
    pub point: f64,
    /// `point` rounded half up.
    pub rounded: u64,
    /// Mean over the coefficient draws.
    pub mean: f64,
    /// Standard deviation over the coefficient draws.
    pub sd: f64,
}

/// Additional companies implied by `planned_kt` of new capacity, given a
/// per-firm coefficient with its standard deviation, using `draws` seeded
/// coefficient draws for the spread.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sf_additional_companies(
    planned_kt: f64,
    coefficient: f64,
    coefficient_sd: f64,
    draws: usize,
    seed: u64,
    out: *mut SfCompanyEstimate,
) -> SfStatus {
    guard(|| {
        non_null(out, "out")?;
        let plan = CapacityPlan::new("", planned_kt)?;
        let coef = FirmCoefficient {
            estimate: coefficient,
            sd: coefficient_sd,
        };
        let e = additional_companies(&plan, coef, draws, seed)?;
        *out = SfCompanyEstimate {
            point: e.point,
            rounded: e.rounded,
            mean: e.mean,
            sd: e.sd,
        };
        Ok(())
    })
}
