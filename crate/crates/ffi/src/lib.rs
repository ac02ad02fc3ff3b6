//! C ABI for the riskinf library.
//!
//! Scenario sets cross the boundary as opaque handles; everything else is
//! plain C structs, enums and UTF-8 strings. Every function returns an
//! [`RiStatus`] code and writes results through out-pointers. Strings
//! returned by this library must be released with [`ri_string_free`],
//! scenario handles with [`ri_scenario_free`].

use std::ffi::{c_char, CStr, CString};

use riskinf::error::Error;
use riskinf::gaussian::{
    normal_cvar_coeff, normal_quantile, reproduce_table3_scaled, solve_gaussian, table3_csv,
    Boundary, GaussianPortfolioParams,
};
use riskinf::risk::{
    closed_form_risk, evaluate_risk, safety_measure, OceUtility, RiskEvaluation, RiskSpec,
};
use riskinf::scenario::ScenarioSet;
use riskinf::solver::{solve, LinearPayoffProblem, SolveOptions};

/// Call outcome.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    Unsupported = 4,
    NumericalFailure = 5,
}

fn status_of(err: &Error) -> RiStatus {
    match err {
        Error::CsvParse { .. }
        | Error::NoScenarios
        | Error::ProbabilitySum { .. }
        | Error::NegativeProbability { .. }
        | Error::NonFiniteValue { .. }
        | Error::LengthMismatch { .. } => RiStatus::ParseError,
        Error::ClosedFormUnavailable => RiStatus::Unsupported,
        Error::BracketExpansion(_) => RiStatus::NumericalFailure,
        _ => RiStatus::InvalidArgument,
    }
}

/// Opaque scenario-set handle.
pub struct RiScenarioSet {
    inner: ScenarioSet,
}

/// Risk kinds addressable through the plain-C entry points.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiRiskKind {
    Variance = 0,
    Cvar = 1,
    Wmd = 2,
}

/// Mirror of a risk evaluation.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RiRiskEvaluation {
    pub value: f64,
    pub eta_star: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub iterations: u32,
}

impl From<RiskEvaluation> for RiRiskEvaluation {
    fn from(eval: RiskEvaluation) -> Self {
        RiRiskEvaluation {
            value: eval.value,
            eta_star: eval.eta_star,
            bracket_lo: eval.bracket.0,
            bracket_hi: eval.bracket.1,
            iterations: eval.iterations,
        }
    }
}

/// Mirror of the closed-form two-asset solution.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RiGaussianSolution {
    pub a_sharp: f64,
    pub lambda_sharp: f64,
    pub eta_sharp: f64,
    pub theta: f64,
    pub c_p: f64,
    pub value: f64,
    pub boundary: RiBoundary,
}

/// Where the optimal weight lands.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiBoundary {
    Interior = 0,
    AtZero = 1,
    AtOne = 2,
    Infeasible = 3,
}

impl From<Boundary> for RiBoundary {
    fn from(b: Boundary) -> Self {
        match b {
            Boundary::Interior => RiBoundary::Interior,
            Boundary::AtZero => RiBoundary::AtZero,
            Boundary::AtOne => RiBoundary::AtOne,
            Boundary::Infeasible => RiBoundary::Infeasible,
        }
    }
}

fn spec_for(kind: RiRiskKind, p: f64) -> RiskSpec {
    match kind {
        RiRiskKind::Variance => RiskSpec::Variance,
        RiRiskKind::Cvar => RiskSpec::Cvar { p },
        RiRiskKind::Wmd => RiskSpec::Wmd { p },
    }
}

unsafe fn write_out<T>(out: *mut T, value: T) -> RiStatus {
    if out.is_null() {
        return RiStatus::NullPointer;
    }
    out.write(value);
    RiStatus::Ok
}

unsafe fn write_handle(out: *mut *mut RiScenarioSet, set: ScenarioSet) -> RiStatus {
    if out.is_null() {
        return RiStatus::NullPointer;
    }
    out.write(Box::into_raw(Box::new(RiScenarioSet { inner: set })));
    RiStatus::Ok
}

unsafe fn write_string(out: *mut *mut c_char, text: String) -> RiStatus {
    if out.is_null() {
        return RiStatus::NullPointer;
    }
    match CString::new(text) {
        Ok(s) => {
            out.write(s.into_raw());
            RiStatus::Ok
        }
        Err(_) => RiStatus::InvalidArgument,
    }
}

/// Builds a scenario set from parallel `values`/`probs` arrays of length `len`.
///
/// # Safety
/// `values` and `probs` must point to `len` readable doubles; `out` must be
/// a valid out-pointer. The returned handle must be freed with
/// [`ri_scenario_free`].
#[no_mangle]
pub unsafe extern "C" fn ri_scenario_new(
    values: *const f64,
    probs: *const f64,
    len: usize,
    out: *mut *mut RiScenarioSet,
) -> RiStatus {
    if values.is_null() || probs.is_null() {
        return RiStatus::NullPointer;
    }
    let values = std::slice::from_raw_parts(values, len).to_vec();
    let probs = std::slice::from_raw_parts(probs, len).to_vec();
    match ScenarioSet::new(values, probs) {
        Ok(set) => write_handle(out, set),
        Err(e) => status_of(&e),
    }
}

/// Parses a `value,prob` CSV (with header) from a NUL-terminated UTF-8 string.
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `out` as in
/// [`ri_scenario_new`].
#[no_mangle]
pub unsafe extern "C" fn ri_scenario_from_csv(
    text: *const c_char,
    out: *mut *mut RiScenarioSet,
) -> RiStatus {
    if text.is_null() {
        return RiStatus::NullPointer;
    }
    let text = match CStr::from_ptr(text).to_str() {
        Ok(t) => t,
        Err(_) => return RiStatus::ParseError,
    };
    match ScenarioSet::from_csv(text) {
        Ok(set) => write_handle(out, set),
        Err(e) => status_of(&e),
    }
}

/// Draws `n` equiprobable Normal(mean, std^2) atoms; identical seeds give
/// identical sets.
///
/// # Safety
/// `out` as in [`ri_scenario_new`].
#[no_mangle]
pub unsafe extern "C" fn ri_scenario_sample_normal(
    mean: f64,
    std: f64,
    n: usize,
    seed: u64,
    out: *mut *mut RiScenarioSet,
) -> RiStatus {
    match ScenarioSet::sample_normal(mean, std, n, seed) {
        Ok(set) => write_handle(out, set),
        Err(e) => status_of(&e),
    }
}

/// Maps a scenario set through `x -> scale*x + shift` into a new handle.
///
/// # Safety
/// `set` must be a live handle from this library; `out` as in
/// [`ri_scenario_new`].
#[no_mangle]
pub unsafe extern "C" fn ri_scenario_affine(
    set: *const RiScenarioSet,
    scale: f64,
    shift: f64,
    out: *mut *mut RiScenarioSet,
) -> RiStatus {
    if set.is_null() {
        return RiStatus::NullPointer;
    }
    write_handle(out, (*set).inner.affine(scale, shift))
}

/// Number of atoms in a scenario set; 0 for a null handle.
///
/// # Safety
/// `set` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn ri_scenario_len(set: *const RiScenarioSet) -> usize {
    if set.is_null() {
        0
    } else {
        (*set).inner.len()
    }
}

/// Releases a scenario handle. Null is a no-op.
///
/// # Safety
/// `set` must be null or a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ri_scenario_free(set: *mut RiScenarioSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Generic minimization of `eta -> E[rho(X, eta)]`. `p` is ignored for the
/// variance kind.
///
/// # Safety
/// `set` must be a live handle; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn ri_risk_evaluate(
    kind: RiRiskKind,
    p: f64,
    set: *const RiScenarioSet,
    tol: f64,
    out: *mut RiRiskEvaluation,
) -> RiStatus {
    if set.is_null() {
        return RiStatus::NullPointer;
    }
    match evaluate_risk(&spec_for(kind, p), &(*set).inner, tol) {
        Ok(eval) => write_out(out, eval.into()),
        Err(e) => status_of(&e),
    }
}

/// Generic minimization for the optimized-certainty-equivalent kernel with
/// a piecewise-linear utility (`n_slopes == n_breakpoints + 1`).
///
/// # Safety
/// `breakpoints`/`slopes` must point to the stated number of readable
/// doubles; `set` and `out` as in [`ri_risk_evaluate`].
#[no_mangle]
pub unsafe extern "C" fn ri_risk_evaluate_oce(
    breakpoints: *const f64,
    n_breakpoints: usize,
    slopes: *const f64,
    n_slopes: usize,
    set: *const RiScenarioSet,
    tol: f64,
    out: *mut RiRiskEvaluation,
) -> RiStatus {
    if breakpoints.is_null() || slopes.is_null() || set.is_null() {
        return RiStatus::NullPointer;
    }
    let breakpoints = std::slice::from_raw_parts(breakpoints, n_breakpoints).to_vec();
    let slopes = std::slice::from_raw_parts(slopes, n_slopes).to_vec();
    let utility = match OceUtility::new(breakpoints, slopes) {
        Ok(u) => u,
        Err(e) => return status_of(&e),
    };
    match evaluate_risk(&RiskSpec::Oce { utility }, &(*set).inner, tol) {
        Ok(eval) => write_out(out, eval.into()),
        Err(e) => status_of(&e),
    }
}

/// Closed-form risk for variance/cvar/wmd.
///
/// # Safety
/// `set` must be a live handle; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn ri_risk_closed_form(
    kind: RiRiskKind,
    p: f64,
    set: *const RiScenarioSet,
    out: *mut RiRiskEvaluation,
) -> RiStatus {
    if set.is_null() {
        return RiStatus::NullPointer;
    }
    match closed_form_risk(&spec_for(kind, p), &(*set).inner) {
        Ok(eval) => write_out(out, eval.into()),
        Err(e) => status_of(&e),
    }
}

/// Safety measure `S(X) = -Risk(-X)`.
///
/// # Safety
/// `set` must be a live handle; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn ri_safety_measure(
    kind: RiRiskKind,
    p: f64,
    set: *const RiScenarioSet,
    tol: f64,
    out: *mut f64,
) -> RiStatus {
    if set.is_null() {
        return RiStatus::NullPointer;
    }
    match safety_measure(&spec_for(kind, p), &(*set).inner, tol) {
        Ok(value) => write_out(out, value),
        Err(e) => status_of(&e),
    }
}

/// Standard Normal quantile.
///
/// # Safety
/// `out` must be a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn ri_normal_quantile(q: f64, out: *mut f64) -> RiStatus {
    match normal_quantile(q) {
        Ok(z) => write_out(out, z),
        Err(e) => status_of(&e),
    }
}

/// Standard Normal CVaR coefficient `phi(quantile(p)) / (1 - p)`.
///
/// # Safety
/// `out` must be a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn ri_normal_cvar_coeff(p: f64, out: *mut f64) -> RiStatus {
    match normal_cvar_coeff(p) {
        Ok(c) => write_out(out, c),
        Err(e) => status_of(&e),
    }
}

/// Closed-form two-asset portfolio under a CVaR bound. Infeasible problems
/// come back with `boundary == Infeasible` and NaN decision fields, not an
/// error status.
///
/// # Safety
/// `out` must be a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn ri_gaussian_solve(
    xi0: f64,
    mean: f64,
    sigma: f64,
    p: f64,
    gamma: f64,
    out: *mut RiGaussianSolution,
) -> RiStatus {
    let params = match GaussianPortfolioParams::new(xi0, mean, sigma, p, gamma) {
        Ok(params) => params,
        Err(e) => return status_of(&e),
    };
    let sol = solve_gaussian(&params);
    write_out(
        out,
        RiGaussianSolution {
            a_sharp: sol.a_sharp,
            lambda_sharp: sol.lambda_sharp,
            eta_sharp: sol.eta_sharp,
            theta: sol.theta,
            c_p: sol.c_p,
            value: sol.value,
            boundary: sol.boundary.into(),
        },
    )
}

/// Reference-table reproduction as a CSV string (see the library docs for
/// the column layout). Free the string with [`ri_string_free`].
///
/// # Safety
/// `out` must be a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn ri_table3_csv(tolerance_scale: f64, out: *mut *mut c_char) -> RiStatus {
    if !(tolerance_scale >= 0.0) {
        return RiStatus::InvalidArgument;
    }
    write_string(out, table3_csv(&reproduce_table3_scaled(tolerance_scale)))
}

/// Solves a risk-constrained linear payoff problem given as JSON and returns
/// the result as JSON (the same schemas the CLI uses). Free the string with
/// [`ri_string_free`].
///
/// # Safety
/// `problem_json` must be a valid NUL-terminated string; `out_json` a valid
/// out-pointer.
#[no_mangle]
pub unsafe extern "C" fn ri_solve_json(
    problem_json: *const c_char,
    out_json: *mut *mut c_char,
) -> RiStatus {
    if problem_json.is_null() {
        return RiStatus::NullPointer;
    }
    let text = match CStr::from_ptr(problem_json).to_str() {
        Ok(t) => t,
        Err(_) => return RiStatus::ParseError,
    };
    let problem: LinearPayoffProblem = match serde_json::from_str(text) {
        Ok(p) => p,
        Err(_) => return RiStatus::ParseError,
    };
    let result = match solve(&problem, &SolveOptions::default()) {
        Ok(r) => r,
        Err(e) => return status_of(&e),
    };
    let json = serde_json::to_string_pretty(&result).expect("serializable result");
    write_string(out_json, json)
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ri_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
