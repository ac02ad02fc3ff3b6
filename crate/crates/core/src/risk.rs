//! Risk measures of the form `Risk(X) = inf over eta of E[rho(X, eta)]`.
//!
//! Four kernels `rho` are supported:
//!
//! | kind     | rho(x, eta)                                  |
//! |----------|----------------------------------------------|
//! | variance | `(x - eta)^2`                                |
//! | cvar     | `eta + (x - eta)_+ / (1 - p)`                |
//! | wmd      | `max{ p(x - eta), (1 - p)(eta - x) }`        |
//! | oce      | `eta - u(eta - x)` for a concave utility `u` |
//!
//! Each is convex in `eta` and the expectation diverges as `eta -> +inf`, so
//! on a finite scenario set the infimum is attained. [`evaluate_risk`]
//! minimizes the 1-D expectation generically by golden-section search;
//! [`closed_form_risk`] evaluates variance/cvar/wmd exactly through the mean
//! and the left quantile and serves as the generic path's oracle.
//!
//! Atoms are canonicalized (sorted by value, then probability) before any
//! accumulation, so results do not depend on atom order, down to the bit.

use crate::error::{Error, Result};
use crate::scenario::ScenarioSet;

/// Default relative tolerance for the golden-section search.
pub const DEFAULT_RISK_TOL: f64 = 1e-10;

/// Cap on bracket doublings before the search concedes that the objective
/// keeps decreasing (a kernel violating the growth assumption).
const MAX_BRACKET_DOUBLINGS: u32 = 60;

const MAX_GOLDEN_ITERS: u32 = 500;

/// Tagged description of a risk measure.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RiskSpec {
    Variance,
    Cvar { p: f64 },
    Wmd { p: f64 },
    Oce { utility: OceUtility },
}

impl RiskSpec {
    /// Confidence-level bounds for cvar/wmd. OCE utilities are validated at
    /// construction, including through deserialization.
    pub fn validate(&self) -> Result<()> {
        match self {
            RiskSpec::Variance | RiskSpec::Oce { .. } => Ok(()),
            RiskSpec::Cvar { p } | RiskSpec::Wmd { p } => {
                if *p > 0.0 && *p < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "confidence level must lie in (0, 1), got {p}"
                    )))
                }
            }
        }
    }
}

impl std::fmt::Display for RiskSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RiskSpec::Variance => write!(f, "variance"),
            RiskSpec::Cvar { p } => write!(f, "cvar(p={p})"),
            RiskSpec::Wmd { p } => write!(f, "wmd(p={p})"),
            RiskSpec::Oce { .. } => write!(f, "oce"),
        }
    }
}

/// Piecewise-linear concave nondecreasing utility `u` with `u(0) = 0` and
/// `1` in the subdifferential at 0.
///
/// `slopes` has one entry more than `breakpoints`: slope `i` applies between
/// breakpoints `i-1` and `i`. Slopes decrease strictly (concavity), stay
/// nonnegative (nondecreasing `u`), and the rightmost slope is below 1 so
/// that `eta - E[u(eta - x)]` grows at `+inf`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "RawOceUtility", into = "RawOceUtility")]
pub struct OceUtility {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    /// u at each breakpoint, anchored so that u(0) = 0.
    knots: Vec<f64>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct RawOceUtility {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
}

impl TryFrom<RawOceUtility> for OceUtility {
    type Error = Error;
    fn try_from(raw: RawOceUtility) -> Result<Self> {
        OceUtility::new(raw.breakpoints, raw.slopes)
    }
}

impl From<OceUtility> for RawOceUtility {
    fn from(u: OceUtility) -> Self {
        RawOceUtility {
            breakpoints: u.breakpoints,
            slopes: u.slopes,
        }
    }
}

impl OceUtility {
    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "need one slope more than breakpoints, got {} slopes for {} breakpoints",
                slopes.len(),
                breakpoints.len()
            )));
        }
        if breakpoints.is_empty() {
            return Err(Error::InvalidParameter(
                "utility needs at least one breakpoint".into(),
            ));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) || slopes.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(
                "utility breakpoints and slopes must be finite".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "breakpoints must increase strictly".into(),
            ));
        }
        if slopes.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidParameter(
                "slopes must decrease strictly (concavity)".into(),
            ));
        }
        if slopes.iter().any(|&s| s < 0.0) {
            return Err(Error::InvalidParameter(
                "slopes must be nonnegative (nondecreasing utility)".into(),
            ));
        }
        let last = *slopes.last().expect("nonempty slopes");
        if last >= 1.0 {
            return Err(Error::InvalidParameter(
                "rightmost slope must be below 1".into(),
            ));
        }
        // 1 must be a subgradient at 0.
        let idx = breakpoints.partition_point(|&b| b < 0.0);
        let ok = if idx < breakpoints.len() && breakpoints[idx] == 0.0 {
            slopes[idx] >= 1.0 && slopes[idx + 1] <= 1.0
        } else {
            slopes[idx] == 1.0
        };
        if !ok {
            return Err(Error::InvalidParameter(
                "1 must be a subgradient of the utility at 0".into(),
            ));
        }

        let mut knots = vec![0.0; breakpoints.len()];
        for j in 1..breakpoints.len() {
            knots[j] = knots[j - 1] + slopes[j] * (breakpoints[j] - breakpoints[j - 1]);
        }
        let mut u = OceUtility {
            breakpoints,
            slopes,
            knots,
        };
        let at_zero = u.raw(0.0);
        for k in &mut u.knots {
            *k -= at_zero;
        }
        Ok(u)
    }

    // Piecewise value relative to the first knot; binary search for the segment.
    fn raw(&self, t: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&b| b < t);
        if idx == 0 {
            self.knots[0] + self.slopes[0] * (t - self.breakpoints[0])
        } else {
            self.knots[idx - 1] + self.slopes[idx] * (t - self.breakpoints[idx - 1])
        }
    }

    /// u(t).
    pub fn value(&self, t: f64) -> f64 {
        self.raw(t)
    }

    /// A subgradient of u at `t` (the right slope at breakpoints).
    pub fn slope_at(&self, t: f64) -> f64 {
        self.slopes[self.breakpoints.partition_point(|&b| b <= t)]
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }
}

/// Outcome of a risk evaluation: the value, a minimizer, the search interval
/// and the iteration count.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RiskEvaluation {
    pub value: f64,
    pub eta_star: f64,
    pub bracket: (f64, f64),
    pub iterations: u32,
}

/// The kernel `rho(x, eta)`. Total on finite inputs.
pub fn rho(spec: &RiskSpec, x: f64, eta: f64) -> f64 {
    match spec {
        RiskSpec::Variance => (x - eta) * (x - eta),
        RiskSpec::Cvar { p } => eta + (x - eta).max(0.0) / (1.0 - p),
        RiskSpec::Wmd { p } => (p * (x - eta)).max((1.0 - p) * (eta - x)),
        RiskSpec::Oce { utility } => eta - utility.value(eta - x),
    }
}

/// A subgradient of `x -> rho(x, eta)`, used by the solver's ascent steps.
pub(crate) fn rho_dx(spec: &RiskSpec, x: f64, eta: f64) -> f64 {
    match spec {
        RiskSpec::Variance => 2.0 * (x - eta),
        RiskSpec::Cvar { p } => {
            if x > eta {
                1.0 / (1.0 - p)
            } else {
                0.0
            }
        }
        RiskSpec::Wmd { p } => {
            if p * (x - eta) >= (1.0 - p) * (eta - x) {
                *p
            } else {
                -(1.0 - p)
            }
        }
        RiskSpec::Oce { utility } => utility.slope_at(eta - x),
    }
}

// Atoms sorted by (value, prob): a canonical order that makes every
// accumulation independent of the caller's atom order.
fn canonical_atoms(x: &ScenarioSet) -> Vec<(f64, f64)> {
    let mut atoms: Vec<(f64, f64)> = x.atoms().collect();
    atoms.sort_by(|a, b| a.partial_cmp(b).expect("atoms are finite"));
    atoms
}

fn value_range(atoms: &[(f64, f64)]) -> (f64, f64) {
    (atoms[0].0, atoms[atoms.len() - 1].0)
}

pub(crate) struct GoldenResult {
    pub x: f64,
    pub value: f64,
    pub iterations: u32,
}

/// Golden-section minimization on `[lo, hi]`, returning the best probed
/// point (so the reported value never exceeds any probed objective).
pub(crate) fn golden_section_min(
    mut f: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    width_tol: f64,
    max_iters: u32,
) -> GoldenResult {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INVPHI * (hi - lo);
    let mut x2 = lo + INVPHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let (mut best_x, mut best_f) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    let mut iterations = 0;
    while hi - lo > width_tol && iterations < max_iters {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INVPHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INVPHI * (hi - lo);
            f2 = f(x2);
        }
        let (x, fx) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
        if fx < best_f {
            best_f = fx;
            best_x = x;
        }
        iterations += 1;
    }
    GoldenResult {
        x: best_x,
        value: best_f,
        iterations,
    }
}

/// Minimizes `eta -> E[rho(X, eta)]` by bracketed golden-section search.
///
/// The initial bracket is the value range padded by `range + 1` on both
/// sides; it is doubled towards the decreasing side while the midpoint is
/// not interior-optimal, up to [`MAX_BRACKET_DOUBLINGS`] times. Termination:
/// bracket width at most `tol * (1 + |min X| + |max X|)`.
pub fn evaluate_risk(spec: &RiskSpec, x: &ScenarioSet, tol: f64) -> Result<RiskEvaluation> {
    spec.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let atoms = canonical_atoms(x);
    let (min_x, max_x) = value_range(&atoms);
    let objective = |eta: f64| -> f64 { atoms.iter().map(|&(v, p)| p * rho(spec, v, eta)).sum() };

    let range = max_x - min_x + 1.0;
    let mut lo = min_x - range;
    let mut hi = max_x + range;
    let mut f_lo = objective(lo);
    let mut f_hi = objective(hi);
    let mut doublings = 0;
    let (mut best_eta, mut best_f) = if f_lo <= f_hi { (lo, f_lo) } else { (hi, f_hi) };
    loop {
        let mid = 0.5 * (lo + hi);
        let f_mid = objective(mid);
        if f_mid < best_f {
            best_f = f_mid;
            best_eta = mid;
        }
        if f_mid <= f_lo && f_mid <= f_hi {
            break;
        }
        if doublings >= MAX_BRACKET_DOUBLINGS {
            return Err(Error::BracketExpansion(doublings));
        }
        let width = hi - lo;
        if f_lo < f_hi {
            lo -= width;
            f_lo = objective(lo);
        } else {
            hi += width;
            f_hi = objective(hi);
        }
        doublings += 1;
    }

    let width_tol = tol * (1.0 + min_x.abs() + max_x.abs());
    let golden = golden_section_min(objective, lo, hi, width_tol, MAX_GOLDEN_ITERS);
    let (eta_star, value) = if golden.value <= best_f {
        (golden.x, golden.value)
    } else {
        (best_eta, best_f)
    };
    Ok(RiskEvaluation {
        value,
        eta_star,
        bracket: (lo, hi),
        iterations: golden.iterations,
    })
}

// Smallest value whose cumulative probability reaches `p`, on atoms already
// in canonical order.
fn left_quantile(atoms: &[(f64, f64)], p: f64) -> f64 {
    let mut cum = 0.0;
    for &(v, q) in atoms {
        cum += q;
        if cum >= p {
            return v;
        }
    }
    atoms[atoms.len() - 1].0
}

/// Exact evaluation for variance, cvar and wmd.
///
/// Variance attains at the mean; cvar and wmd attain at the left
/// `p`-quantile (the minimizing set is an interval and this picks its left
/// end). OCE has no generic closed form and is rejected.
pub fn closed_form_risk(spec: &RiskSpec, x: &ScenarioSet) -> Result<RiskEvaluation> {
    spec.validate()?;
    let atoms = canonical_atoms(x);
    let (min_x, max_x) = value_range(&atoms);
    let mean: f64 = atoms.iter().map(|&(v, p)| p * v).sum();

    let (value, eta_star) = match spec {
        RiskSpec::Variance => {
            let var: f64 = atoms.iter().map(|&(v, p)| p * (v - mean) * (v - mean)).sum();
            (var, mean)
        }
        RiskSpec::Cvar { p } => {
            let q = left_quantile(&atoms, *p);
            let tail: f64 = atoms.iter().map(|&(v, w)| w * (v - q).max(0.0)).sum();
            (q + tail / (1.0 - p), q)
        }
        RiskSpec::Wmd { p } => {
            let q = left_quantile(&atoms, *p);
            // integral of the quantile function over [0, p]
            let mut integral = 0.0;
            let mut cum = 0.0;
            for &(v, w) in &atoms {
                let upper = (cum + w).min(*p);
                if upper > cum {
                    integral += v * (upper - cum);
                }
                cum += w;
                if cum >= *p {
                    break;
                }
            }
            (mean * p - integral, q)
        }
        RiskSpec::Oce { .. } => return Err(Error::ClosedFormUnavailable),
    };
    Ok(RiskEvaluation {
        value,
        eta_star,
        bracket: (min_x, max_x),
        iterations: 0,
    })
}

/// Risk value only, preferring the closed form where one exists.
pub fn risk_value(spec: &RiskSpec, x: &ScenarioSet, tol: f64) -> Result<f64> {
    match spec {
        RiskSpec::Oce { .. } => Ok(evaluate_risk(spec, x, tol)?.value),
        _ => Ok(closed_form_risk(spec, x)?.value),
    }
}

/// Safety measure `S(X) = -Risk(-X)`.
pub fn safety_measure(spec: &RiskSpec, x: &ScenarioSet, tol: f64) -> Result<f64> {
    Ok(-evaluate_risk(spec, &x.affine(-1.0, 0.0), tol)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn equiprobable(values: &[f64]) -> ScenarioSet {
        let n = values.len();
        ScenarioSet::new(values.to_vec(), vec![1.0 / n as f64; n]).unwrap()
    }

    fn half_utility() -> OceUtility {
        OceUtility::new(vec![0.0], vec![1.0, 0.5]).unwrap()
    }

    // Brute-force oracle: minimize E[rho] over a uniform eta grid.
    fn grid_oracle(spec: &RiskSpec, x: &ScenarioSet, lo: f64, hi: f64, points: usize) -> f64 {
        (0..points)
            .map(|i| {
                let eta = lo + (hi - lo) * i as f64 / (points - 1) as f64;
                x.expectation(|v| rho(spec, v, eta))
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn rho_matches_hand_evaluations() {
        assert_eq!(rho(&RiskSpec::Variance, 3.0, 1.0), 4.0);
        assert_abs_diff_eq!(
            rho(&RiskSpec::Cvar { p: 0.95 }, 10.0, 0.0),
            200.0,
            epsilon = 1e-12
        );
        assert_eq!(rho(&RiskSpec::Wmd { p: 0.5 }, 0.0, 2.0), 1.0);
    }

    #[test]
    fn variance_on_two_atoms() {
        let eval = evaluate_risk(&RiskSpec::Variance, &equiprobable(&[1.0, 3.0]), 1e-10).unwrap();
        assert_abs_diff_eq!(eval.value, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(eval.eta_star, 2.0, epsilon = 1e-6);
        assert!(eval.eta_star >= eval.bracket.0 && eval.eta_star <= eval.bracket.1);
    }

    #[test]
    fn cvar_on_two_atoms_matches_grid_oracle() {
        let spec = RiskSpec::Cvar { p: 0.9 };
        let set = equiprobable(&[0.0, 10.0]);
        let oracle = grid_oracle(&spec, &set, -5.0, 15.0, 20_001);
        let eval = evaluate_risk(&spec, &set, 1e-10).unwrap();
        assert_abs_diff_eq!(eval.value, oracle, epsilon = 1e-6);
        assert_abs_diff_eq!(eval.value, 10.0, epsilon = 1e-6);
    }

    #[test]
    fn degenerate_single_atom() {
        let set = equiprobable(&[7.5]);
        let var = evaluate_risk(&RiskSpec::Variance, &set, 1e-10).unwrap();
        assert!(var.value.abs() < 1e-12);
        let cvar = evaluate_risk(&RiskSpec::Cvar { p: 0.9 }, &set, 1e-10).unwrap();
        assert_abs_diff_eq!(cvar.value, 7.5, epsilon = 1e-8);
        let wmd = evaluate_risk(&RiskSpec::Wmd { p: 0.5 }, &set, 1e-10).unwrap();
        assert!(wmd.value.abs() < 1e-10);
    }

    #[test]
    fn wmd_on_bernoulli() {
        let eval =
            evaluate_risk(&RiskSpec::Wmd { p: 0.5 }, &equiprobable(&[0.0, 1.0]), 1e-10).unwrap();
        assert_abs_diff_eq!(eval.value, 0.25, epsilon = 1e-9);
        let cf = closed_form_risk(&RiskSpec::Wmd { p: 0.5 }, &equiprobable(&[0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(cf.value, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn closed_form_hand_values() {
        let set = equiprobable(&[0.0, 10.0]);
        let var = closed_form_risk(&RiskSpec::Variance, &set).unwrap();
        assert_eq!(var.value, 25.0);
        assert_eq!(var.eta_star, 5.0);
        let cvar = closed_form_risk(&RiskSpec::Cvar { p: 0.5 }, &set).unwrap();
        assert_eq!(cvar.value, 10.0);
        assert_eq!(cvar.eta_star, 0.0);
    }

    #[test]
    fn closed_form_rejects_oce() {
        let spec = RiskSpec::Oce {
            utility: half_utility(),
        };
        assert!(matches!(
            closed_form_risk(&spec, &equiprobable(&[1.0])),
            Err(Error::ClosedFormUnavailable)
        ));
    }

    #[test]
    fn safety_measure_hand_values() {
        let oce = RiskSpec::Oce {
            utility: half_utility(),
        };
        for c in [-3.0, 0.5, 7.0] {
            assert_abs_diff_eq!(
                safety_measure(&oce, &equiprobable(&[c]), 1e-10).unwrap(),
                c,
                epsilon = 1e-7
            );
        }
        assert_abs_diff_eq!(
            safety_measure(&RiskSpec::Variance, &equiprobable(&[1.0, 3.0]), 1e-10).unwrap(),
            -1.0,
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(
            safety_measure(&RiskSpec::Cvar { p: 0.9 }, &equiprobable(&[0.0, 10.0]), 1e-10)
                .unwrap(),
            0.0,
            epsilon = 1e-7
        );
    }

    #[test]
    fn bracket_expansion_fails_on_malformed_utility() {
        // Built directly to bypass validation: rightmost slope above 1 makes
        // the objective decrease without bound.
        let utility = OceUtility {
            breakpoints: vec![0.0],
            slopes: vec![2.0, 1.5],
            knots: vec![0.0],
        };
        let spec = RiskSpec::Oce { utility };
        assert!(matches!(
            evaluate_risk(&spec, &equiprobable(&[0.0, 1.0]), 1e-10),
            Err(Error::BracketExpansion(_))
        ));
    }

    #[test]
    fn oce_utility_validation() {
        assert!(OceUtility::new(vec![0.0], vec![1.0, 0.5]).is_ok());
        assert!(OceUtility::new(vec![-1.0, 0.0], vec![2.0, 1.0, 0.25]).is_ok());
        // slope count mismatch
        assert!(OceUtility::new(vec![0.0], vec![1.0]).is_err());
        // non-increasing slopes
        assert!(OceUtility::new(vec![0.0], vec![0.5, 0.5]).is_err());
        // rightmost slope not below 1
        assert!(OceUtility::new(vec![0.0], vec![2.0, 1.0]).is_err());
        // negative slope
        assert!(OceUtility::new(vec![0.0], vec![1.0, -0.25]).is_err());
        // 1 not a subgradient at 0
        assert!(OceUtility::new(vec![5.0], vec![2.0, 0.5]).is_err());
        // unordered breakpoints
        assert!(OceUtility::new(vec![1.0, 0.0], vec![1.5, 1.0, 0.5]).is_err());
    }

    #[test]
    fn oce_utility_piecewise_values() {
        let u = half_utility();
        assert_eq!(u.value(0.0), 0.0);
        assert_eq!(u.value(2.0), 1.0);
        assert_eq!(u.value(-3.0), -3.0);
        assert_eq!(u.slope_at(-1.0), 1.0);
        assert_eq!(u.slope_at(1.0), 0.5);

        let v = OceUtility::new(vec![-1.0, 0.0, 2.0], vec![3.0, 2.0, 1.0, 0.0]).unwrap();
        assert_eq!(v.value(0.0), 0.0);
        assert_eq!(v.value(2.0), 2.0);
        assert_eq!(v.value(5.0), 2.0);
        assert_eq!(v.value(-1.0), -2.0);
        assert_eq!(v.value(-2.0), -5.0);
    }

    #[test]
    fn oce_risk_of_constant_is_the_constant() {
        let spec = RiskSpec::Oce {
            utility: half_utility(),
        };
        let eval = evaluate_risk(&spec, &equiprobable(&[4.0]), 1e-10).unwrap();
        assert_abs_diff_eq!(eval.value, 4.0, epsilon = 1e-8);
    }

    #[test]
    fn risk_spec_validation() {
        assert!(RiskSpec::Cvar { p: 1.5 }.validate().is_err());
        assert!(RiskSpec::Cvar { p: 0.0 }.validate().is_err());
        assert!(RiskSpec::Wmd { p: 1.0 }.validate().is_err());
        assert!(RiskSpec::Variance.validate().is_ok());
        assert!(evaluate_risk(&RiskSpec::Cvar { p: 1.5 }, &equiprobable(&[1.0]), 1e-10).is_err());
        assert!(evaluate_risk(&RiskSpec::Variance, &equiprobable(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn risk_spec_json_shapes() {
        let spec: RiskSpec = serde_json::from_str(r#"{"kind":"cvar","p":0.95}"#).unwrap();
        assert_eq!(spec, RiskSpec::Cvar { p: 0.95 });
        let spec: RiskSpec = serde_json::from_str(
            r#"{"kind":"oce","utility":{"breakpoints":[0.0],"slopes":[1.0,0.5]}}"#,
        )
        .unwrap();
        assert!(matches!(spec, RiskSpec::Oce { .. }));
        // malformed utilities are rejected at parse time
        assert!(serde_json::from_str::<RiskSpec>(
            r#"{"kind":"oce","utility":{"breakpoints":[0.0],"slopes":[1.0,1.5]}}"#
        )
        .is_err());
    }

    #[test]
    fn upper_bound_property() {
        let mut rng = SplitMix64::new(11);
        let specs = [
            RiskSpec::Variance,
            RiskSpec::Cvar { p: 0.9 },
            RiskSpec::Wmd { p: 0.7 },
            RiskSpec::Oce {
                utility: half_utility(),
            },
        ];
        let values: Vec<f64> = (0..12).map(|_| rng.next_in(-100.0, 100.0)).collect();
        let set = equiprobable(&values);
        for spec in &specs {
            let eval = evaluate_risk(spec, &set, 1e-10).unwrap();
            for _ in 0..100 {
                let eta = rng.next_in(-150.0, 150.0);
                let probe = set.expectation(|v| rho(spec, v, eta));
                assert!(
                    eval.value <= probe + 1e-10 * (1.0 + probe.abs()),
                    "{spec}: value {} exceeds E[rho] {probe} at eta {eta}",
                    eval.value
                );
            }
        }
    }

    #[test]
    fn generic_matches_closed_form_on_random_sets() {
        let mut rng = SplitMix64::new(5);
        let specs = [
            RiskSpec::Variance,
            RiskSpec::Cvar { p: 0.9 },
            RiskSpec::Cvar { p: 0.95 },
            RiskSpec::Wmd { p: 0.5 },
            RiskSpec::Wmd { p: 0.9 },
        ];
        for _ in 0..50 {
            let n = 1 + rng.next_index(50);
            let values: Vec<f64> = (0..n).map(|_| rng.next_in(-100.0, 100.0)).collect();
            let weights: Vec<f64> = (0..n).map(|_| rng.next_in(0.05, 1.0)).collect();
            let total: f64 = weights.iter().sum();
            let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
            let set = ScenarioSet::new(values, probs).unwrap();
            for spec in &specs {
                let generic = evaluate_risk(spec, &set, 1e-10).unwrap().value;
                let exact = closed_form_risk(spec, &set).unwrap().value;
                assert!(
                    (generic - exact).abs() <= 1e-7 * (1.0 + exact.abs()),
                    "{spec}: generic {generic} vs closed form {exact}"
                );
            }
        }
    }

    #[test]
    fn cvar_dominates_mean_and_grows_with_p() {
        let mut rng = SplitMix64::new(17);
        for _ in 0..20 {
            let n = 2 + rng.next_index(30);
            let values: Vec<f64> = (0..n).map(|_| rng.next_in(-100.0, 100.0)).collect();
            let set = equiprobable(&values);
            let mean = set.mean();
            let mut last = f64::NEG_INFINITY;
            for p in [0.5, 0.8, 0.9, 0.95, 0.99] {
                let value = closed_form_risk(&RiskSpec::Cvar { p }, &set).unwrap().value;
                assert!(value >= mean - 1e-10 * (1.0 + mean.abs()));
                assert!(value >= last - 1e-10 * (1.0 + value.abs()));
                last = value;
            }
        }
    }

    #[test]
    fn variance_minimizer_is_the_mean() {
        let mut rng = SplitMix64::new(23);
        for _ in 0..20 {
            let n = 2 + rng.next_index(20);
            let values: Vec<f64> = (0..n).map(|_| rng.next_in(-50.0, 50.0)).collect();
            let set = equiprobable(&values);
            let eval = evaluate_risk(&RiskSpec::Variance, &set, 1e-10).unwrap();
            let mean = set.mean();
            assert!((eval.eta_star - mean).abs() <= 1e-6 * (1.0 + mean.abs()));
        }
    }

    proptest! {
        // Atom order must not leak into results, down to the bit.
        #[test]
        fn permutation_invariance(
            atoms in proptest::collection::vec((-100.0f64..100.0, 0.05f64..1.0), 2..20),
            rotation in 0usize..19,
        ) {
            let total: f64 = atoms.iter().map(|(_, w)| w).sum();
            let values: Vec<f64> = atoms.iter().map(|(v, _)| *v).collect();
            let probs: Vec<f64> = atoms.iter().map(|(_, w)| w / total).collect();
            let rot = rotation % values.len();
            let mut values_rot = values.clone();
            values_rot.rotate_left(rot);
            let mut probs_rot = probs.clone();
            probs_rot.rotate_left(rot);

            let set = ScenarioSet::new(values, probs).unwrap();
            let permuted = ScenarioSet::new(values_rot, probs_rot).unwrap();
            for spec in [RiskSpec::Variance, RiskSpec::Cvar { p: 0.9 }, RiskSpec::Wmd { p: 0.6 }] {
                let a = evaluate_risk(&spec, &set, 1e-10).unwrap();
                let b = evaluate_risk(&spec, &permuted, 1e-10).unwrap();
                prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
                prop_assert_eq!(a.eta_star.to_bits(), b.eta_star.to_bits());
                let ca = closed_form_risk(&spec, &set).unwrap();
                let cb = closed_form_risk(&spec, &permuted).unwrap();
                prop_assert_eq!(ca.value.to_bits(), cb.value.to_bits());
                prop_assert_eq!(ca.eta_star.to_bits(), cb.eta_star.to_bits());
            }
        }
    }
}
