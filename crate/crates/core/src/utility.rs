//! The utility family `U(lambda, x, eta) = x + lambda*(-rho(-x, eta) + gamma)`
//! attached to a risk constraint `Risk(-J) <= gamma`.
//!
//! Taking the worst member over `lambda >= 0` and the best `(a, eta)` turns
//! risk-constrained expected-return maximization into a maxmin
//! expected-utility problem. For the cvar kernel the member functions are
//! Kahneman-Tversky-style loss-aversion utilities: slope 1 above the anchor
//! `-eta`, slope `theta = 1 + lambda/(1 - p)` below it.

use crate::error::{Error, Result};
use crate::risk::{rho, RiskSpec};
use crate::scenario::ScenarioSet;

/// A risk spec together with the risk bound `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityFamilySpec {
    pub risk: RiskSpec,
    pub gamma: f64,
}

impl UtilityFamilySpec {
    pub fn new(risk: RiskSpec, gamma: f64) -> Self {
        UtilityFamilySpec { risk, gamma }
    }
}

/// Infimum over the family: either attained finite or unbounded below.
///
/// Kept as an explicit variant rather than a floating sentinel so the
/// solver's infeasibility logic can match on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WorstCaseValue {
    Finite(f64),
    MinusInfinity,
}

impl WorstCaseValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            WorstCaseValue::Finite(v) => Some(v),
            WorstCaseValue::MinusInfinity => None,
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "lambda must be nonnegative, got {lambda}"
        )))
    }
}

/// The family member at `lambda`: `x + lambda*(-rho(-x, eta) + gamma)`.
pub fn utility_value(fam: &UtilityFamilySpec, lambda: f64, x: f64, eta: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(x + lambda * (-rho(&fam.risk, -x, eta) + fam.gamma))
}

/// `E[U(lambda, J, eta)]` under the payoff distribution.
pub fn expected_utility(
    fam: &UtilityFamilySpec,
    lambda: f64,
    payoff: &ScenarioSet,
    eta: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(payoff.expectation(|x| x + lambda * (-rho(&fam.risk, -x, eta) + fam.gamma)))
}

/// Infimum of `lambda -> E[U(lambda, J, eta)]` over `lambda >= 0`.
///
/// The map is affine with slope `gamma - E[rho(-J, eta)]`: the infimum is
/// `E[J]` (at `lambda = 0`) when the slope is nonnegative and minus infinity
/// otherwise.
pub fn inner_inf_over_lambda(
    fam: &UtilityFamilySpec,
    payoff: &ScenarioSet,
    eta: f64,
) -> WorstCaseValue {
    let expected_rho = payoff.expectation(|x| rho(&fam.risk, -x, eta));
    if expected_rho <= fam.gamma {
        WorstCaseValue::Finite(payoff.mean())
    } else {
        WorstCaseValue::MinusInfinity
    }
}

/// Loss aversion factor `theta = 1 + lambda / (1 - p)` of the cvar family.
pub fn loss_aversion_theta(lambda: f64, p: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence level must lie in (0, 1), got {p}"
        )));
    }
    Ok(1.0 + lambda / (1.0 - p))
}

/// Samples `x -> U(lambda, x, eta)` on `n` equally spaced points over
/// `[x_min, x_max]`, inserting the kink `x = -eta` as an extra sample when
/// it falls strictly inside the range, so the emitted polyline reproduces
/// the utility exactly segment by segment.
pub fn utility_curve(
    fam: &UtilityFamilySpec,
    lambda: f64,
    eta: f64,
    x_min: f64,
    x_max: f64,
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    check_lambda(lambda)?;
    if !(x_min < x_max) {
        return Err(Error::InvalidParameter(format!(
            "need x_min < x_max, got [{x_min}, {x_max}]"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 sample points, got {n}"
        )));
    }
    let step = (x_max - x_min) / (n - 1) as f64;
    let mut xs: Vec<f64> = (0..n).map(|i| x_min + step * i as f64).collect();
    let kink = -eta;
    if kink > x_min && kink < x_max && !xs.contains(&kink) {
        let pos = xs.partition_point(|&x| x < kink);
        xs.insert(pos, kink);
    }
    xs.into_iter()
        .map(|x| Ok((x, utility_value(fam, lambda, x, eta)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use approx::assert_abs_diff_eq;

    fn cvar_family(p: f64, gamma: f64) -> UtilityFamilySpec {
        UtilityFamilySpec::new(RiskSpec::Cvar { p }, gamma)
    }

    #[test]
    fn lambda_zero_collapses_to_identity() {
        let fam = cvar_family(0.95, 3.0);
        for x in [-5.0, 0.0, 2.5] {
            assert_eq!(utility_value(&fam, 0.0, x, -1.0).unwrap(), x);
        }
    }

    #[test]
    fn cvar_kink_point_value() {
        let fam = cvar_family(0.95, 0.0);
        assert_abs_diff_eq!(
            utility_value(&fam, 0.05, 1.0, -1.0).unwrap(),
            1.05,
            epsilon = 1e-12
        );
    }

    #[test]
    fn variance_member_hand_value() {
        let fam = UtilityFamilySpec::new(RiskSpec::Variance, 2.0);
        assert_eq!(utility_value(&fam, 1.0, 0.0, 0.0).unwrap(), 2.0);
    }

    #[test]
    fn negative_lambda_is_rejected() {
        let fam = cvar_family(0.9, 0.0);
        assert!(utility_value(&fam, -0.1, 1.0, 0.0).is_err());
        assert!(loss_aversion_theta(-1.0, 0.5).is_err());
    }

    #[test]
    fn expected_utility_hand_values() {
        let payoff = ScenarioSet::new(vec![0.0, 10.0], vec![0.5, 0.5]).unwrap();
        let fam = cvar_family(0.9, 0.0);
        assert_eq!(expected_utility(&fam, 0.0, &payoff, 0.0).unwrap(), 5.0);

        let atom = ScenarioSet::new(vec![-2.0], vec![1.0]).unwrap();
        let fam = cvar_family(0.5, 0.0);
        assert_abs_diff_eq!(
            expected_utility(&fam, 1.0, &atom, 0.0).unwrap(),
            -6.0,
            epsilon = 1e-12
        );

        let sym = ScenarioSet::new(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let fam = UtilityFamilySpec::new(RiskSpec::Variance, 0.0);
        assert_abs_diff_eq!(
            expected_utility(&fam, 1.0, &sym, 0.0).unwrap(),
            -1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn inner_infimum_switches_at_gamma() {
        let payoff = ScenarioSet::new(vec![0.0, 10.0], vec![0.5, 0.5]).unwrap();
        let wide = UtilityFamilySpec::new(RiskSpec::Variance, 100.0);
        assert_eq!(
            inner_inf_over_lambda(&wide, &payoff, -5.0),
            WorstCaseValue::Finite(5.0)
        );
        let tight = UtilityFamilySpec::new(RiskSpec::Variance, 10.0);
        assert_eq!(
            inner_inf_over_lambda(&tight, &payoff, -5.0),
            WorstCaseValue::MinusInfinity
        );
        // zero slope in lambda still returns E[J]
        let exact = UtilityFamilySpec::new(RiskSpec::Variance, 25.0);
        assert_eq!(
            inner_inf_over_lambda(&exact, &payoff, -5.0),
            WorstCaseValue::Finite(5.0)
        );
    }

    #[test]
    fn theta_hand_values() {
        assert_eq!(loss_aversion_theta(0.0, 0.95).unwrap(), 1.0);
        assert_eq!(loss_aversion_theta(1.0, 0.5).unwrap(), 3.0);
        assert_abs_diff_eq!(
            loss_aversion_theta(0.2853, 0.95).unwrap(),
            6.706,
            epsilon = 1e-3
        );
        assert!(loss_aversion_theta(1.0, 1.0).is_err());
    }

    fn polyline_slopes(points: &[(f64, f64)]) -> Vec<f64> {
        points
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect()
    }

    #[test]
    fn curve_slopes_match_loss_aversion() {
        let fam = cvar_family(0.95, 0.0);
        let pts = utility_curve(&fam, 0.05, 0.0, -1.0, 1.0, 3).unwrap();
        let slopes = polyline_slopes(&pts);
        assert_abs_diff_eq!(slopes[slopes.len() - 1], 1.0, epsilon = 1e-12);

        let fam = cvar_family(0.5, 0.0);
        let pts = utility_curve(&fam, 1.0, 0.0, -2.0, 0.0, 3).unwrap();
        let slopes = polyline_slopes(&pts);
        assert_abs_diff_eq!(slopes[0], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn curve_with_lambda_zero_is_identity_line() {
        let fam = cvar_family(0.9, 5.0);
        let pts = utility_curve(&fam, 0.0, 0.3, -4.0, 4.0, 9).unwrap();
        for (x, u) in pts {
            assert_eq!(u, x);
        }
    }

    #[test]
    fn curve_inserts_interior_kink() {
        let fam = cvar_family(0.9, 0.0);
        let pts = utility_curve(&fam, 0.5, -0.3, -1.0, 1.0, 4).unwrap();
        assert!(pts.iter().any(|&(x, _)| x == 0.3));
        assert_eq!(pts.len(), 5);
        // kink outside the range inserts nothing
        let pts = utility_curve(&fam, 0.5, -9.0, -1.0, 1.0, 4).unwrap();
        assert_eq!(pts.len(), 4);
    }

    #[test]
    fn curve_rejects_bad_ranges() {
        let fam = cvar_family(0.9, 0.0);
        assert!(utility_curve(&fam, 0.5, 0.0, 1.0, -1.0, 4).is_err());
        assert!(utility_curve(&fam, 0.5, 0.0, -1.0, 1.0, 1).is_err());
    }

    #[test]
    fn family_is_affine_in_lambda_with_zero_intercept() {
        let mut rng = SplitMix64::new(3);
        let fams = [
            UtilityFamilySpec::new(RiskSpec::Variance, 1.5),
            cvar_family(0.9, -2.0),
            UtilityFamilySpec::new(RiskSpec::Wmd { p: 0.6 }, 0.5),
        ];
        for fam in &fams {
            for _ in 0..50 {
                let x = rng.next_in(-20.0, 20.0);
                let eta = rng.next_in(-20.0, 20.0);
                let lambda = rng.next_in(0.0, 5.0);
                let unit = utility_value(fam, 1.0, x, eta).unwrap() - x;
                let scaled = utility_value(fam, lambda, x, eta).unwrap() - x;
                assert_abs_diff_eq!(scaled, lambda * unit, epsilon = 1e-12 * (1.0 + unit.abs()));
            }
        }
    }

    #[test]
    fn cvar_branch_above_kink_is_exact() {
        let fam = cvar_family(0.95, 1.25);
        let (lambda, eta) = (0.4, -2.0);
        for x in [2.0, 3.5, 10.0] {
            // x >= -eta: U = x - lambda*eta + lambda*gamma exactly
            let expected = x - lambda * eta + lambda * fam.gamma;
            assert_eq!(utility_value(&fam, lambda, x, eta).unwrap(), expected);
        }
    }

    #[test]
    fn expected_utility_decomposes_through_risk_kernel() {
        let mut rng = SplitMix64::new(9);
        for _ in 0..30 {
            let n = 1 + rng.next_index(20);
            let values: Vec<f64> = (0..n).map(|_| rng.next_in(-10.0, 10.0)).collect();
            let payoff = ScenarioSet::new(values, vec![1.0 / n as f64; n]).unwrap();
            let fam = cvar_family(0.9, rng.next_in(-2.0, 2.0));
            let lambda = rng.next_in(0.0, 3.0);
            let eta = rng.next_in(-10.0, 10.0);
            let lhs = expected_utility(&fam, lambda, &payoff, eta).unwrap();
            let expected_rho = payoff.expectation(|x| rho(&fam.risk, -x, eta));
            let rhs = payoff.mean() + lambda * (fam.gamma - expected_rho);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12 * (1.0 + rhs.abs()));
        }
    }
}
