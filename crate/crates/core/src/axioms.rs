//! Empirical checks of the coherence axioms on concrete risk specs.
//!
//! Each check runs seeded random trials on a common atom space (one shared
//! probability vector, independent value vectors) and reports either "held
//! over the trial set" or a concrete witness: the inputs plus both sides of
//! the violated (in)equality. A held verdict is evidence over the trials
//! run, not a proof; the report carries the trial count for that reason.

use crate::error::{Error, Result};
use crate::risk::{risk_value, RiskSpec};
use crate::rng::SplitMix64;
use crate::scenario::ScenarioSet;

const VALUE_RANGE: (f64, f64) = (-50.0, 50.0);
const SHIFT_RANGE: (f64, f64) = (-20.0, 20.0);
const SCALE_MAX: f64 = 10.0;
const MONOTONE_STEP_MAX: f64 = 20.0;
const ATOMS_MIN: usize = 2;
const ATOMS_MAX: usize = 20;

const RISK_TOL: f64 = 1e-10;

/// The five axiom implications under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axiom {
    Monotonicity,
    TranslationInvariance,
    PositiveHomogeneity,
    Convexity,
    Subadditivity,
}

impl Axiom {
    pub const ALL: [Axiom; 5] = [
        Axiom::Monotonicity,
        Axiom::TranslationInvariance,
        Axiom::PositiveHomogeneity,
        Axiom::Convexity,
        Axiom::Subadditivity,
    ];

    /// Equality axioms compare both directions; the rest are one-sided.
    fn is_equality(self) -> bool {
        matches!(
            self,
            Axiom::TranslationInvariance | Axiom::PositiveHomogeneity
        )
    }
}

impl std::fmt::Display for Axiom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Axiom::Monotonicity => "monotonicity",
            Axiom::TranslationInvariance => "translation-invariance",
            Axiom::PositiveHomogeneity => "positive-homogeneity",
            Axiom::Convexity => "convexity",
            Axiom::Subadditivity => "subadditivity",
        };
        write!(f, "{name}")
    }
}

/// A reproducible counterexample: the trial inputs and the two sides of the
/// violated relation (`lhs <= rhs` for one-sided axioms, `lhs == rhs` for
/// equalities).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AxiomWitness {
    pub probs: Vec<f64>,
    pub values_a: Vec<f64>,
    pub values_b: Option<Vec<f64>>,
    /// Shift for translation invariance, scale for positive homogeneity,
    /// mixing weight for convexity.
    pub scalar: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

/// Verdict for one axiom over a trial set.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AxiomReport {
    pub axiom: Axiom,
    pub holds: bool,
    pub witness: Option<AxiomWitness>,
    pub trials: u32,
}

struct Trial {
    probs: Vec<f64>,
    values_a: Vec<f64>,
    values_b: Option<Vec<f64>>,
    scalar: Option<f64>,
}

fn draw_trial(axiom: Axiom, rng: &mut SplitMix64) -> Trial {
    let m = ATOMS_MIN + rng.next_index(ATOMS_MAX - ATOMS_MIN + 1);
    let weights: Vec<f64> = (0..m).map(|_| rng.next_in(0.05, 1.0)).collect();
    let total: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let values_a: Vec<f64> = (0..m)
        .map(|_| rng.next_in(VALUE_RANGE.0, VALUE_RANGE.1))
        .collect();

    let (values_b, scalar) = match axiom {
        Axiom::Monotonicity => {
            let values_b = values_a
                .iter()
                .map(|v| v + rng.next_in(0.0, MONOTONE_STEP_MAX))
                .collect();
            (Some(values_b), None)
        }
        Axiom::TranslationInvariance => {
            (None, Some(rng.next_in(SHIFT_RANGE.0, SHIFT_RANGE.1)))
        }
        Axiom::PositiveHomogeneity => (None, Some(SCALE_MAX * rng.next_open01())),
        Axiom::Convexity => {
            let values_b = (0..m)
                .map(|_| rng.next_in(VALUE_RANGE.0, VALUE_RANGE.1))
                .collect();
            (Some(values_b), Some(rng.next_open01()))
        }
        Axiom::Subadditivity => {
            let values_b = (0..m)
                .map(|_| rng.next_in(VALUE_RANGE.0, VALUE_RANGE.1))
                .collect();
            (Some(values_b), None)
        }
    };
    Trial {
        probs,
        values_a,
        values_b,
        scalar,
    }
}

// Both sides of the axiom relation for the given inputs.
fn relation_sides(
    spec: &RiskSpec,
    axiom: Axiom,
    probs: &[f64],
    values_a: &[f64],
    values_b: Option<&[f64]>,
    scalar: Option<f64>,
) -> Result<(f64, f64)> {
    let set_a = ScenarioSet::new(values_a.to_vec(), probs.to_vec())?;
    let risk_a = risk_value(spec, &set_a, RISK_TOL)?;
    match axiom {
        Axiom::Monotonicity => {
            let b = values_b.expect("monotonicity carries a dominating set");
            let set_b = ScenarioSet::new(b.to_vec(), probs.to_vec())?;
            Ok((risk_a, risk_value(spec, &set_b, RISK_TOL)?))
        }
        Axiom::TranslationInvariance => {
            let m = scalar.expect("translation carries a shift");
            let shifted = risk_value(spec, &set_a.affine(1.0, m), RISK_TOL)?;
            Ok((shifted, risk_a + m))
        }
        Axiom::PositiveHomogeneity => {
            let theta = scalar.expect("homogeneity carries a scale");
            let scaled = risk_value(spec, &set_a.affine(theta, 0.0), RISK_TOL)?;
            Ok((scaled, theta * risk_a))
        }
        Axiom::Convexity => {
            let b = values_b.expect("convexity carries a second set");
            let theta = scalar.expect("convexity carries a mixing weight");
            let mixed: Vec<f64> = values_a
                .iter()
                .zip(b)
                .map(|(x1, x2)| theta * x1 + (1.0 - theta) * x2)
                .collect();
            let set_mixed = ScenarioSet::new(mixed, probs.to_vec())?;
            let set_b = ScenarioSet::new(b.to_vec(), probs.to_vec())?;
            let risk_b = risk_value(spec, &set_b, RISK_TOL)?;
            Ok((
                risk_value(spec, &set_mixed, RISK_TOL)?,
                theta * risk_a + (1.0 - theta) * risk_b,
            ))
        }
        Axiom::Subadditivity => {
            let b = values_b.expect("subadditivity carries a second set");
            let summed: Vec<f64> = values_a.iter().zip(b).map(|(x1, x2)| x1 + x2).collect();
            let set_sum = ScenarioSet::new(summed, probs.to_vec())?;
            let set_b = ScenarioSet::new(b.to_vec(), probs.to_vec())?;
            let risk_b = risk_value(spec, &set_b, RISK_TOL)?;
            Ok((risk_value(spec, &set_sum, RISK_TOL)?, risk_a + risk_b))
        }
    }
}

fn violates(axiom: Axiom, lhs: f64, rhs: f64, tol: f64) -> bool {
    let slack = tol * (1.0 + lhs.abs() + rhs.abs());
    if axiom.is_equality() {
        (lhs - rhs).abs() > slack
    } else {
        lhs > rhs + slack
    }
}

/// Runs `trials` seeded trials of one axiom on `spec`.
///
/// Per-trial streams derive from `(seed, trial index)`, so reports are
/// reproducible and trials could be evaluated in any order.
pub fn check_axiom(
    spec: &RiskSpec,
    axiom: Axiom,
    trials: u32,
    seed: u64,
    tol: f64,
) -> Result<AxiomReport> {
    spec.validate()?;
    if trials == 0 {
        return Err(Error::InvalidParameter(
            "need at least one trial".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }

    let mut witness = None;
    for index in 0..trials {
        let mut rng = SplitMix64::derive(seed, index as u64);
        let trial = draw_trial(axiom, &mut rng);
        let (lhs, rhs) = relation_sides(
            spec,
            axiom,
            &trial.probs,
            &trial.values_a,
            trial.values_b.as_deref(),
            trial.scalar,
        )?;
        if violates(axiom, lhs, rhs, tol) {
            witness = Some(AxiomWitness {
                probs: trial.probs,
                values_a: trial.values_a,
                values_b: trial.values_b,
                scalar: trial.scalar,
                lhs,
                rhs,
            });
            break;
        }
    }
    Ok(AxiomReport {
        axiom,
        holds: witness.is_none(),
        witness,
        trials,
    })
}

/// Recomputes both sides of the axiom relation for a stored witness.
pub fn recompute_witness(
    spec: &RiskSpec,
    axiom: Axiom,
    witness: &AxiomWitness,
) -> Result<(f64, f64)> {
    relation_sides(
        spec,
        axiom,
        &witness.probs,
        &witness.values_a,
        witness.values_b.as_deref(),
        witness.scalar,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-9;

    #[test]
    fn cvar_passes_all_five() {
        let spec = RiskSpec::Cvar { p: 0.95 };
        for axiom in Axiom::ALL {
            let report = check_axiom(&spec, axiom, 200, 1, TOL).unwrap();
            assert!(report.holds, "{axiom} failed: {:?}", report.witness);
            assert_eq!(report.trials, 200);
        }
    }

    #[test]
    fn variance_fails_translation_with_sound_witness() {
        let report = check_axiom(&RiskSpec::Variance, Axiom::TranslationInvariance, 200, 1, TOL)
            .unwrap();
        assert!(!report.holds);
        let witness = report.witness.expect("failed verdicts carry a witness");
        let (lhs, rhs) =
            recompute_witness(&RiskSpec::Variance, Axiom::TranslationInvariance, &witness)
                .unwrap();
        assert_eq!(lhs, witness.lhs);
        assert_eq!(rhs, witness.rhs);
        assert!(violates(Axiom::TranslationInvariance, lhs, rhs, TOL));
    }

    #[test]
    fn variance_fails_positive_homogeneity() {
        let report =
            check_axiom(&RiskSpec::Variance, Axiom::PositiveHomogeneity, 200, 1, TOL).unwrap();
        assert!(!report.holds);
        assert!(report.witness.is_some());
    }

    #[test]
    fn variance_passes_convexity() {
        let report = check_axiom(&RiskSpec::Variance, Axiom::Convexity, 200, 1, TOL).unwrap();
        assert!(report.holds, "witness: {:?}", report.witness);
    }

    #[test]
    fn wmd_passes_positive_homogeneity() {
        let report =
            check_axiom(&RiskSpec::Wmd { p: 0.5 }, Axiom::PositiveHomogeneity, 200, 1, TOL)
                .unwrap();
        assert!(report.holds, "witness: {:?}", report.witness);
    }

    #[test]
    fn reports_are_deterministic() {
        for axiom in [Axiom::TranslationInvariance, Axiom::Subadditivity] {
            let a = check_axiom(&RiskSpec::Variance, axiom, 64, 9, TOL).unwrap();
            let b = check_axiom(&RiskSpec::Variance, axiom, 64, 9, TOL).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_zero_trials_and_bad_tolerance() {
        assert!(check_axiom(&RiskSpec::Variance, Axiom::Convexity, 0, 1, TOL).is_err());
        assert!(check_axiom(&RiskSpec::Variance, Axiom::Convexity, 10, 1, 0.0).is_err());
    }
}
