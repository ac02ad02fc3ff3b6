//! Finite discrete distributions standing in for random variables.
//!
//! A [`ScenarioSet`] is a plain list of atoms `(value, probability)`. Atoms
//! are kept in caller order: nothing downstream may depend on it (the risk
//! routines canonicalize internally), so no sorting or deduplication happens
//! here.

use crate::error::{Error, Result};
use crate::gaussian::normal_quantile_unchecked;
use crate::rng::SplitMix64;

/// Probability sums farther than this from 1 are rejected outright.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// Sums within this of 1 are accepted as-is; between this and
/// [`PROB_SUM_TOLERANCE`] they are renormalized. Keeping exact sums untouched
/// makes CSV round-trips bit-stable.
const PROB_SUM_EXACT: f64 = 1e-12;

/// A finite discrete distribution: values with probability weights.
///
/// Immutable after construction; freely shareable across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl ScenarioSet {
    /// Validating constructor.
    ///
    /// Probabilities must be nonnegative and sum to 1 within
    /// [`PROB_SUM_TOLERANCE`]; small deviations (decimal rounding in CSV
    /// input, say) are renormalized away.
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.len() != probs.len() {
            return Err(Error::LengthMismatch {
                values: values.len(),
                probs: probs.len(),
            });
        }
        if values.is_empty() {
            return Err(Error::NoScenarios);
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteValue { index, value });
            }
        }
        for (index, &prob) in probs.iter().enumerate() {
            if !(prob >= 0.0) {
                return Err(Error::NegativeProbability { index, prob });
            }
        }
        let sum: f64 = probs.iter().sum();
        if !((sum - 1.0).abs() <= PROB_SUM_TOLERANCE) {
            return Err(Error::ProbabilitySum { sum });
        }
        let mut probs = probs;
        if (sum - 1.0).abs() > PROB_SUM_EXACT {
            for p in &mut probs {
                *p /= sum;
            }
        }
        Ok(ScenarioSet { values, probs })
    }

    /// Parses a two-column CSV `value,prob` with a header row.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        let mut probs = Vec::new();
        let mut lines = text.lines().enumerate();

        let header = loop {
            match lines.next() {
                Some((line, raw)) => {
                    let trimmed = raw.trim_start_matches('\u{feff}').trim();
                    if trimmed.is_empty() {
                        continue;
                    }
                    break (line, trimmed);
                }
                None => return Err(Error::NoScenarios),
            }
        };
        if !header.1.eq_ignore_ascii_case("value,prob") {
            return Err(Error::CsvParse {
                line: header.0 + 1,
                message: format!("expected header `value,prob`, got `{}`", header.1),
            });
        }

        for (line, raw) in lines {
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            let mut fields = trimmed.split(',');
            let (value_field, prob_field) = match (fields.next(), fields.next(), fields.next()) {
                (Some(v), Some(p), None) => (v.trim(), p.trim()),
                _ => {
                    return Err(Error::CsvParse {
                        line: line + 1,
                        message: format!("expected two comma-separated fields, got `{trimmed}`"),
                    })
                }
            };
            let value: f64 = value_field.parse().map_err(|_| Error::CsvParse {
                line: line + 1,
                message: format!("cannot parse value `{value_field}`"),
            })?;
            let prob: f64 = prob_field.parse().map_err(|_| Error::CsvParse {
                line: line + 1,
                message: format!("cannot parse probability `{prob_field}`"),
            })?;
            values.push(value);
            probs.push(prob);
        }

        if values.is_empty() {
            return Err(Error::NoScenarios);
        }
        ScenarioSet::new(values, probs)
    }

    /// Emits the CSV form read back by [`ScenarioSet::from_csv`]. Numbers are
    /// printed with 17 significant digits, so the round-trip is bit-exact.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value,prob\n");
        for (value, prob) in self.atoms() {
            out.push_str(&format!("{value:.16e},{prob:.16e}\n"));
        }
        out
    }

    /// `n` equiprobable atoms drawn from Normal(mean, std^2).
    ///
    /// Values are `mean + std * quantile(u_i)` with `u_i` from the SplitMix64
    /// counter stream under `seed`, so identical seeds give bit-identical
    /// scenario sets on every platform with the same libm.
    pub fn sample_normal(mean: f64, std: f64, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "sample size must be at least 1".into(),
            ));
        }
        if !mean.is_finite() || !std.is_finite() || std < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "normal parameters must be finite with std >= 0, got mean {mean}, std {std}"
            )));
        }
        let mut rng = SplitMix64::new(seed);
        let values: Vec<f64> = (0..n)
            .map(|_| mean + std * normal_quantile_unchecked(rng.next_open01()))
            .collect();
        let probs = vec![1.0 / n as f64; n];
        ScenarioSet::new(values, probs)
    }

    /// Maps values through `x -> scale*x + shift`; probabilities unchanged.
    pub fn affine(&self, scale: f64, shift: f64) -> ScenarioSet {
        ScenarioSet {
            values: self.values.iter().map(|x| scale * x + shift).collect(),
            probs: self.probs.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.atoms().map(|(x, p)| p * x).sum()
    }

    /// Expectation of `f` under the scenario weights, in atom order.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms().map(|(x, p)| p * f(x)).sum()
    }
}
