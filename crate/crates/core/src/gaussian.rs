//! Standard Normal utilities and the closed-form two-asset portfolio under a
//! CVaR constraint.
//!
//! The portfolio splits wealth between a deterministic asset `xi0` (weight
//! `a`) and a risky asset distributed N(M, Sigma^2) (weight `1-a`), so the
//! payoff is `mu(a) + sigma(a) * N` with `mu(a) = a*xi0 + (1-a)*M` and
//! `sigma(a) = (1-a)*Sigma`. The CVaR constraint on the loss reads
//! `sigma(a) * c_p - mu(a) <= gamma` with `c_p = phi(quantile(p)) / (1-p)`,
//! which makes everything solvable in closed form.

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Standard Normal density.
pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard Normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

// Rational Chebyshev approximation of erfc after W. J. Cody (1969), as in
// netlib's CALERF. Relative error is a few ulps over the whole range.
fn erfc(x: f64) -> f64 {
    let y = x.abs();
    let result = if y <= 0.46875 {
        return 1.0 - erf_small(x);
    } else if y <= 4.0 {
        const C: [f64; 9] = [
            5.64188496988670089e-1,
            8.88314979438837594,
            6.61191906371416295e1,
            2.98635138197400131e2,
            8.81952221241769090e2,
            1.71204761263407058e3,
            2.05107837782607147e3,
            1.23033935479799725e3,
            2.15311535474403846e-8,
        ];
        const D: [f64; 8] = [
            1.57449261107098347e1,
            1.17693950891312499e2,
            5.37181101862009858e2,
            1.62138957456669019e3,
            3.29079923573345963e3,
            4.36261909014324716e3,
            3.43936767414372164e3,
            1.23033935480374942e3,
        ];
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        scaled_exp(y) * (num + C[7]) / (den + D[7])
    } else {
        const P: [f64; 6] = [
            3.05326634961232344e-1,
            3.60344899949804439e-1,
            1.25781726111229246e-1,
            1.60837851487422766e-2,
            6.58749161529837803e-4,
            1.63153871373020978e-2,
        ];
        const Q: [f64; 5] = [
            2.56852019228982242,
            1.87295284992346047,
            5.27905102951428412e-1,
            6.05183413124413191e-2,
            2.33520497626869185e-3,
        ];
        const FRAC_1_SQRT_PI: f64 = 5.641_895_835_477_563e-1;
        let z = 1.0 / (y * y);
        let mut num = P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + P[i]) * z;
            den = (den + Q[i]) * z;
        }
        let r = z * (num + P[4]) / (den + Q[4]);
        scaled_exp(y) * (FRAC_1_SQRT_PI - r) / y
    };
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

// exp(-y*y) evaluated as exp(-hi*hi)*exp(-(y-hi)*(y+hi)) with hi a multiple
// of 1/16, which keeps the argument splitting exact.
fn scaled_exp(y: f64) -> f64 {
    let hi = (y * 16.0).trunc() / 16.0;
    let del = (y - hi) * (y + hi);
    (-hi * hi).exp() * (-del).exp()
}

// erf on |x| <= 0.46875.
fn erf_small(x: f64) -> f64 {
    const A: [f64; 5] = [
        3.16112374387056560,
        1.13864154151050156e2,
        3.77485237685302021e2,
        3.20937758913846947e3,
        1.85777706184603153e-1,
    ];
    const B: [f64; 4] = [
        2.36012909523441209e1,
        2.44024637934444173e2,
        1.28261652607737228e3,
        2.84423683343917062e3,
    ];
    let z = x * x;
    let mut num = A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + A[i]) * z;
        den = (den + B[i]) * z;
    }
    x * (num + A[3]) / (den + B[3])
}

/// Standard Normal quantile (inverse CDF).
///
/// Acklam's rational approximation refined by one Newton step on the CDF;
/// absolute error is well below 1e-9 over (0, 1).
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quantile level must lie in (0, 1), got {q}"
        )));
    }
    Ok(normal_quantile_unchecked(q))
}

pub(crate) fn normal_quantile_unchecked(q: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const Q_LOW: f64 = 0.02425;

    let z = if q < Q_LOW {
        let t = (-2.0 * q.ln()).sqrt();
        (((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    } else if q <= 1.0 - Q_LOW {
        let t = q - 0.5;
        let r = t * t;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * t
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let t = (-2.0 * (1.0 - q).ln()).sqrt();
        -((((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0))
    };

    // One Newton step against the high-accuracy CDF.
    let pdf = normal_pdf(z);
    if pdf > 1e-300 {
        let step = (normal_cdf(z) - q) / pdf;
        if step.is_finite() && step.abs() < 1.0 {
            return z - step;
        }
    }
    z
}

/// CVaR of the standard Normal at level `p`: `phi(quantile(p)) / (1 - p)`.
pub fn normal_cvar_coeff(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence level must lie in (0, 1), got {p}"
        )));
    }
    Ok(normal_pdf(normal_quantile_unchecked(p)) / (1.0 - p))
}

/// Parameters of the two-asset problem: risk-free value, risky mean and
/// standard deviation, confidence level and risk bound.
#[derive(Debug, Clone, Copy)]
pub struct GaussianPortfolioParams {
    pub xi0: f64,
    pub mean: f64,
    pub sigma: f64,
    pub p: f64,
    pub gamma: f64,
}

impl GaussianPortfolioParams {
    /// Validated constructor. The risky asset must carry a positive excess
    /// return (`mean > xi0`) for the interior formulas to apply.
    pub fn new(xi0: f64, mean: f64, sigma: f64, p: f64, gamma: f64) -> Result<Self> {
        if !(xi0.is_finite() && mean.is_finite() && sigma.is_finite() && gamma.is_finite()) {
            return Err(Error::InvalidParameter(
                "portfolio parameters must be finite".into(),
            ));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "confidence level must lie in (0, 1), got {p}"
            )));
        }
        if !(mean > xi0) {
            return Err(Error::InvalidParameter(format!(
                "risky mean must exceed the risk-free value ({mean} <= {xi0})"
            )));
        }
        Ok(GaussianPortfolioParams {
            xi0,
            mean,
            sigma,
            p,
            gamma,
        })
    }

    pub fn mu(&self, a: f64) -> f64 {
        a * self.xi0 + (1.0 - a) * self.mean
    }

    pub fn sigma_of(&self, a: f64) -> f64 {
        (1.0 - a) * self.sigma
    }
}

/// Where the optimal weight lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Interior,
    AtZero,
    AtOne,
    Infeasible,
}

/// Closed-form solution of the two-asset problem.
#[derive(Debug, Clone, Copy)]
pub struct GaussianSolution {
    /// Optimal weight of the risk-free asset; NaN when infeasible.
    pub a_sharp: f64,
    /// Dual multiplier from the stationarity condition.
    pub lambda_sharp: f64,
    /// Optimal anchor `sigma(a) * quantile(p) - mu(a)`; NaN when infeasible.
    pub eta_sharp: f64,
    /// Loss aversion factor `1 + lambda / (1 - p)`.
    pub theta: f64,
    /// Standard Normal CVaR coefficient at level `p`.
    pub c_p: f64,
    /// Optimal expected payoff `mu(a_sharp)`; NaN when infeasible.
    pub value: f64,
    pub boundary: Boundary,
}

/// Solves the two-asset problem in closed form.
///
/// With `c = c_p` and `s = Sigma*c - M` (the constraint value at `a = 0`),
/// the constraint is the affine map `a -> s - a*(s + xi0)` and the objective
/// `mu` decreases in `a`, so the optimum is `a = 0` when slack, the binding
/// root `(s - gamma) / (s + xi0)` otherwise, and the problem is infeasible
/// when `gamma` undercuts the constraint's minimum over [0, 1].
///
/// The multiplier comes from the stationarity condition
/// `(1 + lambda)(xi0 - M) + lambda*c*Sigma = 0`, i.e.
/// `lambda = (M - xi0) / (Sigma*c - (M - xi0))`, which is the value that
/// reproduces the loss-aversion column of the reference table.
pub fn solve_gaussian(params: &GaussianPortfolioParams) -> GaussianSolution {
    let c = normal_cvar_coeff(params.p).expect("validated confidence level");
    let s = params.sigma * c - params.mean;
    let q = normal_quantile_unchecked(params.p);

    let denom = s + params.xi0; // Sigma*c - (M - xi0)
    let lambda_sharp = if denom > 0.0 {
        (params.mean - params.xi0) / denom
    } else {
        f64::INFINITY
    };
    let theta = 1.0 + lambda_sharp / (1.0 - params.p);

    // Minimum of the constraint over a in [0, 1] sits at an endpoint.
    let min_risk = s.min(-params.xi0);
    if params.gamma < min_risk {
        return GaussianSolution {
            a_sharp: f64::NAN,
            lambda_sharp,
            eta_sharp: f64::NAN,
            theta,
            c_p: c,
            value: f64::NAN,
            boundary: Boundary::Infeasible,
        };
    }

    let (a_sharp, boundary) = if s <= params.gamma {
        (0.0, Boundary::AtZero)
    } else {
        let a = ((s - params.gamma) / denom).clamp(0.0, 1.0);
        if a >= 1.0 {
            (1.0, Boundary::AtOne)
        } else {
            (a, Boundary::Interior)
        }
    };

    GaussianSolution {
        a_sharp,
        lambda_sharp,
        eta_sharp: params.sigma_of(a_sharp) * q - params.mu(a_sharp),
        theta,
        c_p: c,
        value: params.mu(a_sharp),
        boundary,
    }
}

/// One comparison row: computed closed-form solution against the printed
/// reference values.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Table3Row {
    pub p: f64,
    pub gamma: f64,
    pub a_sharp_computed: f64,
    pub a_sharp_paper: f64,
    pub eta_computed: f64,
    pub eta_paper: f64,
    pub theta_computed: f64,
    pub theta_paper: f64,
    /// Names of the cells whose computed value deviates beyond tolerance.
    pub flagged_cells: Vec<&'static str>,
}

impl Table3Row {
    pub fn flagged(&self) -> bool {
        !self.flagged_cells.is_empty()
    }
}

/// Reference parameters behind the printed table.
pub const TABLE3_XI0: f64 = 1030.0;
pub const TABLE3_MEAN: f64 = 1144.0;
pub const TABLE3_SIGMA: f64 = 249.0;

// (p, gamma, a, eta, theta) as printed.
const TABLE3_PRINTED: [(f64, f64, f64, f64, f64); 8] = [
    (0.95, -630.0, 0.0, -735.0, 6.6),
    (0.95, -772.5, 0.36, -839.5, 6.6),
    (0.95, -978.5, 0.87, -991.9, 6.6),
    (0.95, -1030.0, 1.0, -1030.0, 6.6),
    (0.99, -496.0, 0.0, -565.1, 22.0),
    (0.99, -772.5, 0.47, -785.9, 22.0),
    (0.99, -978.5, 0.84, -955.6, 22.0),
    (0.99, -1030.0, 1.0, -1030.0, 22.0),
];

// Per-column flag tolerances at scale 1. The printed table carries one to
// two significant decimals, so agreement tighter than these is rounding.
const A_TOL: f64 = 0.01;
const ETA_TOL: f64 = 1.5;
const THETA_TOL: f64 = 0.5;

/// Recomputes the eight reference cells and flags deviations at the default
/// tolerance scale.
pub fn reproduce_table3() -> Vec<Table3Row> {
    reproduce_table3_scaled(1.0)
}

/// Same as [`reproduce_table3`] with all per-column tolerances multiplied by
/// `tolerance_scale` (0 flags every cell that is not exactly equal).
pub fn reproduce_table3_scaled(tolerance_scale: f64) -> Vec<Table3Row> {
    TABLE3_PRINTED
        .iter()
        .map(|&(p, gamma, a_paper, eta_paper, theta_paper)| {
            let params = GaussianPortfolioParams::new(TABLE3_XI0, TABLE3_MEAN, TABLE3_SIGMA, p, gamma)
                .expect("reference parameters are valid");
            let sol = solve_gaussian(&params);
            let mut flagged_cells = Vec::new();
            if !((sol.a_sharp - a_paper).abs() <= A_TOL * tolerance_scale) {
                flagged_cells.push("a_sharp");
            }
            if !((sol.eta_sharp - eta_paper).abs() <= ETA_TOL * tolerance_scale) {
                flagged_cells.push("eta");
            }
            if !((sol.theta - theta_paper).abs() <= THETA_TOL * tolerance_scale) {
                flagged_cells.push("theta");
            }
            Table3Row {
                p,
                gamma,
                a_sharp_computed: sol.a_sharp,
                a_sharp_paper: a_paper,
                eta_computed: sol.eta_sharp,
                eta_paper,
                theta_computed: sol.theta,
                theta_paper,
                flagged_cells,
            }
        })
        .collect()
}

/// CSV rendering: `p,gamma,a_sharp_computed,a_sharp_paper,eta_computed,eta_paper,theta_computed,theta_paper,flag`.
pub fn table3_csv(rows: &[Table3Row]) -> String {
    let mut out = String::from(
        "p,gamma,a_sharp_computed,a_sharp_paper,eta_computed,eta_paper,theta_computed,theta_paper,flag\n",
    );
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.p,
            row.gamma,
            row.a_sharp_computed,
            row.a_sharp_paper,
            row.eta_computed,
            row.eta_paper,
            row.theta_computed,
            row.theta_paper,
            row.flagged_cells.join(";"),
        ));
    }
    out
}
