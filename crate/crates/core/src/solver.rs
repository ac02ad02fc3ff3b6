//! Expected-return maximization under a risk-measure constraint on linear
//! scenario payoffs, solved through the Lagrangian dual.
//!
//! The primal problem is `sup E[J(a)] subject to Risk(-J(a)) <= gamma` with
//! `J(a) = returns * a` over a simplex or box decision set. The dual
//! function `d(lambda) = sup over (a, eta) of Psi(a, lambda, eta)` is convex
//! in `lambda`; [`solve`] minimizes it over `[0, lambda_max]` by bisecting
//! the sign change of the derivative estimate `gamma - Risk(-J(a_lambda))`,
//! doubling `lambda_max` while the dual keeps falling (the signature of an
//! infeasible constraint, where the dual is unbounded below). The inner
//! suprema pair an exact `eta` step (a 1-D risk evaluation, re-solved at
//! every iterate) with projected subgradient ascent over `a`.
//!
//! Primal recovery collects every inner iterate plus the decision-set
//! vertices, bisects constraint-boundary crossings between the best
//! infeasible and feasible candidates, and finishes with a short penalized
//! local search, so the reported point satisfies complementary slackness to
//! near machine precision.
//!
//! [`maxmin_value`] solves the same problem by the primal route (exact
//! penalty on the feasible side), which is the executable counterpart of
//! the maxmin-utility reformulation: the two answers agree on feasible
//! problems and both flag infeasible ones.

use crate::error::{Error, Result};
use crate::risk::{closed_form_risk, evaluate_risk, rho, rho_dx, RiskSpec};
use crate::scenario::ScenarioSet;
use crate::utility::WorstCaseValue;

/// Decision sets: the probability simplex or a coordinate box.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DecisionSet {
    Simplex,
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl DecisionSet {
    fn validate(&self, n: usize) -> Result<()> {
        match self {
            DecisionSet::Simplex => {
                if n == 0 {
                    return Err(Error::InvalidProblem("simplex needs n >= 1".into()));
                }
            }
            DecisionSet::Box { lower, upper } => {
                if lower.len() != n || upper.len() != n {
                    return Err(Error::InvalidProblem(format!(
                        "box bounds must have length {n}"
                    )));
                }
                for (l, u) in lower.iter().zip(upper) {
                    if !l.is_finite() || !u.is_finite() {
                        return Err(Error::InvalidProblem("box bounds must be finite".into()));
                    }
                    if l > u {
                        return Err(Error::InvalidProblem(format!(
                            "box lower bound {l} exceeds upper bound {u}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Membership within absolute tolerance `tol` per constraint.
    pub fn contains(&self, a: &[f64], tol: f64) -> bool {
        match self {
            DecisionSet::Simplex => {
                a.iter().all(|&x| x >= -tol)
                    && (a.iter().sum::<f64>() - 1.0).abs() <= tol * a.len() as f64
            }
            DecisionSet::Box { lower, upper } => a
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(&x, (&l, &u))| {
                    x >= l - tol * (1.0 + l.abs()) && x <= u + tol * (1.0 + u.abs())
                }),
        }
    }

    /// Euclidean projection: sort-based for the simplex, a clamp for boxes.
    pub fn project(&self, a: &[f64]) -> Vec<f64> {
        match self {
            DecisionSet::Simplex => {
                let mut sorted = a.to_vec();
                sorted.sort_by(|x, y| y.partial_cmp(x).expect("finite iterates"));
                let mut cumulative = 0.0;
                let mut threshold = 0.0;
                for (i, &v) in sorted.iter().enumerate() {
                    cumulative += v;
                    let t = (cumulative - 1.0) / (i + 1) as f64;
                    if v - t > 0.0 {
                        threshold = t;
                    }
                }
                a.iter().map(|&v| (v - threshold).max(0.0)).collect()
            }
            DecisionSet::Box { lower, upper } => a
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&v, (&l, &u))| v.clamp(l, u))
                .collect(),
        }
    }

    fn diameter(&self, n: usize) -> f64 {
        match self {
            DecisionSet::Simplex => std::f64::consts::SQRT_2,
            DecisionSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| (u - l) * (u - l))
                .sum::<f64>()
                .sqrt()
                .max(f64::MIN_POSITIVE * n as f64),
        }
    }

    /// Exact maximizer of the linear objective `c . a` (first index wins ties).
    fn lp_max(&self, c: &[f64]) -> Vec<f64> {
        match self {
            DecisionSet::Simplex => {
                let mut best = 0;
                for (j, &v) in c.iter().enumerate() {
                    if v > c[best] {
                        best = j;
                    }
                }
                let mut a = vec![0.0; c.len()];
                a[best] = 1.0;
                a
            }
            DecisionSet::Box { lower, upper } => c
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&cj, (&l, &u))| if cj > 0.0 { u } else { l })
                .collect(),
        }
    }

    // Simplex corners, or box corners up to 2^n (n is small here).
    fn vertices(&self, n: usize) -> Vec<Vec<f64>> {
        match self {
            DecisionSet::Simplex => (0..n)
                .map(|j| {
                    let mut a = vec![0.0; n];
                    a[j] = 1.0;
                    a
                })
                .collect(),
            DecisionSet::Box { lower, upper } => {
                if n > 12 {
                    return vec![lower.clone(), upper.clone()];
                }
                (0..1usize << n)
                    .map(|mask| {
                        (0..n)
                            .map(|j| if mask >> j & 1 == 1 { upper[j] } else { lower[j] })
                            .collect()
                    })
                    .collect()
            }
        }
    }
}

/// A risk-constrained linear payoff problem: `m` scenarios by `n` assets.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinearPayoffProblem {
    /// Scenario rows: `returns[i][j]` pays when scenario `i` occurs and one
    /// unit sits in asset `j`.
    pub returns: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
    pub decision_set: DecisionSet,
    pub risk: RiskSpec,
    pub gamma: f64,
}

impl LinearPayoffProblem {
    pub fn n_assets(&self) -> usize {
        self.returns.first().map_or(0, Vec::len)
    }

    pub fn n_scenarios(&self) -> usize {
        self.returns.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.returns.len();
        if m == 0 {
            return Err(Error::InvalidProblem("need at least one scenario".into()));
        }
        let n = self.returns[0].len();
        if n == 0 {
            return Err(Error::InvalidProblem("need at least one asset".into()));
        }
        for (i, row) in self.returns.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidProblem(format!(
                    "scenario {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|r| !r.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "scenario {i} contains non-finite returns"
                )));
            }
        }
        if self.probs.len() != m {
            return Err(Error::InvalidProblem(format!(
                "{} probabilities for {m} scenarios",
                self.probs.len()
            )));
        }
        // Reuse the scenario-set rules for the probability vector.
        ScenarioSet::new(vec![0.0; m], self.probs.clone())?;
        if !self.gamma.is_finite() {
            return Err(Error::InvalidProblem("gamma must be finite".into()));
        }
        self.risk.validate()?;
        self.decision_set.validate(n)
    }
}

/// Solver knobs. Defaults are sized for desk-scale problems.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Tolerance handed to the 1-D risk evaluations.
    pub risk_tol: f64,
    /// Relative width tolerance of the multiplier bisection.
    pub dual_tol: f64,
    /// Scale-aware feasibility slack: `risk <= gamma + tol*(1 + |gamma|)`.
    pub feasibility_tol: f64,
    /// Projected-subgradient iterations per ascent round.
    pub subgradient_iters: u32,
    /// Alternating (eta, a) rounds per inner maximization.
    pub ascent_rounds: u32,
    /// Doublings of `lambda_max` before declaring the dual unbounded.
    pub max_lambda_doublings: u32,
    /// Golden-section iterations over lambda before giving up.
    pub max_dual_iters: u32,
    /// Epochs of the geometric-decay local polish (0 disables it).
    pub polish_epochs: u32,
    /// Iterations per polish epoch.
    pub polish_iters: u32,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            risk_tol: 1e-10,
            dual_tol: 1e-6,
            feasibility_tol: 1e-6,
            subgradient_iters: 500,
            ascent_rounds: 4,
            max_lambda_doublings: 40,
            max_dual_iters: 120,
            polish_epochs: 40,
            polish_iters: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterLimit,
}

/// Solution report.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SolveResult {
    pub a_star: Vec<f64>,
    pub lambda_star: f64,
    pub eta_star: f64,
    /// Optimal expected payoff (for `Infeasible`, the payoff at the probed
    /// minimum-risk point backing the verdict).
    pub value: f64,
    pub risk_at_opt: f64,
    pub status: SolveStatus,
    pub constraint_active: bool,
    /// Set when the dual is flat over the whole bracket, in which case
    /// `lambda_star` is one of many equally good multipliers.
    pub dual_flat: bool,
}

/// One inner maximization outcome: the point, its exact anchor and value.
#[derive(Debug, Clone)]
pub struct InnerPoint {
    pub a: Vec<f64>,
    pub eta: f64,
    /// `Psi(a, lambda, eta)`.
    pub value: f64,
    /// `Risk(-J(a))`, evaluated exactly.
    pub risk: f64,
    /// `E[J(a)]`.
    pub expected_payoff: f64,
    /// The final ascent round was still improving when the budget ran out.
    pub budget_exhausted: bool,
}

// Validated problem with normalized probabilities and cached mean returns.
struct Ctx<'p> {
    problem: &'p LinearPayoffProblem,
    probs: Vec<f64>,
    mean_returns: Vec<f64>,
    n: usize,
}

#[derive(Debug, Clone)]
struct Candidate {
    a: Vec<f64>,
    expected_payoff: f64,
    risk: f64,
    eta: f64,
}

impl<'p> Ctx<'p> {
    fn new(problem: &'p LinearPayoffProblem) -> Result<Self> {
        problem.validate()?;
        let sum: f64 = problem.probs.iter().sum();
        let probs: Vec<f64> = problem.probs.iter().map(|p| p / sum).collect();
        let n = problem.n_assets();
        let mut mean_returns = vec![0.0; n];
        for (row, &p) in problem.returns.iter().zip(&probs) {
            for (j, &r) in row.iter().enumerate() {
                mean_returns[j] += p * r;
            }
        }
        Ok(Ctx {
            problem,
            probs,
            mean_returns,
            n,
        })
    }

    fn payoff(&self, a: &[f64]) -> Vec<f64> {
        self.problem
            .returns
            .iter()
            .map(|row| row.iter().zip(a).map(|(r, w)| r * w).sum())
            .collect()
    }

    fn expected_payoff(&self, a: &[f64]) -> f64 {
        self.mean_returns.iter().zip(a).map(|(m, w)| m * w).sum()
    }

    /// `Risk(-J(a))` and its minimizing eta, closed-form where available.
    fn risk_of(&self, a: &[f64], opts: &SolveOptions) -> Result<(f64, f64)> {
        let losses: Vec<f64> = self.payoff(a).iter().map(|j| -j).collect();
        let set = ScenarioSet::new(losses, self.probs.clone())?;
        let eval = match self.problem.risk {
            RiskSpec::Oce { .. } => evaluate_risk(&self.problem.risk, &set, opts.risk_tol)?,
            _ => closed_form_risk(&self.problem.risk, &set)?,
        };
        Ok((eval.value, eval.eta_star))
    }

    fn candidate(&self, a: Vec<f64>, opts: &SolveOptions) -> Result<Candidate> {
        let (risk, eta) = self.risk_of(&a, opts)?;
        Ok(Candidate {
            expected_payoff: self.expected_payoff(&a),
            risk,
            eta,
            a,
        })
    }

    // Subgradient of a -> E[rho(-J(a), eta)] at fixed eta. With eta solved
    // exactly for the current a this is a Danskin subgradient of
    // a -> Risk(-J(a)).
    fn risk_grad(&self, a: &[f64], eta: f64) -> Vec<f64> {
        let risk = &self.problem.risk;
        let mut grad = vec![0.0; self.n];
        for (row, &p) in self.problem.returns.iter().zip(&self.probs) {
            let j: f64 = row.iter().zip(a).map(|(r, w)| r * w).sum();
            let factor = -p * rho_dx(risk, -j, eta);
            for (g, &r) in grad.iter_mut().zip(row) {
                *g += factor * r;
            }
        }
        grad
    }
}

/// `Psi(a, lambda, eta) = E[J(a) - lambda*rho(-J(a), eta)] + lambda*gamma`.
pub fn psi(problem: &LinearPayoffProblem, a: &[f64], lambda: f64, eta: f64) -> Result<f64> {
    let ctx = Ctx::new(problem)?;
    if a.len() != ctx.n {
        return Err(Error::InvalidProblem(format!(
            "point has {} coordinates, expected {}",
            a.len(),
            ctx.n
        )));
    }
    if !problem.decision_set.contains(a, 1e-9) {
        return Err(Error::OutsideDecisionSet);
    }
    if lambda < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let expectation: f64 = ctx
        .problem
        .returns
        .iter()
        .zip(&ctx.probs)
        .map(|(row, &p)| {
            let j: f64 = row.iter().zip(a).map(|(r, w)| r * w).sum();
            p * (j - lambda * rho(&problem.risk, -j, eta))
        })
        .sum();
    Ok(expectation + lambda * problem.gamma)
}

// Projected subgradient ascent of `eval` (value and subgradient at a
// point). The eta block is solved exactly inside `eval`, so this is the
// a-step of an alternation interleaved at every iterate. Runs
// `rounds` passes of `iters` steps `c_r / sqrt(k)` along the normalized
// subgradient with `c_r` shrinking per round, restarting each round from
// the best point so far; also probes the running iterate average.
struct AscentOutcome {
    a: Vec<f64>,
    improved_late: bool,
}

fn subgradient_ascent(
    ctx: &Ctx,
    eval: &mut impl FnMut(&Ctx, &[f64]) -> (f64, Vec<f64>),
    start: Vec<f64>,
    rounds: u32,
    iters: u32,
) -> AscentOutcome {
    let set = &ctx.problem.decision_set;
    let diameter = set.diameter(ctx.n);
    let mut best = set.project(&start);
    let (mut best_value, _) = eval(ctx, &best);
    let mut improved_late = false;

    for round in 0..rounds.max(1) {
        let step0 = diameter * 0.35f64.powi(round as i32).max(f64::MIN_POSITIVE);
        let mut a = best.clone();
        let mut average = a.clone();
        let round_start_value = best_value;
        for k in 1..=iters.max(1) {
            let (value, grad) = eval(ctx, &a);
            if value > best_value {
                best_value = value;
                best = a.clone();
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm <= 1e-300 {
                break;
            }
            let step = step0 / (k as f64).sqrt() / norm;
            let moved: Vec<f64> = a.iter().zip(&grad).map(|(x, g)| x + step * g).collect();
            a = set.project(&moved);
            for (avg, &x) in average.iter_mut().zip(&a) {
                *avg += (x - *avg) / (k + 1) as f64;
            }
        }
        for probe in [a, set.project(&average)] {
            let (value, _) = eval(ctx, &probe);
            if value > best_value {
                best_value = value;
                best = probe;
            }
        }
        improved_late = best_value > round_start_value + 1e-12 * (1.0 + best_value.abs());
    }
    AscentOutcome {
        a: best,
        improved_late,
    }
}

fn inner_max_impl(
    ctx: &Ctx,
    lambda: f64,
    opts: &SolveOptions,
    warm: Option<&[f64]>,
) -> Result<InnerPoint> {
    if lambda < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let gamma = ctx.problem.gamma;

    // lambda = 0 reduces to a linear program with an exact vertex solution.
    if lambda == 0.0 {
        let a = ctx.problem.decision_set.lp_max(&ctx.mean_returns);
        let cand = ctx.candidate(a, opts)?;
        return Ok(InnerPoint {
            value: cand.expected_payoff,
            a: cand.a,
            eta: cand.eta,
            risk: cand.risk,
            expected_payoff: cand.expected_payoff,
            budget_exhausted: false,
        });
    }

    let start = warm
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| ctx.problem.decision_set.lp_max(&ctx.mean_returns));
    // Objective Psi at the exact eta for the current a; its Danskin
    // subgradient is mean_returns - lambda * risk_grad.
    let mut eval = |ctx: &Ctx, a: &[f64]| -> (f64, Vec<f64>) {
        let (risk, eta) = ctx
            .risk_of(a, opts)
            .expect("risk evaluation on validated problem");
        let value = ctx.expected_payoff(a) - lambda * (risk - gamma);
        let rg = ctx.risk_grad(a, eta);
        let grad: Vec<f64> = ctx
            .mean_returns
            .iter()
            .zip(&rg)
            .map(|(m, g)| m - lambda * g)
            .collect();
        (value, grad)
    };
    let outcome = subgradient_ascent(
        ctx,
        &mut eval,
        start,
        opts.ascent_rounds,
        opts.subgradient_iters,
    );
    let best = ctx.candidate(outcome.a, opts)?;
    Ok(InnerPoint {
        value: best.expected_payoff - lambda * (best.risk - gamma),
        eta: best.eta,
        risk: best.risk,
        expected_payoff: best.expected_payoff,
        a: best.a,
        budget_exhausted: outcome.improved_late,
    })
}

/// Approximately maximizes `Psi(., lambda, .)` over the decision set and eta.
///
/// Alternates an exact eta step (1-D risk evaluation) with projected
/// subgradient ascent over `a`; concave in both blocks for the jointly
/// convex kernels, so the alternation settles on the inner value.
pub fn inner_max(
    problem: &LinearPayoffProblem,
    lambda: f64,
    opts: &SolveOptions,
) -> Result<InnerPoint> {
    let ctx = Ctx::new(problem)?;
    inner_max_impl(&ctx, lambda, opts, None)
}

// Bisects the constraint boundary on the segment [infeasible, feasible];
// returns the feasible-side crossing as an exact candidate.
fn crossing_candidate(
    ctx: &Ctx,
    infeasible: &Candidate,
    feasible: &Candidate,
    opts: &SolveOptions,
) -> Result<Candidate> {
    let gamma = ctx.problem.gamma;
    let point_at = |t: f64| -> Vec<f64> {
        infeasible
            .a
            .iter()
            .zip(&feasible.a)
            .map(|(x, y)| (1.0 - t) * x + t * y)
            .collect()
    };
    let mut lo = 0.0; // risk > gamma side
    let mut hi = 1.0; // risk <= gamma side
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let (risk, _) = ctx.risk_of(&point_at(mid), opts)?;
        if risk > gamma {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    ctx.candidate(point_at(hi), opts)
}

// Geometric-decay penalized local search around `start`: maximizes
// E[J] - penalty*(risk - gamma)_+ with shrinking steps, tracking the best
// feasible point and the best infeasible point seen.
fn penalized_polish(
    ctx: &Ctx,
    start: &Candidate,
    penalty: f64,
    opts: &SolveOptions,
) -> Result<(Option<Candidate>, Option<Candidate>)> {
    let gamma = ctx.problem.gamma;
    let set = &ctx.problem.decision_set;
    let mut best_feasible: Option<Candidate> = None;
    let mut best_infeasible: Option<Candidate> = None;
    let mut note = |cand: &Candidate| {
        let slot = if cand.risk <= gamma {
            &mut best_feasible
        } else {
            &mut best_infeasible
        };
        if slot
            .as_ref()
            .map_or(true, |b| cand.expected_payoff > b.expected_payoff)
        {
            *slot = Some(cand.clone());
        }
    };
    note(start);

    let mut a = start.a.clone();
    let mut step = 0.25 * set.diameter(ctx.n);
    for _ in 0..opts.polish_epochs {
        for _ in 0..opts.polish_iters {
            let cand = ctx.candidate(a.clone(), opts)?;
            let dir: Vec<f64> = if cand.risk > gamma {
                let rg = ctx.risk_grad(&a, cand.eta);
                ctx.mean_returns
                    .iter()
                    .zip(&rg)
                    .map(|(m, g)| m - penalty * g)
                    .collect()
            } else {
                ctx.mean_returns.clone()
            };
            note(&cand);
            let norm = dir.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm <= 1e-300 {
                break;
            }
            let moved: Vec<f64> = a.iter().zip(&dir).map(|(x, g)| x + step * g / norm).collect();
            a = set.project(&moved);
        }
        step *= 0.6;
    }
    let last = ctx.candidate(a, opts)?;
    note(&last);
    Ok((best_feasible, best_infeasible))
}

// Best feasible point recoverable from the pool: the best feasible
// candidate, improved by boundary crossings from the strongest infeasible
// candidates and a penalized local polish.
fn recover_primal(
    ctx: &Ctx,
    pool: &[Candidate],
    penalty: f64,
    opts: &SolveOptions,
) -> Result<Candidate> {
    let gamma = ctx.problem.gamma;
    let mut feasible: Vec<&Candidate> = pool.iter().filter(|c| c.risk <= gamma).collect();
    let mut infeasible: Vec<&Candidate> = pool.iter().filter(|c| c.risk > gamma).collect();
    let by_payoff =
        |x: &&Candidate, y: &&Candidate| y.expected_payoff.total_cmp(&x.expected_payoff);
    feasible.sort_by(by_payoff);
    infeasible.sort_by(by_payoff);

    let mut best = feasible
        .first()
        .map(|c| (*c).clone())
        .ok_or_else(|| Error::InvalidProblem("no feasible candidate in the pool".into()))?;

    for inf in infeasible.iter().take(6) {
        if inf.expected_payoff <= best.expected_payoff {
            continue;
        }
        let cross = crossing_candidate(ctx, inf, &best, opts)?;
        if cross.risk <= gamma && cross.expected_payoff > best.expected_payoff {
            best = cross;
        }
    }

    if opts.polish_epochs > 0 {
        let (feas, infeas) = penalized_polish(ctx, &best, penalty, opts)?;
        if let Some(cand) = feas {
            if cand.expected_payoff > best.expected_payoff {
                best = cand;
            }
        }
        if let Some(cand) = infeas {
            if cand.expected_payoff > best.expected_payoff {
                let cross = crossing_candidate(ctx, &cand, &best, opts)?;
                if cross.risk <= gamma && cross.expected_payoff > best.expected_payoff {
                    best = cross;
                }
            }
        }
    }
    Ok(best)
}

fn feasibility_slack(gamma: f64, opts: &SolveOptions) -> f64 {
    opts.feasibility_tol * (1.0 + gamma.abs())
}

/// Solves the problem through the dual: minimizes `d(lambda)` on
/// `[0, lambda_max]` with `lambda_max` doubling while the dual derivative
/// estimate stays negative, then recovers the primal at the dual argmin.
/// The argmin is located by bisection on the derivative's sign change. A
/// dual still falling after the doubling cap means no point satisfies the
/// risk bound, and the problem is reported `Infeasible`.
pub fn solve(problem: &LinearPayoffProblem, opts: &SolveOptions) -> Result<SolveResult> {
    let ctx = Ctx::new(problem)?;
    let gamma = problem.gamma;
    let slack = feasibility_slack(gamma, opts);

    // Unconstrained maximizer: exact vertex solution.
    let a0 = problem.decision_set.lp_max(&ctx.mean_returns);
    let base = ctx.candidate(a0, opts)?;
    if base.risk <= gamma + slack {
        let active = base.risk >= gamma - slack;
        return Ok(SolveResult {
            a_star: base.a,
            lambda_star: 0.0,
            eta_star: base.eta,
            value: base.expected_payoff,
            risk_at_opt: base.risk,
            status: SolveStatus::Optimal,
            constraint_active: active,
            // With the constraint tight at the unconstrained optimum the
            // dual is constant and any multiplier is an argmin.
            dual_flat: active,
        });
    }

    let mut pool: Vec<Candidate> = Vec::new();
    pool.push(base.clone());
    for vertex in problem.decision_set.vertices(ctx.n) {
        pool.push(ctx.candidate(vertex, opts)?);
    }

    // Double lambda_max while the dual derivative estimate gamma - risk is
    // negative at the right end.
    let mut lambda_max = 1.0;
    let mut probe = inner_max_impl(&ctx, lambda_max, opts, Some(&base.a))?;
    let mut doublings = 0;
    while gamma - probe.risk < 0.0 {
        pool.push(Candidate {
            a: probe.a.clone(),
            expected_payoff: probe.expected_payoff,
            risk: probe.risk,
            eta: probe.eta,
        });
        if doublings >= opts.max_lambda_doublings {
            let witness = pool
                .iter()
                .min_by(|x, y| x.risk.total_cmp(&y.risk))
                .expect("pool is nonempty")
                .clone();
            return Ok(SolveResult {
                a_star: witness.a,
                lambda_star: lambda_max,
                eta_star: witness.eta,
                value: witness.expected_payoff,
                risk_at_opt: witness.risk,
                status: SolveStatus::Infeasible,
                constraint_active: false,
                dual_flat: false,
            });
        }
        lambda_max *= 2.0;
        doublings += 1;
        probe = inner_max_impl(&ctx, lambda_max, opts, Some(&probe.a))?;
    }
    pool.push(Candidate {
        a: probe.a.clone(),
        expected_payoff: probe.expected_payoff,
        risk: probe.risk,
        eta: probe.eta,
    });
    let dual_at_max = probe.value;
    let dual_at_zero = base.expected_payoff; // d(0) = max E[J]

    // Bisection on the dual derivative estimate d'(lambda) = gamma - risk
    // at the inner argmax: nondecreasing since d is convex, negative at 0
    // (the unconstrained optimum breaches the bound) and nonnegative at
    // lambda_max after the doubling phase. Locating its sign change pins
    // the dual argmin far more robustly than comparing inexact dual values.
    let mut warm = probe.a.clone();
    let mut dual_min = dual_at_zero.min(dual_at_max);
    let mut status = SolveStatus::Optimal;
    let mut lo = 0.0;
    let mut hi = lambda_max;
    let width_tol = opts.dual_tol * (1.0 + lambda_max);
    let mut iterations = 0u32;
    while hi - lo > width_tol {
        if iterations >= opts.max_dual_iters {
            status = SolveStatus::IterLimit;
            break;
        }
        let mid = 0.5 * (lo + hi);
        let point = inner_max_impl(&ctx, mid, opts, Some(&warm))?;
        warm = point.a.clone();
        dual_min = dual_min.min(point.value);
        let derivative = gamma - point.risk;
        pool.push(Candidate {
            a: point.a,
            expected_payoff: point.expected_payoff,
            risk: point.risk,
            eta: point.eta,
        });
        if derivative < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let lambda_star = 0.5 * (lo + hi);

    let flat_tol = 1e-9 * (1.0 + dual_min.abs());
    let dual_flat = dual_at_zero - dual_min <= flat_tol && dual_at_max - dual_min <= flat_tol;

    let penalty = 4.0 * lambda_star + 1.0;
    let best = recover_primal(&ctx, &pool, penalty, opts)?;
    Ok(SolveResult {
        constraint_active: best.risk >= gamma - slack,
        a_star: best.a,
        lambda_star,
        eta_star: best.eta,
        value: best.expected_payoff,
        risk_at_opt: best.risk,
        status,
        dual_flat,
    })
}

/// Primal counterpart of [`solve`]: maximizes `E[J]` over the points whose
/// exact risk satisfies the bound (the set where the inner infimum over
/// lambda stays finite), via an adaptive exact penalty. Returns
/// `MinusInfinity` exactly when no decision satisfies the bound.
pub fn maxmin_value(problem: &LinearPayoffProblem, opts: &SolveOptions) -> Result<WorstCaseValue> {
    let ctx = Ctx::new(problem)?;
    let gamma = problem.gamma;
    let slack = feasibility_slack(gamma, opts);

    let mut pool: Vec<Candidate> = Vec::new();
    pool.push(ctx.candidate(problem.decision_set.lp_max(&ctx.mean_returns), opts)?);
    for vertex in problem.decision_set.vertices(ctx.n) {
        pool.push(ctx.candidate(vertex, opts)?);
    }

    // Feasibility: descend the exact risk from the lowest-risk candidate.
    let lowest = pool
        .iter()
        .min_by(|x, y| x.risk.total_cmp(&y.risk))
        .expect("pool is nonempty")
        .clone();
    let mut eval_neg_risk = |ctx: &Ctx, a: &[f64]| {
        let (risk, eta) = ctx
            .risk_of(a, opts)
            .expect("risk evaluation on validated problem");
        let grad: Vec<f64> = ctx.risk_grad(a, eta).iter().map(|g| -g).collect();
        (-risk, grad)
    };
    let descent = subgradient_ascent(
        &ctx,
        &mut eval_neg_risk,
        lowest.a.clone(),
        opts.ascent_rounds,
        opts.subgradient_iters,
    );
    let min_risk = ctx.candidate(descent.a, opts)?;
    pool.push(min_risk.clone());
    if min_risk.risk > gamma + slack {
        return Ok(WorstCaseValue::MinusInfinity);
    }

    // Adaptive exact penalty from the most promising start.
    let mut penalty = 1.0;
    let mut start = pool
        .iter()
        .max_by(|x, y| x.expected_payoff.total_cmp(&y.expected_payoff))
        .expect("pool is nonempty")
        .clone();
    for _ in 0..12 {
        let k = penalty;
        let mut eval = |ctx: &Ctx, a: &[f64]| {
            // exact risk via a fresh eta solve keeps the penalty honest
            let (risk, eta) = ctx
                .risk_of(a, opts)
                .expect("risk evaluation on validated problem");
            let ej = ctx.expected_payoff(a);
            if risk > gamma {
                let rg = ctx.risk_grad(a, eta);
                let grad: Vec<f64> = ctx
                    .mean_returns
                    .iter()
                    .zip(&rg)
                    .map(|(m, g)| m - k * g)
                    .collect();
                (ej - k * (risk - gamma), grad)
            } else {
                (ej, ctx.mean_returns.clone())
            }
        };
        let ascent = subgradient_ascent(
            &ctx,
            &mut eval,
            start.a.clone(),
            opts.ascent_rounds,
            opts.subgradient_iters,
        );
        let cand = ctx.candidate(ascent.a, opts)?;
        let feasible = cand.risk <= gamma + slack;
        if cand.expected_payoff > start.expected_payoff || feasible {
            pool.push(cand.clone());
            start = cand;
        }
        if feasible {
            break;
        }
        penalty *= 8.0;
    }

    let best = recover_primal(&ctx, &pool, penalty * 4.0, opts)?;
    Ok(WorstCaseValue::Finite(best.expected_payoff))
}

/// Grid for the saddle check: `lambda` points on `[0, lambda_max]` and
/// `eta` points on `[eta_star - eta_half_width, eta_star + eta_half_width]`.
#[derive(Debug, Clone, Copy)]
pub struct SaddleGrid {
    pub lambda_points: usize,
    pub eta_points: usize,
    pub lambda_max: f64,
    pub eta_half_width: f64,
}

/// Worst violations of the two saddle inequality families at the solution.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SaddleReport {
    pub psi_saddle: f64,
    /// max over grid eta of `Psi(lambda_star, eta) - Psi(lambda_star, eta_star)`.
    pub worst_eta_violation: f64,
    /// max over grid lambda of `Psi(lambda_star, eta_star) - Psi(lambda, eta_star)`.
    pub worst_lambda_violation: f64,
}

/// Checks the saddle inequalities on a grid around an optimal solution:
/// `eta_star` must maximize `Psi(a, lambda_star, .)` and `lambda_star`
/// must minimize `Psi(a, ., eta_star)` over the nonnegative multipliers.
pub fn verify_saddle(
    problem: &LinearPayoffProblem,
    result: &SolveResult,
    grid: &SaddleGrid,
) -> Result<SaddleReport> {
    if result.status != SolveStatus::Optimal {
        return Err(Error::SaddleRequiresOptimal);
    }
    if grid.lambda_points < 2 || grid.eta_points < 2 {
        return Err(Error::InvalidParameter(
            "saddle grid needs at least 2 points per axis".into(),
        ));
    }
    let ctx = Ctx::new(problem)?;
    let payoff = ctx.payoff(&result.a_star);
    let gamma = problem.gamma;
    let risk_spec = &problem.risk;
    let psi_at = |lambda: f64, eta: f64| -> f64 {
        let expectation: f64 = payoff
            .iter()
            .zip(&ctx.probs)
            .map(|(j, p)| p * (j - lambda * rho(risk_spec, -j, eta)))
            .sum();
        expectation + lambda * gamma
    };

    let psi_saddle = psi_at(result.lambda_star, result.eta_star);
    let mut worst_eta = f64::NEG_INFINITY;
    for i in 0..grid.eta_points {
        let eta = result.eta_star - grid.eta_half_width
            + 2.0 * grid.eta_half_width * i as f64 / (grid.eta_points - 1) as f64;
        worst_eta = worst_eta.max(psi_at(result.lambda_star, eta) - psi_saddle);
    }
    let mut worst_lambda = f64::NEG_INFINITY;
    for i in 0..grid.lambda_points {
        let lambda = grid.lambda_max * i as f64 / (grid.lambda_points - 1) as f64;
        worst_lambda = worst_lambda.max(psi_saddle - psi_at(lambda, result.eta_star));
    }
    Ok(SaddleReport {
        psi_saddle,
        worst_eta_violation: worst_eta,
        worst_lambda_violation: worst_lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utility::{expected_utility, UtilityFamilySpec};
    use approx::assert_abs_diff_eq;

    fn fixed_asset_problem(gamma: f64) -> LinearPayoffProblem {
        LinearPayoffProblem {
            returns: vec![vec![0.0], vec![10.0]],
            probs: vec![0.5, 0.5],
            decision_set: DecisionSet::Box {
                lower: vec![1.0],
                upper: vec![1.0],
            },
            risk: RiskSpec::Variance,
            gamma,
        }
    }

    // Safe asset pays 1 always; risky asset has mean 1.5 with heavy tails.
    // Under cvar(0.75) and weight t on the risky asset the loss quantile sits
    // at -1+4t and the risk is -1+5t, so gamma = 0 binds at t = 0.2 with
    // optimal value 1.1.
    fn two_asset_simplex(risk: RiskSpec, gamma: f64) -> LinearPayoffProblem {
        LinearPayoffProblem {
            returns: vec![
                vec![1.0, 8.0],
                vec![1.0, -4.0],
                vec![1.0, 5.0],
                vec![1.0, -3.0],
            ],
            probs: vec![0.25; 4],
            decision_set: DecisionSet::Simplex,
            risk,
            gamma,
        }
    }

    #[test]
    fn psi_hand_value() {
        let problem = fixed_asset_problem(0.0);
        let value = psi(&problem, &[1.0], 1.0, -5.0).unwrap();
        assert_abs_diff_eq!(value, -20.0, epsilon = 1e-12);
        assert_eq!(psi(&problem, &[1.0], 0.0, -5.0).unwrap(), 5.0);
    }

    #[test]
    fn psi_rejects_points_outside_the_set() {
        let problem = fixed_asset_problem(0.0);
        assert!(matches!(
            psi(&problem, &[0.5], 1.0, 0.0),
            Err(Error::OutsideDecisionSet)
        ));
        assert!(psi(&problem, &[1.0], -1.0, 0.0).is_err());
    }

    #[test]
    fn psi_matches_expected_utility() {
        let problem = two_asset_simplex(RiskSpec::Cvar { p: 0.8 }, 1.5);
        let fam = UtilityFamilySpec::new(problem.risk.clone(), problem.gamma);
        let mut rng = crate::rng::SplitMix64::new(77);
        for _ in 0..40 {
            let raw = [rng.next_open01(), rng.next_open01()];
            let a = problem.decision_set.project(&raw);
            let lambda = rng.next_in(0.0, 4.0);
            let eta = rng.next_in(-10.0, 10.0);
            let j = ScenarioSet::new(
                problem
                    .returns
                    .iter()
                    .map(|row| row[0] * a[0] + row[1] * a[1])
                    .collect(),
                problem.probs.clone(),
            )
            .unwrap();
            let lhs = psi(&problem, &a, lambda, eta).unwrap();
            let rhs = expected_utility(&fam, lambda, &j, eta).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn inner_max_at_lambda_zero_is_the_best_vertex() {
        let problem = two_asset_simplex(RiskSpec::Variance, 100.0);
        let point = inner_max(&problem, 0.0, &SolveOptions::default()).unwrap();
        // column means: asset 0 pays 1.0, asset 1 pays 1.5
        assert_eq!(point.a, vec![0.0, 1.0]);
        assert_eq!(point.value, 1.5);
    }

    #[test]
    fn inner_max_with_pinned_decision_reduces_to_risk_evaluation() {
        let problem = fixed_asset_problem(0.0);
        let opts = SolveOptions::default();
        let lambda = 1.0;
        let point = inner_max(&problem, lambda, &opts).unwrap();
        // E[J] - lambda*(Risk - gamma) = 5 - 25
        assert_abs_diff_eq!(point.value, -20.0, epsilon = 1e-9);
        assert_abs_diff_eq!(point.eta, -5.0, epsilon = 1e-6);
    }

    #[test]
    fn duplicate_columns_match_single_asset() {
        let single = LinearPayoffProblem {
            returns: vec![vec![2.0], vec![-1.0], vec![0.5]],
            probs: vec![1.0 / 3.0; 3],
            decision_set: DecisionSet::Simplex,
            risk: RiskSpec::Cvar { p: 0.9 },
            gamma: 5.0,
        };
        let doubled = LinearPayoffProblem {
            returns: vec![vec![2.0, 2.0], vec![-1.0, -1.0], vec![0.5, 0.5]],
            probs: vec![1.0 / 3.0; 3],
            decision_set: DecisionSet::Simplex,
            risk: RiskSpec::Cvar { p: 0.9 },
            gamma: 5.0,
        };
        let opts = SolveOptions::default();
        let a = inner_max(&single, 0.7, &opts).unwrap();
        let b = inner_max(&doubled, 0.7, &opts).unwrap();
        assert_abs_diff_eq!(a.value, b.value, epsilon = 1e-9 * (1.0 + a.value.abs()));
    }

    #[test]
    fn fixed_asset_binding_constraint() {
        let result = solve(&fixed_asset_problem(25.0), &SolveOptions::default()).unwrap();
        assert_eq!(result.status, SolveStatus::Optimal);
        assert_eq!(result.value, 5.0);
        assert_eq!(result.risk_at_opt, 25.0);
        assert!(result.constraint_active);
        assert!(result.dual_flat);
        assert_eq!(result.lambda_star, 0.0);
    }

    #[test]
    fn fixed_asset_infeasible() {
        let result = solve(&fixed_asset_problem(10.0), &SolveOptions::default()).unwrap();
        assert_eq!(result.status, SolveStatus::Infeasible);
        assert!(!result.constraint_active);
        assert!(result.risk_at_opt > 10.0);
        match maxmin_value(&fixed_asset_problem(10.0), &SolveOptions::default()).unwrap() {
            WorstCaseValue::MinusInfinity => {}
            other => panic!("expected minus infinity, got {other:?}"),
        }
    }

    #[test]
    fn fixed_asset_maxmin_is_exact() {
        match maxmin_value(&fixed_asset_problem(25.0), &SolveOptions::default()).unwrap() {
            WorstCaseValue::Finite(v) => assert_eq!(v, 5.0),
            other => panic!("expected finite value, got {other:?}"),
        }
    }

    #[test]
    fn binding_cvar_solution_sits_on_the_boundary() {
        let problem = two_asset_simplex(RiskSpec::Cvar { p: 0.75 }, 0.0);
        let opts = SolveOptions::default();
        let result = solve(&problem, &opts).unwrap();
        assert_eq!(result.status, SolveStatus::Optimal);
        assert!(result.constraint_active);
        assert!(result.risk_at_opt <= problem.gamma + 1e-9);
        assert!((result.risk_at_opt - problem.gamma).abs() <= 1e-7);
        // binds at t = 0.2 risky weight: value 1 + 0.5*0.2
        assert_abs_diff_eq!(result.value, 1.1, epsilon = 1e-6);
        assert_abs_diff_eq!(result.a_star[1], 0.2, epsilon = 1e-5);

        match maxmin_value(&problem, &opts).unwrap() {
            WorstCaseValue::Finite(v) => {
                assert_abs_diff_eq!(v, result.value, epsilon = 1e-6 * (1.0 + v.abs()));
            }
            other => panic!("expected finite maxmin value, got {other:?}"),
        }
    }

    #[test]
    fn relaxing_gamma_never_hurts() {
        let opts = SolveOptions::default();
        let mut last = f64::NEG_INFINITY;
        for gamma in [-0.5, 0.0, 0.5, 1.0, 2.0, 10.0] {
            let result = solve(
                &two_asset_simplex(RiskSpec::Cvar { p: 0.75 }, gamma),
                &opts,
            )
            .unwrap();
            if result.status == SolveStatus::Optimal {
                assert!(
                    result.value >= last - 1e-7 * (1.0 + result.value.abs()),
                    "value dropped from {last} to {} at gamma {gamma}",
                    result.value
                );
                last = result.value;
            }
        }
    }

    #[test]
    fn solve_is_deterministic() {
        let problem = two_asset_simplex(RiskSpec::Wmd { p: 0.6 }, 0.4);
        let opts = SolveOptions::default();
        let a = solve(&problem, &opts).unwrap();
        let b = solve(&problem, &opts).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn weak_duality_on_probed_multipliers() {
        let problem = two_asset_simplex(RiskSpec::Cvar { p: 0.75 }, 0.0);
        let opts = SolveOptions::default();
        let result = solve(&problem, &opts).unwrap();
        for lambda in [0.0, 0.2, 0.5, 1.0, 2.0, 5.0] {
            let dual = inner_max(&problem, lambda, &opts).unwrap().value;
            assert!(
                dual >= result.value - 1e-6 * (1.0 + result.value.abs()),
                "dual {dual} at lambda {lambda} below primal {}",
                result.value
            );
        }
    }

    #[test]
    fn saddle_report_on_equality_case() {
        // gamma equal to the risk at the pinned optimum: any multiplier is a
        // saddle and the lambda-side inequality holds with equality.
        let problem = fixed_asset_problem(25.0);
        let result = solve(&problem, &SolveOptions::default()).unwrap();
        let report = verify_saddle(
            &problem,
            &result,
            &SaddleGrid {
                lambda_points: 101,
                eta_points: 101,
                lambda_max: 2.0,
                eta_half_width: 12.0,
            },
        )
        .unwrap();
        let scale = 1.0 + report.psi_saddle.abs();
        assert!(report.worst_eta_violation <= 1e-9 * scale);
        assert!(report.worst_lambda_violation.abs() <= 1e-9 * scale);
    }

    #[test]
    fn saddle_check_requires_optimal_status() {
        let problem = fixed_asset_problem(10.0);
        let result = solve(&problem, &SolveOptions::default()).unwrap();
        assert!(matches!(
            verify_saddle(
                &problem,
                &result,
                &SaddleGrid {
                    lambda_points: 11,
                    eta_points: 11,
                    lambda_max: 1.0,
                    eta_half_width: 1.0,
                }
            ),
            Err(Error::SaddleRequiresOptimal)
        ));
    }

    #[test]
    fn problem_validation_catches_shape_errors() {
        let mut problem = fixed_asset_problem(0.0);
        problem.probs = vec![0.5];
        assert!(problem.validate().is_err());

        let mut problem = fixed_asset_problem(0.0);
        problem.returns = vec![vec![0.0], vec![10.0, 1.0]];
        assert!(problem.validate().is_err());

        let mut problem = fixed_asset_problem(0.0);
        problem.decision_set = DecisionSet::Box {
            lower: vec![2.0],
            upper: vec![1.0],
        };
        assert!(problem.validate().is_err());
    }

    #[test]
    fn problem_json_roundtrip() {
        let problem = two_asset_simplex(RiskSpec::Cvar { p: 0.95 }, -1.0);
        let json = serde_json::to_string(&problem).unwrap();
        let back: LinearPayoffProblem = serde_json::from_str(&json).unwrap();
        assert_eq!(problem, back);

        let parsed: LinearPayoffProblem = serde_json::from_str(
            r#"{
                "returns": [[1.0, 2.0], [1.0, -1.0]],
                "probs": [0.5, 0.5],
                "decision_set": {"type": "box", "lower": [0.0, 0.0], "upper": [1.0, 1.0]},
                "risk": {"kind": "wmd", "p": 0.5},
                "gamma": 0.25
            }"#,
        )
        .unwrap();
        assert!(parsed.validate().is_ok());
    }

    #[test]
    fn simplex_projection_properties() {
        let set = DecisionSet::Simplex;
        let p = set.project(&[0.2, -3.0, 5.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
        // already-feasible points stay put
        let q = set.project(&[0.25, 0.25, 0.5]);
        assert_abs_diff_eq!(q[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(q[2], 0.5, epsilon = 1e-12);
    }
}
