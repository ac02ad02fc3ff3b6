//! Command-line surface.
//!
//! Subcommands: `eval-risk`, `check-axioms`, `solve`, `table3`,
//! `plot-utility`. Exit codes: 0 on success (an infeasible problem is a
//! reported result, not a failure), 2 on I/O or parse failures, 3 on
//! invalid arguments. Table output rounds monetary quantities to one
//! decimal; JSON and CSV carry full precision. Every subcommand is
//! deterministic given its flags.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::axioms::{check_axiom, Axiom, AxiomReport};
use crate::error::Error;
use crate::gaussian::{reproduce_table3_scaled, table3_csv};
use crate::risk::{closed_form_risk, evaluate_risk, OceUtility, RiskSpec};
use crate::scenario::ScenarioSet;
use crate::solver::{solve, LinearPayoffProblem, SolveOptions};
use crate::utility::{utility_curve, UtilityFamilySpec};

const EXIT_OK: i32 = 0;
const EXIT_DATA: i32 = 2;
const EXIT_ARGS: i32 = 3;

#[derive(Parser)]
#[command(
    name = "riskinf",
    version,
    about = "Scenario-based risk measures, risk-constrained portfolio duals and loss-aversion utilities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a risk measure on a scenario CSV (`value,prob` with header)
    EvalRisk(EvalRiskArgs),
    /// Run the five coherence-axiom checks on a risk measure
    CheckAxioms(CheckAxiomsArgs),
    /// Solve a risk-constrained linear payoff problem from JSON
    Solve(SolveArgs),
    /// Recompute the reference two-asset table and flag deviations
    Table3(Table3Args),
    /// Sample a loss-aversion utility curve to CSV
    PlotUtility(PlotUtilityArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Args)]
struct RiskFlags {
    /// Risk kind: variance, cvar, wmd or oce
    #[arg(long)]
    risk: String,
    /// Confidence level in (0,1), required for cvar and wmd
    #[arg(long)]
    p: Option<f64>,
    /// Comma-separated breakpoints of the oce utility
    #[arg(long, value_name = "LIST")]
    oce_breakpoints: Option<String>,
    /// Comma-separated slopes of the oce utility (one more than breakpoints)
    #[arg(long, value_name = "LIST")]
    oce_slopes: Option<String>,
}

#[derive(Args)]
struct EvalRiskArgs {
    #[command(flatten)]
    risk: RiskFlags,
    /// Scenario CSV file
    file: PathBuf,
    /// Solver tolerance
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args)]
struct CheckAxiomsArgs {
    #[command(flatten)]
    risk: RiskFlags,
    #[arg(long, default_value_t = 200)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative comparison tolerance
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args)]
struct SolveArgs {
    /// Problem JSON file
    file: PathBuf,
    #[arg(long, default_value_t = 500)]
    subgradient_iters: u32,
    #[arg(long, default_value_t = 4)]
    ascent_rounds: u32,
    #[arg(long, default_value_t = 1e-6)]
    dual_tol: f64,
    #[arg(long, default_value_t = 40)]
    polish_epochs: u32,
}

#[derive(Args)]
struct Table3Args {
    /// Scale on the per-column flag tolerances (0 flags all inexact cells)
    #[arg(long, default_value_t = 1.0)]
    tolerance: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct PlotUtilityArgs {
    #[command(flatten)]
    risk: RiskFlags,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Sample range as `LO:HI`
    #[arg(long)]
    range: String,
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Output CSV path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

struct CliError {
    code: i32,
    message: String,
}

fn args_err(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_ARGS,
        message: message.into(),
    }
}

fn data_err(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_DATA,
        message: message.into(),
    }
}

impl RiskFlags {
    fn to_spec(&self) -> Result<RiskSpec, CliError> {
        let spec = match self.risk.as_str() {
            "variance" => {
                if self.p.is_some() {
                    return Err(args_err("--p does not apply to variance"));
                }
                RiskSpec::Variance
            }
            "cvar" | "wmd" => {
                let p = self
                    .p
                    .ok_or_else(|| args_err(format!("--p is required for {}", self.risk)))?;
                if self.risk == "cvar" {
                    RiskSpec::Cvar { p }
                } else {
                    RiskSpec::Wmd { p }
                }
            }
            "oce" => {
                let breakpoints = parse_list(
                    self.oce_breakpoints
                        .as_deref()
                        .ok_or_else(|| args_err("--oce-breakpoints is required for oce"))?,
                )?;
                let slopes = parse_list(
                    self.oce_slopes
                        .as_deref()
                        .ok_or_else(|| args_err("--oce-slopes is required for oce"))?,
                )?;
                let utility = OceUtility::new(breakpoints, slopes)
                    .map_err(|e| args_err(e.to_string()))?;
                RiskSpec::Oce { utility }
            }
            other => {
                return Err(args_err(format!(
                    "unknown risk kind `{other}` (expected variance, cvar, wmd or oce)"
                )))
            }
        };
        spec.validate().map_err(|e| args_err(e.to_string()))?;
        Ok(spec)
    }
}

fn parse_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| args_err(format!("cannot parse `{s}` as a number")))
        })
        .collect()
}

/// Parses arguments, dispatches and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    EXIT_OK
                }
                _ => {
                    eprint!("{err}");
                    EXIT_ARGS
                }
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("error: {}", err.message);
            err.code
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::EvalRisk(args) => cmd_eval_risk(args),
        Command::CheckAxioms(args) => cmd_check_axioms(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Table3(args) => cmd_table3(args),
        Command::PlotUtility(args) => cmd_plot_utility(args),
    }
}

fn read_file(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| data_err(format!("cannot read {}: {e}", path.display())))
}

fn cmd_eval_risk(args: EvalRiskArgs) -> Result<(), CliError> {
    let spec = args.risk.to_spec()?;
    if args.format == Format::Csv {
        return Err(args_err("eval-risk supports table or json output"));
    }
    if !(args.tol > 0.0) {
        return Err(args_err("--tol must be positive"));
    }
    let text = read_file(&args.file)?;
    let scenarios = ScenarioSet::from_csv(&text).map_err(|e| data_err(e.to_string()))?;
    let eval = evaluate_risk(&spec, &scenarios, args.tol).map_err(|e| data_err(e.to_string()))?;
    let closed = match spec {
        RiskSpec::Oce { .. } => None,
        _ => Some(closed_form_risk(&spec, &scenarios).map_err(|e| data_err(e.to_string()))?),
    };

    match args.format {
        Format::Table => {
            println!("risk:  {spec}");
            println!("value: {:.1}", eval.value);
            println!("eta:   {:.1}", eval.eta_star);
            if let Some(closed) = &closed {
                println!("closed-form delta: {:e}", (eval.value - closed.value).abs());
            }
        }
        Format::Json => {
            let delta = closed.as_ref().map(|c| (eval.value - c.value).abs());
            let payload = serde_json::json!({
                "risk": spec.to_string(),
                "evaluation": eval,
                "closed_form": closed,
                "delta": delta,
            });
            println!("{}", serde_json::to_string_pretty(&payload).expect("serializable"));
        }
        Format::Csv => unreachable!("rejected above"),
    }
    Ok(())
}

fn cmd_check_axioms(args: CheckAxiomsArgs) -> Result<(), CliError> {
    let spec = args.risk.to_spec()?;
    if args.format == Format::Csv {
        return Err(args_err("check-axioms supports table or json output"));
    }
    let reports: Vec<AxiomReport> = Axiom::ALL
        .iter()
        .map(|&axiom| check_axiom(&spec, axiom, args.trials, args.seed, args.tol))
        .collect::<Result<_, Error>>()
        .map_err(|e| args_err(e.to_string()))?;

    match args.format {
        Format::Table => {
            println!("{:<24} {:<8} trials", "axiom", "verdict");
            for report in &reports {
                let verdict = if report.holds { "holds" } else { "fails" };
                println!("{:<24} {:<8} {}", report.axiom.to_string(), verdict, report.trials);
                if let Some(w) = &report.witness {
                    match w.scalar {
                        Some(s) => println!(
                            "  witness: lhs={} rhs={} scalar={s}",
                            w.lhs, w.rhs
                        ),
                        None => println!("  witness: lhs={} rhs={}", w.lhs, w.rhs),
                    }
                }
            }
        }
        Format::Json => {
            println!("{}", serde_json::to_string_pretty(&reports).expect("serializable"));
        }
        Format::Csv => unreachable!("rejected above"),
    }
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    if !(args.dual_tol > 0.0) {
        return Err(args_err("--dual-tol must be positive"));
    }
    let text = read_file(&args.file)?;
    let problem: LinearPayoffProblem =
        serde_json::from_str(&text).map_err(|e| data_err(format!("invalid problem JSON: {e}")))?;
    let opts = SolveOptions {
        subgradient_iters: args.subgradient_iters,
        ascent_rounds: args.ascent_rounds.max(1),
        dual_tol: args.dual_tol,
        polish_epochs: args.polish_epochs,
        ..SolveOptions::default()
    };
    let result = solve(&problem, &opts).map_err(|e| data_err(e.to_string()))?;
    println!("{}", serde_json::to_string_pretty(&result).expect("serializable"));
    Ok(())
}

fn cmd_table3(args: Table3Args) -> Result<(), CliError> {
    if args.tolerance < 0.0 {
        return Err(args_err("--tolerance must be nonnegative"));
    }
    let rows = reproduce_table3_scaled(args.tolerance);
    match args.format {
        Format::Csv => print!("{}", table3_csv(&rows)),
        Format::Json => {
            println!("{}", serde_json::to_string_pretty(&rows).expect("serializable"));
        }
        Format::Table => {
            println!(
                "{:<6} {:>8} {:>8} {:>8} {:>9} {:>9} {:>7} {:>7}  flag",
                "p", "gamma", "a", "a_ref", "eta", "eta_ref", "theta", "t_ref"
            );
            for row in &rows {
                println!(
                    "{:<6} {:>8.1} {:>8.2} {:>8.2} {:>9.1} {:>9.1} {:>7.1} {:>7.1}  {}",
                    row.p,
                    row.gamma,
                    row.a_sharp_computed,
                    row.a_sharp_paper,
                    row.eta_computed,
                    row.eta_paper,
                    row.theta_computed,
                    row.theta_paper,
                    row.flagged_cells.join(";")
                );
            }
        }
    }
    Ok(())
}

fn cmd_plot_utility(args: PlotUtilityArgs) -> Result<(), CliError> {
    let spec = args.risk.to_spec()?;
    let (x_min, x_max) = parse_range(&args.range)?;
    let fam = UtilityFamilySpec::new(spec, args.gamma);
    let points = utility_curve(&fam, args.lambda, args.eta, x_min, x_max, args.points)
        .map_err(|e| args_err(e.to_string()))?;
    let mut csv = String::from("x,utility\n");
    for (x, u) in points {
        csv.push_str(&format!("{x},{u}\n"));
    }
    match &args.out {
        Some(path) => std::fs::write(path, csv)
            .map_err(|e| data_err(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn parse_range(text: &str) -> Result<(f64, f64), CliError> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| args_err(format!("range must be LO:HI, got `{text}`")))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| args_err(format!("cannot parse range start `{lo}`")))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| args_err(format!("cannot parse range end `{hi}`")))?;
    Ok((lo, hi))
}
