//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use crate::cadmmb::{self, AlgorithmParams, RunStatus};
use crate::centralized::{assemble_centralized, solve_centralized};
use crate::error::{Error, Result};
use crate::hydro::CascadeData;
use crate::io;
use crate::market::{extract_bid_curves, ScenarioSet};
use crate::presets;
use crate::scenarios::{out_of_sample_validate, settle_day, train_fixed_bids, Regime, Variant};
use crate::solver::{SolveOptions, SolveStatus};

/// Exit code for bad input files or arguments.
pub const EXIT_INPUT: i32 = 2;
/// Exit code when the budget ran out before a certificate was obtained.
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "vpp-bid", version, about = "Day-ahead bidding for a hydro-wind-solar portfolio")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a built-in cascade and synthetic scenarios.
    GenData(GenDataArgs),
    /// Compute bids for a cascade and scenario set.
    Solve(SolveArgs),
    /// Out-of-sample check of bids trained on one scenario set against another.
    Validate(ValidateArgs),
    /// Ex-post profit of bids on realized days.
    Settle(SettleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Toy,
    Desk,
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Centralized,
    Admm,
    Cadmmb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Milp,
    Lp,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Milp => Variant::Milp,
            VariantArg::Lp => Variant::LpRelaxation,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, value_enum, default_value = "desk")]
    pub preset: Preset,
    #[arg(long, env = "VPP_SCENARIOS", default_value_t = 5)]
    pub scenarios: usize,
    #[arg(long, env = "VPP_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "february")]
    pub month: String,
    /// Curve segments per plant (reference preset only).
    #[arg(long, default_value_t = 40)]
    pub segments: usize,
    #[arg(long, default_value_t = 24)]
    pub horizon: usize,
    /// Output directory; receives `cascade.json` and `scenarios.csv`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub cascade: PathBuf,
    /// Scenario file (`.csv` or `.json`).
    #[arg(long)]
    pub scenarios: PathBuf,
    #[arg(long, value_enum, default_value = "cadmmb")]
    pub method: Method,
    #[arg(long, env = "VPP_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "VPP_WORKERS", default_value_t = 1)]
    pub workers: usize,
    #[arg(long, env = "VPP_RHO0", default_value_t = AlgorithmParams::default().rho0)]
    pub rho0: f64,
    /// Gap tolerance, percent.
    #[arg(long, env = "VPP_EPS_GAP", default_value_t = AlgorithmParams::default().eps_gap)]
    pub eps_gap: f64,
    /// Upper-bound update threshold, percent.
    #[arg(long, env = "VPP_EPS_UB", default_value_t = AlgorithmParams::default().eps_ub)]
    pub eps_ub: f64,
    #[arg(long, env = "VPP_MAX_ITER", default_value_t = AlgorithmParams::default().max_iter)]
    pub max_iter: usize,
    /// Wall-clock budget in seconds.
    #[arg(long, env = "VPP_TIME_BUDGET", default_value_t = AlgorithmParams::default().time_budget)]
    pub time_budget: f64,
    /// Resume from a consensus state written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Output directory for bids, trace, certificate and solution.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub cascade: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, value_enum, default_value = "milp")]
    pub variant: VariantArg,
    #[arg(long, env = "VPP_WORKERS", default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct SettleArgs {
    #[arg(long)]
    pub cascade: PathBuf,
    /// Bid CSV (`hour,price,quantity`).
    #[arg(long)]
    pub bids: PathBuf,
    /// Realized days, one scenario per day.
    #[arg(long)]
    pub realized: PathBuf,
    /// Training scenarios; fixed single-point bids trained on their
    /// expected scenario are settled alongside as a baseline.
    #[arg(long)]
    pub baseline_from: Option<PathBuf>,
    /// Output directory for the hourly ledger and the report.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct CentralizedSummary {
    status: SolveStatus,
    objective: f64,
    best_bound: f64,
    wall_time: f64,
}

fn load(cascade: &Path, scenarios: &Path) -> Result<(CascadeData, ScenarioSet)> {
    let c = io::read_cascade(cascade)?;
    let mut s = io::read_scenarios(scenarios)?;
    s.normalize();
    s.validate(c.num_plants(), c.horizon())?;
    Ok((c, s))
}

/// Runs one command; returns the process exit code on success paths.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Validate(a) => validate_cmd(a),
        Command::Settle(a) => settle_cmd(a),
    }
}

fn gen_data(a: GenDataArgs) -> Result<i32> {
    let (cascade, set) = match a.preset {
        Preset::Toy => {
            let c = presets::toy_cascade(a.horizon, 3);
            let s = presets::toy_scenarios(&c, a.scenarios, a.seed)?;
            (c, s)
        }
        Preset::Desk => (presets::desk_cascade(), presets::desk_scenarios(a.scenarios, a.seed)?),
        Preset::Reference => {
            let c = presets::reference_cascade(a.segments, a.horizon);
            let s = presets::reference_scenarios(&c, a.scenarios, &a.month, a.seed)?;
            (c, s)
        }
    };
    fs::create_dir_all(&a.out)?;
    io::write_cascade(&a.out.join("cascade.json"), &cascade)?;
    io::write_scenarios(&a.out.join("scenarios.csv"), &set)?;
    println!(
        "wrote {} plants, {} scenarios x {} steps to {}",
        cascade.num_plants(),
        set.len(),
        set.horizon(),
        a.out.display()
    );
    Ok(0)
}

fn solve_cmd(a: SolveArgs) -> Result<i32> {
    let (cascade, set) = load(&a.cascade, &a.scenarios)?;
    fs::create_dir_all(&a.out)?;
    if a.method == Method::Centralized {
        let inst = assemble_centralized(&cascade, &set)?;
        let opts = SolveOptions {
            seed: a.seed,
            threads: a.workers,
            ..SolveOptions::default()
        }
        .with_time_limit(a.time_budget);
        let r = solve_centralized(&inst, &opts)?;
        let summary = CentralizedSummary {
            status: r.status,
            objective: r.objective,
            best_bound: r.best_bound,
            wall_time: r.wall_time,
        };
        io::write_json(&a.out.join("summary.json"), &summary)?;
        println!("{:?}: objective {:.4}, bound {:.4}, {:.1}s", r.status, r.objective, r.best_bound, r.wall_time);
        if !r.status.has_solution() {
            return Ok(match r.status {
                SolveStatus::TimeLimit => EXIT_BUDGET,
                _ => EXIT_INPUT,
            });
        }
        io::write_bids(&a.out.join("bids.csv"), &extract_bid_curves(&r.primal, &set, &inst.market)?)?;
        io::write_solution(&a.out.join("solution.csv"), &inst.spec, &r.primal)?;
        return Ok(if r.status == SolveStatus::Optimal { 0 } else { EXIT_BUDGET });
    }

    let params = AlgorithmParams {
        rho0: a.rho0,
        eps_gap: a.eps_gap,
        eps_ub: a.eps_ub,
        max_iter: a.max_iter,
        time_budget: a.time_budget,
        workers: a.workers,
        seed: a.seed,
        bounds: a.method == Method::Cadmmb,
        ..AlgorithmParams::default()
    };
    let resume = match &a.resume {
        Some(p) => Some(crate::consensus::ConsensusState::from_json(&fs::read_to_string(p)?)?),
        None => None,
    };
    let outcome = cadmmb::run_from(&cascade, &set, &params, resume)?;
    fs::write(a.out.join("trace.csv"), outcome.trace.to_csv()?)?;
    io::write_json(&a.out.join("certificate.json"), &outcome.certificate(&params))?;
    fs::write(a.out.join("state.json"), outcome.state.to_json()?)?;
    if let Some(x) = &outcome.point {
        io::write_bids(&a.out.join("bids.csv"), &outcome.bids)?;
        io::write_solution(&a.out.join("solution.csv"), &outcome.instance.spec, x)?;
    }
    info!("outputs written to {}", a.out.display());
    println!(
        "{:?} after {} iterations: LB {:.4}, UB {:.4}, gap {:.5}%, {:.1}s",
        outcome.status, outcome.iterations, outcome.lower_bound, outcome.upper_bound, outcome.gap, outcome.wall_time
    );
    Ok(match outcome.status {
        RunStatus::Certified | RunStatus::Converged => 0,
        RunStatus::IterationLimit | RunStatus::TimeBudget => EXIT_BUDGET,
    })
}

fn validate_cmd(a: ValidateArgs) -> Result<i32> {
    let (cascade, train) = load(&a.cascade, &a.train)?;
    let mut test = io::read_scenarios(&a.test)?;
    test.normalize();
    test.validate(cascade.num_plants(), cascade.horizon())?;
    let sample = out_of_sample_validate(&train, &test, &cascade, a.variant.into(), &SolveOptions::default(), a.workers)?;
    println!("{}", serde_json::to_string_pretty(&sample)?);
    Ok(0)
}

#[derive(Debug, Serialize)]
struct DayProfit {
    day: usize,
    profit: Option<f64>,
    profit_per_mwh: Option<f64>,
    baseline_profit: Option<f64>,
    by_regime: Vec<(Regime, f64, f64)>,
}

#[derive(Debug, Serialize)]
struct LedgerRow {
    day: usize,
    hour: usize,
    regime: Option<Regime>,
    price: f64,
    offer: f64,
    production: f64,
    shortfall: f64,
    surplus: f64,
    profit: f64,
}

fn settle_cmd(a: SettleArgs) -> Result<i32> {
    let cascade = io::read_cascade(&a.cascade)?;
    let curves = io::read_bids(&a.bids)?;
    let days = io::read_scenarios(&a.realized)?;
    if days.is_empty() {
        return Err(Error::Invalid("no realized days".into()));
    }
    days.validate(cascade.num_plants(), cascade.horizon())?;
    let opts = SolveOptions::default();
    let baseline = match &a.baseline_from {
        Some(p) => {
            let mut train = io::read_scenarios(p)?;
            train.normalize();
            train.validate(cascade.num_plants(), cascade.horizon())?;
            Some(train_fixed_bids(&cascade, &train, &opts)?.curves)
        }
        None => None,
    };
    fs::create_dir_all(&a.out)?;
    let mut ledger = csv::Writer::from_path(a.out.join("ledger.csv"))?;
    let mut rows = Vec::with_capacity(days.len());
    for (day, s) in days.scenarios.iter().enumerate() {
        let report = settle_day(&cascade, s, &curves, &opts)?;
        let baseline_profit = match &baseline {
            Some(b) => settle_day(&cascade, s, b, &opts)?.map(|r| r.settlement.profit),
            None => None,
        };
        if let Some(r) = &report {
            for (k, h) in r.settlement.hours.iter().enumerate() {
                ledger.serialize(LedgerRow {
                    day,
                    hour: h.hour,
                    regime: r.regimes.get(k).copied(),
                    price: h.price,
                    offer: h.offer,
                    production: h.production,
                    shortfall: h.shortfall,
                    surplus: h.surplus,
                    profit: h.profit,
                })?;
            }
        }
        rows.push(DayProfit {
            day,
            profit: report.as_ref().map(|r| r.settlement.profit),
            profit_per_mwh: report.as_ref().map(|r| r.settlement.profit_per_mwh()),
            baseline_profit,
            by_regime: report.map(|r| r.by_regime).unwrap_or_default(),
        });
    }
    ledger.flush()?;
    io::write_json(&a.out.join("settlement.json"), &rows)?;
    let settled: Vec<f64> = rows.iter().filter_map(|r| r.profit).collect();
    if settled.is_empty() {
        return Err(Error::Infeasible("no realized day could honour the bids".into()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("mean profit {:.2} over {} of {} days", mean(&settled), settled.len(), rows.len());
    let base: Vec<f64> = rows.iter().filter_map(|r| r.baseline_profit).collect();
    if !base.is_empty() {
        println!("fixed-bid baseline mean profit {:.2} over {} days", mean(&base), base.len());
    }
    Ok(0)
}

/// Maps an error to the documented exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Invalid(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Infeasible(_) => EXIT_INPUT,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_solve_flags() {
        let cli = Cli::try_parse_from([
            "vpp-bid", "solve", "--cascade", "c.json", "--scenarios", "s.csv", "--method", "admm", "--rho0", "2.5",
            "--max-iter", "7",
        ])
        .unwrap();
        match cli.command {
            Command::Solve(a) => {
                assert_eq!(a.method, Method::Admm);
                assert_eq!(a.rho0, 2.5);
                assert_eq!(a.max_iter, 7);
            }
            _ => panic!("wrong subcommand"),
        }
    }

    #[test]
    fn missing_file_is_an_input_error() {
        let cli = Cli::try_parse_from([
            "vpp-bid", "solve", "--cascade", "/nonexistent/c.json", "--scenarios", "/nonexistent/s.csv",
        ])
        .unwrap();
        let e = execute(cli).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_INPUT);
    }
}
