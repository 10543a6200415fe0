//! Consensus ADMM with certified bounds.
//!
//! Each iteration runs the subproblems in parallel, averages, updates the
//! duals, then tightens a Lagrangian lower bound and a fixed-binary upper
//! bound until their relative gap falls under the tolerance.

use std::collections::HashSet;
use std::time::Instant;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::centralized::{
    assemble_centralized, fixed_binary_lp, initial_lower_bound, initial_upper_bound, CentralizedInstance,
    UpperBoundSource,
};
use crate::consensus::{
    balancing_dual_value, hydro_dual_value, lp_start, solve_balancing_step, solve_hydro_step, BalancingStep,
    ConsensusProblem, ConsensusState, HydroStep, PenaltyConfig,
};
use crate::error::{invalid, Error, Result};
use crate::hydro::CascadeData;
use crate::market::{extract_bid_curves, BidCurve, ScenarioSet};
use crate::runtime::{dispatch_round, step_one_tasks, TaskId, TaskMessage};
use crate::solver::{SolveOptions, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmParams {
    pub rho0: f64,
    /// Termination gap, percent.
    pub eps_gap: f64,
    /// Relative primal-residual change that triggers a projection, percent.
    pub eps_ub: f64,
    pub max_iter: usize,
    /// Project at least this often (iterations).
    pub ub_every: usize,
    /// Evaluate the dual bound every this many iterations.
    pub lb_every: usize,
    pub mu: f64,
    pub tau_incr: f64,
    pub tau_decr: f64,
    /// Residual balancing on/off.
    pub adaptive_rho: bool,
    /// Wall-clock budget, seconds.
    pub time_budget: f64,
    pub workers: usize,
    pub seed: u64,
    /// Bounds and certification on/off; off gives plain consensus ADMM.
    pub bounds: bool,
    /// Plain ADMM stops once both residuals fall under this.
    pub residual_tol: f64,
    pub subproblem_time_limit: Option<f64>,
    pub penalty: PenaltyConfig,
    /// Start from the consensus LP relaxation (point and duals) instead of
    /// the initial upper-bound point with zero duals.
    pub lp_start: bool,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        Self {
            rho0: 1.0,
            eps_gap: 0.01,
            eps_ub: 0.01,
            max_iter: 5000,
            ub_every: 10,
            lb_every: 1,
            mu: 10.0,
            tau_incr: 2.0,
            tau_decr: 2.0,
            adaptive_rho: true,
            time_budget: 4.0 * 3600.0,
            workers: 1,
            seed: 0,
            bounds: true,
            residual_tol: 1e-3,
            subproblem_time_limit: None,
            penalty: PenaltyConfig::default(),
            lp_start: true,
        }
    }
}

impl AlgorithmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_gap > 0.0 && self.eps_ub > 0.0) {
            return invalid("gap and projection tolerances must be positive");
        }
        if self.max_iter == 0 || self.ub_every == 0 || self.lb_every == 0 {
            return invalid("iteration limit and cadences must be at least 1");
        }
        if !(self.rho0 > 0.0) || !(self.mu > 1.0) || !(self.tau_incr > 1.0) || !(self.tau_decr > 1.0) {
            return invalid("need ρ⁰ > 0, μ > 1 and τ > 1");
        }
        if self.workers == 0 {
            return invalid("need at least one worker");
        }
        if !(self.time_budget > 0.0) {
            return invalid("time budget must be positive");
        }
        Ok(())
    }
}

/// Relative gap in percent, `100·|UB − LB|/|UB|`.
pub fn gap(ub: f64, lb: f64) -> f64 {
    if !ub.is_finite() || !lb.is_finite() {
        return f64::INFINITY;
    }
    if ub == 0.0 {
        warn!("upper bound is exactly zero; gap reported as infinite");
        return f64::INFINITY;
    }
    100.0 * (ub - lb).abs() / ub.abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub lb: f64,
    pub ub: f64,
    pub gap: f64,
    pub rho: f64,
    pub primal: f64,
    pub dual: f64,
    /// Largest `|λ_a + λ_b|` after the dual step.
    pub zero_sum: f64,
    pub wall: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundsTrace {
    pub rows: Vec<TraceRow>,
    pub initial_lb: f64,
    pub initial_ub: f64,
    /// Prop.-1 value at zero duals.
    pub zero_dual_lb: f64,
    pub projections: usize,
    pub infeasible_projections: usize,
    pub skipped_lb: usize,
}

impl BoundsTrace {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Runtime(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Runtime(e.to_string()))
    }

    /// Best-so-far bounds never move the wrong way.
    pub fn is_monotone(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].lb >= w[0].lb && w[1].ub <= w[0].ub)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    /// Gap at or under the tolerance.
    Certified,
    /// Plain ADMM reached consensus (no certificate).
    Converged,
    IterationLimit,
    TimeBudget,
}

#[derive(Debug, Clone)]
pub struct CadmmbOutcome {
    pub status: RunStatus,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub gap: f64,
    pub iterations: usize,
    pub wall_time: f64,
    pub trace: BoundsTrace,
    /// Best feasible point, in the centralized layout.
    pub point: Option<Vec<f64>>,
    pub bids: Vec<BidCurve>,
    pub state: ConsensusState,
    pub instance: CentralizedInstance,
}

impl CadmmbOutcome {
    pub fn certificate(&self, params: &AlgorithmParams) -> Certificate {
        Certificate {
            status: self.status,
            lower_bound: self.lower_bound,
            upper_bound: self.upper_bound,
            gap_percent: self.gap,
            iterations: self.iterations,
            wall_time: self.wall_time,
            seed: params.seed,
            params: *params,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub status: RunStatus,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub gap_percent: f64,
    pub iterations: usize,
    pub wall_time: f64,
    pub seed: u64,
    pub params: AlgorithmParams,
}

/// Lagrangian bound `D(λ) = D^B(λ) + Σ D^H_{n,ω}(λ)`; `None` when the duals
/// break the zero-sum condition or a piece has no finite bound.
pub fn evaluate_dual_lower_bound(
    problem: &ConsensusProblem,
    state: &ConsensusState,
    workers: usize,
) -> Result<Option<f64>> {
    let tol = 1e-8 * state.dual_scale().max(1.0);
    let violation = state.zero_sum_violation();
    if violation > tol {
        warn!("dual zero-sum violated by {violation:.3e}; bound skipped");
        return Ok(None);
    }
    let d = state.dims;
    let mut tasks: Vec<_> = (0..d.plants)
        .flat_map(|plant| (0..d.scenarios).map(move |scenario| TaskId::LowerHydro { plant, scenario }))
        .map(|id| TaskMessage::bare(id, state.iteration))
        .collect();
    tasks.push(TaskMessage::bare(TaskId::LowerBalancing, state.iteration));
    let results = dispatch_round(&tasks, workers, |t| match t.id {
        TaskId::LowerHydro { plant, scenario } => hydro_dual_value(problem, state, plant, scenario),
        TaskId::LowerBalancing => balancing_dual_value(problem, state),
        other => Err(Error::Runtime(format!("unexpected task {other}"))),
    })?;
    let total: f64 = results.iter().map(|r| r.output).sum();
    if !total.is_finite() {
        warn!("dual bound not finite ({total}); skipped");
        return Ok(None);
    }
    Ok(Some(total))
}

/// Binaries harvested from hydro steps, in the centralized layout.
pub fn harvest_binaries(instance: &CentralizedInstance, steps: &[HydroStep]) -> Vec<(VarId, f64)> {
    let mut out = Vec::new();
    for s in steps {
        let ids = instance.hydro[s.plant][s.scenario].binaries();
        out.extend(ids.into_iter().zip(s.binaries.iter().copied()));
    }
    out
}

/// Fixes the harvested binaries in the full model and solves the LP.
pub fn quasi_projection_upper_bound(
    instance: &CentralizedInstance,
    binaries: &[(VarId, f64)],
    options: &SolveOptions,
) -> Result<Option<(f64, Vec<f64>)>> {
    fixed_binary_lp(instance, binaries, options)
}

fn step_one(
    problem: &ConsensusProblem,
    state: &ConsensusState,
    workers: usize,
) -> Result<(Vec<HydroStep>, BalancingStep)> {
    enum Out {
        Hydro(Box<HydroStep>),
        Balancing(BalancingStep),
    }
    let d = state.dims;
    let tasks = step_one_tasks(d.plants, d.scenarios, state.iteration);
    let results = dispatch_round(&tasks, workers, |t| match t.id {
        TaskId::Hydro { plant, scenario } => {
            solve_hydro_step(problem, state, plant, scenario).map(|h| Out::Hydro(Box::new(h)))
        }
        TaskId::Balancing => solve_balancing_step(problem, state).map(Out::Balancing),
        other => Err(Error::Runtime(format!("unexpected task {other}"))),
    })?;
    let mut hydro = Vec::with_capacity(tasks.len() - 1);
    let mut balancing = None;
    for r in results {
        match r.output {
            Out::Hydro(h) => hydro.push(*h),
            Out::Balancing(b) => balancing = Some(b),
        }
    }
    let balancing = balancing.ok_or_else(|| Error::Runtime("balancing result missing".into()))?;
    Ok((hydro, balancing))
}

/// Runs the full algorithm from scratch.
pub fn run(cascade: &CascadeData, scenarios: &ScenarioSet, params: &AlgorithmParams) -> Result<CadmmbOutcome> {
    run_from(cascade, scenarios, params, None)
}

/// Runs the algorithm, optionally resuming from a checkpointed state.
pub fn run_from(
    cascade: &CascadeData,
    scenarios: &ScenarioSet,
    params: &AlgorithmParams,
    resume: Option<ConsensusState>,
) -> Result<CadmmbOutcome> {
    params.validate()?;
    let start = Instant::now();
    let instance = assemble_centralized(cascade, scenarios)?;
    let mut problem = ConsensusProblem::new(cascade, scenarios)?;
    problem.penalty = params.penalty;
    problem.solve.seed = params.seed;
    problem.solve.time_limit = params.subproblem_time_limit;
    let lp_opts = SolveOptions {
        seed: params.seed,
        ..SolveOptions::default()
    };

    let mut trace = BoundsTrace {
        initial_lb: f64::NEG_INFINITY,
        initial_ub: f64::INFINITY,
        zero_dual_lb: f64::NEG_INFINITY,
        ..Default::default()
    };
    let mut lb = f64::NEG_INFINITY;
    let mut ub = f64::INFINITY;
    let mut best: Option<Vec<f64>> = None;
    let dims = problem.dims();
    let mut state = match resume {
        Some(s) => {
            if s.dims != dims {
                return invalid("checkpoint dimensions do not match the instance");
            }
            s
        }
        None => ConsensusState::new(dims, params.rho0),
    };
    let resumed = state.iteration > 0;

    if params.bounds {
        trace.initial_lb = initial_lower_bound(&instance, &lp_opts)?;
        let zero = ConsensusState::new(dims, params.rho0);
        if let Some(v) = evaluate_dual_lower_bound(&problem, &zero, params.workers)? {
            trace.zero_dual_lb = v;
        }
        lb = trace.initial_lb.max(trace.zero_dual_lb);
    }
    let ub0 = initial_upper_bound(&instance, &lp_opts.with_time_limit(params.time_budget.min(600.0)))?;
    trace.initial_ub = ub0.value;
    if ub0.source != UpperBoundSource::Unavailable {
        ub = ub0.value;
        best = ub0.point.clone();
    }
    if !resumed {
        let mut started = false;
        if params.lp_start {
            match lp_start(&problem, &mut state) {
                Ok(v) => {
                    debug!("consensus LP start {v:.4}");
                    started = true;
                    if params.bounds {
                        if let Some(d) = evaluate_dual_lower_bound(&problem, &state, params.workers)? {
                            debug!("dual bound at the LP duals {d:.4}");
                            lb = lb.max(d);
                        }
                    }
                }
                Err(e) => warn!("consensus LP start failed ({e}); starting from the incumbent"),
            }
        }
        if !started {
            if let Some(x) = &best {
                state.warm_start(&instance, x)?;
            }
        }
    }
    info!(
        "initial bounds: LB {:.4} (LP {:.4}, zero-dual {:.4}), UB {:.4}",
        lb, trace.initial_lb, trace.zero_dual_lb, ub
    );

    let mut tried: HashSet<Vec<bool>> = HashSet::new();
    let mut last_projection_residual: Option<f64> = None;
    let mut last_projection_k = state.iteration;
    let mut status = RunStatus::IterationLimit;
    let mut last_steps: Vec<HydroStep> = Vec::new();

    let first_k = state.iteration + 1;
    for k in first_k..=params.max_iter.max(first_k - 1) {
        if start.elapsed().as_secs_f64() > params.time_budget {
            // the initial bounds alone used up the budget
            status = RunStatus::TimeBudget;
            break;
        }
        state.iteration = k;
        let (steps, bal) = step_one(&problem, &state, params.workers)?;
        for s in &steps {
            state.apply_hydro(s);
        }
        state.apply_balancing(&bal);
        state.average_globals();
        state.update_duals();
        state.refresh_residuals();

        if params.bounds && k % params.lb_every == 0 {
            match evaluate_dual_lower_bound(&problem, &state, params.workers)? {
                Some(v) => {
                    debug!("k={k}: dual bound {v:.4}");
                    lb = lb.max(v)
                }
                None => trace.skipped_lb += 1,
            }
        }

        let residual_moved = match last_projection_residual {
            None => true,
            Some(r0) => (state.primal_residual - r0).abs() > params.eps_ub / 100.0 * r0.max(1e-12),
        };
        let due = k - last_projection_k >= params.ub_every;
        if params.bounds && (residual_moved || due) {
            let binaries = harvest_binaries(&instance, &steps);
            let key: Vec<bool> = binaries.iter().map(|(_, v)| *v > 0.5).collect();
            if tried.insert(key) {
                trace.projections += 1;
                last_projection_k = k;
                last_projection_residual = Some(state.primal_residual);
                match quasi_projection_upper_bound(&instance, &binaries, &lp_opts)? {
                    Some((value, x)) => {
                        debug!("k={k}: projection {value:.4}");
                        if value < ub {
                            debug!("k={k}: projection improves UB {ub:.4} -> {value:.4}");
                            ub = value;
                            best = Some(x);
                        }
                    }
                    None => {
                        debug!("k={k}: projection infeasible");
                        trace.infeasible_projections += 1
                    }
                }
            }
        }

        let g = gap(ub, lb);
        trace.rows.push(TraceRow {
            k,
            lb,
            ub,
            gap: g,
            rho: state.rho,
            primal: state.primal_residual,
            dual: state.dual_residual,
            zero_sum: state.zero_sum_violation(),
            wall: start.elapsed().as_secs_f64(),
        });
        if k % 50 == 0 {
            info!(
                "k={k} LB {lb:.4} UB {ub:.4} gap {g:.5}% rho {:.4} r {:.3e} s {:.3e}",
                state.rho, state.primal_residual, state.dual_residual
            );
        }
        last_steps = steps;

        if params.bounds && g <= params.eps_gap {
            status = RunStatus::Certified;
            break;
        }
        if !params.bounds
            && state.primal_residual <= params.residual_tol
            && state.dual_residual <= params.residual_tol
        {
            status = RunStatus::Converged;
            break;
        }
        if start.elapsed().as_secs_f64() > params.time_budget {
            status = RunStatus::TimeBudget;
            break;
        }
        if params.adaptive_rho {
            state.update_penalty(params.mu, params.tau_incr, params.tau_decr);
        }
    }

    if !params.bounds && !last_steps.is_empty() {
        // plain ADMM still needs a feasible point to report
        let binaries = harvest_binaries(&instance, &last_steps);
        if let Some((value, x)) = quasi_projection_upper_bound(&instance, &binaries, &lp_opts)? {
            if value < ub {
                ub = value;
                best = Some(x);
            }
        }
    }

    let bids = match &best {
        Some(x) => extract_bid_curves(x, scenarios, &instance.market)?,
        None => Vec::new(),
    };
    Ok(CadmmbOutcome {
        status,
        lower_bound: lb,
        upper_bound: ub,
        gap: gap(ub, lb),
        iterations: state.iteration,
        wall_time: start.elapsed().as_secs_f64(),
        trace,
        point: best,
        bids,
        state,
        instance,
    })
}
