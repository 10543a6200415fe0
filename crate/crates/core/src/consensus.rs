//! Consensus reformulation: every coupling quantity gets two local copies,
//! one per subproblem that touches it, tied to a global value.
//!
//! Coupled quantities per `(n, ω, t)`:
//! * turbine/barrage discharge of plant `n` (for `n` below the tail plant),
//!   copied by hydro subproblem `n` (own) and hydro subproblem `n+1` (upstream copy);
//! * hydro power of plant `n`, copied by hydro subproblem `n` and the balancing subproblem.

use serde::{Deserialize, Serialize};

use crate::centralized::{barrage_big_ms, CentralizedInstance};
use crate::error::{invalid, Error, Result};
use crate::hydro::{build_plant_block, BlockOptions, CascadeData, HydroVars, UpstreamFlows};
use crate::market::{
    allocate_market_vars, build_bid_monotonicity, build_objective, build_power_balance, MarketVars,
    ScenarioSet,
};
use crate::solver::{
    fix_variables, solve, Constraint, LinExpr, ObjSense, ProblemSpec, RowSense, SolveOptions, SolveStatus, VarId,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub plants: usize,
    pub scenarios: usize,
    pub horizon: usize,
}

impl Dims {
    pub fn len(&self) -> usize {
        self.plants * self.scenarios * self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, n: usize, w: usize, t: usize) -> usize {
        (n * self.scenarios + w) * self.horizon + t
    }

    fn block(&self, n: usize, w: usize) -> std::ops::Range<usize> {
        let s = self.idx(n, w, 0);
        s..s + self.horizon
    }

    /// Whether plant `n`'s discharge is shared with a downstream plant.
    pub fn has_downstream(&self, n: usize) -> bool {
        n + 1 < self.plants
    }
}

/// Global values, each series indexed by [`Dims::idx`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Globals {
    pub q_tr: Vec<f64>,
    pub q_br: Vec<f64>,
    pub p: Vec<f64>,
}

impl Globals {
    pub fn zeros(d: Dims) -> Self {
        Self {
            q_tr: vec![0.0; d.len()],
            q_br: vec![0.0; d.len()],
            p: vec![0.0; d.len()],
        }
    }
}

/// One value per local copy. The same layout holds the duals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopySet {
    /// Hydro `n`'s copy of its own discharge.
    pub own_tr: Vec<f64>,
    pub own_br: Vec<f64>,
    /// Hydro `n+1`'s copy of plant `n`'s discharge, indexed by `n`.
    pub up_tr: Vec<f64>,
    pub up_br: Vec<f64>,
    /// Hydro `n`'s power.
    pub p_hydro: Vec<f64>,
    /// Balancing subproblem's copy of plant `n`'s power.
    pub p_bal: Vec<f64>,
}

impl CopySet {
    pub fn zeros(d: Dims) -> Self {
        let z = vec![0.0; d.len()];
        Self {
            own_tr: z.clone(),
            own_br: z.clone(),
            up_tr: z.clone(),
            up_br: z.clone(),
            p_hydro: z.clone(),
            p_bal: z,
        }
    }

    fn from_globals(g: &Globals) -> Self {
        Self {
            own_tr: g.q_tr.clone(),
            own_br: g.q_br.clone(),
            up_tr: g.q_tr.clone(),
            up_br: g.q_br.clone(),
            p_hydro: g.p.clone(),
            p_bal: g.p.clone(),
        }
    }
}

/// Iterate of the consensus scheme; serializable for checkpoint/restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusState {
    pub dims: Dims,
    pub rho: f64,
    pub iteration: usize,
    pub globals: Globals,
    pub prev_globals: Globals,
    pub copies: CopySet,
    pub duals: CopySet,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Kind of coupled quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pair {
    Turbine,
    Barrage,
    Power,
}

impl ConsensusState {
    pub fn new(dims: Dims, rho: f64) -> Self {
        Self {
            dims,
            rho,
            iteration: 0,
            globals: Globals::zeros(dims),
            prev_globals: Globals::zeros(dims),
            copies: CopySet::zeros(dims),
            duals: CopySet::zeros(dims),
            primal_residual: 0.0,
            dual_residual: 0.0,
        }
    }

    /// Sets globals and both copies from a point of the centralized model.
    pub fn warm_start(&mut self, instance: &CentralizedInstance, x: &[f64]) -> Result<()> {
        if x.len() != instance.spec.num_vars() {
            return invalid("warm-start point does not match the centralized layout");
        }
        let d = self.dims;
        for n in 0..d.plants {
            for w in 0..d.scenarios {
                let v = &instance.hydro[n][w];
                for t in 0..d.horizon {
                    let i = d.idx(n, w, t);
                    if d.has_downstream(n) {
                        self.globals.q_tr[i] = x[v.q_tr[t].0];
                        self.globals.q_br[i] = x[v.q_br[t].0];
                    }
                    self.globals.p[i] = x[v.p[t].0];
                }
            }
        }
        self.prev_globals = self.globals.clone();
        self.copies = CopySet::from_globals(&self.globals);
        Ok(())
    }

    fn pairs(&self) -> impl Iterator<Item = (Pair, usize)> + '_ {
        let d = self.dims;
        (0..d.plants).flat_map(move |n| {
            (0..d.scenarios).flat_map(move |w| {
                (0..d.horizon).flat_map(move |t| {
                    let i = d.idx(n, w, t);
                    let q = d.has_downstream(n);
                    [
                        q.then_some((Pair::Turbine, i)),
                        q.then_some((Pair::Barrage, i)),
                        Some((Pair::Power, i)),
                    ]
                    .into_iter()
                    .flatten()
                })
            })
        })
    }

    fn pair_values(set: &CopySet, pair: Pair, i: usize) -> (f64, f64) {
        match pair {
            Pair::Turbine => (set.own_tr[i], set.up_tr[i]),
            Pair::Barrage => (set.own_br[i], set.up_br[i]),
            Pair::Power => (set.p_hydro[i], set.p_bal[i]),
        }
    }

    fn global(g: &Globals, pair: Pair, i: usize) -> f64 {
        match pair {
            Pair::Turbine => g.q_tr[i],
            Pair::Barrage => g.q_br[i],
            Pair::Power => g.p[i],
        }
    }

    /// Global step: each global becomes the mean of its two copies.
    pub fn average_globals(&mut self) {
        self.prev_globals = self.globals.clone();
        let pairs: Vec<_> = self.pairs().collect();
        for (pair, i) in pairs {
            let (a, b) = Self::pair_values(&self.copies, pair, i);
            let z = 0.5 * (a + b);
            match pair {
                Pair::Turbine => self.globals.q_tr[i] = z,
                Pair::Barrage => self.globals.q_br[i] = z,
                Pair::Power => self.globals.p[i] = z,
            }
        }
    }

    /// Dual step: `λ ← λ + ρ(copy − global)` for every copy.
    pub fn update_duals(&mut self) {
        let rho = self.rho;
        let pairs: Vec<_> = self.pairs().collect();
        for (pair, i) in pairs {
            let z = Self::global(&self.globals, pair, i);
            let (c, l) = (&self.copies, &mut self.duals);
            match pair {
                Pair::Turbine => {
                    l.own_tr[i] += rho * (c.own_tr[i] - z);
                    l.up_tr[i] += rho * (c.up_tr[i] - z);
                }
                Pair::Barrage => {
                    l.own_br[i] += rho * (c.own_br[i] - z);
                    l.up_br[i] += rho * (c.up_br[i] - z);
                }
                Pair::Power => {
                    l.p_hydro[i] += rho * (c.p_hydro[i] - z);
                    l.p_bal[i] += rho * (c.p_bal[i] - z);
                }
            }
        }
    }

    /// `(‖copy − global‖₂, ρ‖z^k − z^{k−1}‖₂)` over all coupled components.
    pub fn consensus_residuals(&self) -> (f64, f64) {
        let mut primal = 0.0;
        let mut dual = 0.0;
        for (pair, i) in self.pairs() {
            let z = Self::global(&self.globals, pair, i);
            let (a, b) = Self::pair_values(&self.copies, pair, i);
            primal += (a - z).powi(2) + (b - z).powi(2);
            dual += (z - Self::global(&self.prev_globals, pair, i)).powi(2);
        }
        (primal.sqrt(), self.rho * dual.sqrt())
    }

    pub fn refresh_residuals(&mut self) {
        let (p, d) = self.consensus_residuals();
        self.primal_residual = p;
        self.dual_residual = d;
    }

    /// Largest `|λ_a + λ_b|` over coupled pairs; the lower bound needs it at zero.
    pub fn zero_sum_violation(&self) -> f64 {
        self.pairs()
            .map(|(pair, i)| {
                let (a, b) = Self::pair_values(&self.duals, pair, i);
                (a + b).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|λ|`, used to scale the zero-sum tolerance.
    pub fn dual_scale(&self) -> f64 {
        self.pairs()
            .map(|(pair, i)| {
                let (a, b) = Self::pair_values(&self.duals, pair, i);
                a.abs().max(b.abs())
            })
            .fold(0.0, f64::max)
    }

    /// Residual balancing: grow ρ when the primal residual dominates, shrink
    /// it when the dual residual does. Returns whether ρ changed.
    pub fn update_penalty(&mut self, mu: f64, tau_incr: f64, tau_decr: f64) -> bool {
        if self.primal_residual > mu * self.dual_residual {
            self.rho *= tau_incr;
            true
        } else if self.dual_residual > mu * self.primal_residual {
            self.rho /= tau_decr;
            true
        } else {
            false
        }
    }

    pub fn apply_hydro(&mut self, r: &HydroStep) {
        let range = self.dims.block(r.plant, r.scenario);
        let c = &mut self.copies;
        if let (Some(tr), Some(br)) = (&r.own_tr, &r.own_br) {
            c.own_tr[range.clone()].copy_from_slice(tr);
            c.own_br[range.clone()].copy_from_slice(br);
        }
        if let (Some(tr), Some(br)) = (&r.up_tr, &r.up_br) {
            let up = self.dims.block(r.plant - 1, r.scenario);
            c.up_tr[up.clone()].copy_from_slice(tr);
            c.up_br[up].copy_from_slice(br);
        }
        c.p_hydro[range].copy_from_slice(&r.p);
    }

    pub fn apply_balancing(&mut self, r: &BalancingStep) {
        self.copies.p_bal.copy_from_slice(&r.p);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let state: Self = serde_json::from_str(s)?;
        let n = state.dims.len();
        let series = [
            &state.globals.q_tr,
            &state.globals.q_br,
            &state.globals.p,
            &state.copies.own_tr,
            &state.copies.p_bal,
            &state.duals.own_tr,
            &state.duals.p_bal,
        ];
        if series.iter().any(|v| v.len() != n) {
            return invalid("snapshot series do not match its dimensions");
        }
        Ok(state)
    }
}

/// Tangent-epigraph approximation of the quadratic penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    /// Tangents at `c ± width·2^-j` for `j = 1..=levels`, plus one at `c`.
    pub levels: usize,
    /// Extra solves that add a tangent at the incumbent where the
    /// approximation is loose.
    pub refine_rounds: usize,
    /// Relative looseness that triggers refinement.
    pub refine_tol: f64,
    /// Re-solve the continuous part with the exact quadratic once the
    /// binaries are chosen.
    pub polish: bool,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            levels: 10,
            refine_rounds: 0,
            refine_tol: 1e-3,
            polish: true,
        }
    }
}

/// Immutable data shared by all subproblems.
#[derive(Debug, Clone)]
pub struct ConsensusProblem {
    pub cascade: CascadeData,
    pub scenarios: ScenarioSet,
    pub big_m_barrage: Vec<f64>,
    pub penalty: PenaltyConfig,
    pub solve: SolveOptions,
}

impl ConsensusProblem {
    pub fn new(cascade: &CascadeData, scenarios: &ScenarioSet) -> Result<Self> {
        cascade.validate()?;
        scenarios.validate(cascade.num_plants(), cascade.horizon())?;
        Ok(Self {
            big_m_barrage: barrage_big_ms(cascade, scenarios),
            cascade: cascade.clone(),
            scenarios: scenarios.clone(),
            penalty: PenaltyConfig::default(),
            solve: SolveOptions::default(),
        })
    }

    pub fn dims(&self) -> Dims {
        Dims {
            plants: self.cascade.num_plants(),
            scenarios: self.scenarios.len(),
            horizon: self.cascade.horizon(),
        }
    }
}

/// One penalized copy inside a subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyTerm {
    pub x: VarId,
    /// Epigraph variable; `None` when the penalty is off.
    pub s: Option<VarId>,
    pub target: f64,
}

#[derive(Debug, Clone)]
pub struct HydroSubproblem {
    pub spec: ProblemSpec,
    pub vars: HydroVars,
    pub up_tr: Vec<VarId>,
    pub up_br: Vec<VarId>,
    pub terms: Vec<PenaltyTerm>,
    pub rho: f64,
}

fn tangent(term: &PenaltyTerm, s: VarId, rho: f64, a: f64, name: String) -> Constraint {
    // s ≥ ρ/2(a−c)² + ρ(a−c)(x−a)
    let g = rho * (a - term.target);
    Constraint::new(
        name,
        LinExpr::var(s).term(term.x, -g),
        RowSense::Ge,
        0.5 * rho * (a - term.target).powi(2) - g * a,
    )
}

/// Hydro subproblem of plant `n`, scenario `w`: the plant's constraints with
/// upstream discharges as local variables, objective `λᵀx + ρ/2‖x − z‖²` over
/// the copies it owns (without the quadratic when `penalized` is false).
pub fn build_hydro_subproblem(
    problem: &ConsensusProblem,
    state: &ConsensusState,
    n: usize,
    w: usize,
    penalized: bool,
) -> Result<HydroSubproblem> {
    let d = state.dims;
    if d != problem.dims() {
        return invalid("consensus state does not match the problem dimensions");
    }
    if n >= d.plants || w >= d.scenarios {
        return invalid(format!("no hydro subproblem ({n}, {w})"));
    }
    let cascade = &problem.cascade;
    let mut spec = ProblemSpec::new();
    let (mut up_tr, mut up_br) = (Vec::new(), Vec::new());
    if n > 0 {
        let up = &cascade.plants[n - 1];
        for t in 0..d.horizon {
            up_tr.push(spec.add_var(
                format!("q_tr_copy[{}][{w}][{t}]", n - 1),
                up.turbine_min,
                up.turbine_max,
                false,
            ));
            up_br.push(spec.add_var(
                format!("q_br_copy[{}][{w}][{t}]", n - 1),
                0.0,
                problem.big_m_barrage[n - 1],
                false,
            ));
        }
    }
    let upstream = (n > 0).then(|| UpstreamFlows {
        turbine: &up_tr,
        barrage: &up_br,
        link: &cascade.topology.links[n - 1],
    });
    let vars = build_plant_block(
        &mut spec,
        cascade,
        n,
        w,
        &problem.scenarios.scenarios[w].inflow[n],
        problem.big_m_barrage[n],
        upstream,
        BlockOptions::default(),
        "",
    )?;

    // (variable, dual, global) of every owned copy
    let mut owned: Vec<(VarId, f64, f64)> = Vec::new();
    let (l, g) = (&state.duals, &state.globals);
    for t in 0..d.horizon {
        if n > 0 {
            let i = d.idx(n - 1, w, t);
            owned.push((up_tr[t], l.up_tr[i], g.q_tr[i]));
            owned.push((up_br[t], l.up_br[i], g.q_br[i]));
        }
        let i = d.idx(n, w, t);
        if d.has_downstream(n) {
            owned.push((vars.q_tr[t], l.own_tr[i], g.q_tr[i]));
            owned.push((vars.q_br[t], l.own_br[i], g.q_br[i]));
        }
        owned.push((vars.p[t], l.p_hydro[i], g.p[i]));
    }

    spec.objective.sense = ObjSense::Minimize;
    let rho = if penalized { state.rho } else { 0.0 };
    let mut terms = Vec::with_capacity(owned.len());
    for (x, lambda, target) in owned {
        spec.objective.linear.push((x, lambda));
        let s = (rho > 0.0).then(|| {
            let name = format!("pen_{}", spec.var(x).name);
            spec.add_var(name, 0.0, f64::INFINITY, false)
        });
        let term = PenaltyTerm { x, s, target };
        if let Some(s) = s {
            spec.objective.linear.push((s, 1.0));
            let (lo, hi) = (spec.var(x).lower, spec.var(x).upper);
            let c = target.clamp(lo, hi);
            let width = hi - lo;
            let mut points = vec![c];
            for j in 1..=problem.penalty.levels {
                let step = width * 0.5f64.powi(j as i32);
                points.extend([c - step, c + step].into_iter().filter(|a| *a >= lo && *a <= hi));
            }
            if !(lo..=hi).contains(&target) {
                points.push(target);
            }
            let base = spec.var(x).name.clone();
            for (k, a) in points.into_iter().enumerate() {
                spec.add_constraint(tangent(&term, s, rho, a, format!("tan_{base}[{k}]")));
            }
        }
        terms.push(term);
    }
    Ok(HydroSubproblem {
        spec,
        vars,
        up_tr,
        up_br,
        terms,
        rho,
    })
}

/// Step-I output of one hydro subproblem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroStep {
    pub plant: usize,
    pub scenario: usize,
    pub own_tr: Option<Vec<f64>>,
    pub own_br: Option<Vec<f64>>,
    pub up_tr: Option<Vec<f64>>,
    pub up_br: Option<Vec<f64>>,
    pub p: Vec<f64>,
    /// Block binaries in [`HydroVars::binaries`] order.
    pub binaries: Vec<f64>,
    /// Subproblem objective with the exact quadratic penalty.
    pub objective: f64,
    pub status: SolveStatus,
}

fn pick(x: &[f64], ids: &[VarId]) -> Vec<f64> {
    ids.iter().map(|v| x[v.0]).collect()
}

fn exact_penalized_value(sub: &HydroSubproblem, x: &[f64]) -> f64 {
    let lin: f64 = sub
        .spec
        .objective
        .linear
        .iter()
        .filter(|(v, _)| sub.terms.iter().all(|t| t.s != Some(*v)))
        .map(|(v, c)| c * x[v.0])
        .sum();
    let quad: f64 = sub
        .terms
        .iter()
        .map(|t| 0.5 * sub.rho * (x[t.x.0] - t.target).powi(2))
        .sum();
    lin + quad
}

pub fn solve_hydro_step(
    problem: &ConsensusProblem,
    state: &ConsensusState,
    n: usize,
    w: usize,
) -> Result<HydroStep> {
    let mut sub = build_hydro_subproblem(problem, state, n, w, true)?;
    let mut r = solve(&sub.spec, &problem.solve)?;
    for round in 0..problem.penalty.refine_rounds {
        if !r.status.has_solution() || sub.rho == 0.0 {
            break;
        }
        let mut added = 0;
        let terms = sub.terms.clone();
        for (k, term) in terms.iter().enumerate() {
            let s = term.s.expect("penalized");
            let x = r.primal[term.x.0];
            let exact = 0.5 * sub.rho * (x - term.target).powi(2);
            if exact - r.primal[s.0] > problem.penalty.refine_tol * (1.0 + exact) {
                sub.spec
                    .add_constraint(tangent(term, s, sub.rho, x, format!("oa[{round}][{k}]")));
                added += 1;
            }
        }
        if added == 0 {
            break;
        }
        r = solve(&sub.spec, &problem.solve)?;
    }
    if !r.status.has_solution() {
        return Err(match r.status {
            SolveStatus::Infeasible => Error::Infeasible(format!(
                "hydro subproblem of plant {n}, scenario {w} has no feasible point"
            )),
            other => Error::Runtime(format!("hydro subproblem ({n}, {w}) ended with {other:?}")),
        });
    }
    let binaries: Vec<f64> = pick(&r.primal, &sub.vars.binaries()).into_iter().map(f64::round).collect();
    if problem.penalty.polish && sub.rho > 0.0 {
        if let Some(x) = polish(problem, state, n, w, &binaries)? {
            sub = build_hydro_subproblem(problem, state, n, w, false)?;
            sub.rho = state.rho;
            r.primal = x;
        }
    }
    let x = &r.primal;
    let d = state.dims;
    let own = d.has_downstream(n);
    Ok(HydroStep {
        plant: n,
        scenario: w,
        own_tr: own.then(|| pick(x, &sub.vars.q_tr)),
        own_br: own.then(|| pick(x, &sub.vars.q_br)),
        up_tr: (n > 0).then(|| pick(x, &sub.up_tr)),
        up_br: (n > 0).then(|| pick(x, &sub.up_br)),
        p: pick(x, &sub.vars.p),
        binaries,
        objective: exact_penalized_value(&sub, x),
        status: r.status,
    })
}

/// Exact quadratic penalty over the continuous variables with the binaries
/// fixed; `None` if the QP fails, in which case the MILP point is kept.
fn polish(
    problem: &ConsensusProblem,
    state: &ConsensusState,
    n: usize,
    w: usize,
    binaries: &[f64],
) -> Result<Option<Vec<f64>>> {
    let mut sub = build_hydro_subproblem(problem, state, n, w, false)?;
    let rho = state.rho;
    for t in &sub.terms {
        sub.spec.add_quadratic(t.x, 0.5 * rho);
        sub.spec.objective.linear.push((t.x, -rho * t.target));
        sub.spec.objective.constant += 0.5 * rho * t.target * t.target;
    }
    let fixed: Vec<(VarId, f64)> = sub.vars.binaries().into_iter().zip(binaries.iter().copied()).collect();
    let spec = fix_variables(&sub.spec, &fixed)?;
    let r = solve(&spec, &problem.solve)?;
    Ok(r.status.has_solution().then_some(r.primal))
}

/// `D^H_{n,ω}(λ) = min_Γ λᵀx`, reported as the solver's proven bound so it
/// stays a valid lower bound even when the MILP is not closed.
pub fn hydro_dual_value(problem: &ConsensusProblem, state: &ConsensusState, n: usize, w: usize) -> Result<f64> {
    let sub = build_hydro_subproblem(problem, state, n, w, false)?;
    let r = solve(&sub.spec, &problem.solve)?;
    match r.status {
        SolveStatus::Infeasible => Err(Error::Infeasible(format!(
            "hydro subproblem of plant {n}, scenario {w} has no feasible point"
        ))),
        _ => Ok(r.best_bound),
    }
}

#[derive(Debug, Clone)]
pub struct BalancingSubproblem {
    pub spec: ProblemSpec,
    pub market: MarketVars,
    /// `p[n][ω]`.
    pub p: Vec<Vec<Vec<VarId>>>,
}

/// Market subproblem: `J + Σ λ̄ᵀp̄ + ρ/2‖p̄ − p‖²` over power balance and bid
/// monotonicity, with `p̄` boxed by each plant's capacity.
pub fn build_balancing_subproblem(
    problem: &ConsensusProblem,
    state: &ConsensusState,
    penalized: bool,
) -> Result<BalancingSubproblem> {
    let d = state.dims;
    if d != problem.dims() {
        return invalid("consensus state does not match the problem dimensions");
    }
    let cascade = &problem.cascade;
    let scenarios = &problem.scenarios;
    let mut spec = ProblemSpec::new();
    let p: Vec<Vec<Vec<VarId>>> = (0..d.plants)
        .map(|n| {
            (0..d.scenarios)
                .map(|w| {
                    (0..d.horizon)
                        .map(|t| {
                            spec.add_var(
                                format!("p_bal[{n}][{w}][{t}]"),
                                0.0,
                                cascade.plants[n].capacity_mw,
                                false,
                            )
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let market = allocate_market_vars(&mut spec, d.scenarios, d.horizon, cascade.max_energy_per_step(), "");
    for (w, s) in scenarios.scenarios.iter().enumerate() {
        let power: Vec<Vec<VarId>> = p.iter().map(|row| row[w].clone()).collect();
        spec.extend_constraints(build_power_balance(&power, s, w, &market, cascade.topology.step_hours())?);
    }
    spec.extend_constraints(build_bid_monotonicity(scenarios, &market));
    spec.objective.sense = ObjSense::Minimize;
    spec.add_objective(&build_objective(scenarios, &market));
    let rho = if penalized { state.rho } else { 0.0 };
    for n in 0..d.plants {
        for w in 0..d.scenarios {
            for t in 0..d.horizon {
                let i = d.idx(n, w, t);
                let v = p[n][w][t];
                let z = state.globals.p[i];
                spec.objective.linear.push((v, state.duals.p_bal[i] - rho * z));
                if rho > 0.0 {
                    spec.add_quadratic(v, 0.5 * rho);
                    spec.objective.constant += 0.5 * rho * z * z;
                }
            }
        }
    }
    Ok(BalancingSubproblem { spec, market, p })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancingStep {
    /// Indexed by [`Dims::idx`].
    pub p: Vec<f64>,
    pub objective: f64,
}

pub fn solve_balancing_step(problem: &ConsensusProblem, state: &ConsensusState) -> Result<BalancingStep> {
    let sub = build_balancing_subproblem(problem, state, true)?;
    let r = solve(&sub.spec, &problem.solve)?;
    if r.status != SolveStatus::Optimal {
        return Err(Error::Runtime(format!("balancing subproblem ended with {:?}", r.status)));
    }
    let d = state.dims;
    let mut p = vec![0.0; d.len()];
    for n in 0..d.plants {
        for w in 0..d.scenarios {
            for t in 0..d.horizon {
                p[d.idx(n, w, t)] = r.primal[sub.p[n][w][t].0];
            }
        }
    }
    Ok(BalancingStep { p, objective: r.objective })
}

/// `D^B(λ) = min_Ξ J + Σ λ̄ᵀp̄`.
pub fn balancing_dual_value(problem: &ConsensusProblem, state: &ConsensusState) -> Result<f64> {
    let sub = build_balancing_subproblem(problem, state, false)?;
    let r = solve(&sub.spec, &problem.solve)?;
    match r.status {
        SolveStatus::Optimal => Ok(r.objective),
        other => Err(Error::Runtime(format!("balancing dual problem ended with {other:?}"))),
    }
}

/// Solves the LP relaxation of the consensus form (all subproblems plus
/// `copy = global` rows) and loads its point into `globals`/`copies` and the
/// negated row duals of the consensus rows into `duals`. The duals of each
/// pair sum to zero because the globals are free and cost-free. Returns the
/// LP value, a lower bound on the MILP optimum.
pub fn lp_start(problem: &ConsensusProblem, state: &mut ConsensusState) -> Result<f64> {
    let d = state.dims;
    let zero = ConsensusState::new(d, 0.0);
    let mut spec = ProblemSpec::new();
    // (own/upstream/hydro-power copy, balancing copy) per pair, shifted into `spec`
    let mut hydro = Vec::with_capacity(d.plants * d.scenarios);
    for n in 0..d.plants {
        for w in 0..d.scenarios {
            let sub = build_hydro_subproblem(problem, &zero, n, w, false)?;
            let off = spec.append(&sub.spec);
            let shift = |v: &[VarId]| v.iter().map(|x| VarId(x.0 + off)).collect::<Vec<_>>();
            hydro.push((shift(&sub.vars.q_tr), shift(&sub.vars.q_br), shift(&sub.up_tr), shift(&sub.up_br), shift(&sub.vars.p)));
        }
    }
    let bal = build_balancing_subproblem(problem, &zero, false)?;
    let off = spec.append(&bal.spec);
    let p_bal = |n: usize, w: usize, t: usize| VarId(bal.p[n][w][t].0 + off);
    let h = |n: usize, w: usize| &hydro[n * d.scenarios + w];

    let pairs: Vec<(Pair, usize)> = state.pairs().collect();
    // (row of copy a, row of copy b, global)
    let mut rows = Vec::with_capacity(pairs.len());
    for &(pair, i) in &pairs {
        let (n, w, t) = (i / (d.scenarios * d.horizon), (i / d.horizon) % d.scenarios, i % d.horizon);
        let (a, b) = match pair {
            Pair::Turbine => (h(n, w).0[t], h(n + 1, w).2[t]),
            Pair::Barrage => (h(n, w).1[t], h(n + 1, w).3[t]),
            Pair::Power => (h(n, w).4[t], p_bal(n, w, t)),
        };
        let z = spec.add_var(format!("z_{pair:?}[{i}]"), f64::NEG_INFINITY, f64::INFINITY, false);
        let ra = spec.num_rows();
        for (k, c) in [a, b].into_iter().enumerate() {
            spec.add_constraint(Constraint::new(
                format!("cons_{pair:?}[{i}][{k}]"),
                LinExpr::var(c).term(z, -1.0),
                RowSense::Eq,
                0.0,
            ));
        }
        rows.push((ra, ra + 1, z, a, b));
    }
    let r = solve(&crate::solver::relax_integrality(&spec), &problem.solve)?;
    if r.status != SolveStatus::Optimal || r.row_dual.len() != spec.num_rows() {
        return Err(Error::Runtime(format!("consensus LP relaxation ended with {:?}", r.status)));
    }
    let x = &r.primal;
    for (&(pair, i), &(ra, rb, z, a, b)) in pairs.iter().zip(&rows) {
        let (la, lb) = (-r.row_dual[ra], -r.row_dual[rb]);
        let (g, c, l) = (&mut state.globals, &mut state.copies, &mut state.duals);
        match pair {
            Pair::Turbine => {
                g.q_tr[i] = x[z.0];
                (c.own_tr[i], c.up_tr[i]) = (x[a.0], x[b.0]);
                (l.own_tr[i], l.up_tr[i]) = (la, lb);
            }
            Pair::Barrage => {
                g.q_br[i] = x[z.0];
                (c.own_br[i], c.up_br[i]) = (x[a.0], x[b.0]);
                (l.own_br[i], l.up_br[i]) = (la, lb);
            }
            Pair::Power => {
                g.p[i] = x[z.0];
                (c.p_hydro[i], c.p_bal[i]) = (x[a.0], x[b.0]);
                (l.p_hydro[i], l.p_bal[i]) = (la, lb);
            }
        }
    }
    // force exact pairwise zero-sum; the solver's duals are only accurate to its tolerance
    for &(pair, i) in &pairs {
        let l = &mut state.duals;
        let (a, b) = match pair {
            Pair::Turbine => (&mut l.own_tr, &mut l.up_tr),
            Pair::Barrage => (&mut l.own_br, &mut l.up_br),
            Pair::Power => (&mut l.p_hydro, &mut l.p_bal),
        };
        let m = 0.5 * (a[i] - b[i]);
        a[i] = m;
        b[i] = -m;
    }
    state.prev_globals = state.globals.clone();
    Ok(r.objective)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> Dims {
        Dims { plants: 2, scenarios: 1, horizon: 2 }
    }

    #[test]
    fn averaging_and_duals() {
        let mut s = ConsensusState::new(dims(), 1.0);
        let d = s.dims;
        let i = d.idx(0, 0, 0);
        s.copies.own_tr[i] = 4.0;
        s.copies.up_tr[i] = 6.0;
        s.copies.p_hydro[i] = 5.0;
        s.copies.p_bal[i] = 1.0;
        s.average_globals();
        assert_eq!(s.globals.q_tr[i], 5.0);
        assert_eq!(s.globals.p[i], 3.0);
        s.update_duals();
        assert_eq!(s.duals.own_tr[i], -1.0);
        assert_eq!(s.duals.up_tr[i], 1.0);
        assert_eq!(s.duals.p_hydro[i], 2.0);
        assert_eq!(s.zero_sum_violation(), 0.0);
        // tail plant discharge is not coupled
        let tail = d.idx(1, 0, 0);
        s.copies.own_tr[tail] = 100.0;
        s.average_globals();
        assert_eq!(s.globals.q_tr[tail], 0.0);
        // idempotent once in consensus
        let g = s.globals.clone();
        s.average_globals();
        assert_eq!(s.globals, g);
    }

    #[test]
    fn residuals() {
        let mut s = ConsensusState::new(dims(), 2.0);
        assert_eq!(s.consensus_residuals(), (0.0, 0.0));
        let i = s.dims.idx(0, 0, 1);
        s.copies.p_hydro[i] = 2.0;
        s.copies.p_bal[i] = 2.0;
        // global still 0: each copy off by 2
        let (p, d) = s.consensus_residuals();
        assert!((p - 8f64.sqrt()).abs() < 1e-12);
        assert_eq!(d, 0.0);
        s.average_globals();
        let (p, d) = s.consensus_residuals();
        assert_eq!(p, 0.0);
        assert!((d - 4.0).abs() < 1e-12);
    }

    #[test]
    fn dual_update_scalar() {
        let mut s = ConsensusState::new(dims(), 1.0);
        let i = s.dims.idx(0, 0, 0);
        s.copies.p_bal[i] = 5.0;
        s.globals.p[i] = 3.0;
        s.update_duals();
        assert_eq!(s.duals.p_bal[i], 2.0);
    }

    #[test]
    fn penalty_update_rules() {
        let mut s = ConsensusState::new(dims(), 1.0);
        s.primal_residual = 100.0;
        s.dual_residual = 1.0;
        assert!(s.update_penalty(10.0, 2.0, 2.0));
        assert_eq!(s.rho, 2.0);
        s.primal_residual = 1.0;
        s.dual_residual = 100.0;
        assert!(s.update_penalty(10.0, 2.0, 2.0));
        assert_eq!(s.rho, 1.0);
        s.dual_residual = 5.0;
        assert!(!s.update_penalty(10.0, 2.0, 2.0));
    }

    #[test]
    fn tangent_row_touches_parabola() {
        let mut spec = ProblemSpec::new();
        let x = spec.add_var("x", -10.0, 10.0, false);
        let s = spec.add_var("s", 0.0, f64::INFINITY, false);
        let term = PenaltyTerm { x, s: Some(s), target: 3.0 };
        let row = tangent(&term, s, 1.0, 5.0, "t".into());
        // at x = a the tangent equals ρ/2(a−c)² = 2
        let pt = |xv: f64, sv: f64| vec![xv, sv];
        assert!(row.violation(&pt(5.0, 2.0)) < 1e-12);
        assert!(row.violation(&pt(5.0, 1.9)) > 0.0);
        // a tangent under-estimates elsewhere: at x = 3 it gives 2 − 2·2 = −2 ≤ 0
        assert!(row.violation(&pt(3.0, 0.0)) < 1e-12);
    }

    #[test]
    fn snapshot_round_trip() {
        let mut s = ConsensusState::new(dims(), 3.0);
        s.duals.p_bal[1] = 0.25;
        s.iteration = 7;
        let back = ConsensusState::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        let mut bad: serde_json::Value = serde_json::from_str(&s.to_json().unwrap()).unwrap();
        bad["globals"]["p"] = serde_json::json!([1.0]);
        assert!(ConsensusState::from_json(&bad.to_string()).is_err());
    }
}
