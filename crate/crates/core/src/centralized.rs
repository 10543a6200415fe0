//! Monolithic stochastic bidding MILP and the initial bounds built from it.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hydro::{build_plant_block, BlockOptions, CascadeData, HydroVars, UpstreamFlows};
use crate::market::{
    allocate_market_vars, build_bid_monotonicity, build_objective, build_power_balance, MarketVars,
    ScenarioSet,
};
use crate::solver::{
    fix_variables, relax_integrality, solve, ObjSense, ProblemSpec, SolveOptions, SolveResult,
    SolveStatus, VarId,
};

/// Feasibility tolerance used when a point is checked against the full model.
pub const POINT_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct CentralizedInstance {
    pub spec: ProblemSpec,
    /// `hydro[n][ω]`.
    pub hydro: Vec<Vec<HydroVars>>,
    pub market: MarketVars,
    pub cascade: CascadeData,
    pub scenarios: ScenarioSet,
    /// Barrage big-M per plant.
    pub big_m_barrage: Vec<f64>,
    pub restricted: bool,
}

impl CentralizedInstance {
    /// All binaries in a fixed order: plant, scenario, then block order.
    pub fn binaries(&self) -> Vec<VarId> {
        self.hydro
            .iter()
            .flat_map(|row| row.iter().flat_map(HydroVars::binaries))
            .collect()
    }

    pub fn stats(&self) -> InstanceStats {
        InstanceStats {
            plants: self.cascade.num_plants(),
            scenarios: self.scenarios.len(),
            horizon: self.cascade.horizon(),
            segments: self.cascade.plants.iter().map(|p| p.curve.len()).sum(),
            variables: self.spec.num_vars(),
            integers: self.spec.num_integer(),
            rows: self.spec.num_rows(),
            nonzeros: self.spec.constraints.iter().map(|c| c.terms.len()).sum(),
        }
    }

    /// Largest violation of `x` against the full model (rows, bounds, integrality).
    pub fn violation(&self, x: &[f64]) -> f64 {
        if x.len() != self.spec.num_vars() {
            return f64::INFINITY;
        }
        self.spec.max_violation(x).max()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceStats {
    pub plants: usize,
    pub scenarios: usize,
    pub horizon: usize,
    pub segments: usize,
    pub variables: usize,
    pub integers: usize,
    pub rows: usize,
    pub nonzeros: usize,
}

pub fn assemble_centralized(cascade: &CascadeData, scenarios: &ScenarioSet) -> Result<CentralizedInstance> {
    assemble_with(cascade, scenarios, BlockOptions::default())
}

/// Barrage big-M of each plant given the scenario inflows.
pub fn barrage_big_ms(cascade: &CascadeData, scenarios: &ScenarioSet) -> Vec<f64> {
    cascade
        .plants
        .iter()
        .enumerate()
        .map(|(n, p)| p.big_m_barrage(scenarios.max_inflow(n)))
        .collect()
}

/// Assembles the model; the restricted variant keeps the exact variable
/// layout so its points are points of the full model.
pub fn assemble_with(
    cascade: &CascadeData,
    scenarios: &ScenarioSet,
    options: BlockOptions,
) -> Result<CentralizedInstance> {
    cascade.validate()?;
    scenarios.validate(cascade.num_plants(), cascade.horizon())?;
    let big_m = barrage_big_ms(cascade, scenarios);
    let mut spec = ProblemSpec::new();
    let mut hydro: Vec<Vec<HydroVars>> = Vec::with_capacity(cascade.num_plants());
    for n in 0..cascade.num_plants() {
        let mut row = Vec::with_capacity(scenarios.len());
        for (w, s) in scenarios.scenarios.iter().enumerate() {
            let upstream = (n > 0).then(|| UpstreamFlows {
                turbine: &hydro[n - 1][w].q_tr,
                barrage: &hydro[n - 1][w].q_br,
                link: &cascade.topology.links[n - 1],
            });
            row.push(build_plant_block(
                &mut spec, cascade, n, w, &s.inflow[n], big_m[n], upstream, options, "",
            )?);
        }
        hydro.push(row);
    }
    let market = allocate_market_vars(
        &mut spec,
        scenarios.len(),
        cascade.horizon(),
        cascade.max_energy_per_step(),
        "",
    );
    for (w, s) in scenarios.scenarios.iter().enumerate() {
        let power: Vec<Vec<VarId>> = hydro.iter().map(|row| row[w].p.clone()).collect();
        spec.extend_constraints(build_power_balance(
            &power,
            s,
            w,
            &market,
            cascade.topology.step_hours(),
        )?);
    }
    spec.extend_constraints(build_bid_monotonicity(scenarios, &market));
    spec.objective.sense = ObjSense::Minimize;
    spec.add_objective(&build_objective(scenarios, &market));
    Ok(CentralizedInstance {
        spec,
        hydro,
        market,
        cascade: cascade.clone(),
        scenarios: scenarios.clone(),
        big_m_barrage: big_m,
        restricted: options.restricted,
    })
}

pub fn solve_centralized(instance: &CentralizedInstance, options: &SolveOptions) -> Result<SolveResult> {
    Ok(solve(&instance.spec, options)?)
}

/// LP-relaxation bound `J^LB⁰ ≤ J*`.
pub fn initial_lower_bound(instance: &CentralizedInstance, options: &SolveOptions) -> Result<f64> {
    let r = solve(&relax_integrality(&instance.spec), options)?;
    match r.status {
        SolveStatus::Optimal => Ok(r.objective),
        SolveStatus::Infeasible => Err(Error::Infeasible(
            "linear relaxation is infeasible, so is the bidding problem".into(),
        )),
        other => Err(Error::Runtime(format!("linear relaxation ended with status {other:?}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpperBoundSource {
    RestrictedLp,
    RestrictedMilp,
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    pub value: f64,
    /// Feasible point of the full model in its variable layout.
    pub point: Option<Vec<f64>>,
    pub source: UpperBoundSource,
}

impl UpperBound {
    pub fn unavailable() -> Self {
        Self {
            value: f64::INFINITY,
            point: None,
            source: UpperBoundSource::Unavailable,
        }
    }
}

/// Inflow reaching each plant when every reservoir passes its inflow straight
/// through, `[n][t]`.
pub fn route_run_of_river(cascade: &CascadeData, inflow: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let topo = &cascade.topology;
    let mut routed: Vec<Vec<f64>> = Vec::with_capacity(cascade.num_plants());
    for n in 0..cascade.num_plants() {
        let mut q = inflow[n][..topo.horizon].to_vec();
        if n > 0 {
            let link = &topo.links[n - 1];
            let d_tr = topo.delay_steps(link.travel_time_turbine);
            let d_br = topo.delay_steps(link.travel_time_barrage);
            let up = &routed[n - 1];
            let plant = &cascade.plants[n - 1];
            for (t, qt) in q.iter_mut().enumerate() {
                // split the upstream outflow as the turbines would: up to Q̄ through them
                let from = |d: usize, turbine: bool| -> f64 {
                    match (t + 1).checked_sub(d).filter(|&s| s >= 1) {
                        Some(s) => {
                            let out = up[s - 1];
                            let tr = out.clamp(plant.turbine_min, plant.turbine_max).min(out);
                            if turbine {
                                tr
                            } else {
                                out - tr
                            }
                        }
                        None if turbine => link.history.turbine_at(d - (t + 1)),
                        None => link.history.barrage_at(d - (t + 1)),
                    }
                };
                *qt += from(d_tr, true) + from(d_br, false);
            }
        }
        routed.push(q);
    }
    routed
}

/// Segment choice per `(n, ω, t)` from the run-of-river routing of every scenario.
fn routed_segment_fixing(instance: &CentralizedInstance) -> Vec<(VarId, f64)> {
    let mut fix = Vec::new();
    for (w, s) in instance.scenarios.scenarios.iter().enumerate() {
        let routed = route_run_of_river(&instance.cascade, &s.inflow);
        for (n, plant) in instance.cascade.plants.iter().enumerate() {
            let vars = &instance.hydro[n][w];
            for (t, &q) in routed[n].iter().enumerate() {
                let seg = plant.curve.segment_for(q);
                for (i, &b) in vars.b_oc[t].iter().enumerate() {
                    fix.push((b, if i == seg { 1.0 } else { 0.0 }));
                }
            }
        }
    }
    fix
}

/// Upper bound from the flexibility-free restriction: pinched levels,
/// barrages open, segments fixed by run-of-river routing, solved as an LP.
/// Falls back to a time-boxed MILP of the restriction, then to `+∞`.
pub fn initial_upper_bound(instance: &CentralizedInstance, options: &SolveOptions) -> Result<UpperBound> {
    let restricted = assemble_with(
        &instance.cascade,
        &instance.scenarios,
        BlockOptions { restricted: true },
    )?;
    if restricted.spec.num_vars() != instance.spec.num_vars() {
        return invalid("restricted model layout differs from the full model");
    }
    let fixing = routed_segment_fixing(&restricted);
    let lp = fix_variables(&restricted.spec, &fixing)?;
    let lp = relax_integrality(&lp);
    let r = solve(&lp, options)?;
    if r.status == SolveStatus::Optimal {
        if let Some(ub) = accept_point(instance, r.primal, UpperBoundSource::RestrictedLp) {
            return Ok(ub);
        }
    }
    debug!("routed restriction gave status {:?}, trying the restricted MILP", r.status);
    let budget = options.time_limit.map_or(60.0, |t| (0.25 * t).max(1.0));
    let r = solve(&restricted.spec, &options.with_time_limit(budget))?;
    if r.status.has_solution() {
        if let Some(ub) = accept_point(instance, r.primal, UpperBoundSource::RestrictedMilp) {
            return Ok(ub);
        }
    }
    warn!("no feasible point of the restriction found (status {:?}); upper bound is +inf", r.status);
    Ok(UpperBound::unavailable())
}

fn accept_point(instance: &CentralizedInstance, x: Vec<f64>, source: UpperBoundSource) -> Option<UpperBound> {
    let v = instance.violation(&x);
    if v > POINT_TOLERANCE {
        warn!("restricted point violates the full model by {v:.3e}; discarded");
        return None;
    }
    Some(UpperBound {
        value: instance.spec.objective.eval(&x),
        point: Some(x),
        source,
    })
}

/// Solves the full model with every binary fixed; returns the LP optimum
/// and its point, or `None` when the fixing is infeasible.
pub fn fixed_binary_lp(
    instance: &CentralizedInstance,
    binaries: &[(VarId, f64)],
    options: &SolveOptions,
) -> Result<Option<(f64, Vec<f64>)>> {
    let lp = relax_integrality(&fix_variables(&instance.spec, binaries)?);
    let r = solve(&lp, options)?;
    match r.status {
        SolveStatus::Optimal => Ok(Some((r.objective, r.primal))),
        SolveStatus::Infeasible => Ok(None),
        other => Err(Error::Runtime(format!("fixed-binary LP ended with status {other:?}"))),
    }
}
