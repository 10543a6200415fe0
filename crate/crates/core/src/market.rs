//! Market side of the portfolio: power balance, expected cost, bid curves
//! and price-taker settlement.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::solver::{Constraint, LinExpr, ProblemSpec, RowSense, VarId};

/// One price/inflow/renewable path over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub probability: f64,
    /// Day-ahead price, €/MWh.
    pub price: Vec<f64>,
    /// Price paid for a shortfall, €/MWh.
    pub price_up: Vec<f64>,
    /// Price received for a surplus, €/MWh.
    pub price_down: Vec<f64>,
    /// External inflow `[plant][t]`, m³/s.
    pub inflow: Vec<Vec<f64>>,
    /// Wind output, MW.
    pub wind: Vec<f64>,
    /// Solar output, MW.
    pub solar: Vec<f64>,
}

impl Scenario {
    pub fn horizon(&self) -> usize {
        self.price.len()
    }

    /// Renewable output at `t`, MW.
    pub fn vres(&self, t: usize) -> f64 {
        self.wind[t] + self.solar[t]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn new(scenarios: Vec<Scenario>) -> Self {
        Self { scenarios }
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.scenarios.first().map_or(0, Scenario::horizon)
    }

    pub fn num_plants(&self) -> usize {
        self.scenarios.first().map_or(0, |s| s.inflow.len())
    }

    /// Largest external inflow of `plant` over all scenarios and steps.
    pub fn max_inflow(&self, plant: usize) -> f64 {
        self.scenarios
            .iter()
            .flat_map(|s| s.inflow[plant].iter().copied())
            .fold(0.0, f64::max)
    }

    /// Scenario-averaged external inflow of `plant`.
    pub fn expected_inflow(&self, plant: usize) -> Vec<f64> {
        let horizon = self.horizon();
        let mut out = vec![0.0; horizon];
        for s in &self.scenarios {
            for (o, q) in out.iter_mut().zip(&s.inflow[plant]) {
                *o += s.probability * q;
            }
        }
        out
    }

    /// Rescales probabilities to sum to one.
    pub fn normalize(&mut self) {
        let total: f64 = self.scenarios.iter().map(|s| s.probability).sum();
        if total > 0.0 {
            for s in &mut self.scenarios {
                s.probability /= total;
            }
        }
    }

    /// Hard checks on shapes and probabilities; price ordering only warns.
    pub fn validate(&self, num_plants: usize, horizon: usize) -> Result<()> {
        if self.scenarios.is_empty() {
            return invalid("scenario set is empty");
        }
        let mut total = 0.0;
        for (w, s) in self.scenarios.iter().enumerate() {
            if !(s.probability > 0.0) {
                return invalid(format!("scenario {w}: probability must be positive"));
            }
            total += s.probability;
            let series = [
                ("price", &s.price),
                ("price_up", &s.price_up),
                ("price_down", &s.price_down),
                ("wind", &s.wind),
                ("solar", &s.solar),
            ];
            for (name, v) in series {
                if v.len() != horizon {
                    return invalid(format!("scenario {w}: {name} has {} steps, need {horizon}", v.len()));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return invalid(format!("scenario {w}: {name} contains a non-finite value"));
                }
            }
            if s.wind.iter().chain(&s.solar).any(|x| *x < 0.0) {
                return invalid(format!("scenario {w}: negative renewable output"));
            }
            if s.inflow.len() != num_plants {
                return invalid(format!(
                    "scenario {w}: inflow for {} plants, cascade has {num_plants}",
                    s.inflow.len()
                ));
            }
            for (n, q) in s.inflow.iter().enumerate() {
                if q.len() != horizon {
                    return invalid(format!("scenario {w}: inflow of plant {n} has {} steps", q.len()));
                }
                if q.iter().any(|x| !(*x >= 0.0)) {
                    return invalid(format!("scenario {w}: negative inflow at plant {n}"));
                }
            }
            for t in 0..horizon {
                if !(s.price_up[t] >= s.price[t] && s.price[t] >= s.price_down[t]) {
                    warn!(
                        "scenario {w} step {t}: imbalance prices not ordered around the day-ahead price \
                         ({} / {} / {})",
                        s.price_up[t], s.price[t], s.price_down[t]
                    );
                }
            }
        }
        if (total - 1.0).abs() > 1e-9 {
            return invalid(format!("scenario probabilities sum to {total}, not 1"));
        }
        Ok(())
    }
}

/// Market decision handles, `[scenario][t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketVars {
    pub e: Vec<Vec<VarId>>,
    pub up: Vec<Vec<VarId>>,
    pub down: Vec<Vec<VarId>>,
}

/// Allocates `e`, `δ↑`, `δ↓` boxed in `[0, e_max]`.
pub fn allocate_market_vars(
    spec: &mut ProblemSpec,
    scenarios: usize,
    horizon: usize,
    e_max: f64,
    prefix: &str,
) -> MarketVars {
    let mut alloc = |sym: &str| -> Vec<Vec<VarId>> {
        (0..scenarios)
            .map(|w| {
                (0..horizon)
                    .map(|t| spec.add_var(format!("{prefix}{sym}[{w}][{t}]"), 0.0, e_max, false))
                    .collect()
            })
            .collect()
    };
    let e = alloc("e");
    let up = alloc("d_up");
    let down = alloc("d_dn");
    MarketVars { e, up, down }
}

/// `(Σ_n p + P^W + P^S)·Δ_T − e − δ↓ + δ↑ = 0` for one scenario.
/// `power[n][t]` are the hydro power handles seen by the market.
pub fn build_power_balance(
    power: &[Vec<VarId>],
    scenario: &Scenario,
    w: usize,
    vars: &MarketVars,
    step_hours: f64,
) -> Result<Vec<Constraint>> {
    if !(step_hours > 0.0 && step_hours.is_finite()) {
        return invalid(format!("sampling period of {step_hours} h is not usable"));
    }
    let horizon = scenario.horizon();
    if power.iter().any(|p| p.len() != horizon) {
        return invalid("power handles do not cover the horizon");
    }
    let mut rows = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let mut expr = LinExpr::constant(scenario.vres(t) * step_hours);
        for p in power {
            expr.add(p[t], step_hours);
        }
        expr.add(vars.e[w][t], -1.0);
        expr.add(vars.down[w][t], -1.0);
        expr.add(vars.up[w][t], 1.0);
        rows.push(Constraint::new(format!("balance[{w}][{t}]"), expr, RowSense::Eq, 0.0));
    }
    Ok(rows)
}

/// Contribution of one scenario to `J`, with weight `weight` (usually `P_ω`).
pub fn scenario_cost(scenario: &Scenario, w: usize, vars: &MarketVars, weight: f64) -> LinExpr {
    let mut j = LinExpr::new();
    for t in 0..scenario.horizon() {
        j.add(vars.up[w][t], weight * scenario.price_up[t]);
        j.add(vars.down[w][t], -weight * scenario.price_down[t]);
        j.add(vars.e[w][t], -weight * scenario.price[t]);
    }
    j
}

/// Expected cost `J = Σ_ω P_ω Σ_t (π↑δ↑ − π↓δ↓ − π e)`, to be minimized.
pub fn build_objective(scenarios: &ScenarioSet, vars: &MarketVars) -> LinExpr {
    let mut j = LinExpr::new();
    for (w, s) in scenarios.scenarios.iter().enumerate() {
        j.add_expr(&scenario_cost(s, w, vars, s.probability), 1.0);
    }
    j
}

/// Non-decreasing offers in price: per hour, scenarios are grouped by equal
/// price and every offer of one group is bounded by every offer of the next.
pub fn build_bid_monotonicity(scenarios: &ScenarioSet, vars: &MarketVars) -> Vec<Constraint> {
    let mut rows = Vec::new();
    for t in 0..scenarios.horizon() {
        let groups = price_groups(scenarios, t);
        for pair in groups.windows(2) {
            for &a in &pair[0] {
                for &b in &pair[1] {
                    rows.push(Constraint::new(
                        format!("mono[{t}][{a}][{b}]"),
                        LinExpr::var(vars.e[a][t]).term(vars.e[b][t], -1.0),
                        RowSense::Le,
                        0.0,
                    ));
                }
            }
        }
    }
    rows
}

/// Scenario indices at hour `t` grouped by equal price, ascending.
fn price_groups(scenarios: &ScenarioSet, t: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scenarios.len()).collect();
    order.sort_by(|&a, &b| {
        scenarios.scenarios[a].price[t]
            .total_cmp(&scenarios.scenarios[b].price[t])
            .then(a.cmp(&b))
    });
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for w in order {
        let p = scenarios.scenarios[w].price[t];
        match groups.last_mut() {
            Some(g) if scenarios.scenarios[g[0]].price[t] == p => g.push(w),
            _ => groups.push(vec![w]),
        }
    }
    groups
}

/// Price-quantity offer for one hour; points sorted by price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidCurve {
    pub hour: usize,
    /// `(price €/MWh, quantity MWh)`.
    pub points: Vec<(f64, f64)>,
}

impl BidCurve {
    /// Single-point curve: the same quantity at any price.
    pub fn fixed(hour: usize, price: f64, quantity: f64) -> Self {
        Self {
            hour,
            points: vec![(price, quantity)],
        }
    }

    /// Step clearing: quantity of the rightmost point at or below `price`;
    /// below the whole curve, the lowest point's quantity.
    pub fn cleared_quantity(&self, price: f64) -> f64 {
        match self.points.iter().rposition(|(p, _)| *p <= price) {
            Some(i) => self.points[i].1,
            None => self.points.first().map_or(0.0, |pt| pt.1),
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1)
    }
}

/// Tolerance for monotonicity of extracted offers, MWh.
pub const BID_TOLERANCE: f64 = 1e-6;

/// Reads one bid curve per hour out of a solution.
pub fn extract_bid_curves(
    primal: &[f64],
    scenarios: &ScenarioSet,
    vars: &MarketVars,
) -> Result<Vec<BidCurve>> {
    let mut curves = Vec::with_capacity(scenarios.horizon());
    for t in 0..scenarios.horizon() {
        let mut points: Vec<(f64, f64)> = Vec::new();
        for group in price_groups(scenarios, t) {
            let price = scenarios.scenarios[group[0]].price[t];
            let q = group
                .iter()
                .map(|&w| primal[vars.e[w][t].0].max(0.0))
                .fold(f64::NEG_INFINITY, f64::max);
            if let Some(&(_, prev)) = points.last() {
                if q < prev - BID_TOLERANCE * (1.0 + prev.abs()) {
                    return Err(Error::Invalid(format!(
                        "hour {t}: offer drops from {prev} to {q} at price {price}"
                    )));
                }
            }
            // clip solver noise so the exported curve is monotone exactly
            let q = points.last().map_or(q, |&(_, prev)| q.max(prev));
            points.push((price, q));
        }
        curves.push(BidCurve { hour: t, points });
    }
    Ok(curves)
}

/// Realized market and production data of one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedPath {
    pub price: Vec<f64>,
    pub price_up: Vec<f64>,
    pub price_down: Vec<f64>,
    /// Energy actually produced per hour, MWh.
    pub production: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourSettlement {
    pub hour: usize,
    pub price: f64,
    pub offer: f64,
    pub production: f64,
    pub shortfall: f64,
    pub surplus: f64,
    pub profit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settlement {
    pub profit: f64,
    pub production_mwh: f64,
    pub hours: Vec<HourSettlement>,
}

impl Settlement {
    /// Profit per MWh produced, €/MWh (zero when nothing was produced).
    pub fn profit_per_mwh(&self) -> f64 {
        if self.production_mwh > 0.0 {
            self.profit / self.production_mwh
        } else {
            0.0
        }
    }
}

/// Prices outside this range are settled but logged.
pub const SANE_PRICE_RANGE: (f64, f64) = (-500.0, 3000.0);

/// Clears each hourly curve at the realized price and settles imbalances
/// with the realized production.
pub fn settle_ex_post(curves: &[BidCurve], realized: &RealizedPath) -> Result<Settlement> {
    settle_with_guard(curves, realized, SANE_PRICE_RANGE)
}

pub fn settle_with_guard(
    curves: &[BidCurve],
    realized: &RealizedPath,
    guard: (f64, f64),
) -> Result<Settlement> {
    let horizon = realized.price.len();
    if curves.len() != horizon
        || realized.price_up.len() != horizon
        || realized.price_down.len() != horizon
        || realized.production.len() != horizon
    {
        return invalid("bid curves and realized path disagree on the horizon");
    }
    let mut hours = Vec::with_capacity(horizon);
    let mut profit = 0.0;
    for (t, curve) in curves.iter().enumerate() {
        let price = realized.price[t];
        if price < guard.0 || price > guard.1 {
            warn!("hour {t}: realized price {price} €/MWh outside the sanity range");
        }
        let offer = curve.cleared_quantity(price);
        let production = realized.production[t];
        let shortfall = (offer - production).max(0.0);
        let surplus = (production - offer).max(0.0);
        let p = price * offer + realized.price_down[t] * surplus - realized.price_up[t] * shortfall;
        profit += p;
        hours.push(HourSettlement {
            hour: t,
            price,
            offer,
            production,
            shortfall,
            surplus,
            profit: p,
        });
    }
    Ok(Settlement {
        profit,
        production_mwh: realized.production.iter().sum(),
        hours,
    })
}
