//! Synthetic scenario generation, scenario reduction and out-of-sample
//! validation.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::centralized::{assemble_centralized, CentralizedInstance};
use crate::error::{invalid, Error, Result};
use crate::hydro::{CascadeData, OperationalCurve};
use crate::market::{extract_bid_curves, settle_ex_post, BidCurve, RealizedPath, Scenario, ScenarioSet, Settlement};
use crate::runtime::{dispatch_round, TaskId, TaskMessage};
use crate::solver::{relax_integrality, solve, SolveOptions, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceStats {
    pub mean: f64,
    pub std: f64,
}

impl SourceStats {
    pub const fn new(mean: f64, std: f64) -> Self {
        Self { mean, std }
    }
}

/// Hourly mean and standard deviation of every source for one month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthStats {
    pub month: String,
    pub price: SourceStats,
    pub price_up: SourceStats,
    pub price_down: SourceStats,
    pub inflow: SourceStats,
    pub solar: SourceStats,
    pub wind: SourceStats,
}

/// 24 hourly multipliers; price and wind shapes average to one, the solar
/// shape is zero outside daylight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiurnalShapes {
    pub price: Vec<f64>,
    pub solar: Vec<f64>,
    pub wind: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyStats {
    pub months: Vec<MonthStats>,
    pub shapes: DiurnalShapes,
    pub wind_capacity_mw: f64,
    pub solar_capacity_mw: f64,
}

const PRICE_SHAPE: [f64; 24] = [
    0.82, 0.76, 0.72, 0.70, 0.71, 0.78, 0.92, 1.08, 1.16, 1.14, 1.10, 1.07, 1.04, 1.00, 0.98, 0.99,
    1.03, 1.12, 1.24, 1.28, 1.20, 1.08, 0.98, 0.90,
];

impl UncertaintyStats {
    /// February to April averages of the reference data set.
    pub fn reference() -> Self {
        let m = |month: &str, s: [(f64, f64); 6]| MonthStats {
            month: month.into(),
            price: SourceStats::new(s[0].0, s[0].1),
            price_up: SourceStats::new(s[1].0, s[1].1),
            price_down: SourceStats::new(s[2].0, s[2].1),
            inflow: SourceStats::new(s[3].0, s[3].1),
            solar: SourceStats::new(s[4].0, s[4].1),
            wind: SourceStats::new(s[5].0, s[5].1),
        };
        let price_mean = PRICE_SHAPE.iter().sum::<f64>() / 24.0;
        let solar: Vec<f64> = (0..24)
            .map(|h| {
                let x = (h as f64 + 0.5 - 7.0) / 11.0;
                if (0.0..=1.0).contains(&x) {
                    (std::f64::consts::PI * x).sin()
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            months: vec![
                m("february", [(51.1, 12.4), (58.1, 13.9), (49.1, 12.8), (1367.8, 456.1), (6.2, 10.7), (91.5, 61.9)]),
                m("march", [(35.4, 9.8), (38.6, 10.7), (32.3, 8.4), (1932.2, 549.3), (9.6, 14.1), (84.6, 57.1)]),
                m("april", [(34.7, 8.8), (38.6, 9.7), (28.5, 8.3), (798.68, 219.0), (13.5, 17.4), (52.8, 29.5)]),
            ],
            shapes: DiurnalShapes {
                price: PRICE_SHAPE.iter().map(|p| p / price_mean).collect(),
                solar,
                wind: vec![1.0; 24],
            },
            wind_capacity_mw: 278.4,
            solar_capacity_mw: 60.0,
        }
    }

    pub fn month(&self, name: &str) -> Result<&MonthStats> {
        self.months
            .iter()
            .find(|m| m.month.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Invalid(format!("no statistics for month {name}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.months.is_empty() {
            return invalid("statistics contain no month");
        }
        for m in &self.months {
            let all = [m.price, m.price_up, m.price_down, m.inflow, m.solar, m.wind];
            if all.iter().any(|s| !(s.std >= 0.0) || !s.mean.is_finite()) {
                return invalid(format!("{}: standard deviations must be non-negative", m.month));
            }
            if !(m.price_up.mean >= m.price.mean && m.price.mean >= m.price_down.mean) {
                return invalid(format!("{}: mean imbalance prices must bracket the day-ahead mean", m.month));
            }
            if !(m.inflow.mean > 0.0 && m.price.mean > 0.0) {
                return invalid(format!("{}: inflow and price means must be positive", m.month));
            }
        }
        let s = &self.shapes;
        if s.price.len() != 24 || s.solar.len() != 24 || s.wind.len() != 24 {
            return invalid("diurnal shapes need 24 hourly values");
        }
        if s.price.iter().chain(&s.solar).chain(&s.wind).any(|x| !(*x >= 0.0)) {
            return invalid("diurnal shapes must be non-negative");
        }
        if !(self.wind_capacity_mw >= 0.0 && self.solar_capacity_mw >= 0.0) {
            return invalid("renewable capacities must be non-negative");
        }
        Ok(())
    }
}

/// How the month statistics are mapped onto a particular portfolio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub month: String,
    /// Mean external inflow of each plant as a fraction of the river mean.
    pub inflow_shares: Vec<f64>,
    /// Hard cap on each plant's external inflow, m³/s.
    pub inflow_caps: Vec<f64>,
    /// Multiplier applied to wind and solar output and capacity.
    pub vres_scale: f64,
}

fn lognormal(mean: f64, std: f64) -> LogNormal<f64> {
    let mean = mean.max(1e-9);
    let s2 = (1.0 + (std / mean).powi(2)).ln();
    LogNormal::new(mean.ln() - 0.5 * s2, s2.sqrt()).expect("finite lognormal parameters")
}

/// Share of a source's variance drawn once per day; the rest varies hourly.
const DAILY_SHARE: f64 = 0.7;

/// Day-level times hour-level lognormal factors with overall mean `mean`
/// and coefficient of variation about `cv`.
fn two_level_path(rng: &mut ChaCha8Rng, cv: f64, shape: &[f64], horizon: usize, mean: f64) -> Vec<f64> {
    let daily = lognormal(1.0, (DAILY_SHARE * cv * cv).sqrt());
    let hourly = lognormal(1.0, ((1.0 - DAILY_SHARE) * cv * cv).sqrt());
    let day = daily.sample(rng);
    (0..horizon)
        .map(|t| mean * shape[t % shape.len()] * day * hourly.sample(rng))
        .collect()
}

fn truncated_normal(rng: &mut ChaCha8Rng, mean: f64, std: f64, lo: f64, hi: f64) -> f64 {
    if std <= 0.0 {
        return mean.clamp(lo, hi);
    }
    let d = Normal::new(mean, std).expect("finite normal parameters");
    for _ in 0..64 {
        let x = d.sample(rng);
        if (lo..=hi).contains(&x) {
            return x;
        }
    }
    mean.clamp(lo, hi)
}

/// Draws `count` equiprobable scenarios; each source is sampled from its own
/// seeded stream so sources stay independent and reproducible.
pub fn generate_synthetic(
    stats: &UncertaintyStats,
    config: &GeneratorConfig,
    count: usize,
    horizon: usize,
    seed: u64,
) -> Result<ScenarioSet> {
    stats.validate()?;
    if count == 0 || horizon == 0 {
        return invalid("need at least one scenario and one step");
    }
    if config.inflow_shares.len() != config.inflow_caps.len() {
        return invalid("inflow shares and caps must have one entry per plant");
    }
    let m = stats.month(&config.month)?;
    let shapes = &stats.shapes;
    let mut price_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spread_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0001);
    let mut inflow_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0002);
    let mut wind_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0003);
    let mut solar_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0004);

    let up_spread = SourceStats::new(m.price_up.mean - m.price.mean, 0.5 * (m.price_up.mean - m.price.mean));
    let down_spread = SourceStats::new(m.price.mean - m.price_down.mean, 0.5 * (m.price.mean - m.price_down.mean));
    let solar_shape_mean = shapes.solar.iter().sum::<f64>() / 24.0;
    let solar_peak = if solar_shape_mean > 0.0 { m.solar.mean / solar_shape_mean } else { 0.0 };

    let mut scenarios = Vec::with_capacity(count);
    for _ in 0..count {
        let price = two_level_path(&mut price_rng, m.price.std / m.price.mean, &shapes.price, horizon, m.price.mean);
        let spread = |rng: &mut ChaCha8Rng, s: SourceStats| -> f64 {
            if s.mean <= 0.0 {
                0.0
            } else {
                lognormal(s.mean, s.std).sample(rng)
            }
        };
        let price_up: Vec<f64> = price.iter().map(|p| p + spread(&mut spread_rng, up_spread)).collect();
        let price_down: Vec<f64> = price.iter().map(|p| p - spread(&mut spread_rng, down_spread)).collect();

        let inflow = config
            .inflow_shares
            .iter()
            .zip(&config.inflow_caps)
            .map(|(share, cap)| {
                let cv = m.inflow.std / m.inflow.mean;
                // rivers move slowly: most of the variance is day to day
                let base = two_level_path(&mut inflow_rng, cv * 0.5, &[1.0], horizon, share * m.inflow.mean);
                base.into_iter().map(|q| q.clamp(0.0, *cap)).collect()
            })
            .collect();

        let level = truncated_normal(&mut wind_rng, m.wind.mean, m.wind.std, 0.0, stats.wind_capacity_mw);
        let noise = Normal::new(0.0, 0.1 * m.wind.std).expect("finite wind noise");
        let mut w = level;
        let wind = (0..horizon)
            .map(|t| {
                w = (0.9 * w + 0.1 * level + noise.sample(&mut wind_rng)).clamp(0.0, stats.wind_capacity_mw);
                (w * shapes.wind[t % 24]).min(stats.wind_capacity_mw) * config.vres_scale
            })
            .collect();

        let solar = (0..horizon)
            .map(|t| {
                let shape = shapes.solar[t % 24];
                if shape == 0.0 {
                    return 0.0;
                }
                let sd = m.solar.std / m.solar.mean.max(1e-9) * solar_peak * shape * 0.5;
                truncated_normal(&mut solar_rng, solar_peak * shape, sd, 0.0, stats.solar_capacity_mw)
                    * config.vres_scale
            })
            .collect();

        scenarios.push(Scenario {
            probability: 1.0 / count as f64,
            price,
            price_up,
            price_down,
            inflow,
            wind,
            solar,
        });
    }
    Ok(ScenarioSet::new(scenarios))
}

/// Uniform random subset of size `m` without replacement, reweighted to `1/m`.
pub fn reduce_scenarios(full: &ScenarioSet, m: usize, seed: u64) -> Result<ScenarioSet> {
    if m == 0 {
        return invalid("reduced set needs at least one scenario");
    }
    if m > full.len() {
        return invalid(format!("cannot pick {m} of {} scenarios", full.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, full.len(), m).into_vec();
    picked.sort_unstable();
    Ok(ScenarioSet::new(
        picked
            .into_iter()
            .map(|i| Scenario {
                probability: 1.0 / m as f64,
                ..full.scenarios[i].clone()
            })
            .collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Milp,
    LpRelaxation,
}

/// Trained bids and the training objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedBids {
    pub objective: f64,
    pub curves: Vec<BidCurve>,
}

pub fn train_bids(cascade: &CascadeData, train: &ScenarioSet, variant: Variant, options: &SolveOptions) -> Result<TrainedBids> {
    let inst = assemble_centralized(cascade, train)?;
    let spec = match variant {
        Variant::Milp => inst.spec.clone(),
        Variant::LpRelaxation => relax_integrality(&inst.spec),
    };
    let r = solve(&spec, options)?;
    if !r.status.has_solution() {
        return Err(Error::Infeasible(format!("training problem ended with {:?}", r.status)));
    }
    Ok(TrainedBids {
        objective: r.objective,
        curves: extract_bid_curves(&r.primal, train, &inst.market)?,
    })
}

/// Optimal re-dispatch of one realized scenario with the cleared offers
/// fixed: `(cost, point, instance)`, or `None` if no dispatch honours them.
pub fn recourse_dispatch(
    cascade: &CascadeData,
    scenario: &Scenario,
    curves: &[BidCurve],
    variant: Variant,
    options: &SolveOptions,
) -> Result<Option<(f64, Vec<f64>, CentralizedInstance)>> {
    let single = ScenarioSet::new(vec![Scenario {
        probability: 1.0,
        ..scenario.clone()
    }]);
    let inst = match assemble_centralized(cascade, &single) {
        Ok(i) => i,
        Err(Error::Infeasible(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut spec = match variant {
        Variant::Milp => inst.spec.clone(),
        Variant::LpRelaxation => relax_integrality(&inst.spec),
    };
    if curves.len() != scenario.horizon() {
        return invalid("bid curves do not cover the horizon");
    }
    for (t, c) in curves.iter().enumerate() {
        let var = &mut spec.variables[inst.market.e[0][t].0];
        let q = c.cleared_quantity(scenario.price[t]).clamp(var.lower, var.upper);
        var.lower = q;
        var.upper = q;
    }
    let r = solve(&spec, options)?;
    match r.status {
        SolveStatus::Optimal | SolveStatus::FeasibleLimit => Ok(Some((r.objective, r.primal, inst))),
        SolveStatus::Infeasible => Ok(None),
        other => Err(Error::Runtime(format!("recourse problem ended with {other:?}"))),
    }
}

/// Cost of one test scenario when the cleared offers are fixed and the
/// cascade is re-dispatched optimally; `None` if the scenario is infeasible.
pub fn recourse_cost(
    cascade: &CascadeData,
    scenario: &Scenario,
    curves: &[BidCurve],
    variant: Variant,
    options: &SolveOptions,
) -> Result<Option<f64>> {
    Ok(recourse_dispatch(cascade, scenario, curves, variant, options)?.map(|(c, _, _)| c))
}

/// Probability-weighted mean of every series of the set, as one scenario.
pub fn expected_scenario(set: &ScenarioSet) -> Result<Scenario> {
    let first = set.scenarios.first().ok_or_else(|| Error::Invalid("empty scenario set".into()))?;
    let total: f64 = set.scenarios.iter().map(|s| s.probability).sum();
    let mean = |f: &dyn Fn(&Scenario) -> &Vec<f64>| -> Vec<f64> {
        let mut out = vec![0.0; f(first).len()];
        for s in &set.scenarios {
            for (o, v) in out.iter_mut().zip(f(s)) {
                *o += s.probability / total * v;
            }
        }
        out
    };
    Ok(Scenario {
        probability: 1.0,
        price: mean(&|s| &s.price),
        price_up: mean(&|s| &s.price_up),
        price_down: mean(&|s| &s.price_down),
        inflow: (0..first.inflow.len()).map(|n| mean(&|s| &s.inflow[n])).collect(),
        wind: mean(&|s| &s.wind),
        solar: mean(&|s| &s.solar),
    })
}

/// Single-point hourly bids from the expected training scenario.
pub fn train_fixed_bids(cascade: &CascadeData, train: &ScenarioSet, options: &SolveOptions) -> Result<TrainedBids> {
    let single = ScenarioSet::new(vec![expected_scenario(train)?]);
    train_bids(cascade, &single, Variant::Milp, options)
}

/// Ex-post outcome of one realized day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayReport {
    pub settlement: Settlement,
    /// Regime of each hour from the head plant's inflow.
    pub regimes: Vec<Regime>,
    /// `(regime, profit €, production MWh)` for regimes that occur.
    pub by_regime: Vec<(Regime, f64, f64)>,
}

/// Clears the curves at the realized prices, re-dispatches the cascade
/// optimally and settles the day; `None` if the offers cannot be honoured.
pub fn settle_day(
    cascade: &CascadeData,
    realized: &Scenario,
    curves: &[BidCurve],
    options: &SolveOptions,
) -> Result<Option<DayReport>> {
    let Some((_, x, inst)) = recourse_dispatch(cascade, realized, curves, Variant::Milp, options)? else {
        return Ok(None);
    };
    let dt = cascade.topology.step_hours();
    let production: Vec<f64> = (0..realized.horizon())
        .map(|t| (inst.hydro.iter().map(|h| x[h[0].p[t].0]).sum::<f64>() + realized.vres(t)) * dt)
        .collect();
    let path = RealizedPath {
        price: realized.price.clone(),
        price_up: realized.price_up.clone(),
        price_down: realized.price_down.clone(),
        production,
    };
    let settlement = settle_ex_post(curves, &path)?;
    let regimes = match (cascade.plants.first(), realized.inflow.first()) {
        (Some(p), Some(q)) => regime_classify(&p.curve, q),
        _ => Vec::new(),
    };
    let mut by_regime: Vec<(Regime, f64, f64)> = Vec::new();
    for (h, r) in settlement.hours.iter().zip(&regimes) {
        match by_regime.iter_mut().find(|(k, _, _)| k == r) {
            Some(e) => {
                e.1 += h.profit;
                e.2 += h.production;
            }
            None => by_regime.push((*r, h.profit, h.production)),
        }
    }
    Ok(Some(DayReport {
        settlement,
        regimes,
        by_regime,
    }))
}

/// One training/testing comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSample {
    pub train_objective: f64,
    pub test_mean: f64,
    /// `|training J − mean test J|`.
    pub error: f64,
    /// Error relative to `|mean test J|`, percent.
    pub error_percent: f64,
    pub excluded: usize,
}

pub fn out_of_sample_validate(
    train: &ScenarioSet,
    test: &ScenarioSet,
    cascade: &CascadeData,
    variant: Variant,
    options: &SolveOptions,
    workers: usize,
) -> Result<ValidationSample> {
    let trained = train_bids(cascade, train, variant, options)?;
    let tasks: Vec<_> = (0..test.len())
        .map(|w| TaskMessage { id: TaskId::Hydro { plant: 0, scenario: w }, iteration: 0, input: w })
        .collect();
    let results = dispatch_round(&tasks, workers, |t| {
        recourse_cost(cascade, &test.scenarios[t.input], &trained.curves, variant, options)
    })?;
    let costs: Vec<f64> = results.iter().filter_map(|r| r.output).collect();
    let excluded = results.len() - costs.len();
    if costs.is_empty() {
        return Err(Error::Infeasible("every test scenario was infeasible".into()));
    }
    let test_mean = costs.iter().sum::<f64>() / costs.len() as f64;
    let error = (trained.objective - test_mean).abs();
    Ok(ValidationSample {
        train_objective: trained.objective,
        test_mean,
        error,
        error_percent: if test_mean != 0.0 { 100.0 * error / test_mean.abs() } else { f64::INFINITY },
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub size: usize,
    pub variant: Variant,
    pub rounds: usize,
    pub mean_error: f64,
    pub std_error: f64,
    pub mean_error_percent: f64,
    pub excluded: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
}

impl ValidationReport {
    pub fn row(&self, size: usize, variant: Variant) -> Option<&ValidationRow> {
        self.rows.iter().find(|r| r.size == size && r.variant == variant)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Runtime(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Runtime(e.to_string()))
    }
}

/// Repeats reduction + validation `rounds` times for every training size.
#[allow(clippy::too_many_arguments)]
pub fn validation_sweep(
    pool: &ScenarioSet,
    test: &ScenarioSet,
    cascade: &CascadeData,
    sizes: &[usize],
    rounds: usize,
    variants: &[Variant],
    seed: u64,
    options: &SolveOptions,
    workers: usize,
) -> Result<ValidationReport> {
    if rounds == 0 {
        return invalid("need at least one sampling round");
    }
    let mut report = ValidationReport::default();
    for &variant in variants {
        for &size in sizes {
            let mut errors = Vec::with_capacity(rounds);
            let mut pct = Vec::with_capacity(rounds);
            let mut excluded = 0;
            for round in 0..rounds {
                let round_seed = seed.wrapping_mul(1_000_003).wrapping_add((size * 10_007 + round) as u64);
                let train = reduce_scenarios(pool, size, round_seed)?;
                let s = out_of_sample_validate(&train, test, cascade, variant, options, workers)?;
                errors.push(s.error);
                pct.push(s.error_percent);
                excluded += s.excluded;
            }
            let n = errors.len() as f64;
            let mean = errors.iter().sum::<f64>() / n;
            let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
            report.rows.push(ValidationRow {
                size,
                variant,
                rounds,
                mean_error: mean,
                std_error: var.sqrt(),
                mean_error_percent: pct.iter().sum::<f64>() / n,
                excluded,
            });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    LowFlow,
    Energetic,
    Flood,
}

/// Hourly regime from the curve segment each inflow falls in: the last
/// segment and pinched segments above the banded ones are floods, pinched
/// segments below them are low-flow, the rest is energetic.
pub fn regime_classify(curve: &OperationalCurve, inflow: &[f64]) -> Vec<Regime> {
    let banded: Vec<usize> = curve
        .segments
        .iter()
        .enumerate()
        .filter(|(_, s)| s.level_min < s.level_max)
        .map(|(i, _)| i)
        .collect();
    let last = curve.len().saturating_sub(1);
    inflow
        .iter()
        .map(|&q| {
            let i = curve.segment_for(q);
            if i == last && q >= curve.max_breakpoint() {
                return Regime::Flood;
            }
            match (banded.first(), banded.last()) {
                (Some(&lo), Some(&hi)) => {
                    if i < lo {
                        Regime::LowFlow
                    } else if i > hi {
                        Regime::Flood
                    } else {
                        Regime::Energetic
                    }
                }
                _ => Regime::LowFlow,
            }
        })
        .collect()
}

/// Uniform draw helper used by presets and tests.
pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}
