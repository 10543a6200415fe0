//! File formats: cascade and scenario JSON, long-format scenario CSV, bid
//! and solution CSVs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hydro::CascadeData;
use crate::market::{BidCurve, Scenario, ScenarioSet};
use crate::solver::ProblemSpec;

pub fn read_cascade(path: &Path) -> Result<CascadeData> {
    let cascade: CascadeData = serde_json::from_str(&fs::read_to_string(path)?)?;
    cascade.validate()?;
    Ok(cascade)
}

pub fn write_cascade(path: &Path, cascade: &CascadeData) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(cascade)?)?;
    Ok(())
}

/// One row of the long scenario table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScenarioRow {
    scenario: usize,
    probability: f64,
    hour: usize,
    price: f64,
    price_up: f64,
    price_down: f64,
    wind: f64,
    solar: f64,
    /// Semicolon-separated natural inflow per plant.
    inflow: String,
}

/// Reads a scenario set from `.json` or long-format `.csv`.
pub fn read_scenarios(path: &Path) -> Result<ScenarioSet> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Ok(serde_json::from_str(&fs::read_to_string(path)?)?),
        Some("csv") => read_scenario_csv(path),
        _ => invalid(format!("{}: expected a .json or .csv scenario file", path.display())),
    }
}

pub fn write_scenarios(path: &Path, set: &ScenarioSet) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Ok(fs::write(path, serde_json::to_string_pretty(set)?)?),
        Some("csv") => write_scenario_csv(path, set),
        _ => invalid(format!("{}: expected a .json or .csv scenario file", path.display())),
    }
}

fn write_scenario_csv(path: &Path, set: &ScenarioSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (i, s) in set.scenarios.iter().enumerate() {
        for t in 0..s.horizon() {
            let inflow: Vec<String> = s.inflow.iter().map(|q| q[t].to_string()).collect();
            w.serialize(ScenarioRow {
                scenario: i,
                probability: s.probability,
                hour: t,
                price: s.price[t],
                price_up: s.price_up[t],
                price_down: s.price_down[t],
                wind: s.wind[t],
                solar: s.solar[t],
                inflow: inflow.join(";"),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_scenario_csv(path: &Path) -> Result<ScenarioSet> {
    let mut rows: Vec<ScenarioRow> = Vec::new();
    for r in csv::Reader::from_path(path)?.deserialize() {
        rows.push(r?);
    }
    rows.sort_by_key(|r| (r.scenario, r.hour));
    let mut scenarios: Vec<Scenario> = Vec::new();
    for r in rows {
        let inflow: Vec<f64> = r
            .inflow
            .split(';')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| crate::Error::Invalid(format!("scenario {} hour {}: bad inflow ({e})", r.scenario, r.hour)))?;
        if r.scenario == scenarios.len() {
            scenarios.push(Scenario {
                probability: r.probability,
                price: Vec::new(),
                price_up: Vec::new(),
                price_down: Vec::new(),
                inflow: vec![Vec::new(); inflow.len()],
                wind: Vec::new(),
                solar: Vec::new(),
            });
        }
        if r.scenario + 1 != scenarios.len() {
            return invalid(format!("scenario ids must be contiguous from 0 (found {})", r.scenario));
        }
        let s = scenarios.last_mut().expect("pushed above");
        if r.hour != s.price.len() {
            return invalid(format!("scenario {}: hours must be contiguous from 0", r.scenario));
        }
        if inflow.len() != s.inflow.len() {
            return invalid(format!("scenario {}: inflow width changes at hour {}", r.scenario, r.hour));
        }
        s.price.push(r.price);
        s.price_up.push(r.price_up);
        s.price_down.push(r.price_down);
        s.wind.push(r.wind);
        s.solar.push(r.solar);
        for (q, v) in s.inflow.iter_mut().zip(inflow) {
            q.push(v);
        }
    }
    Ok(ScenarioSet::new(scenarios))
}

#[derive(Debug, Serialize, Deserialize)]
struct BidRow {
    hour: usize,
    price: f64,
    quantity: f64,
}

pub fn write_bids(path: &Path, curves: &[BidCurve]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for c in curves {
        for &(price, quantity) in &c.points {
            w.serialize(BidRow { hour: c.hour, price, quantity })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_bids(path: &Path) -> Result<Vec<BidCurve>> {
    let mut curves: Vec<BidCurve> = Vec::new();
    for r in csv::Reader::from_path(path)?.deserialize() {
        let r: BidRow = r?;
        match curves.last_mut() {
            Some(c) if c.hour == r.hour => c.points.push((r.price, r.quantity)),
            _ => {
                if r.hour != curves.len() {
                    return invalid(format!("bid hours must be contiguous from 0 (found {})", r.hour));
                }
                curves.push(BidCurve::fixed(r.hour, r.price, r.quantity));
            }
        }
    }
    Ok(curves)
}

/// `name,value` for every variable of the model.
pub fn write_solution(path: &Path, spec: &ProblemSpec, x: &[f64]) -> Result<()> {
    if x.len() != spec.num_vars() {
        return invalid("solution length does not match the model");
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["name", "value"])?;
    for (v, value) in spec.variables.iter().zip(x) {
        w.write_record([v.name.as_str(), &value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
