//! Built-in synthetic portfolios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::hydro::{
    BoundaryHistory, CascadeData, CascadeTopology, CurveSegment, Link, OperationalCurve, PlantSpec, SurfaceArea,
    DEFAULT_EPS_STRICT, GRAVITY, WATER_DENSITY,
};
use crate::market::ScenarioSet;
use crate::scenarios::{generate_synthetic, GeneratorConfig, UncertaintyStats};

/// `(name, capacity MW, nominal head m)` of the twelve reference plants.
pub const REFERENCE_PLANTS: [(&str, f64, f64); 12] = [
    ("pierre-benite", 80.0, 9.0),
    ("vaugris", 72.0, 6.7),
    ("peage-de-roussillon", 160.0, 12.2),
    ("saint-vallier", 120.0, 11.5),
    ("bourg-les-valence", 180.0, 11.7),
    ("beauchastel", 192.0, 11.8),
    ("baix-le-logis-neuf", 192.0, 11.7),
    ("montelimar", 275.0, 16.5),
    ("donzere-mondragon", 349.0, 22.5),
    ("caderousse", 187.0, 8.6),
    ("avignon", 186.0, 9.5),
    ("vallabregues", 210.0, 11.3),
];

const EFFICIENCY: f64 = 0.9;
const TAILRACE: f64 = 50.0;
const DRAWDOWN: f64 = 1.0;
/// Typical discharge as a fraction of turbine capacity.
const TYPICAL_LOAD: f64 = 0.6;

fn turbine_capacity(capacity_mw: f64, head: f64) -> f64 {
    capacity_mw / (1e-6 * WATER_DENSITY * GRAVITY * EFFICIENCY * head)
}

/// Curve with pinched low-flow and flood segments around banded ones; every
/// band tops out at the nominal level so the run-of-river restriction stays
/// feasible.
pub fn synthetic_curve(q_max: f64, top: f64, segments: usize) -> OperationalCurve {
    let segments = segments.max(1);
    let span = 1.2 * q_max;
    OperationalCurve {
        segments: (0..segments)
            .map(|i| {
                let pinched = segments > 2 && (i == 0 || i + 1 == segments);
                // deepest drawdown allowed mid-range
                let x = (i as f64 + 0.5) / segments as f64;
                let depth = if pinched { 0.0 } else { DRAWDOWN * (std::f64::consts::PI * x).sin() };
                CurveSegment {
                    inflow: span * i as f64 / segments as f64,
                    level_min: top - depth,
                    level_max: top,
                }
            })
            .collect(),
    }
}

pub fn synthetic_plant(id: &str, capacity_mw: f64, head: f64, segments: usize, big_m_barrage: f64) -> PlantSpec {
    let q_max = turbine_capacity(capacity_mw, head);
    let top = TAILRACE + head;
    PlantSpec {
        id: id.into(),
        capacity_mw,
        head_min: head - DRAWDOWN - 0.1,
        head_max: head,
        turbine_min: 0.0,
        turbine_max: q_max,
        ramp: 0.3 * q_max,
        barrage_min: 0.02 * q_max,
        efficiency: EFFICIENCY,
        tailrace_level: TAILRACE,
        initial_level: top,
        surface_area: SurfaceArea::Constant(4000.0 * q_max),
        curve: synthetic_curve(q_max, top, segments),
        big_m_curve: Some(3.0 * q_max),
        big_m_barrage: Some(big_m_barrage),
        initial_discharge: Some(TYPICAL_LOAD * q_max),
    }
}

/// Cascade of the given `(name, MW, head)` plants with one-hour travel times.
pub fn synthetic_cascade(name: &str, plants: &[(&str, f64, f64)], segments: usize, horizon: usize) -> CascadeData {
    // spill capacity covers the largest turbine flow seen so far down the river
    let mut q_top = 0.0f64;
    let specs: Vec<PlantSpec> = plants
        .iter()
        .map(|(id, c, h)| {
            q_top = q_top.max(turbine_capacity(*c, *h));
            synthetic_plant(id, *c, *h, segments, 2.0 * q_top)
        })
        .collect();
    let links = specs
        .windows(2)
        .map(|w| Link {
            travel_time_turbine: 3600.0,
            travel_time_barrage: 3600.0,
            history: BoundaryHistory::constant(TYPICAL_LOAD * w[0].turbine_max, 0.0),
        })
        .collect();
    CascadeData {
        name: name.into(),
        wind_capacity_mw: 0.0,
        solar_capacity_mw: 0.0,
        plants: specs,
        topology: CascadeTopology {
            links,
            step_seconds: 3600.0,
            horizon,
        },
        eps_strict: DEFAULT_EPS_STRICT,
    }
}

/// Inflow mapping that keeps each plant near its typical load.
pub fn generator_config(cascade: &CascadeData, month: &str, vres_scale: f64) -> GeneratorConfig {
    let stats = UncertaintyStats::reference();
    let river = stats.month(month).map_or(1367.8, |m| m.inflow.mean);
    let mut shares = Vec::new();
    let mut caps = Vec::new();
    let mut prev = 0.0;
    for p in &cascade.plants {
        let want = TYPICAL_LOAD * p.turbine_max;
        let lateral = (want - prev).max(0.03 * p.turbine_max);
        shares.push(lateral / river);
        caps.push(1.4 * p.turbine_max.max(lateral));
        prev = want;
    }
    GeneratorConfig {
        month: month.into(),
        inflow_shares: shares,
        inflow_caps: caps,
        vres_scale,
    }
}

fn with_vres(mut cascade: CascadeData, vres_scale: f64) -> CascadeData {
    let stats = UncertaintyStats::reference();
    cascade.wind_capacity_mw = stats.wind_capacity_mw * vres_scale;
    cascade.solar_capacity_mw = stats.solar_capacity_mw * vres_scale;
    cascade
}

const DESK_VRES: f64 = 0.25;

/// Three upstream plants, 24 hourly steps, four curve segments.
pub fn desk_cascade() -> CascadeData {
    with_vres(synthetic_cascade("desk", &REFERENCE_PLANTS[..3], 4, 24), DESK_VRES)
}

pub fn desk_scenarios(count: usize, seed: u64) -> Result<ScenarioSet> {
    let cascade = desk_cascade();
    generate_synthetic(
        &UncertaintyStats::reference(),
        &generator_config(&cascade, "february", DESK_VRES),
        count,
        cascade.horizon(),
        seed,
    )
}

/// Twelve plants totalling about 2.2 GW.
pub fn reference_cascade(segments: usize, horizon: usize) -> CascadeData {
    with_vres(synthetic_cascade("reference", &REFERENCE_PLANTS, segments, horizon), 1.0)
}

pub fn reference_scenarios(cascade: &CascadeData, count: usize, month: &str, seed: u64) -> Result<ScenarioSet> {
    generate_synthetic(
        &UncertaintyStats::reference(),
        &generator_config(cascade, month, 1.0),
        count,
        cascade.horizon(),
        seed,
    )
}

/// One plant, short horizon: small enough for exhaustive enumeration.
pub fn toy_cascade(horizon: usize, segments: usize) -> CascadeData {
    with_vres(synthetic_cascade("toy", &REFERENCE_PLANTS[..1], segments, horizon), 0.05)
}

pub fn toy_scenarios(cascade: &CascadeData, count: usize, seed: u64) -> Result<ScenarioSet> {
    generate_synthetic(
        &UncertaintyStats::reference(),
        &generator_config(cascade, "february", 0.05),
        count,
        cascade.horizon(),
        seed,
    )
}

/// Randomized desk-scale instance: 2–3 plants, 2–5 scenarios, 12–24 steps,
/// 3–5 curve segments.
pub fn random_desk_instance(seed: u64) -> Result<(CascadeData, ScenarioSet)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plants = rng.gen_range(2..=3);
    let scenarios = rng.gen_range(2..=5);
    let horizon = rng.gen_range(12..=24);
    let segments = rng.gen_range(3..=5);
    let start = rng.gen_range(0..=REFERENCE_PLANTS.len() - plants);
    let month = ["february", "march", "april"][rng.gen_range(0..3)];
    let cascade = with_vres(
        synthetic_cascade(
            &format!("random-{seed}"),
            &REFERENCE_PLANTS[start..start + plants],
            segments,
            horizon,
        ),
        DESK_VRES,
    );
    let set = generate_synthetic(
        &UncertaintyStats::reference(),
        &generator_config(&cascade, month, DESK_VRES),
        scenarios,
        horizon,
        rng.gen(),
    )?;
    Ok((cascade, set))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_capacity_is_about_2_2_gw() {
        let c = reference_cascade(40, 24);
        assert_eq!(c.num_plants(), 12);
        assert!((c.total_hydro_capacity() - 2203.0).abs() < 1e-9);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn presets_validate() {
        let c = desk_cascade();
        assert!(c.validate().is_ok());
        let s = desk_scenarios(5, 1).unwrap();
        assert!(s.validate(3, 24).is_ok());
        for seed in 0..10 {
            let (c, s) = random_desk_instance(seed).unwrap();
            assert!(c.validate().is_ok());
            assert!(s.validate(c.num_plants(), c.horizon()).is_ok());
        }
    }

    #[test]
    fn curve_tops_out_at_nominal_level() {
        let c = synthetic_curve(1000.0, 60.0, 5);
        assert!(c.validate().is_ok());
        assert!(c.segments.iter().all(|s| s.level_max == 60.0));
        assert_eq!(c.segments[0].level_min, 60.0);
        assert_eq!(c.segments[4].level_min, 60.0);
        assert!(c.segments[2].level_min < 60.0);
    }
}
