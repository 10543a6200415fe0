//! Physical model of a run-of-river hydropower cascade.
//!
//! Plants are indexed upstream to downstream. Each builder emits the rows of
//! one constraint family for one `(plant, scenario)` block; the block
//! assembler [`build_plant_block`] wires them together and is shared by the
//! centralized model and the hydro subproblems of the consensus scheme.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::solver::{Constraint, LinExpr, ProblemSpec, RowSense, VarId};

/// Density of water, kg/m³.
pub const WATER_DENSITY: f64 = 1000.0;
/// Gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;
/// Closing margin for the strict upper inequality of a curve segment, m³/s.
pub const DEFAULT_EPS_STRICT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSegment {
    /// Lower inflow breakpoint of the segment, m³/s.
    pub inflow: f64,
    /// Minimum forebay level while in this segment, m.
    pub level_min: f64,
    /// Maximum forebay level while in this segment, m.
    pub level_max: f64,
}

/// Piecewise-constant band of admissible forebay levels as a function of inflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationalCurve {
    pub segments: Vec<CurveSegment>,
}

impl OperationalCurve {
    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return invalid("operational curve has no segments");
        }
        for w in self.segments.windows(2) {
            if w[1].inflow <= w[0].inflow {
                return invalid("curve breakpoints must be strictly increasing");
            }
        }
        for s in &self.segments {
            if !(s.level_min <= s.level_max) {
                return invalid(format!(
                    "segment at {} m³/s has level_min {} > level_max {}",
                    s.inflow, s.level_min, s.level_max
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn max_breakpoint(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.inflow)
    }

    pub fn max_level(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.level_max)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Upper end of segment `i`: the next breakpoint, or `big_m` for the last.
    pub fn upper_breakpoint(&self, i: usize, big_m: f64) -> f64 {
        self.segments.get(i + 1).map_or(big_m, |s| s.inflow)
    }

    /// Segment whose half-open inflow range `[Q_i, Q_{i+1})` contains `q`;
    /// inflows below the first breakpoint map to segment 0.
    pub fn segment_for(&self, q: f64) -> usize {
        self.segments
            .iter()
            .rposition(|s| q >= s.inflow)
            .unwrap_or(0)
    }

    /// Same curve with every band collapsed onto its upper level.
    pub fn pinched(&self) -> Self {
        Self {
            segments: self
                .segments
                .iter()
                .map(|s| CurveSegment {
                    level_min: s.level_max,
                    ..*s
                })
                .collect(),
        }
    }
}

/// Reservoir surface area, constant or indexed by `[scenario][t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SurfaceArea {
    Constant(f64),
    Series(Vec<Vec<f64>>),
}

impl SurfaceArea {
    pub fn at(&self, scenario: usize, t: usize) -> Result<f64> {
        let s = match self {
            SurfaceArea::Constant(s) => *s,
            SurfaceArea::Series(rows) => *rows
                .get(scenario)
                .and_then(|r| r.get(t))
                .ok_or_else(|| {
                    Error::Invalid(format!("surface area missing for scenario {scenario}, t {t}"))
                })?,
        };
        if !(s > 0.0) {
            return invalid(format!("surface area must be positive, got {s}"));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub id: String,
    /// Installed capacity, MW.
    pub capacity_mw: f64,
    pub head_min: f64,
    pub head_max: f64,
    pub turbine_min: f64,
    pub turbine_max: f64,
    /// Maximum turbine discharge change per step, m³/s.
    pub ramp: f64,
    /// Minimum discharge once the barrage is open, m³/s.
    pub barrage_min: f64,
    pub efficiency: f64,
    pub tailrace_level: f64,
    /// Forebay level at the start and end of the horizon, m.
    pub initial_level: f64,
    pub surface_area: SurfaceArea,
    pub curve: OperationalCurve,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_m_curve: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_m_barrage: Option<f64>,
    /// Turbine discharge before the first step; anchors the first ramp rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_discharge: Option<f64>,
}

impl PlantSpec {
    /// `C_n = 10⁻⁶·w·g·η`, MW per (m³/s · m).
    pub fn power_coefficient(&self) -> f64 {
        1e-6 * WATER_DENSITY * GRAVITY * self.efficiency
    }

    pub fn big_m_curve(&self) -> f64 {
        self.big_m_curve
            .unwrap_or(1.5 * self.curve.max_breakpoint())
    }

    /// Barrage big-M given the largest external inflow the plant can see.
    pub fn big_m_barrage(&self, max_external_inflow: f64) -> f64 {
        self.big_m_barrage
            .unwrap_or(2.0 * self.turbine_max + max_external_inflow)
    }

    pub fn initial_discharge(&self) -> f64 {
        self.initial_discharge.unwrap_or(self.turbine_min)
    }

    pub fn validate(&self) -> Result<()> {
        let ctx = |msg: &str| Err(Error::Invalid(format!("plant {}: {msg}", self.id)));
        if !(0.0 <= self.turbine_min && self.turbine_min <= self.turbine_max) {
            return ctx("need 0 ≤ turbine_min ≤ turbine_max");
        }
        if !(self.head_min <= self.head_max) {
            return ctx("need head_min ≤ head_max");
        }
        if !(self.ramp > 0.0) {
            return ctx("ramp must be positive");
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return ctx("efficiency must lie in (0, 1]");
        }
        if !(self.capacity_mw >= 0.0) || !(self.barrage_min >= 0.0) {
            return ctx("capacity and barrage minimum must be non-negative");
        }
        if let SurfaceArea::Constant(s) = self.surface_area {
            if !(s > 0.0) {
                return ctx("surface area must be positive");
            }
        }
        self.curve.validate()?;
        if self.big_m_curve() <= self.curve.max_breakpoint() {
            return ctx("curve big-M must exceed the largest breakpoint");
        }
        if !(self.curve.max_level() > 0.0) {
            return ctx("largest curve level must be positive (barrage rule divides by it)");
        }
        let q0 = self.initial_discharge();
        if q0 < 0.0 {
            return ctx("initial discharge must be non-negative");
        }
        Ok(())
    }
}

/// Upstream discharges before the first step, indexed by lag: element `j`
/// is the value at time `-j` (time 0 is the step just before the horizon).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryHistory {
    #[serde(default)]
    pub turbine: Vec<f64>,
    #[serde(default)]
    pub barrage: Vec<f64>,
    /// Value used beyond the end of the explicit vectors.
    #[serde(default)]
    pub turbine_fill: f64,
    #[serde(default)]
    pub barrage_fill: f64,
}

impl BoundaryHistory {
    pub fn constant(turbine: f64, barrage: f64) -> Self {
        Self {
            turbine: Vec::new(),
            barrage: Vec::new(),
            turbine_fill: turbine,
            barrage_fill: barrage,
        }
    }

    pub fn turbine_at(&self, lag: usize) -> f64 {
        self.turbine.get(lag).copied().unwrap_or(self.turbine_fill)
    }

    pub fn barrage_at(&self, lag: usize) -> f64 {
        self.barrage.get(lag).copied().unwrap_or(self.barrage_fill)
    }
}

/// Hydraulic link from plant `n-1` to plant `n`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Link {
    /// Travel time of turbine discharge to the downstream control point, s.
    pub travel_time_turbine: f64,
    /// Travel time of barrage discharge, s.
    pub travel_time_barrage: f64,
    #[serde(default)]
    pub history: BoundaryHistory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeTopology {
    /// `links[n-1]` feeds plant `n`; one fewer than the number of plants.
    pub links: Vec<Link>,
    /// Sampling period Δ_T, s.
    pub step_seconds: f64,
    pub horizon: usize,
}

impl CascadeTopology {
    pub fn step_hours(&self) -> f64 {
        self.step_seconds / 3600.0
    }

    /// Travel time rounded to whole sampling periods.
    pub fn delay_steps(&self, travel_time: f64) -> usize {
        (travel_time / self.step_seconds).round() as usize
    }
}

/// Everything about the physical portfolio that does not depend on scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeData {
    #[serde(default)]
    pub name: String,
    pub plants: Vec<PlantSpec>,
    pub topology: CascadeTopology,
    #[serde(default)]
    pub wind_capacity_mw: f64,
    #[serde(default)]
    pub solar_capacity_mw: f64,
    #[serde(default = "default_eps_strict")]
    pub eps_strict: f64,
}

fn default_eps_strict() -> f64 {
    DEFAULT_EPS_STRICT
}

impl CascadeData {
    pub fn num_plants(&self) -> usize {
        self.plants.len()
    }

    pub fn horizon(&self) -> usize {
        self.topology.horizon
    }

    pub fn total_hydro_capacity(&self) -> f64 {
        self.plants.iter().map(|p| p.capacity_mw).sum()
    }

    /// Upper bound on the hourly energy the portfolio can deliver, MWh.
    pub fn max_energy_per_step(&self) -> f64 {
        (self.total_hydro_capacity() + self.wind_capacity_mw + self.solar_capacity_mw)
            * self.topology.step_hours()
    }

    pub fn validate(&self) -> Result<()> {
        if self.plants.is_empty() {
            return invalid("cascade has no plants");
        }
        let topo = &self.topology;
        if !(topo.step_seconds > 0.0) {
            return invalid("sampling period must be positive");
        }
        if topo.horizon == 0 {
            return invalid("horizon must be at least one step");
        }
        if topo.links.len() + 1 != self.plants.len() {
            return invalid(format!(
                "{} plants need {} links, got {}",
                self.plants.len(),
                self.plants.len() - 1,
                topo.links.len()
            ));
        }
        for (i, l) in topo.links.iter().enumerate() {
            if !(l.travel_time_turbine >= 0.0 && l.travel_time_barrage >= 0.0) {
                return invalid(format!("link {i}: travel times must be non-negative"));
            }
            for tau in [l.travel_time_turbine, l.travel_time_barrage] {
                if topo.delay_steps(tau) >= topo.horizon {
                    return invalid(format!("link {i}: delay of {tau} s exceeds the horizon"));
                }
            }
        }
        if !(self.eps_strict > 0.0) {
            return invalid("eps_strict must be positive");
        }
        for p in &self.plants {
            p.validate()?;
            if let SurfaceArea::Series(rows) = &p.surface_area {
                if rows.iter().any(|r| r.len() < topo.horizon) {
                    return invalid(format!("plant {}: surface area series shorter than horizon", p.id));
                }
            }
        }
        Ok(())
    }
}

/// Variable handles of one `(plant, scenario)` block. Inflow and outflow are
/// affine expressions in other handles rather than variables of their own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroVars {
    pub plant: usize,
    pub scenario: usize,
    pub q_tr: Vec<VarId>,
    pub q_br: Vec<VarId>,
    pub z: Vec<VarId>,
    pub h: Vec<VarId>,
    pub p: Vec<VarId>,
    pub b_br: Vec<VarId>,
    /// `b_oc[t][i]`.
    pub b_oc: Vec<Vec<VarId>>,
    pub q_in: Vec<LinExpr>,
    pub q_out: Vec<LinExpr>,
}

impl HydroVars {
    pub fn horizon(&self) -> usize {
        self.q_tr.len()
    }

    /// All binaries of the block, `b_br` first then `b_oc` row-major.
    pub fn binaries(&self) -> Vec<VarId> {
        let mut out = self.b_br.clone();
        out.extend(self.b_oc.iter().flatten().copied());
        out
    }
}

/// Variable naming scheme `symbol[n][ω][t]` (`[i]` appended for segments).
pub fn var_name(symbol: &str, n: usize, scenario: usize, t: usize) -> String {
    format!("{symbol}[{n}][{scenario}][{t}]")
}

/// Allocates the decision variables of one block with their physical boxes.
/// Inflow/outflow expressions are left empty until [`build_inflow_links`].
pub fn allocate_hydro_vars(
    spec: &mut ProblemSpec,
    plant: &PlantSpec,
    n: usize,
    scenario: usize,
    horizon: usize,
    big_m_barrage: f64,
    prefix: &str,
) -> HydroVars {
    let mut q_tr = Vec::with_capacity(horizon);
    let mut q_br = Vec::with_capacity(horizon);
    let mut z = Vec::with_capacity(horizon);
    let mut h = Vec::with_capacity(horizon);
    let mut p = Vec::with_capacity(horizon);
    let mut b_br = Vec::with_capacity(horizon);
    let mut b_oc = Vec::with_capacity(horizon);
    let name = |s: &str, t: usize| format!("{prefix}{}", var_name(s, n, scenario, t));
    for t in 0..horizon {
        q_tr.push(spec.add_var(name("q_tr", t), plant.turbine_min, plant.turbine_max, false));
        q_br.push(spec.add_var(name("q_br", t), 0.0, big_m_barrage, false));
        z.push(spec.add_var(name("z_fbl", t), f64::NEG_INFINITY, f64::INFINITY, false));
        h.push(spec.add_var(name("h", t), plant.head_min, plant.head_max, false));
        p.push(spec.add_var(name("p_h", t), 0.0, plant.capacity_mw, false));
        b_br.push(spec.add_binary(name("b_br", t)));
        b_oc.push(
            (0..plant.curve.len())
                .map(|i| spec.add_binary(format!("{}[{i}]", name("b_oc", t))))
                .collect(),
        );
    }
    HydroVars {
        plant: n,
        scenario,
        q_tr,
        q_br,
        z,
        h,
        p,
        b_br,
        b_oc,
        q_in: Vec::new(),
        q_out: Vec::new(),
    }
}

/// Discharge handles of the plant upstream of a block (the real variables in
/// the centralized model, local copies in a hydro subproblem).
#[derive(Debug, Clone, Copy)]
pub struct UpstreamFlows<'a> {
    pub turbine: &'a [VarId],
    pub barrage: &'a [VarId],
    pub link: &'a Link,
}

/// Inflow and outflow expressions of a block:
/// `q_in[t] = q_br[n-1][t-d_br] + q_tr[n-1][t-d_tr] + Q_ext[t]` (boundary
/// history before the horizon) and `q_out = q_br + q_tr`.
pub fn build_inflow_links(
    vars: &HydroVars,
    topo: &CascadeTopology,
    upstream: Option<UpstreamFlows<'_>>,
    q_ext: &[f64],
) -> Result<(Vec<LinExpr>, Vec<LinExpr>)> {
    let horizon = vars.horizon();
    if q_ext.len() < horizon {
        return invalid(format!(
            "external inflow series for plant {} has {} steps, need {horizon}",
            vars.plant,
            q_ext.len()
        ));
    }
    if let Some(q) = q_ext[..horizon].iter().find(|q| !(**q >= 0.0)) {
        return invalid(format!("negative external inflow {q} for plant {}", vars.plant));
    }
    let mut q_in = Vec::with_capacity(horizon);
    let mut q_out = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let mut e = LinExpr::constant(q_ext[t]);
        if let Some(up) = upstream {
            let d_tr = topo.delay_steps(up.link.travel_time_turbine);
            let d_br = topo.delay_steps(up.link.travel_time_barrage);
            // step t (0-based) is time t+1; time t+1-d ≤ 0 lies in the history
            match (t + 1).checked_sub(d_tr).filter(|&s| s >= 1) {
                Some(s) => e.add(up.turbine[s - 1], 1.0),
                None => e.constant += up.link.history.turbine_at(d_tr - (t + 1)),
            }
            match (t + 1).checked_sub(d_br).filter(|&s| s >= 1) {
                Some(s) => e.add(up.barrage[s - 1], 1.0),
                None => e.constant += up.link.history.barrage_at(d_br - (t + 1)),
            }
        }
        q_in.push(e);
        q_out.push(LinExpr::var(vars.q_br[t]).term(vars.q_tr[t], 1.0));
    }
    Ok((q_in, q_out))
}

fn row_name(family: &str, vars: &HydroVars, t: usize) -> String {
    var_name(family, vars.plant, vars.scenario, t)
}

/// Volume balance `z_t = z_{t-1} + (q_in - q_out)·Δ_T/S` with `z_0 = Z⁰` and
/// the cyclic end condition `z_{|T|} = Z⁰`.
pub fn build_forebay_dynamics(
    plant: &PlantSpec,
    vars: &HydroVars,
    topo: &CascadeTopology,
) -> Result<Vec<Constraint>> {
    let horizon = vars.horizon();
    if vars.q_in.len() != horizon || vars.q_out.len() != horizon {
        return invalid("inflow links must be built before the forebay dynamics");
    }
    let mut rows = Vec::with_capacity(horizon + 1);
    for t in 0..horizon {
        let k = topo.step_seconds / plant.surface_area.at(vars.scenario, t)?;
        let mut e = LinExpr::var(vars.z[t]);
        e.add_expr(&vars.q_in[t], -k);
        e.add_expr(&vars.q_out[t], k);
        let rhs = if t == 0 {
            plant.initial_level
        } else {
            e.add(vars.z[t - 1], -1.0);
            0.0
        };
        rows.push(Constraint::new(row_name("dyn", vars, t), e, RowSense::Eq, rhs));
    }
    rows.push(Constraint::new(
        row_name("cyclic", vars, horizon - 1),
        LinExpr::var(vars.z[horizon - 1]),
        RowSense::Eq,
        plant.initial_level,
    ));
    Ok(rows)
}

/// Segment selection and level band of the operational curve.
pub fn build_operational_curve(
    plant: &PlantSpec,
    vars: &HydroVars,
    eps_strict: f64,
) -> Result<Vec<Constraint>> {
    plant.curve.validate()?;
    let big_m = plant.big_m_curve();
    if big_m <= plant.curve.max_breakpoint() {
        return invalid(format!("plant {}: curve big-M too small", plant.id));
    }
    let segs = &plant.curve.segments;
    let mut rows = Vec::with_capacity(vars.horizon() * (2 * segs.len() + 3));
    for t in 0..vars.horizon() {
        let b = &vars.b_oc[t];
        for (i, s) in segs.iter().enumerate() {
            let lo = vars.q_in[t].clone().term(b[i], -s.inflow);
            rows.push(Constraint::new(
                format!("{}[{i}]", row_name("oc_lo", vars, t)),
                lo,
                RowSense::Ge,
                0.0,
            ));
            let upper = plant.curve.upper_breakpoint(i, big_m);
            let hi = vars.q_in[t].clone().term(b[i], -(upper - big_m));
            rows.push(Constraint::new(
                format!("{}[{i}]", row_name("oc_hi", vars, t)),
                hi,
                RowSense::Le,
                big_m - eps_strict,
            ));
        }
        let mut one = LinExpr::new();
        for &bi in b {
            one.add(bi, 1.0);
        }
        rows.push(Constraint::new(row_name("oc_one", vars, t), one, RowSense::Eq, 1.0));
        let mut zlo = LinExpr::var(vars.z[t]);
        let mut zhi = LinExpr::var(vars.z[t]);
        for (i, s) in segs.iter().enumerate() {
            zlo.add(b[i], -s.level_min);
            zhi.add(b[i], -s.level_max);
        }
        rows.push(Constraint::new(row_name("z_min", vars, t), zlo, RowSense::Ge, 0.0));
        rows.push(Constraint::new(row_name("z_max", vars, t), zhi, RowSense::Le, 0.0));
    }
    Ok(rows)
}

/// Ramp rows `|q_t − q_{t-1}| ≤ Δq` anchored at the initial discharge; the
/// discharge box itself lives on the variable bounds.
pub fn build_discharge_limits(plant: &PlantSpec, vars: &HydroVars) -> Vec<Constraint> {
    let q0 = plant.initial_discharge();
    let mut rows = Vec::with_capacity(2 * vars.horizon());
    for t in 0..vars.horizon() {
        let (up, down, rhs_up, rhs_down) = if t == 0 {
            (
                LinExpr::var(vars.q_tr[0]),
                LinExpr::var(vars.q_tr[0]).scaled(-1.0),
                plant.ramp + q0,
                plant.ramp - q0,
            )
        } else {
            (
                LinExpr::var(vars.q_tr[t]).term(vars.q_tr[t - 1], -1.0),
                LinExpr::var(vars.q_tr[t - 1]).term(vars.q_tr[t], -1.0),
                plant.ramp,
                plant.ramp,
            )
        };
        rows.push(Constraint::new(row_name("ramp_up", vars, t), up, RowSense::Le, rhs_up));
        rows.push(Constraint::new(row_name("ramp_dn", vars, t), down, RowSense::Le, rhs_down));
    }
    rows
}

/// Barrage opening window and the full-reservoir rule. With
/// `level_rule = false` the second family is omitted (used by the
/// flexibility-free restriction, where the level is pinched anyway).
pub fn build_barrage_safety(
    plant: &PlantSpec,
    vars: &HydroVars,
    big_m_barrage: f64,
    level_rule: bool,
) -> Result<Vec<Constraint>> {
    let z_max = plant.curve.max_level();
    if z_max == 0.0 || !z_max.is_finite() {
        return invalid(format!("plant {}: max curve level must be non-zero", plant.id));
    }
    let mut rows = Vec::with_capacity(3 * vars.horizon());
    for t in 0..vars.horizon() {
        rows.push(Constraint::new(
            row_name("br_min", vars, t),
            LinExpr::var(vars.q_br[t]).term(vars.b_br[t], -plant.barrage_min),
            RowSense::Ge,
            0.0,
        ));
        rows.push(Constraint::new(
            row_name("br_max", vars, t),
            LinExpr::var(vars.q_br[t]).term(vars.b_br[t], -big_m_barrage),
            RowSense::Le,
            0.0,
        ));
        if level_rule {
            // b ≤ 1 − (Σ Z̄_i b_i − z)/max Z̄
            let mut e = LinExpr::var(vars.b_br[t]).term(vars.z[t], -1.0 / z_max);
            for (i, s) in plant.curve.segments.iter().enumerate() {
                e.add(vars.b_oc[t][i], s.level_max / z_max);
            }
            rows.push(Constraint::new(row_name("br_full", vars, t), e, RowSense::Le, 1.0));
        }
    }
    Ok(rows)
}

/// Head definition and the four McCormick rows bounding `p = C·q·h`.
pub fn build_power_envelope(plant: &PlantSpec, vars: &HydroVars) -> Vec<Constraint> {
    let c = plant.power_coefficient();
    let (ql, qu, hl, hu) = (plant.turbine_min, plant.turbine_max, plant.head_min, plant.head_max);
    let mut rows = Vec::with_capacity(5 * vars.horizon());
    for t in 0..vars.horizon() {
        let (p, q, h) = (vars.p[t], vars.q_tr[t], vars.h[t]);
        rows.push(Constraint::new(
            row_name("head", vars, t),
            LinExpr::var(h).term(vars.z[t], -1.0),
            RowSense::Eq,
            -plant.tailrace_level,
        ));
        let mc = |name: &str, qa: f64, ha: f64, sense: RowSense| {
            // p (sense) C·(qa·h + ha·q − qa·ha)
            Constraint::new(
                row_name(name, vars, t),
                LinExpr::var(p).term(h, -c * qa).term(q, -c * ha),
                sense,
                -c * qa * ha,
            )
        };
        rows.push(mc("mc_ll", ql, hl, RowSense::Ge));
        rows.push(mc("mc_uu", qu, hu, RowSense::Ge));
        rows.push(mc("mc_lu", ql, hu, RowSense::Le));
        rows.push(mc("mc_ul", qu, hl, RowSense::Le));
    }
    rows
}

/// `w·g·η·q·h·10⁻⁶`, MW.
pub fn eval_bilinear_power(plant: &PlantSpec, q_tr: f64, head: f64) -> Result<f64> {
    if q_tr < 0.0 || head < 0.0 {
        return invalid(format!("negative discharge {q_tr} or head {head}"));
    }
    Ok(plant.power_coefficient() * q_tr * head)
}

/// Interval the McCormick rows allow for `p` at `(q, h)` (ignoring the
/// capacity box).
pub fn envelope_bounds(plant: &PlantSpec, q: f64, h: f64) -> (f64, f64) {
    let c = plant.power_coefficient();
    let (ql, qu, hl, hu) = (plant.turbine_min, plant.turbine_max, plant.head_min, plant.head_max);
    let lo = (c * (ql * h + hl * q - ql * hl)).max(c * (qu * h + hu * q - qu * hu));
    let hi = (c * (ql * h + hu * q - ql * hu)).min(c * (qu * h + hl * q - qu * hl));
    (lo, hi)
}

/// Envelope error measured on a `points × points` grid of the `(q, h)` box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    /// Largest distance from the bilinear surface to either envelope face, MW.
    pub max_error_mw: f64,
    /// Same, as a fraction of installed capacity.
    pub max_error_fraction: f64,
    /// Largest envelope width (upper minus lower face), MW.
    pub max_width_mw: f64,
}

pub fn envelope_error(plant: &PlantSpec, points: usize) -> EnvelopeReport {
    let points = points.max(2);
    let mut max_err: f64 = 0.0;
    let mut max_width: f64 = 0.0;
    for a in 0..points {
        let q = lerp(plant.turbine_min, plant.turbine_max, a, points);
        for b in 0..points {
            let h = lerp(plant.head_min, plant.head_max, b, points);
            let exact = plant.power_coefficient() * q * h;
            let (lo, hi) = envelope_bounds(plant, q, h);
            max_err = max_err.max(hi - exact).max(exact - lo);
            max_width = max_width.max(hi - lo);
        }
    }
    EnvelopeReport {
        max_error_mw: max_err,
        max_error_fraction: if plant.capacity_mw > 0.0 {
            max_err / plant.capacity_mw
        } else {
            f64::NAN
        },
        max_width_mw: max_width,
    }
}

fn lerp(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    lo + (hi - lo) * i as f64 / (n - 1) as f64
}

/// How a block is specialised.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BlockOptions {
    /// Flexibility-free restriction: curve pinched to its upper levels,
    /// barrage binaries fixed open and the full-reservoir rule dropped.
    pub restricted: bool,
}

/// Allocates one `(plant, scenario)` block and appends all of its rows.
#[allow(clippy::too_many_arguments)]
pub fn build_plant_block(
    spec: &mut ProblemSpec,
    cascade: &CascadeData,
    n: usize,
    scenario: usize,
    q_ext: &[f64],
    big_m_barrage: f64,
    upstream: Option<UpstreamFlows<'_>>,
    options: BlockOptions,
    prefix: &str,
) -> Result<HydroVars> {
    let base = &cascade.plants[n];
    let pinched;
    let plant = if options.restricted {
        pinched = PlantSpec {
            curve: base.curve.pinched(),
            ..base.clone()
        };
        &pinched
    } else {
        base
    };
    let topo = &cascade.topology;
    let mut vars = allocate_hydro_vars(spec, plant, n, scenario, topo.horizon, big_m_barrage, prefix);
    if options.restricted {
        for &b in &vars.b_br {
            spec.variables[b.0].lower = 1.0;
        }
    }
    let (q_in, q_out) = build_inflow_links(&vars, topo, upstream, q_ext)?;
    vars.q_in = q_in;
    vars.q_out = q_out;
    check_inflow_coverage(plant, &vars, upstream, cascade)?;

    let located = |e: Error| match e {
        Error::Invalid(m) => Error::Invalid(format!("plant {n}, scenario {scenario}: {m}")),
        other => other,
    };
    spec.extend_constraints(build_forebay_dynamics(plant, &vars, topo).map_err(located)?);
    spec.extend_constraints(build_operational_curve(plant, &vars, cascade.eps_strict).map_err(located)?);
    spec.extend_constraints(build_discharge_limits(plant, &vars));
    spec.extend_constraints(
        build_barrage_safety(plant, &vars, big_m_barrage, !options.restricted).map_err(located)?,
    );
    spec.extend_constraints(build_power_envelope(plant, &vars));
    Ok(vars)
}

/// Rejects blocks whose inflow can never fall inside the curve's range.
fn check_inflow_coverage(
    plant: &PlantSpec,
    vars: &HydroVars,
    upstream: Option<UpstreamFlows<'_>>,
    cascade: &CascadeData,
) -> Result<()> {
    let first = plant.curve.segments[0].inflow;
    let top = plant.big_m_curve() - cascade.eps_strict;
    // an upstream plant can always add flow, so only the upper side binds there
    let upstream_max = if upstream.is_some() { f64::INFINITY } else { 0.0 };
    for t in 0..vars.horizon() {
        let known = vars.q_in[t].constant;
        let free = !vars.q_in[t].terms.is_empty();
        let max_in = if free { known + upstream_max } else { known };
        if known > top {
            return Err(Error::Infeasible(format!(
                "plant {} scenario {} step {t}: inflow {known} above the curve range (big-M {})",
                plant.id, vars.scenario, top
            )));
        }
        if max_in < first {
            return Err(Error::Infeasible(format!(
                "plant {} scenario {} step {t}: inflow at most {max_in} below first breakpoint {first}",
                plant.id, vars.scenario
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve, ObjSense, SolveOptions, SolveStatus};

    pub(crate) fn test_plant() -> PlantSpec {
        PlantSpec {
            id: "p".into(),
            capacity_mw: 60.0,
            head_min: 0.0,
            head_max: 5.0,
            turbine_min: 0.0,
            turbine_max: 1000.0,
            ramp: 100.0,
            barrage_min: 40.0,
            efficiency: 0.95,
            tailrace_level: 5.0,
            initial_level: 10.0,
            surface_area: SurfaceArea::Constant(1e6),
            curve: OperationalCurve {
                segments: vec![
                    CurveSegment { inflow: 0.0, level_min: 10.0, level_max: 10.0 },
                    CurveSegment { inflow: 100.0, level_min: 9.0, level_max: 10.0 },
                    CurveSegment { inflow: 200.0, level_min: 10.0, level_max: 10.0 },
                ],
            },
            big_m_curve: Some(300.0),
            big_m_barrage: None,
            initial_discharge: Some(400.0),
        }
    }

    fn topo(horizon: usize) -> CascadeTopology {
        CascadeTopology {
            links: vec![],
            step_seconds: 3600.0,
            horizon,
        }
    }

    #[test]
    fn power_coefficient_matches_hand_value() {
        let p = test_plant();
        assert!((p.power_coefficient() - 0.0093195).abs() < 1e-15);
        assert!((eval_bilinear_power(&p, 1000.0, 5.0).unwrap() - 46.5975).abs() < 1e-9);
        assert_eq!(eval_bilinear_power(&p, 0.0, 3.0).unwrap(), 0.0);
        assert_eq!(eval_bilinear_power(&p, 300.0, 0.0).unwrap(), 0.0);
        assert!(eval_bilinear_power(&p, -1.0, 3.0).is_err());
    }

    #[test]
    fn envelope_pins_corners_and_brackets_center() {
        let p = test_plant();
        let (lo, hi) = envelope_bounds(&p, 1000.0, 5.0);
        assert!((lo - 46.5975).abs() < 1e-9 && (hi - 46.5975).abs() < 1e-9);
        let (lo, hi) = envelope_bounds(&p, 500.0, 2.5);
        assert!(lo.abs() < 1e-12);
        assert!((hi - 23.29875).abs() < 1e-9);
        let exact = eval_bilinear_power(&p, 500.0, 2.5).unwrap();
        assert!((exact - 11.649375).abs() < 1e-9);
        assert!(lo <= exact && exact <= hi);
        let (lo, hi) = envelope_bounds(&p, 0.0, 0.0);
        assert_eq!((lo, hi), (0.0, 0.0));
    }

    #[test]
    fn envelope_error_report_is_center_width_over_two() {
        let p = test_plant();
        let r = envelope_error(&p, 21);
        let width = p.power_coefficient() * 1000.0 * 5.0 / 2.0;
        assert!((r.max_width_mw - width).abs() < 1e-9);
        assert!((r.max_error_mw - width / 2.0).abs() < 1e-9);
    }

    #[test]
    fn forebay_step_arithmetic() {
        // S = 1e6, Δ = 3600, q_in = 500, q_out = 400 → Δz = 0.36 m
        let mut spec = ProblemSpec::new();
        let mut plant = test_plant();
        plant.curve = OperationalCurve {
            segments: vec![CurveSegment { inflow: 0.0, level_min: 0.0, level_max: 100.0 }],
        };
        plant.big_m_curve = Some(1e4);
        let vars_t = topo(2);
        let mut vars = allocate_hydro_vars(&mut spec, &plant, 0, 0, 2, 1e4, "");
        let (q_in, q_out) = build_inflow_links(&vars, &vars_t, None, &[500.0, 300.0]).unwrap();
        vars.q_in = q_in;
        vars.q_out = q_out;
        let rows = build_forebay_dynamics(&plant, &vars, &vars_t).unwrap();
        assert_eq!(rows.len(), 2 + 1);
        // Evaluate the first dynamics row at a point.
        let mut x = vec![0.0; spec.num_vars()];
        x[vars.q_tr[0].0] = 400.0;
        x[vars.z[0].0] = 10.36;
        // initial level 10 substituted as constant
        assert!(rows[0].violation(&x) < 1e-9, "violation {}", rows[0].violation(&x));
    }

    #[test]
    fn zero_net_flow_keeps_level() {
        let mut spec = ProblemSpec::new();
        let plant = test_plant();
        let cascade = CascadeData {
            name: "t".into(),
            plants: vec![PlantSpec { ramp: 1e4, initial_discharge: Some(150.0), ..plant.clone() }],
            topology: topo(4),
            wind_capacity_mw: 0.0,
            solar_capacity_mw: 0.0,
            eps_strict: DEFAULT_EPS_STRICT,
        };
        let vars = build_plant_block(
            &mut spec,
            &cascade,
            0,
            0,
            &[150.0; 4],
            2000.0,
            None,
            BlockOptions::default(),
            "",
        )
        .unwrap();
        // force q_out = q_in through q_tr = 150 and q_br = 0
        for t in 0..4 {
            spec.variables[vars.q_tr[t].0].lower = 150.0;
            spec.variables[vars.q_tr[t].0].upper = 150.0;
        }
        let r = solve(&spec, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        for t in 0..4 {
            assert!((r.primal[vars.z[t].0] - 10.0).abs() < 1e-9);
        }
    }

    #[test]
    fn inflow_links_use_history_and_delays() {
        let mut spec = ProblemSpec::new();
        let plant = test_plant();
        let up = allocate_hydro_vars(&mut spec, &plant, 0, 0, 4, 1e3, "");
        let down = allocate_hydro_vars(&mut spec, &plant, 1, 0, 4, 1e3, "");
        let link = Link {
            travel_time_turbine: 7200.0,
            travel_time_barrage: 0.0,
            history: BoundaryHistory {
                turbine: vec![250.0, 300.0],
                ..Default::default()
            },
        };
        let t4 = topo(4);
        let (q_in, q_out) = build_inflow_links(
            &down,
            &t4,
            Some(UpstreamFlows {
                turbine: &up.q_tr,
                barrage: &up.q_br,
                link: &link,
            }),
            &[100.0; 4],
        )
        .unwrap();
        // time 1 with d_tr = 2 reads the turbine history at time -1 (lag 1)
        let mut x = vec![0.0; spec.num_vars()];
        assert!((q_in[0].eval(&x) - 400.0).abs() < 1e-12);
        // time 3 reads the upstream turbine at time 1
        x[up.q_tr[0].0] = 321.0;
        assert!((q_in[2].eval(&x) - 421.0).abs() < 1e-12);
        // barrage has no delay
        x[up.q_br[3].0] = 7.0;
        assert!((q_in[3].eval(&x) - (100.0 + 7.0 + x[up.q_tr[1].0])).abs() < 1e-12);
        x[down.q_br[0].0] = 50.0;
        x[down.q_tr[0].0] = 450.0;
        assert!((q_out[0].eval(&x) - 500.0).abs() < 1e-12);

        // head plant sees only its external inflow
        let (head_in, _) = build_inflow_links(&up, &t4, None, &[800.0; 4]).unwrap();
        assert!(head_in.iter().all(|e| e.terms.is_empty() && e.constant == 800.0));
        assert!(build_inflow_links(&up, &t4, None, &[800.0, -1.0, 0.0, 0.0]).is_err());
    }

    /// Enumerates the one-hot segment choice for a fixed inflow.
    fn feasible_segments(q: f64) -> Vec<usize> {
        let plant = test_plant();
        let mut out = Vec::new();
        for choice in 0..plant.curve.len() {
            let mut spec = ProblemSpec::new();
            let mut vars = allocate_hydro_vars(&mut spec, &plant, 0, 0, 1, 1e3, "");
            let (q_in, q_out) = build_inflow_links(&vars, &topo(1), None, &[q]).unwrap();
            vars.q_in = q_in;
            vars.q_out = q_out;
            spec.extend_constraints(build_operational_curve(&plant, &vars, DEFAULT_EPS_STRICT).unwrap());
            for (i, &b) in vars.b_oc[0].iter().enumerate() {
                let v = if i == choice { 1.0 } else { 0.0 };
                spec.variables[b.0].lower = v;
                spec.variables[b.0].upper = v;
            }
            let r = solve(&spec, &SolveOptions::default()).unwrap();
            if r.status == SolveStatus::Optimal {
                out.push(choice);
            }
        }
        out
    }

    #[test]
    fn operational_curve_selects_unique_segment() {
        assert_eq!(feasible_segments(150.0), vec![1]);
        assert_eq!(feasible_segments(50.0), vec![0]);
        assert_eq!(feasible_segments(250.0), vec![2]);
        // a boundary inflow belongs to the upper segment
        assert_eq!(feasible_segments(100.0), vec![1]);
        assert_eq!(test_plant().curve.segment_for(100.0), 1);
        assert_eq!(test_plant().curve.segment_for(99.9), 0);
    }

    #[test]
    fn pinched_segment_forces_level() {
        let plant = test_plant();
        let mut spec = ProblemSpec::new();
        let mut vars = allocate_hydro_vars(&mut spec, &plant, 0, 0, 1, 1e3, "");
        let (q_in, q_out) = build_inflow_links(&vars, &topo(1), None, &[50.0]).unwrap();
        vars.q_in = q_in;
        vars.q_out = q_out;
        spec.extend_constraints(build_operational_curve(&plant, &vars, DEFAULT_EPS_STRICT).unwrap());
        for sense in [ObjSense::Minimize, ObjSense::Maximize] {
            let mut s = spec.clone();
            s.objective.sense = sense;
            s.objective.linear = vec![(vars.z[0], 1.0)];
            let r = solve(&s, &SolveOptions::default()).unwrap();
            assert!((r.primal[vars.z[0].0] - 10.0).abs() < 1e-9);
            let one: f64 = vars.b_oc[0].iter().map(|b| r.primal[b.0]).sum();
            assert!((one - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ramp_window_intersects_box() {
        let plant = PlantSpec { turbine_min: 350.0, turbine_max: 480.0, ..test_plant() };
        let mut spec = ProblemSpec::new();
        let vars = allocate_hydro_vars(&mut spec, &plant, 0, 0, 3, 1e3, "");
        let rows = build_discharge_limits(&plant, &vars);
        assert_eq!(rows.len(), 2 * 3);
        spec.extend_constraints(rows);
        spec.variables[vars.q_tr[0].0].lower = 400.0;
        spec.variables[vars.q_tr[0].0].upper = 400.0;
        for (sense, want) in [(ObjSense::Minimize, 350.0), (ObjSense::Maximize, 480.0)] {
            let mut s = spec.clone();
            s.objective.sense = sense;
            s.objective.linear = vec![(vars.q_tr[1], 1.0)];
            let r = solve(&s, &SolveOptions::default()).unwrap();
            assert!((r.primal[vars.q_tr[1].0] - want).abs() < 1e-9);
        }
        // degenerate box
        let flat = PlantSpec { turbine_min: 400.0, turbine_max: 400.0, ..test_plant() };
        let mut spec = ProblemSpec::new();
        let vars = allocate_hydro_vars(&mut spec, &flat, 0, 0, 3, 1e3, "");
        assert!(vars.q_tr.iter().all(|v| spec.var(*v).lower == 400.0 && spec.var(*v).upper == 400.0));
    }

    fn barrage_setup(z_fixed: f64) -> (ProblemSpec, HydroVars) {
        let plant = test_plant();
        let mut spec = ProblemSpec::new();
        let mut vars = allocate_hydro_vars(&mut spec, &plant, 0, 0, 1, 1e3, "");
        let (q_in, q_out) = build_inflow_links(&vars, &topo(1), None, &[150.0]).unwrap();
        vars.q_in = q_in;
        vars.q_out = q_out;
        spec.extend_constraints(build_operational_curve(&plant, &vars, DEFAULT_EPS_STRICT).unwrap());
        spec.extend_constraints(build_barrage_safety(&plant, &vars, 1e3, true).unwrap());
        spec.variables[vars.z[0].0].lower = z_fixed;
        spec.variables[vars.z[0].0].upper = z_fixed;
        spec.objective.sense = ObjSense::Maximize;
        spec.objective.linear = vec![(vars.q_br[0], 1.0)];
        (spec, vars)
    }

    #[test]
    fn barrage_opens_only_at_full_level() {
        let (spec, vars) = barrage_setup(10.0);
        let r = solve(&spec, &SolveOptions::default()).unwrap();
        assert!((r.primal[vars.b_br[0].0] - 1.0).abs() < 1e-9);
        assert!(r.primal[vars.q_br[0].0] > 999.0);

        let (spec, vars) = barrage_setup(9.5);
        let r = solve(&spec, &SolveOptions::default()).unwrap();
        assert!(r.primal[vars.b_br[0].0].abs() < 1e-9);
        assert!(r.primal[vars.q_br[0].0].abs() < 1e-9);

        // once open, at least the minimum barrage discharge flows
        let (mut spec, vars) = barrage_setup(10.0);
        spec.objective.sense = ObjSense::Minimize;
        spec.variables[vars.b_br[0].0].lower = 1.0;
        let r = solve(&spec, &SolveOptions::default()).unwrap();
        assert!((r.primal[vars.q_br[0].0] - 40.0).abs() < 1e-9);
    }

    #[test]
    fn barrage_rejects_zero_level_curve() {
        let mut plant = test_plant();
        for s in &mut plant.curve.segments {
            s.level_min = 0.0;
            s.level_max = 0.0;
        }
        let mut spec = ProblemSpec::new();
        let vars = allocate_hydro_vars(&mut spec, &plant, 0, 0, 1, 1e3, "");
        assert!(build_barrage_safety(&plant, &vars, 1e3, true).is_err());
    }

    #[test]
    fn validation_catches_bad_plants() {
        let mut p = test_plant();
        assert!(p.validate().is_ok());
        p.efficiency = 1.2;
        assert!(p.validate().is_err());
        let mut p = test_plant();
        p.curve.segments.swap(0, 1);
        assert!(p.validate().is_err());
        let mut p = test_plant();
        p.big_m_curve = Some(150.0);
        assert!(p.validate().is_err());
        let mut p = test_plant();
        p.big_m_curve = None;
        assert!((p.big_m_curve() - 300.0).abs() < 1e-12);
        p.surface_area = SurfaceArea::Constant(0.0);
        assert!(p.validate().is_err());
    }
}
