//! Solver-agnostic LP/MILP/QP container and the HiGHS backend behind it.
//!
//! Every model in the crate is assembled into a [`ProblemSpec`]: a flat list
//! of named variables, sparse linear rows and a (diagonal) quadratic
//! objective. Nothing outside this module talks to the backend directly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use highs::{HessianFormat, HighsModelStatus, HighsSolutionStatus, RowProblem, Sense};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default relative MIP gap. Tight so that bound bookkeeping upstream is not
/// polluted by subproblem slack.
pub const DEFAULT_MIP_GAP: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("unsupported problem class: {0}")]
    Unsupported(String),
    #[error("backend failure: {0}")]
    Backend(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl Constraint {
    /// Builds `expr (sense) rhs`, folding the expression constant into the
    /// right-hand side and dropping zero coefficients.
    pub fn new(name: impl Into<String>, expr: LinExpr, sense: RowSense, rhs: f64) -> Self {
        let expr = expr.compact();
        Self {
            name: name.into(),
            terms: expr.terms,
            sense,
            rhs: rhs - expr.constant,
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(v, c)| c * x[v.0]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            RowSense::Le => (a - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - a).max(0.0),
            RowSense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// Affine expression `Σ c·x + constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: VarId) -> Self {
        Self {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(mut self, v: VarId, c: f64) -> Self {
        self.terms.push((v, c));
        self
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add(&mut self, v: VarId, c: f64) {
        self.terms.push((v, c));
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) {
        self.terms
            .extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
    }

    pub fn scaled(&self, scale: f64) -> LinExpr {
        let mut out = LinExpr::new();
        out.add_expr(self, scale);
        out
    }

    /// Merges duplicate variables (keeping first-appearance order) and drops
    /// exact zeros.
    pub fn compact(self) -> Self {
        let mut order: Vec<VarId> = Vec::with_capacity(self.terms.len());
        let mut acc: HashMap<VarId, f64> = HashMap::with_capacity(self.terms.len());
        for (v, c) in self.terms {
            match acc.get_mut(&v) {
                Some(x) => *x += c,
                None => {
                    order.push(v);
                    acc.insert(v, c);
                }
            }
        }
        let terms = order
            .into_iter()
            .filter_map(|v| {
                let c = acc[&v];
                (c != 0.0).then_some((v, c))
            })
            .collect();
        Self {
            terms,
            constant: self.constant,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(v, c)| c * x[v.0]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjSense {
    Minimize,
    Maximize,
}

/// `Σ c·x + Σ q·x² + constant`; only separable quadratics are needed here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub sense: ObjSense,
    pub linear: Vec<(VarId, f64)>,
    pub quadratic: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl Default for Objective {
    fn default() -> Self {
        Self {
            sense: ObjSense::Minimize,
            linear: Vec::new(),
            quadratic: Vec::new(),
            constant: 0.0,
        }
    }
}

impl Objective {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant
            + self.linear.iter().map(|(v, c)| c * x[v.0]).sum::<f64>()
            + self
                .quadratic
                .iter()
                .map(|(v, q)| q * x[v.0] * x[v.0])
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Objective,
    #[serde(skip)]
    index: HashMap<String, VarId>,
}

impl ProblemSpec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable; names must be unique (they key the index map).
    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, integer: bool) -> VarId {
        let name = name.into();
        let id = VarId(self.variables.len());
        let prev = self.index.insert(name.clone(), id);
        assert!(prev.is_none(), "duplicate variable name {name}");
        self.variables.push(Variable {
            name,
            lower,
            upper,
            integer,
        });
        id
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, 0.0, 1.0, true)
    }

    pub fn add_constraint(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    pub fn extend_constraints(&mut self, rows: impl IntoIterator<Item = Constraint>) {
        self.constraints.extend(rows);
    }

    /// Adds `expr` to the linear part of the objective (constant included).
    pub fn add_objective(&mut self, expr: &LinExpr) {
        self.objective.linear.extend(expr.terms.iter().copied());
        self.objective.constant += expr.constant;
    }

    pub fn add_quadratic(&mut self, v: VarId, q: f64) {
        self.objective.quadratic.push((v, q));
    }

    /// Copies every variable, row and objective term of `other` into this
    /// model; returns the offset added to `other`'s variable ids.
    pub fn append(&mut self, other: &ProblemSpec) -> usize {
        assert_eq!(self.objective.sense, other.objective.sense, "appending models of opposite sense");
        let offset = self.variables.len();
        for v in &other.variables {
            self.add_var(v.name.clone(), v.lower, v.upper, v.integer);
        }
        let shift = |v: VarId| VarId(v.0 + offset);
        for c in &other.constraints {
            let mut c = c.clone();
            for t in &mut c.terms {
                t.0 = shift(t.0);
            }
            self.constraints.push(c);
        }
        let o = &other.objective;
        self.objective.linear.extend(o.linear.iter().map(|&(v, c)| (shift(v), c)));
        self.objective.quadratic.extend(o.quadratic.iter().map(|&(v, q)| (shift(v), q)));
        self.objective.constant += o.constant;
        offset
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_integer(&self) -> usize {
        self.variables.iter().filter(|v| v.integer).count()
    }

    pub fn is_mip(&self) -> bool {
        self.variables.iter().any(|v| v.integer)
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    /// Rebuilds the name index, e.g. after deserialisation.
    pub fn reindex(&mut self) {
        self.index = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), VarId(i)))
            .collect();
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.variables.len();
        if self.index.len() != n {
            return Err(SolverError::InvalidModel(format!(
                "index map covers {} of {} variables",
                self.index.len(),
                n
            )));
        }
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(SolverError::InvalidModel(format!(
                    "bad bounds [{}, {}] on {}",
                    v.lower, v.upper, v.name
                )));
            }
            if v.integer && !(v.lower.is_finite() && v.upper.is_finite()) {
                return Err(SolverError::InvalidModel(format!(
                    "integer variable {} needs finite bounds",
                    v.name
                )));
            }
        }
        let check = |id: VarId, what: &str| {
            if id.0 >= n {
                Err(SolverError::InvalidModel(format!(
                    "{what} references unknown variable {}",
                    id.0
                )))
            } else {
                Ok(())
            }
        };
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(SolverError::InvalidModel(format!("non-finite rhs in {}", c.name)));
            }
            for &(v, coef) in &c.terms {
                check(v, &c.name)?;
                if !coef.is_finite() {
                    return Err(SolverError::InvalidModel(format!(
                        "non-finite coefficient in {}",
                        c.name
                    )));
                }
            }
        }
        for &(v, _) in &self.objective.linear {
            check(v, "objective")?;
        }
        for &(v, q) in &self.objective.quadratic {
            check(v, "quadratic objective")?;
            let convex = match self.objective.sense {
                ObjSense::Minimize => q >= 0.0,
                ObjSense::Maximize => q <= 0.0,
            };
            if !convex {
                return Err(SolverError::InvalidModel("non-convex quadratic term".into()));
            }
        }
        Ok(())
    }

    /// Largest row, bound and integrality violation of a point.
    pub fn max_violation(&self, x: &[f64]) -> Violation {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(x))
            .fold(0.0, f64::max);
        let bounds = self
            .variables
            .iter()
            .zip(x)
            .map(|(v, &xi)| (v.lower - xi).max(xi - v.upper).max(0.0))
            .fold(0.0, f64::max);
        let integrality = self
            .variables
            .iter()
            .zip(x)
            .filter(|(v, _)| v.integer)
            .map(|(_, &xi)| (xi - xi.round()).abs())
            .fold(0.0, f64::max);
        Violation {
            rows,
            bounds,
            integrality,
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        let mut spec: ProblemSpec = serde_json::from_str(s)?;
        spec.reindex();
        Ok(spec)
    }

    /// CPLEX LP text format, for checking models with external tools.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::new();
        let name = |v: VarId| lp_name(&self.variables[v.0].name, v.0);
        let sense = match self.objective.sense {
            ObjSense::Minimize => "Minimize",
            ObjSense::Maximize => "Maximize",
        };
        let _ = writeln!(out, "\\ constant term: {}", fmt_num(self.objective.constant));
        let _ = writeln!(out, "{sense}");
        out.push_str(" obj:");
        if self.objective.linear.is_empty() && self.objective.quadratic.is_empty() {
            out.push_str(" 0");
        }
        for &(v, c) in &self.objective.linear {
            let _ = write!(out, " {} {}", signed(c), name(v));
        }
        if !self.objective.quadratic.is_empty() {
            out.push_str(" + [");
            for &(v, q) in &self.objective.quadratic {
                let _ = write!(out, " {} {} ^ 2", signed(2.0 * q), name(v));
            }
            out.push_str(" ] / 2");
        }
        out.push_str("\nSubject To\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = write!(out, " c{i}:");
            if c.terms.is_empty() {
                out.push_str(" 0 x_zero_");
            }
            for &(v, coef) in &c.terms {
                let _ = write!(out, " {} {}", signed(coef), name(v));
            }
            let op = match c.sense {
                RowSense::Le => "<=",
                RowSense::Ge => ">=",
                RowSense::Eq => "=",
            };
            let _ = writeln!(out, " {op} {}", fmt_num(c.rhs));
        }
        out.push_str("Bounds\n");
        for (i, v) in self.variables.iter().enumerate() {
            let n = lp_name(&v.name, i);
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (true, true) => {
                    let _ = writeln!(out, " {} <= {n} <= {}", fmt_num(v.lower), fmt_num(v.upper));
                }
                (true, false) => {
                    let _ = writeln!(out, " {n} >= {}", fmt_num(v.lower));
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= {n} <= {}", fmt_num(v.upper));
                }
                (false, false) => {
                    let _ = writeln!(out, " {n} free");
                }
            }
        }
        if self.constraints.iter().any(|c| c.terms.is_empty()) {
            out.push_str(" x_zero_ = 0\n");
        }
        let ints: Vec<String> = self
            .variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.integer)
            .map(|(i, v)| lp_name(&v.name, i))
            .collect();
        if !ints.is_empty() {
            out.push_str("General\n");
            for chunk in ints.chunks(8) {
                let _ = writeln!(out, " {}", chunk.join(" "));
            }
        }
        out.push_str("End\n");
        out
    }
}

fn lp_name(name: &str, idx: usize) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    format!("{cleaned}_{idx}")
}

fn fmt_num(x: f64) -> String {
    format!("{x:e}")
}

fn signed(x: f64) -> String {
    if x < 0.0 {
        format!("- {}", fmt_num(-x))
    } else {
        format!("+ {}", fmt_num(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub rows: f64,
    pub bounds: f64,
    pub integrality: f64,
}

impl Violation {
    pub fn max(&self) -> f64 {
        self.rows.max(self.bounds).max(self.integrality)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// A limit was hit but a feasible point exists.
    FeasibleLimit,
    Infeasible,
    Unbounded,
    /// Time limit hit without any feasible point.
    TimeLimit,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleLimit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub primal: Vec<f64>,
    pub objective: f64,
    /// Proven bound on the optimum (lower bound when minimising).
    pub best_bound: f64,
    pub wall_time: f64,
    /// Row duals of an optimal LP, empty otherwise.
    #[serde(default)]
    pub row_dual: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Seconds; `None` means unlimited.
    pub time_limit: Option<f64>,
    pub mip_rel_gap: f64,
    pub seed: u64,
    pub threads: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            time_limit: None,
            mip_rel_gap: DEFAULT_MIP_GAP,
            seed: 0,
            threads: 1,
        }
    }
}

impl SolveOptions {
    pub fn with_time_limit(mut self, secs: f64) -> Self {
        self.time_limit = Some(secs);
        self
    }
}

/// Clears every integrality flag; binaries keep their `[0, 1]` box.
pub fn relax_integrality(spec: &ProblemSpec) -> ProblemSpec {
    let mut out = spec.clone();
    for v in &mut out.variables {
        v.integer = false;
    }
    out
}

/// Fixes variables by collapsing their bounds; fixed variables become
/// continuous so a fully fixed MILP solves as an LP.
pub fn fix_variables(spec: &ProblemSpec, assignments: &[(VarId, f64)]) -> Result<ProblemSpec, SolverError> {
    let mut out = spec.clone();
    for &(id, value) in assignments {
        let v = out
            .variables
            .get_mut(id.0)
            .ok_or_else(|| SolverError::InvalidModel(format!("unknown variable {}", id.0)))?;
        let tol = 1e-9 * (1.0 + value.abs());
        if value < v.lower - tol || value > v.upper + tol {
            return Err(SolverError::InvalidModel(format!(
                "assignment {value} outside [{}, {}] for {}",
                v.lower, v.upper, v.name
            )));
        }
        let value = if v.integer {
            let r = value.round();
            if (value - r).abs() > 1e-6 {
                return Err(SolverError::InvalidModel(format!(
                    "non-integral assignment {value} for {}",
                    v.name
                )));
            }
            r
        } else {
            value.clamp(v.lower, v.upper)
        };
        v.lower = value;
        v.upper = value;
        v.integer = false;
    }
    Ok(out)
}

/// Solves `spec` with HiGHS.
///
/// Convex separable QPs are passed as a Hessian; a quadratic objective on a
/// MILP is rejected since the backend has no MIQP support.
pub fn solve(spec: &ProblemSpec, options: &SolveOptions) -> Result<SolveResult, SolverError> {
    spec.validate()?;
    let is_mip = spec.is_mip();
    if is_mip && !spec.objective.quadratic.is_empty() {
        return Err(SolverError::Unsupported(
            "quadratic objective with integer variables".into(),
        ));
    }
    let start = Instant::now();
    let first = run_highs(spec, options, true)?;
    let (status, solved) = match first.0 {
        HighsModelStatus::UnboundedOrInfeasible => run_highs(spec, options, false)?,
        _ => first,
    };
    let wall_time = start.elapsed().as_secs_f64();

    let has_point = solved.primal_solution_status() == HighsSolutionStatus::Feasible;
    let mapped = match status {
        HighsModelStatus::Optimal => SolveStatus::Optimal,
        HighsModelStatus::ModelEmpty => SolveStatus::Optimal,
        HighsModelStatus::Infeasible => SolveStatus::Infeasible,
        HighsModelStatus::Unbounded => SolveStatus::Unbounded,
        HighsModelStatus::UnboundedOrInfeasible => SolveStatus::Infeasible,
        HighsModelStatus::ReachedTimeLimit
        | HighsModelStatus::ReachedIterationLimit
        | HighsModelStatus::ReachedSolutionLimit
        | HighsModelStatus::ReachedInterrupt
        | HighsModelStatus::ReachedMemoryLimit
        | HighsModelStatus::ObjectiveBound
        | HighsModelStatus::ObjectiveTarget => {
            if has_point {
                SolveStatus::FeasibleLimit
            } else {
                SolveStatus::TimeLimit
            }
        }
        other => {
            return Err(SolverError::Backend(format!(
                "HiGHS returned status {other:?} ({} vars, {} rows)",
                spec.num_vars(),
                spec.num_rows()
            )))
        }
    };

    let sign = match spec.objective.sense {
        ObjSense::Minimize => 1.0,
        ObjSense::Maximize => -1.0,
    };
    let (primal, objective) = if mapped.has_solution() {
        let primal = if spec.num_vars() == 0 {
            Vec::new()
        } else {
            solved.get_solution().columns().to_vec()
        };
        let obj = spec.objective.eval(&primal);
        (primal, obj)
    } else {
        let obj = match mapped {
            SolveStatus::Infeasible => sign * f64::INFINITY,
            SolveStatus::Unbounded => -sign * f64::INFINITY,
            _ => f64::NAN,
        };
        (Vec::new(), obj)
    };
    let best_bound = match mapped {
        SolveStatus::Optimal if !is_mip => objective,
        SolveStatus::Optimal | SolveStatus::FeasibleLimit | SolveStatus::TimeLimit if is_mip => {
            match solved.double_info_value(c"mip_dual_bound") {
                Ok(b) if b.is_finite() => {
                    // The backend bound excludes our constant offset.
                    let b = b + spec.objective.constant;
                    if mapped == SolveStatus::Optimal {
                        // Clamp so that bound ≤ objective for minimisation.
                        if sign > 0.0 {
                            b.min(objective)
                        } else {
                            b.max(objective)
                        }
                    } else {
                        b
                    }
                }
                _ => -sign * f64::INFINITY,
            }
        }
        SolveStatus::Infeasible => objective,
        _ => -sign * f64::INFINITY,
    };
    let row_dual = if mapped == SolveStatus::Optimal && !is_mip && spec.num_vars() > 0 {
        solved.get_solution().dual_rows().to_vec()
    } else {
        Vec::new()
    };
    Ok(SolveResult {
        status: mapped,
        primal,
        objective,
        best_bound,
        wall_time,
        row_dual,
    })
}

fn run_highs(
    spec: &ProblemSpec,
    options: &SolveOptions,
    presolve: bool,
) -> Result<(HighsModelStatus, highs::SolvedModel), SolverError> {
    let mut pb = RowProblem::default();
    let mut lin = vec![0.0; spec.num_vars()];
    for &(v, c) in &spec.objective.linear {
        lin[v.0] += c;
    }
    let cols: Vec<highs::Col> = spec
        .variables
        .iter()
        .zip(&lin)
        .map(|(v, &c)| pb.add_column_with_integrality(c, v.lower..=v.upper, v.integer))
        .collect();
    for c in &spec.constraints {
        let factors = c.terms.iter().map(|&(v, coef)| (cols[v.0], coef));
        match c.sense {
            RowSense::Le => pb.add_row(..=c.rhs, factors),
            RowSense::Ge => pb.add_row(c.rhs.., factors),
            RowSense::Eq => pb.add_row(c.rhs..=c.rhs, factors),
        }
    }
    let sense = match spec.objective.sense {
        ObjSense::Minimize => Sense::Minimise,
        ObjSense::Maximize => Sense::Maximise,
    };
    let mut model = pb
        .try_optimise(sense)
        .map_err(|e| SolverError::Backend(format!("model load failed: {e:?}")))?;
    model.make_quiet();
    model.set_option("output_flag", false);
    model.set_option("threads", options.threads.max(1) as i32);
    model.set_option("random_seed", (options.seed % i32::MAX as u64) as i32);
    model.set_option("mip_rel_gap", options.mip_rel_gap);
    // tighter than the default so the strict-inequality margin on curve segments survives
    model.set_option("mip_feasibility_tolerance", 1e-7);
    model.set_option("primal_feasibility_tolerance", 1e-8);
    if !presolve {
        model.set_option("presolve", "off");
    }
    if let Some(t) = options.time_limit {
        model.set_option("time_limit", t.max(0.0));
    }
    if !spec.objective.quadratic.is_empty() {
        let mut diag = vec![0.0; spec.num_vars()];
        for &(v, q) in &spec.objective.quadratic {
            diag[v.0] += 2.0 * q;
        }
        let columns: Vec<Vec<(i32, f64)>> = diag
            .iter()
            .enumerate()
            .map(|(i, &d)| if d != 0.0 { vec![(i as i32, d)] } else { Vec::new() })
            .collect();
        model
            .try_pass_hessian(HessianFormat::Triangular, columns)
            .map_err(|e| SolverError::Backend(format!("hessian upload failed: {e}")))?;
    }
    let solved = model
        .try_solve()
        .map_err(|e| SolverError::Backend(format!("solve failed: {e:?}")))?;
    Ok((solved.status(), solved))
}
