//! Solver-agnostic LP/MILP representation and the backend contract.
//!
//! Every model builder in the crate produces a [`LinearModel`]; a [`Solver`]
//! wraps a registered [`Backend`] and solves it. All models are minimisation
//! problems.
//!
//! Dual sign convention: for a minimisation problem, the dual `y_r` of row `r`
//! satisfies `c_j - sum_r y_r a_rj = d_j` (reduced cost) and is `<= 0` on `<=`
//! rows and `>= 0` on `>=` rows. At an optimum with all variables at finite
//! bounds, `c'x = sum_r y_r b_r + sum_j d_j x_j`.

mod highs_backend;
mod lp_format;
mod simplex;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use highs_backend::HighsBackend;
pub use lp_format::{export_lp, write_lp};
pub use simplex::EmbeddedBackend;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RowId(pub usize);

/// Semantic key of a variable, e.g. `("e", [i, j, k])`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarKey {
    pub family: &'static str,
    pub index: Vec<usize>,
}

impl VarKey {
    pub fn new(family: &'static str, index: &[usize]) -> Self {
        VarKey {
            family,
            index: index.to_vec(),
        }
    }
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.family)?;
        for i in &self.index {
            write!(f, "_{i}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Integrality {
    Continuous,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integrality: Integrality,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// A minimisation LP/MILP with named variables and rows.
#[derive(Clone, Debug, Default)]
pub struct LinearModel {
    pub name: String,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<f64>,
    index: HashMap<VarKey, VarId>,
    keys: Vec<Option<VarKey>>,
}

impl LinearModel {
    pub fn new(name: impl Into<String>) -> Self {
        LinearModel {
            name: name.into(),
            ..Default::default()
        }
    }

    /// Adds a keyed variable; its name is derived from the key.
    pub fn add_var(&mut self, key: VarKey, lower: f64, upper: f64, integrality: Integrality, cost: f64) -> VarId {
        let id = self.push_var(key.to_string(), lower, upper, integrality, cost);
        self.index.insert(key.clone(), id);
        self.keys[id.0] = Some(key);
        id
    }

    pub fn add_binary(&mut self, key: VarKey, cost: f64) -> VarId {
        self.add_var(key, 0.0, 1.0, Integrality::Binary, cost)
    }

    pub fn add_nonneg(&mut self, key: VarKey, cost: f64) -> VarId {
        self.add_var(key, 0.0, f64::INFINITY, Integrality::Continuous, cost)
    }

    /// Adds an unkeyed variable with an explicit name.
    pub fn add_named_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        integrality: Integrality,
        cost: f64,
    ) -> VarId {
        self.push_var(name.into(), lower, upper, integrality, cost)
    }

    fn push_var(&mut self, name: String, lower: f64, upper: f64, integrality: Integrality, cost: f64) -> VarId {
        let id = VarId(self.variables.len());
        self.variables.push(Variable {
            name,
            lower,
            upper,
            integrality,
        });
        self.objective.push(cost);
        self.keys.push(None);
        id
    }

    pub fn add_row(&mut self, name: impl Into<String>, terms: Vec<(VarId, f64)>, sense: RowSense, rhs: f64) -> RowId {
        let id = RowId(self.constraints.len());
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
        id
    }

    pub fn set_rhs(&mut self, row: RowId, rhs: f64) {
        self.constraints[row.0].rhs = rhs;
    }

    pub fn set_cost(&mut self, var: VarId, cost: f64) {
        self.objective[var.0] = cost;
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.variables[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn var(&self, key: &VarKey) -> Option<VarId> {
        self.index.get(key).copied()
    }

    pub fn key_of(&self, var: VarId) -> Option<&VarKey> {
        self.keys[var.0].as_ref()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_integer(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.integrality == Integrality::Binary)
            .count()
    }

    pub fn is_mip(&self) -> bool {
        self.num_integer() > 0
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }

    pub fn row_activity(&self, row: &Constraint, values: &[f64]) -> f64 {
        row.terms.iter().map(|(v, a)| a * values[v.0]).sum()
    }

    /// Checks the model invariants: rows reference declared variables,
    /// binaries are bounded by [0, 1], names are unique and numbers finite.
    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::with_capacity(self.variables.len());
        for v in &self.variables {
            if !names.insert(v.name.as_str()) {
                return Err(Error::MalformedModel(format!("duplicate variable {}", v.name)));
            }
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(Error::MalformedModel(format!("bad bounds on {}", v.name)));
            }
            if v.integrality == Integrality::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(Error::MalformedModel(format!(
                    "binary {} has bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::MalformedModel("non-finite objective coefficient".into()));
        }
        let mut rows = HashSet::with_capacity(self.constraints.len());
        for r in &self.constraints {
            if !rows.insert(r.name.as_str()) {
                return Err(Error::MalformedModel(format!("duplicate row {}", r.name)));
            }
            if !r.rhs.is_finite() {
                return Err(Error::MalformedModel(format!("row {} has rhs {}", r.name, r.rhs)));
            }
            for (v, a) in &r.terms {
                if v.0 >= self.variables.len() {
                    return Err(Error::MalformedModel(format!(
                        "row {} references undeclared variable {}",
                        r.name, v.0
                    )));
                }
                if !a.is_finite() {
                    return Err(Error::MalformedModel(format!("row {} has coefficient {a}", r.name)));
                }
            }
        }
        Ok(())
    }
}

/// Same model with every integrality dropped; bounds preserved.
pub fn relax(model: &LinearModel) -> LinearModel {
    let mut out = model.clone();
    for v in &mut out.variables {
        v.integrality = Integrality::Continuous;
    }
    out.name = format!("{}_relaxed", model.name);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Limits {
    pub time_limit: Option<Duration>,
    pub rel_gap: f64,
    pub feasibility_tol: f64,
    /// Let the backend simplify the model before solving.
    pub presolve: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            time_limit: None,
            rel_gap: 1e-6,
            feasibility_tol: 1e-7,
            presolve: true,
        }
    }
}

impl Limits {
    pub fn with_time_limit(mut self, secs: f64) -> Self {
        self.time_limit = Some(Duration::from_secs_f64(secs));
        self
    }

    pub fn with_gap(mut self, gap: f64) -> Self {
        self.rel_gap = gap;
        self
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Primal values; empty when no feasible point is known.
    pub values: Vec<f64>,
    pub objective: f64,
    /// Best proven lower bound (equals `objective` for an optimal LP).
    pub best_bound: f64,
    /// Row duals, present iff the model has no integer variables and solved.
    pub duals: Option<Vec<f64>>,
    pub reduced_costs: Option<Vec<f64>>,
    pub wall_time: Duration,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn has_solution(&self) -> bool {
        !self.values.is_empty()
    }

    /// Dual objective `sum_r y_r b_r + sum_j d_j x_j`.
    pub fn dual_objective(&self, model: &LinearModel) -> Option<f64> {
        let duals = self.duals.as_ref()?;
        let mut total: f64 = model.constraints().iter().zip(duals).map(|(r, y)| y * r.rhs).sum();
        if let Some(d) = &self.reduced_costs {
            total += d.iter().zip(&self.values).map(|(d, x)| d * x).sum::<f64>();
        }
        Some(total)
    }
}

/// What a backend can do.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Capabilities {
    pub duals: bool,
    pub integers: bool,
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;
    fn capabilities(&self) -> Capabilities;
    /// Solves a model that already passed [`LinearModel::validate`].
    fn solve_validated(&self, model: &LinearModel, limits: &Limits) -> Result<SolveResult>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Highs,
    Embedded,
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "highs" => Ok(BackendKind::Highs),
            "embedded" | "simplex" => Ok(BackendKind::Embedded),
            other => Err(Error::Input(format!("unknown solver backend `{other}`"))),
        }
    }
}

/// A registered backend plus default limits.
pub struct Solver {
    backend: Box<dyn Backend>,
    pub limits: Limits,
}

impl fmt::Debug for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Solver")
            .field("backend", &self.backend.name())
            .field("limits", &self.limits)
            .finish()
    }
}

impl Solver {
    /// Registers a backend. Backends without dual support are rejected since
    /// cut generation relies on LP duals.
    pub fn register(backend: Box<dyn Backend>) -> Result<Self> {
        if !backend.capabilities().duals {
            return Err(Error::NoDuals(backend.name().to_string()));
        }
        Ok(Solver {
            backend,
            limits: Limits::default(),
        })
    }

    pub fn from_kind(kind: BackendKind) -> Self {
        let backend: Box<dyn Backend> = match kind {
            BackendKind::Highs => Box::new(HighsBackend::default()),
            BackendKind::Embedded => Box::new(EmbeddedBackend::default()),
        };
        Solver::register(backend).expect("built-in backends provide duals")
    }

    pub fn highs() -> Self {
        Self::from_kind(BackendKind::Highs)
    }

    pub fn embedded() -> Self {
        Self::from_kind(BackendKind::Embedded)
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    pub fn solve(&self, model: &LinearModel) -> Result<SolveResult> {
        self.solve_with(model, &self.limits)
    }

    pub fn solve_with(&self, model: &LinearModel, limits: &Limits) -> Result<SolveResult> {
        model.validate()?;
        if model.is_mip() && !self.backend.capabilities().integers {
            return Err(Error::Backend(format!(
                "{} cannot solve integer models",
                self.backend.name()
            )));
        }
        self.backend.solve_validated(model, limits)
    }

    /// Solves and fails unless the status is optimal.
    pub fn solve_optimal(&self, model: &LinearModel) -> Result<SolveResult> {
        let res = self.solve(model)?;
        if res.status != SolveStatus::Optimal {
            return Err(Error::Status {
                model: model.name.clone(),
                status: res.status,
            });
        }
        Ok(res)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn solvers() -> Vec<Solver> {
        vec![Solver::highs(), Solver::embedded()]
    }

    fn one_var_lp() -> LinearModel {
        let mut m = LinearModel::new("one");
        let x = m.add_nonneg(VarKey::new("x", &[]), 1.0);
        m.add_row("x_ge_3", vec![(x, 1.0)], RowSense::Ge, 3.0);
        m
    }

    #[test]
    fn one_variable_lp_and_its_dual() {
        for s in solvers() {
            let res = s.solve_optimal(&one_var_lp()).unwrap();
            assert_relative_eq!(res.values[0], 3.0, epsilon = 1e-9);
            assert_relative_eq!(res.duals.as_ref().unwrap()[0], 1.0, epsilon = 1e-9);
            assert_relative_eq!(res.dual_objective(&one_var_lp()).unwrap(), 3.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn binary_versus_continuous_bound() {
        for s in solvers() {
            let mut m = LinearModel::new("bin");
            let x = m.add_binary(VarKey::new("x", &[]), -1.0);
            m.add_row("cap", vec![(x, 1.0)], RowSense::Le, 5.0);
            let res = s.solve_optimal(&m).unwrap();
            assert_relative_eq!(res.values[0], 1.0, epsilon = 1e-9);
            assert!(res.duals.is_none());

            let mut c = LinearModel::new("cont");
            let x = c.add_var(VarKey::new("x", &[]), 0.0, 5.0, Integrality::Continuous, -1.0);
            c.add_row("cap", vec![(x, 1.0)], RowSense::Le, 5.0);
            let res = s.solve_optimal(&c).unwrap();
            assert_relative_eq!(res.values[0], 5.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn infeasible_and_unbounded_are_reported() {
        for s in solvers() {
            let mut m = LinearModel::new("inf");
            let x = m.add_nonneg(VarKey::new("x", &[]), 1.0);
            m.add_row("a", vec![(x, 1.0)], RowSense::Le, -1.0);
            assert_eq!(s.solve(&m).unwrap().status, SolveStatus::Infeasible);

            let mut u = LinearModel::new("unb");
            let x = u.add_nonneg(VarKey::new("x", &[]), -1.0);
            u.add_row("a", vec![(x, 1.0)], RowSense::Ge, 1.0);
            assert_eq!(s.solve(&u).unwrap().status, SolveStatus::Unbounded);
        }
    }

    #[test]
    fn malformed_models_fail_before_solving() {
        let mut m = LinearModel::new("bad");
        let x = m.add_nonneg(VarKey::new("x", &[]), 1.0);
        m.add_row("r", vec![(x, 1.0), (VarId(7), 1.0)], RowSense::Le, 1.0);
        assert!(matches!(Solver::highs().solve(&m), Err(Error::MalformedModel(_))));

        let mut d = LinearModel::new("dup");
        d.add_nonneg(VarKey::new("x", &[1]), 1.0);
        d.add_named_var("x_1", 0.0, 1.0, Integrality::Continuous, 0.0);
        assert!(d.validate().is_err());

        let mut b = LinearModel::new("binbounds");
        b.add_var(VarKey::new("x", &[]), 0.0, 2.0, Integrality::Binary, 0.0);
        assert!(b.validate().is_err());
    }

    #[test]
    fn relax_keeps_structure() {
        let lp = one_var_lp();
        let r = relax(&lp);
        assert_eq!(r.variables(), lp.variables());
        assert_eq!(r.constraints(), lp.constraints());

        let mut m = LinearModel::new("b");
        m.add_binary(VarKey::new("x", &[]), 1.0);
        let r = relax(&m);
        assert_eq!(r.variables()[0].integrality, Integrality::Continuous);
        assert_eq!((r.variables()[0].lower, r.variables()[0].upper), (0.0, 1.0));
    }

    struct NoDualBackend;
    impl Backend for NoDualBackend {
        fn name(&self) -> &'static str {
            "nodual"
        }
        fn capabilities(&self) -> Capabilities {
            Capabilities {
                duals: false,
                integers: true,
            }
        }
        fn solve_validated(&self, _: &LinearModel, _: &Limits) -> Result<SolveResult> {
            unreachable!()
        }
    }

    #[test]
    fn backends_without_duals_are_rejected() {
        assert!(matches!(
            Solver::register(Box::new(NoDualBackend)),
            Err(Error::NoDuals(_))
        ));
        assert_eq!("HiGHS".parse::<BackendKind>().unwrap(), BackendKind::Highs);
        assert!("cplex".parse::<BackendKind>().is_err());
    }

    /// Small LP with mixed row senses; checks complementary slackness and dual
    /// feasibility on both backends.
    #[test]
    fn duals_satisfy_optimality_conditions() {
        let mut m = LinearModel::new("mix");
        let x = m.add_nonneg(VarKey::new("x", &[]), 2.0);
        let y = m.add_nonneg(VarKey::new("y", &[]), 3.0);
        let z = m.add_var(VarKey::new("z", &[]), 0.0, 4.0, Integrality::Continuous, -0.5);
        m.add_row("a", vec![(x, 1.0), (y, 1.0)], RowSense::Ge, 4.0);
        m.add_row("b", vec![(x, 1.0), (z, 1.0)], RowSense::Le, 3.0);
        m.add_row("c", vec![(y, 1.0), (z, -1.0)], RowSense::Eq, 1.0);
        for s in solvers() {
            let res = s.solve_optimal(&m).unwrap();
            let duals = res.duals.as_ref().unwrap();
            for (row, y) in m.constraints().iter().zip(duals) {
                let slack = m.row_activity(row, &res.values) - row.rhs;
                assert!((slack * y).abs() < 1e-7, "{}: slack {slack} dual {y}", row.name);
                match row.sense {
                    RowSense::Le => assert!(*y <= 1e-9),
                    RowSense::Ge => assert!(*y >= -1e-9),
                    RowSense::Eq => {}
                }
            }
            assert_relative_eq!(res.dual_objective(&m).unwrap(), res.objective, epsilon = 1e-7);
        }
    }
}
