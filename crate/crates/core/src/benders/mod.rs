//! Benders decompositions of the single-loop compact model and of the
//! extended model.
//!
//! The master chooses the design (membership binaries) and carries one
//! epigraph variable per period. Each period's flows form an LP whose
//! right-hand sides are affine in the design; its duals give optimality cuts.

mod ml;
mod sl;

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use log::{debug, info};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Instance;
use crate::solution::{DesignSolution, Flow, ModelKind, NOISE_TOL};
use crate::solver::{
    BackendKind, Integrality, Limits, LinearModel, RowId, RowSense, SolveStatus, Solver, VarId, VarKey,
};

pub use ml::MlDecomposition;
pub use sl::SlDecomposition;

/// Relative tolerance of the strong-duality and tightness self-checks.
pub const DUALITY_TOL: f64 = 1e-6;

/// `constant + sum coef * design[idx]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Affine {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn eval(&self, design: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, a)| a * design[i]).sum::<f64>()
    }

    /// Merges repeated indices and drops zero coefficients; sorted by index.
    pub fn compact(mut self) -> Self {
        self.terms.sort_by_key(|t| t.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (i, a) in self.terms {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += a,
                _ => out.push((i, a)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        self.terms = out;
        self
    }

    fn add_scaled(&mut self, other: &Affine, s: f64) {
        self.constant += s * other.constant;
        self.terms.extend(other.terms.iter().map(|&(i, a)| (i, s * a)));
    }

    /// Largest coefficient difference, scaled by the larger magnitude.
    fn distance(&self, other: &Affine) -> f64 {
        let mut diff = other.clone();
        diff.add_scaled(self, -1.0);
        let diff = diff.compact();
        let scale = self
            .terms
            .iter()
            .chain(&other.terms)
            .map(|t| t.1.abs())
            .fold(self.constant.abs().max(other.constant.abs()), f64::max)
            .max(1.0);
        diff.terms.iter().map(|t| t.1.abs()).fold(diff.constant.abs(), f64::max) / scale
    }
}

/// Role of a subproblem row, used to rebuild cuts from their closed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowTag {
    /// `e_ij <= P_i x_i`
    ExchangeProducer {
        from: usize,
        to: usize,
    },
    /// `e_ij <= C_j x_j`
    ExchangeConsumer {
        from: usize,
        to: usize,
    },
    Balance {
        actor: usize,
    },
    Circulation {
        actor: usize,
    },
    /// `y_i <= Q x_i`
    SalesMember {
        actor: usize,
    },
    /// `y_i <= r_i`
    SalesCap {
        actor: usize,
    },
    /// `y_i >= r_i - Q (1 - x_i)`
    SalesLink {
        actor: usize,
    },
    /// `sum y <= sum x (P - C) + M (1 - z)`
    LoopSurplus,
    /// `y_i <= M z`
    SalesIndicator {
        actor: usize,
    },
    /// `e_ij <= D_ij sum_h v_h`
    Gate {
        from: usize,
        to: usize,
    },
    /// `r_i <= Q (1 - sum_h v_h)` over deficit candidates containing `i`
    ExportBlock {
        actor: usize,
    },
    /// Member sales of candidate `h` within its surplus.
    CandidateSurplus {
        candidate: usize,
    },
}

/// The flow LP of one period with design-dependent right-hand sides.
#[derive(Clone, Debug)]
pub struct Subproblem {
    pub period: usize,
    model: LinearModel,
    rhs: Vec<Affine>,
    tags: Vec<RowTag>,
    /// Upper bound on each variable valid at every design.
    upper: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SubproblemResult {
    pub period: usize,
    /// Optimal period cost, without the scenario probability.
    pub value: f64,
    pub duals: Vec<f64>,
    pub values: Vec<f64>,
}

/// `eta >= cut(design)` for one period, or for the probability-weighted
/// sum of all periods when `period` is `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BendersCut {
    pub period: Option<usize>,
    pub cut: Affine,
    /// Dual vertex of the generating subproblem, in row order.
    pub duals: Vec<f64>,
}

impl BendersCut {
    pub fn evaluate(&self, design: &[f64]) -> f64 {
        self.cut.eval(design)
    }
}

impl Subproblem {
    fn new(period: usize, name: String) -> Self {
        Subproblem {
            period,
            model: LinearModel::new(name),
            rhs: Vec::new(),
            tags: Vec::new(),
            upper: Vec::new(),
        }
    }

    fn var(&mut self, key: VarKey, cost: f64, upper: f64) -> VarId {
        self.upper.push(upper);
        self.model.add_nonneg(key, cost)
    }

    fn row(&mut self, name: String, terms: Vec<(VarId, f64)>, sense: RowSense, rhs: Affine, tag: RowTag) {
        self.model.add_row(name, terms, sense, rhs.constant);
        self.rhs.push(rhs.compact());
        self.tags.push(tag);
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    pub fn tags(&self) -> &[RowTag] {
        &self.tags
    }

    pub fn rhs(&self) -> &[Affine] {
        &self.rhs
    }

    /// The LP at a fixed design.
    pub fn at(&self, design: &[f64]) -> LinearModel {
        let mut m = self.model.clone();
        for (r, a) in self.rhs.iter().enumerate() {
            m.set_rhs(RowId(r), a.eval(design));
        }
        m
    }

    /// Solves at `design` and checks strong duality.
    pub fn solve(&self, instance: &Instance, design: &[f64], solver: &Solver) -> Result<SubproblemResult> {
        let m = self.at(design);
        let res = solver.solve(&m)?;
        match res.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => {
                let (scenario, step) = instance.split_period(self.period);
                return Err(Error::InfeasibleSubproblem { scenario, step });
            }
            status => {
                return Err(Error::Status {
                    model: m.name.clone(),
                    status,
                })
            }
        }
        let duals = res
            .duals
            .ok_or_else(|| Error::NoDuals(solver.backend_name().to_string()))?;
        let dual_value: f64 = m.constraints().iter().zip(&duals).map(|(r, y)| y * r.rhs).sum();
        if (dual_value - res.objective).abs() > DUALITY_TOL * res.objective.abs().max(1.0) {
            return Err(Error::Internal(format!(
                "{}: primal {} and dual {} differ",
                m.name, res.objective, dual_value
            )));
        }
        Ok(SubproblemResult {
            period: self.period,
            value: res.objective,
            duals,
            values: res.values,
        })
    }

    /// Cut from the dual vertex of a solve, derived row by row from the
    /// affine right-hand sides. Duals with the wrong sign are zeroed and
    /// negative reduced costs are charged at the variable upper bounds, so
    /// the cut stays valid under solver round-off.
    pub fn mechanical_cut(&self, duals: &[f64]) -> Affine {
        let rows = self.model.constraints();
        let y: Vec<f64> = rows
            .iter()
            .zip(duals)
            .map(|(r, &y)| match r.sense {
                RowSense::Le => y.min(0.0),
                RowSense::Ge => y.max(0.0),
                RowSense::Eq => y,
            })
            .collect();
        let mut reduced = self.model.objective().to_vec();
        for (r, &yr) in rows.iter().zip(&y) {
            for &(v, a) in &r.terms {
                reduced[v.0] -= yr * a;
            }
        }
        let mut cut = Affine::default();
        for (a, &yr) in self.rhs.iter().zip(&y) {
            cut.add_scaled(a, yr);
        }
        cut.constant += reduced
            .iter()
            .zip(&self.upper)
            .map(|(&d, &u)| if d < 0.0 { d * u } else { 0.0 })
            .sum::<f64>();
        cut.compact()
    }

    /// Flows and grid trades of a solve, as `(flows, buy, sell)` per actor.
    fn trades(&self, n: usize, values: &[f64]) -> (Vec<Flow>, Vec<f64>, Vec<f64>) {
        let mut flows = Vec::new();
        let mut buy = vec![0.0; n];
        let mut sell = vec![0.0; n];
        for (idx, &v) in values.iter().enumerate() {
            let v = if v.abs() < NOISE_TOL { 0.0 } else { v };
            match self.model.key_of(VarId(idx)).map(|k| (k.family, k.index.as_slice())) {
                Some(("e", &[i, j, k])) if v != 0.0 => flows.push(Flow {
                    from: i,
                    to: j,
                    period: k,
                    kwh: v,
                }),
                Some(("f", &[i, _])) => buy[i] = v,
                Some(("r", &[i, _])) => sell[i] = v,
                _ => {}
            }
        }
        (flows, buy, sell)
    }
}

/// Grid and exchange variables with flow balance and circulation rows at
/// period `k`, over the ordered pairs `pairs`. Returns the `(i, j, e_ij)`
/// list and the sale variable of each actor.
fn add_period_flows(
    sub: &mut Subproblem,
    instance: &Instance,
    pairs: &[(usize, usize)],
) -> (Vec<(usize, usize, VarId)>, Vec<Option<VarId>>) {
    let k = sub.period;
    let n = instance.n();
    let edges: Vec<(usize, usize, VarId)> = pairs
        .iter()
        .map(|&(i, j)| {
            (
                i,
                j,
                sub.var(VarKey::new("e", &[i, j, k]), 0.0, instance.flow_cap(i, j, k)),
            )
        })
        .collect();
    let mut buy = Vec::with_capacity(n);
    let mut sell = Vec::with_capacity(n);
    for i in 0..n {
        let b = instance.bound(i, k);
        buy.push(sub.var(
            VarKey::new("f", &[i, k]),
            instance.buy(i, k),
            b - instance.surplus(i, k),
        ));
        sell.push((b > 0.0).then(|| sub.var(VarKey::new("r", &[i, k]), -instance.sell(i, k), b)));
    }
    let mut balance: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); n];
    let mut out: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); n];
    for &(i, j, e) in &edges {
        balance[i].push((e, 1.0));
        balance[j].push((e, -1.0));
        out[i].push((e, 1.0));
    }
    for i in 0..n {
        let mut terms = std::mem::take(&mut balance[i]);
        let mut circ = std::mem::take(&mut out[i]);
        if let Some(r) = sell[i] {
            terms.push((r, 1.0));
            circ.push((r, 1.0));
        }
        terms.push((buy[i], -1.0));
        sub.row(
            format!("kir_{i}_{k}"),
            terms,
            RowSense::Eq,
            Affine::constant(instance.surplus(i, k)),
            RowTag::Balance { actor: i },
        );
        if !circ.is_empty() {
            sub.row(
                format!("circ_{i}_{k}"),
                circ,
                RowSense::Le,
                Affine::constant(instance.bound(i, k)),
                RowTag::Circulation { actor: i },
            );
        }
    }
    (edges, sell)
}

/// Lower bound on a period cost: every unit that may circulate is sold.
pub fn period_cost_lower_bound(instance: &Instance, k: usize) -> f64 {
    -(0..instance.n())
        .map(|i| instance.sell(i, k) * instance.bound(i, k))
        .sum::<f64>()
}

/// A master problem paired with its per-period subproblems.
pub trait Decomposition: Sync {
    fn kind(&self) -> ModelKind;
    fn instance(&self) -> &Instance;
    fn subproblems(&self) -> &[Subproblem];
    /// Master rows over the design variables, one per design index.
    fn master(&self) -> (LinearModel, Vec<VarId>);
    /// Design with no loop.
    fn empty_design(&self) -> Vec<f64>;
    fn loops(&self, design: &[f64]) -> Vec<Vec<usize>>;
    /// The cut of period `k` for the given dual vertex, written out from its
    /// algebraic form over the instance data.
    fn closed_form_cut(&self, k: usize, duals: &[f64]) -> Affine;
    /// A random feasible master design.
    fn random_design(&self, rng: &mut dyn RngCore) -> Vec<f64>;
}

/// Solves one subproblem and builds its cut, checking the cut against its
/// closed form and its tightness at the generating design.
pub fn evaluate_period<D: Decomposition + ?Sized>(
    decomposition: &D,
    k: usize,
    design: &[f64],
    solver: &Solver,
) -> Result<(SubproblemResult, BendersCut)> {
    let sub = &decomposition.subproblems()[k];
    let res = sub.solve(decomposition.instance(), design, solver)?;
    let mut plain = Affine::default();
    for (a, &y) in sub.rhs.iter().zip(&res.duals) {
        plain.add_scaled(a, y);
    }
    let plain = plain.compact();
    let closed = decomposition.closed_form_cut(k, &res.duals);
    if plain.distance(&closed) > 1e-9 {
        return Err(Error::Internal(format!(
            "period {k}: cut {plain:?} differs from its closed form {closed:?}"
        )));
    }
    let cut = sub.mechanical_cut(&res.duals);
    let at = cut.eval(design);
    if (at - res.value).abs() > DUALITY_TOL * res.value.abs().max(1.0) {
        return Err(Error::Internal(format!(
            "period {k}: cut value {at} at its generating design, subproblem value {}",
            res.value
        )));
    }
    let cut = BendersCut {
        period: Some(k),
        cut,
        duals: res.duals.clone(),
    };
    Ok((res, cut))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BendersConfig {
    /// Absolute convergence tolerance, EUR.
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iter: usize,
    pub time_limit: Option<Duration>,
    /// One epigraph variable and one cut for the whole horizon.
    pub aggregate: bool,
    pub subproblem_backend: BackendKind,
    pub master_gap: f64,
    /// Probing in the backend presolve dominates master solves on long
    /// horizons, so it is off by default.
    pub master_presolve: bool,
}

impl Default for BendersConfig {
    fn default() -> Self {
        BendersConfig {
            tol_abs: 1e-4,
            tol_rel: 1e-6,
            max_iter: 500,
            time_limit: None,
            aggregate: false,
            subproblem_backend: BackendKind::Highs,
            master_gap: 1e-9,
            master_presolve: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BendersStatus {
    Converged,
    IterationLimit,
    TimeLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub cuts: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BendersTrace {
    pub rows: Vec<TraceRow>,
}

impl BendersTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,lower_bound,upper_bound,cuts,seconds\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.iteration, r.lower_bound, r.upper_bound, r.cuts, r.seconds
            );
        }
        out
    }

    /// Lower bounds never decrease, upper bounds never increase and the
    /// lower bound stays below the upper bound up to `tol`.
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].lower_bound >= w[0].lower_bound && w[1].upper_bound <= w[0].upper_bound)
            && self
                .rows
                .iter()
                .all(|r| r.lower_bound <= r.upper_bound + tol * r.upper_bound.abs().max(1.0))
    }
}

#[derive(Clone, Debug)]
pub struct BendersOutcome {
    pub solution: DesignSolution,
    pub trace: BendersTrace,
    pub status: BendersStatus,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// Incumbent design vector.
    pub design: Vec<f64>,
    /// Every cut added to the master.
    pub cuts: Vec<BendersCut>,
    /// Variables, rows and binaries of the final master.
    pub master_size: (usize, usize, usize),
}

struct Incumbent {
    design: Vec<f64>,
    value: f64,
    results: Vec<SubproblemResult>,
}

fn converged(config: &BendersConfig, lb: f64, ub: f64) -> bool {
    ub - lb <= config.tol_abs.max(config.tol_rel * ub.abs())
}

/// Runs the decomposition to convergence or to the iteration or time cap.
pub fn run_benders<D: Decomposition + ?Sized>(decomposition: &D, config: &BendersConfig) -> Result<BendersOutcome> {
    let start = Instant::now();
    let instance = decomposition.instance();
    let periods = instance.periods();
    let sub_solver = Solver::from_kind(config.subproblem_backend).with_limits(Limits {
        feasibility_tol: 1e-9,
        ..Limits::default()
    });
    let master_solver = Solver::highs();

    let (mut master, design_vars) = decomposition.master();
    let etas: Vec<VarId> = if config.aggregate {
        let lb: f64 = (0..periods)
            .map(|k| instance.probability(k) * period_cost_lower_bound(instance, k))
            .sum();
        vec![master.add_var(VarKey::new("eta", &[]), lb, f64::INFINITY, Integrality::Continuous, 1.0)]
    } else {
        (0..periods)
            .map(|k| {
                master.add_var(
                    VarKey::new("eta", &[k]),
                    period_cost_lower_bound(instance, k),
                    f64::INFINITY,
                    Integrality::Continuous,
                    instance.probability(k),
                )
            })
            .collect()
    };

    let mut pool: Vec<BendersCut> = Vec::new();
    let evaluate = |design: &[f64]| -> Result<Vec<(SubproblemResult, BendersCut)>> {
        (0..periods)
            .into_par_iter()
            .map(|k| evaluate_period(decomposition, k, design, &sub_solver))
            .collect()
    };
    // Adds the cuts violated at (design, eta values) and returns how many.
    let add_cuts = |master: &mut LinearModel,
                    pool: &mut Vec<BendersCut>,
                    evaluated: &[(SubproblemResult, BendersCut)],
                    design: &[f64],
                    eta: Option<&[f64]>|
     -> usize {
        let mut added = 0;
        let mut push = |master: &mut LinearModel, cut: BendersCut, eta_var: VarId, current: Option<f64>| {
            let value = cut.evaluate(design);
            if current.map_or(true, |e| e < value - 1e-9 * value.abs().max(1.0)) {
                let mut terms: Vec<(VarId, f64)> = vec![(eta_var, 1.0)];
                terms.extend(cut.cut.terms.iter().map(|&(i, a)| (design_vars[i], -a)));
                master.add_row(format!("cut_{}", pool.len()), terms, RowSense::Ge, cut.cut.constant);
                pool.push(cut);
                added += 1;
            }
        };
        if config.aggregate {
            let mut total = Affine::default();
            let mut duals = Vec::new();
            for (res, cut) in evaluated {
                total.add_scaled(&cut.cut, instance.probability(res.period));
                duals.extend_from_slice(&cut.duals);
            }
            let cut = BendersCut {
                period: None,
                cut: total.compact(),
                duals,
            };
            push(master, cut, etas[0], eta.map(|e| e[0]));
        } else {
            for (res, cut) in evaluated {
                let k = res.period;
                push(master, cut.clone(), etas[k], eta.map(|e| e[k]));
            }
        }
        added
    };

    let empty = decomposition.empty_design();
    let evaluated = evaluate(&empty)?;
    debug!("empty design evaluated after {:.2}s", start.elapsed().as_secs_f64());
    add_cuts(&mut master, &mut pool, &evaluated, &empty, None);
    let mut incumbent = Incumbent {
        value: expected(instance, &evaluated),
        design: empty,
        results: evaluated.into_iter().map(|(r, _)| r).collect(),
    };
    let mut lower = f64::NEG_INFINITY;
    let mut trace = BendersTrace::default();
    let mut status = BendersStatus::IterationLimit;

    for iteration in 1..=config.max_iter {
        let mut limits = Limits {
            presolve: config.master_presolve,
            ..Limits::default().with_gap(config.master_gap)
        };
        if let Some(limit) = config.time_limit {
            let left = limit.saturating_sub(start.elapsed());
            if left.is_zero() {
                status = BendersStatus::TimeLimit;
                break;
            }
            limits.time_limit = Some(left);
        }
        let master_start = Instant::now();
        let res = master_solver.solve_with(&master, &limits)?;
        debug!("master solve {:.2}s", master_start.elapsed().as_secs_f64());
        match res.status {
            SolveStatus::Optimal => {}
            SolveStatus::TimeLimit => {
                status = BendersStatus::TimeLimit;
                break;
            }
            s => {
                return Err(Error::Status {
                    model: master.name.clone(),
                    status: s,
                })
            }
        }
        lower = lower.max(res.best_bound.min(res.objective));
        let design: Vec<f64> = design_vars.iter().map(|v| res.values[v.0].round()).collect();
        let eta: Vec<f64> = etas.iter().map(|v| res.values[v.0]).collect();

        let mut added = 0;
        if !converged(config, lower, incumbent.value) {
            let evaluated = evaluate(&design)?;
            let value = expected(instance, &evaluated);
            added = add_cuts(&mut master, &mut pool, &evaluated, &design, Some(&eta));
            if value < incumbent.value {
                incumbent = Incumbent {
                    design,
                    value,
                    results: evaluated.into_iter().map(|(r, _)| r).collect(),
                };
            }
        }
        trace.rows.push(TraceRow {
            iteration,
            lower_bound: lower,
            upper_bound: incumbent.value,
            cuts: added,
            seconds: start.elapsed().as_secs_f64(),
        });
        debug!(
            "{} iteration {iteration}: lb {lower} ub {} cuts {added}",
            decomposition.kind(),
            incumbent.value
        );
        if converged(config, lower, incumbent.value) || added == 0 {
            status = BendersStatus::Converged;
            break;
        }
    }
    info!(
        "{} finished after {} iterations ({status:?}): lb {lower} ub {}",
        decomposition.kind(),
        trace.rows.len(),
        incumbent.value
    );

    let solution = assemble(decomposition, &incumbent);
    Ok(BendersOutcome {
        solution,
        trace,
        status,
        lower_bound: lower,
        upper_bound: incumbent.value,
        design: incumbent.design,
        cuts: pool,
        master_size: (master.num_vars(), master.num_rows(), master.num_integer()),
    })
}

fn expected(instance: &Instance, evaluated: &[(SubproblemResult, BendersCut)]) -> f64 {
    evaluated
        .iter()
        .map(|(r, _)| instance.probability(r.period) * r.value)
        .sum()
}

fn assemble<D: Decomposition + ?Sized>(decomposition: &D, incumbent: &Incumbent) -> DesignSolution {
    let instance = decomposition.instance();
    let n = instance.n();
    let periods = instance.periods();
    let mut flows = Vec::new();
    let mut buy = vec![0.0; n * periods];
    let mut sell = vec![0.0; n * periods];
    for res in &incumbent.results {
        let k = res.period;
        let (f, b, s) = decomposition.subproblems()[k].trades(n, &res.values);
        flows.extend(f);
        for i in 0..n {
            buy[i * periods + k] = b[i];
            sell[i * periods + k] = s[i];
        }
    }
    DesignSolution::assemble(
        decomposition.kind(),
        instance,
        decomposition.loops(&incumbent.design),
        flows,
        buy,
        sell,
    )
}

/// Largest excess of a stored cut over the re-solved subproblem value at
/// the given designs.
pub fn max_cut_violation<D: Decomposition + ?Sized>(
    decomposition: &D,
    cuts: &[BendersCut],
    designs: &[Vec<f64>],
    solver: &Solver,
) -> Result<f64> {
    let instance = decomposition.instance();
    let periods = instance.periods();
    let mut worst = f64::NEG_INFINITY;
    for design in designs {
        let values: Vec<f64> = (0..periods)
            .into_par_iter()
            .map(|k| Ok(decomposition.subproblems()[k].solve(instance, design, solver)?.value))
            .collect::<Result<_>>()?;
        let total: f64 = (0..periods).map(|k| instance.probability(k) * values[k]).sum();
        for c in cuts {
            let phi = c.period.map_or(total, |k| values[k]);
            worst = worst.max(c.evaluate(design) - phi);
        }
    }
    Ok(worst)
}

/// Runs the single-loop decomposition.
pub fn run_benders_sl(
    instance: &Instance,
    graph: &crate::geometry::NeighbourhoodGraph,
    config: &BendersConfig,
) -> Result<BendersOutcome> {
    run_benders(&SlDecomposition::new(instance, graph), config)
}

/// Runs the extended-model decomposition over the given candidates.
pub fn run_benders_ml(
    instance: &Instance,
    graph: &crate::geometry::NeighbourhoodGraph,
    candidates: &[crate::cliques::LoopCandidate],
    config: &BendersConfig,
) -> Result<BendersOutcome> {
    run_benders(&MlDecomposition::new(instance, graph, candidates), config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cliques::{build_mlcol, generate_loop_candidates, CandidateOptions};
    use crate::compact::build_slcpct;
    use crate::geometry::build_neighbourhood_graph;
    use crate::model::fixtures::{actor, grid, pair};
    use crate::model::{baseline_objective, LegalParams, ScenarioSet};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Two producers, two consumers and a far actor over four steps.
    fn small() -> Instance {
        Instance::new(
            vec![
                actor("p1", 45.0, 1.0, 3.0, &[4.0, 2.0, 0.0, 1.0], &[0.5, 0.0, 1.0, 0.0]),
                actor("p2", 45.002, 1.0, 4.0, &[3.0, 0.0, 2.0, 0.0], &[0.0, 1.0, 0.0, 2.0]),
                actor("c1", 45.004, 1.0, 0.0, &[0.0; 4], &[2.0, 3.0, 1.0, 0.5]),
                actor("c2", 45.006, 1.0, 1.0, &[0.5, 0.0, 0.0, 0.0], &[4.0, 1.0, 2.0, 3.0]),
                actor("far", 45.1, 1.0, 2.0, &[2.0, 2.0, 2.0, 2.0], &[0.0; 4]),
            ],
            grid(4),
            ScenarioSet::single(),
            LegalParams::default(),
        )
    }

    fn all_grid(inst: &Instance, k: usize) -> f64 {
        (0..inst.n())
            .map(|i| inst.buy(i, k) * inst.net_cons(i, k) - inst.sell(i, k) * inst.net_prod(i, k))
            .sum()
    }

    #[test]
    fn empty_design_trades_with_the_grid() {
        let inst = small();
        let g = build_neighbourhood_graph(&inst).unwrap();
        let sl = SlDecomposition::new(&inst, &g);
        let design = sl.empty_design();
        for k in 0..inst.periods() {
            let (res, cut) = evaluate_period(&sl, k, &design, &Solver::highs()).unwrap();
            assert_relative_eq!(res.value, all_grid(&inst, k), epsilon = 1e-9);
            assert_relative_eq!(cut.evaluate(&design), res.value, epsilon = 1e-9);
        }
    }

    #[test]
    fn pair_loop_costs_nothing() {
        let inst = pair();
        let g = build_neighbourhood_graph(&inst).unwrap();
        let sl = SlDecomposition::new(&inst, &g);
        let res = sl.subproblems()[0]
            .solve(&inst, &sl.design(&[true, true]), &Solver::embedded())
            .unwrap();
        assert!(res.value.abs() < 1e-12);

        let cands = generate_loop_candidates(&inst, &g, CandidateOptions::default()).unwrap();
        let ml = MlDecomposition::new(&inst, &g, &cands);
        let (res, _) = evaluate_period(&ml, 0, &ml.design(&[0]), &Solver::highs()).unwrap();
        assert!(res.value.abs() < 1e-9);
        let (res, _) = evaluate_period(&ml, 0, &ml.empty_design(), &Solver::highs()).unwrap();
        assert_relative_eq!(res.value, all_grid(&inst, 0), epsilon = 1e-12);
    }

    #[test]
    fn cuts_are_valid_at_random_designs() {
        let inst = small();
        let g = build_neighbourhood_graph(&inst).unwrap();
        let cands = generate_loop_candidates(&inst, &g, CandidateOptions::default()).unwrap();
        let sl = SlDecomposition::new(&inst, &g);
        let ml = MlDecomposition::new(&inst, &g, &cands);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let decompositions: [&dyn Decomposition; 2] = [&sl, &ml];
        for d in decompositions {
            let designs: Vec<Vec<f64>> = (0..10).map(|_| d.random_design(&mut rng)).collect();
            let mut cuts = Vec::new();
            for design in &designs {
                for k in 0..inst.periods() {
                    let (res, cut) = evaluate_period(d, k, design, &Solver::highs()).unwrap();
                    assert!((cut.evaluate(design) - res.value).abs() <= 1e-6);
                    cuts.push(cut);
                }
            }
            let worst = max_cut_violation(d, &cuts, &designs, &Solver::embedded()).unwrap();
            assert!(worst <= 1e-6, "{:?}: {worst}", d.kind());
        }
    }

    #[test]
    fn repeated_solves_give_identical_cuts() {
        let inst = small();
        let g = build_neighbourhood_graph(&inst).unwrap();
        let sl = SlDecomposition::new(&inst, &g);
        let design = sl.design(&[true, false, true, true, false]);
        let a = evaluate_period(&sl, 0, &design, &Solver::highs()).unwrap().1;
        let b = evaluate_period(&sl, 0, &design, &Solver::highs()).unwrap().1;
        assert_eq!(a, b);
    }

    #[test]
    fn extended_subproblem_matches_fixed_column_model() {
        let inst = small();
        let g = build_neighbourhood_graph(&inst).unwrap();
        let cands = generate_loop_candidates(&inst, &g, CandidateOptions::default()).unwrap();
        let ml = MlDecomposition::new(&inst, &g, &cands);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let design = ml.random_design(&mut rng);
            let mut col = build_mlcol(&inst, &g, &cands);
            for (h, c) in cands.iter().enumerate() {
                let v = col.var(&VarKey::new("v", &[c.id])).unwrap();
                col.set_bounds(v, design[h], design[h]);
            }
            let fixed = Solver::highs().solve_optimal(&col).unwrap().objective;
            let total: f64 = (0..inst.periods())
                .map(|k| {
                    inst.probability(k)
                        * ml.subproblems()[k]
                            .solve(&inst, &design, &Solver::highs())
                            .unwrap()
                            .value
                })
                .sum();
            assert_relative_eq!(fixed, total, epsilon = 1e-6);
        }
    }

    #[test]
    fn single_actor_converges_to_baseline() {
        let inst = Instance::new(
            vec![actor("a", 45.0, 1.0, 2.0, &[3.0, 0.0], &[1.0, 2.0])],
            grid(2),
            ScenarioSet::single(),
            LegalParams::default(),
        );
        let g = build_neighbourhood_graph(&inst).unwrap();
        let out = run_benders_sl(&inst, &g, &BendersConfig::default()).unwrap();
        assert_eq!(out.status, BendersStatus::Converged);
        assert!(out.trace.rows.len() <= 2);
        assert_relative_eq!(out.solution.objective, baseline_objective(&inst), epsilon = 1e-9);
    }

    #[test]
    fn no_candidates_converges_in_one_iteration() {
        let inst = small();
        let g = build_neighbourhood_graph(&inst).unwrap();
        let out = run_benders_ml(&inst, &g, &[], &BendersConfig::default()).unwrap();
        assert_eq!(out.trace.rows.len(), 1);
        assert_eq!(out.status, BendersStatus::Converged);
        assert_relative_eq!(out.upper_bound, baseline_objective(&inst), epsilon = 1e-9);
    }

    #[test]
    fn decompositions_reach_the_monolithic_optimum() {
        let inst = small();
        let g = build_neighbourhood_graph(&inst).unwrap();
        let cands = generate_loop_candidates(&inst, &g, CandidateOptions::default()).unwrap();
        let sl_opt = Solver::highs()
            .solve_optimal(&build_slcpct(&inst, &g))
            .unwrap()
            .objective;
        let col_opt = Solver::highs()
            .solve_optimal(&build_mlcol(&inst, &g, &cands))
            .unwrap()
            .objective;
        for aggregate in [false, true] {
            let config = BendersConfig {
                aggregate,
                ..BendersConfig::default()
            };
            let sl = run_benders_sl(&inst, &g, &config).unwrap();
            assert_eq!(sl.status, BendersStatus::Converged);
            assert_relative_eq!(sl.solution.objective, sl_opt, epsilon = 1e-4);
            assert!(sl.trace.is_monotone(1e-9));
            let ml = run_benders_ml(&inst, &g, &cands, &config).unwrap();
            assert_relative_eq!(ml.solution.objective, col_opt, epsilon = 1e-4);
            assert!(ml.trace.is_monotone(1e-9));
        }
    }

    #[test]
    fn trace_csv_has_one_line_per_iteration() {
        let inst = pair();
        let g = build_neighbourhood_graph(&inst).unwrap();
        let out = run_benders_sl(&inst, &g, &BendersConfig::default()).unwrap();
        let csv = out.trace.to_csv();
        assert!(csv.starts_with("iteration,lower_bound,upper_bound,cuts,seconds\n"));
        assert_eq!(csv.lines().count(), out.trace.rows.len() + 1);
    }
}
