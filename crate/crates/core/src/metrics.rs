//! Operational indicators of a loop design and root-gap diagnostics.
//!
//! Every indicator is recomputed from the instance and the solution's flows
//! and grid trades; nothing is read back from the solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Instance;
use crate::solution::DesignSolution;
use crate::solver::{relax, LinearModel, Solver};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub n_loops: usize,
    /// Mean number of members per loop; `None` without loops.
    pub avg_members: Option<f64>,
    /// Mean installed power per loop, kWc; `None` without loops.
    pub avg_installed_power_kwc: Option<f64>,
    /// Energy consumed inside loops over energy produced by loop members.
    pub self_consumption_rate: Option<f64>,
    /// Energy consumed inside loops over energy consumed by loop members.
    pub self_production_rate: Option<f64>,
    /// Largest saving of a loop member against the zero-loop design, €.
    pub highest_benefit: Option<f64>,
    pub lowest_benefit: Option<f64>,
    /// Saving of all loop members together, €.
    pub total_benefit: f64,
    pub actors_without_loop: usize,
    pub root_gap_percent: Option<f64>,
}

pub const KPI_CSV_HEADER: [&str; 10] = [
    "n_loops",
    "avg_members",
    "avg_installed_power_kwc",
    "self_consumption_rate",
    "self_production_rate",
    "highest_benefit",
    "lowest_benefit",
    "total_benefit",
    "actors_without_loop",
    "root_gap_percent",
];

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl KpiReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Flat CSV cells in [`KPI_CSV_HEADER`] order; undefined values are empty.
    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.n_loops.to_string(),
            cell(self.avg_members),
            cell(self.avg_installed_power_kwc),
            cell(self.self_consumption_rate),
            cell(self.self_production_rate),
            cell(self.highest_benefit),
            cell(self.lowest_benefit),
            self.total_benefit.to_string(),
            self.actors_without_loop.to_string(),
            cell(self.root_gap_percent),
        ]
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(KPI_CSV_HEADER)?;
        w.write_record(self.csv_row())?;
        let bytes = w.into_inner().map_err(|e| Error::Input(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Saving of every actor against the zero-loop design, €. Positive means
/// the actor pays less than when trading with the grid alone.
pub fn actor_benefits(instance: &Instance, solution: &DesignSolution) -> Vec<f64> {
    (0..instance.n())
        .map(|i| instance.baseline_actor_cost(i) - solution.actor_cost(instance, i))
        .collect()
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

pub fn compute_kpis(instance: &Instance, solution: &DesignSolution) -> Result<KpiReport> {
    let n = instance.n();
    if solution.assignment.len() != n || solution.periods != instance.periods() {
        return Err(Error::Input("solution does not match the instance".into()));
    }
    let members: Vec<usize> = (0..n).filter(|&i| solution.assignment[i].is_some()).collect();
    let n_loops = solution.loops.len();
    let avg_members = ratio(members.len() as f64, n_loops as f64);
    let power: f64 = members.iter().map(|&i| instance.actors()[i].installed_power_kwc).sum();
    let avg_installed_power_kwc = ratio(power, n_loops as f64);

    let mut internal = 0.0;
    let mut produced = 0.0;
    let mut consumed = 0.0;
    for &i in &members {
        let a = &instance.actors()[i];
        for k in 0..instance.periods() {
            let p = instance.probability(k);
            internal += p * a.production_abs[k].min(a.consumption_abs[k]);
            produced += p * a.production_abs[k];
            consumed += p * a.consumption_abs[k];
        }
    }
    internal += solution
        .flows
        .iter()
        .map(|f| instance.probability(f.period) * f.kwh)
        .sum::<f64>();

    let benefits = actor_benefits(instance, solution);
    let member_benefits = || members.iter().map(|&i| benefits[i]);
    Ok(KpiReport {
        n_loops,
        avg_members,
        avg_installed_power_kwc,
        self_consumption_rate: ratio(internal, produced),
        self_production_rate: ratio(internal, consumed),
        highest_benefit: member_benefits().reduce(f64::max),
        lowest_benefit: member_benefits().reduce(f64::min),
        total_benefit: member_benefits().fold(0.0, |a, b| a + b),
        actors_without_loop: n - members.len(),
        root_gap_percent: None,
    })
}

/// Distance between a MILP optimum and its continuous relaxation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootGap {
    pub milp_objective: f64,
    pub lp_objective: f64,
    /// Percent of `|milp_objective|`, or the absolute difference when the
    /// MILP optimum is zero.
    pub gap: f64,
    pub relative: bool,
}

/// Root gap from a MILP optimum and the optimum of its relaxation.
pub fn gap_between(milp_objective: f64, lp_objective: f64) -> RootGap {
    let diff = milp_objective - lp_objective;
    let relative = milp_objective.abs() > 1e-9;
    RootGap {
        milp_objective,
        lp_objective,
        gap: if relative {
            diff / milp_objective.abs() * 100.0
        } else {
            diff
        },
        relative,
    }
}

pub fn root_gap(model: &LinearModel, solver: &Solver) -> Result<RootGap> {
    if model.num_integer() == 0 {
        return Err(Error::Input(format!("`{}` has no integer variables", model.name)));
    }
    let milp = solver.solve_optimal(model)?.objective;
    let lp = solver.solve_optimal(&relax(model))?.objective;
    Ok(gap_between(milp, lp))
}
