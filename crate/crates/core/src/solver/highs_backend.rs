use std::time::Instant;

use highs::{HighsModelStatus, RowProblem, Sense};

use super::{Backend, Capabilities, Integrality, Limits, LinearModel, RowSense, SolveResult, SolveStatus};
use crate::error::{Error, Result};

/// HiGHS (simplex / branch-and-cut) backend.
#[derive(Clone, Debug)]
pub struct HighsBackend {
    pub threads: u32,
    pub seed: i32,
}

impl Default for HighsBackend {
    fn default() -> Self {
        // HiGHS keeps a process-wide scheduler; every instance must request the
        // same thread count.
        HighsBackend { threads: 1, seed: 0 }
    }
}

impl Backend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            duals: true,
            integers: true,
        }
    }

    fn solve_validated(&self, model: &LinearModel, limits: &Limits) -> Result<SolveResult> {
        let start = Instant::now();
        let is_mip = model.is_mip();
        if model.num_vars() == 0 {
            return Ok(SolveResult {
                status: SolveStatus::Optimal,
                values: Vec::new(),
                objective: 0.0,
                best_bound: 0.0,
                duals: (!is_mip).then(|| vec![0.0; model.num_rows()]),
                reduced_costs: (!is_mip).then(Vec::new),
                wall_time: start.elapsed(),
            });
        }

        let mut pb = RowProblem::default();
        let cols: Vec<_> = model
            .variables()
            .iter()
            .zip(model.objective())
            .map(|(v, &c)| match v.integrality {
                Integrality::Continuous => pb.add_column(c, v.lower..=v.upper),
                Integrality::Binary => pb.add_integer_column(c, v.lower..=v.upper),
            })
            .collect();
        for row in model.constraints() {
            let factors = row.terms.iter().map(|(v, a)| (cols[v.0], *a));
            match row.sense {
                RowSense::Le => pb.add_row(..=row.rhs, factors),
                RowSense::Ge => pb.add_row(row.rhs.., factors),
                RowSense::Eq => pb.add_row(row.rhs..=row.rhs, factors),
            }
        }

        let mut hm = pb
            .try_optimise(Sense::Minimise)
            .map_err(|s| Error::Backend(format!("loading `{}`: {s:?}", model.name)))?;
        hm.make_quiet();
        hm.set_option("threads", self.threads as i32);
        hm.set_option("random_seed", self.seed);
        hm.set_option("primal_feasibility_tolerance", limits.feasibility_tol);
        hm.set_option("dual_feasibility_tolerance", limits.feasibility_tol);
        hm.set_option("mip_feasibility_tolerance", limits.feasibility_tol);
        if is_mip {
            hm.set_option("mip_rel_gap", limits.rel_gap);
            hm.set_option("mip_abs_gap", 1e-9);
        } else {
            hm.set_option("solver", "simplex");
        }
        if !limits.presolve {
            hm.set_option("presolve", "off");
        }
        if let Some(t) = limits.time_limit {
            hm.set_option("time_limit", t.as_secs_f64());
        }

        let solved = hm
            .try_solve()
            .map_err(|s| Error::Backend(format!("solving `{}`: {s:?}", model.name)))?;
        let status = match solved.status() {
            HighsModelStatus::Optimal | HighsModelStatus::ModelEmpty => SolveStatus::Optimal,
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => SolveStatus::Unbounded,
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedInterrupt => SolveStatus::TimeLimit,
            other => return Err(Error::Backend(format!("HiGHS status {other:?} on `{}`", model.name))),
        };

        let has_primal = matches!(status, SolveStatus::Optimal)
            || (status == SolveStatus::TimeLimit
                && solved.objective_value().is_finite()
                && solved
                    .int_info_value(c"primal_solution_status")
                    .map(|s| s == 2)
                    .unwrap_or(false));
        let sol = solved.get_solution();
        let values = if has_primal { sol.columns().to_vec() } else { Vec::new() };
        let objective = if has_primal {
            model.objective_value(&values)
        } else {
            f64::INFINITY
        };
        let best_bound = if is_mip {
            solved.double_info_value(c"mip_dual_bound").unwrap_or(f64::NEG_INFINITY)
        } else if status == SolveStatus::Optimal {
            objective
        } else {
            f64::NEG_INFINITY
        };
        let lp_optimal = !is_mip && status == SolveStatus::Optimal;
        Ok(SolveResult {
            status,
            objective,
            best_bound: if status == SolveStatus::Optimal && is_mip {
                best_bound.min(objective)
            } else {
                best_bound
            },
            duals: lp_optimal.then(|| sol.dual_rows().to_vec()),
            reduced_costs: lp_optimal.then(|| sol.dual_columns().to_vec()),
            values,
            wall_time: start.elapsed(),
        })
    }
}
