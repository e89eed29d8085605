//! One entry point that builds and solves any of the five models.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::benders::{
    run_benders, BendersConfig, BendersStatus, BendersTrace, Decomposition, MlDecomposition, SlDecomposition,
};
use crate::cliques::{
    build_mlcol, columns, generate_loop_candidates, CandidateOptions, CliqueMode, LoopCandidate, DEFAULT_CANDIDATE_CAP,
};
use crate::compact::{build_mlcpct, build_slcpct, extract_solution, MultiLoopOptions};
use crate::error::{Error, Result};
use crate::geometry::{build_neighbourhood_graph, NeighbourhoodGraph};
use crate::metrics::{gap_between, RootGap};
use crate::model::{validate_instance, Instance};
use crate::solution::{DesignSolution, ModelKind};
use crate::solver::{relax, BackendKind, Limits, LinearModel, SolveStatus, Solver};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub backend: BackendKind,
    /// Wall-clock limit of the solve, seconds.
    pub time_limit_secs: Option<f64>,
    pub mip_gap: f64,
    /// Loop slots of the multi-loop compact model; `None` means `max(1, n / 2)`.
    pub max_loops: Option<usize>,
    pub symmetry_breaking: bool,
    pub clique_mode: CliqueMode,
    pub candidate_cap: usize,
    pub benders: BendersConfig,
    /// Also solve the continuous relaxation of MILP models.
    pub root_gap: bool,
    /// Backend presolve for the compact models.
    pub presolve: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            backend: BackendKind::Highs,
            time_limit_secs: None,
            mip_gap: 1e-6,
            max_loops: None,
            symmetry_breaking: true,
            clique_mode: CliqueMode::TwoStage,
            candidate_cap: DEFAULT_CANDIDATE_CAP,
            benders: BendersConfig::default(),
            root_gap: false,
            presolve: true,
        }
    }
}

impl SolveOptions {
    fn time_limit(&self) -> Option<Duration> {
        self.time_limit_secs.map(Duration::from_secs_f64)
    }

    fn solver(&self) -> Solver {
        Solver::from_kind(self.backend).with_limits(Limits {
            time_limit: self.time_limit(),
            rel_gap: self.mip_gap,
            presolve: self.presolve,
            ..Limits::default()
        })
    }

    fn candidate_options(&self) -> CandidateOptions {
        CandidateOptions {
            mode: self.clique_mode,
            cap: self.candidate_cap,
        }
    }

    fn multi_loop(&self) -> MultiLoopOptions {
        MultiLoopOptions {
            max_loops: self.max_loops,
            symmetry_breaking: self.symmetry_breaking,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSize {
    pub variables: usize,
    pub constraints: usize,
    pub integers: usize,
}

impl ModelSize {
    pub fn of(model: &LinearModel) -> Self {
        ModelSize {
            variables: model.num_vars(),
            constraints: model.num_rows(),
            integers: model.num_integer(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Optimal,
    TimeLimit,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub model: ModelKind,
    pub status: RunStatus,
    /// Best design found; absent when a limit stopped the solve first.
    pub solution: Option<DesignSolution>,
    pub objective: Option<f64>,
    /// Proven lower bound on the optimum.
    pub bound: Option<f64>,
    /// Time spent in the solver, seconds.
    pub solve_seconds: f64,
    /// Time including candidate generation and model building, seconds.
    pub total_seconds: f64,
    /// Size of the MILP, or of the final master for decompositions.
    pub size: ModelSize,
    /// Size of the subproblems together, for decompositions.
    pub subproblem_size: Option<ModelSize>,
    pub candidates: Option<usize>,
    pub root_gap: Option<RootGap>,
    pub trace: Option<BendersTrace>,
}

/// Builds the MILP handed to the solver. For the decompositions this is the
/// master problem before any cut.
pub fn build_model(
    kind: ModelKind,
    instance: &Instance,
    graph: &NeighbourhoodGraph,
    candidates: Option<&[LoopCandidate]>,
    options: &SolveOptions,
) -> Result<LinearModel> {
    let need = || candidates.ok_or_else(|| Error::Input(format!("{kind} needs loop candidates")));
    Ok(match kind {
        ModelKind::SlCpct => build_slcpct(instance, graph),
        ModelKind::MlCpct => build_mlcpct(instance, graph, options.multi_loop())?,
        ModelKind::MlCol => build_mlcol(instance, graph, need()?),
        ModelKind::SlExt => SlDecomposition::new(instance, graph).master().0,
        ModelKind::MlColExt => MlDecomposition::new(instance, graph, need()?).master().0,
    })
}

/// Candidate loops when the model needs them.
pub fn candidates_for(
    kind: ModelKind,
    instance: &Instance,
    graph: &NeighbourhoodGraph,
    options: &SolveOptions,
) -> Result<Option<Vec<LoopCandidate>>> {
    match kind {
        ModelKind::MlCol | ModelKind::MlColExt => Ok(Some(generate_loop_candidates(
            instance,
            graph,
            options.candidate_options(),
        )?)),
        _ => Ok(None),
    }
}

pub fn solve(kind: ModelKind, instance: &Instance, options: &SolveOptions) -> Result<RunOutcome> {
    let violations = validate_instance(instance);
    if !violations.is_empty() {
        return Err(Error::InvalidInstance(violations));
    }
    let start = Instant::now();
    let graph = build_neighbourhood_graph(instance)?;
    let candidates = candidates_for(kind, instance, &graph, options)?;
    if kind.is_decomposition() {
        let decomposition: Box<dyn Decomposition + '_> = match kind {
            ModelKind::SlExt => Box::new(SlDecomposition::new(instance, &graph)),
            _ => Box::new(MlDecomposition::new(
                instance,
                &graph,
                candidates.as_deref().unwrap_or_default(),
            )),
        };
        let config = BendersConfig {
            time_limit: options.time_limit().or(options.benders.time_limit),
            ..options.benders.clone()
        };
        let subproblem_size = decomposition.subproblems().iter().fold(ModelSize::default(), |acc, s| {
            let m = ModelSize::of(s.model());
            ModelSize {
                variables: acc.variables + m.variables,
                constraints: acc.constraints + m.constraints,
                integers: acc.integers + m.integers,
            }
        });
        let solve_start = Instant::now();
        let out = run_benders(decomposition.as_ref(), &config)?;
        let solve_seconds = solve_start.elapsed().as_secs_f64();
        let (variables, constraints, integers) = out.master_size;
        return Ok(RunOutcome {
            model: kind,
            status: match out.status {
                BendersStatus::Converged => RunStatus::Optimal,
                BendersStatus::IterationLimit => RunStatus::IterationLimit,
                BendersStatus::TimeLimit => RunStatus::TimeLimit,
            },
            objective: Some(out.solution.objective),
            bound: Some(out.lower_bound),
            solution: Some(out.solution),
            solve_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
            size: ModelSize {
                variables,
                constraints,
                integers,
            },
            subproblem_size: Some(subproblem_size),
            candidates: candidates.as_ref().map(|c| c.len()),
            root_gap: None,
            trace: Some(out.trace),
        });
    }

    let model = build_model(kind, instance, &graph, candidates.as_deref(), options)?;
    let solver = options.solver();
    let solve_start = Instant::now();
    let res = solver.solve(&model)?;
    let solve_seconds = solve_start.elapsed().as_secs_f64();
    let status = match res.status {
        SolveStatus::Optimal => RunStatus::Optimal,
        SolveStatus::TimeLimit => RunStatus::TimeLimit,
        other => {
            return Err(Error::Status {
                model: model.name.clone(),
                status: other,
            })
        }
    };
    let cols = candidates.as_deref().map(columns);
    let solution = if res.has_solution() {
        Some(extract_solution(kind, instance, &model, &res, cols.as_deref())?)
    } else {
        None
    };
    let root_gap = if options.root_gap && status == RunStatus::Optimal {
        let lp = Solver::from_kind(options.backend).solve_optimal(&relax(&model))?;
        Some(gap_between(res.objective, lp.objective))
    } else {
        None
    };
    Ok(RunOutcome {
        model: kind,
        status,
        objective: solution.as_ref().map(|s| s.objective),
        bound: res.best_bound.is_finite().then_some(res.best_bound),
        solution,
        solve_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
        size: ModelSize::of(&model),
        subproblem_size: None,
        candidates: candidates.map(|c| c.len()),
        root_gap,
        trace: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::pair;

    #[test]
    fn every_model_solves_the_pair() {
        let inst = pair();
        for kind in ModelKind::ALL {
            let out = solve(
                kind,
                &inst,
                &SolveOptions {
                    root_gap: true,
                    ..SolveOptions::default()
                },
            )
            .unwrap();
            assert_eq!(out.status, RunStatus::Optimal, "{kind}");
            assert!(out.objective.unwrap().abs() < 1e-9, "{kind}: {:?}", out.objective);
            assert_eq!(out.solution.unwrap().loops, vec![vec![0, 1]]);
            assert_eq!(out.trace.is_some(), kind.is_decomposition());
            assert_eq!(out.root_gap.is_some(), !kind.is_decomposition());
        }
    }

    #[test]
    fn extended_models_report_candidates() {
        let inst = pair();
        let out = solve(ModelKind::MlCol, &inst, &SolveOptions::default()).unwrap();
        assert_eq!(out.candidates, Some(1));
        let graph = build_neighbourhood_graph(&inst).unwrap();
        assert!(build_model(ModelKind::MlCol, &inst, &graph, None, &SolveOptions::default()).is_err());
    }
}
