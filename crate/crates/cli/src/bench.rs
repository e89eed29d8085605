//! Benchmark campaigns: every (preset, size, horizon, replicate) instance is
//! generated once and solved with every requested model.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::Context;
use loopforge_core::metrics::{RootGap, KPI_CSV_HEADER};
use loopforge_core::{DesignSolution, GenerationConfig, KpiReport, ModelKind, SolveOptions};

use crate::{generate, outcome_kpis, status_name};

#[derive(Clone, Debug)]
pub struct BenchPlan {
    pub presets: Vec<String>,
    pub sizes: Vec<usize>,
    pub horizons: Vec<usize>,
    pub replicates: usize,
    pub base_seed: u64,
    pub models: Vec<ModelKind>,
    pub workers: usize,
}

#[derive(Clone, Debug)]
struct Job {
    preset: String,
    n: usize,
    days: usize,
    replicate: usize,
    seed: u64,
}

impl BenchPlan {
    fn jobs(&self) -> Vec<Job> {
        let mut jobs = Vec::new();
        for preset in &self.presets {
            for &n in &self.sizes {
                for &days in &self.horizons {
                    for replicate in 0..self.replicates {
                        jobs.push(Job {
                            preset: preset.clone(),
                            n,
                            days,
                            replicate,
                            seed: self.base_seed + replicate as u64,
                        });
                    }
                }
            }
        }
        jobs
    }

    pub fn row_count(&self) -> usize {
        self.presets.len() * self.sizes.len() * self.horizons.len() * self.replicates * self.models.len()
    }
}

/// One solve of one model on one generated instance.
#[derive(Clone, Debug)]
pub struct BenchRow {
    pub preset: String,
    pub n: usize,
    pub horizon_days: usize,
    pub distribution: String,
    pub replicate: usize,
    pub seed: u64,
    pub model: ModelKind,
    /// `optimal`, `time_limit`, `iteration_limit` or `error`.
    pub status: String,
    pub variables: usize,
    pub constraints: usize,
    pub integers: usize,
    pub subproblem_variables: Option<usize>,
    pub subproblem_constraints: Option<usize>,
    pub candidates: Option<usize>,
    pub iterations: Option<usize>,
    pub wall_seconds: f64,
    pub solve_seconds: f64,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub root_gap: Option<RootGap>,
    pub kpis: Option<KpiReport>,
    pub error: Option<String>,
    pub solution: Option<DesignSolution>,
}

pub const BENCH_CSV_HEADER: [&str; 20] = [
    "preset",
    "n",
    "horizon_days",
    "distribution",
    "replicate",
    "seed",
    "model",
    "status",
    "variables",
    "constraints",
    "integers",
    "subproblem_variables",
    "subproblem_constraints",
    "candidates",
    "iterations",
    "wall_seconds",
    "solve_seconds",
    "objective",
    "bound",
    "error",
];

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl BenchRow {
    fn record(&self) -> Vec<String> {
        let mut r = vec![
            self.preset.clone(),
            self.n.to_string(),
            self.horizon_days.to_string(),
            self.distribution.clone(),
            self.replicate.to_string(),
            self.seed.to_string(),
            self.model.name().to_string(),
            self.status.clone(),
            self.variables.to_string(),
            self.constraints.to_string(),
            self.integers.to_string(),
            cell(self.subproblem_variables),
            cell(self.subproblem_constraints),
            cell(self.candidates),
            cell(self.iterations),
            self.wall_seconds.to_string(),
            self.solve_seconds.to_string(),
            cell(self.objective),
            cell(self.bound),
            self.error.clone().unwrap_or_default(),
        ];
        match &self.kpis {
            Some(k) => r.extend(k.csv_row()),
            None => r.extend(KPI_CSV_HEADER.iter().map(|_| String::new())),
        }
        r
    }
}

fn solve_row(
    job: &Job,
    config: &GenerationConfig,
    inst: &loopforge_core::Instance,
    model: ModelKind,
    options: &SolveOptions,
) -> BenchRow {
    let mut row = BenchRow {
        preset: job.preset.clone(),
        n: job.n,
        horizon_days: job.days,
        distribution: format!("{:?}", config.distribution).to_lowercase(),
        replicate: job.replicate,
        seed: job.seed,
        model,
        status: "error".into(),
        variables: 0,
        constraints: 0,
        integers: 0,
        subproblem_variables: None,
        subproblem_constraints: None,
        candidates: None,
        iterations: None,
        wall_seconds: 0.0,
        solve_seconds: 0.0,
        objective: None,
        bound: None,
        root_gap: None,
        kpis: None,
        error: None,
        solution: None,
    };
    let start = Instant::now();
    let result = loopforge_core::solve(model, inst, options)
        .map_err(anyhow::Error::from)
        .and_then(|o| outcome_kpis(inst, &o).map(|k| (o, k)));
    row.wall_seconds = start.elapsed().as_secs_f64();
    match result {
        Ok((o, kpis)) => {
            row.status = status_name(o.status).into();
            row.variables = o.size.variables;
            row.constraints = o.size.constraints;
            row.integers = o.size.integers;
            row.subproblem_variables = o.subproblem_size.map(|s| s.variables);
            row.subproblem_constraints = o.subproblem_size.map(|s| s.constraints);
            row.candidates = o.candidates;
            row.iterations = o.trace.as_ref().map(|t| t.rows.len());
            row.solve_seconds = o.solve_seconds;
            row.objective = o.objective;
            row.bound = o.bound;
            row.root_gap = o.root_gap;
            row.kpis = kpis;
            row.solution = o.solution;
        }
        Err(e) => row.error = Some(format!("{e:#}")),
    }
    row
}

/// Runs the plan on `plan.workers` threads. Rows come back ordered by
/// preset, size, horizon, replicate and model, whatever the scheduling.
pub fn run_bench<F>(
    plan: &BenchPlan,
    options: &SolveOptions,
    configure: F,
    irradiance_csv: Option<&str>,
) -> anyhow::Result<Vec<BenchRow>>
where
    F: Fn(&str, usize, usize, u64) -> anyhow::Result<GenerationConfig> + Sync,
{
    let jobs = plan.jobs();
    let next = AtomicUsize::new(0);
    let done: Mutex<Vec<(usize, anyhow::Result<Vec<BenchRow>>)>> = Mutex::new(Vec::new());
    let work = || loop {
        let idx = next.fetch_add(1, Ordering::Relaxed);
        let Some(job) = jobs.get(idx) else { break };
        let rows = configure(&job.preset, job.n, job.days, job.seed).and_then(|c| {
            let inst = generate(&c, irradiance_csv)
                .with_context(|| format!("{} n={} days={} seed={}", job.preset, job.n, job.days, job.seed))?;
            Ok(plan
                .models
                .iter()
                .map(|&m| solve_row(job, &c, &inst, m, options))
                .collect())
        });
        log::info!("bench job {}/{} done", idx + 1, jobs.len());
        done.lock().expect("bench worker panicked").push((idx, rows));
    };
    std::thread::scope(|s| {
        for _ in 0..plan.workers.clamp(1, jobs.len().max(1)) {
            s.spawn(&work);
        }
    });
    let mut done = done.into_inner().expect("bench worker panicked");
    done.sort_by_key(|(idx, _)| *idx);
    let mut rows = Vec::with_capacity(plan.row_count());
    for (_, r) in done {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn to_csv(rows: &[BenchRow]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BENCH_CSV_HEADER.iter().chain(KPI_CSV_HEADER.iter()))?;
    for r in rows {
        w.write_record(r.record())?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Root gaps of the rows that have one.
pub fn gaps_to_csv(rows: &[BenchRow]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "preset",
        "n",
        "horizon_days",
        "replicate",
        "seed",
        "model",
        "milp_objective",
        "lp_objective",
        "gap",
        "relative",
    ])?;
    for r in rows {
        if let Some(g) = r.root_gap {
            w.write_record([
                r.preset.clone(),
                r.n.to_string(),
                r.horizon_days.to_string(),
                r.replicate.to_string(),
                r.seed.to_string(),
                r.model.name().to_string(),
                g.milp_objective.to_string(),
                g.lp_objective.to_string(),
                g.gap.to_string(),
                g.relative.to_string(),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
