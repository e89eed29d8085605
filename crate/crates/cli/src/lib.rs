//! Command line front end: instance generation, solving, KPI reports, LP
//! export and benchmark campaigns.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chrono::{Datelike, NaiveDate};
use clap::{Args, Parser, Subcommand, ValueEnum};
use loopforge_core::cliques::CliqueMode;
use loopforge_core::generate::solar::Exposition;
use loopforge_core::generate::{generate_instance_with_irradiance, Distribution, PRESETS};
use loopforge_core::geometry::build_neighbourhood_graph;
use loopforge_core::run::{build_model, candidates_for};
use loopforge_core::solver::export_lp;
use loopforge_core::{
    compute_kpis, BackendKind, DesignSolution, GenerationConfig, Instance, KpiReport, ModelKind, ReferenceProfiles,
    RunOutcome, RunStatus, SolveOptions,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub mod bench;

pub use bench::{run_bench, BenchPlan, BenchRow, BENCH_CSV_HEADER};

#[derive(Debug, Parser)]
#[command(name = "loopforge", version, about = "Design collective self-consumption loops")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic instance.
    Generate(GenerateArgs),
    /// Solve an instance with one of the five models.
    Solve(SolveArgs),
    /// Compute the KPIs of a saved solution.
    Report(ReportArgs),
    /// Write the model of an instance in LP format.
    ExportLp(ExportLpArgs),
    /// Generate and solve a grid of configurations.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DistributionArg {
    Uniform,
    Clustered,
}

impl From<DistributionArg> for Distribution {
    fn from(d: DistributionArg) -> Self {
        match d {
            DistributionArg::Uniform => Distribution::Uniform,
            DistributionArg::Clustered => Distribution::Clustered,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ExpositionArg {
    Best,
    Worst,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CliqueModeArg {
    TwoStage,
    CapacityAware,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BackendArg {
    Highs,
    Embedded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Generator settings shared by `generate` and `bench`.
#[derive(Clone, Debug, Default, Args)]
pub struct GeneratorFlags {
    /// Named configuration to start from.
    #[arg(long)]
    pub preset: Option<String>,
    /// Mean number of actors per km².
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long, value_enum)]
    pub distribution: Option<DistributionArg>,
    /// Local date of the first step, YYYY-MM-DD.
    #[arg(long)]
    pub start: Option<NaiveDate>,
    #[arg(long)]
    pub step_minutes: Option<u32>,
    #[arg(long)]
    pub max_distance_km: Option<f64>,
    #[arg(long)]
    pub max_power_kwc: Option<f64>,
    #[arg(long, value_enum)]
    pub exposition: Option<ExpositionArg>,
    /// Measured plane-of-array irradiance, `tile_id,timestamp,poa_wm2`.
    #[arg(long)]
    pub irradiance_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub seed: u64,
    /// JSON file with `generation` and `solve` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub days: Option<usize>,
    #[command(flatten)]
    pub generator: GeneratorFlags,
    /// Instance JSON; printed to stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Solver settings shared by `solve`, `export-lp` and `bench`.
#[derive(Clone, Debug, Default, Args)]
pub struct SolverFlags {
    /// Wall-clock limit per solve, seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub mip_gap: Option<f64>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Loop slots of the multi-loop compact model.
    #[arg(long)]
    pub max_loops: Option<usize>,
    #[arg(long)]
    pub no_symmetry_breaking: bool,
    #[arg(long, value_enum)]
    pub clique_mode: Option<CliqueModeArg>,
    #[arg(long)]
    pub candidate_cap: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// One Benders cut per iteration over the whole horizon.
    #[arg(long)]
    pub aggregate_cuts: bool,
    /// Also solve the continuous relaxation and report the root gap.
    #[arg(long)]
    pub root_gap: bool,
    /// Skip the backend presolve on compact models.
    #[arg(long)]
    pub no_presolve: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub model: ModelKind,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Solution JSON.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// KPI report; CSV when the extension is `.csv`, JSON otherwise.
    #[arg(long)]
    pub kpi_output: Option<PathBuf>,
    /// Benders bounds per iteration, CSV.
    #[arg(long)]
    pub trace_output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: ReportFormat,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportLpArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub model: ModelKind,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated model names.
    #[arg(long, value_delimiter = ',', required = true)]
    pub models: Vec<ModelKind>,
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    #[arg(long, value_delimiter = ',', default_value = "7")]
    pub horizon_days: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub n: Vec<usize>,
    /// Comma-separated preset names; every preset is crossed with every
    /// size and horizon.
    #[arg(long, value_delimiter = ',', default_value = "reference")]
    pub presets: Vec<String>,
    /// Replicate `r` uses seed `seed + r`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub generator: GeneratorFlags,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Bench CSV; printed to stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Root gaps of every MILP solve, CSV.
    #[arg(long)]
    pub gap_output: Option<PathBuf>,
}

/// Contents of a `--config` file. Both sections are optional and every
/// field inside them may be left out.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub generation: Option<Value>,
    pub solve: Option<Value>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(ConfigFile::default()),
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
            }
        }
    }
}

/// Overlays `patch` on `base`, recursing into objects.
fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}

fn layered<T: Serialize + for<'de> Deserialize<'de>>(base: T, patch: Option<&Value>) -> anyhow::Result<T> {
    let Some(patch) = patch else { return Ok(base) };
    let mut value = serde_json::to_value(base)?;
    merge(&mut value, patch);
    Ok(serde_json::from_value(value)?)
}

impl GeneratorFlags {
    /// Preset, then config file, then flags.
    pub fn resolve(
        &self,
        config: &ConfigFile,
        seed: u64,
        n: Option<usize>,
        days: Option<usize>,
    ) -> anyhow::Result<GenerationConfig> {
        let preset = self.preset.as_deref().unwrap_or("reference");
        let mut c = layered(
            GenerationConfig::preset(preset, seed, 10, 7)?,
            config.generation.as_ref(),
        )?;
        c.seed = seed;
        if let Some(n) = n {
            c.n_actors = n;
        }
        if let Some(days) = days {
            c.days = days;
        }
        if let Some(d) = self.density {
            c.density_per_km2 = d;
        }
        if let Some(d) = self.distribution {
            c.distribution = d.into();
        }
        if let Some(s) = self.start {
            c.start = s.and_hms_opt(0, 0, 0).expect("midnight exists");
        }
        if let Some(s) = self.step_minutes {
            c.step_minutes = s;
        }
        if let Some(d) = self.max_distance_km {
            c.legal.max_distance_km = d;
        }
        if let Some(p) = self.max_power_kwc {
            c.legal.max_installed_power_kwc = p;
        }
        if let Some(e) = self.exposition {
            c.exposition = match e {
                ExpositionArg::Best => Exposition::BEST,
                ExpositionArg::Worst => Exposition::WORST,
            };
        }
        c.validate()?;
        Ok(c)
    }

    fn irradiance(&self) -> anyhow::Result<Option<String>> {
        self.irradiance_csv
            .as_ref()
            .map(|p| fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))
            .transpose()
    }
}

impl SolverFlags {
    /// Config file, then flags.
    pub fn resolve(&self, config: &ConfigFile) -> anyhow::Result<SolveOptions> {
        let mut o = layered(SolveOptions::default(), config.solve.as_ref())?;
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                bail!("--time-limit must be positive, got {t}");
            }
            o.time_limit_secs = Some(t);
        }
        if let Some(g) = self.mip_gap {
            o.mip_gap = g;
        }
        if let Some(b) = self.backend {
            o.backend = match b {
                BackendArg::Highs => BackendKind::Highs,
                BackendArg::Embedded => BackendKind::Embedded,
            };
        }
        if self.max_loops.is_some() {
            o.max_loops = self.max_loops;
        }
        if self.no_symmetry_breaking {
            o.symmetry_breaking = false;
        }
        if let Some(m) = self.clique_mode {
            o.clique_mode = match m {
                CliqueModeArg::TwoStage => CliqueMode::TwoStage,
                CliqueModeArg::CapacityAware => CliqueMode::CapacityAware,
            };
        }
        if let Some(c) = self.candidate_cap {
            o.candidate_cap = c;
        }
        if let Some(m) = self.max_iter {
            o.benders.max_iter = m;
        }
        o.benders.aggregate |= self.aggregate_cuts;
        o.root_gap |= self.root_gap;
        if self.no_presolve {
            o.presolve = false;
        }
        Ok(o)
    }
}

/// Generates the instance described by a resolved configuration.
pub fn generate(config: &GenerationConfig, irradiance_csv: Option<&str>) -> anyhow::Result<Instance> {
    let profiles = ReferenceProfiles::synthetic(config.start.year());
    Ok(generate_instance_with_irradiance(config, &profiles, irradiance_csv)?)
}

/// How a successful command ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Completion {
    Done,
    /// A solve stopped at its time limit.
    TimeLimit,
}

impl Completion {
    pub fn exit_code(self) -> i32 {
        match self {
            Completion::Done => 0,
            Completion::TimeLimit => 2,
        }
    }
}

/// Machine-readable error written to stderr on failure.
pub fn error_json(err: &anyhow::Error) -> Value {
    use loopforge_core::Error as E;
    let kind = match err.chain().find_map(|e| e.downcast_ref::<E>()) {
        Some(E::Input(_)) | Some(E::InvalidInstance(_)) | Some(E::Json(_)) | Some(E::Csv(_)) => "input",
        Some(E::Io { .. }) => "io",
        Some(E::Backend(_)) | Some(E::Status { .. }) | Some(E::NoDuals(_)) => "solver",
        Some(E::OracleTooLarge { .. }) | Some(E::TooManyCandidates { .. }) => "limit",
        Some(_) => "internal",
        None if err.chain().any(|e| e.is::<std::io::Error>()) => "io",
        None => "input",
    };
    let mut message = String::new();
    for cause in err.chain().map(|e| e.to_string()) {
        if !message.ends_with(&cause) {
            if !message.is_empty() {
                message.push_str(": ");
            }
            message.push_str(&cause);
        }
    }
    json!({
        "error": {
            "kind": kind,
            "message": message,
        }
    })
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

/// Fails early when an output file could not be created.
fn check_output(path: Option<&Path>) -> anyhow::Result<()> {
    if let Some(p) = path {
        let parent = p
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        if !parent.is_dir() {
            bail!("output directory {} does not exist", parent.display());
        }
    }
    Ok(())
}

fn load_instance(path: &Path) -> anyhow::Result<Instance> {
    Ok(Instance::load(path)?)
}

fn status_name(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Optimal => "optimal",
        RunStatus::TimeLimit => "time_limit",
        RunStatus::IterationLimit => "iteration_limit",
    }
}

/// KPIs of an outcome, carrying its root gap.
pub fn outcome_kpis(instance: &Instance, outcome: &RunOutcome) -> anyhow::Result<Option<KpiReport>> {
    let Some(sol) = &outcome.solution else { return Ok(None) };
    let mut k = compute_kpis(instance, sol)?;
    k.root_gap_percent = outcome.root_gap.filter(|g| g.relative).map(|g| g.gap);
    Ok(Some(k))
}

fn summary(outcome: &RunOutcome, kpis: Option<&KpiReport>) -> Value {
    json!({
        "model": outcome.model.name(),
        "status": status_name(outcome.status),
        "objective": outcome.objective,
        "bound": outcome.bound,
        "solve_seconds": outcome.solve_seconds,
        "total_seconds": outcome.total_seconds,
        "size": outcome.size,
        "subproblem_size": outcome.subproblem_size,
        "candidates": outcome.candidates,
        "iterations": outcome.trace.as_ref().map(|t| t.rows.len()),
        "root_gap": outcome.root_gap,
        "kpis": kpis,
    })
}

fn kpi_text(k: &KpiReport, format: ReportFormat) -> anyhow::Result<String> {
    Ok(match format {
        ReportFormat::Json => k.to_json()?,
        ReportFormat::Csv => k.to_csv()?,
    })
}

fn format_for(path: &Path) -> ReportFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => ReportFormat::Csv,
        _ => ReportFormat::Json,
    }
}

pub fn run(cli: Cli) -> anyhow::Result<Completion> {
    match cli.command {
        Command::Generate(a) => {
            check_output(a.output.as_deref())?;
            let config = ConfigFile::load(a.config.as_deref())?;
            let c = a.generator.resolve(&config, a.seed, a.n, a.days)?;
            let inst = generate(&c, a.generator.irradiance()?.as_deref())?;
            write_output(a.output.as_deref(), &inst.to_json()?)?;
            Ok(Completion::Done)
        }
        Command::Solve(a) => {
            let config = ConfigFile::load(a.config.as_deref())?;
            let options = a.solver.resolve(&config)?;
            for p in [&a.output, &a.kpi_output, &a.trace_output] {
                check_output(p.as_deref())?;
            }
            let inst = load_instance(&a.instance)?;
            let outcome = loopforge_core::solve(a.model, &inst, &options)?;
            let kpis = outcome_kpis(&inst, &outcome)?;
            if let (Some(path), Some(sol)) = (&a.output, &outcome.solution) {
                write_output(Some(path), &sol.to_json()?)?;
            }
            if let (Some(path), Some(k)) = (&a.kpi_output, &kpis) {
                write_output(Some(path), &kpi_text(k, format_for(path))?)?;
            }
            if let (Some(path), Some(trace)) = (&a.trace_output, &outcome.trace) {
                write_output(Some(path), &trace.to_csv())?;
            }
            write_output(None, &serde_json::to_string_pretty(&summary(&outcome, kpis.as_ref()))?)?;
            Ok(match outcome.status {
                RunStatus::Optimal => Completion::Done,
                _ => Completion::TimeLimit,
            })
        }
        Command::Report(a) => {
            check_output(a.output.as_deref())?;
            let inst = load_instance(&a.instance)?;
            let text = fs::read_to_string(&a.solution).with_context(|| format!("reading {}", a.solution.display()))?;
            let sol = DesignSolution::from_json(&text)?;
            let k = compute_kpis(&inst, &sol)?;
            write_output(a.output.as_deref(), &kpi_text(&k, a.format)?)?;
            Ok(Completion::Done)
        }
        Command::ExportLp(a) => {
            let config = ConfigFile::load(a.config.as_deref())?;
            let options = a.solver.resolve(&config)?;
            check_output(Some(&a.output))?;
            let inst = load_instance(&a.instance)?;
            let graph = build_neighbourhood_graph(&inst)?;
            let candidates = candidates_for(a.model, &inst, &graph, &options)?;
            let model = build_model(a.model, &inst, &graph, candidates.as_deref(), &options)?;
            write_output(Some(&a.output), &export_lp(&model))?;
            Ok(Completion::Done)
        }
        Command::Bench(a) => {
            check_output(a.output.as_deref())?;
            check_output(a.gap_output.as_deref())?;
            let config = ConfigFile::load(a.config.as_deref())?;
            for p in &a.presets {
                if !PRESETS.contains(&p.as_str()) {
                    bail!("unknown preset `{p}` (expected one of {})", PRESETS.join(", "));
                }
            }
            let plan = BenchPlan {
                presets: a.presets.clone(),
                sizes: a.n.clone(),
                horizons: a.horizon_days.clone(),
                replicates: a.replicates,
                base_seed: a.seed,
                models: a.models.clone(),
                workers: a.workers.max(1),
            };
            let options = a.solver.resolve(&config)?;
            let irradiance = a.generator.irradiance()?;
            let rows = run_bench(
                &plan,
                &options,
                |preset, n, days, seed| {
                    let flags = GeneratorFlags {
                        preset: Some(preset.to_string()),
                        ..a.generator.clone()
                    };
                    flags.resolve(&config, seed, Some(n), Some(days))
                },
                irradiance.as_deref(),
            )?;
            write_output(a.output.as_deref(), &bench::to_csv(&rows)?)?;
            if let Some(path) = &a.gap_output {
                write_output(Some(path), &bench::gaps_to_csv(&rows)?)?;
            }
            Ok(Completion::Done)
        }
    }
}

/// Parses the arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let err = json!({"error": {"kind": "usage", "message": e.to_string()}});
            eprintln!("{err}");
            return 1;
        }
    };
    match run(cli) {
        Ok(c) => c.exit_code(),
        Err(e) => {
            eprintln!("{}", error_json(&e));
            1
        }
    }
}
