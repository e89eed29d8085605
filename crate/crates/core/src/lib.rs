pub mod benders;
pub mod cliques;
pub mod compact;
pub mod error;
pub mod generate;
pub mod geometry;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod run;
pub mod solution;
pub mod solver;

pub use error::{Error, Result};
pub use generate::{generate_instance, GenerationConfig, ReferenceProfiles};
pub use metrics::{compute_kpis, KpiReport};
pub use model::{Actor, Instance, LegalParams, Location, ProfileTag, ScenarioSet, Subscription, TimeGrid};
pub use run::{solve, RunOutcome, RunStatus, SolveOptions};
pub use solution::{check_solution, DesignSolution, ModelKind};
pub use solver::BackendKind;
