//! Multi-criteria ranking of candidate models.
//!
//! The pipeline follows the usual decision-analysis steps: define the
//! criteria tree, screen alternatives with knock-out rules, weight criteria
//! from pairwise judgments ([`ahp`]), score with a weighted sum
//! ([`scoring`]) and probe the ranking with weight perturbations
//! ([`sensitivity`]).
//!
//! Batch work (scoring alternatives, sweep points, Monte Carlo samples) runs
//! on rayon when the default `parallel` feature is enabled.

pub mod ahp;
pub mod data;
pub mod io;
pub mod model;
pub mod par;
pub mod report;
pub mod scoring;
pub mod sensitivity;

pub use ahp::{
    aggregate_judgments, aggregate_priorities, consistency, priorities_eigen, priorities_geometric, ConsistencyReport,
    PairwiseMatrix, PriorityVector, StakeholderJudgment,
};
pub use io::{load_metrics_csv, load_scenario, LoadedScenario, MetricsTable, ScenarioDocument};
pub use model::{apply_knockouts, map_categorical, validate_problem, DecisionProblem, Screening};
pub use par::Execution;
pub use report::{export_report, ReportFormat};
pub use scoring::{composite_quality, entropy_weights, rank, total_scores, ScoreBreakdown};
pub use sensitivity::{oat_sweep, random_weight_sampling, reweight, stability_interval, SensitivityResult};
