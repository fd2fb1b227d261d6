//! The sequential query loop, its metrics and multi-run suites.

mod expert;
mod metrics;
mod record;
mod runner;
mod suite;

pub use expert::{Expert, SyntheticExpert};
pub use metrics::{apprentice_policy, regret, target_distribution};
pub use record::{read_metrics_csv, RunRecord, StepDiagnostics, StepRow};
pub use runner::{acquire, candidates_for, run_active_learning, run_with_expert, Acquired};
pub use suite::{run_suite, summarize, SuiteResult, SummaryRow};
