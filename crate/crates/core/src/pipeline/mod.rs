//! End-to-end orchestration: run configuration, stages, baselines, the
//! brute-force policy oracle, sweeps, and report output.

mod config;
mod oracle;
mod report;
mod run;
mod study;
mod sweeps;

pub use config::{GeneratorConfig, PolicySource, RunConfig};
pub use oracle::{brute_force_oracle, expected_reward, OraclePolicy, OracleQueryResult};
pub use report::{RunReport, StageArtifacts};
pub use run::{
    actor_config_for, default_policy_queries, evaluate_classifier, resolve_data, run_baseline,
    run_full, train_final_classifier, transfer_policy, write_policy_csv, PolicyEngine, PreparedData,
    TransferReport,
};
pub use study::{label_study_run, write_study_csv};
pub use sweeps::{
    spearman, sweep_actor_depth, sweep_folds, write_curves_csv, CurvePoint, CurveReport,
};
