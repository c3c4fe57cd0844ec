//! End-to-end orchestration: configuration, the staged run, missing-rate
//! sweeps, objective ablations, saved-run reloading and 2-D projections.

mod config;
mod projection;
mod record;
mod run;
mod store;

pub use config::{resolve_out_dir, DataSource, ExperimentConfig, ImputationMode, OUT_ENV};
pub use projection::{pca_2d, write_projection_csv, Projection};
pub use record::{BankSummary, RunRecord, StageCurves, StageLosses, Variant};
pub use run::{ablate, build_mask, load_dataset, run_experiment, sweep_missing_rate, Run};
pub use store::{evaluate_saved, load_record, load_run, write_curve, Evaluation, LABELS_FILE, MASK_FILE, RECORD_FILE};

/// The missing rates of the standard sweep: 0.3 to 0.9 in steps of 0.1.
pub fn default_etas() -> Vec<f64> {
    (3..=9).map(|i| i as f64 / 10.0).collect()
}
