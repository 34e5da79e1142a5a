//! The four training procedures, checkpointing and the metrics log.

mod checkpoint;
mod config;
mod metrics;
mod run;
mod steps;

pub use checkpoint::{Checkpoint, CheckpointMeta, EpochSummary, ModelKind, FORMAT_VERSION, IDENTITY_ORACLE};
pub use config::{MethodConfig, OptimizerConfig};
pub use metrics::{format_metrics, parse_metrics, read_metrics, write_metrics, MetricsWriter, StepRecord};
pub use run::{
    epoch_checkpoint_path, resume_trainer, run_training, snapshot, RunOptions, RunOutcome, CHECKPOINT_DIR,
    CONFIG_FILE, FAILURE_CHECKPOINT, FINAL_CHECKPOINT, METRICS_FILE,
};
pub use steps::{
    Batch, LossRecord, SubStepAudit, Trainer, SUBSTEP_D_CONTENT, SUBSTEP_D_POSE, SUBSTEP_GENERATOR,
    SUBSTEP_POSE_CODE, SUBSTEP_RECONSTRUCTION, SUBSTEP_SCENE, SUBSTEP_TRIPLET,
};
