//! Learning/unlearning orchestration, metrics, checkpoints and the
//! fine-tuning baseline.

mod checkpoint;
mod experiment;
mod metrics;
mod objective;
mod schedule;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint,
    CheckpointMeta, SchedulePosition, FORMAT_VERSION, MAGIC,
};
pub use experiment::{
    assign_for_turn, optimal_checkpoint_name, pretrain, run_baseline, run_experiment, train_epoch,
    BaselineConfig, FinetuneOn, ForgetLayers, RunOptions, RunOutput, LAST_GOOD_CHECKPOINT,
};
pub use metrics::{MetricsLog, MetricsRecord, Phase, CSV_HEADER};
pub use objective::{
    check_optimal, objective, optimal_points_csv, OptimalCriterion, OptimalPoint,
    OPTIMAL_CSV_HEADER,
};
pub use schedule::{Schedule, UnlearnData};
