//! Reference training, the per-task learning cycle, inference under both
//! evaluation protocols, parameter accounting and the comparison baselines.

mod baselines;
mod continual;
mod inference;
mod model;

pub use baselines::{complete_isolation, sequential_ft};
pub use continual::{accuracy, run_continual, RunSettings, StreamResult};
pub use inference::{argmax_global, class_il_logits, infer_class_il, infer_task_il, task_logits};
pub use model::{
    count_params, finish_task, learn_task, prepare_task, train_reference, ContinualModel, LayerAllocation,
    LearnOptions, ParamCounts, PendingTask, RankPolicy, ReferenceBackbone, TaskSubnetwork, TrainingMode,
};
