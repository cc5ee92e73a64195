//! Dynamic rank allocation: task vectors, proximity threshold, rank
//! selection from cumulative explained variance, and adapter construction.

mod lora;
mod rank;
mod threshold;

pub use lora::{init_lora, reinitialize, reinitialize_adapter, LoraAdapter, LoraInit};
pub use rank::{select_rank, RankSelection};
pub use threshold::{dynamic_threshold, task_vector, threshold_for_layer, DynamicThreshold, TaskVector, ThresholdMode};
