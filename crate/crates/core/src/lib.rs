//! Dynamic-rank low-rank adapters for rehearsal-free continual learning.
//!
//! Each new task fine-tunes a copy of a frozen reference backbone for a few
//! epochs, measures how far every target layer moved (the task vector), and
//! allocates a LoRA adapter whose rank is the number of leading singular
//! values needed to explain a proximity-driven share of that movement. The
//! adapter, per-task normalization and a task head are then trained with the
//! backbone frozen, so earlier tasks are never disturbed.
//!
//! Module map:
//!
//! - [`linalg`]: dense matrices, one-sided Jacobi SVD, truncation, tensor flattening
//! - [`net`]: MLP/CNN backbone with exact gradients, SGD/Adam, LoRA-augmented forward
//! - [`adapt`]: task vectors, dynamic threshold, rank selection, adapter construction
//! - [`runtime`]: reference training, per-task learning, Class-IL/Task-IL inference
//! - [`metrics`]: accuracy-matrix metrics (A_T, average accuracy, FFM, CFM, S/P)
//! - [`harness`]: task streams, experiment configs, baselines, run records, reports

pub mod adapt;
pub mod data;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod net;
pub mod runtime;
pub mod seed;

pub use error::{Error, Result};
