use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, Matrix};

/// Element-wise difference between fine-tuned and reference weights of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskVector {
    pub layer_id: usize,
    pub delta: Matrix,
}

pub fn task_vector(layer_id: usize, fine_tuned: &Matrix, reference: &Matrix) -> Result<TaskVector> {
    Ok(TaskVector { layer_id, delta: fine_tuned.sub(reference)? })
}

/// Normalized squared distance between current-task and reference weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicThreshold {
    /// `Σ(Δ∘Δ) / (Σ(Wᵗ∘Wᵗ) + Σ(Wʳ∘Wʳ))`, unclamped.
    pub raw_value: f64,
    /// `raw_value` clamped to `[0, 1]`.
    pub clamped_value: f64,
    /// Whether `Σ(Wᵗ∘Wʳ) ≥ 0`; when true the raw value is already within `[0, 1]`.
    pub inner_product_nonneg: bool,
}

pub fn dynamic_threshold(fine_tuned: &Matrix, reference: &Matrix) -> Result<DynamicThreshold> {
    let delta = fine_tuned.sub(reference)?;
    let ref_sq = frobenius_sq(reference);
    if ref_sq == 0.0 {
        return Err(Error::DegenerateReference);
    }
    let raw_value = frobenius_sq(&delta) / (frobenius_sq(fine_tuned) + ref_sq);
    let inner_product_nonneg = fine_tuned.inner(reference)? >= 0.0;
    // The quotient can round a hair past 1 even when the inner product is non-negative.
    let raw_value = if inner_product_nonneg { raw_value.min(1.0) } else { raw_value };
    Ok(DynamicThreshold { raw_value, clamped_value: raw_value.clamp(0.0, 1.0), inner_product_nonneg })
}

/// How the rank-selection cutoff is derived from per-layer thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Each layer uses its own threshold.
    #[default]
    PerLayer,
    /// Every layer uses the mean threshold across all target layers of the task.
    MeanAcrossLayers,
}

pub fn threshold_for_layer(
    layer: &DynamicThreshold,
    mode: ThresholdMode,
    all_layers: &[DynamicThreshold],
) -> Result<f64> {
    match mode {
        ThresholdMode::PerLayer => Ok(layer.clamped_value),
        ThresholdMode::MeanAcrossLayers => {
            if all_layers.is_empty() {
                return Err(Error::InvalidInput("mean threshold over zero layers".into()));
            }
            Ok(all_layers.iter().map(|t| t.clamped_value).sum::<f64>() / all_layers.len() as f64)
        }
    }
}
