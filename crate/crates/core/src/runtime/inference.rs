use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::net::{forward, ModelView, Phase};

use super::model::{ContinualModel, TaskSubnetwork};

/// Per-row argmax over columns labelled with global class ids; ties go to the lowest id.
pub fn argmax_global(logits: &Matrix, class_ids: &[usize]) -> Result<Vec<usize>> {
    if logits.cols() != class_ids.len() {
        return Err(Error::InvalidShape(format!("{} logit columns for {} classes", logits.cols(), class_ids.len())));
    }
    Ok((0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            let mut best = 0;
            for c in 1..row.len() {
                if row[c] > row[best] || (row[c] == row[best] && class_ids[c] < class_ids[best]) {
                    best = c;
                }
            }
            class_ids[best]
        })
        .collect())
}

fn subnetwork(model: &ContinualModel, task_id: usize) -> Result<&TaskSubnetwork> {
    task_id.checked_sub(1).and_then(|i| model.subnetworks.get(i)).ok_or(Error::UnknownTask(task_id))
}

fn sub_view<'a>(model: &'a ContinualModel, sub: &'a TaskSubnetwork) -> ModelView<'a> {
    let adapters = (!sub.adapters.is_empty()).then_some(&sub.adapters);
    ModelView { net: &model.backbone.network, norms: &sub.norms, head: &sub.head, adapters }
}

/// Raw logits of task `task_id`'s head (1-based) for every row of `x`.
pub fn task_logits(model: &ContinualModel, task_id: usize, x: &Matrix) -> Result<Matrix> {
    let sub = subnetwork(model, task_id)?;
    forward(&sub_view(model, sub), x, Phase::Eval)
}

/// Global class predictions using only the subnetwork of the given task.
pub fn infer_task_il(model: &ContinualModel, x: &Matrix, task_id: usize) -> Result<Vec<usize>> {
    let sub = subnetwork(model, task_id)?;
    let ids: Vec<usize> = sub.head.class_range().collect();
    argmax_global(&forward(&sub_view(model, sub), x, Phase::Eval)?, &ids)
}

/// Every subnetwork's raw logits side by side in task order, with the global class id of each column.
pub fn class_il_logits(model: &ContinualModel, x: &Matrix) -> Result<(Matrix, Vec<usize>)> {
    if model.subnetworks.is_empty() {
        return Err(Error::ModelEmpty);
    }
    let mut blocks = Vec::with_capacity(model.subnetworks.len());
    let mut ids = Vec::new();
    for sub in &model.subnetworks {
        blocks.push(forward(&sub_view(model, sub), x, Phase::Eval)?);
        ids.extend(sub.head.class_range());
    }
    Ok((concat_columns(&blocks), ids))
}

/// Global class predictions from the concatenation of every head's raw logits.
pub fn infer_class_il(model: &ContinualModel, x: &Matrix) -> Result<Vec<usize>> {
    let (logits, ids) = class_il_logits(model, x)?;
    argmax_global(&logits, &ids)
}

pub(crate) fn concat_columns(blocks: &[Matrix]) -> Matrix {
    let rows = blocks[0].rows();
    let cols = blocks.iter().map(Matrix::cols).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for b in blocks {
            data.extend_from_slice(b.row(r));
        }
    }
    Matrix::new(rows, cols, data).expect("blocks share a row count")
}
