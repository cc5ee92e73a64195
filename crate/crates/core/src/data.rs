//! Labelled datasets and per-task splits shared by training and evaluation.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Feature rows with labels local to a task (`0..num_classes`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::InvalidShape(format!("{} feature rows but {} labels", features.rows(), labels.len())));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Rows at `indices`, in that order.
    pub fn gather(&self, indices: &[usize]) -> (Matrix, Vec<usize>) {
        let d = self.feature_dim();
        let x = Matrix::from_fn(indices.len(), d, |r, c| self.features[(indices[r], c)]);
        let y = indices.iter().map(|&i| self.labels[i]).collect();
        (x, y)
    }

    /// Same rows with every label shifted by `offset`.
    pub fn with_label_offset(&self, offset: usize) -> Self {
        Self { features: self.features.clone(), labels: self.labels.iter().map(|l| l + offset).collect() }
    }
}

/// One task of a continual stream: a contiguous global class range and its splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskData {
    /// First global class id.
    pub class_start: usize,
    pub num_classes: usize,
    pub train: Dataset,
    pub test: Dataset,
}

impl TaskData {
    pub fn class_range(&self) -> Range<usize> {
        self.class_start..self.class_start + self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.train.feature_dim()
    }
}
