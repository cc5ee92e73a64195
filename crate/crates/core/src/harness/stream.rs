use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TaskData};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::seed;

/// Minimum samples per class in each split.
pub const MIN_SAMPLES_PER_SPLIT: usize = 10;

/// Ordered tasks with disjoint class ranges that together cover `0..num_classes()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStream {
    pub tasks: Vec<TaskData>,
    /// Original label of each global class id, when the stream came from a file.
    pub original_labels: Option<Vec<i64>>,
}

impl TaskStream {
    pub fn new(tasks: Vec<TaskData>) -> Result<Self> {
        let s = Self { tasks, original_labels: None };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.tasks.first().ok_or(Error::InsufficientTasks { needed: 1, got: 0 })?;
        let dim = first.feature_dim();
        let mut next = 0;
        for (t, task) in self.tasks.iter().enumerate() {
            let id = t + 1;
            if task.class_start != next {
                return Err(Error::InvalidSplit(format!(
                    "task {id} starts at class {} instead of {next}",
                    task.class_start
                )));
            }
            if task.num_classes < 2 {
                return Err(Error::InvalidSplit(format!("task {id} has fewer than two classes")));
            }
            for (name, split) in [("train", &task.train), ("test", &task.test)] {
                if split.feature_dim() != dim {
                    return Err(Error::InvalidShape(format!(
                        "task {id} {name} split has dimension {}",
                        split.feature_dim()
                    )));
                }
                let mut counts = vec![0usize; task.num_classes];
                for &l in &split.labels {
                    *counts.get_mut(l).ok_or(Error::InvalidLabel { label: l, classes: task.num_classes })? += 1;
                }
                if let Some(c) = counts.iter().position(|&n| n < MIN_SAMPLES_PER_SPLIT) {
                    return Err(Error::InvalidSplit(format!(
                        "task {id} class {c} has {} {name} samples, need {MIN_SAMPLES_PER_SPLIT}",
                        counts[c]
                    )));
                }
            }
            next += task.num_classes;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.tasks[0].feature_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.tasks.iter().map(|t| t.num_classes).sum()
    }
}

/// Shape of a synthetic Gaussian-blob stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub num_tasks: usize,
    pub classes_per_task: usize,
    /// Samples drawn per class before the 80/20 train/test split.
    pub samples_per_class: usize,
    pub feature_dim: usize,
    /// Distance of every class center from the origin.
    pub separation: f64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self { num_tasks: 5, classes_per_task: 4, samples_per_class: 250, feature_dim: 16, separation: 6.0 }
    }
}

impl BlobSpec {
    fn test_per_class(&self) -> usize {
        self.samples_per_class / 5
    }

    fn validate(&self) -> Result<()> {
        if self.num_tasks == 0 || self.classes_per_task == 0 || self.feature_dim == 0 {
            return Err(Error::InvalidConfig("blob stream counts must be positive".into()));
        }
        if self.classes_per_task < 2 {
            return Err(Error::InvalidConfig("each task needs at least two classes".into()));
        }
        let test = self.test_per_class();
        if test < MIN_SAMPLES_PER_SPLIT || self.samples_per_class - test < MIN_SAMPLES_PER_SPLIT {
            return Err(Error::InvalidConfig(format!(
                "{} samples per class leaves fewer than {MIN_SAMPLES_PER_SPLIT} in a split",
                self.samples_per_class
            )));
        }
        if !(self.separation.is_finite() && self.separation > 0.0) {
            return Err(Error::InvalidConfig("class separation must be positive".into()));
        }
        Ok(())
    }
}

fn blob_task(spec: &BlobSpec, class_start: usize, rng: &mut ChaCha8Rng) -> Result<TaskData> {
    let d = spec.feature_dim;
    let n_test = spec.test_per_class();
    let n_train = spec.samples_per_class - n_test;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    let (mut train_y, mut test_y) = (Vec::new(), Vec::new());
    for class in 0..spec.classes_per_task {
        // center: uniform direction on the sphere of radius `separation`
        let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let center: Vec<f64> = dir.iter().map(|v| spec.separation * v / norm).collect();
        for i in 0..spec.samples_per_class {
            let (xs, ys) = if i < n_train { (&mut train, &mut train_y) } else { (&mut test, &mut test_y) };
            xs.extend(center.iter().map(|c| c + rng.sample::<f64, _>(StandardNormal)));
            ys.push(class);
        }
    }
    Ok(TaskData {
        class_start,
        num_classes: spec.classes_per_task,
        train: Dataset::new(Matrix::new(train_y.len(), d, train)?, train_y)?,
        test: Dataset::new(Matrix::new(test_y.len(), d, test)?, test_y)?,
    })
}

/// Each class is a unit-variance isotropic Gaussian around a random center at distance
/// `separation` from the origin. Deterministic per seed.
pub fn generate_blob_stream(seed: u64, spec: &BlobSpec) -> Result<TaskStream> {
    spec.validate()?;
    let tasks = (0..spec.num_tasks)
        .map(|t| blob_task(spec, t * spec.classes_per_task, &mut seed::rng(seed, "blob-task", t as u64)))
        .collect::<Result<Vec<_>>>()?;
    TaskStream::new(tasks)
}

/// A separate blob task for pretraining the backbone; its labels live in their own space.
pub fn generate_reference_task(seed: u64, spec: &BlobSpec) -> Result<TaskData> {
    spec.validate()?;
    blob_task(spec, 0, &mut seed::rng(seed, "blob-reference", 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_and_determinism() {
        let spec =
            BlobSpec { num_tasks: 5, classes_per_task: 4, samples_per_class: 50, feature_dim: 3, separation: 4.0 };
        let s = generate_blob_stream(1, &spec).unwrap();
        assert_eq!(s.num_classes(), 20);
        let ranges: Vec<_> = s.tasks.iter().map(TaskData::class_range).collect();
        assert_eq!(ranges, vec![0..4, 4..8, 8..12, 12..16, 16..20]);
        assert_eq!((s.tasks[0].train.len(), s.tasks[0].test.len()), (160, 40));
        assert_eq!(s, generate_blob_stream(1, &spec).unwrap());
        assert_ne!(s, generate_blob_stream(2, &spec).unwrap());
    }

    #[test]
    fn invalid_specs() {
        let ok = BlobSpec::default();
        for bad in [
            BlobSpec { num_tasks: 0, ..ok },
            BlobSpec { classes_per_task: 1, ..ok },
            BlobSpec { samples_per_class: 40, ..ok },
            BlobSpec { separation: 0.0, ..ok },
        ] {
            assert!(matches!(generate_blob_stream(0, &bad), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn stream_validation_catches_gaps() {
        let mut s = generate_blob_stream(0, &BlobSpec { num_tasks: 2, ..BlobSpec::default() }).unwrap();
        s.tasks[1].class_start = 5;
        assert!(matches!(s.validate(), Err(Error::InvalidSplit(_))));
    }
}
