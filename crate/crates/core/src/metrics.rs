//! Accuracy-matrix summaries: final and average accuracy, forgetting, stability and plasticity.
//!
//! Tasks and stages are 1-based throughout, matching `A[i][t]` = accuracy on task `i`
//! after learning task `t`. Only `i ≤ t` exists.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runtime::ParamCounts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    ClassIl,
    TaskIl,
}

/// Lower-triangular accuracy grid stored stage by stage: `stages[t-1][i-1] = A[i][t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    pub mode: EvalMode,
    stages: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new(mode: EvalMode) -> Self {
        Self { mode, stages: Vec::new() }
    }

    pub fn from_stages(mode: EvalMode, stages: Vec<Vec<f64>>) -> Result<Self> {
        let mut m = Self::new(mode);
        for row in stages {
            m.push_stage(row)?;
        }
        Ok(m)
    }

    /// Appends the accuracies on tasks `1..=t` measured after learning task `t`.
    pub fn push_stage(&mut self, accuracies: Vec<f64>) -> Result<()> {
        let t = self.stages.len() + 1;
        if accuracies.len() != t {
            return Err(Error::InvalidInput(format!("stage {t} needs {t} entries, got {}", accuracies.len())));
        }
        if let Some(bad) = accuracies.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::InvalidInput(format!("accuracy {bad} outside [0, 1]")));
        }
        self.stages.push(accuracies);
        Ok(())
    }

    pub fn num_tasks(&self) -> usize {
        self.stages.len()
    }

    pub fn stages(&self) -> &[Vec<f64>] {
        &self.stages
    }

    /// `A[i][t]`, 1-based; `None` when `i > t` or out of range.
    pub fn get(&self, task: usize, stage: usize) -> Option<f64> {
        if task == 0 || task > stage {
            return None;
        }
        self.stages.get(stage - 1).map(|row| row[task - 1])
    }

    fn at(&self, task: usize, stage: usize) -> f64 {
        self.stages[stage - 1][task - 1]
    }

    fn require(&self, needed: usize) -> Result<usize> {
        let got = self.stages.len();
        if got == 0 && needed <= 1 {
            return Err(Error::InvalidInput("empty accuracy matrix".into()));
        }
        if got < needed {
            return Err(Error::InsufficientTasks { needed, got });
        }
        Ok(got)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// `(A_T, Ā)`: mean accuracy after the last stage, and the mean over stages of
/// each stage's mean accuracy.
pub fn final_and_average(m: &AccuracyMatrix) -> Result<(f64, f64)> {
    let t_max = m.require(1)?;
    let stage_mean = |t: usize| mean((1..=t).map(|i| m.at(i, t)));
    Ok((stage_mean(t_max), mean((1..=t_max).map(stage_mean))))
}

/// Mean drop from each earlier task's first accuracy to its final accuracy.
pub fn forgetting_simple(m: &AccuracyMatrix) -> Result<f64> {
    let t_max = m.require(2)?;
    Ok(mean((1..t_max).map(|i| m.at(i, i) - m.at(i, t_max))))
}

/// Largest historical drop `max_{i ≤ t < j} A[i][t] − A[i][j]` for one task at stage `j`.
fn drop_at(m: &AccuracyMatrix, task: usize, stage: usize) -> f64 {
    let now = m.at(task, stage);
    (task..stage).map(|t| m.at(task, t) - now).fold(f64::NEG_INFINITY, f64::max)
}

/// Final forgetting measure: mean over earlier tasks of the worst drop seen at the final stage.
pub fn ffm(m: &AccuracyMatrix) -> Result<f64> {
    let t_max = m.require(2)?;
    Ok(mean((1..t_max).map(|i| drop_at(m, i, t_max))))
}

/// Cumulative forgetting measure.
///
/// With `per_step = false` the double sum over stages `j = 2..T` and tasks `i < j` is
/// scaled by `1/(T−1)²`. With `per_step = true` each stage's inner sum is scaled by
/// `1/(j−1)` and the stage average by `1/(T−1)`.
pub fn cfm(m: &AccuracyMatrix, per_step: bool) -> Result<f64> {
    let t_max = m.require(2)?;
    let steps = (t_max - 1) as f64;
    let mut total = 0.0;
    for j in 2..=t_max {
        let inner: f64 = (1..j).map(|i| drop_at(m, i, j)).sum();
        total += if per_step { inner / (j - 1) as f64 } else { inner };
    }
    Ok(if per_step { total / steps } else { total / (steps * steps) })
}

/// `(S, P, trade-off)` where `S` is the mean final accuracy on earlier tasks, `P` the mean
/// accuracy right after learning each task, and the trade-off their harmonic combination.
pub fn stability_plasticity(m: &AccuracyMatrix) -> Result<(f64, f64, f64)> {
    let t_max = m.require(2)?;
    let s = mean((1..t_max).map(|i| m.at(i, t_max)));
    let p = mean((1..=t_max).map(|i| m.at(i, i)));
    let tradeoff = if s + p == 0.0 { 0.0 } else { 2.0 * s * p / (s + p) };
    Ok((s, p, tradeoff))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: EvalMode,
    pub a_final: f64,
    pub a_avg: f64,
    pub forgetting_simple: f64,
    pub ffm: f64,
    pub cfm: f64,
    pub cfm_per_step: f64,
    pub stability: f64,
    pub plasticity: f64,
    pub tradeoff: f64,
    pub param_counts: ParamCounts,
}

impl MetricsReport {
    /// Every summary for a matrix with at least two tasks.
    pub fn compute(m: &AccuracyMatrix, param_counts: ParamCounts) -> Result<Self> {
        let (a_final, a_avg) = final_and_average(m)?;
        let (stability, plasticity, tradeoff) = stability_plasticity(m)?;
        Ok(Self {
            mode: m.mode,
            a_final,
            a_avg,
            forgetting_simple: forgetting_simple(m)?,
            ffm: ffm(m)?,
            cfm: cfm(m, false)?,
            cfm_per_step: cfm(m, true)?,
            stability,
            plasticity,
            tradeoff,
            param_counts,
        })
    }
}
