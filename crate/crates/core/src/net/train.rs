use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forward::{backward, AdapterSet, BatchStats, ModelView, Phase, TrainScope};
use super::network::{ClassifierHead, Network, NormLayer, NormParams};
use super::optim::{OptimizerKind, OptimizerState};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Momentum for running normalization statistics.
pub const NORM_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Half-cosine decay from the base rate to zero across the phase.
    Cosine,
}

impl LrSchedule {
    pub fn rate(self, base: f64, epoch: usize, epochs: usize) -> f64 {
        match self {
            Self::Constant => base,
            Self::Cosine => 0.5 * base * (1.0 + (std::f64::consts::PI * epoch as f64 / epochs as f64).cos()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Full fine-tune epochs before task-vector extraction.
    pub e1_epochs: usize,
    /// Adapter/norm/head epochs with the backbone frozen.
    pub e2_epochs: usize,
    /// Epochs for training a backbone from scratch (reference task and full-network baselines).
    pub reference_epochs: usize,
    pub learning_rate_e1: f64,
    pub learning_rate_e2: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub lr_schedule: LrSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            e1_epochs: 15,
            e2_epochs: 50,
            reference_epochs: 65,
            learning_rate_e1: 0.01,
            learning_rate_e2: 0.01,
            batch_size: 32,
            optimizer: OptimizerKind::Sgd,
            seed: 0,
            lr_schedule: LrSchedule::Constant,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("e1_epochs", self.e1_epochs),
            ("e2_epochs", self.e2_epochs),
            ("reference_epochs", self.reference_epochs),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        for (name, lr) in [("learning_rate_e1", self.learning_rate_e1), ("learning_rate_e2", self.learning_rate_e2)] {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

pub enum Backbone<'a> {
    Trainable(&'a mut Network),
    Frozen(&'a Network),
}

/// Mutable handles to the parameters a training phase may touch.
pub struct Trainee<'a> {
    pub backbone: Backbone<'a>,
    pub norms: &'a mut NormParams,
    pub head: &'a mut ClassifierHead,
    pub adapters: Option<&'a mut AdapterSet>,
}

impl<'a> Trainee<'a> {
    /// Consumes the handles; same order as [`Trainee::tensors_mut`].
    pub fn into_tensors(self) -> Vec<&'a mut [f64]> {
        let mut out: Vec<&'a mut [f64]> = Vec::new();
        if let Backbone::Trainable(net) = self.backbone {
            for l in &mut net.layers {
                out.push(l.weight.as_mut_slice());
                out.push(&mut l.bias);
            }
        }
        for n in &mut self.norms.layers {
            out.push(&mut n.scale);
            out.push(&mut n.shift);
        }
        if let Some(adapters) = self.adapters {
            for a in adapters.values_mut() {
                out.push(a.b.as_mut_slice());
                out.push(a.a.as_mut_slice());
            }
        }
        out.push(self.head.weight.as_mut_slice());
        out.push(&mut self.head.bias);
        out
    }
}

impl Trainee<'_> {
    pub fn scope(&self) -> TrainScope {
        match self.backbone {
            Backbone::Trainable(_) => TrainScope::Full,
            Backbone::Frozen(_) => TrainScope::AdaptersOnly,
        }
    }

    pub fn view(&self) -> ModelView<'_> {
        let net: &Network = match &self.backbone {
            Backbone::Trainable(n) => n,
            Backbone::Frozen(n) => n,
        };
        ModelView { net, norms: self.norms, head: self.head, adapters: self.adapters.as_deref() }
    }

    /// Trainable tensors in the order produced by [`super::Gradients::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let backbone = match &mut self.backbone {
            Backbone::Trainable(n) => Backbone::Trainable(n),
            Backbone::Frozen(n) => Backbone::Frozen(n),
        };
        Trainee { backbone, norms: self.norms, head: self.head, adapters: self.adapters.as_deref_mut() }.into_tensors()
    }
}

/// Mini-batch training with cross-entropy; returns the mean loss of each epoch.
pub fn fit(
    trainee: &mut Trainee<'_>,
    data: &Dataset,
    epochs: usize,
    base_lr: f64,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let scope = trainee.scope();
    let lens: Vec<usize> = trainee.tensors_mut().iter().map(|t| t.len()).collect();
    let mut opt = OptimizerState::new(cfg.optimizer, &lens);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(epochs);

    for epoch in 0..epochs {
        let lr = cfg.lr_schedule.rate(base_lr, epoch, epochs);
        order.shuffle(rng);
        let mut total = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            // a single-sample batch has no usable batch statistics
            if chunk.len() < 2 && data.len() > 1 {
                continue;
            }
            let (x, y) = data.gather(chunk);
            let out = backward(&trainee.view(), &x, &y, Phase::Train, scope)?;
            total += out.loss * chunk.len() as f64;
            seen += chunk.len();
            {
                let grads = out.grads.tensors(scope);
                let mut params = trainee.tensors_mut();
                opt.step(&mut params, &grads, lr)?;
            }
            for (norm, stats) in trainee.norms.layers.iter_mut().zip(&out.batch_stats) {
                update_running(norm, stats);
            }
        }
        history.push(total / seen.max(1) as f64);
    }
    Ok(history)
}

fn update_running(norm: &mut NormLayer, stats: &BatchStats) {
    let n = stats.count as f64;
    let correction = if stats.count > 1 { n / (n - 1.0) } else { 1.0 };
    for c in 0..stats.mean.len() {
        norm.running_mean[c] = (1.0 - NORM_MOMENTUM) * norm.running_mean[c] + NORM_MOMENTUM * stats.mean[c];
        norm.running_var[c] = (1.0 - NORM_MOMENTUM) * norm.running_var[c] + NORM_MOMENTUM * stats.var[c] * correction;
    }
}
