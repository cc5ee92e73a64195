use serde::{Deserialize, Serialize};

use crate::adapt::{
    dynamic_threshold, init_lora, reinitialize, select_rank, task_vector, threshold_for_layer, DynamicThreshold,
    LoraInit, ThresholdMode,
};
use crate::data::{Dataset, TaskData};
use crate::error::{Error, Result};
use crate::linalg::svd;
use crate::net::{fit, AdapterSet, Backbone, ClassifierHead, Network, NetworkSpec, NormParams, TrainConfig, Trainee};
use crate::seed;

/// Frozen feature extractor shared by every task, with the normalization state and head
/// it was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBackbone {
    pub network: Network,
    pub norms: NormParams,
    pub head: ClassifierHead,
    pub trained: bool,
}

impl ReferenceBackbone {
    /// Fingerprint over every weight; stable once training has finished.
    pub fn checksum(&self) -> u64 {
        let parts = [self.network.fingerprint(), self.norms.fingerprint(), self.head.fingerprint()];
        parts.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, p| (h ^ p).wrapping_mul(0x100_0000_01b3))
    }

    pub fn param_count(&self) -> usize {
        self.network.param_count() + self.norms.param_count() + self.head.param_count()
    }
}

/// Builds and trains a backbone from scratch on one task with the full network trainable.
///
/// The head covers `data.class_range()`. Epochs and learning rate come from
/// `reference_epochs` and `learning_rate_e1`.
pub fn train_reference(spec: &NetworkSpec, data: &TaskData, cfg: &TrainConfig) -> Result<ReferenceBackbone> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut init_rng = seed::rng(cfg.seed, "reference-init", 0);
    let mut network = Network::init(spec, &mut init_rng)?;
    let mut norms = NormParams::fresh(&network);
    let mut head = ClassifierHead::init(data.num_classes, network.feature_dim(), data.class_start, &mut init_rng);
    let mut trainee =
        Trainee { backbone: Backbone::Trainable(&mut network), norms: &mut norms, head: &mut head, adapters: None };
    fit(
        &mut trainee,
        &data.train,
        cfg.reference_epochs,
        cfg.learning_rate_e1,
        cfg,
        &mut seed::rng(cfg.seed, "reference-fit", 0),
    )?;
    Ok(ReferenceBackbone { network, norms, head, trained: true })
}

/// What was measured and chosen for one target layer of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerAllocation {
    pub layer_id: usize,
    pub threshold: DynamicThreshold,
    /// Cutoff actually used for rank selection.
    pub t_mu: f64,
    pub rank: usize,
    pub full_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSubnetwork {
    /// 1-based.
    pub task_id: usize,
    pub adapters: AdapterSet,
    pub norms: NormParams,
    pub head: ClassifierHead,
    pub frozen: bool,
    /// True for the task whose data trained the reference backbone; its norms and
    /// head are the reference ones and it owns no extra parameters.
    pub is_reference: bool,
    pub allocations: Vec<LayerAllocation>,
}

impl TaskSubnetwork {
    /// Parameters owned by this task alone.
    pub fn param_count(&self) -> usize {
        if self.is_reference {
            return 0;
        }
        self.adapters.values().map(|a| a.param_count()).sum::<usize>()
            + self.norms.param_count()
            + self.head.param_count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    /// A separate reference task trains the backbone; every stream task gets adapters.
    WithPretraining,
    /// The first stream task trains the backbone and keeps the reference head.
    #[default]
    WithoutPretraining,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinualModel {
    pub backbone: ReferenceBackbone,
    pub subnetworks: Vec<TaskSubnetwork>,
    pub mode: TrainingMode,
}

impl ContinualModel {
    pub fn new(backbone: ReferenceBackbone, mode: TrainingMode) -> Self {
        Self { backbone, subnetworks: Vec::new(), mode }
    }

    /// Registers the reference task as task 1 (the without-pretraining flow).
    pub fn adopt_reference_task(&mut self) -> Result<&TaskSubnetwork> {
        if !self.subnetworks.is_empty() {
            return Err(Error::InvalidState("reference task must be the first task".into()));
        }
        if !self.backbone.trained {
            return Err(Error::ReferenceNotTrained);
        }
        self.subnetworks.push(TaskSubnetwork {
            task_id: 1,
            adapters: AdapterSet::new(),
            norms: self.backbone.norms.clone(),
            head: self.backbone.head.clone(),
            frozen: true,
            is_reference: true,
            allocations: Vec::new(),
        });
        Ok(&self.subnetworks[0])
    }
}

/// How ranks are chosen for new adapters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankPolicy {
    Dynamic(ThresholdMode),
    /// Fixed rank, clamped to each layer's full rank.
    Static(usize),
}

impl Default for RankPolicy {
    fn default() -> Self {
        Self::Dynamic(ThresholdMode::PerLayer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnOptions {
    pub rank_policy: RankPolicy,
    /// Re-draw adapters, norms and head before the adapter phase.
    pub reinit: bool,
    pub lora_init: LoraInit,
}

impl Default for LearnOptions {
    fn default() -> Self {
        Self { rank_policy: RankPolicy::default(), reinit: true, lora_init: LoraInit::default() }
    }
}

/// A task after fine-tuning and rank allocation, before adapter training.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingTask {
    pub task_id: usize,
    pub adapters: AdapterSet,
    pub norms: NormParams,
    pub head: ClassifierHead,
    pub allocations: Vec<LayerAllocation>,
}

impl PendingTask {
    pub fn view<'a>(&'a self, net: &'a Network) -> crate::net::ModelView<'a> {
        crate::net::ModelView { net, norms: &self.norms, head: &self.head, adapters: Some(&self.adapters) }
    }
}

fn check_task(model: &ContinualModel, data: &TaskData) -> Result<()> {
    if !model.backbone.trained {
        return Err(Error::ReferenceNotTrained);
    }
    if data.train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let range = data.class_range();
    for sub in &model.subnetworks {
        let other = sub.head.class_range();
        if range.start < other.end && other.start < range.end {
            return Err(Error::ClassCollision { start: range.start, end: range.end });
        }
    }
    Ok(())
}

/// Fine-tunes a full copy of the backbone, extracts task vectors and builds adapters.
/// The fine-tuned copy is dropped on return.
pub fn prepare_task(
    model: &ContinualModel,
    data: &TaskData,
    cfg: &TrainConfig,
    opts: &LearnOptions,
) -> Result<PendingTask> {
    cfg.validate()?;
    check_task(model, data)?;
    if let RankPolicy::Static(0) = opts.rank_policy {
        return Err(Error::InvalidConfig("static rank must be at least 1".into()));
    }
    let task_id = model.subnetworks.len() + 1;
    let tid = task_id as u64;
    let reference = &model.backbone.network;

    let mut tuned = reference.clone();
    let mut norms = model.backbone.norms.clone();
    let mut head = ClassifierHead::init(
        data.num_classes,
        reference.feature_dim(),
        data.class_start,
        &mut seed::rng(cfg.seed, "head", tid),
    );
    let mut trainee =
        Trainee { backbone: Backbone::Trainable(&mut tuned), norms: &mut norms, head: &mut head, adapters: None };
    fit(&mut trainee, &data.train, cfg.e1_epochs, cfg.learning_rate_e1, cfg, &mut seed::rng(cfg.seed, "e1", tid))?;

    let targets = &reference.target_layers;
    let mut thresholds = Vec::with_capacity(targets.len());
    for &l in targets {
        thresholds.push(dynamic_threshold(&tuned.layers[l].weight, &reference.layers[l].weight)?);
    }
    let mode = match opts.rank_policy {
        RankPolicy::Dynamic(mode) => mode,
        RankPolicy::Static(_) => ThresholdMode::PerLayer,
    };

    let mut adapters = AdapterSet::new();
    let mut allocations = Vec::with_capacity(targets.len());
    for (&l, threshold) in targets.iter().zip(&thresholds) {
        let tv = task_vector(l, &tuned.layers[l].weight, &reference.layers[l].weight)?;
        let f = svd(&tv.delta)?;
        let t_mu = threshold_for_layer(threshold, mode, &thresholds)?;
        let rank = match opts.rank_policy {
            RankPolicy::Dynamic(_) => select_rank(&f.sigma, t_mu)?.k,
            RankPolicy::Static(r) => r.min(f.full_rank),
        };
        adapters.insert(l, init_lora(&f, rank, l, opts.lora_init)?);
        allocations.push(LayerAllocation { layer_id: l, threshold: *threshold, t_mu, rank, full_rank: f.full_rank });
    }

    if opts.reinit {
        reinitialize(&mut adapters, &mut head, &mut norms, &mut seed::rng(cfg.seed, "reinit", tid));
    }
    Ok(PendingTask { task_id, adapters, norms, head, allocations })
}

/// Trains adapters, norms and head with the backbone frozen, then freezes and appends the task.
pub fn finish_task<'m>(
    model: &'m mut ContinualModel,
    mut pending: PendingTask,
    train: &Dataset,
    cfg: &TrainConfig,
) -> Result<&'m TaskSubnetwork> {
    if pending.task_id != model.subnetworks.len() + 1 {
        return Err(Error::InvalidState(format!(
            "pending task {} does not follow {} learned tasks",
            pending.task_id,
            model.subnetworks.len()
        )));
    }
    let mut trainee = Trainee {
        backbone: Backbone::Frozen(&model.backbone.network),
        norms: &mut pending.norms,
        head: &mut pending.head,
        adapters: Some(&mut pending.adapters),
    };
    fit(
        &mut trainee,
        train,
        cfg.e2_epochs,
        cfg.learning_rate_e2,
        cfg,
        &mut seed::rng(cfg.seed, "e2", pending.task_id as u64),
    )?;
    model.subnetworks.push(TaskSubnetwork {
        task_id: pending.task_id,
        adapters: pending.adapters,
        norms: pending.norms,
        head: pending.head,
        frozen: true,
        is_reference: false,
        allocations: pending.allocations,
    });
    Ok(model.subnetworks.last().expect("just pushed"))
}

/// Full per-task cycle: fine-tune, decompose, allocate, optionally re-initialize, train adapters, freeze.
pub fn learn_task<'m>(
    model: &'m mut ContinualModel,
    data: &TaskData,
    cfg: &TrainConfig,
    opts: &LearnOptions,
) -> Result<&'m TaskSubnetwork> {
    let pending = prepare_task(model, data, cfg, opts)?;
    finish_task(model, pending, &data.train, cfg)
}

/// Parameter accounting: shared reference, each task's own parameters, and their sum.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParamCounts {
    pub reference: usize,
    pub per_task: Vec<usize>,
    pub total: usize,
}

impl ParamCounts {
    pub fn new(reference: usize, per_task: Vec<usize>) -> Self {
        let total = reference + per_task.iter().sum::<usize>();
        Self { reference, per_task, total }
    }
}

/// Normalization layers count their learned scale and shift only.
pub fn count_params(model: &ContinualModel) -> ParamCounts {
    ParamCounts::new(model.backbone.param_count(), model.subnetworks.iter().map(TaskSubnetwork::param_count).collect())
}
