//! End-to-end behaviour of the per-task cycle, inference and parameter accounting on
//! small streams that train in well under a second.

use pearl::data::TaskData;
use pearl::error::Error;
use pearl::harness::{generate_blob_stream, generate_reference_task, BlobSpec};
use pearl::linalg::Matrix;
use pearl::metrics::final_and_average;
use pearl::net::{forward, Backbone, ModelView, NetworkSpec, Phase, TrainConfig, Trainee};
use pearl::runtime::{
    accuracy, class_il_logits, complete_isolation, count_params, infer_class_il, infer_task_il, learn_task,
    prepare_task, run_continual, sequential_ft, task_logits, train_reference, ContinualModel, LearnOptions, RankPolicy,
    RunSettings, TrainingMode,
};

fn small_spec() -> BlobSpec {
    BlobSpec { num_tasks: 3, classes_per_task: 2, samples_per_class: 60, feature_dim: 6, separation: 5.0 }
}

fn small_train(seed: u64) -> TrainConfig {
    TrainConfig { e1_epochs: 3, e2_epochs: 5, reference_epochs: 8, seed, ..TrainConfig::default() }
}

fn small_settings(seed: u64) -> RunSettings {
    RunSettings {
        mode: TrainingMode::WithoutPretraining,
        network: NetworkSpec::mlp(6, &[16, 12], vec![0, 1], true),
        train: small_train(seed),
        learn: LearnOptions::default(),
    }
}

fn stream(seed: u64) -> Vec<TaskData> {
    generate_blob_stream(seed, &small_spec()).unwrap().tasks
}

fn reference_model(tasks: &[TaskData], seed: u64) -> ContinualModel {
    let s = small_settings(seed);
    let backbone = train_reference(&s.network, &tasks[0], &s.train).unwrap();
    let mut model = ContinualModel::new(backbone, TrainingMode::WithoutPretraining);
    model.adopt_reference_task().unwrap();
    model
}

#[test]
fn reference_training_fits_separable_blobs() {
    let spec = BlobSpec { num_tasks: 1, classes_per_task: 2, samples_per_class: 100, feature_dim: 4, separation: 6.0 };
    let task = generate_reference_task(3, &spec).unwrap();
    let cfg = TrainConfig { reference_epochs: 15, ..TrainConfig::default() };
    let net = NetworkSpec::mlp(4, &[16, 8], vec![0], true);
    let backbone = train_reference(&net, &task, &cfg).unwrap();
    let view = ModelView { net: &backbone.network, norms: &backbone.norms, head: &backbone.head, adapters: None };
    let logits = forward(&view, &task.train.features, Phase::Eval).unwrap();
    let pred = pearl::runtime::argmax_global(&logits, &[0, 1]).unwrap();
    assert!(accuracy(&pred, &task.train, 0) >= 0.95);

    let again = train_reference(&net, &task, &cfg).unwrap();
    assert_eq!(backbone.checksum(), again.checksum());
    let zero = TrainConfig { reference_epochs: 0, ..cfg };
    assert!(matches!(train_reference(&net, &task, &zero), Err(Error::InvalidConfig(_))));
}

#[test]
fn task_matching_the_reference_gets_minimal_rank() {
    let tasks = stream(1);
    let model = reference_model(&tasks, 1);
    // same inputs and labels as the reference task, relabelled into a fresh class range
    let mut same = tasks[0].clone();
    same.class_start = 100;
    let pending = prepare_task(&model, &same, &small_train(1), &LearnOptions::default()).unwrap();
    for a in &pending.allocations {
        assert!(a.threshold.raw_value < 0.05, "layer {}: {}", a.layer_id, a.threshold.raw_value);
        assert_eq!(a.rank, 1);
    }
}

#[test]
fn reinitialized_adapters_leave_logits_unchanged() {
    let tasks = stream(2);
    let model = reference_model(&tasks, 2);
    let pending = prepare_task(&model, &tasks[1], &small_train(2), &LearnOptions::default()).unwrap();
    let x = &tasks[1].test.features;
    let with = forward(&pending.view(&model.backbone.network), x, Phase::Eval).unwrap();
    let without = forward(
        &ModelView { net: &model.backbone.network, norms: &pending.norms, head: &pending.head, adapters: None },
        x,
        Phase::Eval,
    )
    .unwrap();
    assert_eq!(with, without);
    assert!(pending.adapters.values().all(|a| a.b.max_abs() == 0.0));
}

#[test]
fn verbatim_init_without_reinit_adds_the_squared_spectrum() {
    let tasks = stream(3);
    let model = reference_model(&tasks, 3);
    let opts = LearnOptions { reinit: false, ..LearnOptions::default() };
    let pending = prepare_task(&model, &tasks[1], &small_train(3), &opts).unwrap();
    for (id, ad) in &pending.adapters {
        assert!(ad.b.max_abs() > 0.0, "layer {id}");
        assert_eq!(ad.alpha, 2.0 * ad.rank as f64);
    }
}

#[test]
fn adapter_parameters_match_closed_form_and_enumeration() {
    let tasks = stream(4);
    let mut model = reference_model(&tasks, 4);
    for (t, policy) in [RankPolicy::Static(3), RankPolicy::Static(50)].into_iter().enumerate() {
        let opts = LearnOptions { rank_policy: policy, ..LearnOptions::default() };
        learn_task(&mut model, &tasks[t + 1], &small_train(4), &opts).unwrap();
    }
    let counts = count_params(&model);
    assert_eq!(counts.per_task.len(), 3);
    assert_eq!(counts.per_task[0], 0);
    for (i, sub) in model.subnetworks.iter().enumerate().skip(1) {
        let closed: usize = sub
            .adapters
            .iter()
            .map(|(&l, a)| {
                let w = &model.backbone.network.layers[l].weight;
                a.rank * (w.rows() + w.cols())
            })
            .sum();
        let enumerated_adapters: usize =
            sub.adapters.values().map(|a| a.b.as_slice().len() + a.a.as_slice().len()).sum();
        assert_eq!(closed, enumerated_adapters);

        let (mut adapters, mut norms, mut head) = (sub.adapters.clone(), sub.norms.clone(), sub.head.clone());
        let walked: usize = Trainee {
            backbone: Backbone::Frozen(&model.backbone.network),
            norms: &mut norms,
            head: &mut head,
            adapters: Some(&mut adapters),
        }
        .into_tensors()
        .iter()
        .map(|t| t.len())
        .sum();
        assert_eq!(counts.per_task[i], walked);
    }
    // static rank 50 exceeds both layers' full rank and is clamped
    for a in &model.subnetworks[2].allocations {
        assert_eq!(a.rank, a.full_rank);
    }
    assert_eq!(counts.total, counts.reference + counts.per_task.iter().sum::<usize>());
}

#[test]
fn collisions_and_untrained_backbones_are_rejected() {
    let tasks = stream(5);
    let mut model = reference_model(&tasks, 5);
    let cfg = small_train(5);
    let opts = LearnOptions::default();
    let mut clash = tasks[1].clone();
    clash.class_start = 1;
    assert!(matches!(learn_task(&mut model, &clash, &cfg, &opts), Err(Error::ClassCollision { start: 1, end: 3 })));

    model.backbone.trained = false;
    assert!(matches!(learn_task(&mut model, &tasks[1], &cfg, &opts), Err(Error::ReferenceNotTrained)));
    assert_eq!(model.subnetworks.len(), 1);
}

#[test]
fn continual_run_structure_and_task_il_stability() {
    let tasks = stream(6);
    let settings = small_settings(6);
    let (model, result) = run_continual(&tasks, None, &settings).unwrap();
    assert_eq!(model.subnetworks.iter().map(|s| s.task_id).collect::<Vec<_>>(), vec![1, 2, 3]);
    assert!(model.subnetworks[0].adapters.is_empty());
    assert!(model.subnetworks[1..].iter().all(|s| s.adapters.len() == 2 && s.frozen));
    for (t, row) in result.task_il.stages().iter().enumerate() {
        assert_eq!(row.len(), t + 1);
        for (i, &acc) in row.iter().enumerate() {
            assert_eq!(acc.to_bits(), result.task_il.stages()[i][i].to_bits());
        }
    }
    let (cil, _) = final_and_average(&result.class_il).unwrap();
    let (til, _) = final_and_average(&result.task_il).unwrap();
    assert!(cil <= til);

    let (_, again) = run_continual(&tasks, None, &settings).unwrap();
    assert_eq!(result, again);
}

#[test]
fn with_pretraining_gives_every_task_adapters() {
    let tasks = stream(7);
    let reference = generate_reference_task(7, &small_spec()).unwrap();
    let settings = RunSettings { mode: TrainingMode::WithPretraining, ..small_settings(7) };
    let (model, result) = run_continual(&tasks, Some(&reference), &settings).unwrap();
    assert_eq!(result.class_il.num_tasks(), 3);
    assert!(model.subnetworks.iter().all(|s| !s.is_reference && s.adapters.len() == 2));
    assert!(matches!(run_continual(&tasks, None, &settings), Err(Error::InvalidConfig(_))));

    let plain = small_settings(7);
    assert!(matches!(run_continual(&tasks[..1], None, &plain), Err(Error::InsufficientTasks { needed: 2, got: 1 })));
}

#[test]
fn inference_paths_agree() {
    let tasks = stream(8);
    let (model, _) = run_continual(&tasks, None, &small_settings(8)).unwrap();
    let x = Matrix::from_fn(30, 6, |r, c| tasks[r % 3].test.features[(r / 3, c)]);

    let (logits, ids) = class_il_logits(&model, &x).unwrap();
    assert_eq!(logits.cols(), 6);
    assert_eq!(ids, (0..6).collect::<Vec<_>>());

    let class_il = infer_class_il(&model, &x).unwrap();
    for r in 0..x.rows() {
        // brute force over explicit (class, logit) pairs from each head
        let mut best: Option<(usize, f64)> = None;
        for sub in &model.subnetworks {
            let l = task_logits(&model, sub.task_id, &x).unwrap();
            for (j, class) in sub.head.class_range().enumerate() {
                let v = l[(r, j)];
                if best.is_none_or(|(bc, bv)| v > bv || (v == bv && class < bc)) {
                    best = Some((class, v));
                }
            }
        }
        assert_eq!(class_il[r], best.unwrap().0);
        let owner = model.subnetworks.iter().find(|s| s.head.class_range().contains(&class_il[r])).unwrap();
        assert_eq!(infer_task_il(&model, &x, owner.task_id).unwrap()[r], class_il[r]);
    }
    assert!(matches!(infer_task_il(&model, &x, 4), Err(Error::UnknownTask(4))));
    assert!(matches!(infer_task_il(&model, &x, 0), Err(Error::UnknownTask(0))));

    let empty = ContinualModel::new(model.backbone.clone(), TrainingMode::WithPretraining);
    assert!(matches!(infer_class_il(&empty, &x), Err(Error::ModelEmpty)));
    assert!(count_params(&empty).per_task.is_empty());

    let mut one = ContinualModel::new(model.backbone.clone(), TrainingMode::WithoutPretraining);
    one.adopt_reference_task().unwrap();
    assert_eq!(infer_class_il(&one, &x).unwrap(), infer_task_il(&one, &x, 1).unwrap());
}

#[test]
fn parameter_growth_against_baselines() {
    let tasks = stream(9);
    let settings = small_settings(9);
    let (model, pearl) = run_continual(&tasks, None, &settings).unwrap();
    let iso = complete_isolation(&tasks, &settings).unwrap();
    let per_net = model.backbone.param_count();
    assert_eq!(iso.params.total, tasks.len() * per_net);
    assert!(pearl.params.total <= iso.params.total);

    let mut running = pearl.params.reference;
    for &p in &pearl.params.per_task[1..] {
        assert!(p > 0);
        running += p;
    }
    assert_eq!(running, pearl.params.total);

    let seq = sequential_ft(&tasks, &settings).unwrap();
    assert_eq!(seq.class_il.num_tasks(), 3);
    // the shared backbone plus one head covering all six classes
    assert_eq!(seq.params.total, model.backbone.network.param_count() + model.backbone.norms.param_count() + 6 * 13);
}
