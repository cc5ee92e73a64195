//! Learn a short blob stream task by task and print both accuracy matrices
//! together with the rank each task received per target layer.

use pearl::harness::{generate_blob_stream, BlobSpec};
use pearl::metrics::AccuracyMatrix;
use pearl::net::{NetworkSpec, TrainConfig};
use pearl::runtime::{run_continual, LearnOptions, RunSettings, TrainingMode};

fn print_matrix(name: &str, m: &AccuracyMatrix) {
    println!("{name}");
    for (t, row) in m.stages().iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|a| format!("{a:.3}")).collect();
        println!("  after task {}: {}", t + 1, cells.join("  "));
    }
}

fn main() -> pearl::Result<()> {
    let spec = BlobSpec { num_tasks: 4, classes_per_task: 3, samples_per_class: 120, feature_dim: 10, separation: 6.0 };
    let stream = generate_blob_stream(1, &spec)?;
    let settings = RunSettings {
        mode: TrainingMode::WithoutPretraining,
        network: NetworkSpec::mlp(spec.feature_dim, &[48, 32], vec![0, 1], true),
        train: TrainConfig { e1_epochs: 5, e2_epochs: 15, reference_epochs: 20, seed: 1, ..TrainConfig::default() },
        learn: LearnOptions::default(),
    };
    let (model, result) = run_continual(&stream.tasks, None, &settings)?;

    print_matrix("class-incremental", &result.class_il);
    print_matrix("task-incremental", &result.task_il);
    for sub in &model.subnetworks {
        let ranks: Vec<String> = sub
            .allocations
            .iter()
            .map(|a| format!("layer {} T={:.4} rank {}/{}", a.layer_id, a.t_mu, a.rank, a.full_rank))
            .collect();
        let label = if sub.is_reference { "reference".to_string() } else { ranks.join(", ") };
        println!("task {}: {label}", sub.task_id);
    }
    println!("params: {:?}", result.params);
    Ok(())
}
