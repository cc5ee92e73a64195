//! Compare the adapter method against full per-task networks and plain
//! sequential fine-tuning on the same stream.

use pearl::harness::{run_experiment, ExperimentConfig, Method};

fn main() -> pearl::Result<()> {
    let base = ExperimentConfig {
        num_tasks: 4,
        classes_per_task: 3,
        samples_per_class: 120,
        feature_dim: 10,
        hidden: vec![48, 32],
        e1_epochs: 5,
        e2_epochs: 15,
        reference_epochs: 20,
        ..ExperimentConfig::default()
    };
    println!("{:<20} {:>10} {:>10} {:>8} {:>10}", "method", "class-il", "task-il", "FFM", "params");
    for method in [Method::PearlDynamic, Method::StaticRank(4), Method::CompleteIsolation, Method::SequentialFt] {
        let name = method.to_string();
        let rec = run_experiment(&ExperimentConfig { method, ..base.clone() })?;
        println!(
            "{:<20} {:>10.4} {:>10.4} {:>8.4} {:>10}",
            name, rec.metrics_class_il.a_final, rec.metrics_task_il.a_final, rec.metrics_class_il.ffm, rec.params.total
        );
    }
    Ok(())
}
