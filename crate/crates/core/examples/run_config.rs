//! Run an experiment from a TOML config and print every report format.

use pearl::harness::{report, run_experiment, ExperimentConfig, ReportFormat};

const CONFIG: &str = r#"
method = "pearl_dynamic"
seed = 4
num_tasks = 3
classes_per_task = 2
samples_per_class = 200
feature_dim = 8
hidden = [32, 16]
e1_epochs = 4
e2_epochs = 20
reference_epochs = 24
"#;

fn main() -> pearl::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    let record = run_experiment(&cfg)?;
    println!("{}", report(&record, ReportFormat::TextTable)?);
    println!("{}", report(&record, ReportFormat::Csv)?);
    let json = report(&record, ReportFormat::Json)?;
    println!("json record: {} bytes, first line {:?}", json.len(), json.lines().next().unwrap_or(""));
    Ok(())
}
