//! Split a labelled CSV file into a class-incremental stream.
//!
//! The file is written to a temporary directory: two noisy features per row,
//! a text header and one malformed row that the loader skips and reports.

use std::io::Write;

use pearl::harness::{load_csv_stream, CsvOptions, LabelColumn, MalformedRows};
use rand::Rng;

fn main() -> pearl::Result<()> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("points.csv");
    let mut file = std::fs::File::create(&path)?;
    let mut rng = pearl::seed::rng(5, "example", 0);
    writeln!(file, "x,y,species")?;
    for i in 0..60 {
        for label in [3, 8, 12, 20, 31, 40] {
            let angle = label as f64;
            let (x, y) = (4.0 * angle.cos(), 4.0 * angle.sin());
            writeln!(file, "{},{},{label}", x + rng.random_range(-0.5..0.5), y + rng.random_range(-0.5..0.5))?;
        }
        if i == 17 {
            writeln!(file, "1.0,not-a-number,3")?;
        }
    }
    drop(file);

    let opts = CsvOptions {
        num_tasks: 3,
        label_column: LabelColumn::Name("species".into()),
        permutation_seed: Some(9),
        malformed: MalformedRows::Skip,
    };
    let (stream, report) = load_csv_stream(&path, &opts)?;
    println!("header {:?}, parsed {}, rejected {:?}", report.header, report.parsed, report.rejected);
    let labels = stream.original_labels.as_deref().unwrap_or_default();
    for (t, task) in stream.tasks.iter().enumerate() {
        let original: Vec<i64> = task.class_range().map(|c| labels[c]).collect();
        println!(
            "task {}: classes {:?} (file labels {original:?}), {} train / {} test rows",
            t + 1,
            task.class_range(),
            task.train.len(),
            task.test.len()
        );
    }
    Ok(())
}
