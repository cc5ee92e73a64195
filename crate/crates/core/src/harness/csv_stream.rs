use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::stream::{TaskStream, MIN_SAMPLES_PER_SPLIT};
use crate::data::{Dataset, TaskData};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::seed;

/// Which column holds the integer label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelColumn {
    Index(usize),
    Name(String),
    Last,
}

impl LabelColumn {
    /// A purely numeric string selects by index, anything else by header name.
    pub fn parse(s: &str) -> Self {
        s.trim().parse().map_or_else(|_| Self::Name(s.trim().to_string()), Self::Index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MalformedRows {
    /// Stop at the first bad row with its line number.
    #[default]
    Fail,
    /// Skip bad rows and list them in the report.
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub num_tasks: usize,
    pub label_column: LabelColumn,
    /// Shuffles the sorted class order before grouping into tasks.
    pub permutation_seed: Option<u64>,
    pub malformed: MalformedRows,
}

/// Row accounting for one load; `parsed + rejected.len()` equals the data rows in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvReport {
    pub header: Option<Vec<String>>,
    pub parsed: usize,
    /// `(line, reason)` for every skipped row.
    pub rejected: Vec<(u64, String)>,
}

/// One parsed data row: original label and features.
type Row = (i64, Vec<f64>);

fn parse_row(fields: &csv::StringRecord, label_idx: usize, width: usize) -> std::result::Result<Row, String> {
    if fields.len() != width {
        return Err(format!("expected {width} fields, found {}", fields.len()));
    }
    let label_text = fields[label_idx].trim();
    let label = label_text.parse::<i64>().map_err(|_| format!("label {label_text:?} is not an integer"))?;
    let mut features = Vec::with_capacity(width - 1);
    for (i, f) in fields.iter().enumerate() {
        if i == label_idx {
            continue;
        }
        let v = f.trim().parse::<f64>().map_err(|_| format!("field {} ({f:?}) is not a number", i + 1))?;
        if !v.is_finite() {
            return Err(format!("field {} is not finite", i + 1));
        }
        features.push(v);
    }
    Ok((label, features))
}

fn looks_like_header(fields: &csv::StringRecord) -> bool {
    fields.iter().any(|f| f.trim().parse::<f64>().is_err())
}

/// Reads numeric features with an integer label column, sorts classes by label (or
/// permutes them by seed), and splits them into equal contiguous groups, one per task.
/// Within each class the first 80% of rows in file order train and the rest test.
pub fn load_csv_stream(path: &Path, opts: &CsvOptions) -> Result<(TaskStream, CsvReport)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_path(path).map_err(csv_err)?;
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        records.push((line, rec));
    }
    let Some((_, first)) = records.first() else {
        return Err(Error::EmptyDataset);
    };
    let header = looks_like_header(first).then(|| first.iter().map(|s| s.trim().to_string()).collect::<Vec<_>>());
    let width = first.len();
    let label_idx = match (&opts.label_column, &header) {
        (LabelColumn::Last, _) => width - 1,
        (LabelColumn::Index(i), _) if *i < width => *i,
        (LabelColumn::Index(i), _) => {
            return Err(Error::InvalidConfig(format!("label column {i} out of range for {width} columns")));
        }
        (LabelColumn::Name(n), Some(h)) => {
            h.iter().position(|c| c == n).ok_or_else(|| Error::InvalidConfig(format!("no column named {n:?}")))?
        }
        (LabelColumn::Name(n), None) => {
            return Err(Error::InvalidConfig(format!("label column {n:?} given by name but the file has no header")));
        }
    };
    if width < 2 {
        return Err(Error::InvalidConfig("need at least one feature column besides the label".into()));
    }

    let mut by_class: BTreeMap<i64, Vec<Vec<f64>>> = BTreeMap::new();
    let mut report = CsvReport { header: header.clone(), parsed: 0, rejected: Vec::new() };
    for (line, rec) in records.iter().skip(usize::from(header.is_some())) {
        match parse_row(rec, label_idx, width) {
            Ok((label, features)) => {
                by_class.entry(label).or_default().push(features);
                report.parsed += 1;
            }
            Err(message) => match opts.malformed {
                MalformedRows::Fail => return Err(Error::ParseError { line: *line as usize, message }),
                MalformedRows::Skip => report.rejected.push((*line, message)),
            },
        }
    }

    let mut labels: Vec<i64> = by_class.keys().copied().collect();
    if opts.num_tasks == 0 || !labels.len().is_multiple_of(opts.num_tasks) {
        return Err(Error::InvalidSplit(format!(
            "{} classes cannot be split into {} tasks",
            labels.len(),
            opts.num_tasks
        )));
    }
    if let Some(s) = opts.permutation_seed {
        labels.shuffle(&mut seed::rng(s, "class-order", 0));
    }
    let per_task = labels.len() / opts.num_tasks;
    let dim = width - 1;
    let mut tasks = Vec::with_capacity(opts.num_tasks);
    for (t, group) in labels.chunks(per_task).enumerate() {
        let (mut train, mut test) = ((Vec::new(), Vec::new()), (Vec::new(), Vec::new()));
        for (local, label) in group.iter().enumerate() {
            let rows = &by_class[label];
            let n_test = rows.len() / 5;
            let n_train = rows.len() - n_test;
            if n_test < MIN_SAMPLES_PER_SPLIT || n_train < MIN_SAMPLES_PER_SPLIT {
                return Err(Error::InvalidSplit(format!(
                    "class {label} has {} rows, too few for {MIN_SAMPLES_PER_SPLIT} per split",
                    rows.len()
                )));
            }
            for (i, row) in rows.iter().enumerate() {
                let split = if i < n_train { &mut train } else { &mut test };
                split.0.extend_from_slice(row);
                split.1.push(local);
            }
        }
        let build = |(x, y): (Vec<f64>, Vec<usize>)| Dataset::new(Matrix::new(y.len(), dim, x)?, y);
        tasks.push(TaskData {
            class_start: t * per_task,
            num_classes: per_task,
            train: build(train)?,
            test: build(test)?,
        });
    }
    let mut stream = TaskStream::new(tasks)?;
    stream.original_labels = Some(labels);
    Ok((stream, report))
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::ParseError { line, message: format!("{other:?}") },
    }
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn rows(classes: &[i64], per_class: usize) -> String {
        let mut s = String::new();
        for &c in classes {
            for i in 0..per_class {
                s.push_str(&format!("{}.5,{c},{}\n", i, -(i as i64)));
            }
        }
        s
    }

    fn opts(k: usize, label: LabelColumn) -> CsvOptions {
        CsvOptions { num_tasks: k, label_column: label, permutation_seed: None, malformed: MalformedRows::Fail }
    }

    #[test]
    fn headered_file_by_name() {
        let f = write(&format!("a,y,b\n{}", rows(&[3, 1, 7, 5], 50)));
        let (s, report) = load_csv_stream(f.path(), &opts(2, LabelColumn::Name("y".into()))).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.original_labels, Some(vec![1, 3, 5, 7]));
        assert_eq!(report.parsed, 200);
        assert_eq!(s.feature_dim(), 2);
        assert_eq!((s.tasks[0].train.len(), s.tasks[0].test.len()), (80, 20));
    }

    #[test]
    fn bad_row_reports_line() {
        let mut body = rows(&[0, 1], 50);
        body.push_str("1.0,1,oops\n");
        let f = write(&body);
        let err = load_csv_stream(f.path(), &opts(1, LabelColumn::Index(1))).unwrap_err();
        assert!(matches!(err, Error::ParseError { line: 101, .. }), "{err:?}");

        let lenient = CsvOptions { malformed: MalformedRows::Skip, ..opts(1, LabelColumn::Index(1)) };
        let (_, report) = load_csv_stream(f.path(), &lenient).unwrap();
        assert_eq!(report.parsed + report.rejected.len(), 101);
        assert_eq!(report.rejected[0].0, 101);
    }

    #[test]
    fn indivisible_classes() {
        let f = write(&rows(&[0, 1, 2], 50));
        assert!(matches!(load_csv_stream(f.path(), &opts(2, LabelColumn::Index(1))), Err(Error::InvalidSplit(_))));
    }

    #[test]
    fn label_column_parsing() {
        assert_eq!(LabelColumn::parse("3"), LabelColumn::Index(3));
        assert_eq!(LabelColumn::parse("label"), LabelColumn::Name("label".into()));
    }
}
