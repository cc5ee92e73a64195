use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use super::config::{ExperimentConfig, Method};
use super::csv_stream::CsvReport;
use crate::error::{Error, Result};
use crate::metrics::{AccuracyMatrix, MetricsReport};
use crate::runtime::{complete_isolation, run_continual, sequential_ft, LayerAllocation, ParamCounts, StreamResult};

/// Per-task allocation log (empty `layers` for tasks without adapters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: usize,
    pub class_start: usize,
    pub class_end: usize,
    pub layers: Vec<LayerAllocation>,
}

/// Everything one experiment produced, serializable without loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub tasks: Vec<TaskRecord>,
    pub class_il: AccuracyMatrix,
    pub task_il: AccuracyMatrix,
    pub metrics_class_il: MetricsReport,
    pub metrics_task_il: MetricsReport,
    pub params: ParamCounts,
    pub csv: Option<CsvReport>,
    pub wall_clock_secs: f64,
}

/// Loads the configured stream, dispatches to the chosen method and collects the results.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let loaded = cfg.load_stream()?;
    let tasks_data = &loaded.stream.tasks;
    let settings = cfg.settings(loaded.stream.feature_dim());

    let (result, tasks) = match cfg.method {
        Method::PearlDynamic | Method::StaticRank(_) => {
            let (model, result) = run_continual(tasks_data, loaded.reference.as_ref(), &settings)?;
            let tasks = model
                .subnetworks
                .iter()
                .map(|s| TaskRecord {
                    task_id: s.task_id,
                    class_start: s.head.class_range().start,
                    class_end: s.head.class_range().end,
                    layers: s.allocations.clone(),
                })
                .collect();
            (result, tasks)
        }
        Method::CompleteIsolation => (complete_isolation(tasks_data, &settings)?, plain_tasks(tasks_data)),
        Method::SequentialFt => (sequential_ft(tasks_data, &settings)?, plain_tasks(tasks_data)),
    };
    let StreamResult { class_il, task_il, params } = result;
    Ok(RunRecord {
        config: cfg.clone(),
        seed: cfg.seed,
        tasks,
        metrics_class_il: MetricsReport::compute(&class_il, params.clone())?,
        metrics_task_il: MetricsReport::compute(&task_il, params.clone())?,
        class_il,
        task_il,
        params,
        csv: loaded.csv,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

fn plain_tasks(tasks: &[crate::data::TaskData]) -> Vec<TaskRecord> {
    tasks
        .iter()
        .enumerate()
        .map(|(t, d)| TaskRecord {
            task_id: t + 1,
            class_start: d.class_start,
            class_end: d.class_range().end,
            layers: Vec::new(),
        })
        .collect()
}

/// Pretty JSON that prints every float with 17 significant digits.
struct LosslessFloats(PrettyFormatter<'static>);

impl Formatter for LosslessFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

impl RunRecord {
    pub fn to_json(&self) -> Result<String> {
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, LosslessFloats(PrettyFormatter::new()));
        self.serialize(&mut ser).map_err(|e| Error::Serialization(e.to_string()))?;
        out.push(b'\n');
        String::from_utf8(out).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// JSON with the wall-clock field zeroed, for reproducibility comparisons.
    pub fn to_json_without_clock(&self) -> Result<String> {
        Self { wall_clock_secs: 0.0, ..self.clone() }.to_json()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    TextTable,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "text_table" => Ok(Self::TextTable),
            other => Err(Error::InvalidFormat(other.to_string())),
        }
    }
}

const CSV_HEADER: [&str; 17] = [
    "row",
    "task",
    "layer",
    "threshold_raw",
    "threshold_clamped",
    "inner_product_nonneg",
    "t_mu",
    "rank",
    "full_rank",
    "method",
    "class_il_a_final",
    "class_il_a_avg",
    "class_il_ffm",
    "class_il_cfm",
    "task_il_a_final",
    "task_il_a_avg",
    "total_params",
];

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

/// One row per (task, target layer) with its threshold and rank, then one summary row.
fn report_csv(record: &RunRecord) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(CSV_HEADER).map_err(ser)?;
    for task in &record.tasks {
        for l in &task.layers {
            let mut row = vec![
                "layer".to_string(),
                task.task_id.to_string(),
                l.layer_id.to_string(),
                real(l.threshold.raw_value),
                real(l.threshold.clamped_value),
                l.threshold.inner_product_nonneg.to_string(),
                real(l.t_mu),
                l.rank.to_string(),
                l.full_rank.to_string(),
            ];
            row.resize(CSV_HEADER.len(), String::new());
            w.write_record(&row).map_err(ser)?;
        }
    }
    let (c, t) = (&record.metrics_class_il, &record.metrics_task_il);
    let mut summary = vec!["summary".to_string()];
    summary.resize(9, String::new());
    summary.extend([
        record.config.method.to_string(),
        real(c.a_final),
        real(c.a_avg),
        real(c.ffm),
        real(c.cfm),
        real(t.a_final),
        real(t.a_avg),
        record.params.total.to_string(),
    ]);
    w.write_record(&summary).map_err(ser)?;
    let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
}

fn report_text(record: &RunRecord) -> String {
    let (c, t) = (&record.metrics_class_il, &record.metrics_task_il);
    let mut s = String::new();
    let _ = writeln!(s, "method {}  seed {}  tasks {}", record.config.method, record.seed, record.class_il.num_tasks());
    let _ = writeln!(s, "{:<22}{:>12}{:>12}", "metric", "class-il", "task-il");
    let rows: [(&str, f64, f64); 9] = [
        ("A_T", c.a_final, t.a_final),
        ("A_avg (Ā)", c.a_avg, t.a_avg),
        ("forgetting", c.forgetting_simple, t.forgetting_simple),
        ("FFM", c.ffm, t.ffm),
        ("CFM", c.cfm, t.cfm),
        ("CFM per-step", c.cfm_per_step, t.cfm_per_step),
        ("S (stability)", c.stability, t.stability),
        ("P (plasticity)", c.plasticity, t.plasticity),
        ("trade-off", c.tradeoff, t.tradeoff),
    ];
    for (name, a, b) in rows {
        let _ = writeln!(s, "{:<22}{:>12.4}{:>12.4}", name, a, b);
    }
    let _ = writeln!(s, "wall clock {:.2} s", record.wall_clock_secs);
    let _ = writeln!(
        s,
        "params: reference {}  per task {:?}  total {}",
        record.params.reference, record.params.per_task, record.params.total
    );
    for task in &record.tasks {
        for l in &task.layers {
            let _ = writeln!(
                s,
                "task {} layer {}: T = {:.5} (raw {:.5}), rank {}/{}",
                task.task_id, l.layer_id, l.t_mu, l.threshold.raw_value, l.rank, l.full_rank
            );
        }
    }
    s
}

pub fn report(record: &RunRecord, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => record.to_json(),
        ReportFormat::Csv => report_csv(record),
        ReportFormat::TextTable => Ok(report_text(record)),
    }
}

/// Writes to a sibling temp file, syncs, then renames over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path.file_name().ok_or_else(|| Error::InvalidInput(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let write = || -> io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::Io(e)
    })
}
