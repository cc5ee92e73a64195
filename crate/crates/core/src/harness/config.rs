use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::csv_stream::{load_csv_stream, CsvOptions, CsvReport, LabelColumn, MalformedRows};
use super::stream::{generate_blob_stream, generate_reference_task, BlobSpec, TaskStream};
use crate::adapt::{LoraInit, ThresholdMode};
use crate::data::TaskData;
use crate::error::{Error, Result};
use crate::net::{LrSchedule, NetworkSpec, OptimizerKind, TrainConfig};
use crate::runtime::{LearnOptions, RankPolicy, RunSettings, TrainingMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    PearlDynamic,
    StaticRank(usize),
    CompleteIsolation,
    SequentialFt,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PearlDynamic => f.write_str("pearl_dynamic"),
            Self::StaticRank(r) => write!(f, "static_rank:{r}"),
            Self::CompleteIsolation => f.write_str("complete_isolation"),
            Self::SequentialFt => f.write_str("sequential_ft"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pearl_dynamic" => Ok(Self::PearlDynamic),
            "complete_isolation" => Ok(Self::CompleteIsolation),
            "sequential_ft" => Ok(Self::SequentialFt),
            other => {
                let rank = other
                    .strip_prefix("static_rank:")
                    .and_then(|r| r.parse::<usize>().ok())
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown method {other:?}")))?;
                if rank == 0 {
                    return Err(Error::InvalidConfig("static_rank needs r >= 1".into()));
                }
                Ok(Self::StaticRank(rank))
            }
        }
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> Self {
        m.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamSource {
    #[default]
    Blobs,
    Csv,
}

/// One experiment, read from a flat TOML file. Every key is optional; see the
/// README for the schema and defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub mode: TrainingMode,
    pub threshold_mode: ThresholdMode,
    pub reinit: bool,
    pub lora_init: LoraInit,
    /// Drives stream generation, initialization and shuffling.
    pub seed: u64,

    pub e1_epochs: usize,
    pub e2_epochs: usize,
    pub reference_epochs: usize,
    pub learning_rate_e1: f64,
    pub learning_rate_e2: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub lr_schedule: LrSchedule,

    pub hidden: Vec<usize>,
    pub target_layers: Vec<usize>,
    pub use_norm: bool,

    pub stream: StreamSource,
    pub num_tasks: usize,
    pub classes_per_task: usize,
    pub samples_per_class: usize,
    pub feature_dim: usize,
    pub separation: f64,
    pub csv_path: Option<PathBuf>,
    /// Column index or header name; the last column when absent.
    pub label_column: Option<String>,
    pub permutation_seed: Option<u64>,
    pub skip_malformed_rows: bool,

    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let blobs = BlobSpec::default();
        Self {
            method: Method::PearlDynamic,
            mode: TrainingMode::default(),
            threshold_mode: ThresholdMode::default(),
            reinit: true,
            lora_init: LoraInit::default(),
            seed: 0,
            e1_epochs: train.e1_epochs,
            e2_epochs: train.e2_epochs,
            reference_epochs: train.reference_epochs,
            learning_rate_e1: train.learning_rate_e1,
            learning_rate_e2: train.learning_rate_e2,
            batch_size: train.batch_size,
            optimizer: train.optimizer,
            lr_schedule: train.lr_schedule,
            hidden: vec![64, 64, 32],
            target_layers: vec![0, 1],
            use_norm: true,
            stream: StreamSource::Blobs,
            num_tasks: blobs.num_tasks,
            classes_per_task: blobs.classes_per_task,
            samples_per_class: blobs.samples_per_class,
            feature_dim: blobs.feature_dim,
            separation: blobs.separation,
            csv_path: None,
            label_column: None,
            permutation_seed: None,
            skip_malformed_rows: false,
            output: None,
        }
    }
}

/// The data an experiment runs on.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedStream {
    pub stream: TaskStream,
    /// Separate pretraining task, present in `with_pretraining` mode.
    pub reference: Option<TaskData>,
    pub csv: Option<CsvReport>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden widths must be positive and non-empty".into()));
        }
        if self.num_tasks < 2 {
            return Err(Error::InvalidConfig("a continual run needs at least two tasks".into()));
        }
        match self.stream {
            StreamSource::Blobs => {}
            StreamSource::Csv if self.csv_path.is_none() => {
                return Err(Error::InvalidConfig("stream = \"csv\" needs csv_path".into()));
            }
            StreamSource::Csv if self.mode == TrainingMode::WithPretraining => {
                return Err(Error::InvalidConfig(
                    "with_pretraining needs a reference task; only blob streams provide one".into(),
                ));
            }
            StreamSource::Csv => {}
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            e1_epochs: self.e1_epochs,
            e2_epochs: self.e2_epochs,
            reference_epochs: self.reference_epochs,
            learning_rate_e1: self.learning_rate_e1,
            learning_rate_e2: self.learning_rate_e2,
            batch_size: self.batch_size,
            optimizer: self.optimizer,
            seed: self.seed,
            lr_schedule: self.lr_schedule,
        }
    }

    pub fn blob_spec(&self) -> BlobSpec {
        BlobSpec {
            num_tasks: self.num_tasks,
            classes_per_task: self.classes_per_task,
            samples_per_class: self.samples_per_class,
            feature_dim: self.feature_dim,
            separation: self.separation,
        }
    }

    pub fn learn_options(&self) -> LearnOptions {
        let rank_policy = match self.method {
            Method::StaticRank(r) => RankPolicy::Static(r),
            _ => RankPolicy::Dynamic(self.threshold_mode),
        };
        LearnOptions { rank_policy, reinit: self.reinit, lora_init: self.lora_init }
    }

    pub fn settings(&self, input_dim: usize) -> RunSettings {
        RunSettings {
            mode: self.mode,
            network: NetworkSpec::mlp(input_dim, &self.hidden, self.target_layers.clone(), self.use_norm),
            train: self.train_config(),
            learn: self.learn_options(),
        }
    }

    pub fn load_stream(&self) -> Result<LoadedStream> {
        match self.stream {
            StreamSource::Blobs => {
                let spec = self.blob_spec();
                let stream = generate_blob_stream(self.seed, &spec)?;
                let reference = match self.mode {
                    TrainingMode::WithPretraining => Some(generate_reference_task(self.seed, &spec)?),
                    TrainingMode::WithoutPretraining => None,
                };
                Ok(LoadedStream { stream, reference, csv: None })
            }
            StreamSource::Csv => {
                let path = self.csv_path.as_deref().ok_or_else(|| Error::InvalidConfig("missing csv_path".into()))?;
                let label_column = self.label_column.as_deref().map_or(LabelColumn::Last, LabelColumn::parse);
                let opts = CsvOptions {
                    num_tasks: self.num_tasks,
                    label_column,
                    permutation_seed: self.permutation_seed,
                    malformed: if self.skip_malformed_rows { MalformedRows::Skip } else { MalformedRows::Fail },
                };
                let (stream, report) = load_csv_stream(path, &opts)?;
                Ok(LoadedStream { stream, reference: None, csv: Some(report) })
            }
        }
    }
}
