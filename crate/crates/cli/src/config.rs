use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use onn_core::dataset::{
    cap_per_digit, digit_samples, load_mnist, load_wdbc, split, DatasetSplit, DownsampleMethod, Task,
    DIGITS_PER_CLASS,
};
use onn_core::model::{PerceptronModel, TrainConfig};
use onn_core::photonics::{CombSpec, ShaperConfig};
use onn_core::signalchain::{ChainConfig, PhotonicsConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

pub const OUTPUT_DIR_ENV: &str = "ONN_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub mnist_images: PathBuf,
    pub mnist_labels: PathBuf,
    pub wdbc_csv: PathBuf,
}

impl Default for DataPaths {
    fn default() -> Self {
        Self {
            mnist_images: "data/mnist-06-images.idx3-ubyte".into(),
            mnist_labels: "data/mnist-06-labels.idx1-ubyte".into(),
            wdbc_csv: "data/wdbc.data".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

/// Which two digits to separate and how images become features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DigitsConfig {
    pub negative: u8,
    pub positive: u8,
    pub per_digit_cap: usize,
    pub downsample: DownsampleMethod,
}

impl Default for DigitsConfig {
    fn default() -> Self {
        Self {
            negative: 0,
            positive: 6,
            per_digit_cap: DIGITS_PER_CLASS,
            downsample: DownsampleMethod::BlockMean,
        }
    }
}

/// Comb and shaper. A missing comb means a flat comb with one line per
/// feature.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhotonicsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comb: Option<CombSpec>,
    pub shaper: ShaperConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    #[serde(default)]
    pub paths: DataPaths,
    pub split: SplitConfig,
    #[serde(default)]
    pub digits: DigitsConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub photonics: PhotonicsSection,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut value: Value = parse_json(&text, path)?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let mut cfg: RunConfig = from_value(value, path)?;
        if cfg.photonics.comb.is_none() {
            cfg.photonics.comb = Some(CombSpec::flat(cfg.task.n_features()));
        }
        Ok(cfg)
    }

    /// The resolved configuration as recorded in reports. The output
    /// directory is left out so a replay elsewhere produces the same report.
    pub fn echo(&self) -> Value {
        let mut c = self.clone();
        c.output_dir = None;
        serde_json::to_value(c).expect("config serializes")
    }

    pub fn photonics(&self) -> PhotonicsConfig {
        PhotonicsConfig {
            comb: self
                .photonics
                .comb
                .clone()
                .unwrap_or_else(|| CombSpec::flat(self.task.n_features())),
            shaper: self.photonics.shaper.clone(),
        }
    }

    /// `--output-dir`, then the config, then `ONN_OUTPUT_DIR`, then `out`.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn load_split(&self) -> Result<DatasetSplit> {
        let samples = match self.task {
            Task::Digits => {
                let d = &self.digits;
                let images = load_mnist(
                    &self.paths.mnist_images,
                    &self.paths.mnist_labels,
                    &BTreeSet::from([d.negative, d.positive]),
                )?;
                digit_samples(&cap_per_digit(images, d.per_digit_cap), d.negative, d.positive, d.downsample)?
            }
            Task::Cancer => load_wdbc(&self.paths.wdbc_csv)?,
        };
        Ok(split(&samples, self.split.n_train, self.split.n_test, self.split.seed, self.task)?)
    }
}

pub fn load_model(path: &Path, task: Task) -> Result<PerceptronModel> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let model = PerceptronModel::from_json(&text)?;
    if model.n() != task.n_features() {
        return Err(onn_core::Error::Shape(format!(
            "model has {} weights but task {:?} has {} features",
            model.n(),
            task,
            task.n_features()
        ))
        .into());
    }
    Ok(model)
}

pub fn parse_json(text: &str, path: &Path) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| CliError::Config {
        file: path.display().to_string(),
        field: ".".into(),
        message: e.to_string(),
    })
}

/// Typed deserialization that reports the offending field path.
pub fn from_value<T: DeserializeOwned>(value: Value, path: &Path) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| CliError::Config {
        file: path.display().to_string(),
        field: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}

/// Applies `a.b.c=value`. The value is read as JSON when it parses as JSON
/// and as a plain string otherwise.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{spec}` is not of the form key.path=value")))?;
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(CliError::Usage(format!("override `{spec}` has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let mut keys = path.split('.').peekable();
    while let Some(key) = keys.next() {
        let map = match node {
            Value::Object(map) => map,
            Value::Null => {
                *node = Value::Object(Map::new());
                node.as_object_mut().expect("just created")
            }
            _ => {
                return Err(CliError::Usage(format!(
                    "override `{spec}`: `{key}` is inside a non-object value"
                )))
            }
        };
        if keys.peek().is_none() {
            map.insert(key.to_string(), value);
            return Ok(());
        }
        node = map.entry(key.to_string()).or_insert(Value::Null);
    }
    Ok(())
}
