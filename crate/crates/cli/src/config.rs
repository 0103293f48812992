//! Run configuration: one JSON document, overridable from the command line.
//!
//! All seeds derive from the master `seed` by fixed offsets: split `seed`,
//! SMOTE `seed + 1`, model `seed + 2`, cross-validation folds `seed + 3`.

use std::fs;
use std::path::{Path, PathBuf};

use mqtt_ids_core::data::{
    csv_header, CANONICAL_CLASSES, DEFAULT_TARGET_COLUMN, MQTTSET_CATEGORICAL_COLUMNS,
};
use mqtt_ids_core::pipeline::{PrepareConfig, SelectionMode};
use mqtt_ids_core::preprocess::SmoteConfig;
use mqtt_ids_core::{LoadOptions, MethodKind, ModelSpec, SchemaDef};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, Context, Result};

pub const SPLIT_OFFSET: u64 = 0;
pub const SMOTE_OFFSET: u64 = 1;
pub const MODEL_OFFSET: u64 = 2;
pub const FOLDS_OFFSET: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoteOptions {
    #[serde(default = "five")]
    pub k_neighbors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOptions {
    #[serde(default = "stacking")]
    pub kind: MethodKind,
    #[serde(default)]
    pub hyperparameters: Map<String, Value>,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            kind: stacking(),
            hyperparameters: Map::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    /// Optional JSON schema document; supplies the target and categorical columns.
    #[serde(default)]
    pub schema: Option<PathBuf>,
    #[serde(default = "target")]
    pub target_column: String,
    #[serde(default = "classes")]
    pub classes: Vec<String>,
    /// Defaults to the MQTT categorical columns present in the CSV header.
    #[serde(default)]
    pub categorical: Option<Vec<String>>,
    #[serde(default = "ratio")]
    pub split_ratio: f64,
    #[serde(default = "master_seed")]
    pub seed: u64,
    /// `null` disables oversampling.
    #[serde(default = "smote")]
    pub smote: Option<SmoteOptions>,
    #[serde(default)]
    pub selection: SelectionMode,
    #[serde(default)]
    pub model: ModelOptions,
    /// Cross-validation folds for `compare`; 0 disables it.
    #[serde(default = "five")]
    pub folds: usize,
    #[serde(default = "output_dir")]
    pub output_dir: PathBuf,
}

fn five() -> usize {
    5
}
fn stacking() -> MethodKind {
    MethodKind::Stacking
}
fn target() -> String {
    DEFAULT_TARGET_COLUMN.to_string()
}
fn classes() -> Vec<String> {
    CANONICAL_CLASSES.iter().map(|s| s.to_string()).collect()
}
fn ratio() -> f64 {
    0.8
}
fn master_seed() -> u64 {
    42
}
fn smote() -> Option<SmoteOptions> {
    Some(SmoteOptions { k_neighbors: 5 })
}
fn output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(CliError::Config(format!(
                "split_ratio {} not in (0, 1)",
                self.split_ratio
            )));
        }
        if self.classes.is_empty() {
            return Err(CliError::Config("classes must not be empty".into()));
        }
        if self.folds == 1 {
            return Err(CliError::Config(
                "folds must be 0 (disabled) or >= 2".into(),
            ));
        }
        if self.smote.as_ref().is_some_and(|s| s.k_neighbors == 0) {
            return Err(CliError::Config("smote.k_neighbors must be >= 1".into()));
        }
        self.model_spec().validate().context("model")?;
        Ok(())
    }

    pub fn dataset(&self) -> Result<&Path> {
        self.dataset.as_deref().ok_or_else(|| {
            CliError::Config("no dataset given (config `dataset` or --dataset)".into())
        })
    }

    pub fn split_seed(&self) -> u64 {
        self.seed.wrapping_add(SPLIT_OFFSET)
    }

    pub fn folds_seed(&self) -> u64 {
        self.seed.wrapping_add(FOLDS_OFFSET)
    }

    pub fn smote_config(&self) -> Option<SmoteConfig> {
        self.smote.as_ref().map(|s| SmoteConfig {
            k_neighbors: s.k_neighbors,
            seed: self.seed.wrapping_add(SMOTE_OFFSET),
        })
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            kind: self.model.kind,
            hyperparameters: self.model.hyperparameters.clone(),
            seed: self.seed.wrapping_add(MODEL_OFFSET),
        }
    }

    /// Loader options: schema document first, then explicit config keys,
    /// then the MQTT categorical columns found in the header.
    pub fn load_options(&self) -> Result<LoadOptions> {
        let mut opts = match &self.schema {
            Some(p) => SchemaDef::load(p).context("schema")?.to_load_options(),
            None => LoadOptions::with_target(self.target_column.clone()),
        };
        if let Some(c) = &self.categorical {
            opts.categorical = c.clone();
        } else if self.schema.is_none() {
            let header = csv_header(self.dataset()?).context("read header")?;
            opts.categorical = MQTTSET_CATEGORICAL_COLUMNS
                .iter()
                .filter(|c| header.iter().any(|h| h == *c))
                .map(|c| c.to_string())
                .collect();
        }
        Ok(opts)
    }

    pub fn prepare_config(&self, opts: &LoadOptions) -> PrepareConfig {
        PrepareConfig {
            classes: self.classes.clone(),
            categorical: opts.categorical.clone(),
            split_ratio: self.split_ratio,
            split_seed: self.split_seed(),
            smote: self.smote_config(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_unknown_keys() {
        let c = RunConfig::default();
        assert_eq!(c.seed, 42);
        assert_eq!(c.folds, 5);
        assert_eq!(c.smote_config().unwrap().seed, 43);
        assert_eq!(c.model_spec().seed, 44);
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 1}"#).is_err());
        let off: RunConfig = serde_json::from_str(r#"{"smote": null}"#).unwrap();
        assert!(off.smote_config().is_none());
    }

    #[test]
    fn validation() {
        let c = RunConfig {
            split_ratio: 1.0,
            ..RunConfig::default()
        };
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        let mut c = RunConfig::default();
        c.model.hyperparameters.insert("bogus".into(), 1.into());
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
    }
}
