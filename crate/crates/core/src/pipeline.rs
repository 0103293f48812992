//! End-to-end workflow: preparation of a raw dataset, feature selection,
//! training with evaluation, and the seven-method comparison.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{encode_class_labels, filter_classes, Dataset, LabelEncoding, CANONICAL_CLASSES};
use crate::ensembles::{fit_model, MethodKind, ModelSpec, TrainedModel};
use crate::error::{Error, Result};
use crate::eval::{cross_validate, evaluate_dataset, render_markdown, CvReport, EvalReport};
use crate::preprocess::{
    apply_categorical_encoding, apply_minmax, fit_categorical_encoding, fit_minmax,
    smote_oversample_traced, stratified_split, CategoricalEncodingMaps, ScalerParams, SmoteConfig,
    SplitIndices,
};
use crate::select::{
    consensus_select, golden_final_set, project, rank_all, FeatureSet, SelectionReport,
};

/// Preprocessing and model applied to one train/test pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    /// `None` skips oversampling.
    pub smote: Option<SmoteConfig>,
    pub model: ModelSpec,
}

/// Fits min-max scaling on `train`, applies it to both sets, oversamples
/// `train`, trains the model and scores it on `test`.
pub fn fit_and_evaluate(
    train: &Dataset,
    test: &Dataset,
    spec: &PipelineSpec,
) -> Result<(TrainedModel, EvalReport)> {
    let scaler = fit_minmax(train)?;
    let mut train = apply_minmax(&scaler, train)?;
    let test = apply_minmax(&scaler, test)?;
    if let Some(cfg) = &spec.smote {
        train = smote_oversample_traced(&train, cfg)?.dataset;
    }
    train_and_evaluate(&train, &test, &spec.model)
}

/// Trains on an already prepared `train` set and scores on `test`.
pub fn train_and_evaluate(
    train: &Dataset,
    test: &Dataset,
    spec: &ModelSpec,
) -> Result<(TrainedModel, EvalReport)> {
    let (trained, fit_time) = fit_timed(train, spec)?;
    let mut report = evaluate_dataset(&trained.model, test)?;
    report.fit_time_s = fit_time;
    Ok((trained, report))
}

/// Fits `spec` on `ds`, returning the model and the wall-clock fit time.
pub fn fit_timed(ds: &Dataset, spec: &ModelSpec) -> Result<(TrainedModel, f64)> {
    spec.validate()?;
    let start = Instant::now();
    let model = fit_model(spec, ds.features(), ds.labels(), ds.n_classes())?;
    let elapsed = start.elapsed().as_secs_f64();
    Ok((
        TrainedModel {
            spec: spec.clone(),
            feature_names: ds.feature_names(),
            label_names: ds.label_names().to_vec(),
            model,
        },
        elapsed,
    ))
}

fn default_classes() -> Vec<String> {
    CANONICAL_CLASSES.iter().map(|s| s.to_string()).collect()
}

fn default_ratio() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepareConfig {
    /// Classes to keep; rows of other classes are dropped.
    #[serde(default = "default_classes")]
    pub classes: Vec<String>,
    /// Columns to label-encode.
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default = "default_ratio")]
    pub split_ratio: f64,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default)]
    pub smote: Option<SmoteConfig>,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            classes: default_classes(),
            categorical: Vec::new(),
            split_ratio: default_ratio(),
            split_seed: 0,
            smote: Some(SmoteConfig::default()),
        }
    }
}

/// Everything fitted during preparation, enough to replay it on the same input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessArtifacts {
    pub classes: Vec<String>,
    pub label_encoding: LabelEncoding,
    pub categorical: CategoricalEncodingMaps,
    pub feature_names: Vec<String>,
    pub scaler: ScalerParams,
    pub split: SplitIndices,
    pub smote: Option<SmoteConfig>,
    /// Rows appended to the training set by SMOTE.
    pub n_synthetic: usize,
}

impl PreprocessArtifacts {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable artifacts")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::MalformedDocument(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    /// Filtered and encoded, before splitting and scaling.
    pub encoded: Dataset,
    /// Scaled and oversampled training partition.
    pub train: Dataset,
    /// Scaled test partition.
    pub test: Dataset,
    pub artifacts: PreprocessArtifacts,
}

/// Class filtering, label and categorical encoding, stratified split, min-max
/// scaling fitted on the training rows, then SMOTE on the training rows.
pub fn prepare(raw: &Dataset, cfg: &PrepareConfig) -> Result<Prepared> {
    let filtered = filter_classes(raw, &cfg.classes)?;
    let (labelled, label_encoding) = encode_class_labels(&filtered)?;
    let categorical = fit_categorical_encoding(&labelled, &cfg.categorical)?;
    let encoded = apply_categorical_encoding(&labelled, &categorical)?;
    let split = stratified_split(&encoded, cfg.split_ratio, cfg.split_seed)?;
    let train = encoded.select_rows(&split.train);
    let scaler = fit_minmax(&train)?;
    let mut train = apply_minmax(&scaler, &train)?;
    let test = apply_minmax(&scaler, &encoded.select_rows(&split.test))?;
    let mut n_synthetic = 0;
    if let Some(s) = &cfg.smote {
        let out = smote_oversample_traced(&train, s)?;
        n_synthetic = out.parents.len();
        train = out.dataset;
    }
    Ok(Prepared {
        artifacts: PreprocessArtifacts {
            classes: cfg.classes.clone(),
            label_encoding,
            categorical,
            feature_names: encoded.feature_names(),
            scaler,
            split,
            smote: cfg.smote,
            n_synthetic,
        },
        encoded,
        train,
        test,
    })
}

/// How the final feature set is chosen.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectionMode {
    /// The fixed ten-feature MQTT set.
    #[default]
    Golden,
    Consensus {
        #[serde(default = "ten")]
        n: usize,
        #[serde(default = "ten")]
        top_per_method: usize,
    },
    Manual {
        features: Vec<String>,
    },
}

fn ten() -> usize {
    10
}

/// Ranks the features of `train` with all three methods and picks the final
/// set according to `mode`. Every selected name must exist in `train`.
pub fn select_features(train: &Dataset, mode: &SelectionMode) -> Result<SelectionReport> {
    let k = match mode {
        SelectionMode::Consensus { top_per_method, .. } => *top_per_method,
        _ => 10,
    };
    let rankings = rank_all(train, k.max(1))?;
    let selected = match mode {
        SelectionMode::Golden => golden_final_set(),
        SelectionMode::Consensus { n, top_per_method } => {
            consensus_select(&rankings, *n, *top_per_method)?
        }
        SelectionMode::Manual { features } => FeatureSet::manual(features)?,
    };
    if let Some(missing) = selected
        .names
        .iter()
        .find(|n| train.column_index(n).is_none())
    {
        return Err(Error::MissingColumn(missing.clone()));
    }
    Ok(SelectionReport { rankings, selected })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub methods: Vec<ModelSpec>,
    /// Folds for per-method cross-validation; values below 2 skip it.
    pub folds: usize,
    pub cv_seed: u64,
    /// Oversampling inside each cross-validation training fold.
    pub smote: Option<SmoteConfig>,
}

impl CompareConfig {
    /// All seven methods with default hyperparameters.
    pub fn all_methods(model_seed: u64) -> Vec<ModelSpec> {
        MethodKind::ALL
            .iter()
            .map(|&k| ModelSpec::new(k, model_seed))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: MethodKind,
    pub label: String,
    pub holdout: Option<EvalReport>,
    pub cv: Option<CvReport>,
    pub error: Option<String>,
}

impl ComparisonRow {
    /// Mean CV accuracy when cross-validation ran, else hold-out accuracy.
    pub fn score(&self) -> Option<f64> {
        match (&self.cv, &self.holdout) {
            (Some(cv), _) => Some(cv.accuracy.mean),
            (None, Some(h)) => Some(h.accuracy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Sorted by [`ComparisonRow::score`] descending; failed methods last.
    pub rows: Vec<ComparisonRow>,
}

fn run_method(
    spec: &ModelSpec,
    train: &Dataset,
    test: &Dataset,
    cv_data: Option<&Dataset>,
    cfg: &CompareConfig,
) -> Result<(EvalReport, Option<CvReport>)> {
    let (_, holdout) = train_and_evaluate(train, test, spec)?;
    let cv = match cv_data {
        Some(ds) if cfg.folds >= 2 => {
            let p = PipelineSpec {
                smote: cfg.smote,
                model: spec.clone(),
            };
            Some(cross_validate(&p, ds, cfg.folds, cfg.cv_seed)?)
        }
        _ => None,
    };
    Ok((holdout, cv))
}

/// Trains and scores every method on the same prepared hold-out split and,
/// when `cv_data` is given, cross-validates it there. A failing method is
/// reported in its row and does not stop the others.
pub fn compare(
    train: &Dataset,
    test: &Dataset,
    cv_data: Option<&Dataset>,
    cfg: &CompareConfig,
) -> ComparisonReport {
    let mut rows: Vec<ComparisonRow> = cfg
        .methods
        .par_iter()
        .map(|spec| {
            let (holdout, cv, error) = match run_method(spec, train, test, cv_data, cfg) {
                Ok((h, cv)) => (Some(h), cv, None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            ComparisonRow {
                method: spec.kind,
                label: spec.kind.label().to_string(),
                holdout,
                cv,
                error,
            }
        })
        .collect();
    rows.sort_by(|a, b| match (a.score(), b.score()) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    ComparisonReport { rows }
}

impl ComparisonReport {
    /// Summary table sorted by accuracy, followed by the per-class table.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| Rank | Methods | Accuracy | Macro F1 | CV accuracy | Training time | Test time |\n\
             |---|---|---|---|---|---|---|\n",
        );
        for (i, r) in self.rows.iter().enumerate() {
            match (&r.holdout, &r.error) {
                (Some(h), _) => {
                    let cv =
                        r.cv.as_ref()
                            .map(|c| format!("{:.4} ± {:.4}", c.accuracy.mean, c.accuracy.std))
                            .unwrap_or_else(|| "-".into());
                    let _ = writeln!(
                        out,
                        "| {} | {} | {:.4} | {:.4} | {cv} | {:.4} | {:.4} |",
                        i + 1,
                        r.label,
                        h.accuracy,
                        h.macro_f1,
                        h.fit_time_s,
                        h.predict_time_s
                    );
                }
                (None, e) => {
                    let _ = writeln!(
                        out,
                        "| {} | {} | failed: {} |  |  |  |  |",
                        i + 1,
                        r.label,
                        e.as_deref().unwrap_or("unknown error")
                    );
                }
            }
        }
        let per_class: Vec<(&str, &EvalReport)> = self
            .rows
            .iter()
            .filter_map(|r| r.holdout.as_ref().map(|h| (r.label.as_str(), h)))
            .collect();
        out.push('\n');
        out.push_str(&render_markdown(&per_class));
        out
    }
}

/// Restricts prepared data to a selection.
pub fn apply_selection(ds: &Dataset, fs: &FeatureSet) -> Result<Dataset> {
    project(ds, fs)
}
