use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use mqtt_ids_core::data::{load_csv, recode_labels, write_csv, DEFAULT_TARGET_COLUMN};
use mqtt_ids_core::ensembles::TrainedModel;
use mqtt_ids_core::eval::{evaluate_dataset, render_markdown};
use mqtt_ids_core::pipeline::{
    compare, fit_timed, prepare, select_features, CompareConfig, Prepared, PreprocessArtifacts,
};
use mqtt_ids_core::select::project;
use mqtt_ids_core::synth::{generate_csv, SynthSpec};
use mqtt_ids_core::{Dataset, LoadOptions, MethodKind, SelectionReport};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Context, Result};

pub const TRAIN_CSV: &str = "train.csv";
pub const TEST_CSV: &str = "test.csv";
pub const ARTIFACTS_JSON: &str = "artifacts.json";
pub const SELECTION_JSON: &str = "selection.json";
pub const MODEL_JSON: &str = "model.json";
pub const TRAINING_JSON: &str = "training.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";
pub const COMPARE_JSON: &str = "compare.json";
pub const COMPARE_MD: &str = "compare.md";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn synth(spec: &SynthSpec, out: &Path) -> Result<()> {
    let csv = generate_csv(spec).context("synth")?;
    write_text(out, &csv)
}

fn load_raw(cfg: &RunConfig) -> Result<(Dataset, LoadOptions)> {
    let path = cfg.dataset()?;
    let opts = cfg.load_options()?;
    let ds = load_csv(path, &opts).context(format!("load {}", path.display()))?;
    Ok((ds, opts))
}

fn prepare_from_config(cfg: &RunConfig) -> Result<Prepared> {
    let (raw, opts) = load_raw(cfg)?;
    prepare(&raw, &cfg.prepare_config(&opts)).context("prepare")
}

pub fn cmd_prepare(cfg: &RunConfig) -> Result<PathBuf> {
    let p = prepare_from_config(cfg)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_csv(&p.train, dir.join(TRAIN_CSV), DEFAULT_TARGET_COLUMN).context("write train set")?;
    write_csv(&p.test, dir.join(TEST_CSV), DEFAULT_TARGET_COLUMN).context("write test set")?;
    write_json(&dir.join(ARTIFACTS_JSON), &p.artifacts)?;
    Ok(dir.clone())
}

/// A prepared split as written by `prepare`.
pub struct PreparedDir {
    pub artifacts: PreprocessArtifacts,
    pub train: Dataset,
    pub test: Dataset,
}

pub fn load_prepared(dir: &Path) -> Result<PreparedDir> {
    let artifacts = PreprocessArtifacts::from_json(&read_text(&dir.join(ARTIFACTS_JSON))?)
        .context("artifacts")?;
    let load = |name: &str| -> Result<Dataset> {
        let path = dir.join(name);
        let ds =
            load_csv(&path, &LoadOptions::default()).context(format!("load {}", path.display()))?;
        recode_labels(&ds, &artifacts.label_encoding)
            .context(format!("labels of {}", path.display()))
    };
    Ok(PreparedDir {
        train: load(TRAIN_CSV)?,
        test: load(TEST_CSV)?,
        artifacts,
    })
}

pub fn cmd_select(cfg: &RunConfig, prepared: &Path, out: &Path) -> Result<SelectionReport> {
    let p = load_prepared(prepared)?;
    let report = select_features(&p.train, &cfg.selection).context("select")?;
    write_json(out, &report)?;
    Ok(report)
}

#[derive(Serialize)]
struct TrainingRecord<'a> {
    kind: MethodKind,
    seed: u64,
    n_train_rows: usize,
    feature_names: &'a [String],
    fit_time_s: f64,
}

pub fn cmd_train(
    cfg: &RunConfig,
    prepared: &Path,
    selection: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let p = load_prepared(prepared)?;
    let train = match selection {
        Some(path) => {
            let report: SelectionReport = serde_json::from_str(&read_text(path)?)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            project(&p.train, &report.selected).context("apply selection")?
        }
        None => p.train,
    };
    let spec = cfg.model_spec();
    let (model, fit_time_s) = fit_timed(&train, &spec).context(format!("train {}", spec.kind))?;
    write_text(out, &model.to_json())?;
    let record = TrainingRecord {
        kind: spec.kind,
        seed: spec.seed,
        n_train_rows: train.n_rows(),
        feature_names: &model.feature_names,
        fit_time_s,
    };
    write_json(&out.with_file_name(TRAINING_JSON), &record)?;
    Ok(())
}

pub fn cmd_evaluate(model_path: &Path, prepared: &Path, out_dir: &Path) -> Result<f64> {
    let model = TrainedModel::from_json(&read_text(model_path)?)
        .context(format!("model {}", model_path.display()))?;
    let p = load_prepared(prepared)?;
    if model.label_names != p.artifacts.label_encoding.inverse {
        return Err(CliError::Core {
            context: "evaluate".into(),
            source: mqtt_ids_core::Error::SchemaMismatch(
                "model and data use different class labels".into(),
            ),
        });
    }
    let test =
        mqtt_ids_core::select::project_names(&p.test, &model.feature_names).context("evaluate")?;
    let mut report = evaluate_dataset(&model.model, &test).context("evaluate")?;
    let training = model_path.with_file_name(TRAINING_JSON);
    if let Ok(text) = fs::read_to_string(&training) {
        if let Some(t) = serde_json::from_str::<serde_json::Value>(&text)
            .ok()
            .and_then(|v| v["fit_time_s"].as_f64())
        {
            report.fit_time_s = t;
        }
    }
    write_json(&out_dir.join(REPORT_JSON), &report)?;
    let label = model.spec.kind.label();
    write_text(
        &out_dir.join(REPORT_MD),
        &render_markdown(&[(label, &report)]),
    )?;
    Ok(report.accuracy)
}

#[derive(Serialize)]
struct CompareOutput<'a> {
    seed: u64,
    folds: usize,
    selected_features: &'a [String],
    class_counts_train: BTreeMap<String, usize>,
    #[serde(flatten)]
    report: &'a mqtt_ids_core::pipeline::ComparisonReport,
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<mqtt_ids_core::pipeline::ComparisonReport> {
    let p = prepare_from_config(cfg)?;
    let selection = select_features(&p.train, &cfg.selection).context("select")?;
    let fs_ = &selection.selected;
    let train = project(&p.train, fs_).context("apply selection")?;
    let test = project(&p.test, fs_).context("apply selection")?;
    let encoded = project(&p.encoded, fs_).context("apply selection")?;
    let model_seed = cfg.model_spec().seed;
    let cc = CompareConfig {
        methods: CompareConfig::all_methods(model_seed),
        folds: cfg.folds,
        cv_seed: cfg.folds_seed(),
        smote: cfg.smote_config(),
    };
    let report = compare(&train, &test, (cfg.folds >= 2).then_some(&encoded), &cc);
    let counts = train
        .label_names()
        .iter()
        .cloned()
        .zip(train.class_counts())
        .collect();
    let out = CompareOutput {
        seed: cfg.seed,
        folds: cfg.folds,
        selected_features: &fs_.names,
        class_counts_train: counts,
        report: &report,
    };
    let dir = &cfg.output_dir;
    write_json(&dir.join(COMPARE_JSON), &out)?;
    write_json(&dir.join(SELECTION_JSON), &selection)?;
    write_text(&dir.join(COMPARE_MD), &report.to_markdown())?;
    Ok(report)
}
