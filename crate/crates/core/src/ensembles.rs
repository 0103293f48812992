//! Stacking, hard voting and bagging over the base classifiers, plus the
//! [`Model`] union and its JSON document form.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::classifiers::{
    self, check_training, Classifier, ClassifierKind, ClassifierSpec, FittedClassifier,
};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::preprocess::stratified_folds;
use crate::seed::{derive_seed, rng_for, streams};

pub const DOCUMENT_VERSION: &str = "1";

/// The seven methods compared by the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    RandomForest,
    DecisionTree,
    Knn,
    Gbt,
    Stacking,
    Voting,
    Bagging,
}

impl MethodKind {
    /// Report order: the four base learners, then the three ensembles.
    pub const ALL: [MethodKind; 7] = [
        MethodKind::RandomForest,
        MethodKind::DecisionTree,
        MethodKind::Knn,
        MethodKind::Gbt,
        MethodKind::Stacking,
        MethodKind::Voting,
        MethodKind::Bagging,
    ];

    pub fn base(self) -> Option<ClassifierKind> {
        match self {
            MethodKind::RandomForest => Some(ClassifierKind::RandomForest),
            MethodKind::DecisionTree => Some(ClassifierKind::DecisionTree),
            MethodKind::Knn => Some(ClassifierKind::Knn),
            MethodKind::Gbt => Some(ClassifierKind::Gbt),
            _ => None,
        }
    }

    pub fn is_ensemble(self) -> bool {
        self.base().is_none()
    }

    pub fn label(self) -> &'static str {
        match self {
            MethodKind::RandomForest => "RF",
            MethodKind::DecisionTree => "DT",
            MethodKind::Knn => "KNN",
            MethodKind::Gbt => "XGBoost",
            MethodKind::Stacking => "Stacking",
            MethodKind::Voting => "Voting",
            MethodKind::Bagging => "Bagging",
        }
    }
}

impl From<ClassifierKind> for MethodKind {
    fn from(k: ClassifierKind) -> Self {
        match k {
            ClassifierKind::RandomForest => MethodKind::RandomForest,
            ClassifierKind::DecisionTree => MethodKind::DecisionTree,
            ClassifierKind::Knn => MethodKind::Knn,
            ClassifierKind::Gbt => MethodKind::Gbt,
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// What to train: a method kind, its hyperparameters and a seed.
///
/// Ensemble hyperparameters may name member specs explicitly; otherwise the
/// four default base learners (RF, DT, KNN, GBT) are used with the model seed,
/// and the stacking meta-learner is a default RF seeded with `seed + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: MethodKind,
    #[serde(default)]
    pub hyperparameters: Map<String, Value>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StackingParams {
    #[serde(default)]
    bases: Option<Vec<ClassifierSpec>>,
    #[serde(default)]
    meta: Option<ClassifierSpec>,
    #[serde(default = "five")]
    folds: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VotingParams {
    #[serde(default)]
    members: Option<Vec<ClassifierSpec>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BaggingParams {
    #[serde(default)]
    base: Option<ClassifierSpec>,
    #[serde(default = "ten")]
    n_bags: usize,
    /// `false` trains every bag on the unshuffled training set.
    #[serde(default = "yes")]
    bootstrap: bool,
    /// `false` reuses the base spec's seed for every bag.
    #[serde(default = "yes")]
    reseed_members: bool,
}

fn five() -> usize {
    5
}
fn ten() -> usize {
    10
}
fn yes() -> bool {
    true
}

pub fn default_base_specs(seed: u64) -> Vec<ClassifierSpec> {
    ClassifierKind::ALL
        .iter()
        .map(|&k| ClassifierSpec::new(k, seed))
        .collect()
}

impl ModelSpec {
    pub fn new(kind: MethodKind, seed: u64) -> Self {
        Self {
            kind,
            hyperparameters: Map::new(),
            seed,
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.hyperparameters.insert(key.to_string(), value.into());
        self
    }

    pub fn base(spec: &ClassifierSpec) -> Self {
        Self {
            kind: spec.kind.into(),
            hyperparameters: spec.hyperparameters.clone(),
            seed: spec.seed,
        }
    }

    fn parse<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(Value::Object(self.hyperparameters.clone()))
            .map_err(|e| Error::InvalidHyperparameter(format!("{}: {e}", self.kind)))
    }

    fn classifier_spec(&self) -> Option<ClassifierSpec> {
        self.kind.base().map(|kind| ClassifierSpec {
            kind,
            hyperparameters: self.hyperparameters.clone(),
            seed: self.seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            MethodKind::Stacking => {
                let p: StackingParams = self.parse()?;
                if p.folds < 2 {
                    return Err(Error::InvalidHyperparameter(
                        "stacking folds must be >= 2".into(),
                    ));
                }
                for s in p.bases.iter().flatten().chain(p.meta.iter()) {
                    s.validate()?;
                }
                if p.bases.as_ref().is_some_and(Vec::is_empty) {
                    return Err(Error::InvalidHyperparameter(
                        "stacking needs base learners".into(),
                    ));
                }
            }
            MethodKind::Voting => {
                let p: VotingParams = self.parse()?;
                if p.members.as_ref().is_some_and(|m| m.len() < 2) {
                    return Err(Error::InvalidHyperparameter(
                        "voting needs >= 2 members".into(),
                    ));
                }
                for s in p.members.iter().flatten() {
                    s.validate()?;
                }
            }
            MethodKind::Bagging => {
                let p: BaggingParams = self.parse()?;
                if p.n_bags == 0 {
                    return Err(Error::InvalidHyperparameter("n_bags must be >= 1".into()));
                }
                if let Some(b) = &p.base {
                    b.validate()?;
                }
            }
            _ => self.classifier_spec().expect("base kind").validate()?,
        }
        Ok(())
    }
}

/// Stacked generalisation: base learners' out-of-fold class probabilities feed
/// a meta-learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackingModel {
    pub base_specs: Vec<ClassifierSpec>,
    pub base_models: Vec<FittedClassifier>,
    pub meta_spec: ClassifierSpec,
    pub meta_model: FittedClassifier,
    pub folds: usize,
    /// Column names of the meta-feature matrix, `<base kind>:p<class>`.
    pub meta_feature_layout: Vec<String>,
}

/// Out-of-fold meta-features and bookkeeping.
#[derive(Debug, Clone)]
pub struct OofMeta {
    pub features: Matrix,
    /// Fold that held out each row.
    pub fold_of_row: Vec<usize>,
    /// How many times each row received an out-of-fold prediction.
    pub coverage: Vec<usize>,
}

fn meta_layout(bases: &[ClassifierSpec], n_classes: usize) -> Vec<String> {
    bases
        .iter()
        .enumerate()
        .flat_map(|(b, s)| {
            let name = format!("{b}.{}", MethodKind::from(s.kind).label());
            (0..n_classes).map(move |c| format!("{name}:p{c}"))
        })
        .collect()
}

/// Builds the out-of-fold meta-feature matrix: for every stratified fold the
/// bases are trained on the other folds and predict the held-out rows.
pub fn out_of_fold_meta(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    bases: &[ClassifierSpec],
    folds: usize,
    seed: u64,
) -> Result<OofMeta> {
    check_training(x, y, n_classes)?;
    let fold_rows = stratified_folds(y, n_classes, folds, seed)?;
    let n = y.len();
    let width = bases.len() * n_classes;
    let jobs: Vec<(usize, usize)> = (0..folds)
        .flat_map(|f| (0..bases.len()).map(move |b| (f, b)))
        .collect();
    let blocks: Vec<Matrix> = jobs
        .par_iter()
        .map(|&(f, b)| {
            let held = &fold_rows[f];
            let train: Vec<usize> = fold_rows
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, r)| r.iter().copied())
                .collect();
            let tx = x.select_rows(&train);
            let ty: Vec<usize> = train.iter().map(|&i| y[i]).collect();
            let m = classifiers::fit(&bases[b], &tx, &ty, n_classes)?;
            m.predict_proba(&x.select_rows(held))
        })
        .collect::<Result<_>>()?;

    let mut features = Matrix::zeros(n, width);
    let mut fold_of_row = vec![usize::MAX; n];
    let mut coverage = vec![0usize; n];
    for (&(f, b), block) in jobs.iter().zip(&blocks) {
        for (local, &row) in fold_rows[f].iter().enumerate() {
            let dst = &mut features.row_mut(row)[b * n_classes..(b + 1) * n_classes];
            dst.copy_from_slice(block.row(local));
            if b == 0 {
                coverage[row] += 1;
                fold_of_row[row] = f;
            }
        }
    }
    Ok(OofMeta {
        features,
        fold_of_row,
        coverage,
    })
}

pub fn fit_stacking(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    bases: &[ClassifierSpec],
    meta: &ClassifierSpec,
    folds: usize,
    seed: u64,
) -> Result<StackingModel> {
    if bases.is_empty() {
        return Err(Error::InvalidHyperparameter(
            "stacking needs base learners".into(),
        ));
    }
    let oof = out_of_fold_meta(x, y, n_classes, bases, folds, seed)?;
    let meta_model = classifiers::fit(meta, &oof.features, y, n_classes)?;
    let base_models = bases
        .par_iter()
        .map(|s| classifiers::fit(s, x, y, n_classes))
        .collect::<Result<Vec<_>>>()?;
    Ok(StackingModel {
        base_specs: bases.to_vec(),
        base_models,
        meta_spec: meta.clone(),
        meta_model,
        folds,
        meta_feature_layout: meta_layout(bases, n_classes),
    })
}

impl StackingModel {
    pub fn meta_features(&self, x: &Matrix) -> Result<Matrix> {
        let blocks = self
            .base_models
            .iter()
            .map(|m| m.predict_proba(x))
            .collect::<Result<Vec<_>>>()?;
        Matrix::hstack(&blocks)
    }
}

impl Classifier for StackingModel {
    fn n_features(&self) -> usize {
        self.base_models[0].n_features()
    }

    fn n_classes(&self) -> usize {
        self.meta_model.n_classes()
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        x.check_cols(self.n_features())?;
        self.meta_model.predict_proba(&self.meta_features(x)?)
    }
}

/// Hard-vote fractions over member predictions.
fn vote_fractions(members: &[FittedClassifier], x: &Matrix, n_classes: usize) -> Result<Matrix> {
    let preds = members
        .iter()
        .map(|m| m.predict(x))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Matrix::zeros(x.n_rows(), n_classes);
    let w = 1.0 / members.len() as f64;
    for p in &preds {
        for (i, &c) in p.iter().enumerate() {
            let v = out.get(i, c);
            out.set(i, c, v + w);
        }
    }
    Ok(out)
}

/// Hard majority vote; ties go to the lowest class code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingModel {
    pub member_specs: Vec<ClassifierSpec>,
    pub members: Vec<FittedClassifier>,
}

pub fn fit_voting(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    specs: &[ClassifierSpec],
) -> Result<VotingModel> {
    if specs.len() < 2 {
        return Err(Error::InvalidHyperparameter(
            "voting needs >= 2 members".into(),
        ));
    }
    let members = specs
        .par_iter()
        .map(|s| classifiers::fit(s, x, y, n_classes))
        .collect::<Result<Vec<_>>>()?;
    Ok(VotingModel {
        member_specs: specs.to_vec(),
        members,
    })
}

impl Classifier for VotingModel {
    fn n_features(&self) -> usize {
        self.members[0].n_features()
    }

    fn n_classes(&self) -> usize {
        self.members[0].n_classes()
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        vote_fractions(&self.members, x, self.n_classes())
    }
}

/// Majority vote over copies of one base model trained on bootstrap resamples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaggingModel {
    pub base_spec: ClassifierSpec,
    pub bags: Vec<FittedClassifier>,
    /// Seed of each bag's resample; `None` when bootstrapping was disabled.
    pub bootstrap_seeds: Vec<Option<u64>>,
}

/// `bootstrap = false` and `reseed_members = false` make every bag an exact
/// copy of the base model, which tests rely on.
#[allow(clippy::too_many_arguments)]
pub fn fit_bagging(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    base: &ClassifierSpec,
    n_bags: usize,
    seed: u64,
    bootstrap: bool,
    reseed_members: bool,
) -> Result<BaggingModel> {
    if n_bags == 0 {
        return Err(Error::InvalidHyperparameter("n_bags must be >= 1".into()));
    }
    check_training(x, y, n_classes)?;
    let n = y.len();
    let fitted: Vec<(FittedClassifier, Option<u64>)> = (0..n_bags)
        .into_par_iter()
        .map(|b| {
            let spec = if reseed_members {
                base.clone()
                    .with_seed(derive_seed(base.seed, streams::BAGGING, b as u64))
            } else {
                base.clone()
            };
            if bootstrap {
                let s = derive_seed(seed, streams::BAGGING, b as u64);
                let mut rng = rng_for(s, 0, 0);
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let ty: Vec<usize> = rows.iter().map(|&i| y[i]).collect();
                Ok((
                    classifiers::fit(&spec, &x.select_rows(&rows), &ty, n_classes)?,
                    Some(s),
                ))
            } else {
                Ok((classifiers::fit(&spec, x, y, n_classes)?, None))
            }
        })
        .collect::<Result<_>>()?;
    let (bags, bootstrap_seeds) = fitted.into_iter().unzip();
    Ok(BaggingModel {
        base_spec: base.clone(),
        bags,
        bootstrap_seeds,
    })
}

impl Classifier for BaggingModel {
    fn n_features(&self) -> usize {
        self.bags[0].n_features()
    }

    fn n_classes(&self) -> usize {
        self.bags[0].n_classes()
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        vote_fractions(&self.bags, x, self.n_classes())
    }
}

/// Any trained model the toolkit produces.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Base(FittedClassifier),
    Stacking(StackingModel),
    Voting(VotingModel),
    Bagging(BaggingModel),
}

impl Classifier for Model {
    fn n_features(&self) -> usize {
        match self {
            Model::Base(m) => m.n_features(),
            Model::Stacking(m) => m.n_features(),
            Model::Voting(m) => m.n_features(),
            Model::Bagging(m) => m.n_features(),
        }
    }

    fn n_classes(&self) -> usize {
        match self {
            Model::Base(m) => m.n_classes(),
            Model::Stacking(m) => m.n_classes(),
            Model::Voting(m) => m.n_classes(),
            Model::Bagging(m) => m.n_classes(),
        }
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            Model::Base(m) => m.predict_proba(x),
            Model::Stacking(m) => m.predict_proba(x),
            Model::Voting(m) => m.predict_proba(x),
            Model::Bagging(m) => m.predict_proba(x),
        }
    }
}

/// Trains whatever `spec` describes.
pub fn fit_model(spec: &ModelSpec, x: &Matrix, y: &[usize], n_classes: usize) -> Result<Model> {
    spec.validate()?;
    Ok(match spec.kind {
        MethodKind::Stacking => {
            let p: StackingParams = spec.parse()?;
            let bases = p.bases.unwrap_or_else(|| default_base_specs(spec.seed));
            let meta = p.meta.unwrap_or_else(|| {
                ClassifierSpec::new(ClassifierKind::RandomForest, spec.seed.wrapping_add(1))
            });
            Model::Stacking(fit_stacking(
                x, y, n_classes, &bases, &meta, p.folds, spec.seed,
            )?)
        }
        MethodKind::Voting => {
            let p: VotingParams = spec.parse()?;
            let members = p.members.unwrap_or_else(|| default_base_specs(spec.seed));
            Model::Voting(fit_voting(x, y, n_classes, &members)?)
        }
        MethodKind::Bagging => {
            let p: BaggingParams = spec.parse()?;
            let base = p
                .base
                .unwrap_or_else(|| ClassifierSpec::new(ClassifierKind::RandomForest, spec.seed));
            Model::Bagging(fit_bagging(
                x,
                y,
                n_classes,
                &base,
                p.n_bags,
                spec.seed,
                p.bootstrap,
                p.reseed_members,
            )?)
        }
        _ => {
            let cs = spec.classifier_spec().expect("base kind");
            Model::Base(classifiers::fit(&cs, x, y, n_classes)?)
        }
    })
}

/// Versioned JSON form of a trained model. Ensemble payloads nest one
/// document per member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub version: String,
    pub kind: MethodKind,
    pub hyperparameters: Map<String, Value>,
    pub seed: u64,
    pub n_classes: usize,
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
    pub payload: Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StackingPayload {
    folds: usize,
    meta_feature_layout: Vec<String>,
    bases: Vec<ModelDocument>,
    meta: ModelDocument,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VotingPayload {
    mode: String,
    members: Vec<ModelDocument>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BaggingPayload {
    bootstrap_seeds: Vec<Option<u64>>,
    bags: Vec<ModelDocument>,
}

/// A model with the context needed to apply it to new data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
    pub model: Model,
}

fn malformed(e: impl fmt::Display) -> Error {
    Error::MalformedDocument(e.to_string())
}

fn base_document(
    spec: &ClassifierSpec,
    m: &FittedClassifier,
    feature_names: &[String],
    label_names: &[String],
) -> ModelDocument {
    let mut payload = serde_json::to_value(m).expect("serializable model");
    if let Value::Object(o) = &mut payload {
        o.remove("kind");
    }
    ModelDocument {
        version: DOCUMENT_VERSION.to_string(),
        kind: spec.kind.into(),
        hyperparameters: spec.hyperparameters.clone(),
        seed: spec.seed,
        n_classes: m.n_classes(),
        feature_names: feature_names.to_vec(),
        label_names: label_names.to_vec(),
        payload,
    }
}

fn base_from_document(doc: &ModelDocument) -> Result<(ClassifierSpec, FittedClassifier)> {
    check_version(&doc.version)?;
    let kind = doc
        .kind
        .base()
        .ok_or_else(|| malformed(format!("`{}` is not a base learner", doc.kind)))?;
    let mut payload = doc.payload.clone();
    match &mut payload {
        Value::Object(o) => {
            o.insert("kind".into(), serde_json::to_value(kind).expect("kind"));
        }
        _ => return Err(malformed("payload must be an object")),
    }
    let m: FittedClassifier = serde_json::from_value(payload).map_err(malformed)?;
    m.check_consistent()?;
    if m.n_classes() != doc.n_classes {
        return Err(malformed("n_classes disagrees with payload"));
    }
    if !doc.feature_names.is_empty() && doc.feature_names.len() != m.n_features() {
        return Err(malformed("feature_names disagree with payload"));
    }
    let spec = ClassifierSpec {
        kind,
        hyperparameters: doc.hyperparameters.clone(),
        seed: doc.seed,
    };
    Ok((spec, m))
}

fn check_version(v: &str) -> Result<()> {
    if v != DOCUMENT_VERSION {
        return Err(Error::VersionMismatch(v.to_string()));
    }
    Ok(())
}

impl TrainedModel {
    pub fn to_document(&self) -> ModelDocument {
        let (f, l) = (&self.feature_names, &self.label_names);
        let docs = |specs: &[ClassifierSpec], ms: &[FittedClassifier]| -> Vec<ModelDocument> {
            specs
                .iter()
                .zip(ms)
                .map(|(s, m)| base_document(s, m, f, l))
                .collect()
        };
        let payload = match &self.model {
            Model::Base(m) => {
                let spec = self.spec.classifier_spec().expect("base spec");
                return ModelDocument {
                    seed: self.spec.seed,
                    ..base_document(&spec, m, f, l)
                };
            }
            Model::Stacking(s) => serde_json::to_value(StackingPayload {
                folds: s.folds,
                meta_feature_layout: s.meta_feature_layout.clone(),
                bases: docs(&s.base_specs, &s.base_models),
                meta: base_document(&s.meta_spec, &s.meta_model, &s.meta_feature_layout, l),
            }),
            Model::Voting(v) => serde_json::to_value(VotingPayload {
                mode: "hard".into(),
                members: docs(&v.member_specs, &v.members),
            }),
            Model::Bagging(b) => {
                let specs = vec![b.base_spec.clone(); b.bags.len()];
                serde_json::to_value(BaggingPayload {
                    bootstrap_seeds: b.bootstrap_seeds.clone(),
                    bags: docs(&specs, &b.bags),
                })
            }
        }
        .expect("serializable payload");
        ModelDocument {
            version: DOCUMENT_VERSION.to_string(),
            kind: self.spec.kind,
            hyperparameters: self.spec.hyperparameters.clone(),
            seed: self.spec.seed,
            n_classes: self.model.n_classes(),
            feature_names: f.clone(),
            label_names: l.clone(),
            payload,
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        check_version(&doc.version)?;
        let spec = ModelSpec {
            kind: doc.kind,
            hyperparameters: doc.hyperparameters.clone(),
            seed: doc.seed,
        };
        let model = match doc.kind {
            MethodKind::Stacking => {
                let p: StackingPayload =
                    serde_json::from_value(doc.payload.clone()).map_err(malformed)?;
                let (base_specs, base_models): (Vec<_>, Vec<_>) = p
                    .bases
                    .iter()
                    .map(base_from_document)
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .unzip();
                let (meta_spec, meta_model) = base_from_document(&p.meta)?;
                if base_models.is_empty()
                    || meta_model.n_features() != base_models.len() * doc.n_classes
                    || p.meta_feature_layout.len() != meta_model.n_features()
                {
                    return Err(malformed("stacking layout inconsistent"));
                }
                Model::Stacking(StackingModel {
                    base_specs,
                    base_models,
                    meta_spec,
                    meta_model,
                    folds: p.folds,
                    meta_feature_layout: p.meta_feature_layout,
                })
            }
            MethodKind::Voting => {
                let p: VotingPayload =
                    serde_json::from_value(doc.payload.clone()).map_err(malformed)?;
                if p.mode != "hard" {
                    return Err(malformed(format!("unsupported voting mode `{}`", p.mode)));
                }
                let (member_specs, members): (Vec<_>, Vec<_>) = p
                    .members
                    .iter()
                    .map(base_from_document)
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .unzip();
                if members.len() < 2 {
                    return Err(malformed("voting needs >= 2 members"));
                }
                Model::Voting(VotingModel {
                    member_specs,
                    members,
                })
            }
            MethodKind::Bagging => {
                let p: BaggingPayload =
                    serde_json::from_value(doc.payload.clone()).map_err(malformed)?;
                let parsed = p
                    .bags
                    .iter()
                    .map(base_from_document)
                    .collect::<Result<Vec<_>>>()?;
                if parsed.is_empty() || parsed.len() != p.bootstrap_seeds.len() {
                    return Err(malformed("bagging bags inconsistent"));
                }
                let base_spec = parsed[0].0.clone();
                Model::Bagging(BaggingModel {
                    base_spec,
                    bags: parsed.into_iter().map(|(_, m)| m).collect(),
                    bootstrap_seeds: p.bootstrap_seeds,
                })
            }
            _ => Model::Base(base_from_document(doc)?.1),
        };
        if model.n_classes() != doc.n_classes
            || (!doc.feature_names.is_empty() && model.n_features() != doc.feature_names.len())
        {
            return Err(malformed("model shape disagrees with header"));
        }
        Ok(Self {
            spec,
            feature_names: doc.feature_names.clone(),
            label_names: doc.label_names.clone(),
            model,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("serializable document")
    }

    /// Parses a model document, checking the version before the body.
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(malformed("empty document"));
        }
        let v: Value = serde_json::from_str(text).map_err(malformed)?;
        match v.get("version") {
            Some(Value::String(s)) => check_version(s)?,
            Some(other) => return Err(Error::VersionMismatch(other.to_string())),
            None => return Err(malformed("missing `version`")),
        }
        let doc: ModelDocument = serde_json::from_value(v).map_err(malformed)?;
        Self::from_document(&doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(per_class: usize) -> (Matrix, Vec<usize>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for c in 0..3 {
            for i in 0..per_class {
                let t = (i as f64 * 0.37).sin();
                rows.push(vec![c as f64 * 4.0 + t, t * 0.5 - c as f64]);
                y.push(c);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    fn light_bases(seed: u64) -> Vec<ClassifierSpec> {
        vec![
            ClassifierSpec::new(ClassifierKind::RandomForest, seed).with("n_trees", 10),
            ClassifierSpec::new(ClassifierKind::DecisionTree, seed),
            ClassifierSpec::new(ClassifierKind::Knn, seed),
            ClassifierSpec::new(ClassifierKind::Gbt, seed).with("n_rounds", 10),
        ]
    }

    #[test]
    fn voting_tie_goes_to_lowest_code() {
        // members built directly so their votes are known
        let x = Matrix::from_rows(&[[0.0]]).unwrap();
        let constant = |c: usize| {
            let y = vec![c, c];
            classifiers::fit(
                &ClassifierSpec::new(ClassifierKind::DecisionTree, 0),
                &Matrix::from_rows(&[[0.0], [1.0]]).unwrap(),
                &y,
                3,
            )
            .unwrap()
        };
        let v = VotingModel {
            member_specs: vec![ClassifierSpec::new(ClassifierKind::DecisionTree, 0); 4],
            members: vec![constant(2), constant(1), constant(2), constant(1)],
        };
        assert_eq!(v.predict(&x).unwrap(), vec![1]);
        let v = VotingModel {
            members: vec![constant(1), constant(0), constant(0), constant(2)],
            ..v
        };
        assert_eq!(v.predict(&x).unwrap(), vec![0]);
    }

    #[test]
    fn stacking_shapes_and_determinism() {
        let (x, y) = blobs(20);
        let bases = light_bases(1);
        let meta = ClassifierSpec::new(ClassifierKind::RandomForest, 2).with("n_trees", 10);
        let oof = out_of_fold_meta(&x, &y, 3, &bases, 5, 42).unwrap();
        assert_eq!(oof.features.n_rows(), 60);
        assert_eq!(oof.features.n_cols(), 12);
        assert!(oof.coverage.iter().all(|&c| c == 1));
        let a = fit_stacking(&x, &y, 3, &bases, &meta, 5, 42).unwrap();
        let b = fit_stacking(&x, &y, 3, &bases, &meta, 5, 42).unwrap();
        assert_eq!(a.predict(&x).unwrap(), b.predict(&x).unwrap());
        assert_eq!(a.meta_feature_layout.len(), 12);
    }

    #[test]
    fn stacking_fold_too_small() {
        let (x, mut y) = blobs(20);
        y[0] = 2;
        for v in y.iter_mut().take(20).skip(3) {
            *v = 1;
        }
        // class 0 now has 2 rows, fewer than 5 folds
        let err = out_of_fold_meta(&x, &y, 3, &light_bases(0), 5, 0).unwrap_err();
        assert!(matches!(err, Error::FoldTooSmall(_)));
    }

    #[test]
    fn document_round_trip_all_kinds() {
        let (x, y) = blobs(15);
        let names = vec!["a".to_string(), "b".to_string()];
        let labels: Vec<String> = ["bruteforce", "dos", "legitimate"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let specs = vec![
            ModelSpec::new(MethodKind::DecisionTree, 3),
            ModelSpec::new(MethodKind::RandomForest, 3).with("n_trees", 5),
            ModelSpec::new(MethodKind::Knn, 3),
            ModelSpec::new(MethodKind::Gbt, 3).with("n_rounds", 5),
            ModelSpec::new(MethodKind::Stacking, 3)
                .with("bases", serde_json::to_value(light_bases(3)).unwrap())
                .with("folds", 3),
            ModelSpec::new(MethodKind::Voting, 3)
                .with("members", serde_json::to_value(light_bases(3)).unwrap()),
            ModelSpec::new(MethodKind::Bagging, 3)
                .with("n_bags", 2)
                .with(
                    "base",
                    serde_json::to_value(
                        ClassifierSpec::new(ClassifierKind::RandomForest, 1).with("n_trees", 4),
                    )
                    .unwrap(),
                ),
        ];
        for spec in specs {
            let model = fit_model(&spec, &x, &y, 3).unwrap();
            let tm = TrainedModel {
                spec: spec.clone(),
                feature_names: names.clone(),
                label_names: labels.clone(),
                model,
            };
            let back = TrainedModel::from_json(&tm.to_json()).unwrap();
            assert_eq!(
                back.model.predict_proba(&x).unwrap(),
                tm.model.predict_proba(&x).unwrap()
            );
            assert_eq!(back.spec, spec);
        }
    }

    #[test]
    fn document_errors() {
        assert!(matches!(
            TrainedModel::from_json(""),
            Err(Error::MalformedDocument(_))
        ));
        assert!(matches!(
            TrainedModel::from_json("{}"),
            Err(Error::MalformedDocument(_))
        ));
        assert!(matches!(
            TrainedModel::from_json(r#"{"version":"99","kind":"knn"}"#),
            Err(Error::VersionMismatch(v)) if v == "99"
        ));
        assert!(matches!(
            TrainedModel::from_json(r#"{"version":"1","kind":"knn"}"#),
            Err(Error::MalformedDocument(_))
        ));
    }

    #[test]
    fn invalid_ensemble_hyperparameters() {
        assert!(ModelSpec::new(MethodKind::Stacking, 0)
            .with("folds", 1)
            .validate()
            .is_err());
        assert!(ModelSpec::new(MethodKind::Bagging, 0)
            .with("n_bags", 0)
            .validate()
            .is_err());
        assert!(ModelSpec::new(MethodKind::Voting, 0)
            .with("weights", 1)
            .validate()
            .is_err());
    }
}
