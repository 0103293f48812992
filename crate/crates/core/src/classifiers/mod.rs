//! Base classifiers behind one contract: CART decision tree, random forest,
//! k-nearest neighbours and gradient-boosted trees.

mod forest;
mod gbt;
mod knn;
mod tree;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use forest::RandomForest;
pub use gbt::{cross_entropy, Gbt, RegNode, RegTree};
pub use knn::Knn;
pub use tree::{DecisionTree, TreeNode};

pub(crate) use tree::argmax;

/// Anything that maps feature rows to class probabilities.
///
/// `predict` is the row-wise argmax of `predict_proba`, ties to the lowest code.
pub trait Classifier: Send + Sync {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn predict_proba(&self, x: &Matrix) -> Result<Matrix>;

    fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let p = self.predict_proba(x)?;
        Ok(p.rows().map(argmax).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    DecisionTree,
    RandomForest,
    Knn,
    Gbt,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::RandomForest,
        ClassifierKind::DecisionTree,
        ClassifierKind::Knn,
        ClassifierKind::Gbt,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    #[serde(default)]
    pub hyperparameters: Map<String, Value>,
    #[serde(default)]
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind, seed: u64) -> Self {
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

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Parses and range-checks the hyperparameters for this kind.
    pub fn validate(&self) -> Result<()> {
        self.params().map(|_| ())
    }

    fn params(&self) -> Result<Params> {
        let v = Value::Object(self.hyperparameters.clone());
        let bad =
            |e: serde_json::Error| Error::InvalidHyperparameter(format!("{:?}: {e}", self.kind));
        let p = match self.kind {
            ClassifierKind::DecisionTree => Params::Tree(serde_json::from_value(v).map_err(bad)?),
            ClassifierKind::RandomForest => Params::Forest(serde_json::from_value(v).map_err(bad)?),
            ClassifierKind::Knn => Params::Knn(serde_json::from_value(v).map_err(bad)?),
            ClassifierKind::Gbt => Params::Gbt(serde_json::from_value(v).map_err(bad)?),
        };
        p.check()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeParams {
    #[serde(default)]
    max_depth: Option<usize>,
    #[serde(default = "two")]
    min_samples_split: usize,
    #[serde(default)]
    min_impurity_decrease: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForestParams {
    #[serde(default = "hundred")]
    n_trees: usize,
    #[serde(default = "yes")]
    bootstrap: bool,
    /// Defaults to `ceil(sqrt(d))`.
    #[serde(default)]
    max_features: Option<usize>,
    #[serde(default)]
    max_depth: Option<usize>,
    #[serde(default = "two")]
    min_samples_split: usize,
    #[serde(default)]
    min_impurity_decrease: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct KnnParams {
    #[serde(default = "five")]
    k: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GbtParams {
    #[serde(default = "hundred")]
    n_rounds: usize,
    #[serde(default = "tenth")]
    learning_rate: f64,
    #[serde(default = "six")]
    max_depth: usize,
    #[serde(default = "one")]
    lambda: f64,
    #[serde(default = "one")]
    min_child_weight: f64,
}

fn two() -> usize {
    2
}
fn five() -> usize {
    5
}
fn six() -> usize {
    6
}
fn hundred() -> usize {
    100
}
fn yes() -> bool {
    true
}
fn tenth() -> f64 {
    0.1
}
fn one() -> f64 {
    1.0
}

enum Params {
    Tree(TreeParams),
    Forest(ForestParams),
    Knn(KnnParams),
    Gbt(GbtParams),
}

impl Params {
    fn check(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidHyperparameter(m.to_string()));
        match self {
            Params::Tree(p) => {
                if p.min_samples_split < 2 {
                    return fail("min_samples_split must be >= 2");
                }
                if p.min_impurity_decrease.is_nan() || p.min_impurity_decrease < 0.0 {
                    return fail("min_impurity_decrease must be >= 0");
                }
            }
            Params::Forest(p) => {
                if p.n_trees == 0 {
                    return fail("n_trees must be >= 1");
                }
                if p.max_features == Some(0) {
                    return fail("max_features must be >= 1");
                }
                if p.min_samples_split < 2 {
                    return fail("min_samples_split must be >= 2");
                }
                if p.min_impurity_decrease.is_nan() || p.min_impurity_decrease < 0.0 {
                    return fail("min_impurity_decrease must be >= 0");
                }
            }
            Params::Knn(p) => {
                if p.k == 0 {
                    return fail("k must be >= 1");
                }
            }
            Params::Gbt(p) => {
                if p.n_rounds == 0 {
                    return fail("n_rounds must be >= 1");
                }
                if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) {
                    return fail("learning_rate must be positive");
                }
                if (p.lambda.is_nan() || p.lambda < 0.0)
                    || (p.min_child_weight.is_nan() || p.min_child_weight < 0.0)
                {
                    return fail("lambda and min_child_weight must be >= 0");
                }
            }
        }
        Ok(())
    }
}

/// A trained base model. Immutable once fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedClassifier {
    DecisionTree(DecisionTree),
    RandomForest(RandomForest),
    Knn(Knn),
    Gbt(Gbt),
}

pub(crate) fn check_training(x: &Matrix, y: &[usize], n_classes: usize) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::LengthMismatch(x.n_rows(), y.len()));
    }
    if y.is_empty() {
        return Err(Error::DegenerateInput("no training rows".into()));
    }
    if x.n_cols() == 0 {
        return Err(Error::DegenerateInput("no feature columns".into()));
    }
    if let Some(&code) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::CodeOutOfRange { code, n_classes });
    }
    Ok(())
}

/// Trains one base model. `n_classes` fixes the probability width even when
/// some classes are absent from `y`.
pub fn fit(
    spec: &ClassifierSpec,
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
) -> Result<FittedClassifier> {
    check_training(x, y, n_classes)?;
    let d = x.n_cols();
    Ok(match spec.params()? {
        Params::Tree(p) => {
            let growth = tree::TreeGrowth {
                max_depth: p.max_depth,
                min_samples_split: p.min_samples_split,
                min_impurity_decrease: p.min_impurity_decrease,
                max_features: None,
            };
            FittedClassifier::DecisionTree(DecisionTree::grow(
                x,
                y,
                (0..y.len()).collect(),
                n_classes,
                &growth,
                None,
            ))
        }
        Params::Forest(p) => {
            let max_features = p
                .max_features
                .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
                .min(d);
            let growth = forest::ForestGrowth {
                n_trees: p.n_trees,
                bootstrap: p.bootstrap,
                tree: tree::TreeGrowth {
                    max_depth: p.max_depth,
                    min_samples_split: p.min_samples_split,
                    min_impurity_decrease: p.min_impurity_decrease,
                    max_features: Some(max_features),
                },
            };
            FittedClassifier::RandomForest(RandomForest::fit(x, y, n_classes, &growth, spec.seed))
        }
        Params::Knn(p) => FittedClassifier::Knn(Knn {
            x: x.clone(),
            y: y.to_vec(),
            k: p.k,
            n_classes,
        }),
        Params::Gbt(p) => {
            let params = gbt::BoostParams {
                n_rounds: p.n_rounds,
                learning_rate: p.learning_rate,
                max_depth: p.max_depth,
                lambda: p.lambda,
                min_child_weight: p.min_child_weight,
            };
            FittedClassifier::Gbt(Gbt::fit(x, y, n_classes, &params))
        }
    })
}

impl FittedClassifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            FittedClassifier::DecisionTree(_) => ClassifierKind::DecisionTree,
            FittedClassifier::RandomForest(_) => ClassifierKind::RandomForest,
            FittedClassifier::Knn(_) => ClassifierKind::Knn,
            FittedClassifier::Gbt(_) => ClassifierKind::Gbt,
        }
    }

    fn proba_row(&self, row: &[f64], out: &mut [f64]) {
        match self {
            FittedClassifier::DecisionTree(t) => out.copy_from_slice(t.leaf_for(row).0),
            FittedClassifier::RandomForest(f) => f.proba_row(row, out),
            FittedClassifier::Knn(k) => k.proba_row(row, out),
            FittedClassifier::Gbt(g) => g.proba_row(row, out),
        }
    }

    /// Structural consistency check used after deserialization.
    pub(crate) fn check_consistent(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::MalformedDocument(m.to_string()));
        let (d, k) = (self.n_features(), self.n_classes());
        match self {
            FittedClassifier::DecisionTree(t) => {
                if !t.is_well_formed() {
                    return bad("decision tree nodes inconsistent");
                }
            }
            FittedClassifier::RandomForest(f) => {
                if f.trees.is_empty()
                    || f.trees
                        .iter()
                        .any(|t| !t.is_well_formed() || t.n_classes != k || t.n_features != d)
                {
                    return bad("forest trees inconsistent");
                }
            }
            FittedClassifier::Knn(m) => {
                if m.k == 0
                    || m.x.n_rows() != m.y.len()
                    || m.y.is_empty()
                    || m.y.iter().any(|&c| c >= k)
                {
                    return bad("knn store inconsistent");
                }
            }
            FittedClassifier::Gbt(g) => {
                if g.init_scores.len() != k || g.rounds.iter().any(|r| r.len() != k) {
                    return bad("boosted trees inconsistent");
                }
                let ok = g.rounds.iter().flatten().all(|t| {
                    !t.nodes.is_empty()
                        && t.nodes.iter().all(|n| match n {
                            RegNode::Split {
                                feature,
                                left,
                                right,
                                ..
                            } => *feature < d && *left < t.nodes.len() && *right < t.nodes.len(),
                            RegNode::Leaf { .. } => true,
                        })
                });
                if !ok {
                    return bad("boosted tree nodes inconsistent");
                }
            }
        }
        Ok(())
    }
}

impl Classifier for FittedClassifier {
    fn n_features(&self) -> usize {
        match self {
            FittedClassifier::DecisionTree(t) => t.n_features,
            FittedClassifier::RandomForest(f) => f.n_features,
            FittedClassifier::Knn(k) => k.x.n_cols(),
            FittedClassifier::Gbt(g) => g.n_features,
        }
    }

    fn n_classes(&self) -> usize {
        match self {
            FittedClassifier::DecisionTree(t) => t.n_classes,
            FittedClassifier::RandomForest(f) => f.n_classes,
            FittedClassifier::Knn(k) => k.n_classes,
            FittedClassifier::Gbt(g) => g.n_classes,
        }
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        use rayon::prelude::*;
        x.check_cols(self.n_features())?;
        let k = self.n_classes();
        let mut out = vec![0.0; x.n_rows() * k];
        out.par_chunks_mut(k.max(1))
            .enumerate()
            .for_each(|(i, o)| self.proba_row(x.row(i), o));
        Matrix::from_vec(x.n_rows(), k, out)
    }
}
