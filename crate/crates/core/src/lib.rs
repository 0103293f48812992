//! Detection of DoS and brute-force traffic in MQTT flow records.
//!
//! The crate covers the whole modelling workflow: CSV ingestion
//! ([`data`]), preprocessing ([`preprocess`]), feature ranking and selection
//! ([`select`]), base classifiers ([`classifiers`]), stacking/voting/bagging
//! ensembles ([`ensembles`]), metrics and cross-validation ([`eval`]), a
//! synthetic data generator ([`synth`]) and the end-to-end [`pipeline`].

pub mod classifiers;
pub mod data;
pub mod ensembles;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod pipeline;
pub mod preprocess;
pub mod seed;
pub mod select;
pub mod synth;

pub use classifiers::{fit, Classifier, ClassifierKind, ClassifierSpec, FittedClassifier};
pub use data::{Dataset, LabelEncoding, LoadOptions, SchemaDef};
pub use ensembles::{MethodKind, Model, ModelDocument, ModelSpec};
pub use error::{Error, Result};
pub use eval::{ConfusionMatrix, CvReport, EvalReport};
pub use matrix::Matrix;
pub use select::{FeatureSet, SelectionReport};
