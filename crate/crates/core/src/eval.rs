//! Confusion matrices, one-vs-rest precision/recall/F1, timed evaluation,
//! stratified cross-validation and table rendering.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::Classifier;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pipeline::{fit_and_evaluate, PipelineSpec};
use crate::preprocess::stratified_folds;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub label_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|c| self.counts[c][c]).sum()
    }

    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn predicted(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if let Some(&code) = [t, p].iter().find(|&&c| c >= n_classes) {
            return Err(Error::CodeOutOfRange { code, n_classes });
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix {
        counts,
        label_names: (0..n_classes).map(|c| c.to_string()).collect(),
    })
}

/// `trace / total`.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    Ok(cm.trace() as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub(crate) fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// One-vs-rest metrics for class `c`; zero denominators give 0.
pub fn class_metrics(cm: &ConfusionMatrix, c: usize) -> Result<ClassMetrics> {
    if c >= cm.n_classes() {
        return Err(Error::CodeOutOfRange {
            code: c,
            n_classes: cm.n_classes(),
        });
    }
    let tp = cm.counts[c][c];
    let precision = ratio(tp, cm.predicted(c));
    let recall = ratio(tp, cm.support(c));
    Ok(ClassMetrics {
        precision,
        recall,
        f1: f1_score(precision, recall),
        support: cm.support(c),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub fit_time_s: f64,
    pub predict_time_s: f64,
}

impl EvalReport {
    pub fn from_predictions(
        y_true: &[usize],
        y_pred: &[usize],
        label_names: &[String],
    ) -> Result<Self> {
        let mut cm = confusion(y_true, y_pred, label_names.len())?;
        cm.label_names = label_names.to_vec();
        let acc = accuracy(&cm)?;
        let per_class = (0..cm.n_classes())
            .map(|c| class_metrics(&cm, c))
            .collect::<Result<Vec<_>>>()?;
        let k = per_class.len() as f64;
        let total = cm.total() as f64;
        let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k;
        let weighted = |f: fn(&ClassMetrics) -> f64| {
            per_class
                .iter()
                .map(|m| f(m) * m.support as f64)
                .sum::<f64>()
                / total
        };
        Ok(Self {
            accuracy: acc,
            macro_precision: mean(|m| m.precision),
            macro_recall: mean(|m| m.recall),
            macro_f1: mean(|m| m.f1),
            weighted_precision: weighted(|m| m.precision),
            weighted_recall: weighted(|m| m.recall),
            weighted_f1: weighted(|m| m.f1),
            per_class,
            confusion: cm,
            fit_time_s: 0.0,
            predict_time_s: 0.0,
        })
    }
}

/// Predicts `x` with `model`, timing the prediction. `fit_time_s` is left at
/// zero for the caller to fill in.
pub fn evaluate(
    model: &dyn Classifier,
    x: &Matrix,
    y: &[usize],
    label_names: &[String],
) -> Result<EvalReport> {
    x.check_cols(model.n_features())?;
    let start = Instant::now();
    let pred = model.predict(x)?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut r = EvalReport::from_predictions(y, &pred, label_names)?;
    r.predict_time_s = elapsed;
    Ok(r)
}

pub fn evaluate_dataset(model: &dyn Classifier, ds: &Dataset) -> Result<EvalReport> {
    evaluate(model, ds.features(), ds.labels(), ds.label_names())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if min == max {
            return Self {
                mean: min,
                std: 0.0,
                min,
                max,
            };
        }
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            // keep the mean inside [min, max] despite rounding
            mean: mean.clamp(min, max),
            std: var.sqrt(),
            min,
            max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    pub fold_sizes: Vec<usize>,
    pub per_fold: Vec<EvalReport>,
    pub accuracy: MetricSummary,
    pub macro_precision: MetricSummary,
    pub macro_recall: MetricSummary,
    pub macro_f1: MetricSummary,
    pub weighted_f1: MetricSummary,
    pub fit_time_s: MetricSummary,
    pub predict_time_s: MetricSummary,
}

impl CvReport {
    pub fn from_folds(per_fold: Vec<EvalReport>, fold_sizes: Vec<usize>) -> Self {
        let s = |f: fn(&EvalReport) -> f64| {
            MetricSummary::of(&per_fold.iter().map(f).collect::<Vec<_>>())
        };
        Self {
            folds: per_fold.len(),
            fold_sizes,
            accuracy: s(|r| r.accuracy),
            macro_precision: s(|r| r.macro_precision),
            macro_recall: s(|r| r.macro_recall),
            macro_f1: s(|r| r.macro_f1),
            weighted_f1: s(|r| r.weighted_f1),
            fit_time_s: s(|r| r.fit_time_s),
            predict_time_s: s(|r| r.predict_time_s),
            per_fold,
        }
    }
}

/// Stratified k-fold cross-validation. Each fold refits scaling and SMOTE on
/// its training folds only, trains the model and scores the held-out fold.
pub fn cross_validate(
    spec: &PipelineSpec,
    ds: &Dataset,
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    let fold_rows = stratified_folds(ds.labels(), ds.n_classes(), folds, seed)?;
    let reports = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = fold_rows
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, r)| r.iter().copied())
                .collect();
            let (_, report) = fit_and_evaluate(
                &ds.select_rows(&train),
                &ds.select_rows(&fold_rows[f]),
                spec,
            )?;
            Ok(report)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvReport::from_folds(
        reports,
        fold_rows.iter().map(Vec::len).collect(),
    ))
}

fn attack_label(name: &str, code: usize) -> String {
    let mut chars = name.chars();
    let cap: String = match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    };
    format!("{cap}: {code}")
}

/// Per-class markdown table: one block of rows per method, accuracy and
/// timings on the block's first row.
pub fn render_markdown(rows: &[(&str, &EvalReport)]) -> String {
    let mut out = String::from(
        "| Methods | Attack | Precision | Recall | F1-Score | Accuracy | Training time | Test time |\n\
         |---|---|---|---|---|---|---|---|\n",
    );
    for (method, r) in rows {
        for (c, m) in r.per_class.iter().enumerate() {
            let attack = attack_label(&r.confusion.label_names[c], c);
            if c == 0 {
                let _ = writeln!(
                    out,
                    "| {method} | {attack} | {:.2} | {:.2} | {:.2} | {:.4} | {:.4} | {:.4} |",
                    m.precision, m.recall, m.f1, r.accuracy, r.fit_time_s, r.predict_time_s
                );
            } else {
                let _ = writeln!(
                    out,
                    "|  | {attack} | {:.2} | {:.2} | {:.2} |  |  |  |",
                    m.precision, m.recall, m.f1
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_tally() {
        let cm = confusion(&[0, 0, 1], &[0, 1, 1], 3).unwrap();
        assert_eq!(cm.counts[0][0], 1);
        assert_eq!(cm.counts[0][1], 1);
        assert_eq!(cm.counts[1][1], 1);
        assert_eq!(cm.total(), 3);
        let id = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(accuracy(&id).unwrap(), 1.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            confusion(&[0], &[0, 1], 2),
            Err(Error::LengthMismatch(1, 2))
        ));
        assert!(matches!(
            confusion(&[0], &[3], 2),
            Err(Error::CodeOutOfRange { code: 3, .. })
        ));
        let empty = confusion(&[], &[], 3).unwrap();
        assert_eq!(empty.total(), 0);
        assert!(matches!(accuracy(&empty), Err(Error::EmptyMatrix)));
        assert!(class_metrics(&empty, 3).is_err());
    }

    #[test]
    fn accuracy_values() {
        let mut cm = confusion(&[], &[], 2).unwrap();
        cm.counts = vec![vec![9538, 231], vec![231, 0]];
        assert_eq!(accuracy(&cm).unwrap(), 0.9538);
        cm.counts = vec![vec![0, 4], vec![6, 0]];
        assert_eq!(accuracy(&cm).unwrap(), 0.0);
    }

    #[test]
    fn precision_and_zero_guard() {
        // class 0: TP = 8, FP = 2
        let mut cm = confusion(&[], &[], 3).unwrap();
        cm.counts = vec![vec![8, 1, 0], vec![2, 5, 0], vec![0, 0, 0]];
        let m = class_metrics(&cm, 0).unwrap();
        assert_eq!(m.precision, 0.8);
        let absent = class_metrics(&cm, 2).unwrap();
        assert_eq!(
            (absent.precision, absent.recall, absent.f1, absent.support),
            (0.0, 0.0, 0.0, 0)
        );
        assert_eq!(f1_score(0.7, 0.7), 0.7);
    }

    #[test]
    fn markdown_layout() {
        let names: Vec<String> = ["bruteforce", "dos", "legitimate"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let r = EvalReport::from_predictions(&[0, 1, 2, 2], &[0, 1, 2, 1], &names).unwrap();
        let md = render_markdown(&[("Voting", &r)]);
        assert!(md.contains("| Methods | Attack | Precision | Recall | F1-Score | Accuracy | Training time | Test time |"));
        assert!(md.contains("| Voting | Bruteforce: 0 | 1.00 | 1.00 | 1.00 | 0.7500 |"));
        assert!(md.contains("|  | Legitimate: 2 |"));
    }

    #[test]
    fn summary_mean_in_range() {
        let s = MetricSummary::of(&[0.1, 0.1, 0.1]);
        assert!(s.mean >= s.min && s.mean <= s.max);
        assert_eq!(s.std, 0.0);
    }
}
