//! Feature ranking (ANOVA F, Pearson correlation, PCA loadings), consensus
//! reduction and projection onto a feature set.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// The ten MQTT features used by the shipped pipeline.
pub const GOLDEN_FEATURES: [&str; 10] = [
    "tcp.flags",
    "tcp.time_delta",
    "tcp.len",
    "mqtt.dupflag",
    "mqtt.hdrflags",
    "mqtt.len",
    "mqtt.msg",
    "mqtt.msgid",
    "mqtt.qos",
    "mqtt.conack.flags",
];

/// Cumulative explained-variance cut-off for PCA importance.
pub const PCA_VARIANCE_CUTOFF: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankMethod {
    Kbest,
    Pcc,
    Pca,
}

/// Scores are finite except for the ANOVA `+inf` sentinel, which JSON carries
/// as the string `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub name: String,
    #[serde(with = "score_serde")]
    pub score: f64,
}

mod score_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            Repr::Text("inf".into()).serialize(s)
        } else {
            Repr::Num(*v).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad score `{t}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeatures {
    pub method: RankMethod,
    pub entries: Vec<FeatureScore>,
}

impl RankedFeatures {
    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Golden,
    Consensus,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub names: Vec<String>,
    pub provenance: Provenance,
}

impl FeatureSet {
    pub fn manual<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        if names.is_empty() {
            return Err(Error::InvalidArgument("empty feature set".into()));
        }
        let mut sorted = names.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate feature names".into()));
        }
        Ok(Self {
            names,
            provenance: Provenance::Manual,
        })
    }
}

/// Per-method rankings plus the chosen feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub rankings: Vec<RankedFeatures>,
    pub selected: FeatureSet,
}

fn check_xy(x: &Matrix, y: &[usize]) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::LengthMismatch(x.n_rows(), y.len()));
    }
    Ok(())
}

/// Sort descending by score, ties by column position.
fn ranked(method: RankMethod, names: &[String], scores: &[f64]) -> RankedFeatures {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    RankedFeatures {
        method,
        entries: order
            .into_iter()
            .map(|j| FeatureScore {
                name: names[j].clone(),
                score: scores[j],
            })
            .collect(),
    }
}

/// One-way ANOVA F statistic of one column against the labels.
pub fn anova_f(column: &[f64], y: &[usize], n_classes: usize) -> f64 {
    let n = column.len();
    let mut sum = vec![0.0; n_classes];
    let mut cnt = vec![0usize; n_classes];
    let mut lo = vec![f64::INFINITY; n_classes];
    let mut hi = vec![f64::NEG_INFINITY; n_classes];
    for (&v, &c) in column.iter().zip(y) {
        sum[c] += v;
        cnt[c] += 1;
        lo[c] = lo[c].min(v);
        hi[c] = hi[c].max(v);
    }
    let groups: Vec<usize> = (0..n_classes).filter(|&c| cnt[c] > 0).collect();
    let k = groups.len();
    let col_min = column.iter().copied().fold(f64::INFINITY, f64::min);
    let col_max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if col_min == col_max || k < 2 {
        return 0.0;
    }
    let grand = column.iter().sum::<f64>() / n as f64;
    let means: Vec<f64> = (0..n_classes)
        .map(|c| {
            if cnt[c] > 0 {
                sum[c] / cnt[c] as f64
            } else {
                0.0
            }
        })
        .collect();
    let ss_between: f64 = groups
        .iter()
        .map(|&c| cnt[c] as f64 * (means[c] - grand).powi(2))
        .sum();
    // exact zero when every class is internally constant
    let ss_within: f64 = if groups.iter().all(|&c| lo[c] == hi[c]) {
        0.0
    } else {
        column
            .iter()
            .zip(y)
            .map(|(&v, &c)| (v - means[c]).powi(2))
            .sum()
    };
    if ss_within == 0.0 {
        return if ss_between > 0.0 { f64::INFINITY } else { 0.0 };
    }
    if n <= k {
        return f64::INFINITY;
    }
    (ss_between / (k - 1) as f64) / (ss_within / (n - k) as f64)
}

/// Top-`k` features by ANOVA F.
pub fn kbest_rank(x: &Matrix, y: &[usize], names: &[String], k: usize) -> Result<RankedFeatures> {
    check_xy(x, y)?;
    if k == 0 || k > x.n_cols() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} outside 1..={}",
            x.n_cols()
        )));
    }
    let n_classes = y.iter().max().map_or(0, |m| m + 1);
    let mut distinct = y.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::SingleClass);
    }
    let scores: Vec<f64> = (0..x.n_cols())
        .map(|j| anova_f(&x.column(j), y, n_classes))
        .collect();
    let mut r = ranked(RankMethod::Kbest, names, &scores);
    r.entries.truncate(k);
    Ok(r)
}

/// Absolute Pearson correlation of a column with the label codes; 0 for constant columns.
pub fn abs_pearson(column: &[f64], y: &[f64]) -> f64 {
    let n = column.len() as f64;
    let mx = column.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in column.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    let constant = |v: &[f64]| v.iter().all(|&t| t == v[0]);
    if constant(column) || constant(y) || sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).abs().min(1.0)
}

/// Every feature ranked by `|r|` against the label codes.
pub fn pearson_rank(x: &Matrix, y: &[usize], names: &[String]) -> Result<RankedFeatures> {
    check_xy(x, y)?;
    if y.len() < 2 {
        return Err(Error::InvalidArgument("need at least two rows".into()));
    }
    let yf: Vec<f64> = y.iter().map(|&c| c as f64).collect();
    let scores: Vec<f64> = (0..x.n_cols())
        .map(|j| abs_pearson(&x.column(j), &yf))
        .collect();
    Ok(ranked(RankMethod::Pcc, names, &scores))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// One principal direction per row.
    pub components: Matrix,
    pub explained_variance_ratio: Vec<f64>,
    pub explained_variance: Vec<f64>,
    pub column_means: Vec<f64>,
}

impl PcaModel {
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        x.check_cols(self.column_means.len())?;
        let c = self.components.n_rows();
        let mut out = Matrix::zeros(x.n_rows(), c);
        for (i, row) in x.rows().enumerate() {
            for k in 0..c {
                let dot = row
                    .iter()
                    .zip(&self.column_means)
                    .zip(self.components.row(k))
                    .map(|((v, m), w)| (v - m) * w)
                    .sum();
                out.set(i, k, dot);
            }
        }
        Ok(out)
    }
}

/// Principal components of the sample covariance (n - 1 denominator), sorted by
/// decreasing eigenvalue, each sign-flipped so its largest-magnitude loading is positive.
pub fn pca_fit(x: &Matrix, n_components: usize) -> Result<PcaModel> {
    let (n, d) = (x.n_rows(), x.n_cols());
    if n_components == 0 || n_components > n.min(d) {
        return Err(Error::InvalidArgument(format!(
            "n_components = {n_components} outside 1..={}",
            n.min(d)
        )));
    }
    let means: Vec<f64> = (0..d)
        .map(|j| x.rows().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for row in x.rows() {
        for a in 0..d {
            let da = row[a] - means[a];
            for b in a..d {
                cov[(a, b)] += da * (row[b] - means[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let total: f64 = (0..d).map(|j| cov[(j, j)]).sum();
    if total == 0.0 {
        return Err(Error::RankDeficient);
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let mut comps = Vec::with_capacity(n_components * d);
    let mut variance = Vec::with_capacity(n_components);
    for &k in order.iter().take(n_components) {
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let pivot = v.iter().enumerate().fold(
            0,
            |best, (j, &t)| if t.abs() > v[best].abs() { j } else { best },
        );
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|t| *t = -*t);
        }
        comps.extend(v);
        variance.push(eig.eigenvalues[k].max(0.0));
    }
    let ratio = variance
        .iter()
        .map(|v| (v / total).clamp(0.0, 1.0))
        .collect();
    Ok(PcaModel {
        components: Matrix::from_vec(n_components, d, comps)?,
        explained_variance_ratio: ratio,
        explained_variance: variance,
        column_means: means,
    })
}

/// Loading-weighted importance: `sum_c ratio_c * |loading_{c,j}|` over the
/// leading components whose cumulative ratio stays within
/// [`PCA_VARIANCE_CUTOFF`] (always at least one).
pub fn pca_importance(model: &PcaModel) -> Vec<f64> {
    let d = model.components.n_cols();
    let mut importance = vec![0.0; d];
    let mut cumulative = 0.0;
    for (c, &ratio) in model.explained_variance_ratio.iter().enumerate() {
        cumulative += ratio;
        if c > 0 && cumulative > PCA_VARIANCE_CUTOFF {
            break;
        }
        for (imp, w) in importance.iter_mut().zip(model.components.row(c)) {
            *imp += ratio * w.abs();
        }
    }
    importance
}

/// Top-`k` features by PCA loading importance. Scores within 1e-12 (relative)
/// of each other tie and fall back to column order.
pub fn pca_rank(x: &Matrix, names: &[String], k: usize) -> Result<RankedFeatures> {
    if k == 0 || k > x.n_cols() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} outside 1..={}",
            x.n_cols()
        )));
    }
    let model = pca_fit(x, x.n_rows().min(x.n_cols()))?;
    let importance = pca_importance(&model);
    let top = importance.iter().copied().fold(0.0, f64::max);
    let key = |v: f64| {
        if top > 0.0 {
            (v / top * 1e12).round() as i64
        } else {
            0
        }
    };
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| key(importance[b]).cmp(&key(importance[a])).then(a.cmp(&b)));
    Ok(RankedFeatures {
        method: RankMethod::Pca,
        entries: order
            .into_iter()
            .take(k)
            .map(|j| FeatureScore {
                name: names[j].clone(),
                score: importance[j],
            })
            .collect(),
    })
}

/// Majority reducer: names ordered by appearance count across the methods'
/// top lists, then by mean 1-based rank, then by name.
pub fn consensus_select(
    reports: &[RankedFeatures],
    n: usize,
    top_per_method: usize,
) -> Result<FeatureSet> {
    if reports.len() < 2 {
        return Err(Error::InvalidArgument(
            "consensus needs at least two rankings".into(),
        ));
    }
    if n == 0 || top_per_method == 0 {
        return Err(Error::InvalidArgument(
            "n and top_per_method must be positive".into(),
        ));
    }
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in reports {
        for (rank, e) in r.entries.iter().take(top_per_method).enumerate() {
            let t = tally.entry(e.name.as_str()).or_default();
            t.0 += 1;
            t.1 += rank + 1;
        }
    }
    if tally.len() < n {
        return Err(Error::InsufficientFeatures {
            available: tally.len(),
            requested: n,
        });
    }
    let mut names: Vec<(&str, usize, usize)> =
        tally.into_iter().map(|(k, (c, s))| (k, c, s)).collect();
    // mean ranks compared exactly: s_a / c_a < s_b / c_b  <=>  s_a * c_b < s_b * c_a
    names.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then((a.2 * b.1).cmp(&(b.2 * a.1)))
            .then(a.0.cmp(b.0))
    });
    Ok(FeatureSet {
        names: names.into_iter().take(n).map(|t| t.0.to_string()).collect(),
        provenance: Provenance::Consensus,
    })
}

pub fn golden_final_set() -> FeatureSet {
    FeatureSet {
        names: GOLDEN_FEATURES.iter().map(|s| s.to_string()).collect(),
        provenance: Provenance::Golden,
    }
}

/// Restricts a dataset to `fs` columns in `fs` order.
pub fn project(ds: &Dataset, fs: &FeatureSet) -> Result<Dataset> {
    project_names(ds, &fs.names)
}

pub fn project_names<S: AsRef<str>>(ds: &Dataset, names: &[S]) -> Result<Dataset> {
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            ds.column_index(n.as_ref())
                .ok_or_else(|| Error::MissingColumn(n.as_ref().to_string()))
        })
        .collect::<Result<_>>()?;
    let schema = idx
        .iter()
        .enumerate()
        .map(|(position, &j)| crate::data::ColumnSchema {
            position,
            ..ds.schema[j].clone()
        })
        .collect();
    let raw_categorical = names
        .iter()
        .filter_map(|n| {
            ds.raw_categorical
                .get(n.as_ref())
                .map(|v| (n.as_ref().to_string(), v.clone()))
        })
        .collect();
    Ok(Dataset {
        schema,
        features: ds.features.select_cols(&idx),
        labels: ds.labels.clone(),
        label_names: ds.label_names.clone(),
        raw_categorical,
    })
}

/// Runs all three rankers on a dataset. `k` bounds the ANOVA and PCA lists.
pub fn rank_all(ds: &Dataset, k: usize) -> Result<Vec<RankedFeatures>> {
    let names = ds.feature_names();
    let k = k.min(ds.n_features());
    Ok(vec![
        kbest_rank(ds.features(), ds.labels(), &names, k)?,
        pearson_rank(ds.features(), ds.labels(), &names)?,
        pca_rank(ds.features(), &names, k)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MQTTSET_COLUMNS;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|j| format!("f{j}")).collect()
    }

    /// Textbook two-loop ANOVA used as an oracle.
    fn anova_oracle(col: &[f64], y: &[usize]) -> f64 {
        let k = *y.iter().max().unwrap() + 1;
        let n = col.len();
        let grand: f64 = col.iter().sum::<f64>() / n as f64;
        let mut ssb = 0.0;
        let mut ssw = 0.0;
        for c in 0..k {
            let members: Vec<f64> = (0..n).filter(|&i| y[i] == c).map(|i| col[i]).collect();
            let m = members.iter().sum::<f64>() / members.len() as f64;
            ssb += members.len() as f64 * (m - grand) * (m - grand);
            for v in members {
                ssw += (v - m) * (v - m);
            }
        }
        (ssb / (k - 1) as f64) / (ssw / (n - k) as f64)
    }

    #[test]
    fn anova_matches_oracle() {
        let y = [0, 0, 0, 1, 1, 1, 2, 2, 2];
        let x = Matrix::from_rows(&[
            [1.0, 5.0, 0.3, 2.0],
            [2.0, 3.0, 0.1, 2.5],
            [1.5, 4.0, 0.2, 1.0],
            [3.0, 4.5, 0.9, 2.2],
            [3.5, 5.5, 0.7, 1.9],
            [2.5, 3.5, 0.8, 2.8],
            [6.0, 4.2, 0.4, 1.1],
            [7.0, 4.8, 0.6, 3.0],
            [6.5, 3.9, 0.5, 2.4],
        ])
        .unwrap();
        let r = kbest_rank(&x, &y, &names(4), 4).unwrap();
        let mut expected: Vec<(usize, f64)> = (0..4)
            .map(|j| (j, anova_oracle(&x.column(j), &y)))
            .collect();
        expected.sort_by(|a, b| b.1.total_cmp(&a.1));
        for (e, (j, f)) in r.entries.iter().zip(&expected) {
            assert_eq!(e.name, format!("f{j}"));
            assert!((e.score - f).abs() <= 1e-9 * f.abs().max(1.0));
        }
    }

    #[test]
    fn anova_edge_cases() {
        let y = [0, 0, 1, 1, 2, 2];
        let x = Matrix::from_rows(&[
            [3.0, 0.0],
            [3.0, 0.0],
            [3.0, 1.0],
            [3.0, 1.0],
            [3.0, 2.0],
            [3.0, 2.0],
        ])
        .unwrap();
        let r = kbest_rank(&x, &y, &names(2), 2).unwrap();
        assert_eq!(r.entries[0].name, "f1");
        assert_eq!(r.entries[0].score, f64::INFINITY);
        assert_eq!(r.entries[1].score, 0.0);
        assert!(matches!(
            kbest_rank(&x, &[0; 6], &names(2), 1),
            Err(Error::SingleClass)
        ));
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"inf\""));
        assert_eq!(serde_json::from_str::<RankedFeatures>(&json).unwrap(), r);
    }

    #[test]
    fn pearson_hand_case() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [0.0, 0.0, 1.0, 1.0, 2.0];
        // mean x = 3, mean y = 0.8; sxy = 5, sxx = 10, syy = 2.8
        let expected = 5.0 / (10.0f64.sqrt() * 2.8f64.sqrt());
        assert!((abs_pearson(&x, &y) - expected).abs() < 1e-12);
        assert_eq!(abs_pearson(&[2.0; 5], &y), 0.0);
        assert!((abs_pearson(&y, &y) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pca_axis_aligned() {
        // x0 in {-2, 2} (variance 4 with n-1 = 3), x1 in {-1, 1}
        let s = (3.0f64 / 4.0).sqrt();
        let x = Matrix::from_rows(&[[2.0 * s, s], [2.0 * s, -s], [-2.0 * s, s], [-2.0 * s, -s]])
            .unwrap();
        let m = pca_fit(&x, 2).unwrap();
        assert!((m.explained_variance_ratio[0] - 0.8).abs() < 1e-9);
        assert!((m.explained_variance_ratio[1] - 0.2).abs() < 1e-9);
        assert!((m.components.get(0, 0) - 1.0).abs() < 1e-9);
        assert!((m.components.get(1, 1) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pca_zero_variance_and_bad_k() {
        let x = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(pca_fit(&x, 1), Err(Error::RankDeficient)));
        assert!(pca_fit(&x, 3).is_err());
    }

    #[test]
    fn pca_rank_identical_columns_tie_by_position() {
        let x = Matrix::from_rows(&[
            [1.0, 0.3, 1.0],
            [2.0, 0.1, 2.0],
            [4.0, 0.2, 4.0],
            [3.0, 0.4, 3.0],
        ])
        .unwrap();
        let r = pca_rank(&x, &names(3), 3).unwrap();
        assert_eq!(r.names(), vec!["f0", "f2", "f1"]);
    }

    #[test]
    fn consensus_hand_count() {
        let mk = |m: RankMethod, ns: &[&str]| RankedFeatures {
            method: m,
            entries: ns
                .iter()
                .map(|n| FeatureScore {
                    name: n.to_string(),
                    score: 1.0,
                })
                .collect(),
        };
        let a = mk(RankMethod::Kbest, &["f1", "f2"]);
        let b = mk(RankMethod::Pcc, &["f2", "f3"]);
        let c = mk(RankMethod::Pca, &["f2", "f1"]);
        let fs = consensus_select(&[a.clone(), b.clone(), c.clone()], 2, 10).unwrap();
        assert_eq!(fs.names, vec!["f2", "f1"]);
        assert_eq!(fs.provenance, Provenance::Consensus);
        assert_eq!(consensus_select(&[c, a, b], 2, 10).unwrap(), fs);

        let same = mk(RankMethod::Kbest, &["x", "y", "z"]);
        let fs = consensus_select(&[same.clone(), same.clone(), same], 3, 10).unwrap();
        assert_eq!(fs.names, vec!["x", "y", "z"]);

        let one = mk(RankMethod::Kbest, &["x"]);
        assert!(matches!(
            consensus_select(&[one.clone(), one], 2, 10),
            Err(Error::InsufficientFeatures { .. })
        ));
    }

    /// The published per-method lists: consensus does not yield the golden set.
    #[test]
    fn published_lists_do_not_reduce_to_golden_set() {
        let mk = |m: RankMethod, ns: &[&str]| RankedFeatures {
            method: m,
            entries: ns
                .iter()
                .map(|n| FeatureScore {
                    name: n.to_string(),
                    score: 0.0,
                })
                .collect(),
        };
        let kbest = mk(
            RankMethod::Kbest,
            &[
                "mqtt.msgid",
                "tcp.len",
                "mqtt.qos",
                "mqtt.len",
                "mqtt.hdrflags",
                "mqtt.msg",
                "mqtt.kalive",
                "mqtt.msgtype",
                "mqtt.conack.val",
                "mqtt.conflag.uname",
            ],
        );
        let pcc_names: Vec<&str> = vec![
            "mqtt.msgid",
            "mqtt.qos",
            "mqtt.len",
            "tcp.time_delta",
            "mqtt.msg",
            "mqtt.hdrflags",
            "mqtt.dupflag",
            "tcp.len",
            "tcp.flags",
            "mqtt.conflag.cleansess",
            "mqtt.proto_len",
            "mqtt.protoname",
            "mqtt.ver",
            "mqtt.conack.flags",
            "mqtt.conflags",
            "mqtt.conack.val",
            "mqtt.conflag.uname",
            "mqtt.conflag.passwd",
            "mqtt.kalive",
            "mqtt.retain",
            "mqtt.msgtype",
            "mqtt.conack.flags.reserved",
            "mqtt.conack.flags.sp",
            "mqtt.conflag.qos",
            "mqtt.conflag.reserved",
            "mqtt.conflag.retain",
            "mqtt.conflag.willflag",
            "mqtt.sub.qos",
            "mqtt.suback.qos",
            "mqtt.willmsg",
            "mqtt.willmsg_len",
            "mqtt.willtopic",
            "mqtt.willtopic_len",
        ];
        let pcc = mk(RankMethod::Pcc, &pcc_names);
        let pca = mk(
            RankMethod::Pca,
            &[
                "mqtt.conflag.cleansess",
                "mqtt.len",
                "tcp.flags",
                "mqtt.conack.val",
                "mqtt.kalive",
                "mqtt.retain",
                "tcp.time_delta",
                "tcp.len",
                "mqtt.dupflag",
                "mqtt.msgid",
            ],
        );
        let mut pcc_sorted = pcc_names.clone();
        pcc_sorted.sort();
        let mut schema: Vec<&str> = MQTTSET_COLUMNS.to_vec();
        schema.sort();
        assert_eq!(pcc_sorted, schema);

        let fs = consensus_select(&[kbest, pcc, pca], 10, 33).unwrap();
        assert!(fs.names.iter().any(|n| n == "mqtt.kalive"));
        assert_ne!(fs.names, golden_final_set().names);
    }

    #[test]
    fn golden_set() {
        let g = golden_final_set();
        assert_eq!(g.names.len(), 10);
        assert_eq!(g.names[0], "tcp.flags");
        assert_eq!(g.names[9], "mqtt.conack.flags");
        assert!(g
            .names
            .iter()
            .all(|n| MQTTSET_COLUMNS.contains(&n.as_str())));
        assert_eq!(g.provenance, Provenance::Golden);
    }

    #[test]
    fn projection() {
        let ds = Dataset::new(
            names(3),
            Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap(),
            vec![0, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let full = FeatureSet::manual(&names(3)).unwrap();
        assert_eq!(project(&ds, &full).unwrap(), ds);
        let fs = FeatureSet::manual(&["f2", "f0"]).unwrap();
        let once = project(&ds, &fs).unwrap();
        assert_eq!(once.features().row(1), &[6.0, 4.0]);
        assert_eq!(project(&once, &fs).unwrap(), once);
        let bad = FeatureSet::manual(&["zz"]).unwrap();
        assert!(matches!(project(&ds, &bad), Err(Error::MissingColumn(_))));
    }
}
