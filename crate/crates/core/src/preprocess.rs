//! Categorical encoding, stratified hold-out split, min-max scaling and SMOTE.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{format_value, Dataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::{rng_for, streams};

/// Fitted code table for one column. Unseen values map to `unknown`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnEncoding {
    pub codes: BTreeMap<String, usize>,
    pub unknown: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalEncodingMaps {
    /// Column name to code table, in the order the columns were requested.
    pub columns: Vec<(String, ColumnEncoding)>,
}

impl CategoricalEncodingMaps {
    pub fn get(&self, column: &str) -> Option<&ColumnEncoding> {
        self.columns
            .iter()
            .find(|(c, _)| c == column)
            .map(|(_, e)| e)
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

/// Textual cell values of a column: raw text when the loader kept it,
/// otherwise the numeric values rendered as text.
fn column_values(ds: &Dataset, pos: usize) -> Vec<String> {
    let name = &ds.schema[pos].name;
    match ds.raw_categorical.get(name) {
        Some(raw) => raw.clone(),
        None => (0..ds.n_rows())
            .map(|i| format_value(ds.features.get(i, pos)))
            .collect(),
    }
}

/// Assigns each distinct value its rank in sorted order. Text columns sort
/// lexicographically, numeric columns numerically.
pub fn fit_categorical_encoding<S: AsRef<str>>(
    ds: &Dataset,
    columns: &[S],
) -> Result<CategoricalEncodingMaps> {
    let mut out = Vec::with_capacity(columns.len());
    for col in columns {
        let col = col.as_ref();
        let pos = ds
            .column_index(col)
            .ok_or_else(|| Error::MissingColumn(col.to_string()))?;
        let ordered: Vec<String> = if ds.raw_categorical.contains_key(col) {
            crate::data::sorted_distinct(&column_values(ds, pos))
        } else {
            let mut vals = ds.features.column(pos);
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            vals.into_iter().map(format_value).collect()
        };
        let codes: BTreeMap<String, usize> = ordered
            .into_iter()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect();
        let unknown = codes.len();
        out.push((col.to_string(), ColumnEncoding { codes, unknown }));
    }
    Ok(CategoricalEncodingMaps { columns: out })
}

/// Replaces each mapped column with its codes. The raw text of those columns is
/// dropped; the matrix is the source of truth afterwards.
pub fn apply_categorical_encoding(ds: &Dataset, maps: &CategoricalEncodingMaps) -> Result<Dataset> {
    let mut out = ds.clone();
    for (col, enc) in &maps.columns {
        let pos = ds
            .column_index(col)
            .ok_or_else(|| Error::SchemaMismatch(format!("column `{col}` not in dataset")))?;
        for (i, v) in column_values(ds, pos).iter().enumerate() {
            let code = enc.codes.get(v).copied().unwrap_or(enc.unknown);
            out.features.set(i, pos, code as f64);
        }
        out.raw_categorical.remove(col);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub ratio: f64,
    pub seed: u64,
}

/// Row indices of each class in ascending order; empty classes stay empty.
pub(crate) fn rows_by_class(labels: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    by_class
}

pub(crate) fn shuffle<R: Rng>(rng: &mut R, v: &mut [usize]) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

/// Stratified hold-out split with `|train| = round(ratio * n)`.
///
/// Per-class train counts start at `floor(ratio * count)`; the remaining rows go
/// to the classes with the largest fractional parts (lowest code first on ties).
pub fn stratified_split(ds: &Dataset, ratio: f64, seed: u64) -> Result<SplitIndices> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split ratio {ratio} not in (0, 1)"
        )));
    }
    let n = ds.n_rows();
    let by_class = rows_by_class(&ds.labels, ds.n_classes());
    for (c, rows) in by_class.iter().enumerate() {
        if rows.len() == 1 {
            return Err(Error::DegenerateClass {
                class: ds.label_names[c].clone(),
                count: 1,
                required: 2,
            });
        }
    }
    let target = (ratio * n as f64).round() as usize;
    let mut take: Vec<usize> = by_class
        .iter()
        .map(|r| (ratio * r.len() as f64).floor() as usize)
        .collect();
    let mut order: Vec<usize> = (0..by_class.len())
        .filter(|&c| !by_class[c].is_empty())
        .collect();
    let frac = |c: usize| ratio * by_class[c].len() as f64 - take[c] as f64;
    order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
    let mut leftover = target.saturating_sub(take.iter().sum());
    for &c in &order {
        if leftover == 0 {
            break;
        }
        if take[c] < by_class[c].len() {
            take[c] += 1;
            leftover -= 1;
        }
    }

    let mut train = Vec::with_capacity(target);
    let mut test = Vec::with_capacity(n - target);
    for (c, rows) in by_class.iter().enumerate() {
        let mut rows = rows.clone();
        let mut rng = rng_for(seed, streams::SPLIT, c as u64);
        shuffle(&mut rng, &mut rows);
        train.extend_from_slice(&rows[..take[c]]);
        test.extend_from_slice(&rows[take[c]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices {
        train,
        test,
        ratio,
        seed,
    })
}

/// Stratified k-fold assignment. Returns the row indices of each fold in
/// ascending order. Classes are shuffled independently and dealt round-robin
/// over the folds with a running offset, so fold sizes differ by at most one.
pub fn stratified_folds(
    labels: &[usize],
    n_classes: usize,
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    let by_class = rows_by_class(labels, n_classes);
    for (c, rows) in by_class.iter().enumerate() {
        if !rows.is_empty() && rows.len() < folds {
            return Err(Error::FoldTooSmall(format!(
                "class {c} has {} row(s) for {folds} folds",
                rows.len()
            )));
        }
    }
    let mut out = vec![Vec::new(); folds];
    let mut next = 0usize;
    for (c, rows) in by_class.iter().enumerate() {
        let mut rows = rows.clone();
        let mut rng = rng_for(seed, streams::FOLDS, c as u64);
        shuffle(&mut rng, &mut rows);
        for r in rows {
            out[next % folds].push(r);
            next += 1;
        }
    }
    out.iter_mut().for_each(|f| f.sort_unstable());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub columns: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn fit_minmax(ds: &Dataset) -> Result<ScalerParams> {
    if ds.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let d = ds.n_features();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for row in ds.features.rows() {
        for (j, &v) in row.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    Ok(ScalerParams {
        columns: ds.feature_names(),
        min,
        max,
    })
}

/// `(x - min) / (max - min)` per column, constant columns map to 0, no clipping.
pub fn apply_minmax(params: &ScalerParams, ds: &Dataset) -> Result<Dataset> {
    if params.columns != ds.feature_names() {
        return Err(Error::SchemaMismatch(
            "scaler was fitted on a different column set".into(),
        ));
    }
    let mut features = ds.features.clone();
    for i in 0..features.n_rows() {
        for (j, v) in features.row_mut(i).iter_mut().enumerate() {
            let span = params.max[j] - params.min[j];
            *v = if span > 0.0 {
                (*v - params.min[j]) / span
            } else {
                0.0
            };
        }
    }
    Ok(ds.with_features(features))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoteConfig {
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_k() -> usize {
    5
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            seed: 0,
        }
    }
}

/// SMOTE output with provenance: `parents[j]` holds the (base, neighbour) input
/// rows that synthetic row `n_original + j` was interpolated between.
#[derive(Debug, Clone)]
pub struct SmoteOutput {
    pub dataset: Dataset,
    pub n_original: usize,
    pub parents: Vec<(usize, usize)>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices (into `members`) of the `k` nearest members to `members[at]`,
/// excluding itself; distance ties go to the lower row index.
fn class_neighbours(x: &Matrix, members: &[usize], at: usize, k: usize) -> Vec<usize> {
    let base = x.row(members[at]);
    let mut cand: Vec<(f64, usize)> = members
        .iter()
        .enumerate()
        .filter(|&(m, _)| m != at)
        .map(|(m, &row)| (sq_dist(base, x.row(row)), m))
        .collect();
    let by = |a: &(f64, usize), b: &(f64, usize)| {
        a.0.total_cmp(&b.0).then(members[a.1].cmp(&members[b.1]))
    };
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, by);
        cand.truncate(k);
    }
    cand.sort_by(by);
    cand.into_iter().map(|(_, m)| m).collect()
}

pub fn smote_oversample(ds: &Dataset, cfg: &SmoteConfig) -> Result<Dataset> {
    smote_oversample_traced(ds, cfg).map(|o| o.dataset)
}

/// Oversamples every class up to the majority count.
///
/// Synthetic sample `j` of class `c` uses base member `j mod m` (round-robin)
/// and draws its neighbour and interpolation weight from a generator keyed by
/// `(seed, c, j)`, so the output does not depend on thread scheduling.
pub fn smote_oversample_traced(ds: &Dataset, cfg: &SmoteConfig) -> Result<SmoteOutput> {
    if cfg.k_neighbors == 0 {
        return Err(Error::InvalidArgument("k_neighbors must be >= 1".into()));
    }
    let by_class = rows_by_class(&ds.labels, ds.n_classes());
    for (c, rows) in by_class.iter().enumerate() {
        if rows.len() == 1 {
            return Err(Error::DegenerateClass {
                class: ds.label_names[c].clone(),
                count: 1,
                required: 2,
            });
        }
    }
    let majority = by_class.iter().map(Vec::len).max().unwrap_or(0);
    let x = &ds.features;
    let d = x.n_cols();
    let n = ds.n_rows();

    let mut new_rows: Vec<f64> = Vec::new();
    let mut new_labels = Vec::new();
    let mut parents = Vec::new();
    for (c, members) in by_class.iter().enumerate() {
        let m = members.len();
        if m == 0 || m == majority {
            continue;
        }
        let needed = majority - m;
        let k = cfg.k_neighbors.min(m - 1);
        let used_bases = needed.min(m);
        let neighbours: Vec<Vec<usize>> = (0..used_bases)
            .into_par_iter()
            .map(|b| class_neighbours(x, members, b, k))
            .collect();
        let stream = (streams::SMOTE << 32) | c as u64;
        let samples: Vec<(usize, usize, Vec<f64>)> = (0..needed)
            .into_par_iter()
            .map(|j| {
                let mut rng = rng_for(cfg.seed, stream, j as u64);
                let b = j % m;
                let nn = neighbours[b][rng.random_range(0..k)];
                let u: f64 = rng.random();
                let (base, other) = (x.row(members[b]), x.row(members[nn]));
                let row = base
                    .iter()
                    .zip(other)
                    .map(|(&a, &o)| {
                        let v = a + u * (o - a);
                        // rounding must not leave the segment
                        v.clamp(a.min(o), a.max(o))
                    })
                    .collect();
                (members[b], members[nn], row)
            })
            .collect();
        for (p, q, row) in samples {
            new_rows.extend(row);
            new_labels.push(c);
            parents.push((p, q));
        }
    }

    let mut data = Vec::with_capacity((n + new_labels.len()) * d);
    data.extend_from_slice(x.as_slice());
    data.extend(new_rows);
    let mut labels = ds.labels.clone();
    labels.extend(new_labels);
    let features = Matrix::from_vec(labels.len(), d, data)?;
    let mut raw_categorical = ds.raw_categorical.clone();
    if !parents.is_empty() {
        raw_categorical.clear();
    }
    let dataset = Dataset {
        schema: ds.schema.clone(),
        features,
        labels,
        label_names: ds.label_names.clone(),
        raw_categorical,
    };
    Ok(SmoteOutput {
        dataset,
        n_original: n,
        parents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{read_csv, LoadOptions};

    fn numeric(rows: &[&[f64]], labels: &[usize], n_classes: usize) -> Dataset {
        let d = rows[0].len();
        Dataset::new(
            (0..d).map(|j| format!("f{j}")).collect(),
            Matrix::from_rows(rows).unwrap(),
            labels.to_vec(),
            (0..n_classes).map(|c| format!("c{c}")).collect(),
        )
        .unwrap()
    }

    fn flags_dataset() -> Dataset {
        let text = "flag,x,target\n0x18,1,dos\n0x10,2,dos\n0x18,3,legitimate\n";
        read_csv(
            text.as_bytes(),
            &LoadOptions {
                categorical: vec!["flag".into()],
                ..LoadOptions::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn categorical_sorted_codes() {
        let ds = flags_dataset();
        let maps = fit_categorical_encoding(&ds, &["flag"]).unwrap();
        let enc = maps.get("flag").unwrap();
        assert_eq!(enc.codes["0x10"], 0);
        assert_eq!(enc.codes["0x18"], 1);
        assert_eq!(enc.unknown, 2);
        let out = apply_categorical_encoding(&ds, &maps).unwrap();
        assert_eq!(out.features().column(0), vec![1.0, 0.0, 1.0]);
        assert!(out
            .features()
            .column(0)
            .iter()
            .all(|&c| c < enc.unknown as f64));
    }

    #[test]
    fn unseen_value_gets_unknown_code() {
        let ds = flags_dataset();
        let maps = fit_categorical_encoding(&ds, &["flag"]).unwrap();
        let text = "flag,x,target\n0xFF,1,dos\n";
        let other = read_csv(
            text.as_bytes(),
            &LoadOptions {
                categorical: vec!["flag".into()],
                ..LoadOptions::default()
            },
        )
        .unwrap();
        let out = apply_categorical_encoding(&other, &maps).unwrap();
        assert_eq!(out.features().get(0, 0), 2.0);
    }

    #[test]
    fn categorical_three_codes_unknown_is_three() {
        let text = "flag,target\na,dos\nb,dos\nc,dos\n";
        let o = LoadOptions {
            categorical: vec!["flag".into()],
            ..LoadOptions::default()
        };
        let ds = read_csv(text.as_bytes(), &o).unwrap();
        let maps = fit_categorical_encoding(&ds, &["flag"]).unwrap();
        let probe = read_csv("flag,target\n0xFF,dos\n".as_bytes(), &o).unwrap();
        let out = apply_categorical_encoding(&probe, &maps).unwrap();
        assert_eq!(out.features().get(0, 0), 3.0);
    }

    #[test]
    fn empty_column_set_is_identity() {
        let ds = flags_dataset();
        let none: [&str; 0] = [];
        let maps = fit_categorical_encoding(&ds, &none).unwrap();
        assert!(maps.is_empty());
        assert_eq!(apply_categorical_encoding(&ds, &maps).unwrap(), ds);
        assert!(matches!(
            fit_categorical_encoding(&ds, &["nope"]),
            Err(Error::MissingColumn(_))
        ));
    }

    #[test]
    fn fit_is_row_order_independent() {
        let ds = flags_dataset();
        let rev = ds.select_rows(&[2, 1, 0]);
        assert_eq!(
            fit_categorical_encoding(&ds, &["flag", "x"]).unwrap(),
            fit_categorical_encoding(&rev, &["flag", "x"]).unwrap()
        );
    }

    fn labelled(counts: &[usize]) -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, &k) in counts.iter().enumerate() {
            for i in 0..k {
                rows.push(vec![i as f64, c as f64]);
                labels.push(c);
            }
        }
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        numeric(&refs, &labels, counts.len())
    }

    #[test]
    fn split_sizes() {
        let ds = labelled(&[500, 500]);
        let s = stratified_split(&ds, 0.8, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (800, 200));

        let ds = labelled(&[600, 300, 100]);
        let s = stratified_split(&ds, 0.8, 7).unwrap();
        let mut per_class = [0usize; 3];
        for &i in &s.train {
            per_class[ds.labels()[i]] += 1;
        }
        for (got, want) in per_class.iter().zip([480usize, 240, 80]) {
            assert!(got.abs_diff(want) <= 1, "{per_class:?}");
        }
        assert_eq!(s, stratified_split(&ds, 0.8, 7).unwrap());
        assert_ne!(s.train, stratified_split(&ds, 0.8, 8).unwrap().train);
    }

    #[test]
    fn split_rejects_singleton_class() {
        let ds = labelled(&[5, 1]);
        assert!(matches!(
            stratified_split(&ds, 0.8, 0),
            Err(Error::DegenerateClass { .. })
        ));
    }

    #[test]
    fn folds_partition_rows() {
        let ds = labelled(&[37, 21, 12]);
        let folds = stratified_folds(ds.labels(), 3, 5, 4).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..70).collect::<Vec<_>>());
        for f in &folds {
            assert!(f.len() == 14);
        }
        assert!(matches!(
            stratified_folds(ds.labels(), 3, 13, 0),
            Err(Error::FoldTooSmall(_))
        ));
    }

    #[test]
    fn minmax_examples() {
        let ds = numeric(&[&[2.0, 7.0], &[4.0, 7.0], &[6.0, 7.0]], &[0, 0, 0], 1);
        let p = fit_minmax(&ds).unwrap();
        let out = apply_minmax(&p, &ds).unwrap();
        assert_eq!(out.features().column(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(out.features().column(1), vec![0.0, 0.0, 0.0]);

        let train = numeric(&[&[0.0], &[10.0]], &[0, 0], 1);
        let test = numeric(&[&[12.0]], &[0], 1);
        let p = fit_minmax(&train).unwrap();
        assert_eq!(apply_minmax(&p, &test).unwrap().features().get(0, 0), 1.2);

        let other = Dataset::new(
            vec!["g".into()],
            Matrix::zeros(1, 1),
            vec![0],
            vec!["c".into()],
        )
        .unwrap();
        assert!(matches!(
            apply_minmax(&p, &other),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn smote_balances_and_preserves() {
        let ds = labelled(&[100, 50, 10]);
        let out = smote_oversample_traced(
            &ds,
            &SmoteConfig {
                k_neighbors: 5,
                seed: 3,
            },
        )
        .unwrap();
        assert_eq!(out.dataset.class_counts(), vec![100, 100, 100]);
        for i in 0..ds.n_rows() {
            assert_eq!(out.dataset.features().row(i), ds.features().row(i));
        }
        for (j, &(p, q)) in out.parents.iter().enumerate() {
            let row = out.dataset.features().row(out.n_original + j);
            assert_eq!(ds.labels()[p], ds.labels()[q]);
            assert_eq!(out.dataset.labels()[out.n_original + j], ds.labels()[p]);
            for ((&v, &a), &b) in row
                .iter()
                .zip(ds.features().row(p))
                .zip(ds.features().row(q))
            {
                assert!(v >= a.min(b) && v <= a.max(b));
            }
        }
    }

    #[test]
    fn smote_balanced_is_identity() {
        let ds = labelled(&[50, 50, 50]);
        assert_eq!(smote_oversample(&ds, &SmoteConfig::default()).unwrap(), ds);
    }

    #[test]
    fn smote_small_class_reduces_k() {
        let ds = labelled(&[20, 3]);
        let out = smote_oversample_traced(
            &ds,
            &SmoteConfig {
                k_neighbors: 5,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(out.dataset.class_counts(), vec![20, 20]);
        assert!(matches!(
            smote_oversample(&labelled(&[20, 1]), &SmoteConfig::default()),
            Err(Error::DegenerateClass { .. })
        ));
    }

    #[test]
    fn smote_is_deterministic() {
        let ds = labelled(&[60, 13, 7]);
        let cfg = SmoteConfig {
            k_neighbors: 5,
            seed: 11,
        };
        assert_eq!(
            smote_oversample(&ds, &cfg).unwrap(),
            smote_oversample(&ds, &cfg).unwrap()
        );
    }
}
