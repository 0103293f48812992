//! CSV ingestion, schema handling, class filtering and class-label encoding.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_TARGET_COLUMN: &str = "target";

/// Canonical class codes for the three-class MQTT task.
pub const CANONICAL_CLASSES: [&str; 3] = ["bruteforce", "dos", "legitimate"];

/// The 33 feature columns of the reduced MQTTset CSV.
pub const MQTTSET_COLUMNS: [&str; 33] = [
    "tcp.flags",
    "tcp.time_delta",
    "tcp.len",
    "mqtt.conack.flags",
    "mqtt.conack.flags.reserved",
    "mqtt.conack.flags.sp",
    "mqtt.conack.val",
    "mqtt.conflag.cleansess",
    "mqtt.conflag.passwd",
    "mqtt.conflag.qos",
    "mqtt.conflag.reserved",
    "mqtt.conflag.retain",
    "mqtt.conflag.uname",
    "mqtt.conflag.willflag",
    "mqtt.conflags",
    "mqtt.dupflag",
    "mqtt.hdrflags",
    "mqtt.kalive",
    "mqtt.len",
    "mqtt.msg",
    "mqtt.msgid",
    "mqtt.msgtype",
    "mqtt.proto_len",
    "mqtt.protoname",
    "mqtt.qos",
    "mqtt.retain",
    "mqtt.sub.qos",
    "mqtt.suback.qos",
    "mqtt.ver",
    "mqtt.willmsg",
    "mqtt.willmsg_len",
    "mqtt.willtopic",
    "mqtt.willtopic_len",
];

/// Columns label-encoded by the reference preprocessing.
pub const MQTTSET_ENCODED_COLUMNS: [&str; 4] = [
    "tcp.flags",
    "mqtt.msg",
    "mqtt.conack.flags",
    "mqtt.hdrflags",
];

/// Columns holding non-numeric text in the reduced MQTTset CSV. A superset of
/// [`MQTTSET_ENCODED_COLUMNS`]; the extra two carry hex flags and protocol names.
pub const MQTTSET_CATEGORICAL_COLUMNS: [&str; 6] = [
    "tcp.flags",
    "mqtt.conack.flags",
    "mqtt.conflags",
    "mqtt.hdrflags",
    "mqtt.msg",
    "mqtt.protoname",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub position: usize,
}

/// Column declaration inside a [`SchemaDef`] document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnDef {
    pub name: String,
    pub kind: ColumnKind,
}

/// JSON schema document: expected feature columns, their kinds and the target column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaDef {
    #[serde(default = "default_target")]
    pub target: String,
    pub columns: Vec<ColumnDef>,
}

fn default_target() -> String {
    DEFAULT_TARGET_COLUMN.to_string()
}

impl SchemaDef {
    /// Strict schema of the reduced MQTTset CSV.
    pub fn mqttset() -> Self {
        let columns = MQTTSET_COLUMNS
            .iter()
            .map(|&name| ColumnDef {
                name: name.to_string(),
                kind: if MQTTSET_CATEGORICAL_COLUMNS.contains(&name) {
                    ColumnKind::Categorical
                } else {
                    ColumnKind::Numeric
                },
            })
            .collect();
        Self {
            target: default_target(),
            columns,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let def: SchemaDef =
            serde_json::from_str(text).map_err(|e| Error::MalformedDocument(e.to_string()))?;
        let mut seen = BTreeSet::new();
        for c in &def.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::SchemaMismatch(format!(
                    "duplicate column `{}`",
                    c.name
                )));
            }
        }
        Ok(def)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_load_options(&self) -> LoadOptions {
        LoadOptions {
            target_column: self.target.clone(),
            categorical: self
                .columns
                .iter()
                .filter(|c| c.kind == ColumnKind::Categorical)
                .map(|c| c.name.clone())
                .collect(),
            required: self.columns.iter().map(|c| c.name.clone()).collect(),
        }
    }
}

/// How to interpret a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadOptions {
    pub target_column: String,
    /// Columns kept as raw text and label-encoded; everything else must parse as a number.
    pub categorical: Vec<String>,
    /// Feature columns that must be present in the header.
    pub required: Vec<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            target_column: DEFAULT_TARGET_COLUMN.to_string(),
            categorical: Vec::new(),
            required: Vec::new(),
        }
    }
}

impl LoadOptions {
    pub fn with_target(target: impl Into<String>) -> Self {
        Self {
            target_column: target.into(),
            ..Self::default()
        }
    }
}

/// Class-name to code mapping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEncoding {
    pub mapping: BTreeMap<String, usize>,
    pub inverse: Vec<String>,
}

impl LabelEncoding {
    pub fn code(&self, name: &str) -> Option<usize> {
        self.mapping.get(&normalize_class(name)).copied()
    }

    pub fn name(&self, code: usize) -> Option<&str> {
        self.inverse.get(code).map(String::as_str)
    }
}

/// Feature matrix with schema and integer class labels.
///
/// Categorical columns hold integer codes in `features`; the raw text is kept in
/// `raw_categorical` (keyed by column name) so encoders can be refitted.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub(crate) schema: Vec<ColumnSchema>,
    pub(crate) features: Matrix,
    pub(crate) labels: Vec<usize>,
    pub(crate) label_names: Vec<String>,
    pub(crate) raw_categorical: BTreeMap<String, Vec<String>>,
}

impl Dataset {
    /// Builds an all-numeric dataset, validating every invariant.
    pub fn new(
        feature_names: Vec<String>,
        features: Matrix,
        labels: Vec<usize>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let schema = feature_names
            .into_iter()
            .enumerate()
            .map(|(position, name)| ColumnSchema {
                name,
                kind: ColumnKind::Numeric,
                position,
            })
            .collect();
        let ds = Self {
            schema,
            features,
            labels,
            label_names,
            raw_categorical: BTreeMap::new(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.schema.len() != self.features.n_cols() {
            return Err(Error::SchemaMismatch(format!(
                "{} schema columns for {} matrix columns",
                self.schema.len(),
                self.features.n_cols()
            )));
        }
        let mut seen = BTreeSet::new();
        for (i, c) in self.schema.iter().enumerate() {
            if c.position != i || !seen.insert(c.name.as_str()) {
                return Err(Error::SchemaMismatch(format!(
                    "bad column entry `{}`",
                    c.name
                )));
            }
        }
        if self.labels.len() != self.features.n_rows() {
            return Err(Error::LengthMismatch(
                self.labels.len(),
                self.features.n_rows(),
            ));
        }
        if let Some(&code) = self.labels.iter().find(|&&c| c >= self.label_names.len()) {
            return Err(Error::CodeOutOfRange {
                code,
                n_classes: self.label_names.len(),
            });
        }
        if self.features.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("non-finite feature value".into()));
        }
        Ok(())
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.schema.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    pub fn raw_categorical(&self, name: &str) -> Option<&[String]> {
        self.raw_categorical.get(name).map(Vec::as_slice)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.label_names.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Row subset in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            schema: self.schema.clone(),
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            label_names: self.label_names.clone(),
            raw_categorical: self
                .raw_categorical
                .iter()
                .map(|(k, v)| (k.clone(), indices.iter().map(|&i| v[i].clone()).collect()))
                .collect(),
        }
    }

    /// Same rows and labels with a replacement feature matrix of identical shape.
    pub(crate) fn with_features(&self, features: Matrix) -> Self {
        debug_assert_eq!(features.n_cols(), self.features.n_cols());
        debug_assert_eq!(features.n_rows(), self.features.n_rows());
        Self {
            features,
            ..self.clone()
        }
    }
}

pub(crate) fn normalize_class(name: &str) -> String {
    name.trim().to_lowercase()
}

/// Sorted distinct values, i.e. the code order used for categorical columns.
pub(crate) fn sorted_distinct(values: &[String]) -> Vec<String> {
    values
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn parse_numeric(cell: &str, row: usize, column: &str) -> Result<f64> {
    let err = |message: &str| Error::ParseError {
        row,
        column: column.to_string(),
        message: message.to_string(),
    };
    if cell.is_empty() {
        return Err(err("empty cell"));
    }
    let v: f64 = cell
        .parse()
        .map_err(|_| err(&format!("`{cell}` is not a number")))?;
    if !v.is_finite() {
        return Err(err(&format!("`{cell}` is not finite")));
    }
    Ok(v)
}

/// Reads a header-bearing CSV. The target column becomes the labels (codes in
/// first-appearance order until [`encode_class_labels`] runs); categorical
/// columns keep their raw text and provisional sorted-order codes.
pub fn load_csv(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, opts)
}

pub fn read_csv<R: std::io::Read>(reader: R, opts: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();

    let target_pos = header
        .iter()
        .position(|h| h == &opts.target_column)
        .ok_or_else(|| Error::MissingColumn(opts.target_column.clone()))?;
    for req in opts.required.iter().chain(&opts.categorical) {
        if !header.contains(req) {
            return Err(Error::MissingColumn(req.clone()));
        }
    }
    let mut seen = BTreeSet::new();
    if let Some(dup) = header.iter().find(|h| !seen.insert(h.as_str())) {
        return Err(Error::SchemaMismatch(format!("duplicate header `{dup}`")));
    }

    let feature_cols: Vec<usize> = (0..header.len()).filter(|&i| i != target_pos).collect();
    let schema: Vec<ColumnSchema> = feature_cols
        .iter()
        .enumerate()
        .map(|(position, &i)| ColumnSchema {
            name: header[i].clone(),
            kind: if opts.categorical.contains(&header[i]) {
                ColumnKind::Categorical
            } else {
                ColumnKind::Numeric
            },
            position,
        })
        .collect();

    let d = schema.len();
    let mut data = Vec::new();
    let mut raw: BTreeMap<String, Vec<String>> = schema
        .iter()
        .filter(|c| c.kind == ColumnKind::Categorical)
        .map(|c| (c.name.clone(), Vec::new()))
        .collect();
    let mut label_names: Vec<String> = Vec::new();
    let mut labels = Vec::new();

    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::ParseError {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let class = normalize_class(&record[target_pos]);
        if class.is_empty() {
            return Err(Error::ParseError {
                row,
                column: opts.target_column.clone(),
                message: "empty cell".into(),
            });
        }
        let code = match label_names.iter().position(|n| n == &class) {
            Some(c) => c,
            None => {
                label_names.push(class);
                label_names.len() - 1
            }
        };
        labels.push(code);
        for (col, &i) in schema.iter().zip(&feature_cols) {
            let cell = &record[i];
            match col.kind {
                ColumnKind::Numeric => data.push(parse_numeric(cell, row, &col.name)?),
                ColumnKind::Categorical => {
                    if cell.is_empty() {
                        return Err(Error::ParseError {
                            row,
                            column: col.name.clone(),
                            message: "empty cell".into(),
                        });
                    }
                    raw.get_mut(&col.name)
                        .expect("categorical column")
                        .push(cell.to_string());
                    data.push(0.0);
                }
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut features = Matrix::from_vec(labels.len(), d, data)?;
    for col in schema.iter().filter(|c| c.kind == ColumnKind::Categorical) {
        let values = &raw[&col.name];
        let order = sorted_distinct(values);
        for (i, v) in values.iter().enumerate() {
            let code = order.binary_search(v).expect("value present");
            features.set(i, col.position, code as f64);
        }
    }

    let ds = Dataset {
        schema,
        features,
        labels,
        label_names,
        raw_categorical: raw,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes the dataset in the dialect [`load_csv`] reads. Categorical columns are
/// written as their raw text when available.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>, target_column: &str) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(ds, file, target_column)
}

pub fn write_csv_to<W: std::io::Write>(ds: &Dataset, writer: W, target_column: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = ds.schema.iter().map(|c| c.name.as_str()).collect();
    header.push(target_column);
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..ds.n_rows() {
        record.clear();
        for c in &ds.schema {
            match ds.raw_categorical.get(&c.name) {
                Some(raw) => record.push(raw[i].clone()),
                None => record.push(format_value(ds.features.get(i, c.position))),
            }
        }
        record.push(ds.label_names[ds.labels[i]].clone());
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Shortest representation that parses back to the same `f64`.
pub(crate) fn format_value(v: f64) -> String {
    format!("{v}")
}

/// Keeps rows whose class is in `keep` (case-insensitive), preserving order.
/// Label codes are unchanged; run [`encode_class_labels`] afterwards to compact them.
pub fn filter_classes<S: AsRef<str>>(ds: &Dataset, keep: &[S]) -> Result<Dataset> {
    if keep.is_empty() {
        return Err(Error::InvalidArgument("no classes to keep".into()));
    }
    let present: BTreeSet<usize> = ds.labels.iter().copied().collect();
    let mut keep_codes = BTreeSet::new();
    for name in keep {
        let name = normalize_class(name.as_ref());
        let code = ds
            .label_names
            .iter()
            .position(|n| n == &name)
            .filter(|c| present.contains(c))
            .ok_or_else(|| Error::UnknownClass(name.clone()))?;
        keep_codes.insert(code);
    }
    let rows: Vec<usize> = (0..ds.n_rows())
        .filter(|&i| keep_codes.contains(&ds.labels[i]))
        .collect();
    Ok(ds.select_rows(&rows))
}

/// Column names from the header row of a CSV file.
pub fn csv_header(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    Ok(rdr.headers()?.iter().map(str::to_string).collect())
}

/// Re-codes labels with a previously fitted encoding, so a dataset read back
/// from disk uses the same codes as the one it was written from.
pub fn recode_labels(ds: &Dataset, enc: &LabelEncoding) -> Result<Dataset> {
    let labels = ds
        .labels
        .iter()
        .map(|&c| {
            let name = &ds.label_names[c];
            enc.code(name)
                .ok_or_else(|| Error::UnknownClass(name.clone()))
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        labels,
        label_names: enc.inverse.clone(),
        ..ds.clone()
    })
}

/// Re-codes labels densely in lexicographic order of the class names present.
/// For the three MQTT classes this gives bruteforce=0, dos=1, legitimate=2.
pub fn encode_class_labels(ds: &Dataset) -> Result<(Dataset, LabelEncoding)> {
    if ds.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let present: BTreeSet<String> = ds
        .labels
        .iter()
        .map(|&c| normalize_class(&ds.label_names[c]))
        .collect();
    let inverse: Vec<String> = present.into_iter().collect();
    let mapping: BTreeMap<String, usize> = inverse
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();
    let labels = ds
        .labels
        .iter()
        .map(|&c| mapping[&normalize_class(&ds.label_names[c])])
        .collect();
    let out = Dataset {
        labels,
        label_names: inverse.clone(),
        ..ds.clone()
    };
    Ok((out, LabelEncoding { mapping, inverse }))
}
