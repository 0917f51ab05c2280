//! Domain records and their on-disk formats.
//!
//! Model records are JSON-Lines, per-example predictions and embeddings are
//! CSV. Class labels are strings in files and dense [`ClassId`]s in memory;
//! ids follow the lexicographic order of the label names so that any two
//! sets interned from the same label universe agree on ids.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Syn,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Test, Split::Syn];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Syn => "syn",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "syn" => Ok(Split::Syn),
            other => Err(Error::invalid(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub u32);

impl ClassId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Sorted, de-duplicated label universe.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClassSet {
    names: Vec<String>,
}

impl ClassSet {
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set: BTreeSet<String> = labels.into_iter().map(|s| s.as_ref().to_owned()).collect();
        ClassSet {
            names: set.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ClassId> {
        self.names
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(|i| ClassId(i as u32))
    }

    pub fn name(&self, id: ClassId) -> &str {
        &self.names[id.index()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..self.names.len()).map(|i| ClassId(i as u32))
    }

    pub fn is_subset_of(&self, other: &ClassSet) -> bool {
        self.names.iter().all(|n| other.id(n).is_some())
    }
}

/// A hyperparameter value: numeric, boolean or categorical.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HParamValue {
    Num(f64),
    Bool(bool),
    Cat(String),
}

impl HParamValue {
    fn rank(&self) -> u8 {
        match self {
            HParamValue::Num(_) => 0,
            HParamValue::Bool(_) => 1,
            HParamValue::Cat(_) => 2,
        }
    }
}

impl PartialEq for HParamValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HParamValue {}

impl PartialOrd for HParamValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HParamValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (HParamValue::Num(a), HParamValue::Num(b)) => a.total_cmp(b),
            (HParamValue::Bool(a), HParamValue::Bool(b)) => a.cmp(b),
            (HParamValue::Cat(a), HParamValue::Cat(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl fmt::Display for HParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HParamValue::Num(x) => write!(f, "{x}"),
            HParamValue::Bool(b) => write!(f, "{b}"),
            HParamValue::Cat(s) => f.write_str(s),
        }
    }
}

impl From<f64> for HParamValue {
    fn from(x: f64) -> Self {
        HParamValue::Num(x)
    }
}

impl From<&str> for HParamValue {
    fn from(s: &str) -> Self {
        HParamValue::Cat(s.to_owned())
    }
}

/// One trained classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRecord {
    pub model_id: String,
    pub hparams: BTreeMap<String, HParamValue>,
    pub train_acc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_acc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub syn_acc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction_refs: Option<BTreeMap<String, PathBuf>>,
}

impl ModelRecord {
    pub fn new(model_id: impl Into<String>, train_acc: f64) -> Self {
        ModelRecord {
            model_id: model_id.into(),
            hparams: BTreeMap::new(),
            train_acc,
            test_acc: None,
            syn_acc: None,
            prediction_refs: None,
        }
    }

    pub fn prediction_ref(&self, split: Split) -> Option<&Path> {
        self.prediction_refs
            .as_ref()
            .and_then(|m| m.get(split.as_str()))
            .map(PathBuf::as_path)
    }
}

fn check_fraction(model_id: &str, field: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::invalid(format!(
            "accuracy out of range: {model_id}.{field} = {v} (expected a fraction in [0,1])"
        )));
    }
    Ok(())
}

/// Checks the collection invariants: accuracies in `[0,1]`, unique ids and an
/// identical hyperparameter-name set on every record.
pub fn validate_records(records: &[ModelRecord]) -> Result<()> {
    let mut seen = HashSet::new();
    let mut keys: Option<(&str, Vec<&String>)> = None;
    for r in records {
        check_fraction(&r.model_id, "train_acc", r.train_acc)?;
        if let Some(v) = r.test_acc {
            check_fraction(&r.model_id, "test_acc", v)?;
        }
        if let Some(v) = r.syn_acc {
            check_fraction(&r.model_id, "syn_acc", v)?;
        }
        if !seen.insert(r.model_id.as_str()) {
            return Err(Error::invalid(format!("duplicate model_id {:?}", r.model_id)));
        }
        let names: Vec<&String> = r.hparams.keys().collect();
        match &keys {
            None => keys = Some((&r.model_id, names)),
            Some((first, expected)) if *expected != names => {
                return Err(Error::invalid(format!(
                    "inconsistent hyperparameter names: {first:?} has {expected:?}, {:?} has {names:?}",
                    r.model_id
                )));
            }
            Some(_) => {}
        }
    }
    Ok(())
}

pub fn parse_model_records(text: &str, path: &Path) -> Result<Vec<ModelRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ModelRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    validate_records(&out)?;
    Ok(out)
}

pub fn load_model_records(path: impl AsRef<Path>) -> Result<Vec<ModelRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model_records(&text, path)
}

pub fn model_records_to_jsonl(records: &[ModelRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictionRow {
    pub example_id: String,
    pub true_label: ClassId,
    pub pred_label: ClassId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictionSet {
    pub split: Split,
    pub classes: ClassSet,
    pub rows: Vec<PredictionRow>,
}

impl PredictionSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub const PREDICTION_HEADER: [&str; 3] = ["example_id", "true_label", "pred_label"];

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file))
}

fn csv_err(path: &Path, line: usize, e: impl fmt::Display) -> Error {
    Error::Parse {
        path: path.to_owned(),
        line,
        message: e.to_string(),
    }
}

fn read_prediction_rows(path: &Path) -> Result<Vec<(String, String, String)>> {
    let mut rdr = csv_reader(path)?;
    let header = rdr.headers().map_err(|e| csv_err(path, 1, e))?.clone();
    for col in PREDICTION_HEADER {
        if !header.iter().any(|h| h == col) {
            return Err(Error::invalid(format!(
                "{}: missing column {col:?} (expected header {})",
                path.display(),
                PREDICTION_HEADER.join(",")
            )));
        }
    }
    if header.iter().collect::<Vec<_>>() != PREDICTION_HEADER {
        return Err(Error::invalid(format!(
            "{}: header must be exactly {}",
            path.display(),
            PREDICTION_HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(path, line, e))?;
        if rec.len() != 3 {
            return Err(csv_err(path, line, format!("expected 3 fields, found {}", rec.len())));
        }
        let (id, t, p) = (rec[0].trim(), rec[1].trim(), rec[2].trim());
        if t.is_empty() || p.is_empty() {
            return Err(csv_err(path, line, "unparseable label: empty"));
        }
        if !seen.insert(id.to_owned()) {
            return Err(Error::invalid(format!(
                "{}: duplicate example_id {id:?}",
                path.display()
            )));
        }
        rows.push((id.to_owned(), t.to_owned(), p.to_owned()));
    }
    if rows.is_empty() {
        return Err(Error::invalid(format!("{}: empty prediction set", path.display())));
    }
    Ok(rows)
}

fn intern_predictions(
    path: &Path,
    split: Split,
    raw: Vec<(String, String, String)>,
    classes: ClassSet,
) -> Result<PredictionSet> {
    let lookup = |label: &str| {
        classes.id(label).ok_or_else(|| {
            Error::invalid(format!(
                "{}: unparseable label {label:?}: not in the class set",
                path.display()
            ))
        })
    };
    let rows = raw
        .into_iter()
        .map(|(example_id, t, p)| {
            Ok(PredictionRow {
                true_label: lookup(&t)?,
                pred_label: lookup(&p)?,
                example_id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PredictionSet { split, classes, rows })
}

/// Loads a prediction CSV, interning labels against the labels it contains.
pub fn load_predictions(path: impl AsRef<Path>, split: Split) -> Result<PredictionSet> {
    let path = path.as_ref();
    let raw = read_prediction_rows(path)?;
    let classes = ClassSet::from_labels(raw.iter().flat_map(|(_, t, p)| [t, p]));
    intern_predictions(path, split, raw, classes)
}

/// Loads a prediction CSV whose labels must all belong to `classes`.
pub fn load_predictions_in(path: impl AsRef<Path>, split: Split, classes: &ClassSet) -> Result<PredictionSet> {
    let path = path.as_ref();
    let raw = read_prediction_rows(path)?;
    intern_predictions(path, split, raw, classes.clone())
}

pub fn predictions_to_csv(set: &PredictionSet) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PREDICTION_HEADER).expect("in-memory write");
    for r in &set.rows {
        w.write_record([
            r.example_id.as_str(),
            set.classes.name(r.true_label),
            set.classes.name(r.pred_label),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingRow<T> {
    pub example_id: String,
    pub label: ClassId,
    pub vector: Vec<T>,
}

/// Feature vectors with labels for one split under one feature extractor.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledEmbeddingSet<T> {
    pub split: Split,
    pub dim: usize,
    pub classes: ClassSet,
    pub rows: Vec<EmbeddingRow<T>>,
}

impl<T: Scalar> LabeledEmbeddingSet<T> {
    /// Validates dimensions, finiteness and label membership.
    pub fn new(split: Split, dim: usize, classes: ClassSet, rows: Vec<EmbeddingRow<T>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        for r in &rows {
            if r.vector.len() != dim {
                return Err(Error::invalid(format!(
                    "inconsistent dimension: row {:?} has {} values, expected {dim}",
                    r.example_id,
                    r.vector.len()
                )));
            }
            if r.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("non-finite value in row {:?}", r.example_id)));
            }
            if r.label.index() >= classes.len() {
                return Err(Error::invalid(format!(
                    "row {:?} has label id {} outside the class set",
                    r.example_id, r.label.0
                )));
            }
        }
        Ok(LabeledEmbeddingSet {
            split,
            dim,
            classes,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Per-class row counts, indexed by class id.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for r in &self.rows {
            counts[r.label.index()] += 1;
        }
        counts
    }

    /// Re-expresses labels against a wider universe, e.g. the training split's.
    pub fn reindexed(&self, classes: &ClassSet) -> Result<Self> {
        if !self.classes.is_subset_of(classes) {
            let extra: Vec<&String> = self
                .classes
                .names()
                .iter()
                .filter(|n| classes.id(n).is_none())
                .collect();
            return Err(Error::invalid(format!(
                "{} split has labels outside the training class set: {extra:?}",
                self.split
            )));
        }
        let rows = self
            .rows
            .iter()
            .map(|r| EmbeddingRow {
                example_id: r.example_id.clone(),
                label: classes.id(self.classes.name(r.label)).expect("checked subset"),
                vector: r.vector.clone(),
            })
            .collect();
        Ok(LabeledEmbeddingSet {
            split: self.split,
            dim: self.dim,
            classes: classes.clone(),
            rows,
        })
    }
}

/// Loads an embedding CSV (`example_id,label,f0,...,f{d-1}`).
pub fn load_embeddings(path: impl AsRef<Path>, split: Split) -> Result<LabeledEmbeddingSet<f64>> {
    let path = path.as_ref();
    let mut rdr = csv_reader(path)?;
    let header = rdr.headers().map_err(|e| csv_err(path, 1, e))?.clone();
    if header.len() < 2 || &header[0] != "example_id" || &header[1] != "label" {
        return Err(Error::invalid(format!(
            "{}: header must start with example_id,label",
            path.display()
        )));
    }
    let dim = header.len() - 2;
    if dim == 0 {
        return Err(Error::invalid(format!(
            "{}: embedding dimension must be positive (no f0.. columns)",
            path.display()
        )));
    }
    for (j, h) in header.iter().skip(2).enumerate() {
        if h != format!("f{j}") {
            return Err(Error::invalid(format!(
                "{}: column {} must be named f{j}, found {h:?}",
                path.display(),
                j + 2
            )));
        }
    }

    let mut raw = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(path, line, e))?;
        if rec.len() != dim + 2 {
            return Err(csv_err(
                path,
                line,
                format!(
                    "inconsistent dimension: {} values, expected {dim}",
                    rec.len().saturating_sub(2)
                ),
            ));
        }
        let label = rec[1].trim();
        if label.is_empty() {
            return Err(csv_err(path, line, "empty label"));
        }
        let mut vector = Vec::with_capacity(dim);
        for field in rec.iter().skip(2) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| csv_err(path, line, format!("bad value {field:?}: {e}")))?;
            if !v.is_finite() {
                return Err(csv_err(path, line, format!("non-finite value {field:?}")));
            }
            vector.push(v);
        }
        raw.push((rec[0].trim().to_owned(), label.to_owned(), vector));
    }
    if raw.is_empty() {
        return Err(Error::invalid(format!("{}: empty embedding set", path.display())));
    }
    let classes = ClassSet::from_labels(raw.iter().map(|(_, l, _)| l));
    let rows = raw
        .into_iter()
        .map(|(example_id, label, vector)| EmbeddingRow {
            example_id,
            label: classes.id(&label).expect("interned"),
            vector,
        })
        .collect();
    LabeledEmbeddingSet::new(split, dim, classes, rows)
}

pub fn embeddings_to_csv<T: Scalar>(set: &LabeledEmbeddingSet<T>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["example_id".to_owned(), "label".to_owned()];
    header.extend((0..set.dim).map(|j| format!("f{j}")));
    w.write_record(&header).expect("in-memory write");
    for r in &set.rows {
        let mut rec = vec![r.example_id.clone(), set.classes.name(r.label).to_owned()];
        rec.extend(r.vector.iter().map(|v| v.to_f64_lossy().to_string()));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}
