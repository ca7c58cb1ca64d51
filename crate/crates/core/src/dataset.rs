//! Annotated-example data model, gold-label resolution and group-respecting splits.
//!
//! On disk a dataset is either JSONL or CSV. Both use the same flat field names:
//! `id, group_id, f0..f{F-1}, a0..a{K-1}, direct_difficulty`, with two optional
//! diagnostic columns `_latent_difficulty` and `_latent_truth` written only by the
//! synthetic generator. JSONL carries its metadata on a first line keyed `_meta`;
//! CSV carries it in a companion `<stem>.meta.json` file.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::seed;

/// Binary class index: 0 or 1.
pub type Label = u8;

pub const LATENT_DIFFICULTY_KEY: &str = "_latent_difficulty";
pub const LATENT_TRUTH_KEY: &str = "_latent_truth";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedExample {
    pub id: String,
    /// Whole-slide identity; every example of a group lands on the same side of a split.
    pub group_id: String,
    pub features: Vec<f64>,
    pub annotator_labels: Vec<Label>,
    /// Direct 1-4 difficulty score from a single rater.
    pub direct_difficulty: Option<u8>,
    /// Diagnostic only (synthetic data). Never read for training decisions.
    pub latent_difficulty: Option<f64>,
    /// Diagnostic only (synthetic data). Never read for training decisions.
    pub latent_truth: Option<Label>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub num_annotators: usize,
    pub feature_dim: usize,
    pub class_names: [String; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    examples: Vec<AnnotatedExample>,
    num_annotators: usize,
    feature_dim: usize,
    class_names: [String; 2],
}

impl Dataset {
    /// Builds a validated dataset.
    pub fn new(
        examples: Vec<AnnotatedExample>,
        num_annotators: usize,
        feature_dim: usize,
        class_names: [String; 2],
    ) -> Result<Self> {
        if num_annotators == 0 {
            return Err(Error::Schema("number of annotators must be at least 1".into()));
        }
        if feature_dim == 0 {
            return Err(Error::Schema("feature dimension must be at least 1".into()));
        }
        let mut seen = HashSet::with_capacity(examples.len());
        for (i, ex) in examples.iter().enumerate() {
            validate_example(ex, num_annotators, feature_dim)
                .map_err(|msg| Error::Schema(format!("example {i} (`{}`): {msg}", ex.id)))?;
            if !seen.insert(ex.id.as_str()) {
                return Err(Error::DuplicateId(ex.id.clone()));
            }
        }
        Ok(Self {
            examples,
            num_annotators,
            feature_dim,
            class_names,
        })
    }

    pub fn examples(&self) -> &[AnnotatedExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn num_annotators(&self) -> usize {
        self.num_annotators
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn class_names(&self) -> &[String; 2] {
        &self.class_names
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            num_annotators: self.num_annotators,
            feature_dim: self.feature_dim,
            class_names: self.class_names.clone(),
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.examples.iter().map(|e| e.id.as_str())
    }

    /// Map from id to row index.
    pub fn index_of(&self) -> HashMap<&str, usize> {
        self.examples
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.as_str(), i))
            .collect()
    }

    /// Resolves the majority-vote gold label of every example, in row order.
    pub fn gold_labels(&self, tie_policy: TiePolicy) -> Result<Vec<GoldLabel>> {
        self.examples
            .iter()
            .map(|e| majority_vote(&e.annotator_labels, tie_policy))
            .collect()
    }

    /// Keeps the rows for which `keep` returns true, preserving order.
    pub fn filter(&self, mut keep: impl FnMut(&AnnotatedExample) -> bool) -> Dataset {
        Dataset {
            examples: self.examples.iter().filter(|e| keep(e)).cloned().collect(),
            num_annotators: self.num_annotators,
            feature_dim: self.feature_dim,
            class_names: self.class_names.clone(),
        }
    }
}

fn validate_example(ex: &AnnotatedExample, k: usize, f: usize) -> std::result::Result<(), String> {
    if ex.annotator_labels.len() != k {
        return Err(format!(
            "expected {k} annotator labels, found {}",
            ex.annotator_labels.len()
        ));
    }
    if let Some(bad) = ex.annotator_labels.iter().find(|&&l| l > 1) {
        return Err(format!("annotator label {bad} is not a binary class index"));
    }
    if ex.features.len() != f {
        return Err(format!("expected {f} features, found {}", ex.features.len()));
    }
    if ex.features.iter().any(|v| !v.is_finite()) {
        return Err("non-finite feature value".into());
    }
    if let Some(d) = ex.direct_difficulty {
        if !(1..=4).contains(&d) {
            return Err(format!("direct difficulty {d} outside 1..=4"));
        }
    }
    if let Some(t) = ex.latent_truth {
        if t > 1 {
            return Err(format!("latent truth {t} is not a binary class index"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Majority vote
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Exact ties are an error. Cannot trigger for odd K.
    #[default]
    Error,
    /// Exact ties resolve to class 0. Only meaningful for even K.
    Class0,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub label: Label,
    /// Number of annotators voting for `label`.
    pub agreement_count: usize,
    pub agreement_fraction: f64,
}

/// Resolves a gold label by majority vote over binary annotator labels.
///
/// Under [`TiePolicy::Class0`] a tie yields class 0 with `agreement_count = K/2`,
/// the one case where the count is not a strict majority.
pub fn majority_vote(labels: &[Label], tie_policy: TiePolicy) -> Result<GoldLabel> {
    if labels.is_empty() {
        return Err(Error::Schema("majority vote needs at least one label".into()));
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Schema(format!("label {bad} is not a binary class index")));
    }
    let k = labels.len();
    let ones = labels.iter().filter(|&&l| l == 1).count();
    let zeros = k - ones;
    let (label, count) = match zeros.cmp(&ones) {
        std::cmp::Ordering::Greater => (0, zeros),
        std::cmp::Ordering::Less => (1, ones),
        std::cmp::Ordering::Equal => match tie_policy {
            TiePolicy::Error => {
                return Err(Error::Tie {
                    votes_class0: zeros,
                    votes_class1: ones,
                })
            }
            TiePolicy::Class0 => (0, zeros),
        },
    };
    Ok(GoldLabel {
        label,
        agreement_count: count,
        agreement_fraction: count as f64 / k as f64,
    })
}

/// Number of examples at each agreement count.
pub fn agreement_histogram(dataset: &Dataset) -> Result<BTreeMap<usize, usize>> {
    let mut hist = BTreeMap::new();
    for gold in dataset.gold_labels(TiePolicy::Error)? {
        *hist.entry(gold.agreement_count).or_insert(0) += 1;
    }
    Ok(hist)
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

/// Partitions a dataset into (train, test) so that no group straddles the split.
///
/// Groups are visited in a seeded random order and each is assigned to the test side
/// when that brings the test count closer to `test_fraction · N`. Both sides always
/// receive at least one group. Row order is preserved within each side.
pub fn split_by_group(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Range(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    // First-appearance order keeps the shuffle input deterministic.
    let mut order: Vec<&str> = Vec::new();
    let mut sizes: HashMap<&str, usize> = HashMap::new();
    for ex in dataset.examples() {
        let entry = sizes.entry(ex.group_id.as_str()).or_insert_with(|| {
            order.push(ex.group_id.as_str());
            0
        });
        *entry += 1;
    }
    if order.len() < 2 {
        return Err(Error::Split(format!(
            "need at least 2 distinct groups, found {}",
            order.len()
        )));
    }
    let mut rng = seed::rng(seed);
    order.shuffle(&mut rng);

    let target = test_fraction * dataset.len() as f64;
    let mut test_groups: HashSet<&str> = HashSet::new();
    let mut test_count = 0usize;
    for group in &order {
        let size = sizes[group];
        let with = ((test_count + size) as f64 - target).abs();
        let without = (test_count as f64 - target).abs();
        if with < without {
            test_groups.insert(group);
            test_count += size;
        }
    }
    if test_groups.is_empty() {
        let smallest = order.iter().min_by_key(|g| sizes[*g]).copied().unwrap();
        test_groups.insert(smallest);
    } else if test_groups.len() == order.len() {
        let largest = order.iter().max_by_key(|g| sizes[*g]).copied().unwrap();
        test_groups.remove(largest);
    }

    let train = dataset.filter(|e| !test_groups.contains(e.group_id.as_str()));
    let test = dataset.filter(|e| test_groups.contains(e.group_id.as_str()));
    Ok((train, test))
}

// ---------------------------------------------------------------------------
// Disk formats
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl DatasetFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" => Some(Self::Jsonl),
            "csv" => Some(Self::Csv),
            _ => None,
        }
    }
}

impl std::str::FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(Self::Jsonl),
            "csv" => Ok(Self::Csv),
            other => Err(Error::Config(format!("unknown dataset format `{other}`"))),
        }
    }
}

/// Path of the metadata sidecar for a CSV dataset: `data.csv` → `data.meta.json`.
pub fn csv_meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset> {
    match format {
        DatasetFormat::Jsonl => load_jsonl(path),
        DatasetFormat::Csv => load_csv(path),
    }
}

pub fn save_dataset(dataset: &Dataset, path: &Path, format: DatasetFormat) -> Result<()> {
    match format {
        DatasetFormat::Jsonl => save_jsonl(dataset, path),
        DatasetFormat::Csv => save_csv(dataset, path),
    }
}

fn column_names(k: usize, f: usize, latent: bool) -> Vec<String> {
    let mut cols = vec!["id".to_string(), "group_id".to_string()];
    cols.extend((0..f).map(|i| format!("f{i}")));
    cols.extend((0..k).map(|i| format!("a{i}")));
    cols.push("direct_difficulty".into());
    if latent {
        cols.push(LATENT_DIFFICULTY_KEY.into());
        cols.push(LATENT_TRUTH_KEY.into());
    }
    cols
}

fn has_latent(dataset: &Dataset) -> bool {
    dataset
        .examples()
        .iter()
        .any(|e| e.latent_difficulty.is_some() || e.latent_truth.is_some())
}

fn example_to_json(ex: &AnnotatedExample, latent: bool) -> Value {
    let mut obj = Map::new();
    obj.insert("id".into(), Value::from(ex.id.clone()));
    obj.insert("group_id".into(), Value::from(ex.group_id.clone()));
    for (i, v) in ex.features.iter().enumerate() {
        obj.insert(format!("f{i}"), Value::from(*v));
    }
    for (i, a) in ex.annotator_labels.iter().enumerate() {
        obj.insert(format!("a{i}"), Value::from(*a));
    }
    obj.insert(
        "direct_difficulty".into(),
        ex.direct_difficulty.map_or(Value::Null, Value::from),
    );
    if latent {
        obj.insert(
            LATENT_DIFFICULTY_KEY.into(),
            ex.latent_difficulty.map_or(Value::Null, Value::from),
        );
        obj.insert(
            LATENT_TRUTH_KEY.into(),
            ex.latent_truth.map_or(Value::Null, Value::from),
        );
    }
    Value::Object(obj)
}

fn save_jsonl(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let latent = has_latent(dataset);
    let meta = serde_json::json!({ "_meta": dataset.meta() });
    let mut write_line = |v: &Value| -> std::io::Result<()> {
        serde_json::to_writer(&mut w, v)?;
        w.write_all(b"\n")
    };
    write_line(&meta).map_err(|e| Error::io(path, e))?;
    for ex in dataset.examples() {
        write_line(&example_to_json(ex, latent)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Counts the `f<i>` / `a<i>` keys of a row to infer F and K.
fn infer_dims<'a>(keys: impl Iterator<Item = &'a str>) -> (usize, usize) {
    let mut f = 0;
    let mut k = 0;
    for key in keys {
        let numbered = |prefix: char| {
            key.strip_prefix(prefix)
                .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
        };
        if numbered('f') {
            f += 1;
        } else if numbered('a') {
            k += 1;
        }
    }
    (k, f)
}

fn default_class_names() -> [String; 2] {
    ["class0".to_string(), "class1".to_string()]
}

fn load_jsonl(path: &Path) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut meta: Option<DatasetMeta> = None;
    let mut examples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let Value::Object(obj) = value else {
            return Err(Error::Parse {
                line: line_no,
                message: "expected a JSON object".into(),
            });
        };
        if let Some(m) = obj.get("_meta") {
            if meta.is_some() || !examples.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "`_meta` must be the first line".into(),
                });
            }
            meta = Some(serde_json::from_value(m.clone()).map_err(|e| Error::Parse {
                line: line_no,
                message: format!("bad `_meta`: {e}"),
            })?);
            continue;
        }
        let dims = match &meta {
            Some(m) => (m.num_annotators, m.feature_dim),
            None => {
                let (k, f) = infer_dims(obj.keys().map(String::as_str));
                meta = Some(DatasetMeta {
                    num_annotators: k,
                    feature_dim: f,
                    class_names: default_class_names(),
                });
                (k, f)
            }
        };
        let row = RowFields::from_json(&obj, line_no)?;
        examples.push(row.into_example(dims, line_no)?);
    }
    let meta = meta.ok_or_else(|| Error::Parse {
        line: 0,
        message: "empty dataset file".into(),
    })?;
    Dataset::new(examples, meta.num_annotators, meta.feature_dim, meta.class_names)
}

/// One row's fields keyed by column name, independent of the encoding.
type FieldLookup<'a> = Box<dyn Fn(&str) -> Option<CellValue> + 'a>;

struct RowFields<'a> {
    get: FieldLookup<'a>,
}

enum CellValue {
    Null,
    Number(f64),
    Text(String),
}

impl<'a> RowFields<'a> {
    fn from_json(obj: &'a Map<String, Value>, line: usize) -> Result<Self> {
        for (key, v) in obj {
            if matches!(v, Value::Array(_) | Value::Object(_) | Value::Bool(_)) {
                return Err(Error::Parse {
                    line,
                    message: format!("field `{key}` has an unsupported type"),
                });
            }
        }
        Ok(Self {
            get: Box::new(move |key| {
                obj.get(key).map(|v| match v {
                    Value::Null => CellValue::Null,
                    Value::Number(n) => CellValue::Number(n.as_f64().unwrap_or(f64::NAN)),
                    Value::String(s) => CellValue::Text(s.clone()),
                    _ => CellValue::Null,
                })
            }),
        })
    }

    fn from_csv(headers: &'a HashMap<String, usize>, record: &'a csv::StringRecord) -> Self {
        Self {
            get: Box::new(move |key| {
                let idx = *headers.get(key)?;
                let cell = record.get(idx)?.trim();
                Some(if cell.is_empty() {
                    CellValue::Null
                } else if let Ok(v) = cell.parse::<f64>() {
                    CellValue::Number(v)
                } else {
                    CellValue::Text(cell.to_string())
                })
            }),
        }
    }

    fn text(&self, key: &str, line: usize) -> Result<String> {
        match (self.get)(key) {
            Some(CellValue::Text(s)) => Ok(s),
            Some(CellValue::Number(n)) => Ok(format_number_id(n)),
            _ => Err(Error::Parse {
                line,
                message: format!("missing field `{key}`"),
            }),
        }
    }

    fn number(&self, key: &str, line: usize) -> Result<Option<f64>> {
        match (self.get)(key) {
            None | Some(CellValue::Null) => Ok(None),
            Some(CellValue::Number(n)) => Ok(Some(n)),
            Some(CellValue::Text(s)) => Err(Error::Parse {
                line,
                message: format!("field `{key}` is not numeric: `{s}`"),
            }),
        }
    }

    fn small_int(&self, key: &str, line: usize) -> Result<Option<u8>> {
        match self.number(key, line)? {
            None => Ok(None),
            Some(v) if v.fract() == 0.0 && (0.0..=255.0).contains(&v) => Ok(Some(v as u8)),
            Some(v) => Err(Error::Parse {
                line,
                message: format!("field `{key}` must be a small non-negative integer, got {v}"),
            }),
        }
    }

    fn into_example(self, (k, f): (usize, usize), line: usize) -> Result<AnnotatedExample> {
        let id = self.text("id", line)?;
        let group_id = self.text("group_id", line)?;
        let mut features = Vec::with_capacity(f);
        for i in 0..f {
            let v = self
                .number(&format!("f{i}"), line)?
                .ok_or_else(|| Error::Schema(format!("line {line}: expected {f} features, `f{i}` missing")))?;
            features.push(v);
        }
        if (self.get)(&format!("f{f}")).is_some() {
            return Err(Error::Schema(format!("line {line}: more than {f} features")));
        }
        let mut annotator_labels = Vec::with_capacity(k);
        for i in 0..k {
            let v = self
                .small_int(&format!("a{i}"), line)?
                .ok_or_else(|| Error::Schema(format!("line {line}: expected {k} annotator labels, `a{i}` missing")))?;
            annotator_labels.push(v);
        }
        if (self.get)(&format!("a{k}")).is_some() {
            return Err(Error::Schema(format!("line {line}: more than {k} annotator labels")));
        }
        let ex = AnnotatedExample {
            id,
            group_id,
            features,
            annotator_labels,
            direct_difficulty: self.small_int("direct_difficulty", line)?,
            latent_difficulty: self.number(LATENT_DIFFICULTY_KEY, line)?,
            latent_truth: self.small_int(LATENT_TRUTH_KEY, line)?,
        };
        validate_example(&ex, k, f).map_err(|msg| Error::Schema(format!("line {line}: {msg}")))?;
        Ok(ex)
    }
}

fn format_number_id(n: f64) -> String {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        n.to_string()
    }
}

fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let latent = has_latent(dataset);
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(column_names(dataset.num_annotators(), dataset.feature_dim(), latent))
        .map_err(|e| csv_io(path, e))?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for ex in dataset.examples() {
        let mut row = vec![ex.id.clone(), ex.group_id.clone()];
        // `{}` on f64 prints the shortest representation that round-trips exactly.
        row.extend(ex.features.iter().map(|v| format!("{v}")));
        row.extend(ex.annotator_labels.iter().map(|a| a.to_string()));
        row.push(opt(ex.direct_difficulty.map(|d| d.to_string())));
        if latent {
            row.push(opt(ex.latent_difficulty.map(|d| format!("{d}"))));
            row.push(opt(ex.latent_truth.map(|t| t.to_string())));
        }
        w.write_record(&row).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let meta_path = csv_meta_path(path);
    let meta = serde_json::to_string_pretty(&dataset.meta()).expect("metadata serializes");
    fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

fn load_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;
    let header_record = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let headers: HashMap<String, usize> = header_record
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_string(), i))
        .collect();
    let (k_header, f_header) = infer_dims(headers.keys().map(String::as_str));
    let meta_path = csv_meta_path(path);
    let meta = if meta_path.exists() {
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        serde_json::from_str::<DatasetMeta>(&text).map_err(|e| Error::Parse {
            line: 0,
            message: format!("bad metadata file {}: {e}", meta_path.display()),
        })?
    } else {
        DatasetMeta {
            num_annotators: k_header,
            feature_dim: f_header,
            class_names: default_class_names(),
        }
    };
    if (meta.num_annotators, meta.feature_dim) != (k_header, f_header) {
        return Err(Error::Schema(format!(
            "header has {f_header} feature and {k_header} annotator columns; metadata declares {} and {}",
            meta.feature_dim, meta.num_annotators
        )));
    }
    let width = header_record.len();
    let mut examples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line_no = i + 2;
        let record = record.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if record.len() != width {
            return Err(Error::Schema(format!(
                "line {line_no}: expected {width} columns, found {}",
                record.len()
            )));
        }
        let row = RowFields::from_csv(&headers, &record);
        examples.push(row.into_example((meta.num_annotators, meta.feature_dim), line_no)?);
    }
    Dataset::new(examples, meta.num_annotators, meta.feature_dim, meta.class_names)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example(id: &str, group: &str, labels: &[Label]) -> AnnotatedExample {
        AnnotatedExample {
            id: id.into(),
            group_id: group.into(),
            features: vec![0.5, -1.0, 2.25, 0.0],
            annotator_labels: labels.to_vec(),
            direct_difficulty: None,
            latent_difficulty: None,
            latent_truth: None,
        }
    }

    fn names() -> [String; 2] {
        ["HP".into(), "SSA".into()]
    }

    #[test]
    fn unanimous_and_minimal_majority() {
        let g = majority_vote(&[0; 7], TiePolicy::Error).unwrap();
        assert_eq!((g.label, g.agreement_count), (0, 7));
        assert_eq!(g.agreement_fraction, 1.0);
        let g = majority_vote(&[0, 0, 0, 0, 1, 1, 1], TiePolicy::Error).unwrap();
        assert_eq!((g.label, g.agreement_count), (0, 4));
        let g = majority_vote(&[1, 1, 0, 1, 1, 0, 1], TiePolicy::Error).unwrap();
        assert_eq!((g.label, g.agreement_count), (1, 5));
    }

    #[test]
    fn ties_follow_policy() {
        assert!(matches!(
            majority_vote(&[0, 1, 1, 0], TiePolicy::Error),
            Err(Error::Tie { .. })
        ));
        let g = majority_vote(&[0, 1, 1, 0], TiePolicy::Class0).unwrap();
        assert_eq!((g.label, g.agreement_count), (0, 2));
        assert!(majority_vote(&[], TiePolicy::Error).is_err());
        assert!(majority_vote(&[0, 2, 1], TiePolicy::Error).is_err());
    }

    #[test]
    fn histogram_counts_unanimous() {
        let ds = Dataset::new(
            (0..3).map(|i| example(&format!("e{i}"), "g", &[1; 7])).collect(),
            7,
            4,
            names(),
        )
        .unwrap();
        let hist = agreement_histogram(&ds).unwrap();
        assert_eq!(hist, BTreeMap::from([(7, 3)]));
    }

    #[test]
    fn duplicate_ids_and_bad_rows_rejected() {
        let dup = vec![example("x", "g", &[0; 7]), example("x", "g", &[1; 7])];
        assert!(matches!(Dataset::new(dup, 7, 4, names()), Err(Error::DuplicateId(id)) if id == "x"));
        let short = vec![example("x", "g", &[0; 6])];
        assert!(matches!(Dataset::new(short, 7, 4, names()), Err(Error::Schema(_))));
        let mut bad = example("x", "g", &[0; 7]);
        bad.direct_difficulty = Some(0);
        assert!(Dataset::new(vec![bad], 7, 4, names()).is_err());
        let mut nan = example("x", "g", &[0; 7]);
        nan.features[1] = f64::NAN;
        assert!(Dataset::new(vec![nan], 7, 4, names()).is_err());
    }

    #[test]
    fn two_groups_split_evenly() {
        let examples = (0..10)
            .map(|i| example(&format!("e{i}"), if i < 5 { "a" } else { "b" }, &[0; 7]))
            .collect();
        let ds = Dataset::new(examples, 7, 4, names()).unwrap();
        for seed in 0..5 {
            let (train, test) = split_by_group(&ds, 0.5, seed).unwrap();
            assert_eq!((train.len(), test.len()), (5, 5));
            let tg: HashSet<_> = test.examples().iter().map(|e| &e.group_id).collect();
            assert_eq!(tg.len(), 1);
        }
    }

    #[test]
    fn single_group_cannot_split() {
        let ds = Dataset::new(
            vec![example("a", "g", &[0; 7]), example("b", "g", &[0; 7])],
            7,
            4,
            names(),
        )
        .unwrap();
        assert!(matches!(split_by_group(&ds, 0.3, 1), Err(Error::Split(_))));
        assert!(matches!(split_by_group(&ds, 1.0, 1), Err(Error::Range(_))));
    }

    #[test]
    fn jsonl_round_trip_and_line_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mut rows: Vec<_> = (0..3)
            .map(|i| example(&format!("e{i}"), "g1", &[1, 1, 1, 0, 1, 1, 1]))
            .collect();
        rows[1].direct_difficulty = Some(3);
        rows[2].features[0] = 0.1 + 0.2;
        let ds = Dataset::new(rows, 7, 4, names()).unwrap();
        let path = dir.path().join("d.jsonl");
        save_dataset(&ds, &path, DatasetFormat::Jsonl).unwrap();
        let back = load_dataset(&path, DatasetFormat::Jsonl).unwrap();
        assert_eq!(back, ds);

        // drop one label from the third line (second example)
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut obj: Map<String, Value> = serde_json::from_str(&lines[2]).unwrap();
        obj.remove("a6");
        lines[2] = serde_json::to_string(&obj).unwrap();
        fs::write(&path, lines.join("\n")).unwrap();
        let err = load_dataset(&path, DatasetFormat::Jsonl).unwrap_err();
        assert!(matches!(&err, Error::Schema(m) if m.contains("line 3")), "{err}");

        fs::write(&path, "{\"id\": \"a\",\n").unwrap();
        assert!(matches!(
            load_dataset(&path, DatasetFormat::Jsonl),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn csv_missing_cell_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        fs::write(
            &path,
            "id,group_id,f0,a0,a1,a2,direct_difficulty\nx,g,0.5,1,1,0,\ny,g,0.25,1,1,,2\n",
        )
        .unwrap();
        let err = load_dataset(&path, DatasetFormat::Csv).unwrap_err();
        assert!(matches!(&err, Error::Schema(m) if m.contains("line 3")), "{err}");
    }
}
