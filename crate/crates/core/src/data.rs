//! Categorical records, one-hot binarization, CSV ingestion, splitting and
//! synthetic data.
//!
//! Two CSV layouts are supported:
//!
//! * categorical: one column per schema feature holding a category name, plus a
//!   label column holding a class name from the schema's label declaration;
//! * binary: columns `x1..xD` holding `0`/`1` and a `label` column holding the
//!   one-based class number. Synthetic data is written in this layout.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BinaryInput, Label};

/// Schema bundled for the breast-cancer recurrence task: 15 features, 55 inputs.
pub const BREAST_CANCER_SCHEMA: &str = include_str!("../data/breast_cancer_schema.toml");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Feature {
    pub name: String,
    pub categories: Vec<String>,
    /// Human-readable category descriptions, one per category.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub descriptions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSpec {
    pub name: String,
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaFile {
    label: LabelSpec,
    #[serde(rename = "feature")]
    features: Vec<Feature>,
}

/// Ordered features, each with ordered categories, defining stable bit positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoricalSchema {
    features: Vec<Feature>,
    label: LabelSpec,
    offsets: Vec<usize>,
    width: usize,
}

impl CategoricalSchema {
    pub fn new(features: Vec<Feature>, label: LabelSpec) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Schema("schema declares no features".into()));
        }
        let mut names = HashSet::new();
        for f in &features {
            if !names.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature `{}`", f.name)));
            }
            if f.categories.is_empty() {
                return Err(Error::Schema(format!(
                    "feature `{}` has no categories",
                    f.name
                )));
            }
            check_unique(&f.categories, &format!("feature `{}`", f.name))?;
            if !f.descriptions.is_empty() && f.descriptions.len() != f.categories.len() {
                return Err(Error::Schema(format!(
                    "feature `{}` has {} categories but {} descriptions",
                    f.name,
                    f.categories.len(),
                    f.descriptions.len()
                )));
            }
        }
        if label.classes.len() < 2 {
            return Err(Error::Schema(format!(
                "label `{}` needs at least two classes",
                label.name
            )));
        }
        check_unique(&label.classes, &format!("label `{}`", label.name))?;
        let mut offsets = Vec::with_capacity(features.len());
        let mut width = 0;
        for f in &features {
            offsets.push(width);
            width += f.categories.len();
        }
        Ok(Self {
            features,
            label,
            offsets,
            width,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SchemaFile = toml::from_str(text)
            .map_err(|e| Error::Schema(e.to_string().trim_end().to_string()))?;
        Self::new(file.features, file.label)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&SchemaFile {
            label: self.label.clone(),
            features: self.features.clone(),
        })
        .expect("schema serializes")
    }

    pub fn breast_cancer() -> Self {
        Self::from_toml(BREAST_CANCER_SCHEMA).expect("bundled schema is valid")
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn label(&self) -> &LabelSpec {
        &self.label
    }

    /// Total number of binary inputs.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn classes(&self) -> usize {
        self.label.classes.len()
    }

    /// Bit offset of each feature's first category.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// A readable name per binary input, `feature: description`.
    pub fn input_names(&self) -> Vec<String> {
        self.features
            .iter()
            .flat_map(|f| {
                f.categories.iter().enumerate().map(move |(c, cat)| {
                    let desc = f.descriptions.get(c).unwrap_or(cat);
                    format!("{}: {}", f.name, desc)
                })
            })
            .collect()
    }

    /// One-hot concatenation of the chosen categories, in schema order.
    pub fn binarize<S: AsRef<str>>(&self, record: &[S]) -> Result<BinaryInput> {
        if record.len() != self.features.len() {
            let missing = self
                .features
                .get(record.len())
                .map(|f| format!("; first missing feature is `{}`", f.name))
                .unwrap_or_default();
            return Err(Error::Data(format!(
                "record has {} values but the schema has {} features{missing}",
                record.len(),
                self.features.len()
            )));
        }
        let mut bits = vec![0u8; self.width];
        for ((f, &offset), value) in self.features.iter().zip(&self.offsets).zip(record) {
            bits[offset + self.category_index(f, value.as_ref())?] = 1;
        }
        BinaryInput::new(bits)
    }

    fn category_index(&self, f: &Feature, value: &str) -> Result<usize> {
        let value = value.trim();
        if value.is_empty() {
            return Err(Error::Data(format!(
                "missing value for feature `{}`",
                f.name
            )));
        }
        f.categories.iter().position(|c| c == value).ok_or_else(|| {
            Error::Data(format!(
                "unknown category `{value}` for feature `{}`",
                f.name
            ))
        })
    }

    /// Inverse of [`binarize`](Self::binarize).
    pub fn decode(&self, x: &BinaryInput) -> Result<Vec<String>> {
        if x.len() != self.width {
            return Err(Error::DimensionMismatch {
                what: "binarized record",
                expected: self.width,
                actual: x.len(),
            });
        }
        self.features
            .iter()
            .zip(&self.offsets)
            .map(|(f, &offset)| {
                let slice = &x.bits()[offset..offset + f.categories.len()];
                match slice.iter().filter(|&&b| b == 1).count() {
                    1 => Ok(f.categories[slice.iter().position(|&b| b == 1).unwrap()].clone()),
                    n => Err(Error::Data(format!(
                        "feature `{}` has {n} active bits, expected exactly one",
                        f.name
                    ))),
                }
            })
            .collect()
    }

    pub fn label_of(&self, class: &str) -> Result<Label> {
        let class = class.trim();
        let idx = self
            .label
            .classes
            .iter()
            .position(|c| c == class)
            .ok_or_else(|| {
                Error::Data(format!(
                    "unknown class `{class}` for label `{}`",
                    self.label.name
                ))
            })?;
        Label::new(idx, self.classes())
    }
}

fn check_unique(items: &[String], owner: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for item in items {
        if !seen.insert(item.as_str()) {
            return Err(Error::Schema(format!("{owner} lists `{item}` twice")));
        }
    }
    Ok(())
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<CategoricalSchema> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Schema(format!("cannot read {}: {e}", path.display())))?;
    CategoricalSchema::from_toml(&text).map_err(|e| match e {
        Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Example {
    pub x: BinaryInput,
    pub y: Label,
}

/// Binary examples sharing one input width and class count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    examples: Vec<Example>,
    inputs: usize,
    classes: usize,
}

impl Dataset {
    pub fn new(examples: Vec<Example>, inputs: usize, classes: usize) -> Result<Self> {
        for (n, ex) in examples.iter().enumerate() {
            if ex.x.len() != inputs {
                return Err(Error::Data(format!(
                    "example {n} has {} inputs, expected {inputs}",
                    ex.x.len()
                )));
            }
            if ex.y.index() >= classes {
                return Err(Error::InvalidLabel {
                    index: ex.y.index(),
                    classes,
                });
            }
        }
        Ok(Self {
            examples,
            inputs,
            classes,
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> Vec<Label> {
        self.examples.iter().map(|e| e.y).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for e in &self.examples {
            counts[e.y.index()] += 1;
        }
        counts
    }

    fn subset(&self, idx: &[usize]) -> Self {
        Self {
            examples: idx.iter().map(|&i| self.examples[i].clone()).collect(),
            inputs: self.inputs,
            classes: self.classes,
        }
    }
}

const MAX_REPORTED_ROW_ERRORS: usize = 20;

fn aggregate(errors: Vec<String>) -> Error {
    let total = errors.len();
    let mut msg = errors
        .into_iter()
        .take(MAX_REPORTED_ROW_ERRORS)
        .collect::<Vec<_>>()
        .join("; ");
    if total > MAX_REPORTED_ROW_ERRORS {
        msg.push_str(&format!("; and {} more", total - MAX_REPORTED_ROW_ERRORS));
    }
    Error::Data(msg)
}

fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))
}

fn header_index(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Data(format!("{}: no column named `{name}`", path.display())))
}

/// Reads a categorical CSV. `label_column` defaults to the schema's label name.
/// Row numbers in errors count the header as row 1.
pub fn load_csv(
    path: impl AsRef<Path>,
    schema: &CategoricalSchema,
    label_column: Option<&str>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .clone();
    let label_col = header_index(&headers, label_column.unwrap_or(&schema.label().name), path)?;
    let cols = schema
        .features()
        .iter()
        .map(|f| header_index(&headers, &f.name, path))
        .collect::<Result<Vec<_>>>()?;

    let mut examples = Vec::new();
    let mut errors = Vec::new();
    for (n, row) in reader.records().enumerate() {
        let row_no = n + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                errors.push(format!("row {row_no}: {e}"));
                continue;
            }
        };
        let values: Vec<&str> = cols.iter().map(|&c| row.get(c).unwrap_or("")).collect();
        let parsed = schema.binarize(&values).and_then(|x| {
            let y = schema.label_of(row.get(label_col).unwrap_or(""))?;
            Ok(Example { x, y })
        });
        match parsed {
            Ok(ex) => examples.push(ex),
            Err(e) => errors.push(format!("row {row_no}: {}", strip_kind(&e))),
        }
    }
    if !errors.is_empty() {
        return Err(aggregate(errors));
    }
    if examples.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    Dataset::new(examples, schema.width(), schema.classes())
}

fn strip_kind(e: &Error) -> String {
    match e {
        Error::Data(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Writes a dataset back in the categorical layout accepted by [`load_csv`].
pub fn export_csv(
    path: impl AsRef<Path>,
    dataset: &Dataset,
    schema: &CategoricalSchema,
) -> Result<()> {
    fs::write(path, export_csv_string(dataset, schema)?)?;
    Ok(())
}

pub fn export_csv_string(dataset: &Dataset, schema: &CategoricalSchema) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = schema.features().iter().map(|f| f.name.as_str()).collect();
    header.push(&schema.label().name);
    w.write_record(&header).map_err(csv_err)?;
    for ex in dataset.examples() {
        let mut row = schema.decode(&ex.x)?;
        row.push(schema.label().classes[ex.y.index()].clone());
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(e.to_string())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub const BINARY_LABEL_COLUMN: &str = "label";

/// Reads the binary layout. The class count is `classes` if given, else the largest label seen.
pub fn load_binary_csv(path: impl AsRef<Path>, classes: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .clone();
    let label_col = header_index(&headers, BINARY_LABEL_COLUMN, path)?;
    let input_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != label_col).collect();
    if input_cols.is_empty() {
        return Err(Error::Data(format!("{}: no input columns", path.display())));
    }

    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (n, row) in reader.records().enumerate() {
        let row_no = n + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                errors.push(format!("row {row_no}: {e}"));
                continue;
            }
        };
        let bits: std::result::Result<Vec<u8>, String> = input_cols
            .iter()
            .map(|&c| match row.get(c) {
                Some("0") => Ok(0),
                Some("1") => Ok(1),
                other => Err(format!(
                    "row {row_no}: column `{}` must be 0 or 1, got `{}`",
                    &headers[c],
                    other.unwrap_or("")
                )),
            })
            .collect();
        let label = row.get(label_col).unwrap_or("").parse::<usize>();
        match (bits, label) {
            (Ok(bits), Ok(y)) if y >= 1 => rows.push((bits, y)),
            (Err(e), _) => errors.push(e),
            (_, _) => errors.push(format!(
                "row {row_no}: label must be a class number >= 1, got `{}`",
                row.get(label_col).unwrap_or("")
            )),
        }
    }
    if !errors.is_empty() {
        return Err(aggregate(errors));
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    let seen = rows.iter().map(|r| r.1).max().unwrap_or(1).max(2);
    let classes = match classes {
        Some(k) if k < seen => {
            return Err(Error::Data(format!(
                "{}: label {seen} exceeds declared class count {k}",
                path.display()
            )))
        }
        Some(k) => k,
        None => seen,
    };
    let examples = rows
        .into_iter()
        .map(|(bits, y)| {
            Ok(Example {
                x: BinaryInput::new(bits)?,
                y: Label::from_number(y, classes)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(examples, input_cols.len(), classes)
}

pub fn export_binary_csv(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    fs::write(path, export_binary_csv_string(dataset)?)?;
    Ok(())
}

pub fn export_binary_csv_string(dataset: &Dataset) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=dataset.inputs()).map(|i| format!("x{i}")).collect();
    header.push(BINARY_LABEL_COLUMN.into());
    w.write_record(&header).map_err(csv_err)?;
    for ex in dataset.examples() {
        let mut row: Vec<String> = ex.x.bits().iter().map(|b| b.to_string()).collect();
        row.push(ex.y.number().to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

/// Loads either layout: categorical when a schema is given, binary otherwise.
pub fn load_dataset(
    path: impl AsRef<Path>,
    schema: Option<&CategoricalSchema>,
    label_column: Option<&str>,
) -> Result<Dataset> {
    match schema {
        Some(s) => load_csv(path, s, label_column),
        None => load_binary_csv(path, None),
    }
}

/// Seeded shuffle, then the first `⌈fraction · n⌉` examples go to the training side.
pub fn split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n = dataset.len();
    // guard against 0.7 * 10 = 7.000000000000001
    let n_train = ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::Data(format!(
            "split of {n} examples at fraction {fraction} leaves one side empty"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((
        dataset.subset(&idx[..n_train]),
        dataset.subset(&idx[n_train..]),
    ))
}

/// Settings for [`synth_generate`], as stored in a synth spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub inputs: usize,
    pub classes: usize,
    pub examples: usize,
    /// In `[0, 0.5]`: each input is on with probability `0.5 ± signal_strength`.
    pub signal_strength: f64,
    pub seed: u64,
}

/// What [`synth_generate`] drew from; also defines the Bayes-optimal rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub inputs: usize,
    pub classes: usize,
    pub signal_strength: f64,
    pub priors: Vec<f64>,
    /// `templates[k][i]`: probability that input `i` is on under class `k`.
    pub templates: Vec<Vec<f64>>,
    pub class_counts: Vec<usize>,
}

impl GenerationRecord {
    /// Bayes-optimal prediction under the generating distribution (ties to the lowest class).
    pub fn bayes_predict(&self, x: &BinaryInput) -> Label {
        let scores: Vec<f64> = self
            .templates
            .iter()
            .zip(&self.priors)
            .map(|(t, &prior)| {
                let mut s = prior.ln();
                for (&p, &b) in t.iter().zip(x.bits()) {
                    s += if b == 1 { p.ln() } else { (1.0 - p).ln() };
                }
                s
            })
            .collect();
        let mut best = 0;
        for k in 1..scores.len() {
            if scores[k] > scores[best] {
                best = k;
            }
        }
        Label::new(best, self.classes).expect("class in range")
    }

    pub fn bayes_accuracy(&self, dataset: &Dataset) -> f64 {
        let hits = dataset
            .examples()
            .iter()
            .filter(|e| self.bayes_predict(&e.x) == e.y)
            .count();
        hits as f64 / dataset.len() as f64
    }

    pub fn max_class_frequency(&self) -> f64 {
        let total: usize = self.class_counts.iter().sum();
        *self.class_counts.iter().max().unwrap_or(&0) as f64 / total as f64
    }
}

/// Class-conditional Bernoulli data around distinct random binary templates.
/// Labels are uniform over the classes.
pub fn synth_generate<R: Rng + ?Sized>(
    inputs: usize,
    classes: usize,
    n: usize,
    signal_strength: f64,
    rng: &mut R,
) -> Result<(Dataset, GenerationRecord)> {
    if inputs < 2 || classes < 2 || n < 1 {
        return Err(Error::InvalidParameter(format!(
            "synthetic data needs inputs >= 2, classes >= 2, n >= 1; got {inputs}, {classes}, {n}"
        )));
    }
    if !(0.0..=0.5).contains(&signal_strength) {
        return Err(Error::InvalidParameter(format!(
            "signal_strength must lie in [0, 0.5], got {signal_strength}"
        )));
    }
    if inputs < 64 && classes as u64 > 1u64 << inputs {
        return Err(Error::InvalidParameter(format!(
            "cannot draw {classes} distinct templates over {inputs} inputs"
        )));
    }
    let mut patterns: Vec<Vec<bool>> = Vec::with_capacity(classes);
    while patterns.len() < classes {
        let t: Vec<bool> = (0..inputs).map(|_| rng.random()).collect();
        if !patterns.contains(&t) {
            patterns.push(t);
        }
    }
    let templates: Vec<Vec<f64>> = patterns
        .iter()
        .map(|t| {
            t.iter()
                .map(|&on| {
                    if on {
                        0.5 + signal_strength
                    } else {
                        0.5 - signal_strength
                    }
                })
                .collect()
        })
        .collect();
    let mut examples = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.random_range(0..classes);
        let bits: Vec<u8> = templates[k]
            .iter()
            .map(|&p| (rng.random::<f64>() < p) as u8)
            .collect();
        examples.push(Example {
            x: BinaryInput::new(bits)?,
            y: Label::new(k, classes)?,
        });
    }
    let dataset = Dataset::new(examples, inputs, classes)?;
    let record = GenerationRecord {
        inputs,
        classes,
        signal_strength,
        priors: vec![1.0 / classes as f64; classes],
        templates,
        class_counts: dataset.class_counts(),
    };
    Ok((dataset, record))
}

pub fn synth_from_spec(spec: &SynthSpec) -> Result<(Dataset, GenerationRecord)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    synth_generate(
        spec.inputs,
        spec.classes,
        spec.examples,
        spec.signal_strength,
        &mut rng,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn schema_3() -> CategoricalSchema {
        CategoricalSchema::new(
            vec![Feature {
                name: "colour".into(),
                categories: vec!["red".into(), "green".into(), "blue".into()],
                descriptions: vec![],
            }],
            LabelSpec {
                name: "y".into(),
                classes: vec!["a".into(), "b".into()],
            },
        )
        .unwrap()
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn bundled_schema_shape() {
        let s = CategoricalSchema::breast_cancer();
        assert_eq!(s.width(), 55);
        assert_eq!(s.features().len(), 15);
        assert_eq!(s.classes(), 2);
        assert_eq!(s.input_names().len(), 55);
    }

    #[test]
    fn single_feature_width() {
        assert_eq!(schema_3().width(), 3);
    }

    #[test]
    fn duplicate_category_rejected() {
        let text = "[label]\nname = \"y\"\nclasses = [\"a\", \"b\"]\n\n[[feature]]\nname = \"f\"\ncategories = [\"x\", \"x\"]\n";
        let err = CategoricalSchema::from_toml(text).unwrap_err();
        assert!(err.to_string().contains("twice"), "{err}");
    }

    #[test]
    fn schema_parse_error_has_line() {
        let err =
            CategoricalSchema::from_toml("[label]\nname = \"y\"\nclasses = [\"a\"\n").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn binarize_and_decode() {
        let s = schema_3();
        let x = s.binarize(&["green"]).unwrap();
        assert_eq!(x.bits(), &[0, 1, 0]);
        assert_eq!(s.decode(&x).unwrap(), vec!["green".to_string()]);
        assert!(s
            .binarize(&["purple"])
            .unwrap_err()
            .to_string()
            .contains("colour"));
        assert!(s
            .binarize::<&str>(&[])
            .unwrap_err()
            .to_string()
            .contains("colour"));
        assert!(s
            .binarize(&[""])
            .unwrap_err()
            .to_string()
            .contains("missing"));
    }

    #[test]
    fn load_three_rows() {
        let f = write_tmp("colour,y\nred,a\nblue,b\ngreen,a\n");
        let ds = load_csv(f.path(), &schema_3(), None).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(
            ds.labels().iter().map(|l| l.number()).collect::<Vec<_>>(),
            vec![1, 2, 1]
        );
    }

    #[test]
    fn bad_rows_are_reported_together() {
        let f = write_tmp("colour,y\nred,a\npurple,b\ngreen,c\n");
        let msg = load_csv(f.path(), &schema_3(), None)
            .unwrap_err()
            .to_string();
        assert!(msg.contains("row 3") && msg.contains("colour"), "{msg}");
        assert!(msg.contains("row 4") && msg.contains("`c`"), "{msg}");
    }

    #[test]
    fn empty_and_headerless_files() {
        let f = write_tmp("colour,y\n");
        assert!(load_csv(f.path(), &schema_3(), None).is_err());
        let f = write_tmp("shade,y\nred,a\n");
        assert!(load_csv(f.path(), &schema_3(), None)
            .unwrap_err()
            .to_string()
            .contains("colour"));
    }

    #[test]
    fn categorical_export_round_trip() {
        let f = write_tmp("colour,y\nred,a\nblue,b\ngreen,a\n");
        let ds = load_csv(f.path(), &schema_3(), None).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        export_csv(out.path(), &ds, &schema_3()).unwrap();
        assert_eq!(load_csv(out.path(), &schema_3(), None).unwrap(), ds);
        assert_eq!(
            fs::read_to_string(out.path()).unwrap(),
            "colour,y\nred,a\nblue,b\ngreen,a\n"
        );
    }

    #[test]
    fn binary_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (ds, _) = synth_generate(6, 3, 40, 0.3, &mut rng).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        export_binary_csv(out.path(), &ds).unwrap();
        assert_eq!(load_binary_csv(out.path(), Some(3)).unwrap(), ds);
    }

    #[test]
    fn binary_rejects_bad_cells() {
        let f = write_tmp("x1,x2,label\n0,1,1\n0,2,2\n1,1,0\n");
        let msg = load_binary_csv(f.path(), None).unwrap_err().to_string();
        assert!(msg.contains("row 3") && msg.contains("row 4"), "{msg}");
    }

    #[test]
    fn split_sizes_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (ds, _) = synth_generate(4, 2, 10, 0.2, &mut rng).unwrap();
        let (tr, te) = split(&ds, 0.7, 5).unwrap();
        assert_eq!((tr.len(), te.len()), (7, 3));
        let (tr2, te2) = split(&ds, 0.7, 5).unwrap();
        assert_eq!((&tr, &te), (&tr2, &te2));
        let mut all: Vec<Example> = tr.examples().iter().chain(te.examples()).cloned().collect();
        let mut orig = ds.examples().to_vec();
        let key = |e: &Example| (e.x.bits().to_vec(), e.y.index());
        all.sort_by_key(key);
        orig.sort_by_key(key);
        assert_eq!(all, orig);
        assert!(split(&ds, 1.0, 0).is_err());
        assert!(split(&ds, 0.99, 0).is_err());
        assert_eq!(split(&ds, 0.01, 0).unwrap().0.len(), 1);
    }

    #[test]
    fn synth_maximal_signal_is_perfectly_separable() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (ds, rec) = synth_generate(8, 3, 300, 0.5, &mut rng).unwrap();
        assert_eq!(rec.bayes_accuracy(&ds), 1.0);
    }

    #[test]
    fn synth_zero_signal_bayes_is_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (ds, rec) = synth_generate(8, 2, 20000, 0.0, &mut rng).unwrap();
        // every template is 0.5 everywhere, so the Bayes rule always picks class 1
        let acc = rec.bayes_accuracy(&ds);
        assert!((acc - 0.5).abs() < 0.015, "{acc}");
        assert!(rec.templates.iter().flatten().all(|&p| p == 0.5));
    }

    #[test]
    fn synth_rejects_bad_args() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(synth_generate(1, 2, 5, 0.1, &mut rng).is_err());
        assert!(synth_generate(4, 2, 5, 0.6, &mut rng).is_err());
        assert!(synth_generate(2, 5, 5, 0.1, &mut rng).is_err());
    }
}
