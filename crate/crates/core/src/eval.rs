//! Accuracy evaluation and the repeated-run experiment grid.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split, Dataset};
use crate::dropping::DroppingScheme;
use crate::error::{Error, Result};
use crate::io::write_json;
use crate::model::{predict, Label, ModelParameters};
use crate::training::{final_prediction_params, train, TrainingConfig};

pub fn classification_accuracy(predictions: &[Label], truths: &[Label]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            what: "prediction list",
            expected: truths.len(),
            actual: predictions.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hits = predictions
        .iter()
        .zip(truths)
        .filter(|(p, t)| p == t)
        .count();
    Ok(hits as f64 / truths.len() as f64)
}

/// Accuracy of always predicting the most frequent training label (ties to the lowest).
pub fn majority_baseline(train: &Dataset, test: &Dataset) -> Result<f64> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let counts = train.class_counts();
    let mut best = 0;
    for k in 1..counts.len() {
        if counts[k] > counts[best] {
            best = k;
        }
    }
    let majority = Label::new(best, train.classes())?;
    let preds = vec![majority; test.len()];
    classification_accuracy(&preds, &test.labels())
}

/// Test accuracy of `params` under the prediction rule for `scheme`.
pub fn evaluate(params: &ModelParameters, scheme: &DroppingScheme, test: &Dataset) -> Result<f64> {
    let predictor = final_prediction_params(params, scheme);
    let preds = test
        .examples()
        .iter()
        .map(|e| predict(&predictor, &e.x))
        .collect::<Result<Vec<_>>>()?;
    classification_accuracy(&preds, &test.labels())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub name: String,
    pub accuracy: f64,
}

/// Hidden-unit counts × learning rates × schemes, each repeated `repeats` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentGrid {
    pub hidden_units: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub schemes: Vec<DroppingScheme>,
    pub repeats: usize,
    pub base_seed: u64,
    pub train_fraction: f64,
    /// Shared training settings; its hidden units, learning rate, scheme and seed are overridden per run.
    pub base: TrainingConfig,
    /// Externally obtained accuracies to carry along in the report.
    pub comparisons: Vec<Comparison>,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            hidden_units: vec![5, 10, 15, 20],
            learning_rates: vec![0.01, 0.1],
            schemes: vec![
                DroppingScheme::None,
                DroppingScheme::DropOut { p: 0.5 },
                DroppingScheme::DropConnect { p: 0.5 },
                DroppingScheme::DropPart { a: 0.1, b: 0.1 },
                DroppingScheme::DropPart { a: 0.5, b: 0.5 },
                DroppingScheme::DropPart { a: 1.0, b: 1.0 },
            ],
            repeats: 10,
            base_seed: 0,
            train_fraction: 0.7,
            base: TrainingConfig::default(),
            comparisons: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub scheme: DroppingScheme,
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_units.is_empty() || self.learning_rates.is_empty() || self.schemes.is_empty()
        {
            return Err(Error::InvalidParameter(
                "every grid axis needs at least one value".into(),
            ));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidParameter("repeats must be at least 1".into()));
        }
        for cell in self.cells() {
            self.config_for(&cell, 0).validate()?;
        }
        Ok(())
    }

    /// Cells ordered by learning rate, then hidden units, then scheme.
    pub fn cells(&self) -> Vec<GridCell> {
        let mut out = Vec::new();
        for &learning_rate in &self.learning_rates {
            for &hidden_units in &self.hidden_units {
                for scheme in &self.schemes {
                    out.push(GridCell {
                        hidden_units,
                        learning_rate,
                        scheme: scheme.clone(),
                    });
                }
            }
        }
        out
    }

    pub fn config_for(&self, cell: &GridCell, seed: u64) -> TrainingConfig {
        TrainingConfig {
            hidden_units: cell.hidden_units,
            learning_rate: cell.learning_rate,
            scheme: cell.scheme.clone(),
            seed,
            ..self.base.clone()
        }
    }

    pub fn run_seed(&self, cell: usize, repeat: usize) -> u64 {
        derive_seed(self.base_seed, cell as u64, repeat as u64)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, cell: u64, repeat: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ cell) ^ repeat)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub repeat: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub scheme: DroppingScheme,
    pub scheme_label: String,
    pub seeds: Vec<u64>,
    /// Accuracies of the runs that completed, in repeat order.
    pub accuracies: Vec<f64>,
    /// Absent when any run failed.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub failures: Vec<RunFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBody {
    pub format_version: u32,
    pub std_convention: String,
    pub base_seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub majority_baseline: f64,
    pub comparisons: Vec<Comparison>,
    pub cells: Vec<CellResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub scheme_label: String,
    pub seconds: Vec<f64>,
}

/// Deterministic results in `body`; wall-clock timings kept apart in `timing`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub body: ReportBody,
    pub timing: Vec<CellTiming>,
}

/// Sample mean and standard deviation (n − 1 denominator; 0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

struct RunOutcome {
    result: std::result::Result<f64, String>,
    seconds: f64,
}

fn run_once(train_set: &Dataset, test: &Dataset, config: &TrainingConfig) -> RunOutcome {
    let start = Instant::now();
    let result = train(train_set, config)
        .and_then(|(params, _)| evaluate(&params, &config.scheme, test))
        .map_err(|e| e.to_string());
    RunOutcome {
        result,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn aggregate_cell(
    cell: &GridCell,
    seeds: Vec<u64>,
    outcomes: Vec<RunOutcome>,
) -> (CellResult, CellTiming) {
    let mut accuracies = Vec::new();
    let mut failures = Vec::new();
    let mut seconds = Vec::new();
    for (repeat, o) in outcomes.into_iter().enumerate() {
        seconds.push(o.seconds);
        match o.result {
            Ok(a) => accuracies.push(a),
            Err(error) => failures.push(RunFailure { repeat, error }),
        }
    }
    let (mean, std) = if failures.is_empty() {
        let (m, s) = mean_std(&accuracies);
        (Some(m), Some(s))
    } else {
        (None, None)
    };
    let label = cell.scheme.label();
    (
        CellResult {
            hidden_units: cell.hidden_units,
            learning_rate: cell.learning_rate,
            scheme: cell.scheme.clone(),
            scheme_label: label.clone(),
            seeds,
            accuracies,
            mean,
            std,
            failures,
        },
        CellTiming {
            hidden_units: cell.hidden_units,
            learning_rate: cell.learning_rate,
            scheme_label: label,
            seconds,
        },
    )
}

/// Trains and evaluates one cell once per seed.
pub fn run_cell(
    grid: &ExperimentGrid,
    cell: &GridCell,
    train_set: &Dataset,
    test: &Dataset,
    seeds: &[u64],
) -> (CellResult, CellTiming) {
    let outcomes = seeds
        .par_iter()
        .map(|&s| run_once(train_set, test, &grid.config_for(cell, s)))
        .collect();
    aggregate_cell(cell, seeds.to_vec(), outcomes)
}

/// Splits once, then runs every cell and repeat (in parallel) with seeds derived
/// from `(base_seed, cell, repeat)`. Failed runs are recorded, not fatal.
pub fn run_experiment(dataset: &Dataset, grid: &ExperimentGrid) -> Result<ExperimentReport> {
    grid.validate()?;
    let (train_set, test) = split(dataset, grid.train_fraction, grid.base_seed)?;
    let cells = grid.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..grid.repeats).map(move |r| (c, r)))
        .collect();
    let mut outcomes: Vec<RunOutcome> = jobs
        .par_iter()
        .map(|&(c, r)| {
            run_once(
                &train_set,
                &test,
                &grid.config_for(&cells[c], grid.run_seed(c, r)),
            )
        })
        .collect();

    let mut results = Vec::with_capacity(cells.len());
    let mut timing = Vec::with_capacity(cells.len());
    for (c, cell) in cells.iter().enumerate().rev() {
        let cell_outcomes = outcomes.split_off(c * grid.repeats);
        let seeds = (0..grid.repeats).map(|r| grid.run_seed(c, r)).collect();
        let (res, t) = aggregate_cell(cell, seeds, cell_outcomes);
        results.push(res);
        timing.push(t);
    }
    results.reverse();
    timing.reverse();

    Ok(ExperimentReport {
        body: ReportBody {
            format_version: 1,
            std_convention: "sample standard deviation (n - 1); 0 for a single run".into(),
            base_seed: grid.base_seed,
            train_size: train_set.len(),
            test_size: test.len(),
            majority_baseline: majority_baseline(&train_set, &test)?,
            comparisons: grid.comparisons.clone(),
            cells: results,
        },
        timing,
    })
}

impl ExperimentReport {
    pub fn body_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.body).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per cell: learning_rate, hidden_units, scheme, mean, std, runs, failures.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("learning_rate,hidden_units,scheme,mean,std,runs,failures\n");
        for c in &self.body.cells {
            let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},\"{}\",{},{},{},{}",
                c.learning_rate,
                c.hidden_units,
                c.scheme_label,
                fmt(c.mean),
                fmt(c.std),
                c.accuracies.len(),
                c.failures.len()
            );
        }
        out
    }

    /// Human-readable tables: one per learning rate, hidden units down, schemes across.
    pub fn format_tables(&self) -> String {
        let mut out = String::new();
        let mut rates: Vec<f64> = Vec::new();
        let mut schemes: Vec<String> = Vec::new();
        let mut hidden: Vec<usize> = Vec::new();
        for c in &self.body.cells {
            if !rates.contains(&c.learning_rate) {
                rates.push(c.learning_rate);
            }
            if !schemes.contains(&c.scheme_label) {
                schemes.push(c.scheme_label.clone());
            }
            if !hidden.contains(&c.hidden_units) {
                hidden.push(c.hidden_units);
            }
        }
        for lr in rates {
            let _ = writeln!(out, "learning rate {lr}");
            let _ = write!(out, "{:>8}", "hidden");
            for s in &schemes {
                let _ = write!(out, " {s:>20}");
            }
            out.push('\n');
            for &m in &hidden {
                let _ = write!(out, "{m:>8}");
                for s in &schemes {
                    let cell = self.body.cells.iter().find(|c| {
                        c.learning_rate == lr && c.hidden_units == m && &c.scheme_label == s
                    });
                    let text = match cell.and_then(|c| c.mean.zip(c.std)) {
                        Some((mean, std)) => format!("{mean:.3} ± {std:.3}"),
                        None => "failed".into(),
                    };
                    let _ = write!(out, " {text:>20}");
                }
                out.push('\n');
            }
            out.push('\n');
        }
        let _ = writeln!(out, "majority baseline {:.3}", self.body.majority_baseline);
        for c in &self.body.comparisons {
            let _ = writeln!(out, "{} {:.3}", c.name, c.accuracy);
        }
        out
    }

    /// Writes `<out>` (body JSON), `<out>.csv` and `<out>.meta.json` (timings); returns the paths.
    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let csv_path = with_suffix(out, "csv");
        let meta_path = with_suffix(out, "meta.json");
        std::fs::write(out, self.body_json())?;
        std::fs::write(&csv_path, self.to_csv())?;
        write_json(&meta_path, &self.timing)?;
        Ok(vec![out.to_path_buf(), csv_path, meta_path])
    }
}

pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}
