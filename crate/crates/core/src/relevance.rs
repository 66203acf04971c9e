//! Relevant-input discovery: `p(x_i = 1 | x_{\i} = 0, y)` for every input.
//!
//! Conditioning the hidden-marginalized joint on all other inputs being off
//! leaves two configurations, `x = e_i` and `x = 0`, with unnormalized log
//! weights
//!
//! ```text
//! log N_i = b_i + Σ_j softplus(c_j + W1_ij + W2_jy)
//! log N_0 =       Σ_j softplus(c_j + W2_jy)
//! ```
//!
//! so the probability is `sigm(log N_i − log N_0)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus};
use crate::model::{Label, ModelParameters};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

pub fn input_relevance(params: &ModelParameters, y: Label) -> Result<Vec<f64>> {
    let dims = params.dims();
    if y.index() >= dims.classes {
        return Err(Error::InvalidLabel {
            index: y.index(),
            classes: dims.classes,
        });
    }
    let base: Vec<f64> = (0..dims.hidden)
        .map(|j| params.c()[j] + params.w2()[[j, y.index()]])
        .collect();
    let log_n0: f64 = base.iter().map(|&a| softplus(a)).sum();
    Ok((0..dims.inputs)
        .map(|i| {
            let log_ni = params.b()[i]
                + base
                    .iter()
                    .enumerate()
                    .map(|(j, &a)| softplus(a + params.w1()[[i, j]]))
                    .sum::<f64>();
            sigmoid(log_ni - log_n0)
        })
        .collect())
}

/// Zero-based indices whose probability is strictly above `threshold`, ascending.
pub fn relevant_inputs(relevance: &[f64], threshold: f64) -> Result<Vec<usize>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    if let Some(v) = relevance.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidParameter(format!(
            "relevance probabilities must lie in [0, 1], got {v}"
        )));
    }
    Ok(relevance
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > threshold)
        .map(|(i, _)| i)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelevanceRow {
    /// One-based class number.
    pub class: usize,
    /// One-based input number.
    pub input: usize,
    pub name: String,
    pub probability: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelevanceReport {
    pub threshold: f64,
    /// `probabilities[k][i]` for class `k` and input `i`, zero-based.
    pub probabilities: Vec<Vec<f64>>,
    /// Zero-based selected input indices per class.
    pub selected: Vec<Vec<usize>>,
    pub rows: Vec<RelevanceRow>,
}

impl RelevanceReport {
    pub fn rows_for(&self, class: Label) -> impl Iterator<Item = &RelevanceRow> {
        self.rows.iter().filter(move |r| r.class == class.number())
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["class", "input", "name", "probability", "selected"])
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.class.to_string(),
                r.input.to_string(),
                r.name.clone(),
                r.probability.to_string(),
                r.selected.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Relevance for every class (or just `only_class`), named and thresholded.
pub fn relevance_report(
    params: &ModelParameters,
    input_names: &[String],
    threshold: f64,
    only_class: Option<Label>,
) -> Result<RelevanceReport> {
    let dims = params.dims();
    if input_names.len() != dims.inputs {
        return Err(Error::DimensionMismatch {
            what: "input names",
            expected: dims.inputs,
            actual: input_names.len(),
        });
    }
    let classes: Vec<Label> = match only_class {
        Some(y) => {
            Label::new(y.index(), dims.classes)?;
            vec![y]
        }
        None => (0..dims.classes)
            .map(|k| Label::new(k, dims.classes))
            .collect::<Result<_>>()?,
    };
    let mut report = RelevanceReport {
        threshold,
        probabilities: Vec::new(),
        selected: Vec::new(),
        rows: Vec::new(),
    };
    for y in classes {
        let probs = input_relevance(params, y)?;
        let selected = relevant_inputs(&probs, threshold)?;
        for (i, (&p, name)) in probs.iter().zip(input_names).enumerate() {
            report.rows.push(RelevanceRow {
                class: y.number(),
                input: i + 1,
                name: name.clone(),
                probability: p,
                selected: p > threshold,
            });
        }
        report.probabilities.push(probs);
        report.selected.push(selected);
    }
    Ok(report)
}
