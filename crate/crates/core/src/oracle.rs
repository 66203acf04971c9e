//! Brute-force reference computations for small models.
//!
//! Everything here enumerates configurations explicitly and shares no numeric
//! code with [`crate::model`] or [`crate::relevance`], so the two can be checked
//! against each other. Hidden units are summed analytically where noted; the
//! `*_full` / `*_by_enumeration` variants enumerate them too.
//!
//! Size limits are hard errors: the oracle never falls back to an approximation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Example;
use crate::error::{Error, Result};
use crate::io::ParamFile;
use crate::model::{BinaryInput, Dims, GradientRecord, Label, ModelParameters};

pub const MAX_INPUTS: usize = 16;
pub const MAX_CLASSES: usize = 10;
/// Limit on `inputs + hidden` for routines that enumerate hidden units as well.
pub const MAX_FULL_UNITS: usize = 20;

fn guard(dims: Dims) -> Result<()> {
    if dims.inputs > MAX_INPUTS || dims.classes > MAX_CLASSES {
        return Err(Error::EnumerationTooLarge {
            inputs: dims.inputs,
            classes: dims.classes,
        });
    }
    Ok(())
}

fn guard_full(dims: Dims) -> Result<()> {
    guard(dims)?;
    if dims.inputs + dims.hidden > MAX_FULL_UNITS {
        return Err(Error::EnumerationTooLarge {
            inputs: dims.inputs + dims.hidden,
            classes: dims.classes,
        });
    }
    Ok(())
}

fn lse(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln(1 + e^t)` via log-sum-exp of `{0, t}`.
fn log1pexp(t: f64) -> f64 {
    let m = t.max(0.0);
    m + ((-m).exp() + (t - m).exp()).ln()
}

fn logistic(t: f64) -> f64 {
    (t - log1pexp(t)).exp()
}

/// All binary vectors of length `n`, in counting order.
pub fn all_binary(n: usize) -> impl Iterator<Item = Vec<u8>> {
    (0u64..1 << n).map(move |code| (0..n).map(|i| ((code >> i) & 1) as u8).collect())
}

fn hidden_input(params: &ModelParameters, x: &[u8], y: usize, j: usize) -> f64 {
    let mut a = params.c()[j] + params.w2()[[j, y]];
    for (i, &xi) in x.iter().enumerate() {
        if xi == 1 {
            a += params.w1()[[i, j]];
        }
    }
    a
}

/// `bᵀx + d_y + Σ_j ln(1 + e^{c_j + W2_{jy} + (W1_{·j})ᵀx})`, i.e. `ln Σ_h e^{−E}`.
fn log_marginal_unnormalized(params: &ModelParameters, x: &[u8], y: usize) -> f64 {
    let mut v = params.d()[y];
    for (i, &xi) in x.iter().enumerate() {
        if xi == 1 {
            v += params.b()[i];
        }
    }
    for j in 0..params.c().len() {
        v += log1pexp(hidden_input(params, x, y, j));
    }
    v
}

/// `−E(x, y, h)` written out term by term.
fn neg_energy(params: &ModelParameters, x: &[u8], y: usize, h: &[u8]) -> f64 {
    let mut v = params.d()[y];
    for (i, &xi) in x.iter().enumerate() {
        v += params.b()[i] * xi as f64;
    }
    for (j, &hj) in h.iter().enumerate() {
        let hj = hj as f64;
        v += params.c()[j] * hj + params.w2()[[j, y]] * hj;
        for (i, &xi) in x.iter().enumerate() {
            v += xi as f64 * params.w1()[[i, j]] * hj;
        }
    }
    v
}

/// `ln Z` with hidden units summed analytically and `(x, y)` enumerated.
pub fn log_partition_function(params: &ModelParameters) -> Result<f64> {
    let dims = params.dims();
    guard(dims)?;
    let per_x: Vec<f64> = all_binary(dims.inputs)
        .map(|x| lse((0..dims.classes).map(|y| log_marginal_unnormalized(params, &x, y))))
        .collect();
    Ok(lse(per_x))
}

/// `ln Z` by enumerating every `(x, y, h)`.
pub fn log_partition_function_full(params: &ModelParameters) -> Result<f64> {
    let dims = params.dims();
    guard_full(dims)?;
    let hs: Vec<Vec<u8>> = all_binary(dims.hidden).collect();
    let mut terms = Vec::with_capacity((1 << (dims.inputs + dims.hidden)) * dims.classes);
    for x in all_binary(dims.inputs) {
        for y in 0..dims.classes {
            for h in &hs {
                terms.push(neg_energy(params, &x, y, h));
            }
        }
    }
    Ok(lse(terms))
}

fn check_example(dims: Dims, x: &BinaryInput, y: Label) -> Result<()> {
    if x.len() != dims.inputs {
        return Err(Error::DimensionMismatch {
            what: "input x",
            expected: dims.inputs,
            actual: x.len(),
        });
    }
    if y.index() >= dims.classes {
        return Err(Error::InvalidLabel {
            index: y.index(),
            classes: dims.classes,
        });
    }
    Ok(())
}

/// `p(x, y)` with hidden units marginalized.
pub fn exact_joint(params: &ModelParameters, x: &BinaryInput, y: Label) -> Result<f64> {
    check_example(params.dims(), x, y)?;
    let log_z = log_partition_function(params)?;
    Ok((log_marginal_unnormalized(params, x.bits(), y.index()) - log_z).exp())
}

/// Every `(x, y)` with its joint probability, in enumeration order.
pub fn joint_table(params: &ModelParameters) -> Result<Vec<(Vec<u8>, usize, f64)>> {
    let dims = params.dims();
    let log_z = log_partition_function(params)?;
    let mut table = Vec::with_capacity((1 << dims.inputs) * dims.classes);
    for x in all_binary(dims.inputs) {
        for y in 0..dims.classes {
            let p = (log_marginal_unnormalized(params, &x, y) - log_z).exp();
            table.push((x.clone(), y, p));
        }
    }
    Ok(table)
}

/// `p(y | x)` from explicit enumeration over `(y, h)` of `e^{−E}`.
pub fn label_conditional_by_enumeration(
    params: &ModelParameters,
    x: &BinaryInput,
) -> Result<Vec<f64>> {
    let dims = params.dims();
    guard_full(dims)?;
    check_example(dims, x, Label::new(0, dims.classes)?)?;
    let hs: Vec<Vec<u8>> = all_binary(dims.hidden).collect();
    let per_y: Vec<f64> = (0..dims.classes)
        .map(|y| lse(hs.iter().map(|h| neg_energy(params, x.bits(), y, h))))
        .collect();
    let norm = lse(per_y.iter().copied());
    Ok(per_y.iter().map(|v| (v - norm).exp()).collect())
}

/// `p(h_j = 1 | x, y)` for each `j` by enumerating all hidden configurations.
pub fn hidden_conditional_by_enumeration(
    params: &ModelParameters,
    x: &BinaryInput,
    y: Label,
) -> Result<Vec<f64>> {
    let dims = params.dims();
    guard_full(dims)?;
    check_example(dims, x, y)?;
    let hs: Vec<Vec<u8>> = all_binary(dims.hidden).collect();
    let logs: Vec<f64> = hs
        .iter()
        .map(|h| neg_energy(params, x.bits(), y.index(), h))
        .collect();
    let norm = lse(logs.iter().copied());
    Ok((0..dims.hidden)
        .map(|j| {
            hs.iter()
                .zip(&logs)
                .filter(|(h, _)| h[j] == 1)
                .map(|(_, l)| (l - norm).exp())
                .sum()
        })
        .collect())
}

/// `p(x_i = 1 | h)` and `p(y | h)` by enumerating all `(x, y)` with `h` fixed.
pub fn given_hidden_by_enumeration(
    params: &ModelParameters,
    h: &[u8],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let dims = params.dims();
    guard(dims)?;
    if h.len() != dims.hidden {
        return Err(Error::DimensionMismatch {
            what: "hidden bits h",
            expected: dims.hidden,
            actual: h.len(),
        });
    }
    let mut states = Vec::new();
    for x in all_binary(dims.inputs) {
        for y in 0..dims.classes {
            let l = neg_energy(params, &x, y, h);
            states.push((x.clone(), y, l));
        }
    }
    let norm = lse(states.iter().map(|s| s.2));
    let mut px = vec![0.0; dims.inputs];
    let mut py = vec![0.0; dims.classes];
    for (x, y, l) in &states {
        let p = (l - norm).exp();
        py[*y] += p;
        for (i, &xi) in x.iter().enumerate() {
            if xi == 1 {
                px[i] += p;
            }
        }
    }
    Ok((px, py))
}

/// Mean `ln p(x, y)` over the examples.
pub fn exact_log_likelihood(params: &ModelParameters, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let log_z = log_partition_function(params)?;
    let mut total = 0.0;
    for ex in examples {
        check_example(params.dims(), &ex.x, ex.y)?;
        total += log_marginal_unnormalized(params, ex.x.bits(), ex.y.index()) - log_z;
    }
    Ok(total / examples.len() as f64)
}

/// Sufficient statistics `∂(−E)/∂θ` with hidden units replaced by their conditional means.
fn accumulate_stats(
    params: &ModelParameters,
    x: &[u8],
    y: usize,
    weight: f64,
    acc: &mut GradientRecord,
) {
    let hidden = params.c().len();
    acc.d[y] += weight;
    for (i, &xi) in x.iter().enumerate() {
        if xi == 1 {
            acc.b[i] += weight;
        }
    }
    for j in 0..hidden {
        let q = weight * logistic(hidden_input(params, x, y, j));
        acc.c[j] += q;
        acc.w2[[j, y]] += q;
        for (i, &xi) in x.iter().enumerate() {
            if xi == 1 {
                acc.w1[[i, j]] += q;
            }
        }
    }
}

/// Gradient of the mean log-likelihood: data expectation minus exact model expectation.
pub fn exact_loglik_gradient(
    params: &ModelParameters,
    examples: &[Example],
) -> Result<GradientRecord> {
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dims = params.dims();
    guard(dims)?;
    let mut data = GradientRecord::zeros(dims);
    let w = 1.0 / examples.len() as f64;
    for ex in examples {
        check_example(dims, &ex.x, ex.y)?;
        accumulate_stats(params, ex.x.bits(), ex.y.index(), w, &mut data);
    }
    let mut model = GradientRecord::zeros(dims);
    for (x, y, p) in joint_table(params)? {
        accumulate_stats(params, &x, y, p, &mut model);
    }
    Ok(GradientRecord {
        b: data.b - model.b,
        c: data.c - model.c,
        d: data.d - model.d,
        w1: data.w1 - model.w1,
        w2: data.w2 - model.w2,
    })
}

/// `p(x_i = 1 | x_{\i} = 0, y)` as a ratio of two joint probabilities.
pub fn exact_input_relevance(params: &ModelParameters, i: usize, y: Label) -> Result<f64> {
    let dims = params.dims();
    if i >= dims.inputs {
        return Err(Error::InvalidParameter(format!(
            "input index {i} out of range for {} inputs",
            dims.inputs
        )));
    }
    let on = exact_joint(params, &BinaryInput::unit(dims.inputs, i), y)?;
    let off = exact_joint(params, &BinaryInput::zeros(dims.inputs), y)?;
    Ok(on / (on + off))
}

/// A random model with iid `N(0, scale²)` entries in every block.
pub fn random_model<R: Rng + ?Sized>(dims: Dims, scale: f64, rng: &mut R) -> ModelParameters {
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    let b = draw(dims.inputs);
    let c = draw(dims.hidden);
    let d = draw(dims.classes);
    let w1 = draw(dims.inputs * dims.hidden);
    let w2 = draw(dims.hidden * dims.classes);
    ModelParameters::new(
        b.into(),
        c.into(),
        d.into(),
        ndarray::Array2::from_shape_vec((dims.inputs, dims.hidden), w1).expect("shape"),
        ndarray::Array2::from_shape_vec((dims.hidden, dims.classes), w2).expect("shape"),
    )
    .expect("finite random model")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureExample {
    pub x: Vec<u8>,
    /// One-based class number.
    pub y: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFixture {
    pub x: Vec<u8>,
    pub label_probs: Vec<f64>,
    /// `p(x, y)` for each class.
    pub joint: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientFixture {
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFixture {
    pub model: ParamFile,
    pub log_partition: f64,
    pub inputs: Vec<InputFixture>,
    /// `relevance[y][i] = p(x_i = 1 | x_{\i} = 0, y)`.
    pub relevance: Vec<Vec<f64>>,
    pub dataset: Vec<FixtureExample>,
    pub mean_log_likelihood: f64,
    pub gradient: GradientFixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSet {
    pub seed: u64,
    pub models: Vec<ModelFixture>,
}

/// Reference outputs of every oracle routine on `count` random tiny models.
pub fn emit_fixtures(seed: u64, count: usize) -> Result<FixtureSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut models = Vec::with_capacity(count);
    for _ in 0..count {
        let dims = Dims::new(
            rng.random_range(1..=5),
            rng.random_range(1..=4),
            rng.random_range(2..=3),
        )?;
        let params = random_model(dims, 1.0, &mut rng);
        let mut inputs = Vec::new();
        for _ in 0..3 {
            let x = BinaryInput::from_bools(
                &(0..dims.inputs)
                    .map(|_| rng.random())
                    .collect::<Vec<bool>>(),
            );
            let joint = (0..dims.classes)
                .map(|y| exact_joint(&params, &x, Label::new(y, dims.classes)?))
                .collect::<Result<Vec<_>>>()?;
            inputs.push(InputFixture {
                label_probs: label_conditional_by_enumeration(&params, &x)?,
                x: x.bits().to_vec(),
                joint,
            });
        }
        let relevance = (0..dims.classes)
            .map(|y| {
                (0..dims.inputs)
                    .map(|i| exact_input_relevance(&params, i, Label::new(y, dims.classes)?))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let examples: Vec<Example> = (0..5)
            .map(|_| Example {
                x: BinaryInput::from_bools(
                    &(0..dims.inputs)
                        .map(|_| rng.random())
                        .collect::<Vec<bool>>(),
                ),
                y: Label::new(rng.random_range(0..dims.classes), dims.classes).expect("label"),
            })
            .collect();
        let g = exact_loglik_gradient(&params, &examples)?;
        models.push(ModelFixture {
            log_partition: log_partition_function(&params)?,
            inputs,
            relevance,
            dataset: examples
                .iter()
                .map(|e| FixtureExample {
                    x: e.x.bits().to_vec(),
                    y: e.y.number(),
                })
                .collect(),
            mean_log_likelihood: exact_log_likelihood(&params, &examples)?,
            gradient: GradientFixture {
                b: g.b.to_vec(),
                c: g.c.to_vec(),
                d: g.d.to_vec(),
                w1: g.w1.iter().copied().collect(),
                w2: g.w2.iter().copied().collect(),
            },
            model: ParamFile::from_params(&params, None),
        });
    }
    Ok(FixtureSet { seed, models })
}
