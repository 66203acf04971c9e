//! ClassRBM parameterization, energy and the factorized conditionals.
//!
//! Shapes follow the usual convention: `W1` is inputs × hidden and `W2` is
//! hidden × classes. Labels are stored zero-based; [`Label::number`] gives the
//! one-based class number used in files and reports.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{argmax, sigmoid, softmax, softplus};

/// Layer sizes: `inputs` (D), `hidden` (M) and `classes` (K).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Dims {
    pub inputs: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Dims {
    pub fn new(inputs: usize, hidden: usize, classes: usize) -> Result<Self> {
        if inputs == 0 || hidden == 0 || classes == 0 {
            return Err(Error::InvalidParameter(format!(
                "dimensions must be positive, got D={inputs} M={hidden} K={classes}"
            )));
        }
        Ok(Self {
            inputs,
            hidden,
            classes,
        })
    }
}

/// A vector of 0/1 entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryInput(Vec<u8>);

impl BinaryInput {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        check_binary(&bits)?;
        Ok(Self(bits))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    /// The `i`-th standard basis vector of length `len`.
    pub fn unit(len: usize, i: usize) -> Self {
        let mut bits = vec![0; len];
        bits[i] = 1;
        Self(bits)
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        Self(bits.iter().map(|&b| b as u8).collect())
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    /// Positions of active bits, ascending.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(i, _)| i)
    }
}

fn check_binary(bits: &[u8]) -> Result<()> {
    match bits.iter().position(|&b| b > 1) {
        Some(position) => Err(Error::NotBinary {
            position,
            value: bits[position],
        }),
        None => Ok(()),
    }
}

/// Class label, zero-based internally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(usize);

impl Label {
    pub fn new(index: usize, classes: usize) -> Result<Self> {
        if index >= classes {
            return Err(Error::InvalidLabel { index, classes });
        }
        Ok(Self(index))
    }

    /// From a one-based class number in `1..=classes`.
    pub fn from_number(number: usize, classes: usize) -> Result<Self> {
        if number == 0 || number > classes {
            return Err(Error::InvalidLabel {
                index: number,
                classes,
            });
        }
        Ok(Self(number - 1))
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn number(self) -> usize {
        self.0 + 1
    }

    pub fn one_hot(self, classes: usize) -> Vec<u8> {
        let mut v = vec![0; classes];
        v[self.0] = 1;
        v
    }
}

/// A sampled hidden configuration together with the activation probabilities it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub bits: Vec<u8>,
    pub probs: Array1<f64>,
}

/// `p(y | ·)` over the K classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    probs: Vec<f64>,
}

impl LabelDistribution {
    /// Normalizes unnormalized log-probabilities.
    pub fn from_log_scores(scores: &[f64]) -> Self {
        Self {
            probs: softmax(scores),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, label: Label) -> f64 {
        self.probs[label.index()]
    }

    /// Most probable label; ties resolve to the lowest index.
    pub fn argmax(&self) -> Label {
        Label(argmax(&self.probs))
    }
}

pub type Blocks = (
    Array1<f64>,
    Array1<f64>,
    Array1<f64>,
    Array2<f64>,
    Array2<f64>,
);

/// θ = {b, c, d, W1, W2}.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    b: Array1<f64>,
    c: Array1<f64>,
    d: Array1<f64>,
    w1: Array2<f64>,
    w2: Array2<f64>,
}

impl ModelParameters {
    pub fn new(
        b: Array1<f64>,
        c: Array1<f64>,
        d: Array1<f64>,
        w1: Array2<f64>,
        w2: Array2<f64>,
    ) -> Result<Self> {
        let (inputs, hidden, classes) = (b.len(), c.len(), d.len());
        Dims::new(inputs, hidden, classes)?;
        check_shape("W1", w1.dim(), (inputs, hidden))?;
        check_shape("W2", w2.dim(), (hidden, classes))?;
        let params = Self { b, c, d, w1, w2 };
        params.check_finite()?;
        Ok(params)
    }

    pub fn zeros(dims: Dims) -> Self {
        Self {
            b: Array1::zeros(dims.inputs),
            c: Array1::zeros(dims.hidden),
            d: Array1::zeros(dims.classes),
            w1: Array2::zeros((dims.inputs, dims.hidden)),
            w2: Array2::zeros((dims.hidden, dims.classes)),
        }
    }

    pub fn dims(&self) -> Dims {
        Dims {
            inputs: self.b.len(),
            hidden: self.c.len(),
            classes: self.d.len(),
        }
    }

    pub fn b(&self) -> &Array1<f64> {
        &self.b
    }
    pub fn c(&self) -> &Array1<f64> {
        &self.c
    }
    pub fn d(&self) -> &Array1<f64> {
        &self.d
    }
    pub fn w1(&self) -> &Array2<f64> {
        &self.w1
    }
    pub fn w2(&self) -> &Array2<f64> {
        &self.w2
    }

    /// `(b, c, d, W1, W2)`.
    pub fn into_parts(self) -> Blocks {
        (self.b, self.c, self.d, self.w1, self.w2)
    }

    /// Returns a copy with each block passed through `f`. The result is revalidated.
    pub fn map_blocks(
        &self,
        f: impl FnOnce(
            &mut Array1<f64>,
            &mut Array1<f64>,
            &mut Array1<f64>,
            &mut Array2<f64>,
            &mut Array2<f64>,
        ),
    ) -> Result<Self> {
        let mut out = self.clone();
        f(&mut out.b, &mut out.c, &mut out.d, &mut out.w1, &mut out.w2);
        Self::new(out.b, out.c, out.d, out.w1, out.w2)
    }

    pub(crate) fn add_assign(&mut self, delta: &GradientRecord) {
        self.b += &delta.b;
        self.c += &delta.c;
        self.d += &delta.d;
        self.w1 += &delta.w1;
        self.w2 += &delta.w2;
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, ok) in [
            ("b", self.b.iter().all(|v| v.is_finite())),
            ("c", self.c.iter().all(|v| v.is_finite())),
            ("d", self.d.iter().all(|v| v.is_finite())),
            ("W1", self.w1.iter().all(|v| v.is_finite())),
            ("W2", self.w2.iter().all(|v| v.is_finite())),
        ] {
            if !ok {
                return Err(Error::NonFinite(format!("parameter block {name}")));
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &BinaryInput) -> Result<()> {
        check_len("input x", self.b.len(), x.len())
    }

    fn check_label(&self, y: Label) -> Result<()> {
        if y.index() >= self.d.len() {
            return Err(Error::InvalidLabel {
                index: y.index(),
                classes: self.d.len(),
            });
        }
        Ok(())
    }

    fn check_hidden(&self, h: &[u8]) -> Result<()> {
        check_len("hidden bits h", self.c.len(), h.len())?;
        check_binary(h)
    }

    /// `s_j = c_j + (W1_{·j})ᵀ x`, the label-independent hidden pre-activation.
    pub fn hidden_preactivation(&self, x: &BinaryInput) -> Result<Array1<f64>> {
        self.check_input(x)?;
        Ok(self.preactivation_unchecked(x))
    }

    fn preactivation_unchecked(&self, x: &BinaryInput) -> Array1<f64> {
        let mut s = self.c.clone();
        for i in x.active() {
            s += &self.w1.row(i);
        }
        s
    }
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            actual,
        });
    }
    Ok(())
}

fn check_shape(what: &'static str, got: (usize, usize), want: (usize, usize)) -> Result<()> {
    check_len(what, want.0, got.0)?;
    check_len(what, want.1, got.1)
}

/// One array per parameter block, shaped like [`ModelParameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientRecord {
    pub b: Array1<f64>,
    pub c: Array1<f64>,
    pub d: Array1<f64>,
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

impl GradientRecord {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            b: Array1::zeros(dims.inputs),
            c: Array1::zeros(dims.hidden),
            d: Array1::zeros(dims.classes),
            w1: Array2::zeros((dims.inputs, dims.hidden)),
            w2: Array2::zeros((dims.hidden, dims.classes)),
        }
    }

    pub fn dims(&self) -> Dims {
        Dims {
            inputs: self.b.len(),
            hidden: self.c.len(),
            classes: self.d.len(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.b *= factor;
        self.c *= factor;
        self.d *= factor;
        self.w1 *= factor;
        self.w2 *= factor;
    }

    pub fn max_abs(&self) -> f64 {
        self.b
            .iter()
            .chain(&self.c)
            .chain(&self.d)
            .chain(&self.w1)
            .chain(&self.w2)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.b
            .iter()
            .chain(&self.c)
            .chain(&self.d)
            .chain(&self.w1)
            .chain(&self.w2)
            .all(|v| v.is_finite())
    }
}

/// `E(x, y, h) = −bᵀx − cᵀh − dᵀy − xᵀW1h − hᵀW2y`.
pub fn energy(params: &ModelParameters, x: &BinaryInput, y: Label, h: &[u8]) -> Result<f64> {
    params.check_input(x)?;
    params.check_label(y)?;
    params.check_hidden(h)?;
    let mut e = -params.d[y.index()];
    for i in x.active() {
        e -= params.b[i];
    }
    for (j, _) in h.iter().enumerate().filter(|(_, &v)| v == 1) {
        e -= params.c[j] + params.w2[[j, y.index()]];
        for i in x.active() {
            e -= params.w1[[i, j]];
        }
    }
    Ok(e)
}

/// `p(h_j = 1 | x, y) = sigm(c_j + W2_{jy} + (W1_{·j})ᵀx)` for every hidden unit.
pub fn hidden_activation_probs(
    params: &ModelParameters,
    x: &BinaryInput,
    y: Label,
) -> Result<Array1<f64>> {
    params.check_input(x)?;
    params.check_label(y)?;
    Ok(hidden_probs_unchecked(params, x, y))
}

fn hidden_probs_unchecked(params: &ModelParameters, x: &BinaryInput, y: Label) -> Array1<f64> {
    let mut s = params.preactivation_unchecked(x);
    s += &params.w2.column(y.index());
    s.mapv_inplace(sigmoid);
    s
}

/// `p(x_i = 1 | h) = sigm(b_i + W1_{i·} h)` for every input.
pub fn visible_activation_probs(params: &ModelParameters, h: &[u8]) -> Result<Array1<f64>> {
    params.check_hidden(h)?;
    Ok(visible_probs_unchecked(params, h))
}

fn visible_probs_unchecked(params: &ModelParameters, h: &[u8]) -> Array1<f64> {
    let mut a = params.b.clone();
    for (j, _) in h.iter().enumerate().filter(|(_, &v)| v == 1) {
        a += &params.w1.column(j);
    }
    a.mapv_inplace(sigmoid);
    a
}

/// Softmax of `d_y + (W2_{·y})ᵀ h`.
pub fn label_probs_given_hidden(params: &ModelParameters, h: &[u8]) -> Result<LabelDistribution> {
    params.check_hidden(h)?;
    Ok(label_probs_unchecked(params, h))
}

fn label_probs_unchecked(params: &ModelParameters, h: &[u8]) -> LabelDistribution {
    let mut scores = params.d.clone();
    for (j, _) in h.iter().enumerate().filter(|(_, &v)| v == 1) {
        scores += &params.w2.row(j);
    }
    LabelDistribution::from_log_scores(scores.as_slice().expect("contiguous"))
}

/// Unnormalized `log p(y | x)` for every class, using the precomputed hidden pre-activation.
pub fn label_log_scores(params: &ModelParameters, x: &BinaryInput) -> Result<Vec<f64>> {
    let s = params.hidden_preactivation(x)?;
    Ok(scores_from_preactivation(params, &s))
}

fn scores_from_preactivation(params: &ModelParameters, s: &Array1<f64>) -> Vec<f64> {
    let w2 = &params.w2;
    (0..params.d.len())
        .map(|y| {
            params.d[y]
                + s.iter()
                    .enumerate()
                    .map(|(j, &sj)| softplus(sj + w2[[j, y]]))
                    .sum::<f64>()
        })
        .collect()
}

/// Exact `p(y | x)` in O(MD + MK).
pub fn predict_proba(params: &ModelParameters, x: &BinaryInput) -> Result<LabelDistribution> {
    Ok(LabelDistribution::from_log_scores(&label_log_scores(
        params, x,
    )?))
}

/// Same contract as [`predict_proba`], recomputing `c_j + (W1_{·j})ᵀx` inside the
/// class loop (O(MDK)). Kept as a second route for cross-checking.
pub fn predict_proba_unfactored(
    params: &ModelParameters,
    x: &BinaryInput,
) -> Result<LabelDistribution> {
    params.check_input(x)?;
    let dims = params.dims();
    let scores: Vec<f64> = (0..dims.classes)
        .map(|y| {
            let mut score = params.d[y];
            for j in 0..dims.hidden {
                let mut a = params.c[j];
                for i in x.active() {
                    a += params.w1[[i, j]];
                }
                score += softplus(a + params.w2[[j, y]]);
            }
            score
        })
        .collect();
    Ok(LabelDistribution::from_log_scores(&scores))
}

pub fn predict(params: &ModelParameters, x: &BinaryInput) -> Result<Label> {
    Ok(predict_proba(params, x)?.argmax())
}

/// Result of one block-Gibbs sweep `h ~ p(h|x,y)`, then `x' ~ p(x|h)` and `y' ~ p(y|h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsSample {
    pub x: BinaryInput,
    pub y: Label,
    pub h: HiddenState,
}

pub fn gibbs_step<R: Rng + ?Sized>(
    params: &ModelParameters,
    x: &BinaryInput,
    y: Label,
    rng: &mut R,
) -> Result<GibbsSample> {
    params.check_input(x)?;
    params.check_label(y)?;
    Ok(gibbs_step_unchecked(params, x, y, rng))
}

pub(crate) fn gibbs_step_unchecked<R: Rng + ?Sized>(
    params: &ModelParameters,
    x: &BinaryInput,
    y: Label,
    rng: &mut R,
) -> GibbsSample {
    let probs = hidden_probs_unchecked(params, x, y);
    let bits = sample_bits(&probs, rng);
    let px = visible_probs_unchecked(params, &bits);
    let x_next = BinaryInput(sample_bits(&px, rng));
    let py = label_probs_unchecked(params, &bits);
    let y_next = sample_categorical(py.probs(), rng);
    GibbsSample {
        x: x_next,
        y: y_next,
        h: HiddenState { bits, probs },
    }
}

fn sample_bits<R: Rng + ?Sized>(probs: &Array1<f64>, rng: &mut R) -> Vec<u8> {
    probs
        .iter()
        .map(|&p| (rng.random::<f64>() < p) as u8)
        .collect()
}

fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Label {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Label(k);
        }
    }
    // u landed in the rounding gap above the cumulative sum
    Label(probs.iter().rposition(|&p| p > 0.0).unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dims(d: usize, m: usize, k: usize) -> Dims {
        Dims::new(d, m, k).unwrap()
    }

    #[test]
    fn constructor_rejects_shape_mismatch() {
        let err = ModelParameters::new(
            Array1::zeros(3),
            Array1::zeros(2),
            Array1::zeros(2),
            Array2::zeros((3, 3)),
            Array2::zeros((2, 2)),
        );
        assert!(matches!(
            err,
            Err(Error::DimensionMismatch { what: "W1", .. })
        ));
    }

    #[test]
    fn constructor_rejects_nan() {
        let err = ModelParameters::new(
            arr1(&[f64::NAN]),
            Array1::zeros(1),
            Array1::zeros(2),
            Array2::zeros((1, 1)),
            Array2::zeros((1, 2)),
        );
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }

    #[test]
    fn binary_input_rejects_other_values() {
        assert!(matches!(
            BinaryInput::new(vec![0, 1, 2]),
            Err(Error::NotBinary {
                position: 2,
                value: 2
            })
        ));
    }

    #[test]
    fn label_number_round_trip() {
        let y = Label::from_number(2, 3).unwrap();
        assert_eq!(y.index(), 1);
        assert_eq!(y.number(), 2);
        assert_eq!(y.one_hot(3), vec![0, 1, 0]);
        assert!(Label::from_number(0, 3).is_err());
        assert!(Label::from_number(4, 3).is_err());
    }

    #[test]
    fn energy_of_zero_model_is_zero() {
        let p = ModelParameters::zeros(dims(3, 2, 2));
        let x = BinaryInput::new(vec![1, 0, 1]).unwrap();
        let e = energy(&p, &x, Label(1), &[1, 1]).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn energy_with_empty_state_is_minus_label_bias() {
        let p = ModelParameters::new(
            arr1(&[0.3, -0.2]),
            arr1(&[0.1]),
            arr1(&[0.7, -1.5]),
            arr2(&[[1.0], [2.0]]),
            arr2(&[[0.4, 0.9]]),
        )
        .unwrap();
        let e = energy(&p, &BinaryInput::zeros(2), Label(1), &[0]).unwrap();
        assert_eq!(e, 1.5);
    }

    #[test]
    fn energy_rejects_wrong_hidden_length() {
        let p = ModelParameters::zeros(dims(2, 2, 2));
        assert!(energy(&p, &BinaryInput::zeros(2), Label(0), &[0]).is_err());
        assert!(energy(&p, &BinaryInput::zeros(2), Label(2), &[0, 0]).is_err());
    }

    #[test]
    fn zero_model_conditionals_are_half_and_uniform() {
        let p = ModelParameters::zeros(dims(4, 3, 3));
        let x = BinaryInput::new(vec![1, 0, 1, 1]).unwrap();
        assert!(hidden_activation_probs(&p, &x, Label(2))
            .unwrap()
            .iter()
            .all(|&v| v == 0.5));
        assert!(visible_activation_probs(&p, &[1, 0, 1])
            .unwrap()
            .iter()
            .all(|&v| v == 0.5));
        for dist in [
            label_probs_given_hidden(&p, &[0, 1, 1]).unwrap(),
            predict_proba(&p, &x).unwrap(),
        ] {
            for &q in dist.probs() {
                assert!((q - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        assert_eq!(predict(&p, &x).unwrap(), Label(0));
    }

    #[test]
    fn saturated_biases() {
        let mut p = ModelParameters::zeros(dims(2, 2, 2));
        p.c[1] = 30.0;
        p.b[0] = -30.0;
        let h = hidden_activation_probs(&p, &BinaryInput::zeros(2), Label(0)).unwrap();
        assert!(h[1] >= 1.0 - 1e-9);
        let v = visible_activation_probs(&p, &[0, 0]).unwrap();
        assert!(v[0] <= 1e-9);
    }

    #[test]
    fn label_bias_only_models() {
        let mut p = ModelParameters::zeros(dims(3, 2, 2));
        p.d[0] = 3f64.ln();
        let x = BinaryInput::new(vec![1, 1, 0]).unwrap();
        for dist in [
            label_probs_given_hidden(&p, &[1, 0]).unwrap(),
            predict_proba(&p, &x).unwrap(),
        ] {
            assert!((dist.probs()[0] - 0.75).abs() < 1e-15);
            assert!((dist.probs()[1] - 0.25).abs() < 1e-15);
        }

        let mut p = ModelParameters::zeros(dims(3, 2, 2));
        p.d[1] = 10.0;
        assert_eq!(predict(&p, &x).unwrap(), Label(1));
    }

    #[test]
    fn predict_proba_survives_huge_weights() {
        let mut p = ModelParameters::zeros(dims(2, 2, 2));
        p.w1.fill(700.0);
        p.w2[[0, 0]] = 700.0;
        let x = BinaryInput::new(vec![1, 1]).unwrap();
        let dist = predict_proba(&p, &x).unwrap();
        assert!(dist.probs().iter().all(|v| v.is_finite()));
        assert!((dist.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(dist.argmax(), Label(0));
    }

    #[test]
    fn gibbs_step_is_seed_deterministic() {
        let p = ModelParameters::new(
            arr1(&[0.3, -0.2, 0.5]),
            arr1(&[0.1, -0.4]),
            arr1(&[0.2, -0.1]),
            arr2(&[[1.0, -0.5], [0.2, 0.3], [-0.7, 0.8]]),
            arr2(&[[0.4, -0.9], [0.6, 0.1]]),
        )
        .unwrap();
        let x = BinaryInput::new(vec![1, 0, 1]).unwrap();
        let a = gibbs_step(&p, &x, Label(1), &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = gibbs_step(&p, &x, Label(1), &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn saturated_gibbs_hidden_is_seed_independent() {
        let mut p = ModelParameters::zeros(dims(2, 4, 2));
        for (j, v) in [30.0, -30.0, 30.0, -30.0].into_iter().enumerate() {
            p.c[j] = v;
        }
        let x = BinaryInput::new(vec![1, 0]).unwrap();
        for seed in 0..50 {
            let s = gibbs_step(&p, &x, Label(0), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(s.h.bits, vec![1, 0, 1, 0]);
        }
    }

    #[test]
    fn categorical_sampler_never_picks_zero_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_eq!(sample_categorical(&[0.0, 1.0, 0.0], &mut rng), Label(1));
        }
    }
}
