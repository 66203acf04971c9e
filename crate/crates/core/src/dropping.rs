//! Random masks multiplied into `c`, `W1` and `W2` during training.
//!
//! * DropOut removes whole hidden units: column `j` of `M1`, row `j` of `M2`
//!   and `m_j` share one Bernoulli(p) draw.
//! * DropConnect draws every entry independently from Bernoulli(p).
//! * DropPart draws every entry independently from Beta(a, b), a continuous
//!   relaxation of DropConnect.
//!
//! Visible biases `b` and label biases `d` are never masked.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dims, ModelParameters};

#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    /// inputs × hidden, multiplies `W1`.
    pub m1: Array2<f64>,
    /// hidden × classes, multiplies `W2`.
    pub m2: Array2<f64>,
    /// multiplies the hidden bias `c`.
    pub m: Array1<f64>,
}

impl Mask {
    pub fn ones(dims: Dims) -> Self {
        Self {
            m1: Array2::ones((dims.inputs, dims.hidden)),
            m2: Array2::ones((dims.hidden, dims.classes)),
            m: Array1::ones(dims.hidden),
        }
    }

    pub fn dims(&self) -> Dims {
        Dims {
            inputs: self.m1.nrows(),
            hidden: self.m.len(),
            classes: self.m2.ncols(),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.m1.iter().chain(&self.m2).chain(&self.m).copied()
    }

    /// True if every hidden unit is either fully kept or fully removed.
    pub fn is_unit_structured(&self) -> bool {
        (0..self.m.len()).all(|j| {
            let v = self.m[j];
            (v == 0.0 || v == 1.0)
                && self.m1.column(j).iter().all(|&e| e == v)
                && self.m2.row(j).iter().all(|&e| e == v)
        })
    }

    pub fn is_binary(&self) -> bool {
        self.entries().all(|v| v == 0.0 || v == 1.0)
    }
}

/// How masks are drawn for each training iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DroppingScheme {
    #[default]
    None,
    DropOut {
        p: f64,
    },
    DropConnect {
        p: f64,
    },
    DropPart {
        a: f64,
        b: f64,
    },
}

impl DroppingScheme {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::None => Ok(()),
            Self::DropOut { p } | Self::DropConnect { p } => check_probability(p),
            Self::DropPart { a, b } => check_beta(a, b),
        }
    }

    /// Short identifier used in reports, e.g. `dropconnect(0.5)`.
    pub fn label(&self) -> String {
        match self {
            Self::None => "none".into(),
            Self::DropOut { p } => format!("dropout({p})"),
            Self::DropConnect { p } => format!("dropconnect({p})"),
            Self::DropPart { a, b } => format!("droppart({a},{b})"),
        }
    }

    /// One mask for one iteration. `None` returns the all-ones mask and draws nothing.
    pub fn sample_mask<R: Rng + ?Sized>(&self, dims: Dims, rng: &mut R) -> Result<Mask> {
        match *self {
            Self::None => Ok(Mask::ones(dims)),
            Self::DropOut { p } => gen_dropout_mask(dims, p, rng),
            Self::DropConnect { p } => gen_dropconnect_mask(dims, p, rng),
            Self::DropPart { a, b } => gen_droppart_mask(dims, a, b, rng),
        }
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "mask probability must lie in [0, 1], got {p}"
        )));
    }
    Ok(())
}

fn check_beta(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Beta parameters must be positive and finite, got a={a} b={b}"
        )));
    }
    Ok(())
}

fn bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> f64 {
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

pub fn gen_dropout_mask<R: Rng + ?Sized>(dims: Dims, p: f64, rng: &mut R) -> Result<Mask> {
    check_probability(p)?;
    let keep: Array1<f64> = (0..dims.hidden).map(|_| bernoulli(p, rng)).collect();
    let m1 = Array2::from_shape_fn((dims.inputs, dims.hidden), |(_, j)| keep[j]);
    let m2 = Array2::from_shape_fn((dims.hidden, dims.classes), |(j, _)| keep[j]);
    Ok(Mask { m1, m2, m: keep })
}

pub fn gen_dropconnect_mask<R: Rng + ?Sized>(dims: Dims, p: f64, rng: &mut R) -> Result<Mask> {
    check_probability(p)?;
    Ok(fill_mask(dims, || bernoulli(p, rng)))
}

pub fn gen_droppart_mask<R: Rng + ?Sized>(dims: Dims, a: f64, b: f64, rng: &mut R) -> Result<Mask> {
    check_beta(a, b)?;
    let beta =
        Beta::new(a, b).map_err(|e| Error::InvalidParameter(format!("Beta({a}, {b}): {e}")))?;
    Ok(fill_mask(dims, || beta.sample(rng)))
}

/// Draws entries in the order M1 (row-major), M2 (row-major), m.
fn fill_mask(dims: Dims, mut draw: impl FnMut() -> f64) -> Mask {
    let m1 = Array2::from_shape_simple_fn((dims.inputs, dims.hidden), &mut draw);
    let m2 = Array2::from_shape_simple_fn((dims.hidden, dims.classes), &mut draw);
    let m = Array1::from_shape_simple_fn(dims.hidden, &mut draw);
    Mask { m1, m2, m }
}

/// `(b, m ⊙ c, d, M1 ⊙ W1, M2 ⊙ W2)`.
pub fn apply_mask(params: &ModelParameters, mask: &Mask) -> Result<ModelParameters> {
    let dims = params.dims();
    if mask.dims() != dims || mask.m1.ncols() != dims.hidden || mask.m2.nrows() != dims.hidden {
        return Err(Error::DimensionMismatch {
            what: "mask",
            expected: dims.inputs * dims.hidden + dims.hidden * dims.classes + dims.hidden,
            actual: mask.m1.len() + mask.m2.len() + mask.m.len(),
        });
    }
    params.map_blocks(|_, c, _, w1, w2| {
        *c *= &mask.m;
        *w1 *= &mask.m1;
        *w2 *= &mask.m2;
    })
}

/// DropOut prediction rule: `W2` replaced by `W2 / 2`.
pub fn dropout_prediction_params(params: &ModelParameters) -> ModelParameters {
    params
        .map_blocks(|_, _, _, _, w2| w2.mapv_inplace(|v| v / 2.0))
        .expect("halving keeps parameters finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::random_model;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dims() -> Dims {
        Dims::new(4, 3, 2).unwrap()
    }

    #[test]
    fn extreme_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ones = Mask::ones(dims());
        assert_eq!(gen_dropout_mask(dims(), 1.0, &mut rng).unwrap(), ones);
        assert_eq!(gen_dropconnect_mask(dims(), 1.0, &mut rng).unwrap(), ones);
        let zero = gen_dropout_mask(dims(), 0.0, &mut rng).unwrap();
        assert!(zero.entries().all(|v| v == 0.0));
    }

    #[test]
    fn invalid_parameters_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(gen_dropout_mask(dims(), 1.5, &mut rng).is_err());
        assert!(gen_dropconnect_mask(dims(), -0.1, &mut rng).is_err());
        assert!(gen_droppart_mask(dims(), 0.0, 1.0, &mut rng).is_err());
        assert!(gen_droppart_mask(dims(), 1.0, -2.0, &mut rng).is_err());
        assert!(DroppingScheme::DropPart {
            a: f64::NAN,
            b: 1.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn droppart_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (a, b) in [(0.1, 0.1), (0.5, 0.5), (1.0, 1.0), (3.0, 0.2), (0.05, 7.0)] {
            for _ in 0..200 {
                let m = gen_droppart_mask(dims(), a, b, &mut rng).unwrap();
                assert!(m.entries().all(|v| (0.0..=1.0).contains(&v)), "a={a} b={b}");
            }
        }
    }

    #[test]
    fn same_seed_same_mask() {
        for scheme in [
            DroppingScheme::DropOut { p: 0.5 },
            DroppingScheme::DropConnect { p: 0.5 },
            DroppingScheme::DropPart { a: 0.5, b: 0.5 },
        ] {
            let a = scheme
                .sample_mask(dims(), &mut ChaCha8Rng::seed_from_u64(9))
                .unwrap();
            let b = scheme
                .sample_mask(dims(), &mut ChaCha8Rng::seed_from_u64(9))
                .unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn apply_mask_identity_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_model(dims(), 1.0, &mut rng);
        assert_eq!(apply_mask(&p, &Mask::ones(dims())).unwrap(), p);

        let zero = gen_dropconnect_mask(dims(), 0.0, &mut rng).unwrap();
        let q = apply_mask(&p, &zero).unwrap();
        assert!(q.c().iter().chain(q.w1()).chain(q.w2()).all(|&v| v == 0.0));
        assert_eq!(q.b(), p.b());
        assert_eq!(q.d(), p.d());
    }

    #[test]
    fn apply_mask_is_elementwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_model(dims(), 1.0, &mut rng);
        let mask = gen_droppart_mask(dims(), 0.5, 0.5, &mut rng).unwrap();
        let q = apply_mask(&p, &mask).unwrap();
        for i in 0..4 {
            for j in 0..3 {
                assert_eq!(q.w1()[[i, j]], p.w1()[[i, j]] * mask.m1[[i, j]]);
            }
        }
        for j in 0..3 {
            assert_eq!(q.c()[j], p.c()[j] * mask.m[j]);
            for k in 0..2 {
                assert_eq!(q.w2()[[j, k]], p.w2()[[j, k]] * mask.m2[[j, k]]);
            }
        }
    }

    #[test]
    fn apply_mask_rejects_wrong_shape() {
        let p = ModelParameters::zeros(dims());
        let mask = Mask::ones(Dims::new(4, 2, 2).unwrap());
        assert!(apply_mask(&p, &mask).is_err());
    }

    #[test]
    fn dropout_prediction_halves_w2_only() {
        let p = ModelParameters::zeros(dims())
            .map_blocks(|b, c, d, w1, w2| {
                b.fill(1.0);
                c.fill(2.0);
                d.fill(-1.0);
                w1.fill(4.0);
                w2[[0, 0]] = 3.0;
            })
            .unwrap();
        let q = dropout_prediction_params(&p);
        assert_eq!(q.w2()[[0, 0]], 1.5);
        assert_eq!(q.w2()[[1, 1]], 0.0);
        assert_eq!((q.b(), q.c(), q.d(), q.w1()), (p.b(), p.c(), p.d(), p.w1()));
        let z = ModelParameters::zeros(dims());
        assert_eq!(dropout_prediction_params(&z), z);
    }

    #[test]
    fn scheme_toml_form() {
        #[derive(Deserialize)]
        struct Wrap {
            scheme: DroppingScheme,
        }
        let w: Wrap = toml::from_str("[scheme]\nkind = \"droppart\"\na = 0.5\nb = 0.5\n").unwrap();
        assert_eq!(w.scheme, DroppingScheme::DropPart { a: 0.5, b: 0.5 });
        let w: Wrap = toml::from_str("scheme = { kind = \"none\" }").unwrap();
        assert_eq!(w.scheme, DroppingScheme::None);
        assert!(toml::from_str::<Wrap>("scheme = { kind = \"dropout\" }").is_err());
    }
}
