//! Stochastic contrastive divergence with one freshly drawn mask per iteration.
//!
//! Each iteration picks one training example, draws a mask from the configured
//! scheme, computes the CD-k gradient on the masked parameters and applies a
//! momentum update. By the chain rule through `θ ⊙ mask`, the gradient for the
//! masked blocks (`c`, `W1`, `W2`) is multiplied by the mask once more before
//! the update; `b` and `d` are updated unmasked. The `log p(mask)` term of the
//! mask-averaged bound carries no parameter dependence and never appears.

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Example};
use crate::dropping::{apply_mask, dropout_prediction_params, DroppingScheme, Mask};
use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::model::{
    gibbs_step_unchecked, hidden_activation_probs, predict, Dims, GradientRecord, ModelParameters,
};
use crate::oracle;

/// How the example for each iteration is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Uniformly at random, independently per iteration.
    #[default]
    Stochastic,
    /// Shuffled passes over the training set.
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub iterations: usize,
    pub cd_steps: usize,
    pub scheme: DroppingScheme,
    pub seed: u64,
    /// Standard deviation of the Gaussian weight initialization.
    pub init_scale: f64,
    pub sampling: Sampling,
    /// Checkpoint interval; defaults to a twentieth of the run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_every: Option<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            hidden_units: 10,
            learning_rate: 0.01,
            momentum: 0.5,
            iterations: 100_000,
            cd_steps: 1,
            scheme: DroppingScheme::None,
            seed: 0,
            init_scale: 0.01,
            sampling: Sampling::Stochastic,
            log_every: None,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.hidden_units == 0 {
            return bad("hidden_units must be at least 1".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be non-negative, got {}",
                self.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            ));
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.cd_steps == 0 {
            return bad("cd_steps must be at least 1".into());
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad(format!(
                "init_scale must be non-negative, got {}",
                self.init_scale
            ));
        }
        if self.log_every == Some(0) {
            return bad("log_every must be at least 1".into());
        }
        self.scheme.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub iteration: usize,
    /// Mean squared error of the mean-field reconstruction of the monitored inputs.
    pub reconstruction_error: f64,
    /// Exact mean log-likelihood of the training set, for models small enough to enumerate.
    pub log_likelihood: Option<f64>,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<LogRecord>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("iteration,reconstruction_error,log_likelihood,train_accuracy\n");
        for r in &self.records {
            let ll = r.log_likelihood.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.iteration, r.reconstruction_error, ll, r.train_accuracy
            ));
        }
        out
    }
}

/// Biases zero, `W1` and `W2` iid `N(0, init_scale²)` (W1 drawn first, row-major).
pub fn init_params<R: Rng + ?Sized>(
    dims: Dims,
    init_scale: f64,
    rng: &mut R,
) -> Result<ModelParameters> {
    Dims::new(dims.inputs, dims.hidden, dims.classes)?;
    if !(init_scale >= 0.0 && init_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "init_scale must be non-negative, got {init_scale}"
        )));
    }
    ModelParameters::zeros(dims).map_blocks(|_, _, _, w1, w2| {
        w1.mapv_inplace(|_| init_scale * rng.sample::<f64, _>(StandardNormal));
        w2.mapv_inplace(|_| init_scale * rng.sample::<f64, _>(StandardNormal));
    })
}

/// CD-k gradient at one example: positive-phase statistics at `(x, y)` minus
/// negative-phase statistics after `cd_steps` Gibbs sweeps, hidden units
/// entering through their activation probabilities in both phases.
pub fn cd_gradient<R: Rng + ?Sized>(
    params: &ModelParameters,
    example: &Example,
    cd_steps: usize,
    rng: &mut R,
) -> Result<GradientRecord> {
    if cd_steps == 0 {
        return Err(Error::InvalidParameter(
            "cd_steps must be at least 1".into(),
        ));
    }
    let dims = params.dims();
    let pos_h = hidden_activation_probs(params, &example.x, example.y)?;

    let mut x = example.x.clone();
    let mut y = example.y;
    for _ in 0..cd_steps {
        let s = gibbs_step_unchecked(params, &x, y, rng);
        x = s.x;
        y = s.y;
    }
    let neg_h = hidden_activation_probs(params, &x, y)?;

    let mut g = GradientRecord::zeros(dims);
    add_stats(&mut g, &example.x, example.y.index(), &pos_h, 1.0);
    add_stats(&mut g, &x, y.index(), &neg_h, -1.0);
    Ok(g)
}

fn add_stats(
    g: &mut GradientRecord,
    x: &crate::model::BinaryInput,
    y: usize,
    h: &Array1<f64>,
    sign: f64,
) {
    g.d[y] += sign;
    g.c.scaled_add(sign, h);
    g.w2.column_mut(y).scaled_add(sign, h);
    for i in x.active() {
        g.b[i] += sign;
        g.w1.row_mut(i).scaled_add(sign, h);
    }
}

/// Owns the parameters, momentum buffer and generator of one training run.
#[derive(Debug, Clone)]
pub struct Trainer<R> {
    params: ModelParameters,
    velocity: GradientRecord,
    learning_rate: f64,
    momentum: f64,
    cd_steps: usize,
    iteration: usize,
    rng: R,
}

impl<R: Rng> Trainer<R> {
    pub fn new(params: ModelParameters, config: &TrainingConfig, rng: R) -> Self {
        Self {
            velocity: GradientRecord::zeros(params.dims()),
            params,
            learning_rate: config.learning_rate,
            momentum: config.momentum,
            cd_steps: config.cd_steps,
            iteration: 0,
            rng,
        }
    }

    pub fn params(&self) -> &ModelParameters {
        &self.params
    }

    pub fn into_params(self) -> ModelParameters {
        self.params
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }

    /// One masked CD update on `example`.
    pub fn step(&mut self, example: &Example, mask: &Mask) -> Result<()> {
        let masked = apply_mask(&self.params, mask)?;
        let mut g = cd_gradient(&masked, example, self.cd_steps, &mut self.rng)?;
        g.c *= &mask.m;
        g.w1 *= &mask.m1;
        g.w2 *= &mask.m2;

        let (mu, lr) = (self.momentum, self.learning_rate);
        let v = &mut self.velocity;
        v.b *= mu;
        v.b.scaled_add(lr, &g.b);
        v.c *= mu;
        v.c.scaled_add(lr, &g.c);
        v.d *= mu;
        v.d.scaled_add(lr, &g.d);
        v.w1 *= mu;
        v.w1.scaled_add(lr, &g.w1);
        v.w2 *= mu;
        v.w2.scaled_add(lr, &g.w2);
        self.params.add_assign(v);
        self.iteration += 1;

        self.params
            .check_finite()
            .map_err(|e| Error::NumericalFailure {
                iteration: self.iteration,
                detail: e.to_string(),
            })
    }
}

const MONITOR_EXAMPLES: usize = 200;
const LOG_LIKELIHOOD_MAX_INPUTS: usize = 12;

fn checkpoint(
    params: &ModelParameters,
    scheme: &DroppingScheme,
    dataset: &Dataset,
    iteration: usize,
) -> Result<LogRecord> {
    let monitor = &dataset.examples()[..dataset.len().min(MONITOR_EXAMPLES)];
    let predictor = final_prediction_params(params, scheme);
    let mut sq = 0.0;
    let mut hits = 0;
    for ex in monitor {
        let h = hidden_activation_probs(params, &ex.x, ex.y)?;
        let recon = params.w1().dot(&h) + params.b();
        for (r, &b) in recon.iter().zip(ex.x.bits()) {
            let diff = sigmoid(*r) - b as f64;
            sq += diff * diff;
        }
        if predict(&predictor, &ex.x)? == ex.y {
            hits += 1;
        }
    }
    let dims = params.dims();
    let log_likelihood =
        if dims.inputs <= LOG_LIKELIHOOD_MAX_INPUTS && dims.classes <= oracle::MAX_CLASSES {
            Some(oracle::exact_log_likelihood(params, dataset.examples())?)
        } else {
            None
        };
    Ok(LogRecord {
        iteration,
        reconstruction_error: sq / (monitor.len() * dims.inputs) as f64,
        log_likelihood,
        train_accuracy: hits as f64 / monitor.len() as f64,
    })
}

/// Runs `config.iterations` masked CD updates. Deterministic in `config.seed`.
pub fn train(dataset: &Dataset, config: &TrainingConfig) -> Result<(ModelParameters, TrainingLog)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dims = Dims::new(dataset.inputs(), config.hidden_units, dataset.classes())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = init_params(dims, config.init_scale, &mut rng)?;
    let log_every = config.log_every.unwrap_or((config.iterations / 20).max(1));

    let mut log = TrainingLog::default();
    log.records
        .push(checkpoint(&init, &config.scheme, dataset, 0)?);

    let mut trainer = Trainer::new(init, config, rng);
    let examples = dataset.examples();
    let n = examples.len();
    let mut order: Vec<usize> = (0..n).collect();
    for it in 0..config.iterations {
        let idx = match config.sampling {
            Sampling::Stochastic => trainer.rng.random_range(0..n),
            Sampling::Sweep => {
                if it % n == 0 {
                    order.shuffle(&mut trainer.rng);
                }
                order[it % n]
            }
        };
        let mask = config.scheme.sample_mask(dims, &mut trainer.rng)?;
        trainer.step(&examples[idx], &mask)?;
        let done = it + 1;
        if done % log_every == 0 || done == config.iterations {
            log.records
                .push(checkpoint(trainer.params(), &config.scheme, dataset, done)?);
        }
    }
    Ok((trainer.into_params(), log))
}

/// Parameters used for prediction after training under `scheme`: DropOut halves
/// `W2`, every other scheme predicts with the trained parameters as they are.
pub fn final_prediction_params(
    params: &ModelParameters,
    scheme: &DroppingScheme,
) -> ModelParameters {
    match scheme {
        DroppingScheme::DropOut { .. } => dropout_prediction_params(params),
        _ => params.clone(),
    }
}
