//! Classification restricted Boltzmann machine (ClassRBM).
//!
//! The model couples binary inputs `x`, binary hidden units `h` and a one-hot
//! label `y` through a bilinear energy. Because hidden units can be summed out
//! analytically, `p(y|x)` and the per-input relevance probabilities have closed
//! forms which this crate evaluates in the log domain.
//!
//! Training is stochastic contrastive divergence in which every update runs on
//! parameters multiplied elementwise by a freshly sampled mask (no mask,
//! DropOut, DropConnect or the Beta-distributed DropPart).
//!
//! The [`oracle`] module holds brute-force reference implementations used to
//! validate everything else on small models.

pub mod data;
pub mod dropping;
pub mod error;
pub mod eval;
pub mod io;
pub(crate) mod math;
pub mod model;
pub mod oracle;
pub mod relevance;
pub mod training;

pub use data::{CategoricalSchema, Dataset, Example};
pub use dropping::{DroppingScheme, Mask};
pub use error::{Error, Result};
pub use model::{
    BinaryInput, Dims, GradientRecord, HiddenState, Label, LabelDistribution, ModelParameters,
};
pub use training::{TrainingConfig, TrainingLog};
