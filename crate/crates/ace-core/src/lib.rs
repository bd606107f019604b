//! Estimation of average causal effects of interventions in continuous
//! variables, together with the graph machinery needed to decide when such
//! estimation is sound.
//!
//! The crate has three layers:
//!
//! * **Graphs** ([`graph`], [`analysis`]) — semi-Markovian causal graphs
//!   (DAGs with bidirected arcs standing for latent confounders), kinship
//!   queries, graph surgeries, d-separation, do-calculus side conditions,
//!   C-components, and the hedge-based identifiability test.
//! * **Estimation** ([`learn`], [`pipeline`]) — a pluggable supervised
//!   regression layer (mean / least squares / k-NN / gradient-boosted trees /
//!   a random-forest-like bagger) and the sequential-residualization
//!   pipeline: residualize the outcome and every treatment on the covariates,
//!   then cascade residual-on-residual regressions across treatments, and
//!   estimate `E[Y | do(x), z]` as the sum of the fitted conditional means.
//! * **Validation** ([`oracle`], [`sim`], [`experiment`]) — exact evaluation
//!   of small discrete structural causal models (ground truth for the
//!   interventional distributions), seeded synthetic data generators with
//!   analytic do-expectations, and an experiment harness that compares the
//!   pipeline against those closed forms.
//!
//! All numeric code is generic over the scalar type through the [`Real`]
//! trait; `f64` aliases for the common types live at the crate root.

use std::fmt;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub mod analysis;
pub mod data;
pub mod experiment;
pub mod graph;
pub mod learn;
pub mod oracle;
pub mod pipeline;
pub mod rng;
pub mod sim;

/// Scalar type for all numeric routines: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + FromStr
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum<Self>
    + fmt::Display
    + fmt::Debug
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for converting an `f64` constant to the working scalar.
pub(crate) fn real<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("f64 constant must convert to the scalar type")
}

pub use graph::{CausalGraph, GraphError, VariableId};

pub use analysis::{Hedge, KinshipKind, Theorem1Report};

/// `f64` dataset, the default for file-backed work.
pub type Dataset = data::Dataset<f64>;
/// `f64` feature matrix.
pub type FeatureMatrix = learn::FeatureMatrix<f64>;
/// `f64` fitted model.
pub type FittedModel = learn::FittedModel<f64>;
/// `f64` discrete structural causal model.
pub type DiscreteScm = oracle::DiscreteScm<f64>;
/// `f64` joint probability table.
pub type JointTable = oracle::JointTable<f64>;
/// `f64` trained residualization pipeline.
pub type TrainedPipeline = pipeline::TrainedPipeline<f64>;
/// `f64` residual trace.
pub type ResidualTrace = pipeline::ResidualTrace<f64>;
/// `f64` experiment result.
pub type ExperimentResult = experiment::ExperimentResult<f64>;
