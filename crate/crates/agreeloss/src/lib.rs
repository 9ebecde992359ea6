//! Annotation-aware cross-entropy losses for binary causality detection,
//! with a small, fully deterministic trainable classifier around them.
//!
//! Corpora in the Causal News Corpus format carry, per sentence, the gold
//! label plus how many annotators voted and what fraction of them agreed
//! with the majority. The [`losses`] module turns that metadata into three
//! batch losses (vanilla, noisy, refined cross-entropy) with analytic
//! gradients that are verified against finite differences in [`gradcheck`].
//! Around the losses: [`data`] loads and validates corpora, [`features`]
//! hashes word n-grams into fixed-size sparse vectors, [`model`] trains a
//! deterministic sparse-linear sigmoid classifier, [`metrics`] scores
//! predictions, and [`cli`] wires it all into `train`, `eval`, `gradcheck`,
//! `profile` and `compare` subcommands.

pub mod cli;
pub mod data;
pub mod features;
pub mod gradcheck;
pub mod losses;
pub mod manifest;
pub mod metrics;
pub mod model;

mod rng;
mod util;

pub use data::{AnnotatedExample, ColumnSpec, DataError, Dataset};
pub use features::{FeatureError, FeaturizerConfig, SparseVector};
pub use losses::{BatchTarget, LossError, LossKind, Probabilities};
pub use metrics::{EvalReport, MetricsError};
pub use model::{Checkpoint, LinearModel, ModelError, TrainConfig};
