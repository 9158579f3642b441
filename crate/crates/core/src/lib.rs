//! Environment-aware unsupervised anomaly detection under distribution shift.
//!
//! The crate is organized around a single pipeline: generate (or load) a
//! multi-environment dataset whose observations mix Content and Style latents
//! ([`synth`]), learn an embedding of the training split with one of several
//! pretrainers ([`pretrain`] for the supervised ones, [`eamoco`] for the
//! contrastive ones), fit classical anomaly detectors on the train embeddings
//! ([`detect`]), and evaluate ROC-AUC on the test split over a
//! (pretrainer x detector x seed) grid ([`bench`]).
//!
//! Everything is deterministic for a fixed seed: randomness flows through
//! [`rng::RngHandle`], a splittable label-addressed stream, so results do not
//! depend on execution order or worker count.

pub mod bench;
pub mod data;
pub mod detect;
pub mod eamoco;
pub mod error;
pub mod linalg;
pub mod nn;
pub mod pretrain;
pub mod report;
pub mod rng;
pub mod synth;

pub use data::{ContentLabel, DatasetView, EmbeddingMatrix, EnvDataset, Sample, Split};
pub use error::{Error, Result};
pub use rng::RngHandle;
