//! Self-supervised video representation learning from temporal continuity.
//!
//! A video clip with a section cut out of its middle carries three free
//! supervision signals: whether the clip is continuous, where the cut sits,
//! and what the excised section looked like in feature space. This crate
//! builds the full pipeline around those signals:
//!
//! - [`datakit`]: frame-directory corpora and a synthetic moving-shapes
//!   generator for desk-scale experiments,
//! - [`sampler`]: clip-triple construction (continuous / discontinuous /
//!   missing section) with temporally consistent augmentation,
//! - [`net`]: a shared 3D-conv backbone with three projection heads,
//! - [`losses`]: the justification, localization, and approximation losses
//!   plus their weighted joint objective,
//! - [`trainer`]: SGD pretraining with checkpointing and metric logs,
//! - [`eval`]: feature extraction, k-NN retrieval, linear probing, and
//!   saliency maps,
//! - [`verify`]: independent scalar oracles and finite-difference gradient
//!   checks backing the `verify` CLI command.
//!
//! All randomness flows from explicit seeds; reruns are bit-reproducible.






pub mod datakit;
pub mod num;
pub mod sampler;
