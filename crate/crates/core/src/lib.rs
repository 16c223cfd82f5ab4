//! Semi-supervised hierarchical merge tree segmentation.
//!
//! Pipeline: membrane confidence map → [`watershed`] superpixels →
//! [`mergetree`] agglomeration → per-clique [`features`] → boundary
//! classifier training in [`learner`] (supervised, or semi-supervised with a
//! merge-consistency likelihood) → greedy [`inference`] → [`metrics`].

pub mod cli;
pub mod data;
pub mod error;
pub mod experiment;
pub mod features;
pub mod inference;
pub mod labeling;
pub mod learner;
pub mod mergetree;
pub mod metrics;
pub mod pipeline;
pub mod watershed;

pub use error::{Error, Result};
