//! Interaction prediction from partial video observations.
//!
//! Four classifiers score every timestep of a video: a spatial model on the
//! frame's global region, a temporal model on a stack of flow features, and
//! two structural models that run an LSTM over the ordered seven-region
//! context sequence of the frame and of the flow image. Their scores are
//! fused with a learned non-negative weight vector and the per-step labels
//! are combined by majority vote.

pub mod context;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod models;
pub mod numerics;
pub mod prediction;

pub use error::{Error, Result};
