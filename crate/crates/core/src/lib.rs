//! Pre-ictal vs. interictal classification of multichannel wearable
//! physiological recordings with 1D-CNN and bidirectional LSTM models.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod nn;
pub mod training;

pub use error::{Error, Result};
