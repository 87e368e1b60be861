//! Learning pouring motions from demonstrations with small LSTM networks.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which the training and evaluation pipeline uses.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dataset;
pub mod error;
pub mod eval;
pub mod generate;
pub mod linalg;
pub mod lstm;
pub mod network;
pub mod optim;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Vector = linalg::Vector<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type LstmParams = lstm::LstmParams<f64>;
pub type NetworkParams = network::NetworkParams<f64>;
pub type NetworkBundle = network::NetworkBundle<f64>;
pub type SequenceBatch = network::SequenceBatch<f64>;
pub type GeneratedTrajectory = generate::GeneratedTrajectory<f64>;
