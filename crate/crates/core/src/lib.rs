//! Post-hoc stacking ensemble optimization.
//!
//! Given a pool of fitted base learners and their validation predictions,
//! this crate selects a diverse, accurate subset by relaxing a binary
//! quadratic program, stacks the subset into a multi-layer ensemble trained
//! on out-of-fold predictions (with Dropout and Retain), and searches the
//! ensemble hyperparameters with Bayesian optimization.

pub mod bench;
pub mod blockio;
pub mod data;
pub mod error;
pub mod linalg;
pub mod loss;
pub mod opt;
pub mod seed;
pub mod stack;
pub mod subset;
pub mod synth;
pub mod zoo;

pub use data::{Dataset, Part, PredictionBlock, Schema, Split, TaskKind};
pub use error::{Result, StackError};
