//! Label-based augmentation policy search at desk scale.
//!
//! The pieces, bottom up:
//!
//! - [`nn`]: a small feedforward stack (dense / 3x3 conv / 2x2 average pool /
//!   relu / dropout / sigmoid / row softmax) with reverse-mode gradients,
//!   SGD-momentum and Adam, and a finite-difference gradient checker.
//! - [`augment`]: the 16-operator search space with discrete calling-probability
//!   and magnitude grids, and stochastic policy application.
//! - [`data`]: core dataset types, PNG + CSV storage, and a synthetic
//!   multi-label generator with planted, label-dependent operator sensitivities.
//! - [`folds`]: K independent stratified train splits and their unioned
//!   evaluation set.
//! - [`critic`]: per-fold multi-label classifiers and the loss-gain reward.
//! - [`actor`]: the label-to-policy network, categorical action sampling, and
//!   the policy-gradient training loop.
//! - [`metrics`]: multi-label evaluation (mA, Accu, F1, mAP, CF1, OF1) and the
//!   per-label gain/drop study.
//! - [`pipeline`]: end-to-end orchestration, baselines, the brute-force policy
//!   oracle, ablation sweeps, and report output.

pub mod actor;
pub mod augment;
pub mod critic;
pub mod data;
pub mod error;
pub mod folds;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod seeds;

pub use error::{Error, Result};
