//! Transfer of damage localisers between structures.
//!
//! Features of a target structure are carried into a source structure's
//! feature frame by a chain of affine re-anchorings along the geodesic
//! between them ([`ddt_map`]). A classifier trained on the source then
//! scores the mapped target data. Long transfers may be split at an
//! interpolating structure ([`two_step_map`]); a shared-frame alignment
//! ([`domain_adaptation_baseline`]) serves as the comparator, and
//! [`calibrate_threshold`] turns a campaign of (distance, accuracy) pairs
//! into a distance threshold.

mod affine;
mod calibrate;
mod ddt;
mod domain;
mod evaluate;
mod knn;

pub use affine::{AffineStep, TransferMap};
pub use calibrate::{calibrate_threshold, isotonic_decreasing, Calibration, MIN_PAIRS};
pub use ddt::{ddt_map, theta_key, two_step_map, DdtOptions, Oracle, Participant, PhysicsOracle, TwoStepMap};
pub use domain::{moments, nca, nca_with, Alignment, Domain, Moments, HEALTHY};
pub use evaluate::{
    confusion, cross_validate, domain_adaptation_baseline, evaluate_transfer, in_domain_accuracy, register_interpolant, run_pair,
    Confusion, DaModel, Evaluation, PairOptions, PairOutcome, TransferReport,
};
pub use knn::{accuracy, train_localiser, ClassifierConfig, Prediction, Task, Weighting};
