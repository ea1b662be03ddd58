//! Transfer-learning engine for population-based structural health monitoring.
//!
//! Structures are attributed graphs living in a metric base space
//! ([`graph`]); each structure owns a stratified data fibre of raw records
//! and derived features ([`fibre`]); parametric families give the base space
//! a continuum structure with contraction maps and geodesics between
//! instances ([`family`]); a small Euler–Bernoulli finite-element oracle
//! populates fibres ([`physics`]); and [`transfer`] moves damage-localisation
//! classifiers between fibres by chained normal-condition re-anchoring along
//! geodesics.

pub mod error;
pub mod family;
pub mod fibre;
pub mod graph;
pub mod par;
pub mod physics;
pub mod transfer;

pub use error::{Error, Result};
