//! Adaptive psychometric tutoring engine.
//!
//! - [`irt`]: 2PL response model, ability estimation, adaptive selection, calibration.
//! - [`knowledge`]: per-construct mastery tracing, EM fitting, sentiment features.
//! - [`profile`]: indicator scoring, the student profile, PCA, Metropolis-Hastings refinement.
//! - [`policy`]: presentation mapping, UCB, Q-learning, difficulty rules.
//! - [`bank`]: item bank files, validation, rendering.
//! - [`sim`]: simulated students and experiments.
//! - [`session`]: the event-sourced tutoring session.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Matrix and lattice loops read better indexed.
#![allow(clippy::needless_range_loop)]

pub mod bank;
pub mod config;
pub mod irt;
pub mod knowledge;
pub mod policy;
pub mod profile;
pub mod session;
pub mod sim;
