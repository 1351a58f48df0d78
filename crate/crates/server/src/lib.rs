//! HTTP service and command-line front end for the tutoring engine.

pub mod api;
pub mod cli;

pub use api::{router, AppState};
