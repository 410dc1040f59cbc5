//! Study drivers around `eki-core`: posterior-oracle validation, contraction
//! and coverage sweeps, figure panels, and the forward/inverse round-trip
//! suite, plus the configuration plumbing shared by the `experiments` binary
//! and the integration tests.

pub mod bands;
pub mod config;
pub mod io;
pub mod studies;
pub mod svg;
