//! Local HTTP service and command line over the `gazekit` engine.
//!
//! A [`workspace::Workspace`] is a directory holding uploaded recordings, an
//! index and cached analysis artifacts. Analyses are keyed by
//! `(recording id, kind, canonical parameters)`; asking twice returns the
//! stored artifact unchanged. [`http::router`] exposes the workspace over
//! HTTP and [`cli`] drives the same [`analysis`] code from files.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod http;
pub mod workspace;

pub use error::{ApiError, ErrorBody};
