//! Robust multilevel functional forecasting of age-specific mortality for groups of
//! related populations.
//!
//! The pipeline runs
//! [`ingest`] → [`smooth`] → [`multilevel`] (built on [`fpca`]) → [`scorecast`] →
//! [`uncertainty`], and [`eval`] wraps the whole chain in an expanding-window
//! back-test. [`synth`] generates data with known structure for testing.

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod fpca;
pub mod ingest;
pub mod multilevel;
pub mod pipeline;
pub mod scorecast;
pub mod smooth;
pub mod stats;
pub mod synth;
pub mod uncertainty;

pub use error::{Error, Result};
