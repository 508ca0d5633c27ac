//! File formats, configuration and the Monte-Carlo benchmark harness around
//! [`densiscope_core`].
//!
//! - [`curves`]: curve tables as CSV (grid column plus one column per curve).
//! - [`config`]: JSON or flat `key = value` configuration files.
//! - [`records`]: JSON-lines detection records, multi-detection reports and
//!   simulation manifests.
//! - [`model`]: a self-describing JSON container for fitted regression models.
//! - [`experiments`]: seeded, parallel reproductions of the benchmark tables.

pub mod config;
pub mod curves;
pub mod experiments;
pub mod model;
pub mod records;

pub use densiscope_core as core;
