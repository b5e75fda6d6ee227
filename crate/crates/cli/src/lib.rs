//! Library surface of the asp-forge CLI, exposed for integration tests.

pub mod backend;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod diff;
pub mod report;
pub mod transcripts;
