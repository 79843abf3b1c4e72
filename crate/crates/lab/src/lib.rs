//! File formats, parallel execution and the `qklab` command line on top of
//! `qklab-core`.

pub mod bench;
pub mod cli;
pub mod config;
pub mod csvio;
pub mod diagnose;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod persist;
pub mod pipeline;
pub mod report;
