//! Command-line pipeline for firm productivity analysis: stage runners,
//! artifact bookkeeping, configuration and the Markdown report.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod stages;
pub mod svg;
