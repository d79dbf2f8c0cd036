//! Command-line runner for `mms-core`: scenario files, experiment grids
//! and report files.

pub mod app;
pub mod config;
pub mod grid;
pub mod output;
pub mod requests;
