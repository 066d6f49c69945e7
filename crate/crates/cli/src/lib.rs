//! Command-line pipeline: train, generate, evaluate, analyze.

pub mod archive;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod curve;
