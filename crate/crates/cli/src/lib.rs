//! Library surface of the CLI so the commands, config and file formats
//! are testable in-process.

pub mod commands;
pub mod config;
pub mod error;
pub mod files;
pub mod reference;
