//! Library side of the `c2w` command-line tool.

pub mod commands;
pub mod config;
pub mod gradcheck;
