//! Command line and HTTP front ends for the replanning core.

pub mod cli;
pub mod server;
pub mod sessions;
