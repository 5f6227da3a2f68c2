//! Library surface of the command-line front end, exposed for integration
//! tests: scenario parsing and the subcommand runners.

pub mod commands;
pub mod scenario;
