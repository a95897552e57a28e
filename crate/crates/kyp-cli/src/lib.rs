//! Command-line front end for the KYP-SDP solver: problem file I/O and the
//! validate / solve / synth / bench subcommands.

pub mod bench;
pub mod commands;
pub mod files;

pub use commands::CliError;
