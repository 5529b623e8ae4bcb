//! Runners, file formats and the command-line front end built on
//! `attncap-core`.
//!
//! The binary `attncap` is a thin wrapper around [`cli::dispatch`].

pub mod cli;
pub mod config;
pub mod io;
pub mod manifest;
pub mod plot;
pub mod run;
