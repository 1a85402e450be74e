//! Command-line pipeline over the `hredlsh` library.

pub mod binio;
pub mod commands;
pub mod config;
