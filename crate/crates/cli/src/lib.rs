//! Config-driven front end for `hmsem`.

pub mod config;
pub mod run;
