//! File formats, chain persistence and the `hdp-lpcm` command-line tool for
//! the HDP latent position clustering model.
//!
//! The sampler, summaries and simulators live in `hdp_lpcm_core`; this crate
//! adds everything that touches the file system:
//!
//! * [`edgelist`]: delimited `t,i,j[,w]` edge lists.
//! * [`chain_io`]: JSON-lines and length-prefixed binary chain files.
//! * [`bundle`]: output directories with a manifest, renamed into place
//!   once complete.
//! * [`config`]: the TOML run configuration.
//! * [`simulate`], [`fit`] and [`report`]: the commands.

pub mod bundle;
pub mod chain_io;
pub mod config;
pub mod edgelist;
mod error;
pub mod fit;
pub mod report;
pub mod simulate;
pub mod tables;

pub use error::{Error, Result, EXIT_INPUT, EXIT_NUMERICAL, EXIT_USAGE};
