//! File formats, score-service client and command implementations for the
//! `roomsplat` tool.
//!
//! The numerical work lives in [`roomsplat_core`]; this crate adds
//! everything that touches the outside world: JSON layouts, TOML configs,
//! checkpoints, PNG and depth exports, the HTTP score provider and the
//! toy-denoiser datasets.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod export;
pub mod inputs;
pub mod layout_file;
pub mod remote;
pub mod trajectory;

pub use error::{Error, Result};
