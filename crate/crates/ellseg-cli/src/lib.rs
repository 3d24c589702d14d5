//! I/O, file formats, and command implementations behind the `ellseg`
//! binary. The numerics live in `ellseg-core`; this crate only moves pixels
//! and bytes.

pub mod commands;
pub mod config;
pub mod error;
pub mod imageio;
pub mod overlay;
pub mod rasterio;
pub mod trace;

pub use error::CliError;
