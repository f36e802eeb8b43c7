//! File formats, checkpoints and the command-line workflow around
//! [`qigl_core`].

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod fsutil;
pub mod image_io;
pub mod metrics;

pub use checkpoint::Checkpoint;
pub use config::{DataSource, Overrides, RunConfig};
pub use error::{Error, Result};
