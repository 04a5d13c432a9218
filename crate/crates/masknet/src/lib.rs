//! File formats, dataset handling, experiments and the command-line front end
//! for `masknet-core`.

mod codec;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod idx;
pub mod maskfile;
pub mod model;
pub mod report;
pub mod suites;
pub mod synth;

pub use error::{AppError, AppResult};
