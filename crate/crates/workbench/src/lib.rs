//! File formats, dataset import, rendering, reports and the `commonground`
//! command-line interface on top of the `commonground` core crate.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod corpus_io;
pub mod error;
pub mod import;
pub mod io;
pub mod parallel;
pub mod pipeline;
pub mod render;
pub mod report;

pub use error::{Error, Result};
