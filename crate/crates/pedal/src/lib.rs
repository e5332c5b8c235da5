pub mod cli;
pub mod config;
pub mod embeddings;
pub mod error;
pub mod ingest;
pub mod journal;
pub mod output;
pub mod plot;
pub mod service;

pub use error::{Error, Result};
pub use pedal_core as core;
