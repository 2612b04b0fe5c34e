pub mod error;
pub mod geo;
pub mod hplp;
pub mod ingest;
pub mod landscape;
pub mod pcm;
pub mod pipeline;
pub mod rng;
pub mod scenario;
pub mod service;
pub mod uncertainty;

pub use error::{Diagnostic, Error, Result};
