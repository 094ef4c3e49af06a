pub mod error;
pub mod eval;
pub mod experiment;
pub mod explain;
pub mod facial;
pub mod fusion;
pub mod ingest;
pub mod kineme;
pub mod neural;
pub mod numeric;
pub mod pipeline;
pub mod plot;
pub mod speech;
pub mod synth;

pub use error::{Error, Result};
