//! anonybench: a benchmark for de-anonymizing heterogeneous social
//! data. It generates a synthetic social world (graph + posts),
//! publishes an anonymized release under four case configurations
//! (neither aspect, text only, structure only, both), and runs a
//! query-only re-identification attack against each case to measure how
//! much protection the anonymizers actually provide.

pub mod anon_graph;
pub mod anon_text;
pub mod attack;
pub mod error;
pub mod harness;
pub mod io;
pub mod model;
pub mod platform;
pub mod synth;
pub mod tfidf;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
