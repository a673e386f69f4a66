//! Integrated search over heterogeneous social-science research information.
//!
//! The pipeline runs in stages, each producing an artifact the next one reads:
//! [`ingest`] builds a deduplicated [`ingest::CorpusSnapshot`], [`linkstore`] and
//! [`mentions`] produce the canonical link set, [`search`] builds the inverted
//! index, [`api`] serves it over HTTP, and [`analytics`] evaluates usage logs.

pub mod analytics;
pub mod api;
pub mod artifacts;
pub mod cli;
pub mod clock;
pub mod error;
pub mod ingest;
pub mod linkstore;
pub mod mentions;
pub mod model;
pub mod search;

pub use error::{Error, Result};
pub use model::{Category, CategoryFilter, IdScheme, Record};
