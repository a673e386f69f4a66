//! Inverted index with BM25 field scoring, per-category hit counts, facets and
//! highlighted snippets.

pub mod index;
pub mod query;
pub mod snippet;
pub mod tokenize;

pub use index::{build_index, Field, IndexSnapshot};
pub use query::{execute_query, FacetField, Hit, SearchQuery, SearchResult, MAX_LIMIT};
pub use snippet::make_snippet;
pub use tokenize::tokenize;
