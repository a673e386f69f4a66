use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Category, CategoryFilter, MaterialKind, Record};
use crate::search::index::{DocMeta, Field, IndexSnapshot};
use crate::search::snippet::make_snippet;
use crate::search::tokenize::tokenize;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;
pub const MAX_LIMIT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacetField {
    Year,
    Source,
    Language,
}

impl FacetField {
    pub const ALL: [FacetField; 3] = [FacetField::Year, FacetField::Source, FacetField::Language];

    pub fn as_str(self) -> &'static str {
        match self {
            FacetField::Year => "year",
            FacetField::Source => "source",
            FacetField::Language => "language",
        }
    }

    pub fn value(self, doc: &DocMeta) -> Option<String> {
        match self {
            FacetField::Year => doc.year.map(|y| y.to_string()),
            FacetField::Source => Some(doc.source.clone()),
            FacetField::Language => doc.language.clone(),
        }
    }
}

impl FromStr for FacetField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FacetField::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown facet `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchQuery {
    pub terms: Vec<String>,
    pub category: CategoryFilter,
    pub facet_filters: BTreeMap<FacetField, BTreeSet<String>>,
    pub offset: usize,
    pub limit: usize,
}

impl SearchQuery {
    /// Query over the tokens of `text`, all categories, first page of ten.
    pub fn parse(text: &str) -> Self {
        SearchQuery {
            terms: tokenize(text),
            category: CategoryFilter::All,
            facet_filters: BTreeMap::new(),
            offset: 0,
            limit: 10,
        }
    }

    pub fn category(mut self, category: CategoryFilter) -> Self {
        self.category = category;
        self
    }

    pub fn page(mut self, offset: usize, limit: usize) -> Self {
        self.offset = offset;
        self.limit = limit;
        self
    }

    pub fn filter(mut self, field: FacetField, value: impl Into<String>) -> Self {
        self.facet_filters
            .entry(field)
            .or_default()
            .insert(value.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.limit == 0 || self.limit > MAX_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "limit must be in 1..={MAX_LIMIT}, got {}",
                self.limit
            )));
        }
        Ok(())
    }

    fn distinct_terms(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.terms
            .iter()
            .filter(|t| seen.insert(t.as_str()))
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    pub category: Category,
    pub title: String,
    pub creators: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    pub source: String,
    pub materials: Vec<MaterialKind>,
    pub score: f64,
    pub snippet: String,
    pub link_counts: BTreeMap<Category, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub total_by_category: BTreeMap<Category, usize>,
    /// Matches in the active category (after facet filters).
    pub total: usize,
    pub hits: Vec<Hit>,
    pub facets: BTreeMap<FacetField, BTreeMap<String, usize>>,
}

/// BM25 contribution of one term in one field of one document.
pub fn bm25(tf: f64, doc_freq: f64, doc_count: f64, doc_len: f64, avg_len: f64) -> f64 {
    let idf = (1.0 + (doc_count - doc_freq + 0.5) / (doc_freq + 0.5)).ln();
    let norm = if avg_len > 0.0 {
        doc_len / avg_len
    } else {
        0.0
    };
    idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * norm))
}

fn score(index: &IndexSnapshot, terms: &[String], doc: u32) -> f64 {
    let n = index.len() as f64;
    let mut total = 0.0;
    for field in Field::ALL {
        let fi = index.field(field);
        for term in terms {
            let tf = fi.term_freq(term, doc);
            if tf == 0 {
                continue;
            }
            let dl = f64::from(fi.doc_lengths[doc as usize]);
            total += field.boost()
                * bm25(
                    f64::from(tf),
                    fi.doc_freq(term) as f64,
                    n,
                    dl,
                    fi.avg_length,
                );
        }
    }
    total
}

/// Sorted ordinals of documents containing `term` in at least one field.
fn term_docs(index: &IndexSnapshot, term: &str) -> Vec<u32> {
    let mut docs: Vec<u32> = Field::ALL
        .iter()
        .filter_map(|f| index.field(*f).postings.get(term))
        .flat_map(|list| list.iter().map(|p| p.doc))
        .collect();
    docs.sort_unstable();
    docs.dedup();
    docs
}

fn intersect(a: &[u32], b: &[u32]) -> Vec<u32> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Ordinals matching every term (all documents when there are no terms).
pub fn matching_docs(index: &IndexSnapshot, terms: &[String]) -> Vec<u32> {
    let mut lists: Vec<Vec<u32>> = terms.iter().map(|t| term_docs(index, t)).collect();
    lists.sort_by_key(Vec::len);
    let mut iter = lists.into_iter();
    match iter.next() {
        None => (0..index.len() as u32).collect(),
        Some(first) => iter.fold(first, |acc, list| intersect(&acc, &list)),
    }
}

fn passes(
    doc: &DocMeta,
    filters: &BTreeMap<FacetField, BTreeSet<String>>,
    skip: Option<FacetField>,
) -> bool {
    filters.iter().all(|(field, allowed)| {
        Some(*field) == skip
            || allowed.is_empty()
            || field.value(doc).is_some_and(|v| allowed.contains(&v))
    })
}

/// Runs a conjunctive query. `records` supplies stored fields for hits and snippets.
pub fn execute_query(
    index: &IndexSnapshot,
    records: &BTreeMap<String, Record>,
    q: &SearchQuery,
) -> Result<SearchResult> {
    q.validate()?;
    let terms = q.distinct_terms();
    let matched = matching_docs(index, &terms);

    let mut total_by_category: BTreeMap<Category, usize> =
        Category::ALL.iter().map(|c| (*c, 0)).collect();
    let mut active = Vec::new();
    for &doc in &matched {
        let meta = &index.docs[doc as usize];
        if passes(meta, &q.facet_filters, None) {
            *total_by_category.entry(meta.category).or_default() += 1;
            if q.category.admits(meta.category) {
                active.push(doc);
            }
        }
    }

    let mut facets = BTreeMap::new();
    for field in FacetField::ALL {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for &doc in &matched {
            let meta = &index.docs[doc as usize];
            if q.category.admits(meta.category) && passes(meta, &q.facet_filters, Some(field)) {
                if let Some(v) = field.value(meta) {
                    *counts.entry(v).or_default() += 1;
                }
            }
        }
        facets.insert(field, counts);
    }

    let mut scored: Vec<(f64, u32)> = active
        .iter()
        .map(|&d| (score(index, &terms, d), d))
        .collect();
    scored.sort_by(|(sa, da), (sb, db)| {
        let (ma, mb) = (&index.docs[*da as usize], &index.docs[*db as usize]);
        sb.total_cmp(sa)
            .then(mb.year.cmp(&ma.year))
            .then_with(|| ma.id.cmp(&mb.id))
    });

    let hits = scored
        .iter()
        .skip(q.offset)
        .take(q.limit)
        .map(|&(score, doc)| {
            let meta = &index.docs[doc as usize];
            let record = records.get(&meta.id);
            Hit {
                id: meta.id.clone(),
                category: meta.category,
                title: record.map(|r| r.title.clone()).unwrap_or_default(),
                creators: record.map(|r| r.creators.clone()).unwrap_or_default(),
                year: meta.year,
                source: meta.source.clone(),
                materials: record
                    .map(|r| {
                        let kinds: BTreeSet<MaterialKind> =
                            r.materials.iter().map(|m| m.kind).collect();
                        kinds.into_iter().collect()
                    })
                    .unwrap_or_default(),
                score,
                snippet: record.map(|r| make_snippet(r, &terms)).unwrap_or_default(),
                link_counts: meta.link_counts.clone(),
            }
        })
        .collect();

    Ok(SearchResult {
        total_by_category,
        total: scored.len(),
        hits,
        facets,
    })
}
