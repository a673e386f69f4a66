use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::linkstore::LinkIndex;
use crate::model::{Category, Record};
use crate::search::tokenize::tokenize;

/// Indexed text fields with their score boosts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Title,
    Description,
    Creators,
    TypeSpecific,
    FullText,
}

impl Field {
    pub const ALL: [Field; 5] = [
        Field::Title,
        Field::Description,
        Field::Creators,
        Field::TypeSpecific,
        Field::FullText,
    ];

    pub fn boost(self) -> f64 {
        match self {
            Field::Title => 3.0,
            Field::Creators => 2.0,
            Field::Description => 1.5,
            Field::TypeSpecific | Field::FullText => 1.0,
        }
    }

    /// The raw text of this field for a record.
    pub fn text(self, record: &Record) -> String {
        match self {
            Field::Title => record.title.clone(),
            Field::Description => record.description.clone(),
            Field::Creators => record.creators.join(" "),
            Field::TypeSpecific => record
                .type_specific
                .values()
                .cloned()
                .collect::<Vec<_>>()
                .join(" "),
            Field::FullText => record.full_text.clone().unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldIndex {
    pub postings: BTreeMap<String, Vec<Posting>>,
    pub doc_lengths: Vec<u32>,
    pub avg_length: f64,
}

impl FieldIndex {
    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn term_freq(&self, term: &str, doc: u32) -> u32 {
        self.postings
            .get(term)
            .and_then(|list| {
                list.binary_search_by_key(&doc, |p| p.doc)
                    .ok()
                    .map(|i| list[i].tf)
            })
            .unwrap_or(0)
    }
}

/// Stored per-document values: facets and link badges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocMeta {
    pub id: String,
    pub category: Category,
    pub year: Option<i32>,
    pub source: String,
    pub language: Option<String>,
    pub link_counts: BTreeMap<Category, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IndexSnapshot {
    pub fields: BTreeMap<Field, FieldIndex>,
    pub docs: Vec<DocMeta>,
}

impl IndexSnapshot {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn field(&self, field: Field) -> &FieldIndex {
        &self.fields[&field]
    }

    pub fn ordinal(&self, id: &str) -> Option<u32> {
        self.docs
            .binary_search_by(|d| d.id.as_str().cmp(id))
            .ok()
            .map(|i| i as u32)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        bincode::serialize(self).expect("index serialization is infallible")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        bincode::deserialize(bytes).map_err(|e| e.to_string())
    }
}

/// Builds the index over `records`; ordinals follow record id order.
pub fn build_index(records: &BTreeMap<String, Record>, links: &LinkIndex) -> IndexSnapshot {
    let mut index = IndexSnapshot {
        fields: Field::ALL
            .iter()
            .map(|f| (*f, FieldIndex::default()))
            .collect(),
        docs: Vec::with_capacity(records.len()),
    };
    for (ordinal, record) in records.values().enumerate() {
        let doc = ordinal as u32;
        for field in Field::ALL {
            let tokens = tokenize(&field.text(record));
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for t in &tokens {
                *counts.entry(t.clone()).or_default() += 1;
            }
            let fi = index.fields.get_mut(&field).expect("all fields present");
            fi.doc_lengths.push(tokens.len() as u32);
            for (term, tf) in counts {
                fi.postings
                    .entry(term)
                    .or_default()
                    .push(Posting { doc, tf });
            }
        }
        let link_counts = links
            .summary(&record.id)
            .map(|s| s.by_category.clone())
            .unwrap_or_else(|| Category::ALL.iter().map(|c| (*c, 0)).collect());
        index.docs.push(DocMeta {
            id: record.id.clone(),
            category: record.category,
            year: record.year,
            source: record.source.clone(),
            language: record.language.clone(),
            link_counts,
        });
    }
    let n = index.docs.len();
    for fi in index.fields.values_mut() {
        let total: u64 = fi.doc_lengths.iter().map(|&l| u64::from(l)).sum();
        fi.avg_length = if n == 0 { 0.0 } else { total as f64 / n as f64 };
    }
    index
}
