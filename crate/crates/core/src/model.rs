//! Common metadata schema shared by every stage of the pipeline.
//!
//! A [`Record`] is one information item (study, publication, question,
//! instrument, web page or library record) in a Dublin-Core-like flat layout.
//! Identifier normalization and deduplication keys live here because ingest,
//! link resolution and the literature pool all have to agree on them.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The six concrete content categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    ResearchData,
    Publication,
    QuestionVariable,
    InstrumentTool,
    WebPage,
    LibraryRecord,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::ResearchData,
        Category::Publication,
        Category::QuestionVariable,
        Category::InstrumentTool,
        Category::WebPage,
        Category::LibraryRecord,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::ResearchData => "research_data",
            Category::Publication => "publication",
            Category::QuestionVariable => "question_variable",
            Category::InstrumentTool => "instrument_tool",
            Category::WebPage => "web_page",
            Category::LibraryRecord => "library_record",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidCategory(s.to_string()))
    }
}

/// Category selector used by queries: a concrete category or `all`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CategoryFilter {
    #[default]
    All,
    Only(Category),
}

impl CategoryFilter {
    pub fn admits(self, category: Category) -> bool {
        match self {
            CategoryFilter::All => true,
            CategoryFilter::Only(c) => c == category,
        }
    }
}

impl FromStr for CategoryFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            Ok(CategoryFilter::All)
        } else {
            s.parse().map(CategoryFilter::Only)
        }
    }
}

impl fmt::Display for CategoryFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CategoryFilter::All => f.write_str("all"),
            CategoryFilter::Only(c) => c.fmt(f),
        }
    }
}

impl Serialize for CategoryFilter {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CategoryFilter {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Identifier schemes, declared in dedup priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdScheme {
    Doi,
    Dara,
    Urn,
    SourceLocal,
}

impl IdScheme {
    pub const ALL: [IdScheme; 4] = [
        IdScheme::Doi,
        IdScheme::Dara,
        IdScheme::Urn,
        IdScheme::SourceLocal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IdScheme::Doi => "doi",
            IdScheme::Dara => "dara",
            IdScheme::Urn => "urn",
            IdScheme::SourceLocal => "source_local",
        }
    }
}

impl FromStr for IdScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IdScheme::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidIdentifier(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    Dataset,
    Codebook,
    Questionnaire,
    Fulltext,
    MethodReport,
    Other,
}

impl MaterialKind {
    /// Unknown kinds collapse to `Other`.
    pub fn parse_lenient(s: &str) -> Self {
        match s.trim().to_lowercase().as_str() {
            "dataset" => MaterialKind::Dataset,
            "codebook" => MaterialKind::Codebook,
            "questionnaire" => MaterialKind::Questionnaire,
            "fulltext" | "full_text" => MaterialKind::Fulltext,
            "method_report" => MaterialKind::MethodReport,
            _ => MaterialKind::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Material {
    pub kind: MaterialKind,
    pub url: String,
}

/// One information item in the common schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    #[serde(default)]
    pub external_ids: BTreeMap<IdScheme, String>,
    pub category: Category,
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub creators: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rights: Option<String>,
    #[serde(default)]
    pub materials: Vec<Material>,
    #[serde(default)]
    pub type_specific: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_text: Option<String>,
}

pub const YEAR_RANGE: std::ops::RangeInclusive<i32> = 1800..=2100;

impl Record {
    /// Minimal record; remaining fields start empty.
    pub fn new(
        id: impl Into<String>,
        category: Category,
        title: impl Into<String>,
        source: impl Into<String>,
    ) -> Self {
        Record {
            id: id.into(),
            external_ids: BTreeMap::new(),
            category,
            title: title.into(),
            description: String::new(),
            creators: Vec::new(),
            year: None,
            language: None,
            source: source.into(),
            rights: None,
            materials: Vec::new(),
            type_specific: BTreeMap::new(),
            full_text: None,
        }
    }

    pub fn doi(&self) -> Option<&str> {
        self.external_ids.get(&IdScheme::Doi).map(String::as_str)
    }

    /// Checks the structural invariants that the type system does not enforce.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if self.title.trim().is_empty() {
            return Err("title-required".into());
        }
        if let Some(y) = self.year {
            if !YEAR_RANGE.contains(&y) {
                return Err(format!("year {y} outside [1800, 2100]"));
            }
        }
        Ok(())
    }
}

/// Where a source file lives and how to read it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDescriptor {
    pub key: String,
    pub path: PathBuf,
    #[serde(default)]
    pub format: SourceFormat,
    pub default_category: Category,
    #[serde(default)]
    pub field_map: BTreeMap<String, String>,
    #[serde(default)]
    pub priority: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SourceFormat {
    #[default]
    #[serde(rename = "records-jsonl")]
    RecordsJsonl,
}

/// Schema fields a `field_map` may target. `type_specific.<key>` is also allowed.
pub const SCHEMA_FIELDS: &[&str] = &[
    "id",
    "title",
    "description",
    "creators",
    "year",
    "language",
    "rights",
    "category",
    "doi",
    "dara",
    "urn",
    "source_local",
    "materials",
    "type_specific",
    "full_text",
];

pub fn is_schema_field(name: &str) -> bool {
    SCHEMA_FIELDS.contains(&name)
        || name
            .strip_prefix("type_specific.")
            .is_some_and(|k| !k.is_empty())
}

/// Reserved source key for records created by the literature pool.
pub const POOL_SOURCE: &str = "pool";

impl SourceDescriptor {
    pub fn validate(&self) -> Result<()> {
        let key_ok = !self.key.is_empty()
            && self
                .key
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.');
        if !key_ok {
            return Err(Error::Config(format!("invalid source key `{}`", self.key)));
        }
        if self.key == POOL_SOURCE {
            return Err(Error::Config(format!(
                "source key `{POOL_SOURCE}` is reserved"
            )));
        }
        for (from, to) in &self.field_map {
            if !is_schema_field(to) {
                return Err(Error::Config(format!(
                    "source `{}`: field_map `{from}` targets unknown schema field `{to}`",
                    self.key
                )));
            }
        }
        Ok(())
    }
}

const DOI_PREFIXES: &[&str] = &[
    "https://doi.org/",
    "http://doi.org/",
    "https://dx.doi.org/",
    "http://dx.doi.org/",
    "doi:",
];

/// Canonical form of an identifier: trimmed and lowercased, DOIs without resolver prefix.
pub fn normalize_identifier(scheme: IdScheme, raw: &str) -> Result<String> {
    let mut value = raw.trim().to_lowercase();
    if scheme == IdScheme::Doi {
        while let Some(rest) = DOI_PREFIXES.iter().find_map(|p| value.strip_prefix(p)) {
            value = rest.trim().to_string();
        }
    }
    if value.is_empty() {
        return Err(Error::InvalidIdentifier(format!(
            "empty {} identifier",
            scheme.as_str()
        )));
    }
    Ok(value)
}

/// Lowercase, drop punctuation, collapse whitespace.
pub fn normalize_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        let cleaned: String = word
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        if cleaned.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&cleaned);
    }
    out
}

/// Surname of a creator string: the part before a comma, else the last word.
pub fn creator_surname(creator: &str) -> String {
    let part = match creator.split_once(',') {
        Some((surname, _)) => surname,
        None => creator.split_whitespace().last().unwrap_or(""),
    };
    normalize_text(part)
}

/// Key under which duplicate records are grouped.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DedupKey(pub String);

impl fmt::Display for DedupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn composite_key(title: &str, year: Option<i32>, first_creator: Option<&str>) -> DedupKey {
    let year = year.map(|y| y.to_string()).unwrap_or_default();
    let surname = first_creator.map(creator_surname).unwrap_or_default();
    DedupKey(format!(
        "composite:{}|{}|{}",
        normalize_text(title),
        year,
        surname
    ))
}

pub fn dedup_key(record: &Record) -> DedupKey {
    // BTreeMap iteration follows IdScheme's declaration order: doi > dara > urn > source_local.
    if let Some((scheme, value)) = record.external_ids.iter().next() {
        return DedupKey(format!("{}:{}", scheme.as_str(), value));
    }
    composite_key(
        &record.title,
        record.year,
        record.creators.first().map(String::as_str),
    )
}
