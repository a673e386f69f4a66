//! Source loading, normalization and the deduplicating rebuild.
//!
//! Every build starts from scratch: all source files are read, each line is
//! mapped onto the common schema, and records sharing a [`DedupKey`] are folded
//! together in source-priority order. Bad lines are reported, never fatal.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{
    dedup_key, is_schema_field, normalize_identifier, Category, DedupKey, IdScheme, Material,
    MaterialKind, Record, SourceDescriptor, YEAR_RANGE,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", content = "detail", rename_all = "kebab-case")]
pub enum RejectReason {
    Malformed(String),
    TitleRequired,
    IdRequired,
    DuplicateId(String),
    UnknownCategory(String),
    InvalidIdentifier(String),
    InvalidYear(String),
    InvalidLanguage(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectReport {
    pub line: usize,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCounts {
    pub read: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub merged: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceReject {
    pub source: String,
    #[serde(flatten)]
    pub report: RejectReport,
}

/// Output of one full rebuild.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSnapshot {
    pub records: BTreeMap<String, Record>,
    pub built_at: DateTime<Utc>,
    pub source_report: BTreeMap<String, SourceCounts>,
    pub rejects: Vec<SourceReject>,
    /// Ids of records folded into another record, mapped to the surviving id.
    pub id_aliases: BTreeMap<String, String>,
}

impl CorpusSnapshot {
    pub fn empty(built_at: DateTime<Utc>) -> Self {
        CorpusSnapshot {
            records: BTreeMap::new(),
            built_at,
            source_report: BTreeMap::new(),
            rejects: Vec::new(),
            id_aliases: BTreeMap::new(),
        }
    }

    /// Resolves an internal id, following merge aliases.
    pub fn get(&self, id: &str) -> Option<&Record> {
        self.records.get(id).or_else(|| {
            self.id_aliases
                .get(id)
                .and_then(|target| self.records.get(target))
        })
    }

    /// Canonical serialization: one record per line, sorted by id.
    pub fn canonical_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for record in self.records.values() {
            serde_json::to_writer(&mut out, record).expect("record serialization is infallible");
            out.push(b'\n');
        }
        out
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_jsonl()))
    }
}

#[derive(Debug, Default)]
pub struct LoadOutcome {
    pub records: Vec<Record>,
    pub rejects: Vec<RejectReport>,
    pub read: usize,
}

/// Reads one records file and maps every line onto the common schema.
pub fn load_and_normalize<R: BufRead>(
    descriptor: &SourceDescriptor,
    mut reader: R,
) -> Result<LoadOutcome> {
    let mut outcome = LoadOutcome::default();
    let mut seen_ids = HashSet::new();
    let mut buf = Vec::new();
    let mut line_no = 0usize;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = match std::str::from_utf8(&buf) {
            Ok(s) => s.trim(),
            Err(e) => {
                outcome.read += 1;
                outcome.rejects.push(RejectReport {
                    line: line_no,
                    reason: RejectReason::Malformed(format!("invalid UTF-8: {e}")),
                });
                continue;
            }
        };
        if line.is_empty() {
            continue;
        }
        outcome.read += 1;
        match normalize_line(descriptor, line) {
            Ok(record) => {
                if seen_ids.insert(record.id.clone()) {
                    outcome.records.push(record);
                } else {
                    outcome.rejects.push(RejectReport {
                        line: line_no,
                        reason: RejectReason::DuplicateId(record.id),
                    });
                }
            }
            Err(reason) => outcome.rejects.push(RejectReport {
                line: line_no,
                reason,
            }),
        }
    }
    Ok(outcome)
}

fn scalar_string(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn parse_year(value: &Value) -> std::result::Result<i32, RejectReason> {
    let year = match value {
        Value::Number(n) => n.as_i64().and_then(|y| i32::try_from(y).ok()),
        Value::String(s) => {
            let digits: String = s.trim().chars().take(4).collect();
            if digits.len() == 4 && digits.chars().all(|c| c.is_ascii_digit()) {
                digits.parse().ok()
            } else {
                None
            }
        }
        _ => None,
    };
    match year {
        Some(y) if YEAR_RANGE.contains(&y) => Ok(y),
        _ => Err(RejectReason::InvalidYear(value.to_string())),
    }
}

fn parse_external_id(
    scheme: IdScheme,
    value: &Value,
) -> std::result::Result<Option<String>, RejectReason> {
    match scalar_string(value) {
        Some(raw) => normalize_identifier(scheme, &raw)
            .map(Some)
            .map_err(|e| RejectReason::InvalidIdentifier(e.to_string())),
        None if value.is_null() => Ok(None),
        None => Err(RejectReason::InvalidIdentifier(format!(
            "{} must be a string",
            scheme.as_str()
        ))),
    }
}

fn parse_materials(value: &Value) -> std::result::Result<Vec<Material>, RejectReason> {
    let Value::Array(items) = value else {
        return Err(RejectReason::Malformed("materials must be a list".into()));
    };
    let mut out = Vec::new();
    for item in items {
        let url = item
            .get("url")
            .and_then(scalar_string)
            .filter(|u| !u.is_empty());
        let kind = item.get("kind").and_then(Value::as_str).unwrap_or("other");
        match url {
            Some(url) => out.push(Material {
                kind: MaterialKind::parse_lenient(kind),
                url,
            }),
            None => return Err(RejectReason::Malformed("material without url".into())),
        }
    }
    Ok(out)
}

fn normalize_line(
    descriptor: &SourceDescriptor,
    line: &str,
) -> std::result::Result<Record, RejectReason> {
    let object: Map<String, Value> =
        serde_json::from_str(line).map_err(|e| RejectReason::Malformed(e.to_string()))?;

    let mut row_id = None;
    let mut title = None;
    let mut record = Record::new(
        String::new(),
        descriptor.default_category,
        String::new(),
        descriptor.key.clone(),
    );

    for (field, value) in &object {
        if value.is_null() {
            continue;
        }
        let target = descriptor
            .field_map
            .get(field)
            .map(String::as_str)
            .unwrap_or(field);
        match target {
            "id" => row_id = scalar_string(value).filter(|s| !s.is_empty()),
            "title" => title = scalar_string(value).filter(|s| !s.is_empty()),
            "description" => record.description = scalar_string(value).unwrap_or_default(),
            "rights" => record.rights = scalar_string(value).filter(|s| !s.is_empty()),
            "full_text" => record.full_text = scalar_string(value).filter(|s| !s.is_empty()),
            "creators" => {
                record.creators = match value {
                    Value::Array(items) => items
                        .iter()
                        .filter_map(scalar_string)
                        .filter(|s| !s.is_empty())
                        .collect(),
                    other => scalar_string(other)
                        .filter(|s| !s.is_empty())
                        .into_iter()
                        .collect(),
                }
            }
            "year" => record.year = Some(parse_year(value)?),
            "language" => {
                let code = scalar_string(value).unwrap_or_default().to_lowercase();
                if code.len() != 2 || !code.chars().all(|c| c.is_ascii_lowercase()) {
                    return Err(RejectReason::InvalidLanguage(code));
                }
                record.language = Some(code);
            }
            "category" => {
                let name = scalar_string(value).unwrap_or_default();
                record.category = name
                    .parse::<Category>()
                    .map_err(|_| RejectReason::UnknownCategory(name.clone()))?;
            }
            "doi" | "dara" | "urn" | "source_local" => {
                let scheme: IdScheme = target.parse().expect("matched scheme name");
                if let Some(id) = parse_external_id(scheme, value)? {
                    record.external_ids.insert(scheme, id);
                }
            }
            "external_ids" => {
                let Value::Object(ids) = value else {
                    return Err(RejectReason::Malformed(
                        "external_ids must be an object".into(),
                    ));
                };
                for (scheme, raw) in ids {
                    let scheme: IdScheme = scheme
                        .parse()
                        .map_err(|e: Error| RejectReason::InvalidIdentifier(e.to_string()))?;
                    if let Some(id) = parse_external_id(scheme, raw)? {
                        record.external_ids.insert(scheme, id);
                    }
                }
            }
            "materials" => record.materials = parse_materials(value)?,
            "type_specific" => {
                if let Value::Object(map) = value {
                    for (k, v) in map {
                        if let Some(s) = scalar_string(v) {
                            record.type_specific.insert(k.clone(), s);
                        }
                    }
                }
            }
            other => {
                let key = other.strip_prefix("type_specific.").unwrap_or(other);
                if !is_schema_field(other) || other.starts_with("type_specific.") {
                    if let Some(s) = scalar_string(value) {
                        record.type_specific.insert(key.to_string(), s);
                    }
                }
            }
        }
    }

    let row_id = row_id.ok_or(RejectReason::IdRequired)?;
    record.title = title.ok_or(RejectReason::TitleRequired)?;
    record.id = format!("{}-{}", descriptor.key, row_id);
    record.materials.sort();
    record.materials.dedup();
    Ok(record)
}

/// Source priorities used to decide which record wins a scalar-field conflict.
pub type SourcePriorities = BTreeMap<String, u32>;

fn rank<'a>(record: &'a Record, priorities: &SourcePriorities) -> (u32, &'a str, &'a str) {
    let priority = priorities.get(&record.source).copied().unwrap_or(u32::MAX);
    (priority, record.source.as_str(), record.id.as_str())
}

/// Folds two duplicates into one record.
pub fn merge_records(a: &Record, b: &Record, priorities: &SourcePriorities) -> Result<Record> {
    let (ka, kb) = (dedup_key(a), dedup_key(b));
    if ka != kb {
        return Err(Error::MergePrecondition {
            left: ka.0,
            right: kb.0,
        });
    }
    let (win, lose) = if rank(b, priorities) < rank(a, priorities) {
        (b, a)
    } else {
        (a, b)
    };

    let mut merged = win.clone();
    merged.id = a.id.clone().min(b.id.clone());
    for (scheme, value) in &lose.external_ids {
        merged
            .external_ids
            .entry(*scheme)
            .or_insert_with(|| value.clone());
    }
    if merged.description.is_empty() {
        merged.description = lose.description.clone();
    }
    if merged.creators.is_empty() {
        merged.creators = lose.creators.clone();
    }
    merged.year = win.year.or(lose.year);
    merged.language = win.language.clone().or_else(|| lose.language.clone());
    merged.rights = win.rights.clone().or_else(|| lose.rights.clone());
    merged.full_text = win.full_text.clone().or_else(|| lose.full_text.clone());
    merged.materials.extend(lose.materials.iter().cloned());
    merged.materials.sort();
    merged.materials.dedup();
    let mut type_specific = lose.type_specific.clone();
    type_specific.extend(
        win.type_specific
            .iter()
            .map(|(k, v)| (k.clone(), v.clone())),
    );
    merged.type_specific = type_specific;
    Ok(merged)
}

/// Reads the descriptor config file. Relative source paths resolve against the config's directory.
pub fn read_source_config(path: &Path) -> Result<Vec<SourceDescriptor>> {
    #[derive(Deserialize)]
    struct Config {
        sources: Vec<SourceDescriptor>,
    }
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let config: Config = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(config
        .sources
        .into_iter()
        .map(|mut d| {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
            d
        })
        .collect())
}

/// Full rebuild from the given sources.
pub fn build_snapshot(
    descriptors: &[SourceDescriptor],
    built_at: DateTime<Utc>,
) -> Result<CorpusSnapshot> {
    let mut keys = HashSet::new();
    for d in descriptors {
        d.validate()?;
        if !keys.insert(d.key.as_str()) {
            return Err(Error::Config(format!("duplicate source key `{}`", d.key)));
        }
    }

    let loaded: Vec<(&SourceDescriptor, LoadOutcome)> = descriptors
        .par_iter()
        .map(|d| {
            let file = File::open(&d.path).map_err(|source| Error::SourceUnreadable {
                key: d.key.clone(),
                path: d.path.clone(),
                source,
            })?;
            let outcome = load_and_normalize(d, BufReader::new(file))?;
            Ok((d, outcome))
        })
        .collect::<Result<_>>()?;

    let priorities: SourcePriorities = descriptors
        .iter()
        .map(|d| (d.key.clone(), d.priority))
        .collect();
    let mut snapshot = CorpusSnapshot::empty(built_at);
    let mut groups: HashMap<DedupKey, Vec<Record>> = HashMap::new();

    for (d, outcome) in loaded {
        snapshot.source_report.insert(
            d.key.clone(),
            SourceCounts {
                read: outcome.read,
                accepted: outcome.records.len(),
                rejected: outcome.rejects.len(),
                merged: 0,
            },
        );
        snapshot
            .rejects
            .extend(outcome.rejects.into_iter().map(|report| SourceReject {
                source: d.key.clone(),
                report,
            }));
        for record in outcome.records {
            groups.entry(dedup_key(&record)).or_default().push(record);
        }
    }

    let mut groups: Vec<(DedupKey, Vec<Record>)> = groups.into_iter().collect();
    groups.sort_by(|a, b| a.0.cmp(&b.0));
    for (_, mut members) in groups {
        members.sort_by(|a, b| rank(a, &priorities).cmp(&rank(b, &priorities)));
        let mut iter = members.into_iter();
        let mut merged = iter.next().expect("groups are non-empty");
        let mut constituents = vec![merged.id.clone()];
        for next in iter {
            if let Some(counts) = snapshot.source_report.get_mut(&next.source) {
                counts.merged += 1;
            }
            constituents.push(next.id.clone());
            merged = merge_records(&merged, &next, &priorities)?;
        }
        for id in constituents {
            if id != merged.id {
                snapshot.id_aliases.insert(id, merged.id.clone());
            }
        }
        snapshot.records.insert(merged.id.clone(), merged);
    }
    Ok(snapshot)
}
