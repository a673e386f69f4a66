//! Link infrastructure: import, publication match-or-create, duplicate merging
//! and per-record link summaries.
//!
//! Links are stored once in their imported direction and rendered from both
//! endpoints. A link's label is a pure function of its confidence: only
//! confidence 1.0 counts as `used`, everything else is `mentioned`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::CorpusSnapshot;
use crate::model::{
    composite_key, normalize_identifier, Category, DedupKey, IdScheme, Record, POOL_SOURCE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkMethod {
    Manual,
    Automatic,
}

impl LinkMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkMethod::Manual => "manual",
            LinkMethod::Automatic => "automatic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkLabel {
    Used,
    Mentioned,
}

/// `used` iff the confidence is exactly 1.0.
pub fn classify_link_label(confidence: f64) -> Result<LinkLabel> {
    if !(0.0..=1.0).contains(&confidence) {
        return Err(Error::ConfidenceOutOfRange(confidence));
    }
    Ok(if confidence == 1.0 {
        LinkLabel::Used
    } else {
        LinkLabel::Mentioned
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub origin: String,
    pub method: LinkMethod,
    pub imported_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: String,
    pub from_id: String,
    pub to_id: String,
    pub from_category: Category,
    pub to_category: Category,
    pub method: LinkMethod,
    pub confidence: f64,
    pub label: LinkLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_passage: Option<String>,
    pub provenance: Vec<ProvenanceEntry>,
}

pub fn link_id(from_id: &str, to_id: &str, method: LinkMethod) -> String {
    let mut hasher = Sha256::new();
    hasher.update(from_id.as_bytes());
    hasher.update([0x1f]);
    hasher.update(to_id.as_bytes());
    hasher.update([0x1f]);
    hasher.update(method.as_str().as_bytes());
    hex::encode(&hasher.finalize()[..12])
}

impl Link {
    pub fn group_key(&self) -> (&str, &str, LinkMethod) {
        (&self.from_id, &self.to_id, self.method)
    }
}

/// Publication reference metadata as it arrives with a link row.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceMetadata {
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub creators: Vec<String>,
    #[serde(default)]
    pub doi: Option<String>,
}

/// Publication entities known to the link infrastructure: corpus publications
/// plus entries created from unmatched references.
#[derive(Debug, Default)]
pub struct LiteraturePool {
    by_doi: HashMap<String, String>,
    by_key: HashMap<DedupKey, String>,
    created: BTreeMap<String, Record>,
    counter: u64,
}

impl LiteraturePool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Seeds the pool with the corpus publications and any previously created entries.
    pub fn from_corpus<'a>(
        publications: impl IntoIterator<Item = &'a Record>,
        created: impl IntoIterator<Item = Record>,
    ) -> Self {
        let mut pool = LiteraturePool::new();
        for record in publications {
            if record.category == Category::Publication {
                pool.index(record);
            }
        }
        for record in created {
            if let Some(n) = record
                .id
                .strip_prefix("pool-")
                .and_then(|n| n.parse::<u64>().ok())
            {
                pool.counter = pool.counter.max(n);
            }
            pool.index(&record);
            pool.created.insert(record.id.clone(), record);
        }
        pool
    }

    fn index(&mut self, record: &Record) {
        if let Some(doi) = record.doi() {
            self.by_doi
                .entry(doi.to_string())
                .or_insert_with(|| record.id.clone());
        }
        let key = composite_key(
            &record.title,
            record.year,
            record.creators.first().map(String::as_str),
        );
        self.by_key.entry(key).or_insert_with(|| record.id.clone());
    }

    /// Entries created by match-or-create resolution.
    pub fn created(&self) -> &BTreeMap<String, Record> {
        &self.created
    }

    pub fn len(&self) -> usize {
        self.created.len()
    }

    pub fn is_empty(&self) -> bool {
        self.created.is_empty()
    }

    pub fn into_created(self) -> BTreeMap<String, Record> {
        self.created
    }
}

/// Matches a reference against the pool by DOI, then by composite key; creates a new entry otherwise.
pub fn resolve_publication_reference(
    reference: &ReferenceMetadata,
    pool: &mut LiteraturePool,
) -> Result<String> {
    let doi = match reference.doi.as_deref() {
        Some(raw) if !raw.trim().is_empty() => Some(normalize_identifier(IdScheme::Doi, raw)?),
        _ => None,
    };
    let title = reference
        .title
        .as_deref()
        .map(str::trim)
        .filter(|t| !t.is_empty());
    if doi.is_none() && title.is_none() {
        return Err(Error::UnresolvableReference);
    }
    if let Some(id) = doi.as_ref().and_then(|d| pool.by_doi.get(d)) {
        return Ok(id.clone());
    }
    if let Some(title) = title {
        let key = composite_key(
            title,
            reference.year,
            reference.creators.first().map(String::as_str),
        );
        if let Some(id) = pool.by_key.get(&key) {
            return Ok(id.clone());
        }
    }

    pool.counter += 1;
    let id = format!("pool-{}", pool.counter);
    let fallback_title = doi.clone().unwrap_or_default();
    let mut record = Record::new(
        id.clone(),
        Category::Publication,
        title.map(str::to_string).unwrap_or(fallback_title),
        POOL_SOURCE,
    );
    record.year = reference.year;
    record.creators = reference.creators.clone();
    if let Some(doi) = doi {
        record.external_ids.insert(IdScheme::Doi, doi);
    }
    pool.index(&record);
    pool.created.insert(id.clone(), record);
    Ok(id)
}

/// One line of a links file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRow {
    pub from: String,
    pub to: String,
    pub method: LinkMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_ref: Option<ReferenceMetadata>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_ref: Option<ReferenceMetadata>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkReject {
    pub line: usize,
    pub reason: String,
}

/// Resolves link endpoints against the corpus and the literature pool.
pub struct EndpointResolver<'a> {
    snapshot: &'a CorpusSnapshot,
    external: HashMap<(IdScheme, String), String>,
    pub pool: LiteraturePool,
}

impl<'a> EndpointResolver<'a> {
    pub fn new(snapshot: &'a CorpusSnapshot, pool: LiteraturePool) -> Self {
        let mut external = HashMap::new();
        for record in snapshot.records.values() {
            for (scheme, value) in &record.external_ids {
                external
                    .entry((*scheme, value.clone()))
                    .or_insert_with(|| record.id.clone());
            }
        }
        EndpointResolver {
            snapshot,
            external,
            pool,
        }
    }

    fn lookup(&self, id: &str) -> Option<&Record> {
        self.snapshot.get(id).or_else(|| self.pool.created.get(id))
    }

    /// Returns the internal id and category the endpoint denotes.
    pub fn resolve(
        &mut self,
        endpoint: &str,
        reference: Option<&ReferenceMetadata>,
    ) -> std::result::Result<(String, Category), String> {
        let endpoint = endpoint.trim();
        if endpoint.is_empty() {
            return Err("empty endpoint".into());
        }
        let external = endpoint
            .split_once(':')
            .and_then(|(scheme, value)| scheme.parse::<IdScheme>().ok().map(|s| (s, value)));

        let mut reference = reference.cloned();
        match external {
            Some((scheme, raw)) => {
                let value = normalize_identifier(scheme, raw).map_err(|e| e.to_string())?;
                if let Some(id) = self.external.get(&(scheme, value.clone())) {
                    let record = self
                        .lookup(id)
                        .expect("external index points at live records");
                    return Ok((record.id.clone(), record.category));
                }
                if scheme == IdScheme::Doi {
                    let r = reference.get_or_insert_with(ReferenceMetadata::default);
                    r.doi.get_or_insert(value);
                }
            }
            None => {
                if let Some(record) = self.lookup(endpoint) {
                    return Ok((record.id.clone(), record.category));
                }
            }
        }
        match reference {
            Some(r) => {
                let id = resolve_publication_reference(&r, &mut self.pool)
                    .map_err(|e| format!("unresolved endpoint `{endpoint}`: {e}"))?;
                Ok((id, Category::Publication))
            }
            None => Err(format!("unresolved endpoint `{endpoint}`")),
        }
    }

    /// Turns a parsed row into a link with a single provenance entry.
    pub fn link_from_row(
        &mut self,
        row: &LinkRow,
        origin: &str,
        imported_at: DateTime<Utc>,
    ) -> std::result::Result<Link, String> {
        let confidence = match (row.method, row.confidence) {
            (_, Some(c)) if !(0.0..=1.0).contains(&c) || c.is_nan() => {
                return Err(format!("confidence {c} outside [0, 1]"));
            }
            (LinkMethod::Manual, _) => 1.0,
            (LinkMethod::Automatic, Some(c)) => c,
            (LinkMethod::Automatic, None) => return Err("automatic link without confidence".into()),
        };
        let (from_id, from_category) = self.resolve(&row.from, row.from_ref.as_ref())?;
        let (to_id, to_category) = self.resolve(&row.to, row.to_ref.as_ref())?;
        if from_id == to_id {
            return Err(format!("self-link on `{from_id}`"));
        }
        let label = classify_link_label(confidence).map_err(|e| e.to_string())?;
        Ok(Link {
            id: link_id(&from_id, &to_id, row.method),
            from_id,
            to_id,
            from_category,
            to_category,
            method: row.method,
            confidence,
            label,
            evidence_passage: row.passage.clone().filter(|p| !p.trim().is_empty()),
            provenance: vec![ProvenanceEntry {
                origin: origin.to_string(),
                method: row.method,
                imported_at,
                note: row.note.clone(),
            }],
        })
    }
}

#[derive(Debug, Default)]
pub struct ImportOutcome {
    pub links: Vec<Link>,
    pub rejects: Vec<LinkReject>,
}

/// Parses a links file; bad rows are rejected with their line number.
pub fn import_link_records<R: BufRead>(
    reader: R,
    origin: &str,
    imported_at: DateTime<Utc>,
    resolver: &mut EndpointResolver<'_>,
) -> Result<ImportOutcome> {
    if origin.trim().is_empty() {
        return Err(Error::InvalidArgument(
            "link origin must be non-empty".into(),
        ));
    }
    let mut outcome = ImportOutcome::default();
    for (ix, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let result = serde_json::from_str::<LinkRow>(&line)
            .map_err(|e| format!("malformed: {e}"))
            .and_then(|row| resolver.link_from_row(&row, origin, imported_at));
        match result {
            Ok(link) => outcome.links.push(link),
            Err(reason) => outcome.rejects.push(LinkReject {
                line: ix + 1,
                reason,
            }),
        }
    }
    Ok(outcome)
}

/// Collapses links sharing (from, to, method) into one link each.
pub fn merge_duplicate_links(links: Vec<Link>) -> Vec<Link> {
    let mut groups: BTreeMap<(String, String, LinkMethod), Vec<Link>> = BTreeMap::new();
    for link in links {
        groups
            .entry((link.from_id.clone(), link.to_id.clone(), link.method))
            .or_default()
            .push(link);
    }
    groups
        .into_values()
        .map(|members| {
            let mut best = 0;
            for (i, m) in members.iter().enumerate() {
                if m.confidence > members[best].confidence {
                    best = i;
                }
            }
            let mut merged = members[best].clone();
            merged.label = classify_link_label(merged.confidence).unwrap_or(LinkLabel::Mentioned);
            let mut seen = BTreeSet::new();
            merged.provenance = members
                .iter()
                .flat_map(|m| m.provenance.iter())
                .filter(|p| seen.insert((p.origin.clone(), p.note.clone())))
                .cloned()
                .collect();
            merged.id = link_id(&merged.from_id, &merged.to_id, merged.method);
            merged
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkDirection {
    Outgoing,
    Incoming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedEntry {
    pub record_id: String,
    pub category: Category,
    pub title: String,
    pub label: LinkLabel,
    pub confidence: f64,
    pub method: LinkMethod,
    pub direction: LinkDirection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_passage: Option<String>,
    pub provenance_origins: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSummary {
    pub record_id: String,
    pub by_category: BTreeMap<Category, usize>,
    pub by_label: BTreeMap<LinkLabel, usize>,
    pub entries: Vec<LinkedEntry>,
}

impl LinkSummary {
    pub fn empty(record_id: &str) -> Self {
        LinkSummary {
            record_id: record_id.to_string(),
            by_category: Category::ALL.iter().map(|c| (*c, 0)).collect(),
            by_label: [(LinkLabel::Used, 0), (LinkLabel::Mentioned, 0)]
                .into_iter()
                .collect(),
            entries: Vec::new(),
        }
    }

    pub fn total(&self) -> usize {
        self.entries.len()
    }

    pub fn entries_for(&self, category: Category) -> impl Iterator<Item = &LinkedEntry> {
        self.entries.iter().filter(move |e| e.category == category)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DanglingLink {
    pub link_id: String,
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkIndex {
    pub summaries: BTreeMap<String, LinkSummary>,
    pub dangling: Vec<DanglingLink>,
}

impl LinkIndex {
    pub fn summary(&self, record_id: &str) -> Option<&LinkSummary> {
        self.summaries.get(record_id)
    }
}

fn origins(link: &Link) -> Vec<String> {
    let set: BTreeSet<&str> = link.provenance.iter().map(|p| p.origin.as_str()).collect();
    set.into_iter().map(str::to_string).collect()
}

/// Builds a summary for every record; each live link is listed at both endpoints.
pub fn build_link_summaries(records: &BTreeMap<String, Record>, links: &[Link]) -> LinkIndex {
    let mut index = LinkIndex {
        summaries: records
            .keys()
            .map(|id| (id.clone(), LinkSummary::empty(id)))
            .collect(),
        dangling: Vec::new(),
    };
    for link in links {
        let (Some(from), Some(to)) = (records.get(&link.from_id), records.get(&link.to_id)) else {
            let missing = [&link.from_id, &link.to_id]
                .into_iter()
                .filter(|id| !records.contains_key(*id))
                .cloned()
                .collect();
            index.dangling.push(DanglingLink {
                link_id: link.id.clone(),
                missing,
            });
            continue;
        };
        for (owner, other, direction) in [
            (from, to, LinkDirection::Outgoing),
            (to, from, LinkDirection::Incoming),
        ] {
            let summary = index
                .summaries
                .get_mut(&owner.id)
                .expect("summary per record");
            *summary.by_category.entry(other.category).or_default() += 1;
            *summary.by_label.entry(link.label).or_default() += 1;
            summary.entries.push(LinkedEntry {
                record_id: other.id.clone(),
                category: other.category,
                title: other.title.clone(),
                label: link.label,
                confidence: link.confidence,
                method: link.method,
                direction,
                evidence_passage: link.evidence_passage.clone(),
                provenance_origins: origins(link),
            });
        }
    }
    for summary in index.summaries.values_mut() {
        summary.entries.sort_by(|a, b| {
            a.label
                .cmp(&b.label)
                .then(b.confidence.total_cmp(&a.confidence))
                .then_with(|| a.title.cmp(&b.title))
                .then_with(|| a.record_id.cmp(&b.record_id))
                .then(a.method.cmp(&b.method))
        });
    }
    index
}
