//! Staged artifacts under one output directory, and the pipeline stages that
//! read and write them.
//!
//! ```text
//! ingest      -> snapshot.jsonl, snapshot.meta.json
//! links import/extract -> links.import.<origin>.jsonl (+ .rejects.json), pool.jsonl
//! links merge -> links.jsonl, links.dangling.json
//! build-index -> index.bin
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    build_snapshot, read_source_config, CorpusSnapshot, SourceCounts, SourceReject,
};
use crate::linkstore::{
    build_link_summaries, import_link_records, merge_duplicate_links, DanglingLink,
    EndpointResolver, Link, LinkIndex, LinkReject, LiteraturePool,
};
use crate::mentions::{extract_directory, DatasetRegistry};
use crate::model::{Category, Record};
use crate::search::{build_index, IndexSnapshot};

pub const SNAPSHOT: &str = "snapshot.jsonl";
pub const SNAPSHOT_META: &str = "snapshot.meta.json";
pub const POOL: &str = "pool.jsonl";
pub const LINKS: &str = "links.jsonl";
pub const DANGLING: &str = "links.dangling.json";
pub const INDEX: &str = "index.bin";
pub const REPORT: &str = "report.json";
/// Default origin of extracted links.
pub const EXTRACTOR_ORIGIN: &str = "extractor";

const IMPORT_PREFIX: &str = "links.import.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub built_at: DateTime<Utc>,
    pub digest: String,
    pub record_count: usize,
    pub source_report: BTreeMap<String, SourceCounts>,
    pub rejects: Vec<SourceReject>,
    pub id_aliases: BTreeMap<String, String>,
}

/// An output directory holding the pipeline artifacts.
#[derive(Debug, Clone)]
pub struct ArtifactDir {
    root: PathBuf,
}

fn corrupt(path: &Path, message: impl ToString) -> Error {
    Error::CorruptArtifact {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

impl ArtifactDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ArtifactDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).is_file()
    }

    /// Writes through a temporary file so readers never see partial artifacts.
    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::create_dir_all(&self.root)?;
        let target = self.path(name);
        let tmp = self.path(&format!(".{name}.tmp"));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &target)?;
        Ok(())
    }

    pub fn read(&self, name: &str) -> Result<Vec<u8>> {
        let path = self.path(name);
        fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(path),
            _ => Error::Io(e),
        })
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    fn read_json<T: for<'de> Deserialize<'de>>(&self, name: &str) -> Result<T> {
        let bytes = self.read(name)?;
        serde_json::from_slice(&bytes).map_err(|e| corrupt(&self.path(name), e))
    }

    fn write_jsonl<'a, T: Serialize + 'a>(
        &self,
        name: &str,
        items: impl IntoIterator<Item = &'a T>,
    ) -> Result<()> {
        let mut bytes = Vec::new();
        for item in items {
            serde_json::to_writer(&mut bytes, item)?;
            bytes.push(b'\n');
        }
        self.write(name, &bytes)
    }

    fn read_jsonl<T: for<'de> Deserialize<'de>>(&self, name: &str) -> Result<Vec<T>> {
        let bytes = self.read(name)?;
        let path = self.path(name);
        let mut out = Vec::new();
        for (ix, line) in BufReader::new(bytes.as_slice()).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(
                serde_json::from_str(&line)
                    .map_err(|e| corrupt(&path, format!("line {}: {e}", ix + 1)))?,
            );
        }
        Ok(out)
    }

    pub fn save_snapshot(&self, snapshot: &CorpusSnapshot) -> Result<()> {
        self.write(SNAPSHOT, &snapshot.canonical_jsonl())?;
        self.write_json(
            SNAPSHOT_META,
            &SnapshotMeta {
                built_at: snapshot.built_at,
                digest: snapshot.digest(),
                record_count: snapshot.records.len(),
                source_report: snapshot.source_report.clone(),
                rejects: snapshot.rejects.clone(),
                id_aliases: snapshot.id_aliases.clone(),
            },
        )
    }

    pub fn load_snapshot(&self) -> Result<CorpusSnapshot> {
        let records: Vec<Record> = self.read_jsonl(SNAPSHOT)?;
        let meta: SnapshotMeta = self.read_json(SNAPSHOT_META)?;
        Ok(CorpusSnapshot {
            records: records.into_iter().map(|r| (r.id.clone(), r)).collect(),
            built_at: meta.built_at,
            source_report: meta.source_report,
            rejects: meta.rejects,
            id_aliases: meta.id_aliases,
        })
    }

    /// Literature-pool entries; empty before the first import.
    pub fn load_pool(&self) -> Result<BTreeMap<String, Record>> {
        if !self.exists(POOL) {
            return Ok(BTreeMap::new());
        }
        let records: Vec<Record> = self.read_jsonl(POOL)?;
        Ok(records.into_iter().map(|r| (r.id.clone(), r)).collect())
    }

    pub fn save_pool(&self, pool: &BTreeMap<String, Record>) -> Result<()> {
        self.write_jsonl(POOL, pool.values())
    }

    pub fn save_links(&self, name: &str, links: &[Link]) -> Result<()> {
        self.write_jsonl(name, links)
    }

    pub fn load_links(&self, name: &str) -> Result<Vec<Link>> {
        self.read_jsonl(name)
    }

    /// Canonical links, or none when no merge has run yet.
    pub fn load_canonical_links(&self) -> Result<Vec<Link>> {
        if self.exists(LINKS) {
            self.load_links(LINKS)
        } else {
            Ok(Vec::new())
        }
    }

    /// Per-origin import files, sorted by name.
    pub fn import_files(&self) -> Result<Vec<String>> {
        if !self.root.is_dir() {
            return Ok(Vec::new());
        }
        let mut names: Vec<String> = fs::read_dir(&self.root)?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| n.starts_with(IMPORT_PREFIX) && n.ends_with(".jsonl"))
            .collect();
        names.sort();
        Ok(names)
    }

    pub fn save_index(&self, index: &IndexSnapshot) -> Result<()> {
        self.write(INDEX, &index.to_bytes())
    }

    pub fn load_index(&self) -> Result<IndexSnapshot> {
        let bytes = self.read(INDEX)?;
        IndexSnapshot::from_bytes(&bytes).map_err(|e| corrupt(&self.path(INDEX), e))
    }
}

pub fn import_file_name(origin: &str) -> String {
    format!("{IMPORT_PREFIX}{origin}.jsonl")
}

fn rejects_file_name(origin: &str) -> String {
    format!("{IMPORT_PREFIX}{origin}.rejects.json")
}

fn validate_origin(origin: &str) -> Result<()> {
    let ok = !origin.is_empty()
        && origin
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "origin `{origin}` must be non-empty and use only letters, digits, '-', '_' or '.'"
        )))
    }
}

/// Snapshot records plus literature-pool entries.
pub fn all_records(
    snapshot: &CorpusSnapshot,
    pool: &BTreeMap<String, Record>,
) -> BTreeMap<String, Record> {
    let mut records = snapshot.records.clone();
    records.extend(pool.iter().map(|(k, v)| (k.clone(), v.clone())));
    records
}

/// `ingest`: full rebuild from a sources config.
pub fn run_ingest(
    sources: &Path,
    out: &ArtifactDir,
    built_at: DateTime<Utc>,
) -> Result<CorpusSnapshot> {
    let descriptors = read_source_config(sources)?;
    let snapshot = build_snapshot(&descriptors, built_at)?;
    out.save_snapshot(&snapshot)?;
    Ok(snapshot)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportSummary {
    pub origin: String,
    pub accepted: usize,
    pub rejected: usize,
    pub pool_created: usize,
}

fn import_reader<R: BufRead>(
    out: &ArtifactDir,
    reader: R,
    origin: &str,
    imported_at: DateTime<Utc>,
) -> Result<ImportSummary> {
    validate_origin(origin)?;
    let snapshot = out.load_snapshot()?;
    let prior_pool = out.load_pool()?;
    let prior_len = prior_pool.len();
    let pool = LiteraturePool::from_corpus(snapshot.records.values(), prior_pool.into_values());
    let mut resolver = EndpointResolver::new(&snapshot, pool);
    let outcome = import_link_records(reader, origin, imported_at, &mut resolver)?;
    let pool = resolver.pool.into_created();

    out.save_links(&import_file_name(origin), &outcome.links)?;
    out.write_json(&rejects_file_name(origin), &outcome.rejects)?;
    out.save_pool(&pool)?;
    Ok(ImportSummary {
        origin: origin.to_string(),
        accepted: outcome.links.len(),
        rejected: outcome.rejects.len(),
        pool_created: pool.len() - prior_len,
    })
}

/// `links import`: resolves one links file into `links.import.<origin>.jsonl`.
pub fn run_link_import(
    out: &ArtifactDir,
    links: &Path,
    origin: &str,
    imported_at: DateTime<Utc>,
) -> Result<ImportSummary> {
    let file = fs::File::open(links).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(links.to_path_buf()),
        _ => Error::Io(e),
    })?;
    import_reader(out, BufReader::new(file), origin, imported_at)
}

/// `links extract`: mention extraction over a full-text directory.
pub fn run_link_extract(
    out: &ArtifactDir,
    fulltexts: &Path,
    registry: &Path,
    origin: &str,
    imported_at: DateTime<Utc>,
) -> Result<ImportSummary> {
    let file = fs::File::open(registry).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(registry.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let registry = DatasetRegistry::read(BufReader::new(file))?;
    let rows = extract_directory(fulltexts, &registry)?;
    let mut jsonl = Vec::new();
    for row in &rows {
        serde_json::to_writer(&mut jsonl, row)?;
        jsonl.push(b'\n');
    }
    import_reader(out, jsonl.as_slice(), origin, imported_at)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeSummary {
    pub inputs: usize,
    pub links: usize,
    pub dangling: usize,
}

/// `links merge`: all import files into the canonical link set.
pub fn run_link_merge(out: &ArtifactDir) -> Result<MergeSummary> {
    let snapshot = out.load_snapshot()?;
    let pool = out.load_pool()?;
    let mut all = Vec::new();
    for name in out.import_files()? {
        all.extend(out.load_links(&name)?);
    }
    let inputs = all.len();
    let merged = merge_duplicate_links(all);
    let index = build_link_summaries(&all_records(&snapshot, &pool), &merged);
    out.save_links(LINKS, &merged)?;
    out.write_json(DANGLING, &index.dangling)?;
    Ok(MergeSummary {
        inputs,
        links: merged.len(),
        dangling: index.dangling.len(),
    })
}

/// `build-index`: snapshot, pool and canonical links into `index.bin`.
pub fn run_build_index(out: &ArtifactDir) -> Result<IndexSnapshot> {
    let snapshot = out.load_snapshot()?;
    let pool = out.load_pool()?;
    let links = out.load_canonical_links()?;
    let records = all_records(&snapshot, &pool);
    let index = build_index(&records, &build_link_summaries(&records, &links));
    out.save_index(&index)?;
    Ok(index)
}

/// Everything the server needs, loaded once and shared read-only.
#[derive(Debug)]
pub struct ServedCorpus {
    pub records: BTreeMap<String, Record>,
    pub id_aliases: BTreeMap<String, String>,
    pub links: Vec<Link>,
    pub link_index: LinkIndex,
    pub index: IndexSnapshot,
    pub built_at: DateTime<Utc>,
}

impl ServedCorpus {
    pub fn load(dir: &ArtifactDir) -> Result<Self> {
        let snapshot = dir.load_snapshot()?;
        let pool = dir.load_pool()?;
        let links = dir.load_canonical_links()?;
        let index = dir.load_index()?;
        let records = all_records(&snapshot, &pool);
        if index.len() != records.len() {
            return Err(corrupt(
                &dir.path(INDEX),
                format!(
                    "index covers {} records, corpus has {}",
                    index.len(),
                    records.len()
                ),
            ));
        }
        let link_index = build_link_summaries(&records, &links);
        Ok(ServedCorpus {
            records,
            id_aliases: snapshot.id_aliases,
            links,
            link_index,
            index,
            built_at: snapshot.built_at,
        })
    }

    pub fn get(&self, id: &str) -> Option<&Record> {
        self.records
            .get(id)
            .or_else(|| self.id_aliases.get(id).and_then(|t| self.records.get(t)))
    }

    pub fn stats(&self) -> CorpusStats {
        let mut records_by_category: BTreeMap<Category, usize> =
            Category::ALL.iter().map(|c| (*c, 0)).collect();
        for r in self.records.values() {
            *records_by_category.entry(r.category).or_default() += 1;
        }
        let mut links_by_pair: BTreeMap<String, usize> = BTreeMap::new();
        for l in &self.links {
            *links_by_pair
                .entry(format!("{}->{}", l.from_category, l.to_category))
                .or_default() += 1;
        }
        CorpusStats {
            total_records: self.records.len(),
            records_by_category,
            total_links: self.links.len(),
            links_by_category_pair: links_by_pair,
            dangling_links: self.link_index.dangling.len(),
            built_at: self.built_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_records: usize,
    pub records_by_category: BTreeMap<Category, usize>,
    pub total_links: usize,
    pub links_by_category_pair: BTreeMap<String, usize>,
    pub dangling_links: usize,
    pub built_at: DateTime<Utc>,
}

pub fn load_dangling(dir: &ArtifactDir) -> Result<Vec<DanglingLink>> {
    dir.read_json(DANGLING)
}

pub fn load_import_rejects(dir: &ArtifactDir, origin: &str) -> Result<Vec<LinkReject>> {
    dir.read_json(&rejects_file_name(origin))
}
