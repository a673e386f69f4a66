//! Dictionary-based data-citation extraction.
//!
//! Dataset names, abbreviations and title+year forms from the registry form an
//! alias table. Full texts are scanned for whole-word alias occurrences; each
//! occurrence is resolved to the registry datasets it may refer to, with a
//! confidence that drops with match distance and with ambiguity.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linkstore::{LinkMethod, LinkRow};
use crate::search::tokenize::{tokenize, tokenize_with_offsets, Token};

/// Characters of context kept on each side of a mention.
pub const PASSAGE_RADIUS: usize = 120;
/// How many tokens after an alias are searched for a year.
const YEAR_LOOKAHEAD: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub years: Vec<i32>,
}

/// Canonical alias form: case-folded word tokens joined by single spaces.
pub fn normalize_alias(s: &str) -> String {
    tokenize(s).join(" ")
}

fn is_year(token: &str) -> bool {
    token.len() == 4
        && token.bytes().all(|b| b.is_ascii_digit())
        && matches!(&token[..2], "18" | "19" | "20")
}

#[derive(Debug, Clone, Default)]
pub struct AliasTable {
    map: BTreeMap<String, BTreeSet<String>>,
    by_first_token: HashMap<String, Vec<Vec<String>>>,
}

impl AliasTable {
    pub fn insert(&mut self, alias: &str, dataset_id: &str) {
        let tokens = tokenize(alias);
        if tokens.is_empty() {
            return;
        }
        let key = tokens.join(" ");
        let ids = self.map.entry(key).or_default();
        if ids.is_empty() {
            self.by_first_token
                .entry(tokens[0].clone())
                .or_default()
                .push(tokens);
        }
        ids.insert(dataset_id.to_string());
    }

    pub fn get(&self, alias: &str) -> Option<&BTreeSet<String>> {
        self.map.get(alias)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct DatasetRegistry {
    pub entries: BTreeMap<String, RegistryEntry>,
    pub aliases: AliasTable,
}

impl DatasetRegistry {
    pub fn new(entries: impl IntoIterator<Item = RegistryEntry>) -> Self {
        let mut registry = DatasetRegistry::default();
        for entry in entries {
            let mut forms: Vec<&str> = vec![entry.title.as_str()];
            forms.extend(entry.aliases.iter().map(String::as_str));
            for form in &forms {
                registry.aliases.insert(form, &entry.id);
                for year in &entry.years {
                    registry
                        .aliases
                        .insert(&format!("{form} {year}"), &entry.id);
                }
            }
            registry.entries.insert(entry.id.clone(), entry);
        }
        registry
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (ix, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: RegistryEntry = serde_json::from_str(&line)
                .map_err(|e| Error::Config(format!("dataset registry line {}: {e}", ix + 1)))?;
            entries.push(entry);
        }
        Ok(DatasetRegistry::new(entries))
    }

    fn has_alias(&self, dataset_id: &str, alias: &str) -> bool {
        self.aliases
            .get(alias)
            .is_some_and(|ids| ids.contains(dataset_id))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub document_id: String,
    pub surface: String,
    /// Character offsets, end exclusive.
    pub span: (usize, usize),
    /// Normalized alias that matched.
    pub alias: String,
    pub year_token: Option<String>,
    pub context_passage: String,
}

struct Match {
    start_tok: usize,
    end_tok: usize,
    start: usize,
    end: usize,
}

fn sentence_passage(chars: &[char], start: usize, end: usize) -> String {
    let lo = start.saturating_sub(PASSAGE_RADIUS);
    let hi = (end + PASSAGE_RADIUS).min(chars.len());
    let begin = chars[lo..start]
        .iter()
        .rposition(|&c| c == '.')
        .map(|p| lo + p + 1)
        .unwrap_or(lo);
    let finish = chars[end..hi]
        .iter()
        .position(|&c| c == '.')
        .map(|p| end + p + 1)
        .unwrap_or(hi);
    chars[begin..finish]
        .iter()
        .collect::<String>()
        .trim()
        .to_string()
}

/// Finds whole-word, case-insensitive alias occurrences; overlaps keep the longest.
pub fn extract_mentions(document_id: &str, text: &str, aliases: &AliasTable) -> Vec<Mention> {
    let tokens: Vec<Token> = tokenize_with_offsets(text);
    if tokens.is_empty() || aliases.is_empty() {
        return Vec::new();
    }

    let mut found = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        let Some(candidates) = aliases.by_first_token.get(&tok.text) else {
            continue;
        };
        for alias in candidates {
            let end_tok = i + alias.len();
            if end_tok <= tokens.len()
                && tokens[i..end_tok]
                    .iter()
                    .zip(alias)
                    .all(|(t, a)| &t.text == a)
            {
                found.push(Match {
                    start_tok: i,
                    end_tok,
                    start: tok.start,
                    end: tokens[end_tok - 1].end,
                });
            }
        }
    }

    found.sort_by(|a, b| {
        (b.end - b.start)
            .cmp(&(a.end - a.start))
            .then(a.start.cmp(&b.start))
    });
    let mut kept: Vec<Match> = Vec::new();
    for m in found {
        if kept.iter().all(|k| m.end <= k.start || m.start >= k.end) {
            kept.push(m);
        }
    }
    kept.sort_by_key(|m| m.start);

    let chars: Vec<char> = text.chars().collect();
    kept.into_iter()
        .map(|m| {
            let alias_tokens = &tokens[m.start_tok..m.end_tok];
            let year_token = tokens[m.end_tok..tokens.len().min(m.end_tok + YEAR_LOOKAHEAD)]
                .iter()
                .find(|t| is_year(&t.text))
                .or_else(|| alias_tokens.iter().rev().find(|t| is_year(&t.text)))
                .map(|t| t.text.clone());
            Mention {
                document_id: document_id.to_string(),
                surface: chars[m.start..m.end].iter().collect(),
                span: (m.start, m.end),
                alias: alias_tokens
                    .iter()
                    .map(|t| t.text.as_str())
                    .collect::<Vec<_>>()
                    .join(" "),
                year_token,
                context_passage: sentence_passage(&chars, m.start, m.end),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub dataset_id: String,
    pub similarity: f64,
    pub confidence: f64,
}

/// Registry datasets a mention may refer to.
///
/// Exact alias hits (with a compatible year) score similarity 1.0; others score
/// the normalized edit similarity between the mention (plus year) and the title.
/// Confidence is the similarity divided by the number of candidates.
pub fn resolve_mention(mention: &Mention, registry: &DatasetRegistry) -> Vec<Candidate> {
    let year_alias = mention.year_token.as_ref().map(|y| {
        if mention.alias.rsplit(' ').next() == Some(y.as_str()) {
            mention.alias.clone()
        } else {
            format!("{} {y}", mention.alias)
        }
    });
    let mut ids: BTreeSet<&String> = BTreeSet::new();
    for key in std::iter::once(&mention.alias).chain(year_alias.as_ref()) {
        if let Some(found) = registry.aliases.get(key) {
            ids.extend(found);
        }
    }
    let probe = year_alias.clone().unwrap_or_else(|| mention.alias.clone());

    let mut candidates: Vec<Candidate> = ids
        .into_iter()
        .filter_map(|id| {
            let entry = registry.entries.get(id)?;
            let year_ok = match &mention.year_token {
                None => true,
                Some(y) => {
                    entry.years.is_empty()
                        || entry.years.iter().any(|ey| ey.to_string() == *y)
                        || year_alias
                            .as_ref()
                            .is_some_and(|ya| registry.has_alias(id, ya))
                }
            };
            let similarity = if year_ok {
                1.0
            } else {
                strsim::normalized_levenshtein(&probe, &normalize_alias(&entry.title))
            };
            (similarity > 0.0).then(|| Candidate {
                dataset_id: id.clone(),
                similarity,
                confidence: similarity,
            })
        })
        .collect();

    let k = candidates.len();
    if k > 1 {
        for c in &mut candidates {
            c.confidence = c.similarity / k as f64;
        }
    }
    candidates.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.dataset_id.cmp(&b.dataset_id))
    });
    candidates
}

/// Link rows (publication → dataset) for every resolved mention in one document.
pub fn links_for_document(
    document_id: &str,
    text: &str,
    registry: &DatasetRegistry,
) -> Vec<LinkRow> {
    let mut rows = Vec::new();
    for mention in extract_mentions(document_id, text, &registry.aliases) {
        for candidate in resolve_mention(&mention, registry) {
            rows.push(LinkRow {
                from: document_id.to_string(),
                to: candidate.dataset_id,
                method: LinkMethod::Automatic,
                confidence: Some(candidate.confidence),
                passage: Some(mention.context_passage.clone()),
                note: Some(format!("{}@{}", mention.surface, mention.span.0)),
                from_ref: None,
                to_ref: None,
            });
        }
    }
    rows
}

/// Runs extraction over every `*.txt` file in a directory; the file stem is the document id.
pub fn extract_directory(dir: &Path, registry: &DatasetRegistry) -> Result<Vec<LinkRow>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(dir.to_path_buf()),
            _ => Error::Io(e),
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    files.sort();
    let per_doc: Vec<Vec<LinkRow>> = files
        .par_iter()
        .map(|path| {
            let text = std::fs::read_to_string(path)?;
            let doc = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default();
            Ok(links_for_document(doc, &text, registry))
        })
        .collect::<Result<_>>()?;
    Ok(per_doc.into_iter().flatten().collect())
}
