//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails or exceeds its time limit.
//!
//! Set `DATANEXUS_BLESS=1` to rewrite the analytics golden file.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use datanexus::analytics::{
    self, compute_report, parse_events, sessionize, ActionClass, CategoryChangeStats,
    FirstActionStats, LinkSectionStats, PathAggregate, PathReports, PositiveStats, SankeyRow,
    SignalGroup, StepCounts, UsageReport, Vocabulary,
};
use datanexus::artifacts::{self, ArtifactDir};
use datanexus::linkstore::{
    build_link_summaries, classify_link_label, link_id, merge_duplicate_links, Link, LinkLabel,
    LinkMethod, ProvenanceEntry,
};
use datanexus::mentions::{
    extract_mentions, normalize_alias, resolve_mention, DatasetRegistry, RegistryEntry,
};
use datanexus::model::{Category, CategoryFilter, Record};
use datanexus::search::{build_index, execute_query, FacetField, SearchQuery, MAX_LIMIT};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    };
}

fn run(id: u32, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Check) -> bool {
    let started = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let elapsed = started.elapsed();
    let (passed, detail) = match outcome {
        Ok(d) => match limit {
            Some(l) if elapsed > l => (false, format!("{d}; too slow")),
            _ => (true, d),
        },
        Err(e) => (false, e),
    };
    let limit = limit.map_or_else(|| "no limit".to_string(), |l| format!("limit {l:?}"));
    println!(
        "criterion {id:>2} {} {name} [{:.3}s, {limit}] {detail}",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    passed
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        run(1, "label law", Some(secs(1)), label_law),
        run(
            2,
            "link merge conservation",
            Some(secs(5)),
            merge_conservation,
        ),
        run(
            3,
            "dedup and merge of planted DOI duplicates",
            Some(secs(5)),
            dedup_merge,
        ),
        run(4, "search oracle", Some(secs(10)), search_oracle),
        run(5, "BM25 ranking by hand", None, ranking_check),
        run(6, "mention extraction", Some(secs(2)), mention_extraction),
        run(7, "ambiguous alias confidence", None, confidence_rule),
        run(8, "analytics oracle", Some(secs(5)), analytics_oracle),
        run(
            9,
            "end-to-end scenario over the API",
            Some(secs(30)),
            end_to_end,
        ),
        run(
            10,
            "determinism and scale",
            Some(secs(300)),
            determinism_scale,
        ),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn at(secs: i64) -> DateTime<Utc> {
    DateTime::from_timestamp(secs, 0).unwrap()
}

// 1 --------------------------------------------------------------------------

fn label_law() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut values: Vec<f64> = vec![
        0.0,
        1.0,
        1.0 - f64::EPSILON / 2.0,
        0.5,
        0.999_999_999_999,
        f64::MIN_POSITIVE,
    ];
    while values.len() < 10_000 {
        values.push(if rng.gen_bool(0.05) {
            1.0
        } else {
            rng.gen_range(0.0..=1.0)
        });
    }
    let mut used = 0;
    for c in &values {
        let label = classify_link_label(*c).map_err(|e| e.to_string())?;
        ensure!(
            (label == LinkLabel::Used) == (*c == 1.0),
            "confidence {c:e} labeled {label:?}"
        );
        used += usize::from(label == LinkLabel::Used);
    }
    for bad in [-0.0001, 1.000_000_1, f64::NAN, f64::INFINITY] {
        ensure!(classify_link_label(bad).is_err(), "{bad} accepted");
    }
    Ok(format!("{} confidences, {used} used", values.len()))
}

// 2 --------------------------------------------------------------------------

type GroupKey = (String, String, LinkMethod);

fn provenance_sets(links: &[Link]) -> BTreeMap<GroupKey, BTreeSet<(String, Option<String>)>> {
    let mut out: BTreeMap<GroupKey, BTreeSet<(String, Option<String>)>> = BTreeMap::new();
    for l in links {
        let set = out
            .entry((l.from_id.clone(), l.to_id.clone(), l.method))
            .or_default();
        set.extend(
            l.provenance
                .iter()
                .map(|p| (p.origin.clone(), p.note.clone())),
        );
    }
    out
}

fn random_links(rng: &mut ChaCha8Rng) -> Vec<Link> {
    let ids = ["a", "b", "c", "d", "e", "f"];
    let origins = ["curated", "infolink", "extractor"];
    let notes = [None, Some("n1"), Some("n2"), Some("n3")];
    let mut links: Vec<Link> = Vec::new();
    for _ in 0..rng.gen_range(1..30) {
        let planted_duplicate = !links.is_empty() && rng.gen_bool(0.4);
        let mut link = if planted_duplicate {
            links.choose(rng).unwrap().clone()
        } else {
            let from = *ids.choose(rng).unwrap();
            let mut to = *ids.choose(rng).unwrap();
            while to == from {
                to = ids.choose(rng).unwrap();
            }
            let method = if rng.gen_bool(0.5) {
                LinkMethod::Manual
            } else {
                LinkMethod::Automatic
            };
            Link {
                id: link_id(from, to, method),
                from_id: from.into(),
                to_id: to.into(),
                from_category: Category::Publication,
                to_category: Category::ResearchData,
                method,
                confidence: 1.0,
                label: LinkLabel::Used,
                evidence_passage: None,
                provenance: Vec::new(),
            }
        };
        if link.method == LinkMethod::Automatic {
            link.confidence = f64::from(rng.gen_range(1..=20u32)) / 20.0;
            link.label = classify_link_label(link.confidence).unwrap();
            link.evidence_passage = Some(format!("passage {}", rng.gen_range(0..3)));
        }
        link.provenance = (0..rng.gen_range(1..=3))
            .map(|_| ProvenanceEntry {
                origin: origins.choose(rng).unwrap().to_string(),
                method: link.method,
                imported_at: at(1_700_000_000 + rng.gen_range(0..3) * 86_400),
                note: notes.choose(rng).unwrap().map(str::to_string),
            })
            .collect();
        links.push(link);
    }
    links
}

fn merge_conservation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut inputs, mut outputs) = (0, 0);
    for case in 0..1000 {
        let links = random_links(&mut rng);
        let merged = merge_duplicate_links(links.clone());
        inputs += links.len();
        outputs += merged.len();

        ensure!(
            provenance_sets(&links) == provenance_sets(&merged),
            "case {case}: provenance pairs changed"
        );
        for l in &merged {
            let mut seen = BTreeSet::new();
            ensure!(
                l.provenance
                    .iter()
                    .all(|p| seen.insert((p.origin.clone(), p.note.clone()))),
                "case {case}: duplicate (origin, note) kept"
            );
            let max = links
                .iter()
                .filter(|x| (&x.from_id, &x.to_id, x.method) == (&l.from_id, &l.to_id, l.method))
                .map(|x| x.confidence)
                .fold(0.0, f64::max);
            ensure!(
                l.confidence == max,
                "case {case}: confidence {} not the group max {max}",
                l.confidence
            );
            ensure!(
                (l.label == LinkLabel::Used) == (l.confidence == 1.0),
                "case {case}: label law broken"
            );
        }
        let keys: BTreeSet<_> = merged
            .iter()
            .map(|l| (&l.from_id, &l.to_id, l.method))
            .collect();
        ensure!(
            keys.len() == merged.len(),
            "case {case}: duplicate group survived"
        );
        ensure!(
            merge_duplicate_links(merged.clone()) == merged,
            "case {case}: not idempotent"
        );

        let mut shuffled = links.clone();
        shuffled.shuffle(&mut rng);
        let again = merge_duplicate_links(shuffled);
        ensure!(
            provenance_sets(&again) == provenance_sets(&merged),
            "case {case}: order-dependent provenance"
        );
    }
    Ok(format!("1000 cases, {inputs} links merged into {outputs}"))
}

// 3 --------------------------------------------------------------------------

fn write_lines(path: &Path, lines: &[serde_json::Value]) {
    let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
    std::fs::write(path, text).unwrap();
}

fn dedup_merge() -> Check {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let mut alpha = Vec::new();
    for i in 0..300 {
        let mut row = serde_json::json!({"id": format!("a{i}"), "title": format!("Alpha study number {i}"), "year": 2000 + i % 20});
        if i < 100 {
            row["doi"] = format!("10.5555/dup.{i}").into();
            row["dara"] = format!("dara-{i}").into();
        }
        alpha.push(row);
    }
    let mut beta = Vec::new();
    for i in 0..250 {
        let mut row =
            serde_json::json!({"id": format!("b{i}"), "title": format!("Beta report number {i}")});
        if i < 100 {
            row["doi"] = format!("https://doi.org/10.5555/DUP.{i}").into();
            row["urn"] = format!("urn:nbn:de:{i}").into();
        }
        beta.push(row);
    }
    write_lines(&root.join("alpha.jsonl"), &alpha);
    write_lines(&root.join("beta.jsonl"), &beta);
    std::fs::write(
        root.join("sources.json"),
        serde_json::json!({"sources": [
            {"key": "alpha", "path": "alpha.jsonl", "default_category": "research_data", "priority": 0},
            {"key": "beta", "path": "beta.jsonl", "default_category": "publication", "priority": 1}
        ]})
        .to_string(),
    )
    .unwrap();

    let mut rows = Vec::new();
    let mut expected: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for i in 0..100 {
        let (ta, tb) = (
            format!("alpha-a{}", 200 + i % 100),
            format!("beta-b{}", 150 + i % 100),
        );
        rows.push(serde_json::json!({"from": format!("alpha-a{i}"), "to": ta, "method": "manual"}));
        rows.push(serde_json::json!({"from": format!("beta-b{i}"), "to": tb, "method": "automatic", "confidence": 0.7}));
        expected.insert(format!("alpha-a{i}"), [ta, tb].into_iter().collect());
    }
    write_lines(&root.join("links.jsonl"), &rows);

    let out = ArtifactDir::new(root.join("build"));
    let snapshot = artifacts::run_ingest(&root.join("sources.json"), &out, at(0))
        .map_err(|e| e.to_string())?;
    let merged: usize = snapshot.source_report.values().map(|c| c.merged).sum();
    ensure!(merged == 100, "merged count {merged}");
    ensure!(
        snapshot.records.len() == 450,
        "{} records",
        snapshot.records.len()
    );
    for i in 0..100 {
        let id = format!("alpha-a{i}");
        let r = snapshot.records.get(&id).ok_or(format!("{id} missing"))?;
        let schemes: Vec<&str> = r.external_ids.keys().map(|s| s.as_str()).collect();
        ensure!(
            schemes == ["doi", "dara", "urn"],
            "{id}: external ids {schemes:?}"
        );
        ensure!(
            r.external_ids
                .values()
                .any(|v| *v == format!("urn:nbn:de:{i}")),
            "{id}: urn lost"
        );
        ensure!(
            snapshot.id_aliases.get(&format!("beta-b{i}")) == Some(&id),
            "beta-b{i} not aliased"
        );
    }

    let summary = artifacts::run_link_import(&out, &root.join("links.jsonl"), "planted", at(0))
        .map_err(|e| e.to_string())?;
    ensure!(
        summary.rejected == 0,
        "{} link rows rejected",
        summary.rejected
    );
    artifacts::run_link_merge(&out).map_err(|e| e.to_string())?;
    let links = out
        .load_links(artifacts::LINKS)
        .map_err(|e| e.to_string())?;
    let index = build_link_summaries(&snapshot.records, &links);
    for (id, want) in &expected {
        let got: BTreeSet<String> = index.summaries[id]
            .entries
            .iter()
            .filter(|e| e.direction == datanexus::linkstore::LinkDirection::Outgoing)
            .map(|e| e.record_id.clone())
            .collect();
        ensure!(&got == want, "{id}: linked {got:?}, expected {want:?}");
    }
    Ok("100 merged records carry doi+dara+urn and both sides' links".into())
}

// 4 --------------------------------------------------------------------------

const WORDS: &[&str] = &[
    "migration",
    "family",
    "gender",
    "roles",
    "survey",
    "europe",
    "labour",
    "market",
    "values",
    "religion",
    "trust",
    "politics",
    "health",
    "education",
    "income",
    "youth",
    "ageing",
    "work",
    "housing",
    "climate",
    "environment",
    "media",
    "voting",
    "identity",
    "welfare",
    "panel",
    "wave",
    "study",
    "attitudes",
    "network",
];
const NAMES: &[&str] = &[
    "Smith, Anna",
    "Weber, Jonas",
    "Meyer, Lena",
    "Keller, Paul",
    "Brown, Chris",
    "Rossi, Marco",
];

fn oracle_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn random_corpus(rng: &mut ChaCha8Rng, n: usize) -> BTreeMap<String, Record> {
    let words = |rng: &mut ChaCha8Rng, k: usize| -> String {
        (0..k)
            .map(|_| *WORDS.choose(rng).unwrap())
            .collect::<Vec<_>>()
            .join(" ")
    };
    (0..n)
        .map(|i| {
            let id = format!("r{i:05}");
            let cat = Category::ALL[rng.gen_range(0..6)];
            let k = rng.gen_range(2..6);
            let title = words(rng, k);
            let mut r = Record::new(id.clone(), cat, title, format!("s{}", rng.gen_range(1..5)));
            let k = rng.gen_range(0..12);
            r.description = words(rng, k);
            r.creators = (0..rng.gen_range(0..3))
                .map(|_| NAMES.choose(rng).unwrap().to_string())
                .collect();
            r.year = rng.gen_bool(0.8).then(|| rng.gen_range(1995..2021));
            r.language = ["en", "de", "fr"]
                .choose(rng)
                .filter(|_| rng.gen_bool(0.9))
                .map(|s| s.to_string());
            if rng.gen_bool(0.3) {
                let k = rng.gen_range(1..4);
                r.type_specific.insert("journal".into(), words(rng, k));
            }
            if rng.gen_bool(0.2) {
                let k = rng.gen_range(5..30);
                r.full_text = Some(words(rng, k));
            }
            (id, r)
        })
        .collect()
}

fn facet_value(r: &Record, f: FacetField) -> Option<String> {
    match f {
        FacetField::Year => r.year.map(|y| y.to_string()),
        FacetField::Source => Some(r.source.clone()),
        FacetField::Language => r.language.clone(),
    }
}

fn search_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let records = random_corpus(&mut rng, 1000);
    let index = build_index(&records, &Default::default());
    let doc_terms: BTreeMap<&String, BTreeSet<String>> = records
        .iter()
        .map(|(id, r)| {
            let mut texts = vec![r.title.clone(), r.description.clone(), r.creators.join(" ")];
            texts.extend(r.type_specific.values().cloned());
            texts.extend(r.full_text.clone());
            (
                id,
                texts
                    .iter()
                    .flat_map(|t| oracle_tokens(t).collect::<Vec<_>>())
                    .collect(),
            )
        })
        .collect();

    let mut total_hits = 0;
    for qn in 0..200 {
        let mut text: Vec<String> = (0..rng.gen_range(0..4))
            .map(|_| WORDS.choose(&mut rng).unwrap().to_string())
            .collect();
        if rng.gen_bool(0.15) {
            text.push(
                NAMES
                    .choose(&mut rng)
                    .unwrap()
                    .split(',')
                    .next()
                    .unwrap()
                    .to_uppercase(),
            );
        }
        if rng.gen_bool(0.05) {
            text.push("nonexistentterm".into());
        }
        let category = if rng.gen_bool(0.4) {
            CategoryFilter::All
        } else {
            CategoryFilter::Only(Category::ALL[rng.gen_range(0..6)])
        };
        let mut query = SearchQuery::parse(&text.join(" ")).category(category);
        for field in FacetField::ALL {
            if rng.gen_bool(0.25) {
                for _ in 0..rng.gen_range(1..3) {
                    let v = match field {
                        FacetField::Year => rng.gen_range(1995..2021).to_string(),
                        FacetField::Source => format!("s{}", rng.gen_range(1..5)),
                        FacetField::Language => {
                            ["en", "de", "fr"].choose(&mut rng).unwrap().to_string()
                        }
                    };
                    query = query.filter(field, v);
                }
            }
        }

        let terms: Vec<String> = text
            .iter()
            .flat_map(|t| oracle_tokens(t).collect::<Vec<_>>())
            .collect();
        let passes = |r: &Record, skip: Option<FacetField>| {
            query.facet_filters.iter().all(|(f, allowed)| {
                Some(*f) == skip || facet_value(r, *f).is_some_and(|v| allowed.contains(&v))
            })
        };
        let matched: Vec<&Record> = records
            .values()
            .filter(|r| terms.iter().all(|t| doc_terms[&r.id].contains(t)))
            .collect();
        let mut want_totals: BTreeMap<Category, usize> =
            Category::ALL.iter().map(|c| (*c, 0)).collect();
        let mut want_hits = BTreeSet::new();
        for r in &matched {
            if passes(r, None) {
                *want_totals.get_mut(&r.category).unwrap() += 1;
                if category.admits(r.category) {
                    want_hits.insert(r.id.clone());
                }
            }
        }
        let mut want_facets: BTreeMap<FacetField, BTreeMap<String, usize>> = BTreeMap::new();
        for f in FacetField::ALL {
            let counts = want_facets.entry(f).or_default();
            for r in matched
                .iter()
                .filter(|r| category.admits(r.category) && passes(r, Some(f)))
            {
                if let Some(v) = facet_value(r, f) {
                    *counts.entry(v).or_default() += 1;
                }
            }
        }

        let mut got_hits = BTreeSet::new();
        let mut offset = 0;
        let mut last_score = f64::INFINITY;
        loop {
            let page = execute_query(&index, &records, &query.clone().page(offset, MAX_LIMIT))
                .map_err(|e| e.to_string())?;
            ensure!(
                page.total_by_category == want_totals,
                "query {qn} {text:?}: totals {:?} vs {want_totals:?}",
                page.total_by_category
            );
            ensure!(
                page.total == want_hits.len(),
                "query {qn}: total {} vs {}",
                page.total,
                want_hits.len()
            );
            ensure!(page.facets == want_facets, "query {qn}: facets differ");
            for h in &page.hits {
                ensure!(h.score <= last_score, "query {qn}: scores not descending");
                last_score = h.score;
                got_hits.insert(h.id.clone());
            }
            offset += MAX_LIMIT;
            if page.hits.is_empty() || offset >= page.total {
                break;
            }
        }
        ensure!(
            got_hits == want_hits,
            "query {qn} {text:?}: hit sets differ"
        );
        total_hits += want_hits.len();
    }
    Ok(format!(
        "200 queries over 1000 records, {total_hits} hits checked"
    ))
}

// 5 --------------------------------------------------------------------------

fn ranking_check() -> Check {
    let mut d1 = Record::new("d1", Category::Publication, "migration policy", "s");
    d1.description = "a survey of policy".into();
    d1.creators = vec!["Smith, Anna".into()];
    let d2 = Record::new(
        "d2",
        Category::Publication,
        "migration migration survey data",
        "s",
    );
    let d3 = Record::new("d3", Category::Publication, "labour survey", "s");
    let records: BTreeMap<String, Record> = [d1, d2, d3]
        .into_iter()
        .map(|r| (r.id.clone(), r))
        .collect();
    let index = build_index(&records, &Default::default());

    // Title lengths 2, 4, 2 (avg 8/3); description 4, 0, 0 (avg 4/3); creators 2, 0, 0 (avg 2/3).
    let idf_df2 = (1.0f64 + (3.0 - 2.0 + 0.5) / (2.0 + 0.5)).ln();
    let idf_df1 = (1.0f64 + (3.0 - 1.0 + 0.5) / (1.0 + 0.5)).ln();
    let k1 = 1.2;
    let title_dl2 = 1.0 + k1 * (0.25 + 0.75 * 0.75);
    let title_dl4 = 1.0 + k1 * (0.25 + 0.75 * 1.5);
    let expected: [(&str, Vec<(&str, f64)>); 3] = [
        (
            "migration",
            vec![
                (
                    "d2",
                    3.0 * idf_df2 * 2.0 * 2.2 / (2.0 + k1 * (0.25 + 0.75 * 1.5)),
                ),
                ("d1", 3.0 * idf_df2 * 2.2 / title_dl2),
            ],
        ),
        (
            "survey",
            vec![
                ("d3", 3.0 * idf_df2 * 2.2 / title_dl2),
                ("d2", 3.0 * idf_df2 * 2.2 / title_dl4),
                ("d1", 1.5 * idf_df1 * 2.2 / (1.0 + k1 * (0.25 + 0.75 * 3.0))),
            ],
        ),
        (
            "smith",
            vec![("d1", 2.0 * idf_df1 * 2.2 / (1.0 + k1 * (0.25 + 0.75 * 3.0)))],
        ),
    ];
    let mut worst: f64 = 0.0;
    for (q, want) in &expected {
        let got =
            execute_query(&index, &records, &SearchQuery::parse(q)).map_err(|e| e.to_string())?;
        ensure!(got.hits.len() == want.len(), "{q}: {} hits", got.hits.len());
        for (hit, (id, score)) in got.hits.iter().zip(want) {
            ensure!(hit.id == *id, "{q}: rank order {} vs {id}", hit.id);
            let err = (hit.score - score).abs();
            ensure!(err <= 1e-9, "{q}/{id}: {} vs {score}", hit.score);
            worst = worst.max(err);
        }
    }
    Ok(format!("3 queries, max abs error {worst:e}"))
}

// 6 --------------------------------------------------------------------------

fn mention_registry() -> DatasetRegistry {
    let entry = |id: &str, title: &str, aliases: &[&str], years: &[i32]| RegistryEntry {
        id: id.into(),
        title: title.into(),
        aliases: aliases.iter().map(|s| s.to_string()).collect(),
        years: years.to_vec(),
    };
    DatasetRegistry::new(vec![
        entry("za5400", "ISSP 2010 Environment III", &["ISSP"], &[2010]),
        entry(
            "allbus",
            "German General Social Survey",
            &["ALLBUS"],
            &[2008, 2010, 2012],
        ),
        entry("ess", "European Social Survey", &["ESS"], &[]),
        entry("soep", "Socio-Economic Panel", &["SOEP"], &[]),
        entry("eb", "Eurobarometer 73.4", &["Eurobarometer"], &[2010]),
    ])
}

fn mention_extraction() -> Check {
    let registry = mention_registry();
    let surfaces = [
        "ISSP 2010",
        "ALLBUS",
        "European Social Survey",
        "ESS",
        "SOEP",
        "Eurobarometer",
        "ALLBUS 2012",
        "issp",
    ];
    let filler = [
        "The analysis covers several countries",
        "Results are robust to alternative specifications",
        "Respondents were asked about their attitudes",
        "Words like MISSPELLED or ALLBUSES or ESSAY must not match",
        "We thank the reviewers for comments",
        "The SOEPX panel and the ISSPs are fictional",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut planted = 0;
    let mut found_total = 0;
    for doc in 0..20 {
        let mut text = String::new();
        let mut spans: Vec<(usize, usize, String)> = Vec::new();
        for m in 0..3 {
            text.push_str(filler.choose(&mut rng).unwrap());
            text.push_str(". ");
            let surface = if doc == 0 && m == 0 {
                "ISSP 2010"
            } else {
                surfaces.choose(&mut rng).unwrap()
            };
            let lead = if doc == 0 && m == 0 {
                "In this study we used the "
            } else {
                "Data come from the "
            };
            text.push_str(lead);
            let start = text.chars().count();
            text.push_str(surface);
            spans.push((start, start + surface.chars().count(), surface.to_string()));
            text.push_str(" as described. ");
        }
        text.push_str(filler[3]);
        text.push('.');
        planted += spans.len();

        let doc_id = format!("doc{doc}");
        let mentions = extract_mentions(&doc_id, &text, &registry.aliases);
        for (start, end, surface) in &spans {
            let m = mentions
                .iter()
                .find(|m| m.span == (*start, *end))
                .ok_or(format!(
                    "{doc_id}: `{surface}` at {start} not found in {text:?}"
                ))?;
            ensure!(
                m.surface == *surface,
                "{doc_id}: surface {} vs {surface}",
                m.surface
            );
            ensure!(
                m.context_passage.contains(surface.as_str()),
                "{doc_id}: passage lacks `{surface}`"
            );
            ensure!(
                !resolve_mention(m, &registry).is_empty(),
                "{doc_id}: `{surface}` unresolved"
            );
        }
        ensure!(
            mentions.len() == spans.len(),
            "{doc_id}: {} mentions for {} planted",
            mentions.len(),
            spans.len()
        );
        if doc == 0 {
            let issp = &mentions[0];
            let c = resolve_mention(issp, &registry);
            ensure!(
                c.len() == 1 && c[0].dataset_id == "za5400",
                "ISSP 2010 resolved to {c:?}"
            );
        }
        found_total += mentions.len();
    }
    ensure!(planted == 60, "{planted} planted");
    Ok(format!(
        "{found_total}/{planted} planted mentions recovered, 0 false positives"
    ))
}

// 7 --------------------------------------------------------------------------

fn confidence_rule() -> Check {
    for k in [1usize, 2, 5] {
        let entries: Vec<RegistryEntry> = (0..k)
            .map(|j| RegistryEntry {
                id: format!("ds{j}"),
                title: format!("Ambi Study Wave {j}"),
                aliases: vec!["AMBI".into()],
                years: vec![2000],
            })
            .collect();
        let registry = DatasetRegistry::new(entries.clone());

        let text = "Estimates rely on data from AMBI in all models.";
        let m = &extract_mentions("d", text, &registry.aliases)[0];
        let c = resolve_mention(m, &registry);
        ensure!(c.len() == k, "k={k}: {} candidates", c.len());
        for cand in &c {
            ensure!(
                cand.similarity == 1.0 && cand.confidence == 1.0 / k as f64,
                "k={k}: {cand:?}"
            );
        }

        let text = "Estimates rely on AMBI 1999 throughout.";
        let m = &extract_mentions("d", text, &registry.aliases)[0];
        let c = resolve_mention(m, &registry);
        ensure!(c.len() == k, "k={k} with year: {} candidates", c.len());
        for cand in &c {
            let e = entries.iter().find(|e| e.id == cand.dataset_id).unwrap();
            let sim = strsim::normalized_levenshtein("ambi 1999", &normalize_alias(&e.title));
            ensure!(
                cand.similarity == sim,
                "k={k}: similarity {} vs {sim}",
                cand.similarity
            );
            ensure!(
                cand.confidence == sim / k as f64,
                "k={k}: confidence {} vs {}",
                cand.confidence,
                sim / k as f64
            );
        }
    }
    Ok("k = 1, 2, 5 exact".into())
}

// 8 --------------------------------------------------------------------------

#[derive(Clone)]
struct PlantedEvent {
    offset: i64,
    action: &'static str,
    category: Option<&'static str>,
    has_links: Option<bool>,
    target: Option<&'static str>,
}

struct PlantedSession {
    client: String,
    start: i64,
    events: Vec<PlantedEvent>,
}

const CATS: &[&str] = &[
    "research_data",
    "publication",
    "question_variable",
    "instrument_tool",
    "web_page",
    "library_record",
    "all",
];
const OTHER_ACTIONS: &[&str] = &[
    "page",
    "change_category",
    "goto_fulltext",
    "view_record_links",
];

fn plant_log(rng: &mut ChaCha8Rng) -> (Vec<PlantedSession>, Vec<String>, usize) {
    let mut sessions = Vec::new();
    let mut client_clock: BTreeMap<usize, i64> = BTreeMap::new();
    for _ in 0..200 {
        let client = rng.gen_range(0..60usize);
        let prev_end = client_clock.get(&client).copied();
        let start = match prev_end {
            Some(end) => end + rng.gen_range(31 * 60..4 * 3600),
            None => 1_530_000_000 + rng.gen_range(0..86_400),
        };
        let len = rng.gen_range(1..=25);
        let mut offset = 0;
        let mut events = Vec::new();
        for e in 0..len {
            if e > 0 {
                offset += rng.gen_range(5..1_799);
            }
            let roll = rng.gen_range(0..100);
            let action: &'static str = if roll < 30 {
                "search"
            } else if roll < 50 {
                "view_record"
            } else if roll < 65 {
                OTHER_ACTIONS.choose(rng).unwrap()
            } else {
                analytics::SIGNALS.choose(rng).unwrap().0
            };
            let category = (rng.gen_range(0..10) > 0).then(|| *CATS.choose(rng).unwrap());
            let has_links = (action == "view_record").then(|| rng.gen_bool(0.4));
            let target =
                (action == "click_on_linked_resource").then(|| *CATS[..6].choose(rng).unwrap());
            events.push(PlantedEvent {
                offset,
                action,
                category,
                has_links,
                target,
            });
        }
        client_clock.insert(client, start + offset);
        sessions.push(PlantedSession {
            client: format!("client{client:02}"),
            start,
            events,
        });
    }
    let mut lines = Vec::new();
    for s in &sessions {
        for e in &s.events {
            let mut v = serde_json::json!({
                "timestamp": at(s.start + e.offset).to_rfc3339(),
                "client_id": s.client,
                "action": e.action,
            });
            if let Some(c) = e.category {
                v["category"] = c.into();
            }
            if let Some(h) = e.has_links {
                v["has_links"] = h.into();
            }
            if let Some(t) = e.target {
                v["target_category"] = t.into();
                v["target_record_id"] = "rec-x".into();
            }
            lines.push(v.to_string());
        }
    }
    let invalid = 17;
    for i in 0..invalid {
        lines.push(match i % 3 {
            0 => format!(
                r#"{{"timestamp":"2018-01-01T00:00:00Z","client_id":"x","action":"bogus_{i}"}}"#
            ),
            1 => r#"{"timestamp":"2018-01-01T00:00:00Z","action":"search"}"#.to_string(),
            _ => "{not json".to_string(),
        });
    }
    lines.shuffle(rng);
    (sessions, lines, invalid)
}

fn group_of(action: &str) -> Option<SignalGroup> {
    analytics::SIGNALS
        .iter()
        .find(|(a, _)| *a == action)
        .map(|(_, g)| *g)
}

fn class_of(action: &str) -> ActionClass {
    if action == "search" {
        ActionClass::Search
    } else if action == "view_record" || action == "view_record_links" {
        ActionClass::ViewRecord
    } else if group_of(action).is_some() {
        ActionClass::Positive
    } else {
        ActionClass::Other
    }
}

fn oracle_shares<K: Ord + Clone>(counts: &BTreeMap<K, usize>) -> BTreeMap<K, f64> {
    let total: usize = counts.values().sum();
    if total == 0 {
        return BTreeMap::new();
    }
    counts
        .iter()
        .map(|(k, v)| (k.clone(), *v as f64 / total as f64))
        .collect()
}

fn oracle_paths(sessions: &[&PlantedSession], k: usize) -> PathAggregate {
    let mut steps: BTreeMap<usize, BTreeMap<ActionClass, usize>> = BTreeMap::new();
    let mut trans: BTreeMap<(usize, ActionClass, ActionClass), usize> = BTreeMap::new();
    for s in sessions {
        for i in 0..s.events.len().min(k) {
            let c = class_of(s.events[i].action);
            *steps.entry(i + 1).or_default().entry(c).or_default() += 1;
            if i + 1 < s.events.len().min(k) {
                *trans
                    .entry((i + 1, c, class_of(s.events[i + 1].action)))
                    .or_default() += 1;
            }
        }
    }
    PathAggregate {
        k,
        sessions: sessions.len(),
        steps: steps
            .into_iter()
            .map(|(step, counts)| StepCounts { step, counts })
            .collect(),
        transitions: trans
            .into_iter()
            .map(|((step, from_class, to_class), count)| SankeyRow {
                step,
                from_class,
                to_class,
                count,
            })
            .collect(),
    }
}

fn oracle_report(sessions: &[PlantedSession], rejected: usize) -> UsageReport {
    let n = sessions.len();
    let cat = |c: Option<&str>| c.unwrap_or("unknown").to_string();
    let events: usize = sessions.iter().map(|s| s.events.len()).sum();
    let total_ms: i64 = sessions
        .iter()
        .map(|s| s.events.last().unwrap().offset * 1000)
        .sum();

    let mut action_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut search_cats: BTreeMap<String, usize> = BTreeMap::new();
    let mut change_targets: BTreeMap<String, usize> = BTreeMap::new();
    let mut sessions_with_change = 0;
    let mut first: BTreeMap<String, usize> = ["search", "view_record", "other"]
        .iter()
        .map(|k| (k.to_string(), 0))
        .collect();
    let mut first_search: BTreeMap<String, usize> = BTreeMap::new();
    let mut first_view: BTreeMap<String, usize> = BTreeMap::new();
    let mut signal_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut group_counts: BTreeMap<SignalGroup, usize> = BTreeMap::new();
    let mut per_session_signals: Vec<u64> = Vec::new();
    let (mut linked_views, mut with_linked, mut opened) = (0, 0, 0);
    let mut directions: BTreeMap<String, usize> = BTreeMap::new();

    for s in sessions {
        let searches: Vec<String> = s
            .events
            .iter()
            .filter(|e| e.action == "search")
            .map(|e| cat(e.category))
            .collect();
        let changes: Vec<&String> = searches
            .windows(2)
            .filter(|w| w[0] != w[1])
            .map(|w| &w[1])
            .collect();
        if !changes.is_empty() {
            sessions_with_change += 1;
        }
        for t in changes {
            *change_targets.entry(t.clone()).or_default() += 1;
        }
        for c in searches {
            *search_cats.entry(c).or_default() += 1;
        }
        let e0 = &s.events[0];
        match class_of(e0.action) {
            ActionClass::Search => {
                *first.get_mut("search").unwrap() += 1;
                *first_search.entry(cat(e0.category)).or_default() += 1;
            }
            ActionClass::ViewRecord => {
                *first.get_mut("view_record").unwrap() += 1;
                *first_view.entry(cat(e0.category)).or_default() += 1;
            }
            _ => *first.get_mut("other").unwrap() += 1,
        }
        let mut signals = 0u64;
        let mut has_linked = false;
        let mut opened_section = false;
        for e in &s.events {
            *action_counts.entry(e.action.to_string()).or_default() += 1;
            if let Some(g) = group_of(e.action) {
                signals += 1;
                *signal_counts.entry(e.action.to_string()).or_default() += 1;
                *group_counts.entry(g).or_default() += 1;
                opened_section |= g == SignalGroup::ViewLinkedResources;
            }
            if e.has_links == Some(true) || e.action == "view_record_links" {
                linked_views += 1;
                has_linked = true;
            }
            if e.action == "click_on_linked_resource" {
                *directions
                    .entry(format!("{}->{}", cat(e.category), cat(e.target)))
                    .or_default() += 1;
            }
        }
        if signals > 0 {
            per_session_signals.push(signals);
        }
        if has_linked {
            with_linked += 1;
            opened += usize::from(opened_section);
        }
    }

    let p = per_session_signals.len();
    let sum: u64 = per_session_signals.iter().sum();
    let sum_sq: u64 = per_session_signals.iter().map(|x| x * x).sum();
    let sd = if p < 2 {
        0.0
    } else {
        let (pn, s, q) = (p as i128, sum as i128, sum_sq as i128);
        ((pn * q - s * s) as f64 / (pn * (pn - 1)) as f64).sqrt()
    };
    let positive: Vec<&PlantedSession> = sessions
        .iter()
        .filter(|s| s.events.iter().any(|e| group_of(e.action).is_some()))
        .collect();
    let section: Vec<&PlantedSession> = sessions
        .iter()
        .filter(|s| {
            s.events
                .iter()
                .any(|e| group_of(e.action) == Some(SignalGroup::ViewLinkedResources))
        })
        .collect();
    let all: Vec<&PlantedSession> = sessions.iter().collect();

    UsageReport {
        session_count: n,
        event_count: events,
        rejected_events: rejected,
        mean_duration_secs: total_ms as f64 / n as f64 / 1000.0,
        mean_actions_per_session: events as f64 / n as f64,
        action_counts,
        search_category_shares: oracle_shares(&search_cats),
        category_changes: CategoryChangeStats {
            change_count: change_targets.values().sum(),
            sessions_with_change,
            session_rate: sessions_with_change as f64 / n as f64,
            target_shares: oracle_shares(&change_targets),
        },
        first_action: FirstActionStats {
            shares: oracle_shares(&first),
            counts: first,
            search_category_shares: oracle_shares(&first_search),
            view_record_category_shares: oracle_shares(&first_view),
        },
        positive: PositiveStats {
            positive_sessions: p,
            positive_session_rate: p as f64 / n as f64,
            signal_count: sum as usize,
            mean_per_positive_session: sum as f64 / p as f64,
            sd_per_positive_session: sd,
            mean_per_session: sum as f64 / n as f64,
        },
        signal_shares: oracle_shares(&signal_counts),
        signal_counts,
        signal_group_shares: oracle_shares(&group_counts),
        paths: PathReports {
            all_sessions: oracle_paths(&all, 8),
            positive_sessions: oracle_paths(&positive, 8),
            link_section_sessions: oracle_paths(&section, 8),
        },
        link_section: LinkSectionStats {
            linked_views,
            sessions_with_linked_views: with_linked,
            sessions_opened: opened,
            open_rate: opened as f64 / with_linked as f64,
        },
        link_direction_shares: oracle_shares(&directions),
        link_direction_counts: directions,
    }
}

fn analytics_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (sessions, lines, invalid) = plant_log(&mut rng);
    let text = lines.join("\n");
    let parsed =
        parse_events(text.as_bytes(), &Vocabulary::default()).map_err(|e| e.to_string())?;
    ensure!(
        parsed.rejected == invalid,
        "rejected {} vs {invalid}",
        parsed.rejected
    );
    let found = sessionize(&parsed.events, chrono::Duration::minutes(30));
    ensure!(
        found.len() == sessions.len(),
        "{} sessions recovered, {} planted",
        found.len(),
        sessions.len()
    );
    let mut report = compute_report(&found, 8).map_err(|e| e.to_string())?;
    report.rejected_events = parsed.rejected;

    let mut planted: Vec<&PlantedSession> = sessions.iter().collect();
    planted.sort_by(|a, b| (a.client.as_str(), a.start).cmp(&(b.client.as_str(), b.start)));
    let sorted: Vec<PlantedSession> = planted
        .into_iter()
        .map(|s| PlantedSession {
            client: s.client.clone(),
            start: s.start,
            events: s.events.clone(),
        })
        .collect();
    let expected = oracle_report(&sorted, invalid);

    macro_rules! same {
        ($($field:ident).+) => {
            ensure!(report.$($field).+ == expected.$($field).+, "field {} differs", stringify!($($field).+));
        };
    }
    same!(session_count);
    same!(event_count);
    same!(mean_duration_secs);
    same!(mean_actions_per_session);
    same!(action_counts);
    same!(search_category_shares);
    same!(category_changes);
    same!(first_action);
    same!(positive);
    same!(signal_counts);
    same!(signal_shares);
    same!(signal_group_shares);
    same!(paths.all_sessions);
    same!(paths.positive_sessions);
    same!(paths.link_section_sessions);
    same!(link_section);
    same!(link_direction_counts);
    same!(link_direction_shares);
    ensure!(report == expected, "report differs from oracle");

    for shares in [
        &report.search_category_shares,
        &report.category_changes.target_shares,
        &report.first_action.shares,
        &report.signal_shares,
        &report.link_direction_shares,
    ] {
        let total: f64 = shares.values().sum();
        ensure!(
            shares.is_empty() || (total - 1.0).abs() <= 1e-9,
            "shares sum to {total}"
        );
    }
    for agg in [&report.paths.all_sessions, &report.paths.positive_sessions] {
        for step in 1..agg.k {
            let out: usize = agg
                .transitions
                .iter()
                .filter(|t| t.step == step)
                .map(|t| t.count)
                .sum();
            let longer = agg
                .steps
                .iter()
                .find(|s| s.step == step + 1)
                .map_or(0, |s| s.counts.values().sum());
            ensure!(out == longer, "path conservation at step {step}");
        }
    }

    let golden_path = common::fixtures().join("acceptance_usage_report.json");
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
    json.push('\n');
    if std::env::var_os("DATANEXUS_BLESS").is_some() {
        std::fs::write(&golden_path, &json).map_err(|e| e.to_string())?;
    }
    let golden = std::fs::read_to_string(&golden_path)
        .map_err(|e| format!("{}: {e}", golden_path.display()))?;
    ensure!(
        golden == json,
        "report differs from golden file {}",
        golden_path.display()
    );
    Ok(format!(
        "{} sessions, {} events, all fields equal oracle and golden file",
        report.session_count, report.event_count
    ))
}

// 9 --------------------------------------------------------------------------

fn end_to_end() -> Check {
    use axum::body::Body;
    use axum::http::{Request, StatusCode};
    use http_body_util::BodyExt;
    use tower::ServiceExt;

    let tmp = tempfile::tempdir().unwrap();
    let dir = common::build_fixture(&tmp.path().join("build"));
    let state = datanexus::api::AppState::new(
        Vocabulary::default(),
        Some(&tmp.path().join("events.jsonl")),
    )
    .map_err(|e| e.to_string())?
    .with_artifacts(dir);
    state.reload().map_err(|e| e.to_string())?;
    let app = datanexus::api::router(std::sync::Arc::new(state));

    let runtime = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .unwrap();
    runtime.block_on(async move {
        let get = |uri: String| {
            let app = app.clone();
            async move {
                let resp = app
                    .oneshot(Request::get(uri.as_str()).body(Body::empty()).unwrap())
                    .await
                    .unwrap();
                let status = resp.status();
                let body = resp.into_body().collect().await.unwrap().to_bytes();
                (
                    status,
                    serde_json::from_slice::<serde_json::Value>(&body).unwrap(),
                )
            }
        };
        let (s, results) = get("/api/search?q=migration".into()).await;
        ensure!(s == StatusCode::OK, "search status {s}");
        let publication = results["hits"]
            .as_array()
            .unwrap()
            .iter()
            .find(|h| {
                h["category"] == "publication"
                    && h["link_counts"]["research_data"].as_u64() > Some(0)
            })
            .ok_or("no linked publication among migration hits")?;
        let pub_id = publication["id"].as_str().unwrap().to_string();

        let (s, detail) = get(format!("/api/record/{pub_id}")).await;
        ensure!(
            s == StatusCode::OK && detail["record"]["category"] == "publication",
            "detail of {pub_id}"
        );

        let (_, links) = get(format!("/api/record/{pub_id}/links?type=research_data")).await;
        let entries = links["entries"].as_array().unwrap();
        let manual = entries
            .iter()
            .find(|e| e["method"] == "manual" && e["label"] == "used")
            .ok_or("no manual used link")?;
        let auto = entries
            .iter()
            .find(|e| e["method"] == "automatic" && e["label"] == "mentioned")
            .ok_or("no automatic mentioned link")?;
        ensure!(
            auto["evidence_passage"]
                .as_str()
                .is_some_and(|p| !p.is_empty()),
            "automatic link has no passage"
        );

        let dataset = manual["record_id"].as_str().unwrap();
        let (_, back) = get(format!("/api/record/{dataset}/links?type=publication")).await;
        ensure!(
            back["entries"]
                .as_array()
                .unwrap()
                .iter()
                .any(|e| e["record_id"] == pub_id.as_str()),
            "{dataset} does not list {pub_id} back"
        );
        let (_, inst) = get(format!("/api/record/{dataset}/links?type=instrument_tool")).await;
        ensure!(
            !inst["entries"].as_array().unwrap().is_empty(),
            "{dataset} has no instrument link"
        );
        Ok(format!(
            "{pub_id} -> {dataset} (used), -> {} (mentioned), back-link and instrument {} present",
            auto["record_id"].as_str().unwrap(),
            inst["entries"][0]["record_id"].as_str().unwrap()
        ))
    })
}

// 10 -------------------------------------------------------------------------

fn scale_inputs(root: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let vocab: Vec<String> = (0..2000).map(|i| format!("w{i}")).collect();
    let sizes = [
        ("a", 45_000usize, "research_data"),
        ("b", 40_000, "publication"),
        ("c", 20_000, "library_record"),
    ];
    let mut sources = Vec::new();
    let mut ids = Vec::new();
    for (key, n, cat) in sizes {
        let mut text = String::new();
        for i in 0..n {
            let words = |rng: &mut ChaCha8Rng, k: usize| {
                (0..k)
                    .map(|_| vocab.choose(rng).unwrap().as_str())
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let mut row = serde_json::json!({
                "id": i.to_string(),
                "title": words(&mut rng, 6),
                "description": words(&mut rng, 25),
                "creators": [format!("Author{}, A.", rng.gen_range(0..5000))],
                "year": rng.gen_range(1950..2021),
                "language": if rng.gen_bool(0.5) { "en" } else { "de" },
            });
            // 5,000 records in b and c duplicate a's DOIs so 100,000 records remain after merging.
            let doi_ix = match key {
                "a" => Some(i),
                "b" if i < 3_000 => Some(i),
                "c" if i < 2_000 => Some(10_000 + i),
                _ => None,
            };
            if let Some(d) = doi_ix {
                row["doi"] = format!("10.9000/{d}").into();
            }
            writeln!(text, "{row}").unwrap();
            ids.push(format!("{key}-{i}"));
        }
        std::fs::write(root.join(format!("{key}.jsonl")), text).unwrap();
        sources.push(serde_json::json!({"key": key, "path": format!("{key}.jsonl"), "default_category": cat}));
    }
    std::fs::write(
        root.join("sources.json"),
        serde_json::json!({ "sources": sources }).to_string(),
    )
    .unwrap();

    let mut links = String::new();
    for _ in 0..50_000 {
        let from = ids.choose(&mut rng).unwrap();
        let to = ids.choose(&mut rng).unwrap();
        let row = if rng.gen_bool(0.5) {
            serde_json::json!({"from": from, "to": to, "method": "manual"})
        } else {
            serde_json::json!({"from": from, "to": to, "method": "automatic", "confidence": rng.gen_range(1..100) as f64 / 100.0, "passage": "p"})
        };
        writeln!(links, "{row}").unwrap();
    }
    std::fs::write(root.join("links.jsonl"), links).unwrap();
}

fn scale_pipeline(input: &Path, out: &Path) -> Result<(usize, usize), String> {
    let dir = ArtifactDir::new(out);
    let t = at(1_700_000_000);
    let snapshot =
        artifacts::run_ingest(&input.join("sources.json"), &dir, t).map_err(|e| e.to_string())?;
    artifacts::run_link_import(&dir, &input.join("links.jsonl"), "bulk", t)
        .map_err(|e| e.to_string())?;
    let merged = artifacts::run_link_merge(&dir).map_err(|e| e.to_string())?;
    artifacts::run_build_index(&dir).map_err(|e| e.to_string())?;
    Ok((snapshot.records.len(), merged.links))
}

fn determinism_scale() -> Check {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("input");
    std::fs::create_dir_all(&input).unwrap();
    scale_inputs(&input);

    let started = Instant::now();
    let (records, links) = scale_pipeline(&input, &tmp.path().join("run1"))?;
    let first_run = started.elapsed();
    let again = scale_pipeline(&input, &tmp.path().join("run2"))?;
    ensure!(again == (records, links), "counts differ between runs");
    ensure!(records == 100_000, "{records} records after merge");
    ensure!(links >= 45_000, "only {links} links");

    let names = [
        artifacts::SNAPSHOT,
        artifacts::SNAPSHOT_META,
        artifacts::POOL,
        "links.import.bulk.jsonl",
        artifacts::LINKS,
        artifacts::DANGLING,
        artifacts::INDEX,
    ];
    for name in names {
        let a = std::fs::read(tmp.path().join("run1").join(name))
            .map_err(|e| format!("{name}: {e}"))?;
        let b = std::fs::read(tmp.path().join("run2").join(name))
            .map_err(|e| format!("{name}: {e}"))?;
        ensure!(a == b, "{name} differs between runs");
    }
    Ok(format!(
        "{records} records, {links} links, {} artifacts byte-identical, one run {:.1}s",
        names.len(),
        first_run.as_secs_f64()
    ))
}
