#![allow(dead_code)]

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use datanexus::artifacts::{self, ArtifactDir};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixed_time() -> DateTime<Utc> {
    "2023-11-14T22:13:20Z".parse().unwrap()
}

/// Runs every pipeline stage over the bundled fixtures into `out`.
pub fn build_fixture(out: &Path) -> ArtifactDir {
    let dir = ArtifactDir::new(out);
    let fx = fixtures();
    artifacts::run_ingest(&fx.join("sources.json"), &dir, fixed_time()).unwrap();
    artifacts::run_link_import(
        &dir,
        &fx.join("links/curated.jsonl"),
        "curated",
        fixed_time(),
    )
    .unwrap();
    artifacts::run_link_import(
        &dir,
        &fx.join("links/infolink.jsonl"),
        "infolink",
        fixed_time(),
    )
    .unwrap();
    artifacts::run_link_extract(
        &dir,
        &fx.join("fulltexts"),
        &fx.join("registry.jsonl"),
        artifacts::EXTRACTOR_ORIGIN,
        fixed_time(),
    )
    .unwrap();
    artifacts::run_link_merge(&dir).unwrap();
    artifacts::run_build_index(&dir).unwrap();
    dir
}
