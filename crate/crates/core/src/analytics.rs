//! Usage-log analysis: event parsing, sessionization, positive-signal
//! classification and the usage report.
//!
//! A session is one client's run of events with no gap of `timeout` or more.
//! A session counts as positive when it contains at least one positive signal.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CategoryFilter;

pub const DEFAULT_VOCABULARY: &str = include_str!("../data/vocabulary.txt");
pub const DEFAULT_TIMEOUT_MINUTES: i64 = 30;
pub const DEFAULT_PATH_DEPTH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalGroup {
    DatasetMaterialsDownload,
    FulltextDirectDownload,
    FulltextExternal,
    ExportCitation,
    GotoSpecializedPortal,
    ViewLinkedResources,
}

/// Every positive action and its group.
pub const SIGNALS: &[(&str, SignalGroup)] = &[
    ("dataset_popup", SignalGroup::DatasetMaterialsDownload),
    ("questionnaire_popup", SignalGroup::DatasetMaterialsDownload),
    ("otherdocs_popup", SignalGroup::DatasetMaterialsDownload),
    ("codebook_popup", SignalGroup::DatasetMaterialsDownload),
    ("fulltext_download", SignalGroup::FulltextDirectDownload),
    ("goto_google_scholar", SignalGroup::FulltextExternal),
    ("goto_google_books", SignalGroup::FulltextExternal),
    ("export_bibtex", SignalGroup::ExportCitation),
    ("export_citavi", SignalGroup::ExportCitation),
    ("export_endnote", SignalGroup::ExportCitation),
    ("export_popup", SignalGroup::ExportCitation),
    ("export_apa", SignalGroup::ExportCitation),
    ("goto_zis", SignalGroup::GotoSpecializedPortal),
    ("goto_pretest", SignalGroup::GotoSpecializedPortal),
    ("goto_survey_guidelines", SignalGroup::GotoSpecializedPortal),
    ("goto_gml", SignalGroup::GotoSpecializedPortal),
    (
        "open_linked_resources_section",
        SignalGroup::ViewLinkedResources,
    ),
    ("goto_linked_resources", SignalGroup::ViewLinkedResources),
    ("click_on_linked_resource", SignalGroup::ViewLinkedResources),
    ("open_linked_resources", SignalGroup::ViewLinkedResources),
];

fn signal_group(action: &str) -> Option<SignalGroup> {
    SIGNALS
        .iter()
        .find(|(name, _)| *name == action)
        .map(|(_, g)| *g)
}

/// The set of action names the log accepts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    actions: BTreeSet<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        let mut v = Vocabulary {
            actions: BTreeSet::new(),
        };
        v.extend_from_str(DEFAULT_VOCABULARY);
        v
    }
}

impl Vocabulary {
    /// Adds one action per non-comment line.
    pub fn extend_from_str(&mut self, text: &str) {
        for line in text.lines() {
            let line = line.trim();
            if !line.is_empty() && !line.starts_with('#') {
                self.actions.insert(line.to_string());
            }
        }
    }

    pub fn contains(&self, action: &str) -> bool {
        self.actions.contains(action)
    }

    pub fn actions(&self) -> impl Iterator<Item = &str> {
        self.actions.iter().map(String::as_str)
    }

    pub fn classify_signal(&self, action: &str) -> Result<Option<SignalGroup>> {
        if !self.contains(action) {
            return Err(Error::UnknownAction(action.to_string()));
        }
        Ok(signal_group(action))
    }
}

/// Signal group of an action in the built-in vocabulary.
pub fn classify_signal(action: &str) -> Result<Option<SignalGroup>> {
    Vocabulary::default().classify_signal(action)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageEvent {
    pub timestamp: DateTime<Utc>,
    pub client_id: String,
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<CategoryFilter>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub has_links: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_record_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_category: Option<CategoryFilter>,
}

impl UsageEvent {
    pub fn validate(&self, vocabulary: &Vocabulary) -> Result<()> {
        if self.client_id.trim().is_empty() {
            return Err(Error::InvalidArgument("missing client_id".into()));
        }
        if !vocabulary.contains(&self.action) {
            return Err(Error::UnknownAction(self.action.clone()));
        }
        Ok(())
    }

    /// A record view showing linked resources.
    pub fn is_linked_view(&self) -> bool {
        self.has_links == Some(true) || self.action == "view_record_links"
    }
}

#[derive(Debug, Default)]
pub struct ParsedEvents {
    pub events: Vec<UsageEvent>,
    pub rejected: usize,
}

/// Parses one event per line; invalid lines are counted and skipped.
/// Output is sorted by (client_id, timestamp), stable for equal keys.
pub fn parse_events<R: BufRead>(reader: R, vocabulary: &Vocabulary) -> Result<ParsedEvents> {
    let mut parsed = ParsedEvents::default();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<UsageEvent>(&line) {
            Ok(event) if event.validate(vocabulary).is_ok() => parsed.events.push(event),
            _ => parsed.rejected += 1,
        }
    }
    sort_events(&mut parsed.events);
    Ok(parsed)
}

pub fn sort_events(events: &mut [UsageEvent]) {
    events.sort_by(|a, b| {
        a.client_id
            .cmp(&b.client_id)
            .then(a.timestamp.cmp(&b.timestamp))
    });
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub client_id: String,
    pub events: Vec<UsageEvent>,
}

impl Session {
    pub fn start(&self) -> DateTime<Utc> {
        self.events[0].timestamp
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.events[self.events.len() - 1].timestamp
    }

    pub fn duration(&self) -> Duration {
        self.end() - self.start()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Splits sorted events into sessions at every gap of at least `timeout`.
pub fn sessionize(events: &[UsageEvent], timeout: Duration) -> Vec<Session> {
    let mut sessions: Vec<Session> = Vec::new();
    for event in events {
        match sessions.last_mut() {
            Some(s) if s.client_id == event.client_id && event.timestamp - s.end() < timeout => {
                s.events.push(event.clone());
            }
            _ => sessions.push(Session {
                client_id: event.client_id.clone(),
                events: vec![event.clone()],
            }),
        }
    }
    sessions
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionClass {
    Search,
    ViewRecord,
    Positive,
    Other,
}

impl ActionClass {
    pub fn of(action: &str) -> Self {
        match action {
            "search" => ActionClass::Search,
            "view_record" | "view_record_links" => ActionClass::ViewRecord,
            a if signal_group(a).is_some() => ActionClass::Positive,
            _ => ActionClass::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionClass::Search => "search",
            ActionClass::ViewRecord => "view_record",
            ActionClass::Positive => "positive",
            ActionClass::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounts {
    pub step: usize,
    pub counts: BTreeMap<ActionClass, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SankeyRow {
    pub step: usize,
    pub from_class: ActionClass,
    pub to_class: ActionClass,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathAggregate {
    pub k: usize,
    pub sessions: usize,
    pub steps: Vec<StepCounts>,
    /// Transitions from step `step` to step `step + 1`.
    pub transitions: Vec<SankeyRow>,
}

/// Class counts for the first `k` steps and the transitions between them.
pub fn aggregate_paths(sessions: &[&Session], k: usize) -> Result<PathAggregate> {
    if k < 1 {
        return Err(Error::InvalidArgument(
            "path depth must be at least 1".into(),
        ));
    }
    let mut steps: BTreeMap<usize, BTreeMap<ActionClass, usize>> = BTreeMap::new();
    let mut transitions: BTreeMap<(usize, ActionClass, ActionClass), usize> = BTreeMap::new();
    for session in sessions {
        let classes: Vec<ActionClass> = session
            .events
            .iter()
            .take(k)
            .map(|e| ActionClass::of(&e.action))
            .collect();
        for (i, class) in classes.iter().enumerate() {
            *steps.entry(i + 1).or_default().entry(*class).or_default() += 1;
        }
        for (i, pair) in classes.windows(2).enumerate() {
            *transitions.entry((i + 1, pair[0], pair[1])).or_default() += 1;
        }
    }
    Ok(PathAggregate {
        k,
        sessions: sessions.len(),
        steps: steps
            .into_iter()
            .map(|(step, counts)| StepCounts { step, counts })
            .collect(),
        transitions: transitions
            .into_iter()
            .map(|((step, from_class, to_class), count)| SankeyRow {
                step,
                from_class,
                to_class,
                count,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryChangeStats {
    pub change_count: usize,
    pub sessions_with_change: usize,
    pub session_rate: f64,
    pub target_shares: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstActionStats {
    pub counts: BTreeMap<String, usize>,
    pub shares: BTreeMap<String, f64>,
    pub search_category_shares: BTreeMap<String, f64>,
    pub view_record_category_shares: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositiveStats {
    pub positive_sessions: usize,
    pub positive_session_rate: f64,
    pub signal_count: usize,
    pub mean_per_positive_session: f64,
    pub sd_per_positive_session: f64,
    pub mean_per_session: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSectionStats {
    pub linked_views: usize,
    pub sessions_with_linked_views: usize,
    pub sessions_opened: usize,
    pub open_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReports {
    pub all_sessions: PathAggregate,
    pub positive_sessions: PathAggregate,
    pub link_section_sessions: PathAggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageReport {
    pub session_count: usize,
    pub event_count: usize,
    pub rejected_events: usize,
    pub mean_duration_secs: f64,
    pub mean_actions_per_session: f64,
    pub action_counts: BTreeMap<String, usize>,
    pub search_category_shares: BTreeMap<String, f64>,
    pub category_changes: CategoryChangeStats,
    pub first_action: FirstActionStats,
    pub positive: PositiveStats,
    pub signal_counts: BTreeMap<String, usize>,
    pub signal_shares: BTreeMap<String, f64>,
    pub signal_group_shares: BTreeMap<SignalGroup, f64>,
    pub paths: PathReports,
    pub link_section: LinkSectionStats,
    pub link_direction_counts: BTreeMap<String, usize>,
    pub link_direction_shares: BTreeMap<String, f64>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Normalizes counts into shares; empty when there is nothing to count.
pub fn shares<K: Ord + Clone>(counts: &BTreeMap<K, usize>) -> BTreeMap<K, f64> {
    let total: usize = counts.values().sum();
    if total == 0 {
        return BTreeMap::new();
    }
    counts
        .iter()
        .map(|(k, v)| (k.clone(), *v as f64 / total as f64))
        .collect()
}

fn category_key(category: Option<CategoryFilter>) -> String {
    category.map_or_else(|| "unknown".to_string(), |c| c.to_string())
}

fn first_action_key(class: ActionClass) -> &'static str {
    match class {
        ActionClass::Search => "search",
        ActionClass::ViewRecord => "view_record",
        _ => "other",
    }
}

/// Population-free standard deviation from integer sums: sample sd (n - 1).
fn sample_sd(n: usize, sum: u64, sum_sq: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let n128 = n as i128;
    let numerator = n128 * sum_sq as i128 - (sum as i128) * (sum as i128);
    let variance = numerator as f64 / (n128 * (n128 - 1)) as f64;
    variance.max(0.0).sqrt()
}

pub fn signal_count(session: &Session) -> usize {
    session
        .events
        .iter()
        .filter(|e| signal_group(&e.action).is_some())
        .count()
}

fn opened_link_section(session: &Session) -> bool {
    session
        .events
        .iter()
        .any(|e| signal_group(&e.action) == Some(SignalGroup::ViewLinkedResources))
}

/// Computes every report field from a session list.
pub fn compute_report(sessions: &[Session], path_depth: usize) -> Result<UsageReport> {
    let n = sessions.len();
    let event_count: usize = sessions.iter().map(Session::len).sum();
    let total_ms: i64 = sessions
        .iter()
        .map(|s| s.duration().num_milliseconds())
        .sum();

    let mut action_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut search_categories: BTreeMap<String, usize> = BTreeMap::new();
    let mut change_targets: BTreeMap<String, usize> = BTreeMap::new();
    let mut sessions_with_change = 0;
    let mut first_counts: BTreeMap<String, usize> = ["search", "view_record", "other"]
        .iter()
        .map(|k| (k.to_string(), 0))
        .collect();
    let mut first_search_cats: BTreeMap<String, usize> = BTreeMap::new();
    let mut first_view_cats: BTreeMap<String, usize> = BTreeMap::new();
    let mut signal_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut group_counts: BTreeMap<SignalGroup, usize> = BTreeMap::new();
    let (mut positive_sessions, mut signal_total, mut signal_sq) = (0usize, 0u64, 0u64);
    let (mut linked_views, mut sessions_with_linked_views, mut sessions_opened) = (0, 0, 0);
    let mut directions: BTreeMap<String, usize> = BTreeMap::new();

    for session in sessions {
        let mut last_search: Option<String> = None;
        let mut changed = false;
        for event in &session.events {
            *action_counts.entry(event.action.clone()).or_default() += 1;
            if event.action == "search" {
                let cat = category_key(event.category);
                *search_categories.entry(cat.clone()).or_default() += 1;
                if let Some(prev) = &last_search {
                    if *prev != cat {
                        *change_targets.entry(cat.clone()).or_default() += 1;
                        changed = true;
                    }
                }
                last_search = Some(cat);
            }
            if let Some(group) = signal_group(&event.action) {
                *signal_counts.entry(event.action.clone()).or_default() += 1;
                *group_counts.entry(group).or_default() += 1;
            }
            if event.is_linked_view() {
                linked_views += 1;
            }
            if event.action == "click_on_linked_resource" {
                let key = format!(
                    "{}->{}",
                    category_key(event.category),
                    category_key(event.target_category)
                );
                *directions.entry(key).or_default() += 1;
            }
        }
        if changed {
            sessions_with_change += 1;
        }

        let first = &session.events[0];
        let first_class = first_action_key(ActionClass::of(&first.action));
        *first_counts.entry(first_class.to_string()).or_default() += 1;
        match first_class {
            "search" => {
                *first_search_cats
                    .entry(category_key(first.category))
                    .or_default() += 1
            }
            "view_record" => {
                *first_view_cats
                    .entry(category_key(first.category))
                    .or_default() += 1
            }
            _ => {}
        }

        let signals = signal_count(session) as u64;
        if signals > 0 {
            positive_sessions += 1;
            signal_total += signals;
            signal_sq += signals * signals;
        }
        if session.events.iter().any(UsageEvent::is_linked_view) {
            sessions_with_linked_views += 1;
            if opened_link_section(session) {
                sessions_opened += 1;
            }
        }
    }

    let positive: Vec<&Session> = sessions.iter().filter(|s| signal_count(s) > 0).collect();
    let link_section: Vec<&Session> = sessions.iter().filter(|s| opened_link_section(s)).collect();
    let all: Vec<&Session> = sessions.iter().collect();

    Ok(UsageReport {
        session_count: n,
        event_count,
        rejected_events: 0,
        mean_duration_secs: if n == 0 {
            0.0
        } else {
            total_ms as f64 / n as f64 / 1000.0
        },
        mean_actions_per_session: ratio(event_count, n),
        action_counts,
        search_category_shares: shares(&search_categories),
        category_changes: CategoryChangeStats {
            change_count: change_targets.values().sum(),
            sessions_with_change,
            session_rate: ratio(sessions_with_change, n),
            target_shares: shares(&change_targets),
        },
        first_action: FirstActionStats {
            shares: shares(&first_counts),
            counts: first_counts,
            search_category_shares: shares(&first_search_cats),
            view_record_category_shares: shares(&first_view_cats),
        },
        positive: PositiveStats {
            positive_sessions,
            positive_session_rate: ratio(positive_sessions, n),
            signal_count: signal_total as usize,
            mean_per_positive_session: if positive_sessions == 0 {
                0.0
            } else {
                signal_total as f64 / positive_sessions as f64
            },
            sd_per_positive_session: sample_sd(positive_sessions, signal_total, signal_sq),
            mean_per_session: if n == 0 {
                0.0
            } else {
                signal_total as f64 / n as f64
            },
        },
        signal_shares: shares(&signal_counts),
        signal_counts,
        signal_group_shares: shares(&group_counts),
        paths: PathReports {
            all_sessions: aggregate_paths(&all, path_depth)?,
            positive_sessions: aggregate_paths(&positive, path_depth)?,
            link_section_sessions: aggregate_paths(&link_section, path_depth)?,
        },
        link_section: LinkSectionStats {
            linked_views,
            sessions_with_linked_views,
            sessions_opened,
            open_rate: ratio(sessions_opened, sessions_with_linked_views),
        },
        link_direction_shares: shares(&directions),
        link_direction_counts: directions,
    })
}

/// Parses every log file, merges the events and computes the report.
pub fn analyze_files(
    paths: &[std::path::PathBuf],
    vocabulary: &Vocabulary,
    timeout: Duration,
    path_depth: usize,
) -> Result<UsageReport> {
    use rayon::prelude::*;
    let parsed: Vec<ParsedEvents> = paths
        .par_iter()
        .map(|path| {
            let file = std::fs::File::open(path).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::MissingArtifact(path.clone()),
                _ => Error::Io(e),
            })?;
            parse_events(std::io::BufReader::new(file), vocabulary)
        })
        .collect::<Result<_>>()?;
    let rejected = parsed.iter().map(|p| p.rejected).sum();
    let mut events: Vec<UsageEvent> = parsed.into_iter().flat_map(|p| p.events).collect();
    sort_events(&mut events);
    let mut report = compute_report(&sessionize(&events, timeout), path_depth)?;
    report.rejected_events = rejected;
    Ok(report)
}

/// Sankey-ready CSV: `step,from_class,to_class,count`.
pub fn write_sankey_csv<W: Write>(paths: &PathAggregate, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record(["step", "from_class", "to_class", "count"])
        .map_err(csv_error)?;
    for row in &paths.transitions {
        writer
            .write_record([
                row.step.to_string(),
                row.from_class.as_str().to_string(),
                row.to_class.as_str().to_string(),
                row.count.to_string(),
            ])
            .map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

/// Direction matrix CSV: `source_category,target_category,count`.
pub fn write_direction_csv<W: Write>(report: &UsageReport, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record(["source_category", "target_category", "count"])
        .map_err(csv_error)?;
    for (key, count) in &report.link_direction_counts {
        let (src, tgt) = key.split_once("->").unwrap_or((key, ""));
        writer
            .write_record([src, tgt, &count.to_string()])
            .map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
