use chrono::{DateTime, TimeZone, Utc};

/// Current time, pinned by `SOURCE_DATE_EPOCH` when set so rebuilds are reproducible.
pub fn build_time() -> DateTime<Utc> {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse::<i64>().ok())
        .and_then(|secs| Utc.timestamp_opt(secs, 0).single())
        .unwrap_or_else(Utc::now)
}
