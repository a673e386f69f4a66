use std::collections::BTreeSet;

use crate::model::Record;
use crate::search::tokenize::{tokenize_with_offsets, Token};

pub const SNIPPET_CHARS: usize = 200;
pub const OPEN_MARK: &str = "{{";
pub const CLOSE_MARK: &str = "}}";
const ELLIPSIS: char = '…';

/// Context snippet with query terms wrapped in `{{ }}`.
///
/// Looks in the description, then the full text; the title is only used when
/// both are empty. Without any term occurrence the description head is returned.
pub fn make_snippet(record: &Record, terms: &[String]) -> String {
    let wanted: BTreeSet<&str> = terms.iter().map(String::as_str).collect();
    let full_text = record.full_text.as_deref().unwrap_or("");
    let mut sources: Vec<&str> = [record.description.as_str(), full_text]
        .into_iter()
        .filter(|s| !s.trim().is_empty())
        .collect();
    if sources.is_empty() {
        sources.push(&record.title);
    }
    if !wanted.is_empty() {
        for text in &sources {
            if let Some(snippet) = highlight_window(text, &wanted) {
                return snippet;
            }
        }
    }
    head(sources[0])
}

fn head(text: &str) -> String {
    let chars: Vec<char> = text.trim().chars().collect();
    let mut out: String = chars.iter().take(SNIPPET_CHARS).collect();
    if chars.len() > SNIPPET_CHARS {
        out.push(ELLIPSIS);
    }
    out
}

fn highlight_window(text: &str, wanted: &BTreeSet<&str>) -> Option<String> {
    let chars: Vec<char> = text.chars().collect();
    let hits: Vec<Token> = tokenize_with_offsets(text)
        .into_iter()
        .filter(|t| wanted.contains(t.text.as_str()))
        .collect();
    if hits.is_empty() {
        return None;
    }

    // Earliest window starting at an occurrence that covers the most distinct terms.
    let (mut best_start, mut best_end, mut best_count) = (0, 0, 0);
    for (i, first) in hits.iter().enumerate() {
        let limit = first.start + SNIPPET_CHARS;
        let mut distinct = BTreeSet::new();
        let mut covered = first.end;
        for h in hits[i..].iter().take_while(|h| h.end <= limit) {
            distinct.insert(h.text.as_str());
            covered = h.end;
        }
        if distinct.len() > best_count {
            (best_start, best_end, best_count) = (first.start, covered, distinct.len());
        }
    }

    let slack = SNIPPET_CHARS.saturating_sub(best_end - best_start);
    let mut start = best_start.saturating_sub(slack / 2);
    let mut end = (start + SNIPPET_CHARS).min(chars.len());
    let is_word = |i: usize| chars[i].is_alphanumeric();
    while start > 0 && start < best_start && is_word(start - 1) && is_word(start) {
        start += 1;
    }
    while end < chars.len() && end > best_end && is_word(end - 1) && is_word(end) {
        end -= 1;
    }
    while start < best_start && chars[start].is_whitespace() {
        start += 1;
    }
    while end > best_end && chars[end - 1].is_whitespace() {
        end -= 1;
    }

    let mut out = String::new();
    if start > 0 {
        out.push(ELLIPSIS);
    }
    let mut pos = start;
    for h in hits.iter().filter(|h| h.start >= start && h.end <= end) {
        out.extend(&chars[pos..h.start]);
        out.push_str(OPEN_MARK);
        out.extend(&chars[h.start..h.end]);
        out.push_str(CLOSE_MARK);
        pos = h.end;
    }
    out.extend(&chars[pos..end]);
    if end < chars.len() {
        out.push(ELLIPSIS);
    }
    Some(out)
}
