use std::fmt::Write;
use std::str::FromStr;

use crate::model::{Category, Record};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CitationFormat {
    Bibtex,
    Ris,
    Endnote,
    ApaText,
}

impl FromStr for CitationFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bibtex" => Ok(CitationFormat::Bibtex),
            "ris" => Ok(CitationFormat::Ris),
            "endnote" => Ok(CitationFormat::Endnote),
            "apa_text" => Ok(CitationFormat::ApaText),
            other => Err(format!("unknown citation format `{other}`")),
        }
    }
}

fn bib_value(s: &str) -> String {
    s.chars().filter(|c| !matches!(c, '{' | '}')).collect()
}

fn sentence(s: &str) -> String {
    let s = s.trim();
    if s.ends_with(['.', '?', '!']) {
        s.to_string()
    } else {
        format!("{s}.")
    }
}

fn ris_type(category: Category) -> &'static str {
    match category {
        Category::Publication => "JOUR",
        Category::ResearchData => "DATA",
        Category::WebPage => "ELEC",
        Category::LibraryRecord => "BOOK",
        Category::QuestionVariable | Category::InstrumentTool => "GEN",
    }
}

fn endnote_type(category: Category) -> &'static str {
    match category {
        Category::Publication => "Journal Article",
        Category::ResearchData => "Dataset",
        Category::WebPage => "Web Page",
        Category::LibraryRecord => "Book",
        Category::QuestionVariable | Category::InstrumentTool => "Generic",
    }
}

/// Renders title, creators, year and DOI; absent fields are left out.
pub fn render_citation(record: &Record, format: CitationFormat) -> String {
    let doi = record.doi();
    match format {
        CitationFormat::Bibtex => {
            let mut parts = vec![format!("title={{{}}}", bib_value(&record.title))];
            if !record.creators.is_empty() {
                let authors: Vec<String> = record.creators.iter().map(|c| bib_value(c)).collect();
                parts.push(format!("author={{{}}}", authors.join(" and ")));
            }
            if let Some(y) = record.year {
                parts.push(format!("year={{{y}}}"));
            }
            if let Some(d) = doi {
                parts.push(format!("doi={{{}}}", bib_value(d)));
            }
            format!("@misc{{{}, {}}}\n", record.id, parts.join(", "))
        }
        CitationFormat::Ris => {
            let mut out = format!(
                "TY  - {}\nTI  - {}\n",
                ris_type(record.category),
                record.title
            );
            for c in &record.creators {
                let _ = writeln!(out, "AU  - {c}");
            }
            if let Some(y) = record.year {
                let _ = writeln!(out, "PY  - {y}");
            }
            if let Some(d) = doi {
                let _ = writeln!(out, "DO  - {d}");
            }
            out.push_str("ER  - \n");
            out
        }
        CitationFormat::Endnote => {
            let mut out = format!(
                "%0 {}\n%T {}\n",
                endnote_type(record.category),
                record.title
            );
            for c in &record.creators {
                let _ = writeln!(out, "%A {c}");
            }
            if let Some(y) = record.year {
                let _ = writeln!(out, "%D {y}");
            }
            if let Some(d) = doi {
                let _ = writeln!(out, "%R {d}");
            }
            out
        }
        CitationFormat::ApaText => {
            let year = record.year.map(|y| format!(" ({y})")).unwrap_or_default();
            let mut out = if record.creators.is_empty() {
                format!("{}{year}.", record.title.trim().trim_end_matches('.'))
            } else {
                let names = match record.creators.as_slice() {
                    [one] => one.clone(),
                    [init @ .., last] => format!("{} & {last}", init.join(", ")),
                    [] => unreachable!(),
                };
                let head = if year.is_empty() {
                    sentence(&names)
                } else {
                    format!("{names}{year}.")
                };
                format!("{head} {}", sentence(&record.title))
            };
            let _ = write!(out, " {}", sentence(&record.source));
            if let Some(d) = doi {
                let _ = write!(out, " https://doi.org/{d}");
            }
            out.push('\n');
            out
        }
    }
}
