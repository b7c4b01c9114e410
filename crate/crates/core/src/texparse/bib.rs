//! Tolerant parsing of `.bib` databases and `thebibliography` environments.
//! Every entry keeps its raw text; structured fields are best effort.

use std::sync::LazyLock;

use regex::Regex;

use super::convert::{inline_text, strip_comments};
use super::{BibEntry, Bibliography, TexError};
use crate::ingest::LatexBundle;

static YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(19|20)\d{2}\b").unwrap());
static AND: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\s+and\s+").unwrap());

/// Entries from `.bib` sources first, then embedded or `.bbl` bibliography
/// environments. The first definition of a key wins.
pub fn parse_bibliography(bundle: &LatexBundle) -> Result<Bibliography, TexError> {
    if bundle.main_source.trim().is_empty() {
        return Err(TexError::EmptySource);
    }
    let mut bib = Bibliography::default();
    for source in &bundle.bib_sources {
        for (key, entry) in parse_bibtex(source) {
            bib.entries.entry(key).or_insert(entry);
        }
    }
    let main = strip_comments(&bundle.main_source);
    let embedded = std::iter::once(main.as_str()).chain(
        bundle
            .bib_sources
            .iter()
            .map(String::as_str)
            .filter(|s| s.contains("\\bibitem")),
    );
    for source in embedded {
        for (key, entry) in parse_thebibliography(source) {
            bib.entries.entry(key).or_insert(entry);
        }
    }
    if bib.is_empty() {
        Err(TexError::NoBibliography)
    } else {
        Ok(bib)
    }
}

fn clean(value: &str) -> String {
    inline_text(value)
}

fn year_of(text: &str) -> Option<i32> {
    YEAR.find(text).and_then(|m| m.as_str().parse().ok())
}

fn split_authors(value: &str) -> Vec<String> {
    AND.split(value)
        .map(clean)
        .filter(|a| !a.is_empty())
        .collect()
}

/// Parse BibTeX entries into `(key, entry)` pairs in source order.
pub(crate) fn parse_bibtex(src: &str) -> Vec<(String, BibEntry)> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while let Some(off) = src[i..].find('@') {
        let at = i + off;
        let mut j = at + 1;
        while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
            j += 1;
        }
        let kind = src[at + 1..j].to_ascii_lowercase();
        while j < bytes.len() && bytes[j].is_ascii_whitespace() {
            j += 1;
        }
        let Some(&open) = bytes.get(j) else { break };
        if kind.is_empty() || (open != b'{' && open != b'(') {
            i = at + 1;
            continue;
        }
        let close = if open == b'{' { b'}' } else { b')' };
        let Some(end) = matching(bytes, j, open, close) else {
            // unterminated entry: skip the marker and keep scanning
            i = at + 1;
            continue;
        };
        let inner = &src[j + 1..end];
        i = end + 1;
        if matches!(kind.as_str(), "comment" | "string" | "preamble") {
            continue;
        }
        let raw = src[at..=end].to_string();
        if let Some((key, fields)) = parse_fields(inner) {
            let field = |name: &str| {
                fields
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, v)| v.as_str())
            };
            let title = field("title").map(clean).unwrap_or_default();
            let authors = field("author").map(split_authors).unwrap_or_default();
            let year = field("year")
                .and_then(year_of)
                .or_else(|| field("date").and_then(year_of));
            out.push((
                key,
                BibEntry {
                    title,
                    authors,
                    year,
                    raw,
                },
            ));
        }
    }
    out
}

fn matching(bytes: &[u8], open_at: usize, open: u8, close: u8) -> Option<usize> {
    let mut depth = 0i32;
    let mut k = open_at;
    while k < bytes.len() {
        match bytes[k] {
            b'\\' => k += 1,
            b if b == open => depth += 1,
            b if b == close => {
                depth -= 1;
                if depth == 0 {
                    return Some(k);
                }
            }
            // inner braces when the entry is delimited by parentheses
            b'{' if open != b'{' => {
                k = matching(bytes, k, b'{', b'}')?;
            }
            _ => {}
        }
        k += 1;
    }
    None
}

fn parse_fields(inner: &str) -> Option<(String, Vec<(String, String)>)> {
    let comma = inner.find(',').unwrap_or(inner.len());
    let key = inner[..comma].trim().to_string();
    if key.is_empty() || key.contains(char::is_whitespace) {
        return None;
    }
    let bytes = inner.as_bytes();
    let mut fields = Vec::new();
    let mut i = comma;
    loop {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b',') {
            i += 1;
        }
        if i >= bytes.len() {
            break;
        }
        let name_start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'=' {
            i += 1;
        }
        let name = inner[name_start..i].to_ascii_lowercase();
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if bytes.get(i) != Some(&b'=') {
            break;
        }
        i += 1;
        let mut value = String::new();
        loop {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            match bytes.get(i) {
                Some(b'{') => {
                    let end = matching(bytes, i, b'{', b'}').unwrap_or(bytes.len() - 1);
                    value.push_str(&inner[i + 1..end.max(i + 1)]);
                    i = end + 1;
                }
                Some(b'"') => {
                    let mut k = i + 1;
                    let mut depth = 0;
                    while k < bytes.len() {
                        match bytes[k] {
                            b'{' => depth += 1,
                            b'}' => depth -= 1,
                            b'"' if depth == 0 => break,
                            _ => {}
                        }
                        k += 1;
                    }
                    value.push_str(&inner[i + 1..k.min(bytes.len())]);
                    i = k + 1;
                }
                Some(_) => {
                    let start = i;
                    while i < bytes.len()
                        && bytes[i] != b','
                        && bytes[i] != b'#'
                        && !bytes[i].is_ascii_whitespace()
                    {
                        i += 1;
                    }
                    value.push_str(&inner[start..i]);
                }
                None => break,
            }
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if bytes.get(i) == Some(&b'#') {
                i += 1;
                continue;
            }
            break;
        }
        if !name.is_empty() {
            fields.push((name, value));
        }
    }
    Some((key, fields))
}

/// Parse `\bibitem` entries of every `thebibliography` environment in `src`.
pub(crate) fn parse_thebibliography(src: &str) -> Vec<(String, BibEntry)> {
    let mut out = Vec::new();
    let mut rest = src;
    while let Some(start) = rest.find("\\begin{thebibliography}") {
        let body = &rest[start + "\\begin{thebibliography}".len()..];
        let (env, next) = match body.find("\\end{thebibliography}") {
            Some(end) => (&body[..end], &body[end..]),
            None => (body, ""),
        };
        for item in env.split("\\bibitem").skip(1) {
            if let Some(parsed) = parse_bibitem(item) {
                out.push(parsed);
            }
        }
        rest = next;
        if rest.is_empty() {
            break;
        }
        rest = &rest["\\end{thebibliography}".len().min(rest.len())..];
    }
    out
}

fn parse_bibitem(item: &str) -> Option<(String, BibEntry)> {
    let mut s = item.trim_start();
    if s.starts_with('[') {
        let end = matching(s.as_bytes(), 0, b'[', b']')?;
        s = s[end + 1..].trim_start();
    }
    if !s.starts_with('{') {
        return None;
    }
    let end = matching(s.as_bytes(), 0, b'{', b'}')?;
    let key = s[1..end].trim().to_string();
    if key.is_empty() {
        return None;
    }
    let text = &s[end + 1..];
    let blocks: Vec<&str> = text.split("\\newblock").collect();
    let raw = clean(&blocks.join(" "));
    if raw.is_empty() {
        return None;
    }
    let title = if blocks.len() >= 2 {
        clean(blocks[1]).trim_end_matches(['.', ',']).trim().to_string()
    } else {
        quoted_title(text).unwrap_or_default()
    };
    let authors = if blocks.len() >= 2 {
        let names = clean(blocks[0]);
        let names = names.trim_end_matches('.');
        names
            .split([',', ';'])
            .flat_map(|part| AND.split(part).map(str::to_string).collect::<Vec<_>>())
            .map(|a| a.trim().to_string())
            .filter(|a| !a.is_empty())
            .collect()
    } else {
        Vec::new()
    };
    Some((
        key,
        BibEntry {
            title,
            authors,
            year: year_of(&raw),
            raw,
        },
    ))
}

fn quoted_title(text: &str) -> Option<String> {
    let start = text.find("``")? + 2;
    let end = start + text[start..].find("''")?;
    Some(
        clean(&text[start..end])
            .trim_end_matches([',', '.'])
            .to_string(),
    )
}
