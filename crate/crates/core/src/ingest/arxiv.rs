//! arXiv query API (Atom feed) and e-print source archives.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::sync::LazyLock;

use quick_xml::events::Event;
use quick_xml::Reader;
use regex::Regex;

use super::{Fetcher, HttpRequest, IngestError, LatexBundle, PaperRecord};

pub const DEFAULT_QUERY_URL: &str = "http://export.arxiv.org/api/query";
pub const DEFAULT_SOURCE_URL: &str = "https://arxiv.org/e-print";
pub const MAX_SEARCH_LIMIT: usize = 50;

static NEW_ID: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\d{4}\.\d{4,5}(v\d+)?$").unwrap());
static OLD_ID: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[a-z]+(-[a-z]+)*(\.[A-Z]{2})?/\d{7}(v\d+)?$").unwrap());
static INCLUDE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\\(input|include|subfile)\s*\{([^}]*)\}").unwrap());
static VERSION_SUFFIX: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"v\d+$").unwrap());

/// Old (`hep-th/9901001`) or new (`2101.00001v2`) arXiv identifier.
pub fn is_valid_arxiv_id(id: &str) -> bool {
    NEW_ID.is_match(id) || OLD_ID.is_match(id)
}

#[derive(Debug, Clone)]
pub struct ArxivClient {
    fetcher: Fetcher,
    query_url: String,
    source_url: String,
}

impl ArxivClient {
    pub fn new(fetcher: Fetcher) -> Self {
        Self {
            fetcher,
            query_url: DEFAULT_QUERY_URL.into(),
            source_url: DEFAULT_SOURCE_URL.into(),
        }
    }

    pub fn with_endpoints(mut self, query_url: &str, source_url: &str) -> Self {
        self.query_url = query_url.trim_end_matches('/').into();
        self.source_url = source_url.trim_end_matches('/').into();
        self
    }

    /// Title search, in upstream relevance order.
    pub async fn search(&self, query: &str, limit: usize) -> Result<Vec<PaperRecord>, IngestError> {
        let query = query.split_whitespace().collect::<Vec<_>>().join(" ");
        if query.is_empty() {
            return Err(IngestError::EmptyQuery);
        }
        if limit == 0 || limit > MAX_SEARCH_LIMIT {
            return Err(IngestError::BadRequest(format!(
                "limit must be in 1..={MAX_SEARCH_LIMIT}, got {limit}"
            )));
        }
        let search_query = format!("ti:\"{query}\"");
        let url = url::Url::parse_with_params(
            &self.query_url,
            &[
                ("search_query", search_query.as_str()),
                ("start", "0"),
                ("max_results", &limit.to_string()),
            ],
        )
        .map_err(|e| IngestError::BadRequest(e.to_string()))?;
        let body = self
            .fetcher
            .fetch(
                "arxiv.search",
                &[("query", query.clone()), ("limit", limit.to_string())],
                HttpRequest::get(url.as_str()),
            )
            .await?;
        let text = String::from_utf8_lossy(&body);
        let mut records = parse_atom(&text)?;
        records.truncate(limit);
        Ok(records)
    }

    pub async fn fetch_latex(&self, arxiv_id: &str) -> Result<LatexBundle, IngestError> {
        let arxiv_id = arxiv_id.trim();
        if !is_valid_arxiv_id(arxiv_id) {
            return Err(IngestError::BadId(arxiv_id.to_string()));
        }
        let url = format!("{}/{}", self.source_url, arxiv_id);
        let body = match self
            .fetcher
            .fetch(
                "arxiv.source",
                &[("id", arxiv_id.to_string())],
                HttpRequest::get(url),
            )
            .await
        {
            Err(IngestError::NotFound(_)) => {
                return Err(IngestError::SourceUnavailable(arxiv_id.to_string()))
            }
            other => other?,
        };
        let files = unpack_source(&body)
            .map_err(|reason| IngestError::SourceUnavailable(format!("{arxiv_id}: {reason}")))?;
        let (main_source, bib_sources) = assemble(&files)
            .ok_or_else(|| IngestError::SourceUnavailable(format!("{arxiv_id}: no main file")))?;
        Ok(LatexBundle {
            arxiv_id: arxiv_id.to_string(),
            main_source,
            bib_sources,
            fetched_at: self.fetcher.clock().now_millis(),
        })
    }
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Default)]
struct EntryBuilder {
    id: String,
    title: String,
    summary: String,
    authors: Vec<String>,
    published: String,
    journal_ref: String,
    link: Option<String>,
}

impl EntryBuilder {
    fn finish(self) -> Option<PaperRecord> {
        // ids look like http://arxiv.org/abs/1706.03762v7
        let raw = self.id.trim().rsplit("/abs/").next()?.to_string();
        let base = VERSION_SUFFIX.replace(&raw, "").into_owned();
        if !is_valid_arxiv_id(&base) {
            return None;
        }
        let title = collapse(&self.title);
        if title.is_empty() {
            return None;
        }
        let year = self.published.get(..4).and_then(|y| y.parse().ok());
        let venue = Some(collapse(&self.journal_ref)).filter(|v| !v.is_empty());
        Some(PaperRecord {
            id: format!("arxiv:{base}"),
            arxiv_id: Some(base.clone()),
            title,
            abstract_text: collapse(&self.summary),
            authors: self.authors,
            year,
            venue,
            url: self
                .link
                .or_else(|| Some(format!("https://arxiv.org/abs/{base}"))),
            citation_count: None,
        })
    }
}

/// Parse an arXiv Atom feed into records, skipping malformed entries.
pub(crate) fn parse_atom(xml: &str) -> Result<Vec<PaperRecord>, IngestError> {
    let mut reader = Reader::from_str(xml);
    let mut records = Vec::new();
    let mut entry: Option<EntryBuilder> = None;
    let mut path: Vec<String> = Vec::new();
    loop {
        let event = reader
            .read_event()
            .map_err(|e| IngestError::UpstreamUnavailable(format!("malformed Atom feed: {e}")))?;
        match event {
            Event::Start(start) => {
                let name = String::from_utf8_lossy(start.name().as_ref()).into_owned();
                if name == "entry" {
                    entry = Some(EntryBuilder::default());
                }
                if name == "link" {
                    link_attr(&start, entry.as_mut());
                }
                path.push(name);
            }
            Event::Empty(start) => {
                if start.name().as_ref() == b"link" {
                    link_attr(&start, entry.as_mut());
                }
            }
            Event::End(end) => {
                path.pop();
                if end.name().as_ref() == b"entry" {
                    if let Some(record) = entry.take().and_then(EntryBuilder::finish) {
                        records.push(record);
                    }
                }
            }
            Event::Text(text) => {
                let Some(e) = entry.as_mut() else { continue };
                let value = text.unescape().map(|c| c.into_owned()).unwrap_or_default();
                let n = path.len();
                let current = path.last().map(String::as_str).unwrap_or("");
                let parent = if n >= 2 { path[n - 2].as_str() } else { "" };
                match (parent, current) {
                    ("entry", "id") => e.id.push_str(&value),
                    ("entry", "title") => e.title.push_str(&value),
                    ("entry", "summary") => e.summary.push_str(&value),
                    ("entry", "published") => e.published.push_str(&value),
                    ("entry", "arxiv:journal_ref") => e.journal_ref.push_str(&value),
                    ("author", "name") => e.authors.push(collapse(&value)),
                    _ => {}
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    let mut seen = HashSet::new();
    records.retain(|r| seen.insert(r.id.clone()));
    Ok(records)
}

fn link_attr(start: &quick_xml::events::BytesStart<'_>, entry: Option<&mut EntryBuilder>) {
    let Some(entry) = entry else { return };
    let mut rel = None;
    let mut href = None;
    for attr in start.attributes().flatten() {
        let value = String::from_utf8_lossy(&attr.value).into_owned();
        match attr.key.as_ref() {
            b"rel" => rel = Some(value),
            b"href" => href = Some(value),
            _ => {}
        }
    }
    if rel.as_deref() == Some("alternate") && entry.link.is_none() {
        entry.link = href;
    }
}

/// Decode an e-print payload: gzipped tar, plain tar, gzipped single file or
/// raw TeX. PDF-only submissions are rejected.
pub(crate) fn unpack_source(bytes: &[u8]) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let data = if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(bytes)
            .read_to_end(&mut out)
            .map_err(|e| format!("bad gzip stream: {e}"))?;
        out
    } else {
        bytes.to_vec()
    };
    if data.starts_with(b"%PDF") {
        return Err("only a PDF is available".into());
    }
    let mut files = BTreeMap::new();
    if data.len() > 262 && &data[257..262] == b"ustar" {
        let mut archive = tar::Archive::new(data.as_slice());
        let entries = archive.entries().map_err(|e| format!("bad tar: {e}"))?;
        for entry in entries {
            let mut entry = entry.map_err(|e| format!("bad tar entry: {e}"))?;
            if !entry.header().entry_type().is_file() {
                continue;
            }
            let path = entry
                .path()
                .map_err(|e| format!("bad tar path: {e}"))?
                .to_string_lossy()
                .trim_start_matches("./")
                .to_string();
            let mut content = Vec::new();
            entry
                .read_to_end(&mut content)
                .map_err(|e| format!("reading {path}: {e}"))?;
            files.insert(path, content);
        }
    } else if data.is_empty() {
        return Err("empty source".into());
    } else {
        files.insert("main.tex".to_string(), data);
    }
    Ok(files)
}

/// The part of each line before an unescaped `%`.
fn code_part(line: &str) -> &str {
    let bytes = line.as_bytes();
    let mut backslashes = 0;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'\\' => backslashes += 1,
            b'%' if backslashes % 2 == 0 => return &line[..i],
            _ => backslashes = 0,
        }
    }
    line
}

fn has_document_begin(text: &str) -> bool {
    text.lines()
        .any(|line| code_part(line).contains("\\begin{document}"))
}

fn dir_of(path: &str) -> &str {
    path.rfind('/').map_or("", |i| &path[..i])
}

fn join(dir: &str, rel: &str) -> String {
    let mut parts: Vec<&str> = if dir.is_empty() {
        Vec::new()
    } else {
        dir.split('/').collect()
    };
    for part in rel.trim().trim_start_matches("./").split('/') {
        match part {
            ".." => {
                parts.pop();
            }
            "." | "" => {}
            p => parts.push(p),
        }
    }
    parts.join("/")
}

/// Pick the main file and inline its includes. Returns the flattened main
/// source and all bibliography sources (`.bib` then `.bbl`, path order).
pub(crate) fn assemble(files: &BTreeMap<String, Vec<u8>>) -> Option<(String, Vec<String>)> {
    let texts: BTreeMap<&str, String> = files
        .iter()
        .map(|(p, b)| (p.as_str(), String::from_utf8_lossy(b).into_owned()))
        .collect();
    let main = texts
        .iter()
        .filter(|(path, text)| path.ends_with(".tex") && has_document_begin(text))
        // largest wins; BTreeMap order makes the path tie-break deterministic
        .fold(None::<(&str, &String)>, |best, (path, text)| match best {
            Some((_, b)) if b.len() >= text.len() => best,
            _ => Some((path, text)),
        })
        .or_else(|| {
            // a single-file submission without an explicit .tex name
            (texts.len() == 1)
                .then(|| texts.iter().next().map(|(p, t)| (*p, t)))
                .flatten()
        })?;
    let mut stack = vec![main.0.to_string()];
    let main_source = inline(main.1, dir_of(main.0), &texts, &mut stack, 0);
    let mut bib_sources = Vec::new();
    for ext in [".bib", ".bbl"] {
        for (path, text) in &texts {
            if path.ends_with(ext) {
                bib_sources.push(text.clone());
            }
        }
    }
    Some((main_source, bib_sources))
}

fn inline(
    text: &str,
    base_dir: &str,
    files: &BTreeMap<&str, String>,
    stack: &mut Vec<String>,
    depth: usize,
) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.split_inclusive('\n') {
        let code = code_part(line);
        if depth >= 16 || !INCLUDE.is_match(code) {
            out.push_str(line);
            continue;
        }
        let mut last = 0;
        for caps in INCLUDE.captures_iter(code) {
            let whole = caps.get(0).unwrap();
            out.push_str(&code[last..whole.start()]);
            last = whole.end();
            let target = caps[2].trim();
            // relative to the including file first, then the project root
            let key = [
                join(base_dir, target),
                join(base_dir, &format!("{target}.tex")),
                join("", target),
                join("", &format!("{target}.tex")),
            ]
            .into_iter()
            .find(|c| files.contains_key(c.as_str()));
            match key {
                Some(path) if !stack.contains(&path) => {
                    stack.push(path.clone());
                    let body = inline(&files[path.as_str()], base_dir, files, stack, depth + 1);
                    stack.pop();
                    out.push('\n');
                    out.push_str(&body);
                    if !body.ends_with('\n') {
                        out.push('\n');
                    }
                }
                Some(path) => tracing::warn!(%path, "include cycle; skipping"),
                None => tracing::warn!(target, "unresolved include; dropping"),
            }
        }
        out.push_str(&line[last..]);
    }
    out
}
