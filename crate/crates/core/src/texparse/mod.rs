//! LaTeX to plain structured text, bibliography parsing and citation
//! contexts.
//!
//! Citation commands are replaced by the placeholder token `⟨cite:KEY⟩`, one
//! per key. The token format is part of the contract: graph extraction
//! prompts and context extraction rely on it.

mod bib;
mod contexts;
mod convert;
mod sentences;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bib::parse_bibliography;
pub use contexts::extract_citation_contexts;
pub use convert::{inline_text, to_plain_text, Conversion};
pub use sentences::segment_sentences;

pub const CITE_OPEN: &str = "⟨cite:";
pub const CITE_CLOSE: char = '⟩';

pub fn cite_token(key: &str) -> String {
    format!("{CITE_OPEN}{key}{CITE_CLOSE}")
}

/// Iterate `(byte offset, key)` for each placeholder in `text`.
pub fn cite_tokens(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = 0;
    std::iter::from_fn(move || {
        let start = rest + text[rest..].find(CITE_OPEN)?;
        let key_start = start + CITE_OPEN.len();
        let key_end = key_start + text[key_start..].find(CITE_CLOSE)?;
        rest = key_end + CITE_CLOSE.len_utf8();
        Some((start, &text[key_start..key_end]))
    })
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TexError {
    #[error("no bibliography entries found")]
    NoBibliography,
    #[error("LaTeX source is empty")]
    EmptySource,
    #[error("reading config {path}: {message}")]
    Config { path: String, message: String },
}

/// Recognised citation commands and the sentence-splitting abbreviation
/// whitelist. Both come from plain-text config files.
#[derive(Debug, Clone)]
pub struct TexConfig {
    cite_commands: HashSet<String>,
    abbreviations: Vec<String>,
}

static DEFAULT_CONFIG: LazyLock<TexConfig> = LazyLock::new(|| {
    TexConfig::from_lists(
        include_str!("../../assets/cite_commands.txt"),
        include_str!("../../assets/abbreviations.txt"),
    )
});

fn config_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

impl TexConfig {
    pub fn from_lists(cite_commands: &str, abbreviations: &str) -> Self {
        let mut abbreviations: Vec<String> =
            config_lines(abbreviations).map(str::to_lowercase).collect();
        // longest first so "et al." is tried before "al."
        abbreviations.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        Self {
            cite_commands: config_lines(cite_commands).map(str::to_string).collect(),
            abbreviations,
        }
    }

    pub fn from_files(cite_commands: &Path, abbreviations: &Path) -> Result<Self, TexError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|e| TexError::Config {
                path: p.display().to_string(),
                message: e.to_string(),
            })
        };
        Ok(Self::from_lists(&read(cite_commands)?, &read(abbreviations)?))
    }

    pub fn is_cite_command(&self, name: &str) -> bool {
        self.cite_commands.contains(name)
    }

    pub fn abbreviations(&self) -> &[String] {
        &self.abbreviations
    }
}

impl Default for TexConfig {
    fn default() -> Self {
        DEFAULT_CONFIG.clone()
    }
}

pub(crate) fn default_config() -> &'static TexConfig {
    &DEFAULT_CONFIG
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub paragraphs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlainDocument {
    pub source_id: String,
    pub sections: Vec<Section>,
}

/// (section index, paragraph index, sentence index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Position {
    pub section: usize,
    pub paragraph: usize,
    pub sentence: usize,
}

impl PlainDocument {
    pub fn is_empty(&self) -> bool {
        self.sections.iter().all(|s| s.paragraphs.is_empty())
    }

    pub fn paragraphs(&self) -> impl Iterator<Item = &str> {
        self.sections
            .iter()
            .flat_map(|s| s.paragraphs.iter().map(String::as_str))
    }

    /// Headings and paragraphs as Markdown-like text, the form shown to the
    /// extraction model.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for section in &self.sections {
            if !section.heading.is_empty() {
                out.push_str("## ");
                out.push_str(&section.heading);
                out.push_str("\n\n");
            }
            for p in &section.paragraphs {
                out.push_str(p);
                out.push_str("\n\n");
            }
        }
        out.truncate(out.trim_end().len());
        out
    }

    /// Every sentence of the document in reading order.
    pub fn sentences(&self) -> Vec<String> {
        self.paragraphs().flat_map(segment_sentences).collect()
    }

    pub fn sentence_at(&self, pos: Position) -> Option<String> {
        let paragraph = self.sections.get(pos.section)?.paragraphs.get(pos.paragraph)?;
        segment_sentences(paragraph).into_iter().nth(pos.sentence)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BibEntry {
    pub title: String,
    pub authors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    pub raw: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bibliography {
    pub entries: BTreeMap<String, BibEntry>,
}

impl Bibliography {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&BibEntry> {
        self.entries.get(key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationContext {
    pub citation_key: String,
    pub sentence: String,
    pub section_heading: String,
    pub position: Position,
}
