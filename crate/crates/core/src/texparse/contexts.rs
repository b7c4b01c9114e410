use std::collections::BTreeSet;

use super::{cite_tokens, segment_sentences, Bibliography, CitationContext, PlainDocument, Position};

/// One context per (key, sentence) for every placeholder whose key is in the
/// bibliography, in document order. Keys missing from the bibliography are
/// skipped with a warning.
pub fn extract_citation_contexts(doc: &PlainDocument, bib: &Bibliography) -> Vec<CitationContext> {
    let mut contexts = Vec::new();
    let mut missing = BTreeSet::new();
    for (si, section) in doc.sections.iter().enumerate() {
        for (pi, paragraph) in section.paragraphs.iter().enumerate() {
            for (ti, sentence) in segment_sentences(paragraph).into_iter().enumerate() {
                let mut seen = BTreeSet::new();
                for (_, key) in cite_tokens(&sentence) {
                    if !seen.insert(key.to_string()) {
                        continue;
                    }
                    if bib.get(key).is_none() {
                        missing.insert(key.to_string());
                        continue;
                    }
                    contexts.push(CitationContext {
                        citation_key: key.to_string(),
                        sentence: sentence.clone(),
                        section_heading: section.heading.clone(),
                        position: Position {
                            section: si,
                            paragraph: pi,
                            sentence: ti,
                        },
                    });
                }
            }
        }
    }
    for key in missing {
        tracing::warn!(%key, "citation key not in bibliography; skipping its contexts");
    }
    contexts
}
