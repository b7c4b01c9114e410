//! Rule-based sentence segmentation.
//!
//! A sentence ends at `.`, `!` or `?` (plus any closing quotes or brackets)
//! followed by whitespace, unless the period closes a whitelisted
//! abbreviation or a single-letter initial, or the next word starts in
//! lowercase. This is an approximation; it does not model every English
//! convention.

use super::{default_config, TexConfig};

pub fn segment_sentences(paragraph: &str) -> Vec<String> {
    segment_with(paragraph, default_config())
}

pub fn segment_with(paragraph: &str, config: &TexConfig) -> Vec<String> {
    sentence_spans(paragraph, config)
        .into_iter()
        .map(|(s, e)| paragraph[s..e].to_string())
        .collect()
}

const CLOSERS: &[char] = &[')', ']', '"', '\'', '”', '’', '»'];

/// Byte spans of trimmed, non-empty sentences.
pub(crate) fn sentence_spans(text: &str, config: &TexConfig) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (at, c) = chars[i];
        if matches!(c, '.' | '!' | '?' | '…') {
            let mut j = i + 1;
            while j < chars.len() && CLOSERS.contains(&chars[j].1) {
                j += 1;
            }
            let end = chars.get(j).map_or(text.len(), |&(b, _)| b);
            let at_boundary = j == chars.len() || chars[j].1.is_whitespace();
            if at_boundary && j < chars.len() && !is_protected(text, at, c, &chars[j..], config) {
                push_span(text, start, end, &mut spans);
                start = end;
            }
            i = j;
        } else {
            i += 1;
        }
    }
    push_span(text, start, text.len(), &mut spans);
    spans
}

fn push_span(text: &str, start: usize, end: usize, spans: &mut Vec<(usize, usize)>) {
    let slice = &text[start..end];
    let trimmed = slice.trim();
    if !trimmed.is_empty() {
        let lead = slice.len() - slice.trim_start().len();
        spans.push((start + lead, start + lead + trimmed.len()));
    }
}

fn is_protected(
    text: &str,
    at: usize,
    terminator: char,
    after: &[(usize, char)],
    config: &TexConfig,
) -> bool {
    // next word starting lowercase continues the sentence
    if let Some(&(_, next)) = after.iter().find(|(_, c)| !c.is_whitespace()) {
        if next.is_lowercase() {
            return true;
        }
    }
    if terminator != '.' {
        return false;
    }
    let upto = &text[..at + 1];
    let lower = upto.to_lowercase();
    for abbr in config.abbreviations() {
        if lower.ends_with(abbr.as_str()) {
            let before = &lower[..lower.len() - abbr.len()];
            if before
                .chars()
                .next_back()
                .is_none_or(|c| c.is_whitespace() || matches!(c, '(' | '[' | '"'))
            {
                return true;
            }
        }
    }
    // single-letter initial such as "J. Smith"
    let token = upto.rsplit(char::is_whitespace).next().unwrap_or("");
    let token = token.trim_start_matches(['(', '[']);
    let mut tc = token.chars();
    matches!((tc.next(), tc.next(), tc.next()), (Some(l), Some('.'), None) if l.is_uppercase())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input() {
        assert!(segment_sentences("").is_empty());
        assert!(segment_sentences("   \n ").is_empty());
    }

    #[test]
    fn et_al_does_not_split() {
        assert_eq!(
            segment_sentences("We use et al. citations. Then we stop."),
            ["We use et al. citations.", "Then we stop."]
        );
    }

    #[test]
    fn decimals_and_trailing_number() {
        assert_eq!(
            segment_sentences("Accuracy is 0.73. Done."),
            ["Accuracy is 0.73.", "Done."]
        );
    }

    #[test]
    fn abbreviations_and_initials() {
        assert_eq!(
            segment_sentences("See Fig. 3 and Eq. 2 (e.g. Table 1). J. Smith agreed! Why? Because."),
            ["See Fig. 3 and Eq. 2 (e.g. Table 1).", "J. Smith agreed!", "Why?", "Because."]
        );
    }

    #[test]
    fn closing_quotes_stay_with_sentence() {
        assert_eq!(
            segment_sentences("He said \"stop.\" Then left."),
            ["He said \"stop.\"", "Then left."]
        );
    }

    #[test]
    fn citation_tokens_do_not_break() {
        assert_eq!(
            segment_sentences("A ⟨cite:x⟩. B ⟨cite:y.z⟩ holds. C."),
            ["A ⟨cite:x⟩.", "B ⟨cite:y.z⟩ holds.", "C."]
        );
    }
}
