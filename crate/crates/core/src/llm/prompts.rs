//! Versioned prompt templates. Each asset holds a system part and a user part
//! separated by a `=== user ===` line; `{{name}}` placeholders are filled at
//! render time.

use super::schema;

pub const PROMPTS_VERSION: &str = "prompts/1";

const SEPARATOR: &str = "=== user ===";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prompt {
    pub id: &'static str,
    pub schema_id: &'static str,
    system: &'static str,
    user: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub system: String,
    pub user: String,
}

const fn split(text: &'static str) -> (&'static str, &'static str) {
    // const-friendly search for the separator
    let bytes = text.as_bytes();
    let sep = SEPARATOR.as_bytes();
    let mut i = 0;
    while i + sep.len() <= bytes.len() {
        let mut j = 0;
        while j < sep.len() && bytes[i + j] == sep[j] {
            j += 1;
        }
        if j == sep.len() {
            let (head, tail) = text.split_at(i);
            let (_, user) = tail.split_at(sep.len());
            return (head, user);
        }
        i += 1;
    }
    (text, "")
}

macro_rules! prompt {
    ($name:ident, $id:literal, $schema:expr) => {
        pub const $name: Prompt = {
            let (system, user) = split(include_str!(concat!("../../assets/prompts/", $id, ".txt")));
            Prompt {
                id: $id,
                schema_id: $schema,
                system,
                user,
            }
        };
    };
}

prompt!(GRAPH_EXTRACTION, "graph_extraction", schema::PAPER_GRAPH);
prompt!(CITATION_POLARITY, "citation_polarity", schema::CITATION_POLARITY);
prompt!(ABSTRACT_DECOMPOSITION, "abstract_decomposition", schema::ABSTRACT_DECOMPOSITION);
prompt!(RELATION_SUMMARY, "relation_summary", schema::RELATION_SUMMARY);
prompt!(NOVELTY_VOTE, "novelty_vote", schema::NOVELTY_VOTE);
prompt!(NOVELTY_REPORT, "novelty_report", schema::NOVELTY_REPORT);
prompt!(KEYWORDS, "keywords", schema::KEYWORDS);
prompt!(PAIRWISE_JUDGMENT, "pairwise_judgment", schema::PAIRWISE_JUDGMENT);

pub const ALL: [Prompt; 8] = [
    GRAPH_EXTRACTION,
    CITATION_POLARITY,
    ABSTRACT_DECOMPOSITION,
    RELATION_SUMMARY,
    NOVELTY_VOTE,
    NOVELTY_REPORT,
    KEYWORDS,
    PAIRWISE_JUDGMENT,
];

impl Prompt {
    pub fn system_text(&self) -> &'static str {
        self.system.trim()
    }

    /// Fill `{{name}}` placeholders. Unknown placeholders are left in place
    /// so a missing variable is visible rather than silently empty.
    pub fn render(&self, vars: &[(&str, &str)]) -> Rendered {
        Rendered {
            system: fill(self.system.trim(), vars),
            user: fill(self.user.trim(), vars),
        }
    }
}

fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                let name = &after[..end];
                match vars.iter().find(|(k, _)| *k == name) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push_str("{{");
                        out.push_str(name);
                        out.push_str("}}");
                    }
                }
                rest = &after[end + 2..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}
