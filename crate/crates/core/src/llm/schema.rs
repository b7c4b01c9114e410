use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;

use super::LlmError;

pub const PAPER_GRAPH: &str = "paper_graph";
pub const CITATION_POLARITY: &str = "citation_polarity";
pub const ABSTRACT_DECOMPOSITION: &str = "abstract_decomposition";
pub const RELATION_SUMMARY: &str = "relation_summary";
pub const NOVELTY_VOTE: &str = "novelty_vote";
pub const NOVELTY_REPORT: &str = "novelty_report";
pub const KEYWORDS: &str = "keywords";
pub const PAIRWISE_JUDGMENT: &str = "pairwise_judgment";

const BUILTIN: &[(&str, &str)] = &[
    (PAPER_GRAPH, include_str!("../../assets/schemas/paper_graph.json")),
    (CITATION_POLARITY, include_str!("../../assets/schemas/citation_polarity.json")),
    (ABSTRACT_DECOMPOSITION, include_str!("../../assets/schemas/abstract_decomposition.json")),
    (RELATION_SUMMARY, include_str!("../../assets/schemas/relation_summary.json")),
    (NOVELTY_VOTE, include_str!("../../assets/schemas/novelty_vote.json")),
    (NOVELTY_REPORT, include_str!("../../assets/schemas/novelty_report.json")),
    (KEYWORDS, include_str!("../../assets/schemas/keywords.json")),
    (PAIRWISE_JUDGMENT, include_str!("../../assets/schemas/pairwise_judgment.json")),
];

struct Entry {
    schema: Value,
    validator: jsonschema::Validator,
}

/// Named JSON schemas for structured-output requests.
pub struct SchemaRegistry {
    entries: BTreeMap<String, Entry>,
}

impl std::fmt::Debug for SchemaRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SchemaRegistry")
            .field("ids", &self.entries.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl SchemaRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// The schemas shipped with the crate.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        for (id, text) in BUILTIN {
            let schema: Value = serde_json::from_str(text).expect("builtin schema is valid JSON");
            reg.register(id, schema).expect("builtin schema compiles");
        }
        reg
    }

    /// Builtin schemas overlaid with every `*.json` file in `dir`, keyed by
    /// file stem.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, LlmError> {
        let mut reg = Self::builtin();
        let dir = dir.as_ref();
        let listing = std::fs::read_dir(dir)
            .map_err(|e| LlmError::Config(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<_> = listing.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for path in paths {
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let text = std::fs::read_to_string(&path)
                .map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
            let schema: Value = serde_json::from_str(&text)
                .map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
            reg.register(&id, schema)?;
        }
        Ok(reg)
    }

    pub fn register(&mut self, id: &str, schema: Value) -> Result<(), LlmError> {
        let validator = jsonschema::validator_for(&schema)
            .map_err(|e| LlmError::Config(format!("schema {id}: {e}")))?;
        self.entries.insert(id.to_string(), Entry { schema, validator });
        Ok(())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn schema(&self, id: &str) -> Option<&Value> {
        self.entries.get(id).map(|e| &e.schema)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Every validation error, rendered as `path: message`.
    pub fn validate(&self, id: &str, instance: &Value) -> Result<(), Vec<String>> {
        let Some(entry) = self.entries.get(id) else {
            return Err(vec![format!("unknown schema {id}")]);
        };
        let errors: Vec<String> = entry
            .validator
            .iter_errors(instance)
            .map(|e| {
                let path = e.instance_path.to_string();
                if path.is_empty() {
                    e.to_string()
                } else {
                    format!("{path}: {e}")
                }
            })
            .collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}
