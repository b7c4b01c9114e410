//! Deterministic in-process provider for tests, fixtures and hermetic runs.
//!
//! Lookup order for each call: scripted steps, exact fixtures keyed by
//! (schema id, digest of user text and seed), substring rules, then an
//! optional [`Responder`] fallback.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{schema, Completion, Provider, ProviderCall, ProviderError, Usage};
use crate::texparse::{segment_sentences, CITE_OPEN};

/// Rough token count used by the mock: one token per four characters.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

pub fn fixture_key(user: &str, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(user.as_bytes());
    h.update([0u8]);
    h.update(seed.to_le_bytes());
    hex::encode(h.finalize())
}

/// One scripted reaction.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    /// Return this value serialized as JSON (the gateway still validates it).
    Respond(Value),
    /// Return raw text verbatim.
    Raw(String),
    Transient(String),
    Fatal(String),
}

/// Computes a response from the call when no fixture matches.
pub trait Responder: Send + Sync {
    fn respond(&self, call: &ProviderCall<'_>) -> Option<Value>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallRecord {
    pub model_id: String,
    pub schema_id: Option<String>,
    pub stage: String,
    pub attempt: u32,
    pub seed: u64,
}

struct Rule {
    schema_id: String,
    needle: String,
    value: Value,
}

#[derive(Default)]
pub struct MockProvider {
    fixtures: Mutex<HashMap<(String, String), Value>>,
    rules: Mutex<Vec<Rule>>,
    scripts: Mutex<HashMap<String, VecDeque<Step>>>,
    responder: Option<Arc<dyn Responder>>,
    log: Mutex<Vec<CallRecord>>,
}

impl std::fmt::Debug for MockProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MockProvider")
            .field("fixtures", &self.fixtures.lock().unwrap().len())
            .field("calls", &self.log.lock().unwrap().len())
            .finish()
    }
}

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    /// A mock that answers every builtin schema via [`SyntheticResponder`].
    pub fn synthetic() -> Self {
        Self::new().with_responder(Arc::new(SyntheticResponder))
    }

    pub fn with_responder(mut self, responder: Arc<dyn Responder>) -> Self {
        self.responder = Some(responder);
        self
    }

    /// Exact fixture for a (schema, user text, seed) triple.
    pub fn register(&self, schema_id: &str, user: &str, seed: u64, value: Value) {
        self.fixtures
            .lock()
            .unwrap()
            .insert((schema_id.to_string(), fixture_key(user, seed)), value);
    }

    /// Answer `value` for any request on `schema_id` whose user text contains
    /// `needle`. Earlier rules win.
    pub fn rule(&self, schema_id: &str, needle: &str, value: Value) {
        self.rules.lock().unwrap().push(Rule {
            schema_id: schema_id.to_string(),
            needle: needle.to_string(),
            value,
        });
    }

    /// Queue steps consumed one per call on `schema_id` (`"*"` matches any).
    pub fn script(&self, schema_id: &str, steps: impl IntoIterator<Item = Step>) {
        self.scripts
            .lock()
            .unwrap()
            .entry(schema_id.to_string())
            .or_default()
            .extend(steps);
    }

    pub fn calls(&self) -> Vec<CallRecord> {
        self.log.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.log.lock().unwrap().len()
    }

    fn next_step(&self, schema_id: &str) -> Option<Step> {
        let mut scripts = self.scripts.lock().unwrap();
        for key in [schema_id, "*"] {
            if let Some(q) = scripts.get_mut(key) {
                if let Some(step) = q.pop_front() {
                    return Some(step);
                }
            }
        }
        None
    }

    fn lookup(&self, call: &ProviderCall<'_>) -> Option<Value> {
        let req = call.request;
        let schema_id = req.schema_id.clone().unwrap_or_default();
        let key = (schema_id.clone(), fixture_key(&req.user, req.seed));
        if let Some(v) = self.fixtures.lock().unwrap().get(&key) {
            return Some(v.clone());
        }
        let rules = self.rules.lock().unwrap();
        if let Some(r) = rules
            .iter()
            .find(|r| r.schema_id == schema_id && req.user.contains(&r.needle))
        {
            return Some(r.value.clone());
        }
        drop(rules);
        self.responder.as_ref().and_then(|r| r.respond(call))
    }
}

fn to_text(v: Value) -> String {
    match v {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

#[async_trait]
impl Provider for MockProvider {
    async fn complete(&self, call: ProviderCall<'_>) -> Result<Completion, ProviderError> {
        let req = call.request;
        self.log.lock().unwrap().push(CallRecord {
            model_id: req.model_id.clone(),
            schema_id: req.schema_id.clone(),
            stage: req.stage.clone(),
            attempt: call.attempt,
            seed: req.seed,
        });
        let schema_id = req.schema_id.as_deref().unwrap_or("");
        let text = match self.next_step(schema_id) {
            Some(Step::Respond(v)) => to_text(v),
            Some(Step::Raw(s)) => s,
            Some(Step::Transient(m)) => return Err(ProviderError::Transient(m)),
            Some(Step::Fatal(m)) => return Err(ProviderError::Fatal(m)),
            None => match self.lookup(&call) {
                Some(v) => to_text(v),
                None => {
                    return Err(ProviderError::Fatal(format!(
                        "mock has no response for schema {schema_id:?}"
                    )))
                }
            },
        };
        let usage = Usage {
            input_tokens: estimate_tokens(&req.system) + estimate_tokens(&call.user_text()),
            output_tokens: estimate_tokens(&text),
        };
        Ok(Completion { text, usage })
    }
}

/// Heuristic, deterministic answers for every builtin schema, computed from
/// the request payload. Good enough to drive the whole pipeline end to end.
///
/// Payload fields read per schema:
///
/// | schema | fields |
/// |---|---|
/// | `paper_graph` | `title`, `sentences` |
/// | `citation_polarity` | `sentence` |
/// | `abstract_decomposition` | `abstract` |
/// | `relation_summary` | `main_title`, `related_title`, `relation` |
/// | `novelty_vote` | `title`, `supporting`, `contrasting` (+ request seed) |
/// | `novelty_report` | `label`, `roster[] {id, title, class}` |
/// | `keywords` | `title`, `abstract` |
/// | `pairwise_judgment` | `first`, `second` |
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticResponder;

impl Responder for SyntheticResponder {
    fn respond(&self, call: &ProviderCall<'_>) -> Option<Value> {
        let p = &call.request.payload;
        let s = |k: &str| p[k].as_str().unwrap_or_default().to_string();
        let v = match call.request.schema_id.as_deref()? {
            schema::PAPER_GRAPH => synth_graph(&s("title"), &strings(&p["sentences"])),
            schema::CITATION_POLARITY => json!({"polarity": synth_polarity(&s("sentence"))}),
            schema::ABSTRACT_DECOMPOSITION => synth_decomposition(&s("abstract")),
            schema::RELATION_SUMMARY => json!({"summary": format!(
                "{} is a {} paper for {}: it is related through its {}.",
                s("related_title"), s("relation"), s("main_title"),
                match s("relation").as_str() {
                    "supporting" => "results, which the main paper builds on",
                    "contrasting" => "approach, which the main paper argues against",
                    "background" => "problem setting, which motivates the main paper",
                    _ => "goals, which overlap with what the main paper sets out to do",
                }
            )}),
            schema::NOVELTY_VOTE => synth_vote(
                &s("title"),
                call.request.seed,
                p["supporting"].as_i64().unwrap_or(0),
                p["contrasting"].as_i64().unwrap_or(0),
            ),
            schema::NOVELTY_REPORT => synth_report(p),
            schema::KEYWORDS => json!({"keywords": synth_keywords(&s("title"), &s("abstract"))}),
            schema::PAIRWISE_JUDGMENT => {
                let (a, b) = (s("first"), s("second"));
                let winner = if b.split_whitespace().count() > a.split_whitespace().count() {
                    "second"
                } else {
                    "first"
                };
                json!({"winner": winner})
            }
            _ => return None,
        };
        Some(v)
    }
}

fn strings(v: &Value) -> Vec<String> {
    v.as_array()
        .map(|a| a.iter().filter_map(|x| x.as_str().map(str::to_string)).collect())
        .unwrap_or_default()
}

fn unit_hash(parts: &[&[u8]]) -> f64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
        h.update([0u8]);
    }
    let d = h.finalize();
    let n = u64::from_le_bytes(d[..8].try_into().unwrap());
    (n >> 11) as f64 / (1u64 << 53) as f64
}

fn short_label(sentence: &str) -> String {
    let words: Vec<&str> = sentence
        .split_whitespace()
        .filter(|w| !w.starts_with(CITE_OPEN))
        .take(8)
        .collect();
    words.join(" ").trim_end_matches(['.', ',', ';', ':']).to_string()
}

const CLAIM_CUES: &[&str] = &["we propose", "we introduce", "we present", "we show", "we demonstrate", "our contribution", "this paper"];
const METHOD_CUES: &[&str] = &["method", "model", "algorithm", "approach", "architecture", "we use", "we train", "objective", "module"];
const EXPERIMENT_CUES: &[&str] = &["experiment", "evaluate", "dataset", "benchmark", "accuracy", "results", "outperform", "ablation"];

fn pick(sentences: &[String], used: &mut [bool], cues: &[&str], max: usize) -> Vec<String> {
    let mut out = Vec::new();
    for (i, s) in sentences.iter().enumerate() {
        if out.len() == max {
            break;
        }
        let lower = s.to_lowercase();
        if !used[i] && s.split_whitespace().count() >= 4 && cues.iter().any(|c| lower.contains(c)) {
            used[i] = true;
            out.push(s.clone());
        }
    }
    out
}

fn synth_graph(title: &str, sentences: &[String]) -> Value {
    let mut used = vec![false; sentences.len()];
    let mut claims = pick(sentences, &mut used, CLAIM_CUES, 3);
    if claims.is_empty() {
        if let Some(i) = sentences.iter().position(|s| s.split_whitespace().count() >= 4) {
            used[i] = true;
            claims.push(sentences[i].clone());
        }
    }
    let methods = pick(sentences, &mut used, METHOD_CUES, 4);
    let experiments = pick(sentences, &mut used, EXPERIMENT_CUES, 4);

    let mut nodes = vec![json!({"id": "t", "kind": "title", "label": title, "excerpt": ""})];
    let mut edges = Vec::new();
    for (i, c) in claims.iter().enumerate() {
        nodes.push(json!({"id": format!("c{}", i + 1), "kind": "claim", "label": short_label(c), "excerpt": c}));
        edges.push(json!({"from": "t", "to": format!("c{}", i + 1)}));
    }
    if !claims.is_empty() {
        for (i, m) in methods.iter().enumerate() {
            nodes.push(json!({"id": format!("m{}", i + 1), "kind": "method", "label": short_label(m), "excerpt": m}));
            edges.push(json!({"from": format!("c{}", i % claims.len() + 1), "to": format!("m{}", i + 1)}));
        }
    }
    if !methods.is_empty() && !claims.is_empty() {
        for (i, e) in experiments.iter().enumerate() {
            nodes.push(json!({"id": format!("e{}", i + 1), "kind": "experiment", "label": short_label(e), "excerpt": e}));
            edges.push(json!({"from": format!("m{}", i % methods.len() + 1), "to": format!("e{}", i + 1)}));
        }
    }
    json!({"nodes": nodes, "edges": edges})
}

const NEGATIVE_CUES: &[&str] = &[
    "unlike", "in contrast", "however", "fail", "limitation", "limited", "suffer", "whereas",
    "contrary", "does not", "do not", "cannot", "inferior", "drawback",
];

fn synth_polarity(sentence: &str) -> &'static str {
    let lower = sentence.to_lowercase();
    if NEGATIVE_CUES.iter().any(|c| lower.contains(c)) {
        "negative"
    } else {
        "positive"
    }
}

const TARGET_CUES: &[&str] = &["we ", "our ", "this paper", "this work", "in this", "here,"];

fn synth_decomposition(abstract_text: &str) -> Value {
    let sentences = segment_sentences(abstract_text.trim());
    let split = sentences
        .iter()
        .position(|s| {
            let l = s.to_lowercase();
            TARGET_CUES.iter().any(|c| l.contains(c))
        })
        .unwrap_or(sentences.len().div_ceil(2));
    let background = sentences[..split].join(" ");
    let target = sentences[split..].join(" ");
    json!({"background": background, "target": target})
}

fn synth_vote(title: &str, seed: u64, supporting: i64, contrasting: i64) -> Value {
    let p = (0.6 + 0.1 * (supporting - contrasting) as f64).clamp(0.2, 0.9);
    let u = unit_hash(&[title.as_bytes(), &seed.to_le_bytes()]);
    let label = if u < p { "novel" } else { "not_novel" };
    json!({"label": label, "rationale": format!("Vote {seed} on the basis of {supporting} supporting and {contrasting} contrasting related papers.")})
}

fn synth_report(p: &Value) -> Value {
    let label = p["label"].as_str().unwrap_or("not_novel");
    let mut supporting = Vec::new();
    let mut contradictory = Vec::new();
    for r in p["roster"].as_array().into_iter().flatten() {
        let id = r["id"].as_str().unwrap_or_default();
        let title = r["title"].as_str().unwrap_or_default();
        match r["class"].as_str().unwrap_or_default() {
            "supporting" | "background" if supporting.len() < 3 => supporting.push(json!({
                "related_id": id,
                "explanation": format!("{title} establishes the setting the paper extends, leaving its contribution distinct."),
            })),
            "contrasting" | "target" if contradictory.len() < 3 => contradictory.push(json!({
                "related_id": id,
                "explanation": format!("{title} pursues overlapping goals, which narrows the paper's novelty."),
            })),
            _ => {}
        }
    }
    let verdict = if label == "novel" {
        "The paper's structure shows a contribution that the related work does not already cover."
    } else {
        "Much of the paper's contribution is anticipated by the related work."
    };
    json!({
        "summary": format!("{verdict} {} related papers reinforce this and {} challenge it.", supporting.len(), contradictory.len()),
        "supporting": supporting,
        "contradictory": contradictory,
    })
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "for", "and", "or", "to", "in", "on", "with", "by", "via", "from",
    "we", "our", "is", "are", "be", "this", "that", "these", "its", "as", "at", "it", "can",
    "which", "using", "towards", "toward", "into", "new", "based", "paper", "show", "propose",
    "results", "method", "approach", "also", "than", "has", "have", "not", "such", "their",
];

fn synth_keywords(title: &str, abstract_text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut counts: Vec<(String, usize, usize)> = Vec::new();
    let words = |t: &str| {
        t.split(|c: char| !c.is_alphanumeric() && c != '-')
            .map(|w| w.to_lowercase())
            .filter(|w| w.len() > 2 && !STOPWORDS.contains(&w.as_str()) && !w.chars().all(|c| c.is_ascii_digit()))
            .collect::<Vec<_>>()
    };
    for w in words(title) {
        if !out.contains(&w) && out.len() < 4 {
            out.push(w);
        }
    }
    for (pos, w) in words(abstract_text).into_iter().enumerate() {
        match counts.iter_mut().find(|(k, _, _)| *k == w) {
            Some(e) => e.1 += 1,
            None => counts.push((w, 1, pos)),
        }
    }
    counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    for (w, _, _) in counts {
        if out.len() >= 6 {
            break;
        }
        if !out.contains(&w) {
            out.push(w);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ModelRequest, SchemaRegistry};

    fn call(req: &ModelRequest) -> ProviderCall<'_> {
        ProviderCall {
            request: req,
            schema: None,
            repair_notes: &[],
            attempt: 1,
        }
    }

    #[test]
    fn token_estimate_rounds_up() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcd"), 1);
        assert_eq!(estimate_tokens("abcde"), 2);
    }

    #[test]
    fn synthetic_outputs_validate_against_builtin_schemas() {
        let reg = SchemaRegistry::builtin();
        let payloads = [
            (schema::PAPER_GRAPH, json!({"title": "T", "sentences": [
                "We propose a sparse routing method for graphs.",
                "The model uses a gated attention module.",
                "Experiments on three benchmark datasets confirm the gains.",
            ]})),
            (schema::CITATION_POLARITY, json!({"sentence": "Unlike ⟨cite:a⟩, we do X."})),
            (schema::ABSTRACT_DECOMPOSITION, json!({"abstract": "Graphs are hard. We propose X."})),
            (schema::RELATION_SUMMARY, json!({"main_title": "A", "related_title": "B", "relation": "background"})),
            (schema::NOVELTY_VOTE, json!({"title": "A", "supporting": 1, "contrasting": 0})),
            (schema::NOVELTY_REPORT, json!({"label": "novel", "roster": [{"id": "x", "title": "X", "class": "supporting"}]})),
            (schema::KEYWORDS, json!({"title": "Sparse routing for graph transformers", "abstract": "Graph transformers route sparse attention."})),
            (schema::PAIRWISE_JUDGMENT, json!({"first": "a b", "second": "a b c"})),
        ];
        for (id, payload) in payloads {
            let req = ModelRequest::new("mock", "s", "u").schema(id).payload(payload);
            let v = SyntheticResponder.respond(&call(&req)).unwrap();
            assert!(reg.validate(id, &v).is_ok(), "{id}: {v}");
        }
    }

    #[test]
    fn decomposition_splits_at_first_target_sentence() {
        let v = synth_decomposition("Graphs are hard to scale. Prior work is slow. We propose a fast method.");
        assert_eq!(v["background"], "Graphs are hard to scale. Prior work is slow.");
        assert_eq!(v["target"], "We propose a fast method.");
    }

    #[tokio::test]
    async fn lookup_order() {
        let m = MockProvider::new();
        m.rule("keywords", "graph", json!({"keywords": ["rule"]}));
        m.register("keywords", "graph fixtures", 0, json!({"keywords": ["exact"]}));
        m.script("keywords", [Step::Transient("x".into())]);
        let req = ModelRequest::new("mock", "s", "graph fixtures").schema("keywords");
        assert!(matches!(m.complete(call(&req)).await, Err(ProviderError::Transient(_))));
        assert_eq!(m.complete(call(&req)).await.unwrap().text, r#"{"keywords":["exact"]}"#);
        let other = ModelRequest::new("mock", "s", "graph other").schema("keywords");
        assert_eq!(m.complete(call(&other)).await.unwrap().text, r#"{"keywords":["rule"]}"#);
        let none = ModelRequest::new("mock", "s", "none").schema("keywords");
        assert!(matches!(m.complete(call(&none)).await, Err(ProviderError::Fatal(_))));
        assert_eq!(m.call_count(), 4);
    }
}
