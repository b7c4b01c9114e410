//! Provider-agnostic gateway for schema-constrained model requests.
//!
//! Every model call in the crate goes through [`Gateway::complete`] (usually
//! via an [`LlmSession`], which adds a per-evaluation cost ledger and a
//! cancellation token). Structured requests name a schema from the
//! [`SchemaRegistry`]; output that fails validation is re-requested with the
//! validation errors appended, up to three attempts in total.

mod cost;
mod gateway;
mod http;
mod mock;
pub mod prompts;
pub mod schema;

use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use cost::{
    pico_to_usd, record_cost, CostEntry, CostLedger, ModelTotal, Price, PricingTable, Usage,
};
pub use gateway::{Gateway, GatewayBuilder, LlmSession, ModelSpec, ProviderSpec, Roster};
pub use http::OpenAiCompatProvider;
pub use mock::{estimate_tokens, CallRecord, MockProvider, Responder, Step, SyntheticResponder};
pub use prompts::{Prompt, Rendered};
pub use schema::SchemaRegistry;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);
pub const DEFAULT_MAX_ATTEMPTS: u32 = 3;
pub const DEFAULT_PROVIDER_CONCURRENCY: usize = 8;
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 4096;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LlmError {
    #[error("output failed schema {schema_id} after {attempts} attempts: {}", errors.join("; "))]
    SchemaFailure {
        schema_id: String,
        attempts: u32,
        errors: Vec<String>,
    },
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("model request timed out")]
    Timeout,
    #[error("cancelled")]
    Cancelled,
    #[error("unknown model {0}")]
    UnknownModel(String),
    #[error("unknown schema {0}")]
    UnknownSchema(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub model_id: String,
    pub system: String,
    pub user: String,
    pub schema_id: Option<String>,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Sample index for repeated requests; providers that support seeding
    /// receive it, the mock provider mixes it into its lookup key.
    pub seed: u64,
    /// Ledger tag, e.g. `extract_graph`.
    pub stage: String,
    /// Structured view of the inputs the prompt was rendered from. Not sent to
    /// remote providers; lets deterministic providers answer without parsing
    /// prompt text.
    #[serde(default)]
    pub payload: Value,
}

impl ModelRequest {
    pub fn new(model_id: impl Into<String>, system: impl Into<String>, user: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            system: system.into(),
            user: user.into(),
            schema_id: None,
            temperature: 0.0,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            seed: 0,
            stage: "default".into(),
            payload: Value::Null,
        }
    }

    pub fn from_prompt(model_id: impl Into<String>, prompt: &Prompt, vars: &[(&str, &str)]) -> Self {
        let r = prompt.render(vars);
        Self::new(model_id, r.system, r.user).schema(prompt.schema_id)
    }

    pub fn schema(mut self, id: impl Into<String>) -> Self {
        self.schema_id = Some(id.into());
        self
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn stage(mut self, stage: impl Into<String>) -> Self {
        self.stage = stage.into();
        self
    }

    pub fn payload(mut self, payload: Value) -> Self {
        self.payload = payload;
        self
    }

    pub fn max_output_tokens(mut self, n: u32) -> Self {
        self.max_output_tokens = n;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    /// Parsed JSON for structured requests, a JSON string otherwise.
    pub content: Value,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency: Duration,
    pub attempts: u32,
}

/// What a provider sees for one attempt.
#[derive(Debug, Clone, Copy)]
pub struct ProviderCall<'a> {
    pub request: &'a ModelRequest,
    pub schema: Option<&'a Value>,
    /// Validation errors from earlier attempts, oldest first.
    pub repair_notes: &'a [String],
    pub attempt: u32,
}

impl ProviderCall<'_> {
    /// User text as sent, including any repair notes.
    pub fn user_text(&self) -> String {
        if self.repair_notes.is_empty() {
            return self.request.user.clone();
        }
        let mut s = self.request.user.clone();
        s.push_str("\n\nYour previous answer did not match the required JSON schema:\n");
        for n in self.repair_notes {
            s.push_str("- ");
            s.push_str(n);
            s.push('\n');
        }
        s.push_str("Return a corrected JSON object only.");
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    /// Worth retrying: network failures, rate limits, 5xx.
    #[error("transient provider error: {0}")]
    Transient(String),
    #[error("provider error: {0}")]
    Fatal(String),
}

#[async_trait]
pub trait Provider: Send + Sync {
    async fn complete(&self, call: ProviderCall<'_>) -> Result<Completion, ProviderError>;
}

/// Parse model output as JSON, tolerating a surrounding Markdown code fence.
pub fn parse_json_output(text: &str) -> Result<Value, String> {
    let t = text.trim();
    let t = t
        .strip_prefix("```json")
        .or_else(|| t.strip_prefix("```"))
        .map(|s| s.trim_end().trim_end_matches("```"))
        .unwrap_or(t);
    serde_json::from_str(t.trim()).map_err(|e| format!("output is not valid JSON: {e}"))
}
