use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::Deserialize;
use serde_json::Value;
use tokio::sync::Semaphore;
use tokio_util::sync::CancellationToken;

use super::cost::{record_cost, CostLedger, PricingTable, Usage};
use super::http::OpenAiCompatProvider;
use super::{
    parse_json_output, LlmError, ModelRequest, ModelResponse, Prompt, Provider, ProviderCall,
    ProviderError, SchemaRegistry, DEFAULT_MAX_ATTEMPTS, DEFAULT_PROVIDER_CONCURRENCY,
    DEFAULT_TIMEOUT,
};
use crate::clock::{Clock, SystemClock};
use crate::ingest::Transport;

const DEFAULT_ROSTER: &str = include_str!("../../assets/models.toml");

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ProviderSpec {
    /// `openai` (any OpenAI-compatible chat endpoint) or `mock`.
    pub kind: String,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub key_env: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ModelSpec {
    pub id: String,
    pub provider: String,
}

/// The configured models and the providers serving them.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Roster {
    pub default_model: String,
    pub providers: BTreeMap<String, ProviderSpec>,
    pub models: Vec<ModelSpec>,
}

impl Roster {
    pub fn parse(text: &str) -> Result<Self, LlmError> {
        let roster: Roster =
            toml::from_str(text).map_err(|e| LlmError::Config(format!("model roster: {e}")))?;
        for m in &roster.models {
            if !roster.providers.contains_key(&m.provider) {
                return Err(LlmError::Config(format!(
                    "model {} names unknown provider {}",
                    m.id, m.provider
                )));
            }
        }
        if !roster.models.iter().any(|m| m.id == roster.default_model) {
            return Err(LlmError::Config(format!(
                "default model {} is not in the roster",
                roster.default_model
            )));
        }
        Ok(roster)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

impl Default for Roster {
    fn default() -> Self {
        Self::parse(DEFAULT_ROSTER).expect("bundled roster parses")
    }
}

struct Slot {
    provider: Arc<dyn Provider>,
    permits: Arc<Semaphore>,
}

/// Shared entry point for every model request.
pub struct Gateway {
    slots: BTreeMap<String, Slot>,
    models: BTreeMap<String, String>,
    default_model: Option<String>,
    schemas: Arc<SchemaRegistry>,
    pricing: Arc<PricingTable>,
    clock: Arc<dyn Clock>,
    timeout: Duration,
    max_attempts: u32,
    backoff: Duration,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("models", &self.models)
            .field("timeout", &self.timeout)
            .finish()
    }
}

pub struct GatewayBuilder {
    providers: BTreeMap<String, Arc<dyn Provider>>,
    models: BTreeMap<String, String>,
    default_model: Option<String>,
    schemas: Option<Arc<SchemaRegistry>>,
    pricing: Option<Arc<PricingTable>>,
    clock: Arc<dyn Clock>,
    timeout: Duration,
    max_attempts: u32,
    concurrency: usize,
    backoff: Duration,
}

impl Default for GatewayBuilder {
    fn default() -> Self {
        Self {
            providers: BTreeMap::new(),
            models: BTreeMap::new(),
            default_model: None,
            schemas: None,
            pricing: None,
            clock: Arc::new(SystemClock),
            timeout: DEFAULT_TIMEOUT,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            concurrency: DEFAULT_PROVIDER_CONCURRENCY,
            backoff: Duration::from_secs(1),
        }
    }
}

impl GatewayBuilder {
    pub fn provider(mut self, name: &str, provider: Arc<dyn Provider>) -> Self {
        self.providers.insert(name.to_string(), provider);
        self
    }

    pub fn model(mut self, model_id: &str, provider: &str) -> Self {
        self.models.insert(model_id.to_string(), provider.to_string());
        if self.default_model.is_none() {
            self.default_model = Some(model_id.to_string());
        }
        self
    }

    pub fn default_model(mut self, model_id: &str) -> Self {
        self.default_model = Some(model_id.to_string());
        self
    }

    /// Register the roster's models. Providers of kind `openai` are built on
    /// `transport` with keys read through `env`; `mock` providers must be
    /// supplied with [`provider`](Self::provider).
    pub fn roster(
        mut self,
        roster: &Roster,
        transport: Arc<dyn Transport>,
        env: impl Fn(&str) -> Option<String>,
    ) -> Self {
        for (name, spec) in &roster.providers {
            if spec.kind == "openai" && !self.providers.contains_key(name) {
                let key = spec.key_env.as_deref().and_then(&env);
                let base = spec.base_url.clone().unwrap_or_default();
                self.providers.insert(
                    name.clone(),
                    Arc::new(OpenAiCompatProvider::new(transport.clone(), &base, key)),
                );
            }
        }
        for m in &roster.models {
            self.models.insert(m.id.clone(), m.provider.clone());
        }
        self.default_model = Some(roster.default_model.clone());
        self
    }

    /// Serve every registered model from one provider, keeping model ids (and
    /// therefore pricing) unchanged. Used for hermetic runs.
    pub fn route_all_to(mut self, name: &str, provider: Arc<dyn Provider>) -> Self {
        self.providers.insert(name.to_string(), provider);
        for p in self.models.values_mut() {
            *p = name.to_string();
        }
        self
    }

    pub fn schemas(mut self, schemas: SchemaRegistry) -> Self {
        self.schemas = Some(Arc::new(schemas));
        self
    }

    pub fn pricing(mut self, pricing: PricingTable) -> Self {
        self.pricing = Some(Arc::new(pricing));
        self
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn max_attempts(mut self, n: u32) -> Self {
        self.max_attempts = n.max(1);
        self
    }

    /// Concurrent in-flight requests allowed per provider.
    pub fn concurrency(mut self, n: usize) -> Self {
        self.concurrency = n.max(1);
        self
    }

    pub fn backoff(mut self, base: Duration) -> Self {
        self.backoff = base;
        self
    }

    pub fn build(self) -> Result<Gateway, LlmError> {
        for (model, provider) in &self.models {
            if !self.providers.contains_key(provider) {
                return Err(LlmError::Config(format!(
                    "model {model} is served by {provider}, which has no provider instance"
                )));
            }
        }
        let slots = self
            .providers
            .into_iter()
            .map(|(name, provider)| {
                (
                    name,
                    Slot {
                        provider,
                        permits: Arc::new(Semaphore::new(self.concurrency)),
                    },
                )
            })
            .collect();
        Ok(Gateway {
            slots,
            models: self.models,
            default_model: self.default_model,
            schemas: self.schemas.unwrap_or_else(|| Arc::new(SchemaRegistry::builtin())),
            pricing: self.pricing.unwrap_or_default(),
            clock: self.clock,
            timeout: self.timeout,
            max_attempts: self.max_attempts,
            backoff: self.backoff,
        })
    }
}

impl Gateway {
    pub fn builder() -> GatewayBuilder {
        GatewayBuilder::default()
    }

    pub fn models(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    pub fn default_model(&self) -> Option<&str> {
        self.default_model.as_deref()
    }

    pub fn has_model(&self, model_id: &str) -> bool {
        self.models.contains_key(model_id)
    }

    pub fn schemas(&self) -> &SchemaRegistry {
        &self.schemas
    }

    pub fn pricing(&self) -> &PricingTable {
        &self.pricing
    }

    /// Start a per-evaluation session on `model_id`.
    pub fn session(self: &Arc<Self>, model_id: &str) -> Result<LlmSession, LlmError> {
        if !self.has_model(model_id) {
            return Err(LlmError::UnknownModel(model_id.to_string()));
        }
        if self.pricing.price(model_id).is_none() {
            return Err(LlmError::UnknownModel(format!("{model_id} (no price)")));
        }
        Ok(LlmSession {
            gateway: self.clone(),
            model_id: model_id.to_string(),
            ledger: Arc::new(Mutex::new(CostLedger::default())),
            cancel: CancellationToken::new(),
        })
    }

    /// Run one request. Usage of every attempt is recorded in `ledger`.
    pub async fn complete(
        &self,
        request: &ModelRequest,
        ledger: &Mutex<CostLedger>,
        cancel: &CancellationToken,
    ) -> Result<ModelResponse, LlmError> {
        let provider_name = self
            .models
            .get(&request.model_id)
            .ok_or_else(|| LlmError::UnknownModel(request.model_id.clone()))?;
        let slot = &self.slots[provider_name];
        let schema = match &request.schema_id {
            Some(id) => Some(
                self.schemas
                    .schema(id)
                    .ok_or_else(|| LlmError::UnknownSchema(id.clone()))?,
            ),
            None => None,
        };
        if !(request.temperature >= 0.0) || request.max_output_tokens == 0 {
            return Err(LlmError::InvalidRequest(
                "temperature must be ≥ 0 and max_output_tokens positive".into(),
            ));
        }

        let started = self.clock.now();
        let mut notes: Vec<String> = Vec::new();
        let mut last_error = LlmError::ProviderUnavailable("no attempt made".into());
        let mut total = Usage::default();

        for attempt in 1..=self.max_attempts {
            if cancel.is_cancelled() {
                return Err(LlmError::Cancelled);
            }
            let call = ProviderCall {
                request,
                schema,
                repair_notes: &notes,
                attempt,
            };
            let outcome = tokio::select! {
                biased;
                _ = cancel.cancelled() => return Err(LlmError::Cancelled),
                r = async {
                    let _permit = slot.permits.acquire().await.expect("semaphore never closed");
                    tokio::time::timeout(self.timeout, slot.provider.complete(call)).await
                } => r,
            };
            match outcome {
                Err(_) => return Err(LlmError::Timeout),
                Ok(Err(ProviderError::Fatal(msg))) => return Err(LlmError::ProviderUnavailable(msg)),
                Ok(Err(ProviderError::Transient(msg))) => {
                    tracing::warn!(model = %request.model_id, attempt, "transient provider error: {msg}");
                    last_error = LlmError::ProviderUnavailable(msg);
                    if attempt < self.max_attempts {
                        self.clock.sleep(self.backoff * 2u32.pow(attempt - 1)).await;
                    }
                }
                Ok(Ok(completion)) => {
                    record_cost(
                        &mut ledger.lock().unwrap(),
                        &self.pricing,
                        &request.model_id,
                        &request.stage,
                        completion.usage,
                    )?;
                    total.input_tokens += completion.usage.input_tokens;
                    total.output_tokens += completion.usage.output_tokens;
                    let content = match (&request.schema_id, schema) {
                        (Some(id), Some(_)) => {
                            let checked = parse_json_output(&completion.text)
                                .map_err(|e| vec![e])
                                .and_then(|v| self.schemas.validate(id, &v).map(|_| v));
                            match checked {
                                Ok(v) => v,
                                Err(errors) => {
                                    tracing::warn!(schema = %id, attempt, "schema violation: {}", errors.join("; "));
                                    notes.extend(errors.iter().cloned());
                                    last_error = LlmError::SchemaFailure {
                                        schema_id: id.clone(),
                                        attempts: attempt,
                                        errors,
                                    };
                                    continue;
                                }
                            }
                        }
                        _ => Value::String(completion.text),
                    };
                    return Ok(ModelResponse {
                        content,
                        input_tokens: total.input_tokens,
                        output_tokens: total.output_tokens,
                        latency: self.clock.now().saturating_sub(started),
                        attempts: attempt,
                    });
                }
            }
        }
        Err(last_error)
    }
}

/// A gateway handle bound to one model, one cost ledger and one cancellation
/// token. Cheap to clone; clones share the ledger and token.
#[derive(Clone)]
pub struct LlmSession {
    gateway: Arc<Gateway>,
    model_id: String,
    ledger: Arc<Mutex<CostLedger>>,
    cancel: CancellationToken,
}

impl std::fmt::Debug for LlmSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmSession").field("model_id", &self.model_id).finish()
    }
}

impl LlmSession {
    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    pub fn with_cancel(mut self, cancel: CancellationToken) -> Self {
        self.cancel = cancel;
        self
    }

    pub fn cancel_token(&self) -> &CancellationToken {
        &self.cancel
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancel.is_cancelled()
    }

    pub fn ledger(&self) -> CostLedger {
        self.ledger.lock().unwrap().snapshot()
    }

    /// Build a request for this session's model from a prompt template.
    pub fn request(&self, prompt: &Prompt, vars: &[(&str, &str)]) -> ModelRequest {
        ModelRequest::from_prompt(self.model_id.clone(), prompt, vars).stage(prompt.id)
    }

    pub async fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, LlmError> {
        self.gateway.complete(request, &self.ledger, &self.cancel).await
    }
}
