use std::sync::Arc;

use async_trait::async_trait;
use serde_json::{json, Value};

use super::{Completion, Provider, ProviderCall, ProviderError, Usage};
use crate::ingest::{HttpRequest, Transport};

/// Any chat-completions endpoint speaking the OpenAI wire format (OpenAI
/// itself, Gemini's compatibility endpoint, local servers).
pub struct OpenAiCompatProvider {
    transport: Arc<dyn Transport>,
    base_url: String,
    api_key: Option<String>,
}

impl OpenAiCompatProvider {
    pub fn new(transport: Arc<dyn Transport>, base_url: &str, api_key: Option<String>) -> Self {
        Self {
            transport,
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
        }
    }

    pub fn body(call: &ProviderCall<'_>) -> Value {
        let req = call.request;
        let mut body = json!({
            "model": req.model_id,
            "messages": [
                {"role": "system", "content": req.system},
                {"role": "user", "content": call.user_text()},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        });
        if let (Some(schema), Some(id)) = (call.schema, &req.schema_id) {
            body["response_format"] = json!({
                "type": "json_schema",
                "json_schema": {"name": id, "schema": strip_meta(schema)},
            });
        }
        body
    }
}

/// Providers reject some meta keywords inside `response_format`.
fn strip_meta(schema: &Value) -> Value {
    let mut s = schema.clone();
    if let Some(obj) = s.as_object_mut() {
        obj.remove("$id");
        obj.remove("$schema");
    }
    s
}

#[async_trait]
impl Provider for OpenAiCompatProvider {
    async fn complete(&self, call: ProviderCall<'_>) -> Result<Completion, ProviderError> {
        let Some(key) = &self.api_key else {
            return Err(ProviderError::Fatal(format!("no API key configured for {}", self.base_url)));
        };
        let request = HttpRequest::post_json(format!("{}/chat/completions", self.base_url), &Self::body(&call))
            .header("authorization", format!("Bearer {key}"));
        let response = self
            .transport
            .send(request)
            .await
            .map_err(|e| ProviderError::Transient(e.to_string()))?;
        let body = String::from_utf8_lossy(&response.body);
        match response.status {
            200..=299 => {}
            429 | 500..=599 => {
                return Err(ProviderError::Transient(format!("HTTP {}: {}", response.status, snippet(&body))))
            }
            s => return Err(ProviderError::Fatal(format!("HTTP {s}: {}", snippet(&body)))),
        }
        let v: Value = serde_json::from_str(&body)
            .map_err(|e| ProviderError::Transient(format!("malformed provider response: {e}")))?;
        let text = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| ProviderError::Transient("response has no message content".into()))?
            .to_string();
        let usage = Usage {
            input_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
            output_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
        };
        Ok(Completion { text, usage })
    }
}

fn snippet(s: &str) -> String {
    s.chars().take(200).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{FixtureTransport, Method};
    use crate::llm::ModelRequest;

    fn call_for(req: &ModelRequest) -> ProviderCall<'_> {
        ProviderCall {
            request: req,
            schema: None,
            repair_notes: &[],
            attempt: 1,
        }
    }

    #[tokio::test]
    async fn parses_chat_completion() {
        let body = r#"{"choices":[{"message":{"content":"{\"polarity\":\"negative\"}"}}],"usage":{"prompt_tokens":12,"completion_tokens":5}}"#;
        let t = FixtureTransport::new().route(Method::Post, "https://x.test/v1/chat/completions", 200, body);
        let p = OpenAiCompatProvider::new(Arc::new(t), "https://x.test/v1/", Some("k".into()));
        let req = ModelRequest::new("gpt-4o", "s", "u");
        let c = p.complete(call_for(&req)).await.unwrap();
        assert_eq!(c.text, "{\"polarity\":\"negative\"}");
        assert_eq!(c.usage, Usage { input_tokens: 12, output_tokens: 5 });
    }

    #[tokio::test]
    async fn status_mapping() {
        let t = Arc::new(
            FixtureTransport::new()
                .route(Method::Post, "https://a.test/chat/completions", 503, "busy")
                .route(Method::Post, "https://b.test/chat/completions", 401, "no"),
        );
        let req = ModelRequest::new("m", "s", "u");
        let a = OpenAiCompatProvider::new(t.clone(), "https://a.test", Some("k".into()));
        let b = OpenAiCompatProvider::new(t.clone(), "https://b.test", Some("k".into()));
        assert!(matches!(a.complete(call_for(&req)).await, Err(ProviderError::Transient(_))));
        assert!(matches!(b.complete(call_for(&req)).await, Err(ProviderError::Fatal(_))));
        let nokey = OpenAiCompatProvider::new(t, "https://a.test", None);
        assert!(matches!(nokey.complete(call_for(&req)).await, Err(ProviderError::Fatal(_))));
    }
}
