//! OpenAI-compatible HTTP clients (blocking).

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatBackend, EmbedItem, Embedder, GatewayError, GenerationRequest, RawCompletion};
use crate::embed_store::EmbeddingVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    /// Base URL including any version prefix, e.g. `http://localhost:8000/v1`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token, if any.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub max_attempts: u32,
    pub backoff_ms: u64,
    /// Whether the server accepts a `num_beams` field.
    pub supports_beam_param: bool,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model: "default".into(),
            api_key_env: None,
            timeout_secs: 120,
            max_attempts: 3,
            backoff_ms: 500,
            supports_beam_param: true,
        }
    }
}

impl EndpointConfig {
    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.base_url.trim_end_matches('/'), path)
    }

    fn agent(&self) -> ureq::Agent {
        ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(self.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into()
    }

    fn bearer(&self) -> Option<String> {
        let var = self.api_key_env.as_deref()?;
        std::env::var(var).ok().map(|k| format!("Bearer {k}"))
    }
}

fn retryable_status(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

/// POSTs JSON with bounded exponential backoff. Transport failures, 429 and
/// 5xx are retried; other non-2xx statuses fail immediately.
fn post_json(
    agent: &ureq::Agent,
    config: &EndpointConfig,
    url: &str,
    body: &Value,
) -> Result<(Value, u32, u64), GatewayError> {
    let started = Instant::now();
    let attempts_allowed = config.max_attempts.max(1);
    let mut last_err = None;
    for attempt in 1..=attempts_allowed {
        if attempt > 1 {
            let delay = config.backoff_ms.saturating_mul(1 << (attempt - 2).min(16));
            std::thread::sleep(Duration::from_millis(delay));
        }
        let mut req = agent.post(url).header("Content-Type", "application/json");
        if let Some(auth) = config.bearer() {
            req = req.header("Authorization", auth);
        }
        let mut resp = match req.send(body.to_string()) {
            Ok(r) => r,
            Err(e) => {
                log::debug!("attempt {attempt} to {url} failed: {e}");
                last_err = Some(GatewayError::Transport {
                    attempts: attempt,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => {
                last_err = Some(GatewayError::Transport {
                    attempts: attempt,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if !(200..300).contains(&status) {
            let err = GatewayError::Status {
                status,
                attempts: attempt,
                body: text.chars().take(500).collect(),
            };
            if retryable_status(status) {
                last_err = Some(err);
                continue;
            }
            return Err(err);
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
        return Ok((value, attempt, started.elapsed().as_millis() as u64));
    }
    Err(last_err.expect("at least one attempt"))
}

/// Chat-completion client.
pub struct ChatClient {
    config: EndpointConfig,
    agent: ureq::Agent,
    id: String,
}

impl ChatClient {
    pub fn new(config: EndpointConfig) -> Self {
        let id = format!("http:{}#{}", config.base_url, config.model);
        Self {
            agent: config.agent(),
            config,
            id,
        }
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    /// The JSON body sent for `req`, and the decode parameters left out.
    pub fn request_body(&self, req: &GenerationRequest) -> (Value, Vec<String>) {
        let content = match &req.image {
            None => Value::String(req.prompt.clone()),
            Some(img) => json!([
                { "type": "text", "text": req.prompt },
                { "type": "image_url", "image_url": { "url": img.data_url() } },
            ]),
        };
        let model = if req.model.is_empty() {
            &self.config.model
        } else {
            &req.model
        };
        let mut body = json!({
            "model": model,
            "messages": [{ "role": "user", "content": content }],
            "max_tokens": req.decode.max_new_tokens,
        });
        if req.decode.deterministic {
            body["temperature"] = json!(0.0);
        }
        let mut ignored = Vec::new();
        if self.config.supports_beam_param {
            body["num_beams"] = json!(req.decode.num_beams);
        } else if req.decode.num_beams > 1 {
            ignored.push("num_beams".to_string());
        }
        (body, ignored)
    }
}

impl ChatBackend for ChatClient {
    fn id(&self) -> &str {
        &self.id
    }

    fn send(&self, req: &GenerationRequest) -> Result<RawCompletion, GatewayError> {
        let (body, ignored_params) = self.request_body(req);
        let url = self.config.url("chat/completions");
        let (value, attempts, latency_ms) = post_json(&self.agent, &self.config, &url, &body)?;
        let text = value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| GatewayError::MalformedResponse("missing choices[0].message.content".into()))?
            .to_string();
        Ok(RawCompletion {
            text,
            raw_response: value,
            attempts,
            latency_ms,
            ignored_params,
        })
    }
}

/// Embeddings endpoint client (`input` list in, `data[].embedding` out).
pub struct HttpEmbedder {
    config: EndpointConfig,
    agent: ureq::Agent,
    id: String,
}

impl HttpEmbedder {
    pub fn new(config: EndpointConfig) -> Self {
        let id = format!("http:{}#{}", config.base_url, config.model);
        Self {
            agent: config.agent(),
            config,
            id,
        }
    }
}

#[derive(Deserialize)]
struct EmbeddingRow {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f32>,
}

impl Embedder for HttpEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed(&self, items: &[EmbedItem]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        let input: Vec<String> = items
            .iter()
            .map(|it| match it {
                EmbedItem::Text(t) => t.clone(),
                EmbedItem::Image(img) => img.data_url(),
            })
            .collect();
        let body = json!({ "model": self.config.model, "input": input });
        let url = self.config.url("embeddings");
        let (value, _, _) = post_json(&self.agent, &self.config, &url, &body)?;
        let data = value
            .get("data")
            .cloned()
            .ok_or_else(|| GatewayError::MalformedResponse("missing data".into()))?;
        let mut rows: Vec<EmbeddingRow> =
            serde_json::from_value(data).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
        if rows.iter().all(|r| r.index.is_some()) {
            rows.sort_by_key(|r| r.index);
        }
        let mut out = Vec::with_capacity(rows.len());
        for (index, row) in rows.into_iter().enumerate() {
            if let Some(first) = out.first().map(EmbeddingVector::dim) {
                if row.embedding.len() != first {
                    return Err(GatewayError::DimensionInconsistency {
                        index,
                        expected: first,
                        found: row.embedding.len(),
                    });
                }
            }
            out.push(EmbeddingVector::new(row.embedding)?);
        }
        Ok(out)
    }
}
