//! Chat-completion and embedding clients, plus deterministic offline mocks.
//!
//! [`complete`] and [`complete_multimodal`] check request preconditions,
//! dispatch to a [`ChatBackend`] and post-process the reply into a single
//! caption line. Backends only move bytes.

mod http;
mod mock;

use std::path::Path;

use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{ChatClient, EndpointConfig, HttpEmbedder};
pub use mock::{EchoFirstCaption, HashEmbedder, ECHO_FALLBACK};

use crate::embed_store::{EmbeddingVector, StoreError};
use crate::Language;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("unsupported media type {0:?}")]
    UnsupportedMediaType(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("HTTP status {status} after {attempts} attempt(s): {body}")]
    Status { status: u16, attempts: u32, body: String },
    #[error("empty completion")]
    EmptyCompletion,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("dimension inconsistency: item {index} has dim {found}, expected {expected}")]
    DimensionInconsistency {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid embedding: {0}")]
    Embedding(#[from] StoreError),
    #[error("i/o error: {0}")]
    Io(String),
}

pub const SUPPORTED_MEDIA_TYPES: [&str; 4] = ["image/png", "image/jpeg", "image/webp", "image/gif"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImagePayload {
    pub media_type: String,
    /// Standard base64, no data-URL prefix.
    pub data_base64: String,
}

impl ImagePayload {
    pub fn from_bytes(media_type: impl Into<String>, bytes: &[u8]) -> Self {
        Self {
            media_type: media_type.into(),
            data_base64: base64::engine::general_purpose::STANDARD.encode(bytes),
        }
    }

    /// Reads an image file, inferring the media type from its extension.
    pub fn from_path(path: &Path) -> Result<Self, GatewayError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        let media_type = match ext.as_str() {
            "png" => "image/png",
            "jpg" | "jpeg" => "image/jpeg",
            "webp" => "image/webp",
            "gif" => "image/gif",
            other => return Err(GatewayError::UnsupportedMediaType(format!("extension {other:?}"))),
        };
        let bytes = std::fs::read(path).map_err(|e| GatewayError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self::from_bytes(media_type, &bytes))
    }

    pub fn data_url(&self) -> String {
        format!("data:{};base64,{}", self.media_type, self.data_base64)
    }

    pub fn bytes(&self) -> Result<Vec<u8>, GatewayError> {
        base64::engine::general_purpose::STANDARD
            .decode(&self.data_base64)
            .map_err(|e| GatewayError::Precondition(format!("image payload is not base64: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub num_beams: u32,
    pub max_new_tokens: u32,
    pub deterministic: bool,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            num_beams: 3,
            max_new_tokens: 64,
            deterministic: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImagePayload>,
    pub decode: DecodeParams,
    pub model: String,
    pub target_language: Language,
}

impl GenerationRequest {
    pub fn text(prompt: impl Into<String>, model: impl Into<String>, target_language: Language) -> Self {
        Self {
            prompt: prompt.into(),
            image: None,
            decode: DecodeParams::default(),
            model: model.into(),
            target_language,
        }
    }

    pub fn with_image(mut self, image: ImagePayload) -> Self {
        self.image = Some(image);
        self
    }
}

/// What a backend returns before post-processing.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCompletion {
    pub text: String,
    pub raw_response: serde_json::Value,
    pub attempts: u32,
    pub latency_ms: u64,
    /// Decode parameters the backend could not forward.
    pub ignored_params: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub text: String,
    pub latency_ms: u64,
    pub backend_id: String,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ignored_params: Vec<String>,
    pub raw_response: serde_json::Value,
}

pub trait ChatBackend: Send + Sync {
    fn id(&self) -> &str;
    fn send(&self, req: &GenerationRequest) -> Result<RawCompletion, GatewayError>;
}

/// Trims, drops surrounding quotes and keeps only the first line.
pub fn postprocess_caption(raw: &str) -> String {
    let first = raw.trim().lines().next().unwrap_or("").trim();
    let pairs = [('"', '"'), ('\'', '\''), ('“', '”'), ('«', '»'), ('`', '`')];
    let mut s = first;
    loop {
        let stripped = pairs.iter().find_map(|&(open, close)| {
            let inner = s.strip_prefix(open)?.strip_suffix(close)?;
            Some(inner.trim())
        });
        match stripped {
            Some(inner) if inner.len() < s.len() => s = inner,
            _ => break,
        }
    }
    s.to_string()
}

fn finish(backend: &dyn ChatBackend, req: &GenerationRequest) -> Result<GenerationResult, GatewayError> {
    let raw = backend.send(req)?;
    let text = postprocess_caption(&raw.text);
    if text.is_empty() {
        return Err(GatewayError::EmptyCompletion);
    }
    Ok(GenerationResult {
        text,
        latency_ms: raw.latency_ms,
        backend_id: backend.id().to_string(),
        attempts: raw.attempts,
        ignored_params: raw.ignored_params,
        raw_response: raw.raw_response,
    })
}

fn check_common(req: &GenerationRequest) -> Result<(), GatewayError> {
    if req.prompt.is_empty() {
        return Err(GatewayError::Precondition("empty prompt".into()));
    }
    if req.decode.num_beams == 0 {
        return Err(GatewayError::Precondition("num_beams must be at least 1".into()));
    }
    Ok(())
}

/// Text-only generation.
pub fn complete(backend: &dyn ChatBackend, req: &GenerationRequest) -> Result<GenerationResult, GatewayError> {
    check_common(req)?;
    if req.image.is_some() {
        return Err(GatewayError::Precondition(
            "text-only completion must not carry an image".into(),
        ));
    }
    finish(backend, req)
}

/// Generation with the image attached to the prompt.
pub fn complete_multimodal(
    backend: &dyn ChatBackend,
    req: &GenerationRequest,
) -> Result<GenerationResult, GatewayError> {
    check_common(req)?;
    let Some(image) = &req.image else {
        return Err(GatewayError::Precondition(
            "multimodal completion requires an image".into(),
        ));
    };
    if !SUPPORTED_MEDIA_TYPES.contains(&image.media_type.as_str()) {
        return Err(GatewayError::UnsupportedMediaType(image.media_type.clone()));
    }
    finish(backend, req)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum EmbedItem {
    Text(String),
    Image(ImagePayload),
}

pub trait Embedder: Send + Sync {
    fn id(&self) -> &str;
    fn embed(&self, items: &[EmbedItem]) -> Result<Vec<EmbeddingVector>, GatewayError>;
}

/// Embeds a non-empty batch, checking that all vectors share one dimension.
pub fn embed_remote(embedder: &dyn Embedder, items: &[EmbedItem]) -> Result<Vec<EmbeddingVector>, GatewayError> {
    if items.is_empty() {
        return Err(GatewayError::Precondition("empty embedding batch".into()));
    }
    let vectors = embedder.embed(items)?;
    if vectors.len() != items.len() {
        return Err(GatewayError::MalformedResponse(format!(
            "{} vectors for {} items",
            vectors.len(),
            items.len()
        )));
    }
    let dim = vectors[0].dim();
    if let Some((index, v)) = vectors.iter().enumerate().find(|(_, v)| v.dim() != dim) {
        return Err(GatewayError::DimensionInconsistency {
            index,
            expected: dim,
            found: v.dim(),
        });
    }
    Ok(vectors)
}
