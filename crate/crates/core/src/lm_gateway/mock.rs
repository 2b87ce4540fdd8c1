//! Offline backends.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{ChatBackend, EmbedItem, Embedder, GatewayError, GenerationRequest, RawCompletion};
use crate::embed_store::EmbeddingVector;

/// Reply of [`EchoFirstCaption`] when the prompt carries no caption to echo.
pub const ECHO_FALLBACK: &str = "an aerial image";

/// Returns the first input caption of a captioning prompt (the last
/// `CAPTION 1:` line), or the source text of a translation prompt.
#[derive(Debug, Clone, Default)]
pub struct EchoFirstCaption;

impl EchoFirstCaption {
    pub const ID: &'static str = "mock:echo-first-caption";

    pub fn new() -> Self {
        Self
    }

    pub fn reply(prompt: &str) -> &str {
        if let Some(line) = prompt.lines().rev().find(|l| l.starts_with("CAPTION 1: ")) {
            return &line["CAPTION 1: ".len()..];
        }
        if let Some(line) = prompt.lines().find(|l| l.starts_with("English: ")) {
            return &line["English: ".len()..];
        }
        ECHO_FALLBACK
    }
}

impl ChatBackend for EchoFirstCaption {
    fn id(&self) -> &str {
        Self::ID
    }

    fn send(&self, req: &GenerationRequest) -> Result<RawCompletion, GatewayError> {
        let text = Self::reply(&req.prompt).to_string();
        Ok(RawCompletion {
            raw_response: serde_json::json!({ "mock": Self::ID, "text": text }),
            text,
            attempts: 1,
            latency_ms: 0,
            ignored_params: Vec::new(),
        })
    }
}

/// Deterministic embeddings from a seeded hash.
///
/// Text is split into lowercase alphanumeric tokens; each token maps to a
/// pseudo-random vector and the sum is normalized, so texts sharing words
/// land close together. Images hash their raw bytes.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
    id: String,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dim must be positive");
        Self {
            dim,
            seed,
            id: format!("mock:hash-embedder/{dim}/{seed}"),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn unit_random(&self, kind: &[u8], bytes: &[u8]) -> Vec<f64> {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(kind);
        h.update(bytes);
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest[..32]);
        let mut rng = ChaCha8Rng::from_seed(seed);
        (0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn finish(&self, acc: Vec<f64>) -> Result<EmbeddingVector, GatewayError> {
        let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(GatewayError::Precondition("cannot embed empty input".into()));
        }
        Ok(EmbeddingVector::new(acc.iter().map(|v| (v / norm) as f32).collect())?)
    }

    pub fn embed_text(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        let lower = text.to_lowercase();
        let tokens: Vec<&str> = lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .collect();
        let mut acc = vec![0.0; self.dim];
        if tokens.is_empty() {
            if text.is_empty() {
                return Err(GatewayError::Precondition("cannot embed empty text".into()));
            }
            acc = self.unit_random(b"raw", text.as_bytes());
        }
        for t in tokens {
            for (a, v) in acc.iter_mut().zip(self.unit_random(b"tok", t.as_bytes())) {
                *a += v;
            }
        }
        self.finish(acc)
    }

    pub fn embed_bytes(&self, bytes: &[u8]) -> Result<EmbeddingVector, GatewayError> {
        self.finish(self.unit_random(b"img", bytes))
    }
}

impl Embedder for HashEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed(&self, items: &[EmbedItem]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        items
            .iter()
            .map(|item| match item {
                EmbedItem::Text(t) => self.embed_text(t),
                EmbedItem::Image(img) => self.embed_bytes(&img.bytes()?),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed_store::cosine_similarity;
    use crate::lm_gateway::{complete, embed_remote, GenerationRequest, ImagePayload};
    use crate::Language;

    #[test]
    fn echo_returns_first_input_caption() {
        let prompt = "intro\n\nCAPTION 1: example one\nCAPTION 2: example two\n\nFor the input\n\nCAPTION 1: the input\nCAPTION 2: other\n\nclosing";
        let req = GenerationRequest::text(prompt, "m", Language::English);
        let out = complete(&EchoFirstCaption::new(), &req).unwrap();
        assert_eq!(out.text, "the input");
        assert_eq!(out.backend_id, EchoFirstCaption::ID);
        assert_eq!(out.latency_ms, 0);
    }

    #[test]
    fn echo_translation_and_fallback() {
        assert_eq!(
            EchoFirstCaption::reply(
                "Translate the following text from English into German.\nEnglish: a plane\nGerman:"
            ),
            "a plane"
        );
        assert_eq!(EchoFirstCaption::reply("no captions here"), ECHO_FALLBACK);
    }

    #[test]
    fn echo_ignores_image() {
        let req = GenerationRequest::text("CAPTION 1: x", "m", Language::English);
        let a = complete(&EchoFirstCaption::new(), &req).unwrap();
        let b = crate::lm_gateway::complete_multimodal(
            &EchoFirstCaption::new(),
            &req.clone()
                .with_image(ImagePayload::from_bytes("image/png", b"\x89PNG")),
        )
        .unwrap();
        assert_eq!(a.text, b.text);
    }

    #[test]
    fn hash_embedder_is_deterministic_and_ordered() {
        let e = HashEmbedder::new(16, 7);
        let items = vec![
            EmbedItem::Text("many planes".into()),
            EmbedItem::Text("a river".into()),
            EmbedItem::Text("many planes".into()),
        ];
        let v = embed_remote(&e, &items).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v[0], v[2]);
        assert_ne!(v[0], v[1]);
        assert!((v[1].norm() - 1.0).abs() < 1e-6);
        assert_eq!(HashEmbedder::new(16, 7).embed_text("a river").unwrap(), v[1]);
        assert_ne!(HashEmbedder::new(16, 8).embed_text("a river").unwrap(), v[1]);
    }

    #[test]
    fn shared_words_are_closer() {
        let e = HashEmbedder::new(64, 1);
        let a = e.embed_text("many green trees near a river").unwrap();
        let b = e.embed_text("green trees near the river").unwrap();
        let c = e.embed_text("an airport with parked planes").unwrap();
        assert!(cosine_similarity(&a, &b).unwrap() > cosine_similarity(&a, &c).unwrap());
    }

    #[test]
    fn empty_batch_and_text() {
        let e = HashEmbedder::new(4, 0);
        assert!(embed_remote(&e, &[]).is_err());
        assert!(e.embed_text("").is_err());
        assert!(e.embed_text("...").is_ok());
    }
}
