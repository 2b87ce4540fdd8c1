//! Run-directory artifacts and shared plumbing.
//!
//! A run directory holds `config.json`, `manifest.jsonl`, `captions.jsonl`
//! and, after evaluation, `metrics.json` and `report.txt`. JSONL files start
//! with a `{"config": ...}` header line carrying the resolved configuration.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};
use ragcap::embed_store::build_datastore;
use ragcap::lm_gateway::{
    ChatBackend, ChatClient, EchoFirstCaption, Embedder, GenerationResult, HashEmbedder, HttpEmbedder,
};
use ragcap::pipeline::PreparedPrompt;
use ragcap::{Datastore, Language};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{BackendKind, EmbedderKind, RunConfig};

pub const CONFIG_FILE: &str = "config.json";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const CAPTIONS_FILE: &str = "captions.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const REPORT_FILE: &str = "report.txt";

/// One (query image, language) unit of a captioning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub query_id: String,
    pub language: Language,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prepared: Option<PreparedPrompt>,
    /// Translation request issued after English generation, in
    /// generate-then-translate runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation_prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub english_caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<GenerationResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Sum of backend latencies for this record.
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionLine {
    pub image_id: String,
    pub language: Language,
    pub caption: String,
}

#[derive(Serialize)]
struct Header<'a> {
    config: &'a RunConfig,
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Writes a config header line followed by one line per row.
pub fn write_jsonl<T: Serialize>(path: &Path, config: &RunConfig, rows: &[T]) -> anyhow::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer(&mut w, &Header { config })?;
    writeln!(w)?;
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        writeln!(w)?;
    }
    w.flush().with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Reads rows of a JSONL file, skipping the config header and blank lines.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(&line).with_context(|| format!("{}: line {}", path.display(), i + 1))?;
        if value.get("config").is_some() && value.as_object().is_some_and(|o| o.len() == 1) {
            continue;
        }
        out.push(serde_json::from_value(value).with_context(|| format!("{}: line {}", path.display(), i + 1))?);
    }
    Ok(out)
}

pub fn read_config(run_dir: &Path) -> anyhow::Result<RunConfig> {
    let path = run_dir.join(CONFIG_FILE);
    let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid {}", path.display()))
}

pub fn load_store(config: &RunConfig) -> anyhow::Result<Datastore> {
    Ok(build_datastore(&config.datastore.files())?)
}

pub fn chat_backend(config: &RunConfig) -> Box<dyn ChatBackend> {
    match config.backend.kind {
        BackendKind::Mock => Box::new(EchoFirstCaption::new()),
        BackendKind::Http => Box::new(ChatClient::new(config.backend.endpoint.clone())),
    }
}

pub fn embedder(config: &RunConfig, store_dim: usize) -> anyhow::Result<Option<Box<dyn Embedder>>> {
    let e = &config.embedder;
    Ok(match e.kind {
        EmbedderKind::None => None,
        EmbedderKind::Hash => {
            let dim = e.dim.unwrap_or(store_dim);
            if dim == 0 {
                bail!("embedder dim must be positive");
            }
            Some(Box::new(HashEmbedder::new(dim, e.seed)))
        }
        EmbedderKind::Http => Some(Box::new(HttpEmbedder::new(e.endpoint.clone()))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_roundtrip_skips_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let rows = vec![CaptionLine {
            image_id: "a".into(),
            language: Language::German,
            caption: "ein Bild".into(),
        }];
        write_jsonl(&path, &RunConfig::default(), &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("{\"config\":{"));
        assert_eq!(read_jsonl::<CaptionLine>(&path).unwrap(), rows);
    }
}
