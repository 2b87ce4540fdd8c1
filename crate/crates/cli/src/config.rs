//! Run configuration: defaults, TOML file, then command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::ValueEnum;
use ragcap::embed_store::{DatastoreFiles, Split, SplitFilter};
use ragcap::graph_rank::Diagonal;
use ragcap::lm_gateway::{DecodeParams, EndpointConfig};
use ragcap::pipeline::PipelineConfig;
use ragcap::prompt_forge::{PoolConfig, PromptMode};
use ragcap::Language;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Blind,
    Aware,
    Baseline,
}

impl From<Mode> for PromptMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Blind => PromptMode::ImageBlind,
            Mode::Aware => PromptMode::ImageAware,
            Mode::Baseline => PromptMode::NoRetrievalBaseline,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatastorePaths {
    /// Directory holding images.evec, captions.evec, metadata.jsonl and
    /// translations.jsonl; individual paths below override it.
    pub dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_vectors: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub caption_vectors: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metadata: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub translations: Option<PathBuf>,
    /// Base directory for relative `image_ref`s; defaults to the metadata file's directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_root: Option<PathBuf>,
}

impl DatastorePaths {
    pub fn files(&self) -> DatastoreFiles {
        let mut f = DatastoreFiles::in_dir(&self.dir);
        if let Some(p) = &self.image_vectors {
            f.image_vectors = p.clone();
        }
        if let Some(p) = &self.caption_vectors {
            f.caption_vectors = p.clone();
        }
        if let Some(p) = &self.metadata {
            f.metadata = p.clone();
        }
        if let Some(p) = &self.translations {
            f.translations = Some(p.clone());
        }
        f
    }

    pub fn translations_path(&self) -> PathBuf {
        self.files()
            .translations
            .expect("in_dir always sets a translations path")
    }

    pub fn resolve_image(&self, image_ref: &str) -> PathBuf {
        let p = Path::new(image_ref);
        if p.is_absolute() {
            return p.to_path_buf();
        }
        let root = match &self.image_root {
            Some(r) => r.clone(),
            None => self
                .files()
                .metadata
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default(),
        };
        root.join(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: EndpointConfig,
    pub decode: DecodeParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    /// RefSigLIPScore is skipped.
    #[default]
    None,
    /// Deterministic hashed bag-of-words vectors.
    Hash,
    /// OpenAI-compatible embeddings endpoint from the run configuration.
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    /// Hash embedder dimension; defaults to the datastore dimension.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    pub seed: u64,
    pub endpoint: EndpointConfig,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            kind: EmbedderKind::None,
            dim: None,
            seed: 17,
            endpoint: EndpointConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset label used in reports.
    pub dataset: String,
    pub datastore: DatastorePaths,
    pub pool_size: usize,
    /// Few-shot examples per prompt.
    pub n: usize,
    /// Captions per list in the prompt.
    pub k: usize,
    pub alpha: f64,
    pub mode: Mode,
    pub pagerank: bool,
    pub languages: Vec<Language>,
    pub generate_then_translate: bool,
    /// Splits searched by retrieval.
    pub retrieval_splits: Vec<Split>,
    /// Splits whose images are captioned.
    pub query_splits: Vec<Split>,
    /// Caption at most this many query images (in id order).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    pub output_dir: PathBuf,
    pub max_in_flight: usize,
    pub backend: BackendConfig,
    pub embedder: EmbedderConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: "dataset".into(),
            datastore: DatastorePaths {
                dir: PathBuf::from("data"),
                ..Default::default()
            },
            pool_size: 10,
            n: 3,
            k: 3,
            alpha: 0.9,
            mode: Mode::Blind,
            pagerank: true,
            languages: vec![Language::English],
            generate_then_translate: false,
            retrieval_splits: vec![Split::Train],
            query_splits: vec![Split::Test],
            limit: None,
            output_dir: PathBuf::from("runs/latest"),
            max_in_flight: 4,
            backend: BackendConfig::default(),
            embedder: EmbedderConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.pool_size == 0 {
            bail!("pool_size must be at least 1");
        }
        if self.n > self.pool_size {
            bail!("n ({}) must not exceed pool_size ({})", self.n, self.pool_size);
        }
        if self.k > self.pool_size {
            bail!("k ({}) must not exceed pool_size ({})", self.k, self.pool_size);
        }
        if self.k == 0 && self.mode != Mode::Baseline {
            bail!("k must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha must lie in (0, 1), got {}", self.alpha);
        }
        if self.languages.is_empty() {
            bail!("at least one language is required");
        }
        if self.max_in_flight == 0 {
            bail!("max_in_flight must be at least 1");
        }
        if self.retrieval_splits.is_empty() || self.query_splits.is_empty() {
            bail!("retrieval_splits and query_splits must not be empty");
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            pool: PoolConfig {
                pool_size: self.pool_size,
                splits: SplitFilter::new(self.retrieval_splits.iter().copied()),
            },
            n_examples: self.n,
            k_captions: self.k,
            alpha: self.alpha,
            pagerank: self.pagerank,
            diagonal: Diagonal::Include,
            mode: self.mode.into(),
        }
    }
}
