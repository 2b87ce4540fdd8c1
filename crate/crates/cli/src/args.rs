use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ragcap::embed_store::Split;
use ragcap::Language;

use crate::config::{BackendKind, EmbedderKind, Mode, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "ragcap",
    version,
    about = "Retrieval-augmented captioning of aerial images with few-shot LLM prompts"
)]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and index a datastore, then print its counts.
    Ingest(IngestArgs),
    /// Write a deterministic synthetic datastore.
    Synth(SynthArgs),
    /// Translate every caption into the requested languages (resumable).
    Translate(RunArgs),
    /// Caption the query images and write a run directory.
    Caption(RunArgs),
    /// Score a run's captions and write metrics.json and report.txt.
    Evaluate(EvaluateArgs),
    /// Re-render every prompt of a run and re-query the backend, checking for identical output.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct StoreArgs {
    /// Datastore directory (images.evec, captions.evec, metadata.jsonl, translations.jsonl).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Image embeddings (EVEC); overrides the --data default.
    #[arg(long)]
    pub image_vectors: Option<PathBuf>,
    /// Caption embeddings (EVEC).
    #[arg(long)]
    pub caption_vectors: Option<PathBuf>,
    /// Caption metadata (JSONL).
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// Translation table (JSONL).
    #[arg(long)]
    pub translations: Option<PathBuf>,
    /// Base directory for relative image references.
    #[arg(long)]
    pub image_root: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub store: StoreArgs,
    /// TOML run configuration supplying datastore paths.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub images: usize,
    #[arg(long, default_value_t = 5)]
    pub captions_per_image: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub test_every: usize,
    #[arg(long, default_value_t = 17)]
    pub seed: u64,
    /// Add placeholder translations for these languages.
    #[arg(long = "translate", value_delimiter = ',')]
    pub translate: Vec<Language>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub store: StoreArgs,
    /// Run output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dataset name shown in reports.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Retrieved captions and similar images per query.
    #[arg(long)]
    pub pool_size: Option<usize>,
    /// Few-shot examples per prompt.
    #[arg(long)]
    pub n: Option<usize>,
    /// Captions per list in the prompt.
    #[arg(long)]
    pub k: Option<usize>,
    /// PageRank damping factor in (0, 1).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Prompt mode: text only, text plus image, or no retrieval.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Keep the similarity order of the pool (no PageRank re-ranking).
    #[arg(long)]
    pub no_pagerank: bool,
    /// Target language (code or English name); repeatable or comma-separated.
    #[arg(long = "language", value_delimiter = ',')]
    pub languages: Vec<Language>,
    /// Generate in English, then translate the caption.
    #[arg(long)]
    pub generate_then_translate: bool,
    /// Splits searched for context (default train).
    #[arg(long = "retrieval-split", value_delimiter = ',')]
    pub retrieval_splits: Vec<Split>,
    /// Splits whose images are captioned (default test).
    #[arg(long = "query-split", value_delimiter = ',')]
    pub query_splits: Vec<Split>,
    /// Caption at most this many query images (in id order).
    #[arg(long)]
    pub limit: Option<usize>,
    /// OpenAI-compatible base URL, e.g. http://localhost:8000/v1.
    #[arg(long, conflicts_with = "mock")]
    pub backend_url: Option<String>,
    /// Model name sent to the backend.
    #[arg(long)]
    pub model: Option<String>,
    /// Use the deterministic echo backend.
    #[arg(long)]
    pub mock: bool,
    /// Concurrent backend requests.
    #[arg(long)]
    pub max_in_flight: Option<usize>,
}

impl StoreArgs {
    pub fn apply(&self, config: &mut RunConfig) {
        let d = &mut config.datastore;
        if let Some(p) = &self.data {
            d.dir = p.clone();
        }
        let set = |slot: &mut Option<PathBuf>, v: &Option<PathBuf>| {
            if v.is_some() {
                slot.clone_from(v);
            }
        };
        set(&mut d.image_vectors, &self.image_vectors);
        set(&mut d.caption_vectors, &self.caption_vectors);
        set(&mut d.metadata, &self.metadata);
        set(&mut d.translations, &self.translations);
        set(&mut d.image_root, &self.image_root);
    }
}

impl RunArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_toml_file(path)?,
            None => RunConfig::default(),
        };
        self.store.apply(&mut c);
        if let Some(v) = &self.out {
            c.output_dir = v.clone();
        }
        if let Some(v) = &self.dataset {
            c.dataset = v.clone();
        }
        if let Some(v) = self.pool_size {
            c.pool_size = v;
        }
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = self.k {
            c.k = v;
        }
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.mode {
            c.mode = v;
        }
        if self.no_pagerank {
            c.pagerank = false;
        }
        if !self.languages.is_empty() {
            c.languages = self.languages.clone();
        }
        if self.generate_then_translate {
            c.generate_then_translate = true;
        }
        if !self.retrieval_splits.is_empty() {
            c.retrieval_splits = self.retrieval_splits.clone();
        }
        if !self.query_splits.is_empty() {
            c.query_splits = self.query_splits.clone();
        }
        if let Some(v) = self.limit {
            c.limit = Some(v);
        }
        if let Some(url) = &self.backend_url {
            c.backend.kind = BackendKind::Http;
            c.backend.endpoint.base_url = url.clone();
        }
        if self.mock {
            c.backend.kind = BackendKind::Mock;
        }
        if let Some(m) = &self.model {
            c.backend.endpoint.model = m.clone();
        }
        if let Some(v) = self.max_in_flight {
            c.max_in_flight = v;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Run directory written by `caption`.
    #[arg(long)]
    pub run: PathBuf,
    /// JSONL of {"image_id", "language", "references": [...]}; defaults to the datastore's captions.
    #[arg(long)]
    pub references: Option<PathBuf>,
    /// Add prompt/reference n-gram overlap from the manifest.
    #[arg(long)]
    pub overlap: bool,
    /// Add in-prompt 1-gram attribution counts from the manifest.
    #[arg(long)]
    pub attribution: bool,
    /// Embedder for RefSigLIPScore; overrides the run configuration.
    #[arg(long, value_enum)]
    pub embedder: Option<EmbedderKind>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub run: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("ragcap").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_defaults() {
        let cli = parse(&[
            "caption",
            "--n",
            "5",
            "--k",
            "5",
            "--no-pagerank",
            "--language",
            "pt,de",
            "--language",
            "Korean",
            "--mode",
            "aware",
            "--backend-url",
            "http://x/v1",
        ]);
        let Command::Caption(args) = cli.command else { panic!() };
        let c = args.resolve().unwrap();
        assert_eq!((c.n, c.k), (5, 5));
        assert!(!c.pagerank);
        assert_eq!(
            c.languages,
            vec![Language::Portuguese, Language::German, Language::Korean]
        );
        assert_eq!(c.mode, Mode::Aware);
        assert_eq!(c.backend.kind, BackendKind::Http);
    }

    #[test]
    fn invalid_values_are_rejected() {
        let cli = parse(&["caption", "--alpha", "1.5"]);
        let Command::Caption(args) = cli.command else { panic!() };
        assert!(args.resolve().is_err());
        assert!(Cli::try_parse_from(["ragcap", "caption", "--language", "xx"]).is_err());
        assert!(Cli::try_parse_from(["ragcap", "caption", "--mock", "--backend-url", "u"]).is_err());
    }

    #[test]
    fn config_file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "n = 2\nk = 2\npagerank = false\nlanguages = [\"fr\"]\n").unwrap();
        let cli = parse(&["caption", "--config", path.to_str().unwrap(), "--k", "4"]);
        let Command::Caption(args) = cli.command else { panic!() };
        let c = args.resolve().unwrap();
        assert_eq!((c.n, c.k), (2, 4));
        assert!(!c.pagerank);
        assert_eq!(c.languages, vec![Language::French]);
    }
}
