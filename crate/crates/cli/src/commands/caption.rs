use std::io::Write;
use std::time::Instant;

use anyhow::{bail, Context};
use ragcap::embed_store::ImageRecord;
use ragcap::lm_gateway::{
    complete, complete_multimodal, ChatBackend, GenerationRequest, GenerationResult, ImagePayload,
};
use ragcap::pipeline::{prepare_prompt, PipelineConfig};
use ragcap::prompt_forge::{render_translation_prompt, PromptSpec};
use ragcap::{Datastore, Language};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::run::{
    chat_backend, load_store, write_json, write_jsonl, CaptionLine, ManifestRecord, CAPTIONS_FILE, CONFIG_FILE,
    MANIFEST_FILE,
};

/// Query images in id order, restricted to the configured splits and limit.
pub fn query_images<'a>(store: &'a Datastore, config: &RunConfig) -> Vec<&'a ImageRecord> {
    let mut q: Vec<&ImageRecord> = store
        .images()
        .iter()
        .filter(|i| config.query_splits.contains(&i.split))
        .collect();
    q.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    if let Some(limit) = config.limit {
        q.truncate(limit);
    }
    q
}

pub(crate) struct Captioner<'a> {
    pub store: &'a Datastore,
    pub config: &'a RunConfig,
    pub pipeline: PipelineConfig,
    pub backend: &'a dyn ChatBackend,
}

impl Captioner<'_> {
    /// Sends the rendered prompt, with the query image when the mode needs it.
    pub fn generate(&self, image: &ImageRecord, spec: &PromptSpec) -> anyhow::Result<GenerationResult> {
        let mut req = GenerationRequest::text(
            spec.rendered.clone(),
            self.config.backend.endpoint.model.clone(),
            spec.language,
        );
        req.decode = self.config.backend.decode;
        if spec.mode.needs_image() {
            let path = self.config.datastore.resolve_image(&image.image_ref);
            let payload = ImagePayload::from_path(&path).with_context(|| format!("image {}", image.image_id))?;
            return Ok(complete_multimodal(self.backend, &req.with_image(payload))?);
        }
        Ok(complete(self.backend, &req)?)
    }

    pub fn translate(&self, english: &str, language: Language) -> anyhow::Result<(String, GenerationResult)> {
        let prompt = render_translation_prompt(english, language)?;
        let mut req = GenerationRequest::text(prompt.clone(), self.config.backend.endpoint.model.clone(), language);
        req.decode = self.config.backend.decode;
        Ok((prompt, complete(self.backend, &req)?))
    }

    fn fill(&self, image: &ImageRecord, rec: &mut ManifestRecord) -> anyhow::Result<()> {
        let language = rec.language;
        let translate_after = self.config.generate_then_translate && language != Language::English;
        let prompt_language = if translate_after { Language::English } else { language };
        let query = self.store.image_embedding(&image.image_id)?;
        let prepared = prepare_prompt(self.store, &image.image_id, &query, prompt_language, &self.pipeline)?;
        let spec = prepared.spec.clone();
        rec.prepared = Some(prepared);
        let first = self.generate(image, &spec)?;
        rec.latency_ms += first.latency_ms;
        if translate_after {
            let (prompt, second) = self.translate(&first.text, language)?;
            rec.latency_ms += second.latency_ms;
            rec.english_caption = Some(first.text);
            rec.translation_prompt = Some(prompt);
            rec.caption = Some(second.text.clone());
            rec.generation = Some(second);
        } else {
            rec.caption = Some(first.text.clone());
            rec.generation = Some(first);
        }
        Ok(())
    }

    /// Runs one (image, language) unit; failures are recorded, not raised.
    pub fn record(&self, image: &ImageRecord, language: Language) -> ManifestRecord {
        let mut rec = ManifestRecord {
            query_id: image.image_id.clone(),
            language,
            prepared: None,
            translation_prompt: None,
            english_caption: None,
            generation: None,
            caption: None,
            error: None,
            latency_ms: 0,
        };
        if let Err(e) = self.fill(image, &mut rec) {
            let message = crate::render_error(&e);
            log::warn!("{} ({}): {message}", image.image_id, language.code());
            rec.caption = None;
            rec.error = Some(message);
        }
        rec
    }
}

pub fn caption(config: &RunConfig, out: &mut dyn Write) -> anyhow::Result<i32> {
    let started = Instant::now();
    let store = load_store(config)?;
    let backend = chat_backend(config);
    let queries = query_images(&store, config);
    if queries.is_empty() {
        bail!("no query images in splits {:?}", config.query_splits);
    }
    let captioner = Captioner {
        store: &store,
        config,
        pipeline: config.pipeline(),
        backend: backend.as_ref(),
    };
    let jobs: Vec<(&ImageRecord, Language)> = queries
        .iter()
        .flat_map(|img| config.languages.iter().map(move |&l| (*img, l)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.max_in_flight)
        .build()?;
    let records: Vec<ManifestRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|(img, lang)| captioner.record(img, *lang))
            .collect()
    });

    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    write_json(&dir.join(CONFIG_FILE), config)?;
    write_jsonl(&dir.join(MANIFEST_FILE), config, &records)?;
    let captions: Vec<CaptionLine> = records
        .iter()
        .filter_map(|r| {
            r.caption.as_ref().map(|c| CaptionLine {
                image_id: r.query_id.clone(),
                language: r.language,
                caption: c.clone(),
            })
        })
        .collect();
    write_jsonl(&dir.join(CAPTIONS_FILE), config, &captions)?;

    let failures = records.len() - captions.len();
    writeln!(out, "query images: {}", queries.len())?;
    writeln!(out, "captions: {}/{}", captions.len(), records.len())?;
    writeln!(out, "failures: {failures}")?;
    writeln!(out, "run: {}", dir.display())?;
    log::info!("caption run took {:.2?}", started.elapsed());
    Ok(if captions.is_empty() { 1 } else { 0 })
}
