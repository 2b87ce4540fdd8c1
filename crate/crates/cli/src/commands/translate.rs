use std::fs::OpenOptions;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use anyhow::Context;
use ragcap::lm_gateway::{complete, ChatBackend, GenerationRequest};
use ragcap::prompt_forge::render_translation_prompt;
use ragcap::Language;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::run::{chat_backend, load_store};

/// Drops a trailing partial line left by an interrupted append.
fn repair_partial_tail(path: &Path) -> anyhow::Result<()> {
    let Ok(mut f) = OpenOptions::new().read(true).write(true).open(path) else {
        return Ok(());
    };
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    log::warn!(
        "{}: dropping {} bytes of an incomplete last line",
        path.display(),
        bytes.len() - keep
    );
    f.set_len(keep as u64)?;
    f.seek(SeekFrom::End(0))?;
    Ok(())
}

pub fn translate_caption(
    backend: &dyn ChatBackend,
    config: &RunConfig,
    text: &str,
    language: Language,
) -> anyhow::Result<String> {
    let prompt = render_translation_prompt(text, language)?;
    let mut req = GenerationRequest::text(prompt, config.backend.endpoint.model.clone(), language);
    req.decode = config.backend.decode;
    Ok(complete(backend, &req)?.text)
}

/// Translates every caption missing from the translation table, appending
/// results in caption order. Returns 1 when some captions failed.
pub fn translate(config: &RunConfig, out: &mut dyn Write) -> anyhow::Result<i32> {
    let path = config.datastore.translations_path();
    repair_partial_tail(&path)?;
    let store = load_store(config)?;
    let backend = chat_backend(config);
    let targets: Vec<Language> = config
        .languages
        .iter()
        .copied()
        .filter(|&l| l != Language::English)
        .collect();

    let mut jobs = Vec::new();
    let mut skipped = 0usize;
    for c in store.captions() {
        for &lang in &targets {
            if store.translations().contains(&c.caption_id, lang) {
                skipped += 1;
            } else {
                jobs.push((c.caption_id.as_str(), c.text.as_str(), lang));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.max_in_flight)
        .build()?;
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut done = 0usize;
    let mut failed = 0usize;
    for chunk in jobs.chunks(config.max_in_flight * 16) {
        let results: Vec<anyhow::Result<String>> = pool.install(|| {
            chunk
                .par_iter()
                .map(|(_, text, lang)| translate_caption(backend.as_ref(), config, text, *lang))
                .collect()
        });
        for ((id, _, lang), res) in chunk.iter().zip(results) {
            match res {
                Ok(t) => {
                    writeln!(
                        file,
                        "{}",
                        ragcap::embed_store::TranslationTable::to_jsonl_line(id, *lang, &t)
                    )?;
                    done += 1;
                }
                Err(e) => {
                    log::warn!("caption {id} ({}): {}", lang.code(), crate::render_error(&e));
                    failed += 1;
                }
            }
        }
        file.flush()?;
    }
    let langs: Vec<&str> = targets.iter().map(|l| l.code()).collect();
    writeln!(
        out,
        "languages: {}\ntranslated: {done}\nskipped: {skipped}\nfailed: {failed}\ntable: {}",
        langs.join(", "),
        path.display()
    )?;
    Ok(if failed > 0 { 1 } else { 0 })
}
