use std::io::Write;

use crate::args::ReplayArgs;
use crate::commands::caption::Captioner;
use crate::run::{chat_backend, load_store, read_config, read_jsonl, ManifestRecord, MANIFEST_FILE};

/// Fields of a fresh record that differ from the recorded one.
fn differences(old: &ManifestRecord, new: &ManifestRecord) -> Vec<&'static str> {
    let mut d = Vec::new();
    if old.prepared != new.prepared {
        d.push("prompt");
    }
    if let Some(p) = &old.prepared {
        if p.spec.render().ok().as_deref() != Some(p.spec.rendered.as_str()) {
            d.push("rendering");
        }
    }
    if old.translation_prompt != new.translation_prompt {
        d.push("translation prompt");
    }
    if old.english_caption != new.english_caption {
        d.push("english caption");
    }
    if old.caption != new.caption {
        d.push("caption");
    }
    d
}

/// Rebuilds every prompt of a run, re-queries the backend and reports any
/// divergence. Returns 1 on mismatch.
pub fn replay(args: &ReplayArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    let config = read_config(&args.run)?;
    let records: Vec<ManifestRecord> = read_jsonl(&args.run.join(MANIFEST_FILE))?;
    let store = load_store(&config)?;
    let backend = chat_backend(&config);
    let captioner = Captioner {
        store: &store,
        config: &config,
        pipeline: config.pipeline(),
        backend: backend.as_ref(),
    };
    let mut mismatches = 0usize;
    for old in &records {
        let fresh = match store.image(&old.query_id) {
            Ok(image) => captioner.record(image, old.language),
            Err(e) => {
                writeln!(out, "{} ({}): {e}", old.query_id, old.language.code())?;
                mismatches += 1;
                continue;
            }
        };
        let diff = differences(old, &fresh);
        if !diff.is_empty() {
            mismatches += 1;
            writeln!(
                out,
                "{} ({}): {} differ",
                old.query_id,
                old.language.code(),
                diff.join(", ")
            )?;
        }
    }
    writeln!(out, "replayed {}, mismatches {mismatches}", records.len())?;
    Ok(if mismatches > 0 { 1 } else { 0 })
}
