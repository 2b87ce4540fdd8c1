use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use ragcap::lm_gateway::{embed_remote, EmbedItem, Embedder};
use ragcap::metrics::{
    ngram_overlap, prompt_attribution, ref_siglip_score, render_report, score_corpus, AttributionCounts, MetricReport,
    OverlapScores,
};
use ragcap::{Datastore, Language};
use serde::{Deserialize, Serialize};

use crate::args::EvaluateArgs;
use crate::config::RunConfig;
use crate::run::{
    embedder, load_store, read_config, read_jsonl, write_json, CaptionLine, ManifestRecord, CAPTIONS_FILE,
    MANIFEST_FILE, METRICS_FILE, REPORT_FILE,
};

#[derive(Debug, Clone, Deserialize)]
struct ReferenceLine {
    image_id: String,
    language: Language,
    references: Vec<String>,
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    config: &'a RunConfig,
    report: &'a MetricReport,
}

type RefMap = HashMap<(String, Language), Vec<String>>;

fn read_references(path: &Path) -> anyhow::Result<RefMap> {
    let rows: Vec<ReferenceLine> = read_jsonl(path)?;
    let mut map = RefMap::new();
    for r in rows {
        map.entry((r.image_id, r.language)).or_default().extend(r.references);
    }
    Ok(map)
}

struct References<'a> {
    store: Option<&'a Datastore>,
    file: Option<RefMap>,
}

impl References<'_> {
    fn get(&self, image_id: &str, language: Language) -> anyhow::Result<Vec<String>> {
        let refs = match (&self.file, self.store) {
            (Some(map), _) => map.get(&(image_id.to_string(), language)).cloned().unwrap_or_default(),
            (None, Some(store)) => store
                .references(image_id, language)
                .map_err(|e| anyhow!("id mismatch: {e}"))?,
            (None, None) => unreachable!("references need a file or a datastore"),
        };
        if refs.is_empty() {
            bail!("id mismatch: no {} references for {image_id}", language.code());
        }
        Ok(refs)
    }
}

fn mean_ref_siglip(
    embedder: &dyn Embedder,
    store: &Datastore,
    lines: &[&CaptionLine],
    refs: &[Vec<String>],
) -> anyhow::Result<f64> {
    let mut total = 0.0;
    for (line, rs) in lines.iter().zip(refs) {
        let mut items = vec![EmbedItem::Text(line.caption.clone())];
        items.extend(rs.iter().cloned().map(EmbedItem::Text));
        let vectors = embed_remote(embedder, &items)?;
        let image = store.image_embedding(&line.image_id)?;
        total += ref_siglip_score(&vectors[0], &image, &vectors[1..])?;
    }
    Ok(total / lines.len() as f64)
}

/// Scores one run directory and writes metrics.json and report.txt.
pub fn evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    let mut config = read_config(&args.run)?;
    if let Some(kind) = args.embedder {
        config.embedder.kind = kind;
    }
    let captions: Vec<CaptionLine> = read_jsonl(&args.run.join(CAPTIONS_FILE))?;
    if captions.is_empty() {
        bail!("{} holds no captions", args.run.join(CAPTIONS_FILE).display());
    }
    let file = args.references.as_deref().map(read_references).transpose()?;
    let needs_store = file.is_none() || config.embedder.kind != crate::config::EmbedderKind::None;
    let store = if needs_store { Some(load_store(&config)?) } else { None };
    let references = References {
        store: store.as_ref(),
        file,
    };
    let embedder = match &store {
        Some(s) => embedder(&config, s.dim())?,
        None => None,
    };
    let manifest: Vec<ManifestRecord> = if args.overlap || args.attribution {
        read_jsonl(&args.run.join(MANIFEST_FILE))?
    } else {
        Vec::new()
    };

    let mut report = MetricReport::new(config.dataset.clone());
    for &language in &config.languages {
        let lines: Vec<&CaptionLine> = captions.iter().filter(|c| c.language == language).collect();
        if lines.is_empty() {
            log::warn!("no {} captions to score", language.code());
            continue;
        }
        let cands: Vec<String> = lines.iter().map(|c| c.caption.clone()).collect();
        let refs = lines
            .iter()
            .map(|c| references.get(&c.image_id, language))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let mut scores = score_corpus(&cands, &refs, language)?;
        if let (Some(e), Some(s)) = (&embedder, &store) {
            scores.ref_siglip = Some(mean_ref_siglip(e.as_ref(), s, &lines, &refs).context("RefSigLIP")?);
        }
        let records: Vec<&ManifestRecord> = manifest.iter().filter(|r| r.language == language).collect();
        if args.overlap {
            scores.overlap = Some(overlap_scores(&records, &references, language)?);
        }
        if args.attribution {
            scores.attribution = Some(attribution_counts(&records, &references, language)?);
        }
        report.languages.insert(language, scores);
    }
    if report.languages.is_empty() {
        bail!("no captions in the configured languages");
    }

    let table = render_report(std::slice::from_ref(&report));
    write_json(
        &args.run.join(METRICS_FILE),
        &MetricsFile {
            config: &config,
            report: &report,
        },
    )?;
    let mut text = table.clone();
    text.push('\n');
    for line in config.to_toml().lines() {
        text.push_str("# ");
        text.push_str(line);
        text.push('\n');
    }
    let path = args.run.join(REPORT_FILE);
    std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    write!(out, "{table}")?;
    Ok(0)
}

fn prompt_captions(rec: &ManifestRecord) -> Option<Vec<String>> {
    let p = rec.prepared.as_ref()?;
    Some(p.spec.prompt_captions().into_iter().map(str::to_string).collect())
}

/// Per-item overlap of prompt captions with references, averaged over records.
fn overlap_scores(
    records: &[&ManifestRecord],
    references: &References,
    language: Language,
) -> anyhow::Result<OverlapScores> {
    let mut sum = OverlapScores::default();
    let mut n = 0usize;
    for rec in records {
        let Some(prompt) = prompt_captions(rec) else { continue };
        let refs = references.get(&rec.query_id, language)?;
        let (p1, r1) = ngram_overlap(&prompt, &refs, 1, language);
        let (p4, r4) = ngram_overlap(&prompt, &refs, 4, language);
        sum.p1 += p1;
        sum.r1 += r1;
        sum.p4 += p4;
        sum.r4 += r4;
        n += 1;
    }
    if n == 0 {
        return Ok(sum);
    }
    let k = n as f64;
    Ok(OverlapScores {
        p1: sum.p1 / k,
        p4: sum.p4 / k,
        r1: sum.r1 / k,
        r4: sum.r4 / k,
    })
}

fn attribution_counts(
    records: &[&ManifestRecord],
    references: &References,
    language: Language,
) -> anyhow::Result<AttributionCounts> {
    let mut total = AttributionCounts::default();
    for rec in records {
        let (Some(caption), Some(prompt)) = (&rec.caption, prompt_captions(rec)) else {
            continue;
        };
        let refs = references.get(&rec.query_id, language)?;
        total.add(&prompt_attribution(caption, &refs, &prompt, language));
    }
    Ok(total)
}
