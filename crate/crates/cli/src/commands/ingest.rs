use std::io::Write;

use ragcap::embed_store::{build_datastore, DatastoreFiles, StoreSummary};
use ragcap::synthetic::{write_synthetic, SyntheticConfig};

use crate::args::SynthArgs;

pub fn print_summary(out: &mut dyn Write, s: &StoreSummary) -> std::io::Result<()> {
    writeln!(out, "dim: {}", s.dim)?;
    writeln!(out, "images: {}", s.images)?;
    writeln!(out, "captions: {}", s.captions)?;
    for (split, images) in &s.images_by_split {
        let captions = s.captions_by_split.get(split).copied().unwrap_or(0);
        writeln!(out, "split {split}: {images} images, {captions} captions")?;
    }
    let langs: Vec<&str> = s.translation_languages.iter().map(|l| l.code()).collect();
    writeln!(out, "translations: {} ({})", s.translations, langs.join(", "))
}

pub fn ingest(files: &DatastoreFiles, out: &mut dyn Write) -> anyhow::Result<i32> {
    let store = build_datastore(files)?;
    print_summary(out, &store.summary())?;
    Ok(0)
}

pub fn synth(args: &SynthArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    let config = SyntheticConfig {
        images: args.images,
        captions_per_image: args.captions_per_image,
        dim: args.dim,
        test_every: args.test_every,
        translations: args.translate.clone(),
        seed: args.seed,
        ..Default::default()
    };
    let files = write_synthetic(&config, &args.out)?;
    writeln!(out, "wrote {}", args.out.display())?;
    ingest(&files, out)
}
