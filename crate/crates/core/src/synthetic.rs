//! Synthetic datastores for tests, demos and the offline pipeline.
//!
//! [`StoreBuilder`] assembles small hand-made stores. [`generate_store`]
//! produces a larger aerial-scene corpus whose caption embeddings come from
//! [`HashEmbedder`] and whose image embeddings are noisy sums of their own
//! caption embeddings, so retrieval behaves sensibly.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embed_store::{
    write_datastore, CaptionRecord, Datastore, DatastoreFiles, ImageRecord, Split, StoreError, TranslationTable,
    VectorTable,
};
use crate::lm_gateway::HashEmbedder;
use crate::Language;

/// A valid 1x1 RGBA PNG.
pub const TINY_PNG: [u8; 67] = [
    0x89, 0x50, 0x4E, 0x47, 0x0D, 0x0A, 0x1A, 0x0A, 0x00, 0x00, 0x00, 0x0D, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00, 0x00,
    0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x06, 0x00, 0x00, 0x00, 0x1F, 0x15, 0xC4, 0x89, 0x00, 0x00, 0x00, 0x0A, 0x49,
    0x44, 0x41, 0x54, 0x78, 0x9C, 0x63, 0x00, 0x01, 0x00, 0x00, 0x05, 0x00, 0x01, 0x0D, 0x0A, 0x2D, 0xB4, 0x00, 0x00,
    0x00, 0x00, 0x49, 0x45, 0x4E, 0x44, 0xAE, 0x42, 0x60, 0x82,
];

/// Incrementally builds an in-memory [`Datastore`]. Captions inherit the
/// split of their image, which must be added first.
#[derive(Debug, Clone)]
pub struct StoreBuilder {
    dim: usize,
    images: Vec<ImageRecord>,
    captions: Vec<CaptionRecord>,
    image_rows: Vec<f32>,
    caption_rows: Vec<f32>,
    image_slots: HashMap<String, usize>,
    translations: TranslationTable,
}

impl StoreBuilder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            images: Vec::new(),
            captions: Vec::new(),
            image_rows: Vec::new(),
            caption_rows: Vec::new(),
            image_slots: HashMap::new(),
            translations: TranslationTable::new(),
        }
    }

    pub fn image(&mut self, image_id: &str, split: Split, embedding: &[f32]) -> &mut Self {
        assert_eq!(embedding.len(), self.dim, "image embedding dim");
        self.image_slots.insert(image_id.to_string(), self.images.len());
        self.images.push(ImageRecord {
            image_id: image_id.to_string(),
            image_ref: format!("images/{image_id}.png"),
            split,
            embedding_row: self.image_rows.len() / self.dim,
            caption_ids: Vec::new(),
        });
        self.image_rows.extend_from_slice(embedding);
        self
    }

    pub fn caption(&mut self, caption_id: &str, image_id: &str, text: &str, embedding: &[f32]) -> &mut Self {
        assert_eq!(embedding.len(), self.dim, "caption embedding dim");
        let slot = *self
            .image_slots
            .get(image_id)
            .unwrap_or_else(|| panic!("caption {caption_id} added before image {image_id}"));
        let img = &mut self.images[slot];
        img.caption_ids.push(caption_id.to_string());
        self.captions.push(CaptionRecord {
            caption_id: caption_id.to_string(),
            image_id: image_id.to_string(),
            text: text.to_string(),
            split: img.split,
            embedding_row: self.caption_rows.len() / self.dim,
        });
        self.caption_rows.extend_from_slice(embedding);
        self
    }

    pub fn translation(&mut self, caption_id: &str, language: Language, text: &str) -> &mut Self {
        self.translations.insert(caption_id, language, text);
        self
    }

    pub fn build(self) -> Result<Datastore, StoreError> {
        Datastore::from_parts(
            self.images,
            self.captions,
            VectorTable::new(self.dim, self.image_rows)?,
            VectorTable::new(self.dim, self.caption_rows)?,
            self.translations,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub images: usize,
    pub captions_per_image: usize,
    pub dim: usize,
    /// Every `test_every`-th image (1-based) goes to the test split.
    pub test_every: usize,
    /// Scale of the uniform noise added to image embeddings.
    pub noise: f64,
    /// Languages that get a placeholder translation of every caption.
    pub translations: Vec<Language>,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            images: 50,
            captions_per_image: 5,
            dim: 64,
            test_every: 5,
            noise: 0.3,
            translations: Vec::new(),
            seed: 17,
        }
    }
}

struct Scene {
    place: &'static str,
    objects: [&'static str; 3],
}

const SCENES: [Scene; 10] = [
    Scene {
        place: "airport",
        objects: ["plane", "runway", "terminal"],
    },
    Scene {
        place: "beach",
        objects: ["wave", "umbrella", "sandbar"],
    },
    Scene {
        place: "forest",
        objects: ["tree", "path", "clearing"],
    },
    Scene {
        place: "farmland",
        objects: ["field", "tractor", "barn"],
    },
    Scene {
        place: "residential area",
        objects: ["house", "road", "car"],
    },
    Scene {
        place: "harbor",
        objects: ["boat", "pier", "crane"],
    },
    Scene {
        place: "river",
        objects: ["bridge", "bank", "island"],
    },
    Scene {
        place: "stadium",
        objects: ["stand", "track", "parking lot"],
    },
    Scene {
        place: "desert",
        objects: ["dune", "rock", "trail"],
    },
    Scene {
        place: "industrial area",
        objects: ["factory", "warehouse", "tank"],
    },
];

const COUNTS: [&str; 5] = ["two", "three", "several", "many", "some"];
const COLORS: [&str; 5] = ["white", "green", "red", "gray", "dark"];

fn synthetic_caption(rng: &mut ChaCha8Rng, scene: &Scene) -> String {
    // Occasional generic captions repeat verbatim across images of a scene.
    if rng.random_bool(0.15) {
        return format!("this is an aerial image of a {}", scene.place);
    }
    let count = COUNTS.choose(rng).unwrap();
    let color = COLORS.choose(rng).unwrap();
    let a = scene.objects.choose(rng).unwrap();
    let b = scene.objects.choose(rng).unwrap();
    let place = scene.place;
    match rng.random_range(0..5) {
        0 => format!("{count} {color} {a}s are near the {place}"),
        1 => format!("there are {count} {a}s in the {place}"),
        2 => format!("a {color} {place} with {count} {a}s"),
        3 => format!("many {a}s are located around the {b}"),
        _ => format!("the {place} is surrounded by {color} {b}s"),
    }
}

fn placeholder_translation(text: &str, language: Language) -> String {
    format!("[{}] {text}", language.code())
}

/// Generates a deterministic synthetic datastore.
pub fn generate_store(config: &SyntheticConfig) -> Result<Datastore, StoreError> {
    if config.images == 0 || config.captions_per_image == 0 {
        return Err(StoreError::EmptyDatastore);
    }
    let embedder = HashEmbedder::new(config.dim, config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut builder = StoreBuilder::new(config.dim);
    let embed = |text: &str| {
        embedder
            .embed_text(text)
            .map(|v| v.into_values())
            .map_err(|e| StoreError::Io(e.to_string()))
    };

    for i in 0..config.images {
        let image_id = format!("img{i:05}");
        let scene = &SCENES[rng.random_range(0..SCENES.len())];
        let split = if config.test_every > 0 && (i + 1) % config.test_every == 0 {
            Split::Test
        } else {
            Split::Train
        };
        let texts: Vec<String> = (0..config.captions_per_image)
            .map(|_| synthetic_caption(&mut rng, scene))
            .collect();
        let embeddings = texts.iter().map(|t| embed(t)).collect::<Result<Vec<_>, _>>()?;
        let mut image_vec = vec![0.0f64; config.dim];
        for e in &embeddings {
            for (acc, v) in image_vec.iter_mut().zip(e) {
                *acc += f64::from(*v);
            }
        }
        let norm = image_vec.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let image_vec: Vec<f32> = image_vec
            .iter()
            .map(|v| (v / norm + config.noise * rng.random_range(-1.0..1.0) / (config.dim as f64).sqrt()) as f32)
            .collect();
        builder.image(&image_id, split, &image_vec);
        for (j, (text, emb)) in texts.iter().zip(&embeddings).enumerate() {
            let caption_id = format!("{image_id}_{j}");
            builder.caption(&caption_id, &image_id, text, emb);
            for &lang in &config.translations {
                builder.translation(&caption_id, lang, &placeholder_translation(text, lang));
            }
        }
    }
    builder.build()
}

/// Generates a store and writes it, plus one PNG per image, under `dir`.
pub fn write_synthetic(config: &SyntheticConfig, dir: &Path) -> Result<DatastoreFiles, StoreError> {
    let store = generate_store(config)?;
    let images_dir = dir.join("images");
    std::fs::create_dir_all(&images_dir).map_err(|e| StoreError::open(&images_dir, e))?;
    for img in store.images() {
        let path = dir.join(&img.image_ref);
        std::fs::write(&path, TINY_PNG).map_err(|e| StoreError::open(&path, e))?;
    }
    let mut files = DatastoreFiles::in_dir(dir);
    if config.translations.is_empty() {
        files.translations = None;
    }
    write_datastore(&store, &files)?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed_store::build_datastore;

    #[test]
    fn builder_roundtrip() {
        let mut b = StoreBuilder::new(2);
        b.image("a", Split::Train, &[1.0, 0.0])
            .caption("a0", "a", "a plane", &[1.0, 0.1])
            .image("q", Split::Test, &[0.0, 1.0])
            .caption("q0", "q", "a river", &[0.1, 1.0])
            .translation("a0", Language::German, "ein Flugzeug");
        let s = b.build().unwrap();
        assert_eq!(s.caption_count(), 2);
        assert_eq!(s.caption("q0").unwrap().split, Split::Test);
        assert_eq!(s.image("a").unwrap().caption_ids, vec!["a0"]);
        assert_eq!(s.caption_text("a0", Language::German).unwrap(), Some("ein Flugzeug"));
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SyntheticConfig {
            images: 12,
            translations: vec![Language::Portuguese],
            ..Default::default()
        };
        let a = generate_store(&cfg).unwrap();
        let b = generate_store(&cfg).unwrap();
        assert_eq!(a.captions(), b.captions());
        assert_eq!(a.caption_count(), 60);
        let s = a.summary();
        assert_eq!(s.images_by_split[&Split::Test], 2);
        assert_eq!(s.translations, 60);
        let texts: std::collections::HashSet<_> = a.captions().iter().map(|c| c.text.as_str()).collect();
        assert!(texts.len() < 60, "generator should produce some duplicate texts");
    }

    #[test]
    fn written_store_loads() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SyntheticConfig {
            images: 6,
            ..Default::default()
        };
        let files = write_synthetic(&cfg, dir.path()).unwrap();
        let loaded = build_datastore(&files).unwrap();
        assert_eq!(loaded.caption_count(), 30);
        let png = std::fs::read(dir.path().join(&loaded.images()[0].image_ref)).unwrap();
        assert_eq!(png, TINY_PNG);
    }
}
