use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::format::{read_vector_file, write_vector_file};
use super::vector::{EmbeddingVector, VectorTable};
use super::StoreError;
use crate::language::Language;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// Set of splits eligible for retrieval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitFilter(BTreeSet<Split>);

impl SplitFilter {
    pub fn new(splits: impl IntoIterator<Item = Split>) -> Self {
        Self(splits.into_iter().collect())
    }

    pub fn train_only() -> Self {
        Self::new([Split::Train])
    }

    pub fn all() -> Self {
        Self::new([Split::Train, Split::Val, Split::Test])
    }

    pub fn allows(&self, split: Split) -> bool {
        self.0.contains(&split)
    }

    pub fn splits(&self) -> impl Iterator<Item = Split> + '_ {
        self.0.iter().copied()
    }
}

impl Default for SplitFilter {
    fn default() -> Self {
        Self::train_only()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub caption_id: String,
    pub image_id: String,
    pub text: String,
    pub split: Split,
    pub embedding_row: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub image_ref: String,
    pub split: Split,
    pub embedding_row: usize,
    pub caption_ids: Vec<String>,
}

/// Translated caption texts keyed by `(caption_id, language)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TranslationTable {
    entries: HashMap<(String, Language), String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TranslationRow {
    caption_id: String,
    language: String,
    text: String,
}

impl TranslationTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an entry. Returns `false` (and keeps the old text) if the key exists.
    pub fn insert(&mut self, caption_id: impl Into<String>, language: Language, text: impl Into<String>) -> bool {
        use std::collections::hash_map::Entry;
        match self.entries.entry((caption_id.into(), language)) {
            Entry::Occupied(_) => false,
            Entry::Vacant(v) => {
                v.insert(text.into());
                true
            }
        }
    }

    pub fn get(&self, caption_id: &str, language: Language) -> Option<&str> {
        // HashMap<(String, _)> cannot be probed with (&str, _) without allocating.
        self.entries
            .get(&(caption_id.to_string(), language))
            .map(String::as_str)
    }

    pub fn contains(&self, caption_id: &str, language: Language) -> bool {
        self.get(caption_id, language).is_some()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn languages(&self) -> BTreeSet<Language> {
        self.entries.keys().map(|(_, l)| *l).collect()
    }

    /// Entries sorted by `(caption_id, language code)`.
    pub fn sorted_entries(&self) -> Vec<(&str, Language, &str)> {
        let mut rows: Vec<_> = self
            .entries
            .iter()
            .map(|((id, lang), text)| (id.as_str(), *lang, text.as_str()))
            .collect();
        rows.sort_by(|a, b| (a.0, a.1.code()).cmp(&(b.0, b.1.code())));
        rows
    }

    /// Parses a translations JSON Lines stream. Identical duplicate rows are
    /// tolerated; conflicting ones are rejected.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self, StoreError> {
        let mut table = TranslationTable::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| StoreError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: TranslationRow = serde_json::from_str(&line).map_err(|e| StoreError::Translation {
                line: line_no,
                message: e.to_string(),
            })?;
            let language: Language = row
                .language
                .parse()
                .map_err(|e: crate::language::UnsupportedLanguage| StoreError::Translation {
                    line: line_no,
                    message: e.to_string(),
                })?;
            if row.text.trim().is_empty() {
                return Err(StoreError::Translation {
                    line: line_no,
                    message: format!("empty text for caption {:?}", row.caption_id),
                });
            }
            if let Some(existing) = table.get(&row.caption_id, language) {
                if existing != row.text {
                    return Err(StoreError::Translation {
                        line: line_no,
                        message: format!("conflicting duplicate for ({:?}, {})", row.caption_id, language),
                    });
                }
                continue;
            }
            table.insert(row.caption_id, language, row.text);
        }
        Ok(table)
    }

    pub fn read_file(path: &Path) -> Result<Self, StoreError> {
        let file = File::open(path).map_err(|e| StoreError::open(path, e))?;
        Self::read_jsonl(BufReader::new(file)).map_err(|e| e.at(path))
    }

    pub fn to_jsonl_line(caption_id: &str, language: Language, text: &str) -> String {
        serde_json::to_string(&TranslationRow {
            caption_id: caption_id.to_string(),
            language: language.code().to_string(),
            text: text.to_string(),
        })
        .expect("translation rows always serialize")
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (id, lang, text) in self.sorted_entries() {
            writeln!(w, "{}", Self::to_jsonl_line(id, lang, text))?;
        }
        Ok(())
    }
}

/// Paths making up an on-disk datastore.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatastoreFiles {
    pub image_vectors: PathBuf,
    pub caption_vectors: PathBuf,
    pub metadata: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translations: Option<PathBuf>,
}

impl DatastoreFiles {
    /// Conventional file names inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            image_vectors: dir.join("images.evec"),
            caption_vectors: dir.join("captions.evec"),
            metadata: dir.join("metadata.jsonl"),
            translations: Some(dir.join("translations.jsonl")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoreSummary {
    pub dim: usize,
    pub images: usize,
    pub captions: usize,
    pub images_by_split: BTreeMap<Split, usize>,
    pub captions_by_split: BTreeMap<Split, usize>,
    pub translations: usize,
    pub translation_languages: Vec<Language>,
}

/// The immutable retrieval corpus.
#[derive(Debug, Clone)]
pub struct Datastore {
    dim: usize,
    images: Vec<ImageRecord>,
    captions: Vec<CaptionRecord>,
    image_vectors: VectorTable,
    caption_vectors: VectorTable,
    translations: TranslationTable,
    image_index: HashMap<String, usize>,
    caption_index: HashMap<String, usize>,
}

impl Datastore {
    /// Validates and assembles a datastore from in-memory parts.
    pub fn from_parts(
        images: Vec<ImageRecord>,
        captions: Vec<CaptionRecord>,
        image_vectors: VectorTable,
        caption_vectors: VectorTable,
        translations: TranslationTable,
    ) -> Result<Self, StoreError> {
        if caption_vectors.is_empty() || captions.is_empty() {
            return Err(StoreError::EmptyDatastore);
        }
        if image_vectors.dim() != caption_vectors.dim() {
            return Err(StoreError::DimensionMismatch {
                expected: caption_vectors.dim(),
                found: image_vectors.dim(),
            });
        }
        let dim = caption_vectors.dim();

        let mut caption_index = HashMap::with_capacity(captions.len());
        for (i, c) in captions.iter().enumerate() {
            if caption_index.insert(c.caption_id.clone(), i).is_some() {
                return Err(StoreError::DuplicateId {
                    kind: "caption",
                    id: c.caption_id.clone(),
                });
            }
            if c.text.trim().is_empty() {
                return Err(StoreError::EmptyText(c.caption_id.clone()));
            }
            if c.embedding_row >= caption_vectors.len() {
                return Err(StoreError::DanglingRow {
                    kind: "caption",
                    id: c.caption_id.clone(),
                    row: c.embedding_row as u64,
                    count: caption_vectors.len(),
                });
            }
            if caption_vectors.norm(c.embedding_row) == 0.0 {
                return Err(StoreError::DegenerateRow {
                    table: "caption",
                    row: c.embedding_row,
                });
            }
        }

        let mut image_index = HashMap::with_capacity(images.len());
        for (i, img) in images.iter().enumerate() {
            if image_index.insert(img.image_id.clone(), i).is_some() {
                return Err(StoreError::DuplicateId {
                    kind: "image",
                    id: img.image_id.clone(),
                });
            }
            if img.embedding_row >= image_vectors.len() {
                return Err(StoreError::DanglingRow {
                    kind: "image",
                    id: img.image_id.clone(),
                    row: img.embedding_row as u64,
                    count: image_vectors.len(),
                });
            }
            if image_vectors.norm(img.embedding_row) == 0.0 {
                return Err(StoreError::DegenerateRow {
                    table: "image",
                    row: img.embedding_row,
                });
            }
            for cid in &img.caption_ids {
                if !caption_index.contains_key(cid) {
                    return Err(StoreError::UnknownCaption(cid.clone()));
                }
            }
        }
        for c in &captions {
            if !image_index.contains_key(&c.image_id) {
                return Err(StoreError::UnknownImage(c.image_id.clone()));
            }
        }
        for (id, _, _) in translations.sorted_entries() {
            if !caption_index.contains_key(id) {
                return Err(StoreError::UnknownCaption(id.to_string()));
            }
        }

        Ok(Self {
            dim,
            images,
            captions,
            image_vectors,
            caption_vectors,
            translations,
            image_index,
            caption_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn captions(&self) -> &[CaptionRecord] {
        &self.captions
    }

    pub fn translations(&self) -> &TranslationTable {
        &self.translations
    }

    pub fn caption_count(&self) -> usize {
        self.captions.len()
    }

    pub fn image(&self, image_id: &str) -> Result<&ImageRecord, StoreError> {
        self.image_index
            .get(image_id)
            .map(|&i| &self.images[i])
            .ok_or_else(|| StoreError::UnknownImage(image_id.to_string()))
    }

    pub fn caption(&self, caption_id: &str) -> Result<&CaptionRecord, StoreError> {
        self.caption_index
            .get(caption_id)
            .map(|&i| &self.captions[i])
            .ok_or_else(|| StoreError::UnknownCaption(caption_id.to_string()))
    }

    pub fn image_embedding(&self, image_id: &str) -> Result<EmbeddingVector, StoreError> {
        let rec = self.image(image_id)?;
        Ok(self.image_vectors.vector(rec.embedding_row))
    }

    pub fn caption_embedding(&self, caption_id: &str) -> Result<EmbeddingVector, StoreError> {
        let rec = self.caption(caption_id)?;
        Ok(self.caption_vectors.vector(rec.embedding_row))
    }

    pub(crate) fn image_vectors(&self) -> &VectorTable {
        &self.image_vectors
    }

    pub(crate) fn caption_vectors(&self) -> &VectorTable {
        &self.caption_vectors
    }

    /// Caption text in `language`: the original for English, otherwise the
    /// translation table entry.
    pub fn caption_text(&self, caption_id: &str, language: Language) -> Result<Option<&str>, StoreError> {
        let rec = self.caption(caption_id)?;
        if language == Language::English {
            return Ok(Some(rec.text.as_str()));
        }
        Ok(self.translations.get(caption_id, language))
    }

    /// Ground-truth captions of an image in `language`, in metadata order.
    /// Captions without a translation are skipped.
    pub fn references(&self, image_id: &str, language: Language) -> Result<Vec<String>, StoreError> {
        let img = self.image(image_id)?;
        let mut refs = Vec::with_capacity(img.caption_ids.len());
        for cid in &img.caption_ids {
            if let Some(text) = self.caption_text(cid, language)? {
                refs.push(text.to_string());
            }
        }
        Ok(refs)
    }

    pub fn summary(&self) -> StoreSummary {
        let mut images_by_split = BTreeMap::new();
        for img in &self.images {
            *images_by_split.entry(img.split).or_insert(0) += 1;
        }
        let mut captions_by_split = BTreeMap::new();
        for c in &self.captions {
            *captions_by_split.entry(c.split).or_insert(0) += 1;
        }
        StoreSummary {
            dim: self.dim,
            images: self.images.len(),
            captions: self.captions.len(),
            images_by_split,
            captions_by_split,
            translations: self.translations.len(),
            translation_languages: self.translations.languages().into_iter().collect(),
        }
    }

    /// Returns a copy with a replaced translation table (validated).
    pub fn with_translations(&self, translations: TranslationTable) -> Result<Self, StoreError> {
        Self::from_parts(
            self.images.clone(),
            self.captions.clone(),
            self.image_vectors.clone(),
            self.caption_vectors.clone(),
            translations,
        )
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MetadataRow {
    caption_id: String,
    image_id: String,
    split: Split,
    text: String,
    caption_row: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_row: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_ref: Option<String>,
}

struct PendingImage {
    image_id: String,
    split: Split,
    image_row: Option<u64>,
    image_ref: Option<String>,
    caption_ids: Vec<String>,
}

fn read_metadata<R: BufRead>(
    reader: R,
    image_count: usize,
) -> Result<(Vec<ImageRecord>, Vec<CaptionRecord>), StoreError> {
    let mut captions = Vec::new();
    let mut pending: Vec<PendingImage> = Vec::new();
    let mut pending_index: HashMap<String, usize> = HashMap::new();

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| StoreError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: MetadataRow = serde_json::from_str(&line).map_err(|e| StoreError::Metadata {
            line: line_no,
            message: e.to_string(),
        })?;
        let caption_row = usize::try_from(row.caption_row).unwrap_or(usize::MAX);

        let slot = match pending_index.get(&row.image_id) {
            Some(&slot) => slot,
            None => {
                pending.push(PendingImage {
                    image_id: row.image_id.clone(),
                    split: row.split,
                    image_row: None,
                    image_ref: None,
                    caption_ids: Vec::new(),
                });
                pending_index.insert(row.image_id.clone(), pending.len() - 1);
                pending.len() - 1
            }
        };
        let img = &mut pending[slot];
        if img.split != row.split {
            return Err(StoreError::InconsistentImage {
                image_id: row.image_id,
                field: "split",
            });
        }
        if let Some(r) = row.image_row {
            match img.image_row {
                Some(existing) if existing != r => {
                    return Err(StoreError::InconsistentImage {
                        image_id: row.image_id,
                        field: "image_row",
                    })
                }
                _ => img.image_row = Some(r),
            }
        }
        if let Some(r) = row.image_ref {
            match &img.image_ref {
                Some(existing) if *existing != r => {
                    return Err(StoreError::InconsistentImage {
                        image_id: row.image_id,
                        field: "image_ref",
                    })
                }
                _ => img.image_ref = Some(r),
            }
        }
        img.caption_ids.push(row.caption_id.clone());
        captions.push(CaptionRecord {
            caption_id: row.caption_id,
            image_id: row.image_id,
            text: row.text,
            split: row.split,
            embedding_row: caption_row,
        });
    }

    let images = pending
        .into_iter()
        .map(|p| {
            let (Some(row), Some(image_ref)) = (p.image_row, p.image_ref) else {
                return Err(StoreError::MissingImageFields(p.image_id));
            };
            let embedding_row =
                usize::try_from(row)
                    .ok()
                    .filter(|&r| r < image_count)
                    .ok_or_else(|| StoreError::DanglingRow {
                        kind: "image",
                        id: p.image_id.clone(),
                        row,
                        count: image_count,
                    })?;
            Ok(ImageRecord {
                image_id: p.image_id,
                image_ref,
                split: p.split,
                embedding_row,
                caption_ids: p.caption_ids,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((images, captions))
}

/// Loads and validates a datastore from disk.
pub fn build_datastore(files: &DatastoreFiles) -> Result<Datastore, StoreError> {
    let image_vectors = read_vector_file(&files.image_vectors)?;
    let caption_vectors = read_vector_file(&files.caption_vectors)?;
    if caption_vectors.is_empty() {
        return Err(StoreError::EmptyDatastore.at(&files.caption_vectors));
    }
    if image_vectors.dim() != caption_vectors.dim() {
        return Err(StoreError::DimensionMismatch {
            expected: caption_vectors.dim(),
            found: image_vectors.dim(),
        }
        .at(&files.image_vectors));
    }
    let meta_file = File::open(&files.metadata).map_err(|e| StoreError::open(&files.metadata, e))?;
    let (images, captions) =
        read_metadata(BufReader::new(meta_file), image_vectors.len()).map_err(|e| e.at(&files.metadata))?;
    let translations = match &files.translations {
        Some(path) if path.exists() => TranslationTable::read_file(path)?,
        _ => TranslationTable::new(),
    };
    Datastore::from_parts(images, captions, image_vectors, caption_vectors, translations)
}

/// Writes a datastore in the on-disk layout described by `files`.
pub fn write_datastore(store: &Datastore, files: &DatastoreFiles) -> Result<(), StoreError> {
    write_vector_file(&files.image_vectors, store.dim, store.image_vectors.raw())?;
    write_vector_file(&files.caption_vectors, store.dim, store.caption_vectors.raw())?;

    let io = |path: &Path, e: std::io::Error| StoreError::Io(format!("{}: {e}", path.display()));
    let meta = File::create(&files.metadata).map_err(|e| StoreError::open(&files.metadata, e))?;
    let mut w = BufWriter::new(meta);
    let mut seen = BTreeSet::new();
    for c in &store.captions {
        let img = store.image(&c.image_id)?;
        let first = seen.insert(c.image_id.clone());
        let row = MetadataRow {
            caption_id: c.caption_id.clone(),
            image_id: c.image_id.clone(),
            split: c.split,
            text: c.text.clone(),
            caption_row: c.embedding_row as u64,
            image_row: first.then_some(img.embedding_row as u64),
            image_ref: first.then(|| img.image_ref.clone()),
        };
        let line = serde_json::to_string(&row).expect("metadata rows always serialize");
        writeln!(w, "{line}").map_err(|e| io(&files.metadata, e))?;
    }
    w.flush().map_err(|e| io(&files.metadata, e))?;

    if let Some(path) = &files.translations {
        let f = File::create(path).map_err(|e| StoreError::open(path, e))?;
        let mut w = BufWriter::new(f);
        store.translations.write_jsonl(&mut w).map_err(|e| io(path, e))?;
        w.flush().map_err(|e| io(path, e))?;
    }
    Ok(())
}
