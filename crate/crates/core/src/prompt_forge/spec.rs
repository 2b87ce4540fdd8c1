use serde::{Deserialize, Serialize};

use super::render::{render_baseline_prompt, render_caption_prompt};
use super::{PromptError, Selection};
use crate::embed_store::Datastore;
use crate::Language;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    /// Text-only prompt for an LLM.
    ImageBlind,
    /// Same prompt, plus the input image, for a VLM.
    ImageAware,
    /// Instruction only: no retrieved captions, no examples (image-aware wording).
    NoRetrievalBaseline,
}

impl PromptMode {
    pub fn needs_image(self) -> bool {
        matches!(self, PromptMode::ImageAware | PromptMode::NoRetrievalBaseline)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub image_id: String,
    /// English captions retrieved for the example image.
    pub retrieved_captions: Vec<String>,
    /// Ground-truth caption in the target language.
    pub gold_caption: String,
}

/// Everything needed to reproduce a prompt, plus the rendered text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub mode: PromptMode,
    pub language: Language,
    #[serde(rename = "N")]
    pub n_examples: usize,
    #[serde(rename = "k")]
    pub k_captions: usize,
    pub examples: Vec<FewShotExample>,
    pub input_captions: Vec<String>,
    pub rendered: String,
}

impl PromptSpec {
    /// Baseline spec for the no-retrieval mode.
    pub fn baseline(language: Language) -> Self {
        Self {
            mode: PromptMode::NoRetrievalBaseline,
            language,
            n_examples: 0,
            k_captions: 0,
            examples: Vec::new(),
            input_captions: Vec::new(),
            rendered: render_baseline_prompt(language),
        }
    }

    /// Re-renders from the structured fields.
    pub fn render(&self) -> Result<String, PromptError> {
        match self.mode {
            PromptMode::NoRetrievalBaseline => Ok(render_baseline_prompt(self.language)),
            _ => render_caption_prompt(self),
        }
    }

    /// Every caption text placed in the prompt (inputs, example captions, gold lines).
    pub fn prompt_captions(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for ex in &self.examples {
            out.extend(ex.retrieved_captions.iter().map(String::as_str));
            out.push(&ex.gold_caption);
        }
        out.extend(self.input_captions.iter().map(String::as_str));
        out
    }
}

/// Resolves a selection into a rendered prompt for `language`.
///
/// Gold captions come from the datastore's translation table (original text
/// for English). `n_examples` records what was achieved, which is below the
/// request when selection had to fall back.
pub fn build_prompt_spec(
    selection: &Selection,
    store: &Datastore,
    language: Language,
    mode: PromptMode,
) -> Result<PromptSpec, PromptError> {
    if mode == PromptMode::NoRetrievalBaseline {
        return Ok(PromptSpec::baseline(language));
    }
    let examples = selection
        .examples
        .iter()
        .map(|ex| {
            let gold =
                store
                    .caption_text(&ex.gold.caption_id, language)?
                    .ok_or_else(|| PromptError::MissingTranslation {
                        caption_id: ex.gold.caption_id.clone(),
                        language,
                    })?;
            Ok(FewShotExample {
                image_id: ex.image_id.clone(),
                retrieved_captions: ex.captions.iter().map(|c| c.text.clone()).collect(),
                gold_caption: gold.to_string(),
            })
        })
        .collect::<Result<Vec<_>, PromptError>>()?;
    let mut spec = PromptSpec {
        mode,
        language,
        n_examples: examples.len(),
        k_captions: selection.input_captions.len(),
        examples,
        input_captions: selection.input_captions.iter().map(|c| c.text.clone()).collect(),
        rendered: String::new(),
    };
    spec.rendered = render_caption_prompt(&spec)?;
    Ok(spec)
}
