//! Prompt templates.
//!
//! The captioning prompt has four sections separated by blank lines: the
//! task instruction, the few-shot examples, the input captions and the
//! closing instructions. Image-aware prompts differ from image-blind ones
//! only by the clause "the input image, plus " in the instruction.

use std::fmt::Write;

use super::{PromptError, PromptMode, PromptSpec};
use crate::Language;

const IMAGE_CLAUSE: &str = "the input image, plus ";

fn instruction(language: &str, with_image: bool) -> String {
    format!(
        "You are an intelligent image captioning bot tasked with describing aerial images with short and \
         concise descriptions in the {language} language. To generate a short one-sentence caption that \
         accurately describes an input image in {language}, you should analyze {clause}the information \
         present in a set of English captions associated to other images that are similar to the input, \
         attending to common features in these descriptions and avoiding spurious information resulting \
         from errors in the process of retrieving similar examples.",
        clause = if with_image { IMAGE_CLAUSE } else { "" },
    )
}

const FIRST_EXAMPLE_INTRO: &str = "To illustrate how the captioning task should be performed, consider that an \
     aerial image that is highly similar to the input that you need to process is associated to the following \
     set of different descriptions:";

const NEXT_EXAMPLE_INTRO: &str = "In another example illustrating how the captioning task should be performed, \
     consider that the aerial image is associated to the following set of descriptions:";

const INPUT_INTRO: &str =
    "For the input that you need to process, consider that similar images are associated to the following captions:";

fn gold_line(language: &str, gold: &str) -> String {
    format!("A short and concise caption that can be used to describe this image in {language} would be: {gold}")
}

fn closing_notice(language: &str) -> String {
    format!(
        "Notice that you should generate a description specifically in {language} and not in any other \
         language, from the complete instructions that are being provided to you. The caption that is to be \
         generated should be direct and concise, consisting of a single sentence and featuring only accurate \
         information about the input. Be particularly careful when describing object properties such as color \
         or size, or when mentioning objects that are seldom encountered on aerial images, given that this \
         information is more likely to correspond to mistakes derived from incorrect similarity assessments."
    )
}

fn final_request(language: &str) -> String {
    format!(
        "Reflecting upon all the previous information, a short and concise caption that can describe the input \
         image in {language} is:"
    )
}

fn caption_block(out: &mut String, captions: &[String]) {
    for (i, c) in captions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = write!(out, "CAPTION {}: {c}", i + 1);
    }
}

/// Renders the retrieval-augmented captioning prompt.
pub fn render_caption_prompt(spec: &PromptSpec) -> Result<String, PromptError> {
    if spec.mode == PromptMode::NoRetrievalBaseline {
        return Err(PromptError::InvalidSpec(
            "baseline specs are rendered with render_baseline_prompt".into(),
        ));
    }
    let k = spec.k_captions;
    if k == 0 || spec.input_captions.len() != k {
        return Err(PromptError::InvalidSpec(format!(
            "expected {k} input captions, found {}",
            spec.input_captions.len()
        )));
    }
    if spec.examples.len() != spec.n_examples {
        return Err(PromptError::InvalidSpec(format!(
            "expected {} examples, found {}",
            spec.n_examples,
            spec.examples.len()
        )));
    }
    if let Some(ex) = spec.examples.iter().find(|e| e.retrieved_captions.len() != k) {
        return Err(PromptError::InvalidSpec(format!(
            "example {} has {} captions, expected {k}",
            ex.image_id,
            ex.retrieved_captions.len()
        )));
    }

    let lang = spec.language.name();
    let mut out = instruction(lang, spec.mode == PromptMode::ImageAware);
    for (i, ex) in spec.examples.iter().enumerate() {
        out.push_str("\n\n");
        out.push_str(if i == 0 {
            FIRST_EXAMPLE_INTRO
        } else {
            NEXT_EXAMPLE_INTRO
        });
        out.push_str("\n\n");
        caption_block(&mut out, &ex.retrieved_captions);
        out.push_str("\n\n");
        out.push_str(&gold_line(lang, &ex.gold_caption));
    }
    out.push_str("\n\n");
    out.push_str(INPUT_INTRO);
    out.push_str("\n\n");
    caption_block(&mut out, &spec.input_captions);
    out.push_str("\n\n");
    out.push_str(&closing_notice(lang));
    out.push_str("\n\n");
    out.push_str(&final_request(lang));
    Ok(out)
}

/// Instruction paragraph (image-aware wording) followed by the final request.
pub fn render_baseline_prompt(language: Language) -> String {
    let lang = language.name();
    format!("{}\n\n{}", instruction(lang, true), final_request(lang))
}

/// Zero-shot translation instruction for one English caption.
pub fn render_translation_prompt(caption: &str, language: Language) -> Result<String, PromptError> {
    if caption.is_empty() {
        return Err(PromptError::EmptyCaption);
    }
    let lang = language.name();
    Ok(format!(
        "Translate the following text from English into {lang}.\nEnglish: {caption}\n{lang}:"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt_forge::FewShotExample;

    fn spec(n: usize, k: usize, mode: PromptMode, language: Language) -> PromptSpec {
        let caps = |p: &str| (1..=k).map(|i| format!("{p} caption {i}")).collect::<Vec<_>>();
        PromptSpec {
            mode,
            language,
            n_examples: n,
            k_captions: k,
            examples: (1..=n)
                .map(|e| FewShotExample {
                    image_id: format!("img{e}"),
                    retrieved_captions: caps(&format!("example {e}")),
                    gold_caption: format!("gold {e}"),
                })
                .collect(),
            input_captions: caps("input"),
            rendered: String::new(),
        }
    }

    fn count_lines(text: &str, prefix: &str) -> usize {
        text.lines().filter(|l| l.starts_with(prefix)).count()
    }

    #[test]
    fn caption_and_gold_line_counts() {
        let out = render_caption_prompt(&spec(3, 3, PromptMode::ImageBlind, Language::English)).unwrap();
        assert_eq!(count_lines(&out, "CAPTION "), 12);
        assert_eq!(count_lines(&out, "A short and concise caption"), 3);
        let out = render_caption_prompt(&spec(5, 5, PromptMode::ImageBlind, Language::English)).unwrap();
        assert_eq!(count_lines(&out, "CAPTION "), 30);
        assert_eq!(count_lines(&out, "A short and concise caption"), 5);
    }

    #[test]
    fn aware_differs_only_by_clause() {
        let blind = render_caption_prompt(&spec(2, 3, PromptMode::ImageBlind, Language::German)).unwrap();
        let aware = render_caption_prompt(&spec(2, 3, PromptMode::ImageAware, Language::German)).unwrap();
        assert_ne!(blind, aware);
        assert_eq!(aware.replacen(IMAGE_CLAUSE, "", 1), blind);
        assert!(aware.contains("you should analyze the input image, plus the information present"));
        assert!(blind.contains("you should analyze the information present"));
    }

    #[test]
    fn language_substituted_everywhere() {
        let out = render_caption_prompt(&spec(1, 2, PromptMode::ImageBlind, Language::Portuguese)).unwrap();
        assert_eq!(out.matches("Portuguese").count(), 5);
        assert!(!out.contains("<language>"));
        assert!(out.ends_with("a short and concise caption that can describe the input image in Portuguese is:"));
    }

    #[test]
    fn zero_examples_has_only_inputs() {
        let out = render_caption_prompt(&spec(0, 3, PromptMode::ImageBlind, Language::English)).unwrap();
        assert_eq!(count_lines(&out, "CAPTION "), 3);
        assert!(!out.contains("To illustrate"));
    }

    #[test]
    fn structural_validation() {
        let mut s = spec(1, 3, PromptMode::ImageBlind, Language::English);
        s.examples[0].retrieved_captions.pop();
        assert!(render_caption_prompt(&s).is_err());
        let mut s = spec(1, 3, PromptMode::ImageBlind, Language::English);
        s.input_captions.pop();
        assert!(render_caption_prompt(&s).is_err());
        let s = spec(1, 3, PromptMode::NoRetrievalBaseline, Language::English);
        assert!(render_caption_prompt(&s).is_err());
    }

    #[test]
    fn baseline_prompt() {
        let out = render_baseline_prompt(Language::French);
        assert_eq!(count_lines(&out, "CAPTION"), 0);
        assert!(out.contains("image captioning bot"));
        assert!(out.contains("the input image, plus"));
        assert!(out.ends_with("describe the input image in French is:"));
    }

    #[test]
    fn translation_prompt() {
        assert_eq!(
            render_translation_prompt("a plane is parked", Language::German).unwrap(),
            "Translate the following text from English into German.\nEnglish: a plane is parked\nGerman:"
        );
        assert_eq!(
            render_translation_prompt("", Language::German),
            Err(PromptError::EmptyCaption)
        );
        let multi = render_translation_prompt("line one\nline two", Language::Dutch).unwrap();
        assert_eq!(
            multi.as_bytes(),
            b"Translate the following text from English into Dutch.\nEnglish: line one\nline two\nDutch:"
        );
    }

    #[test]
    fn rendering_is_pure() {
        let s = spec(3, 3, PromptMode::ImageAware, Language::Korean);
        assert_eq!(render_caption_prompt(&s).unwrap(), render_caption_prompt(&s).unwrap());
    }
}
