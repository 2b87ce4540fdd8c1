use ragcap::prompt_forge::{
    render_baseline_prompt, render_caption_prompt, render_translation_prompt, FewShotExample, PromptMode, PromptSpec,
};
use ragcap::Language;

fn owned(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn portuguese_spec(mode: PromptMode) -> PromptSpec {
    let examples = [
        (
            [
                "many planes are parked near the terminal",
                "two white planes are on the apron",
                "an airport with a long runway",
            ],
            "muitos aviões estão estacionados perto do terminal",
        ),
        (
            [
                "a runway next to some green fields",
                "several planes beside a building",
                "the apron of a small airport",
            ],
            "uma pista ao lado de alguns campos verdes",
        ),
        (
            [
                "three planes are parked in a row",
                "a gray terminal with planes",
                "some cars in a parking lot near an airport",
            ],
            "três aviões estacionados em fila",
        ),
    ];
    PromptSpec {
        mode,
        language: Language::Portuguese,
        n_examples: 3,
        k_captions: 3,
        examples: examples
            .iter()
            .enumerate()
            .map(|(i, (caps, gold))| FewShotExample {
                image_id: format!("ex{i}"),
                retrieved_captions: owned(caps),
                gold_caption: gold.to_string(),
            })
            .collect(),
        input_captions: owned(&[
            "two planes are parked at the airport",
            "a terminal building surrounded by planes",
            "an airport with several runways",
        ]),
        rendered: String::new(),
    }
}

#[test]
fn blind_prompt_matches_golden() {
    let out = render_caption_prompt(&portuguese_spec(PromptMode::ImageBlind)).unwrap();
    assert_eq!(out, include_str!("golden/prompt_pt_blind.txt"));
    assert_eq!(out.lines().filter(|l| l.starts_with("CAPTION ")).count(), 12);
}

#[test]
fn aware_prompt_adds_only_the_image_clause() {
    let out = render_caption_prompt(&portuguese_spec(PromptMode::ImageAware)).unwrap();
    let golden = include_str!("golden/prompt_pt_blind.txt");
    assert_eq!(
        out.replacen("analyze the input image, plus the", "analyze the", 1),
        golden
    );
}

#[test]
fn baseline_prompt_matches_golden() {
    assert_eq!(
        render_baseline_prompt(Language::German),
        include_str!("golden/prompt_de_baseline.txt")
    );
}

#[test]
fn translation_prompt_matches_golden() {
    assert_eq!(
        render_translation_prompt("two planes are parked at the airport", Language::Korean).unwrap(),
        include_str!("golden/translate_ko.txt")
    );
}
