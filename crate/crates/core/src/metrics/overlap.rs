//! Prompt/reference n-gram overlap and 1-gram attribution.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::tokenize::{ngrams, tokenize};
use crate::Language;

fn ngram_set(texts: &[String], n: usize, language: Language) -> BTreeSet<Vec<String>> {
    let mut out = BTreeSet::new();
    for t in texts {
        let tokens = tokenize(t, language).tokens;
        out.extend(ngrams(&tokens, n).map(<[String]>::to_vec));
    }
    out
}

/// `(|A∩B| / |A|, |A∩B| / |B|)` for sets of unique n-grams, with each ratio
/// 0 when its denominator set is empty.
pub fn set_overlap<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> (f64, f64) {
    let common = a.intersection(b).count() as f64;
    let ratio = |d: usize| if d == 0 { 0.0 } else { common / d as f64 };
    (ratio(a.len()), ratio(b.len()))
}

/// Precision and recall of the prompt captions' unique n-grams against the
/// references' unique n-grams. N-grams never span two captions.
pub fn ngram_overlap(
    prompt_captions: &[String],
    reference_captions: &[String],
    n: usize,
    language: Language,
) -> (f64, f64) {
    set_overlap(
        &ngram_set(prompt_captions, n, language),
        &ngram_set(reference_captions, n, language),
    )
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionCounts {
    pub valid_in: usize,
    pub invalid_in: usize,
    pub valid_out: usize,
    pub invalid_out: usize,
}

impl AttributionCounts {
    pub fn total(&self) -> usize {
        self.valid_in + self.invalid_in + self.valid_out + self.invalid_out
    }

    pub fn add(&mut self, other: &AttributionCounts) {
        self.valid_in += other.valid_in;
        self.invalid_in += other.invalid_in;
        self.valid_out += other.valid_out;
        self.invalid_out += other.invalid_out;
    }
}

/// Classifies each unique 1-gram of `generated` as valid (found in some
/// reference) or invalid, and as present in the prompt captions or not.
pub fn prompt_attribution(
    generated: &str,
    references: &[String],
    prompt_captions: &[String],
    language: Language,
) -> AttributionCounts {
    let gen = ngram_set(std::slice::from_ref(&generated.to_string()), 1, language);
    let refs = ngram_set(references, 1, language);
    let prompt = ngram_set(prompt_captions, 1, language);
    let mut c = AttributionCounts::default();
    for g in &gen {
        match (refs.contains(g), prompt.contains(g)) {
            (true, true) => c.valid_in += 1,
            (false, true) => c.invalid_in += 1,
            (true, false) => c.valid_out += 1,
            (false, false) => c.invalid_out += 1,
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn set_arithmetic() {
        let a: BTreeSet<_> = ["a", "b", "c", "d"].into_iter().collect();
        let b: BTreeSet<_> = ["b", "c", "e"].into_iter().collect();
        assert_eq!(set_overlap(&a, &b), (0.5, 2.0 / 3.0));
        assert_eq!(set_overlap(&a, &a), (1.0, 1.0));
        let c: BTreeSet<_> = ["x"].into_iter().collect();
        assert_eq!(set_overlap(&a, &c), (0.0, 0.0));
        let empty = BTreeSet::new();
        assert_eq!(set_overlap(&empty, &a), (0.0, 0.0));
    }

    #[test]
    fn unigram_and_fourgram_overlap() {
        let p = s(&["a b c d"]);
        let r = s(&["b c e"]);
        assert_eq!(ngram_overlap(&p, &r, 1, Language::English), (0.5, 2.0 / 3.0));
        // No 4-gram in the reference side.
        assert_eq!(ngram_overlap(&p, &r, 4, Language::English), (0.0, 0.0));
        let same = s(&["many planes are parked near the terminal"]);
        assert_eq!(ngram_overlap(&same, &same, 4, Language::English), (1.0, 1.0));
    }

    #[test]
    fn attribution_hand_enumeration() {
        let refs = s(&["a white plane is parked", "one plane near the terminal"]);
        let prompt = s(&["a plane on the runway", "two white planes", "a red car is parked"]);
        // Unique tokens: a the white plane is parked beside trees
        let generated = "a white plane is parked beside the trees";
        let c = prompt_attribution(generated, &refs, &prompt, Language::English);
        // valid_in: a white plane is parked the
        // valid_out: none; invalid_out: beside trees
        assert_eq!(
            c,
            AttributionCounts {
                valid_in: 6,
                invalid_in: 0,
                valid_out: 0,
                invalid_out: 2
            }
        );
        let c = prompt_attribution("two runway planes terminal x", &refs, &prompt, Language::English);
        assert_eq!(
            c,
            AttributionCounts {
                valid_in: 0,
                invalid_in: 3,
                valid_out: 1,
                invalid_out: 1
            }
        );
        assert_eq!(c.total(), 5);
    }

    #[test]
    fn attribution_identity() {
        let t = "a plane is parked";
        let c = prompt_attribution(t, &s(&[t]), &s(&[t]), Language::English);
        assert_eq!(c.valid_in, 4);
        assert_eq!(c.total(), 4);
    }
}
